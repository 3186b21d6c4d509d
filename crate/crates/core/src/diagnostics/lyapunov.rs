//! The Cucker–Smale functional `𝓛 = 𝓓 + Φ(max d_X)` sampled along a run.
//!
//! `ψ̃ₜ` is the running minimum of `ψ̃` over `[0, max_{s≤t} d_X(s)]` and
//! `φ(t) = e^{−K̃T}·min{ψ̃ₜ, 1/T}`. `𝓓` restarts at every switch from the
//! velocity diameter at the interval's anchor (left end if attractive,
//! right end if repulsive) and decays by `1 − ∫φ`. Integrals use the
//! trapezoid rule on the recorded samples.

use serde::Serialize;

use super::certificates::IntervalCheck;
use super::{DiagnosticsError, DiameterSeries, Violations, ROUNDOFF_FLOOR};
use crate::integrator::Trajectory;
use crate::kernel::{default_grid_step, running_min, InfluenceKernel, RunningMin};
use crate::schedule::growth_factor;

/// Node budget for [`PhiTable::inverse`].
const MAX_PHI_NODES: usize = 20_000_000;

/// Nodes per unit of the largest radius when tabulating `Φ`.
const PHI_NODES: f64 = 10_000.0;

/// Cumulative trapezoid table of
/// `Φ(r) = ∫₀^r min{e^{−K̃T}·min_{σ≤ρ} ψ̃(σ), e^{−K̃T}/T} dρ` on a uniform grid.
#[derive(Clone, Debug)]
pub struct PhiTable {
    kernel: InfluenceKernel,
    scale: f64,
    cap: f64,
    step: f64,
    min: f64,
    last_weight: f64,
    values: Vec<f64>,
}

impl PhiTable {
    pub fn new(kernel: &InfluenceKernel, t_bound: f64, step: f64) -> Result<Self, DiagnosticsError> {
        if !(step > 0.0) {
            return Err(DiagnosticsError::Invalid(format!("Phi step must be positive, got {step}")));
        }
        let min = kernel.eval_radial(0.0)?;
        let scale = (-kernel.sup_norm() * t_bound).exp();
        let cap = 1.0 / t_bound;
        Ok(PhiTable { kernel: kernel.clone(), scale, cap, step, min, last_weight: scale * min.min(cap), values: vec![0.0] })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Largest radius tabulated so far.
    pub fn reach(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    fn push_node(&mut self) -> Result<(), DiagnosticsError> {
        let r_prev = self.reach();
        let mut rm = RunningMin::resume(&self.kernel, self.step, r_prev, self.min)?;
        self.min = rm.extend(r_prev + self.step)?;
        let w = self.scale * self.min.min(self.cap);
        let last = *self.values.last().unwrap();
        self.values.push(last + 0.5 * self.step * (self.last_weight + w));
        self.last_weight = w;
        Ok(())
    }

    pub fn extend_to(&mut self, r: f64) -> Result<(), DiagnosticsError> {
        while self.reach() < r {
            self.push_node()?;
        }
        Ok(())
    }

    /// `Φ(r)` by linear interpolation; `r` must lie within [`PhiTable::reach`].
    pub fn eval(&self, r: f64) -> f64 {
        assert!(r <= self.reach(), "Phi table does not reach {r}");
        let x = r / self.step;
        let j = (x.floor() as usize).min(self.values.len() - 2);
        let frac = x - j as f64;
        self.values[j] + frac * (self.values[j + 1] - self.values[j])
    }

    /// Smallest tabulated `r` with `Φ(r) ≥ c`, or `None` if the node budget runs out first.
    pub fn inverse(&mut self, c: f64) -> Result<Option<f64>, DiagnosticsError> {
        if c <= 0.0 {
            return Ok(Some(0.0));
        }
        while *self.values.last().unwrap() < c {
            if self.values.len() >= MAX_PHI_NODES {
                return Ok(None);
            }
            self.push_node()?;
        }
        let j = self.values.partition_point(|&v| v < c);
        let (lo, hi) = (self.values[j - 1], self.values[j]);
        Ok(Some(((j - 1) as f64 + (c - lo) / (hi - lo)) * self.step))
    }

    /// `Φ(0) = 0` and the table never decreases.
    pub fn is_monotone(&self) -> bool {
        self.values[0] == 0.0 && self.values.windows(2).all(|w| w[1] >= w[0])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovSeries {
    #[serde(rename = "T")]
    pub t_bound: f64,
    pub k_tilde: f64,
    pub grid_step: f64,
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(skip)]
    pub d_v: Vec<f64>,
    /// `max_{s≤t} d_X(s)`.
    #[serde(skip)]
    pub d_x_max: Vec<f64>,
    #[serde(skip)]
    pub psi_t: Vec<f64>,
    #[serde(skip)]
    pub phi: Vec<f64>,
    /// `∫₀ᵗ φ`.
    #[serde(skip)]
    pub phi_integral: Vec<f64>,
    #[serde(skip)]
    pub d_cal: Vec<f64>,
    #[serde(skip)]
    pub lyap: Vec<f64>,
    /// `𝓛` non-increasing inside every interval, starting from its right limit at the switch.
    pub monotone: Violations,
    /// `𝓛(t) ≤ G·𝓛(t₂ₙ₊₁)` on repulsive intervals.
    pub bad_jump: Violations,
    /// `𝓛(t) ≤ 𝓛(t₂ₙ)/(1 − ∫_{t₂ₙ₋₁}^{t₂ₙ} φ)` on attractive intervals after the first.
    pub good_jump: Violations,
    /// `d_V(t₂ₙ₊₁) ≤ (1 − ∫_{t₂ₙ}^{t₂ₙ₊₁} φ)·d_V(t₂ₙ)`.
    pub velocity_contraction: Vec<IntervalCheck>,
    pub phi_table_ok: bool,
    pub ok: bool,
    #[serde(skip)]
    pub phi_table: PhiTable,
}

/// Samples `𝓓`, `φ` and `𝓛` along a Cucker–Smale run and checks their bounds.
pub fn lyapunov_series(
    traj: &Trajectory,
    diam: &DiameterSeries,
    kernel: &InfluenceKernel,
    t_bound: f64,
    tol: f64,
) -> Result<LyapunovSeries, DiagnosticsError> {
    super::check_segments(traj)?;
    let d_v = diam
        .d_v
        .clone()
        .ok_or_else(|| DiagnosticsError::Invalid("Lyapunov series needs a Cucker-Smale run".into()))?;
    if !kernel.is_radial() {
        return Err(DiagnosticsError::Invalid("Lyapunov series needs a radial kernel".into()));
    }
    let k_tilde = kernel.sup_norm();
    if !(t_bound > std::f64::consts::LN_2 / k_tilde) {
        return Err(DiagnosticsError::Invalid(format!("T = {t_bound} must exceed ln2/K = {}", std::f64::consts::LN_2 / k_tilde)));
    }
    for seg in &traj.segments {
        let len = seg.interval.len();
        if len > t_bound * (1.0 + 1e-12) {
            return Err(DiagnosticsError::TIntervalViolation { index: seg.interval.index, length: len, t_bound });
        }
    }

    let n = traj.len();
    let times = traj.times.clone();
    let mut d_x_max = Vec::with_capacity(n);
    let mut r: f64 = 0.0;
    for &x in &diam.d_x {
        r = r.max(x);
        d_x_max.push(r);
    }
    let grid_step = default_grid_step(r);
    let scale = (-k_tilde * t_bound).exp();
    let mut rm = RunningMin::new(kernel, grid_step)?;
    let mut psi_t = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    for &rk in &d_x_max {
        let m = rm.extend(rk)?;
        psi_t.push(m);
        phi.push(scale * m.min(1.0 / t_bound));
    }
    let mut phi_integral = vec![0.0; n];
    for j in 1..n {
        phi_integral[j] = phi_integral[j - 1] + 0.5 * (times[j] - times[j - 1]) * (phi[j] + phi[j - 1]);
    }

    let mut table = PhiTable::new(kernel, t_bound, r.max(1e-3) / PHI_NODES)?;
    table.extend_to(r)?;
    let big_phi: Vec<f64> = d_x_max.iter().map(|&x| table.eval(x)).collect();

    let mut d_cal = vec![0.0; n];
    d_cal[0] = d_v[0];
    for seg in &traj.segments {
        let anchor = if seg.interval.is_good() { d_v[seg.first] } else { d_v[seg.last] };
        for j in seg.first + 1..=seg.last {
            d_cal[j] = (1.0 - (phi_integral[j] - phi_integral[seg.first])) * anchor;
        }
    }
    let lyap: Vec<f64> = d_cal.iter().zip(&big_phi).map(|(a, b)| a + b).collect();

    let mut monotone = Violations::default();
    let mut bad_jump = Violations::default();
    let mut good_jump = Violations::default();
    let mut velocity_contraction = Vec::new();
    let mut prev_bad_integral: Option<f64> = None;
    for seg in &traj.segments {
        let (a, b) = (seg.first, seg.last);
        let anchor = if seg.interval.is_good() { d_v[a] } else { d_v[b] };
        let right_limit = anchor + big_phi[a];
        let slack = tol * right_limit.max(f64::MIN_POSITIVE);
        let mut prev = right_limit;
        let mut peak = right_limit;
        for j in a + 1..=b {
            monotone.check(times[j], lyap[j], prev + slack);
            prev = lyap[j];
            peak = peak.max(lyap[j]);
        }
        let len = seg.interval.len();
        if seg.interval.is_good() {
            if let Some(i_bad) = prev_bad_integral {
                good_jump.check(seg.interval.start, peak, lyap[a] / (1.0 - i_bad) * (1.0 + tol));
            }
            let decay = 1.0 - (phi_integral[b] - phi_integral[a]);
            let bound = decay * d_v[a] + tol * d_v[a] + ROUNDOFF_FLOOR * d_v[0];
            velocity_contraction.push(IntervalCheck::new(seg, d_v[a], d_v[b], decay, bound));
        } else {
            let g = growth_factor(k_tilde, len)
                .ok_or(DiagnosticsError::FactorUndefined { index: seg.interval.index, length: len })?;
            bad_jump.check(seg.interval.start, peak, g * lyap[a] * (1.0 + tol));
            prev_bad_integral = Some(phi_integral[b] - phi_integral[a]);
        }
    }

    let phi_table_ok = table.is_monotone();
    let ok = monotone.is_empty()
        && bad_jump.is_empty()
        && good_jump.is_empty()
        && velocity_contraction.iter().all(|c| c.ok)
        && phi_table_ok;
    Ok(LyapunovSeries {
        t_bound,
        k_tilde,
        grid_step,
        times,
        d_v,
        d_x_max,
        psi_t,
        phi,
        phi_integral,
        d_cal,
        lyap,
        monotone,
        bad_jump,
        good_jump,
        velocity_contraction,
        phi_table_ok,
        ok,
        phi_table: table,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlockingVerdict {
    #[serde(rename = "dX_sup")]
    pub dx_sup: f64,
    #[serde(rename = "dV0")]
    pub dv0: f64,
    #[serde(rename = "dV_final")]
    pub dv_final: f64,
    pub eps_v: f64,
    pub flocked: bool,
    /// `min ψ̃` on `[0, dX_sup]`.
    pub psi_star: f64,
    pub phi_star: f64,
    /// `d_V(t₂ₙ₊₂) ≤ G·(1 − φ*·(t₂ₙ₊₁ − t₂ₙ))·d_V(t₂ₙ)` per cycle.
    pub cycles: Vec<IntervalCheck>,
    pub cycles_ok: bool,
    /// Upper bound on `𝓛` over the run: `𝓛(0)·Π G/(1 − ∫φ)` over repulsive intervals.
    pub lyap_bound: f64,
    /// `Φ⁻¹(lyap_bound)`; `None` if `Φ` stays below it within the node budget.
    pub d_star: Option<f64>,
    pub d_star_bound_ok: bool,
    pub ok: bool,
}

/// Flocking verdict and the position-diameter bound `dX_sup ≤ d*`.
pub fn flocking_detector(
    traj: &Trajectory,
    series: &LyapunovSeries,
    kernel: &InfluenceKernel,
    eps_v: f64,
    tol: f64,
) -> Result<FlockingVerdict, DiagnosticsError> {
    let d_v = &series.d_v;
    let dx_sup = *series.d_x_max.last().unwrap();
    let dv0 = d_v[0];
    let dv_final = *d_v.last().unwrap();
    let flocked = dv_final <= eps_v * dv0;
    let t_bound = series.t_bound;
    let k_tilde = series.k_tilde;
    let psi_star = running_min(kernel, dx_sup, None, series.grid_step)?;
    let phi_star = (-k_tilde * t_bound).exp() * psi_star.min(1.0 / t_bound);

    let segs = &traj.segments;
    let mut cycles = Vec::new();
    let mut log_growth = 0.0;
    for (s, seg) in segs.iter().enumerate() {
        if seg.interval.is_good() {
            let (end, g) = match segs.get(s + 1) {
                Some(bad) => {
                    let len = bad.interval.len();
                    let g = growth_factor(k_tilde, len)
                        .ok_or(DiagnosticsError::FactorUndefined { index: bad.interval.index, length: len })?;
                    (bad.last, g)
                }
                None => (seg.last, 1.0),
            };
            let factor = g * (1.0 - phi_star * seg.interval.len());
            let bound = factor * d_v[seg.first] * (1.0 + tol) + ROUNDOFF_FLOOR * dv0;
            let mut check = IntervalCheck::new(seg, d_v[seg.first], d_v[end], factor, bound);
            check.t_end = traj.times[end];
            cycles.push(check);
        } else {
            let len = seg.interval.len();
            let g = growth_factor(k_tilde, len)
                .ok_or(DiagnosticsError::FactorUndefined { index: seg.interval.index, length: len })?;
            let i_bad = series.phi_integral[seg.last] - series.phi_integral[seg.first];
            log_growth += g.ln() - (1.0 - i_bad).ln();
        }
    }
    let cycles_ok = cycles.iter().all(|c| c.ok);
    let lyap_bound = series.lyap[0] * log_growth.exp();
    let mut table = series.phi_table.clone();
    let d_star = table.inverse(lyap_bound)?;
    let d_star_bound_ok = d_star.map_or(true, |ds| dx_sup <= ds * (1.0 + tol) + table.step());
    Ok(FlockingVerdict {
        dx_sup,
        dv0,
        dv_final,
        eps_v,
        flocked,
        psi_star,
        phi_star,
        cycles,
        cycles_ok,
        lyap_bound,
        d_star,
        d_star_bound_ok,
        ok: cycles_ok && d_star_bound_ok,
    })
}
