use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{check_segments, DiagnosticsError, Violations, ROUNDOFF_FLOOR};
use crate::integrator::{Segment, Trajectory};
use crate::kernel::{InfluenceKernel, KernelForm};
use crate::schedule::{contraction_factor, growth_factor, ExpRateCert};

/// Random directions added to the coordinate axes by [`default_directions`].
pub const RANDOM_DIRECTIONS: usize = 8;

/// Which half of the state a check looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateField {
    Positions,
    Velocities,
}

fn field_slice(traj: &Trajectory, field: StateField, k: usize) -> Result<&[f64], DiagnosticsError> {
    match field {
        StateField::Positions => Ok(traj.positions(k)),
        StateField::Velocities => traj
            .velocities(k)
            .ok_or_else(|| DiagnosticsError::Invalid("trajectory has no velocities".into())),
    }
}

/// Endpoint check of one interval: `d_end ≤ factor·d_start·(1 + tol)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalCheck {
    /// Cycle number `n` of the interval `[t₂ₙ, t₂ₙ₊₁]` or `[t₂ₙ₊₁, t₂ₙ₊₂]`.
    pub n: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub d_start: f64,
    pub d_end: f64,
    pub factor: f64,
    pub bound: f64,
    pub ok: bool,
    pub margin: f64,
}

impl IntervalCheck {
    pub(crate) fn new(seg: &Segment, d_start: f64, d_end: f64, factor: f64, bound: f64) -> Self {
        IntervalCheck {
            n: seg.interval.index / 2,
            t_start: seg.interval.start,
            t_end: seg.interval.end,
            d_start,
            d_end,
            factor,
            bound,
            ok: d_end <= bound,
            margin: bound - d_end,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionReport {
    pub intervals: Vec<IntervalCheck>,
    /// `d(t) ≤ d(t₂ₙ)` at every sample of an attractive interval.
    pub within: Violations,
    /// `d(t₂ₙ₊₁) ≤ d(t₂ₙ)`.
    pub ordering: Violations,
    pub ok: bool,
}

/// `d(t₂ₙ₊₁) ≤ C₂ₙ·d(t₂ₙ)` on every attractive interval, plus monotonicity inside it.
pub fn contraction_certificate(
    traj: &Trajectory,
    d: &[f64],
    k: f64,
    psi0: f64,
    tol: f64,
) -> Result<ContractionReport, DiagnosticsError> {
    check_segments(traj)?;
    let mut intervals = Vec::new();
    let mut within = Violations::default();
    let mut ordering = Violations::default();
    let floor = ROUNDOFF_FLOOR * d[0];
    for seg in traj.segments.iter().filter(|s| s.interval.is_good()) {
        let (d0, d1) = (d[seg.first], d[seg.last]);
        let c = contraction_factor(k, psi0, seg.interval.len());
        intervals.push(IntervalCheck::new(seg, d0, d1, c, c * d0 * (1.0 + tol) + floor));
        for j in seg.first + 1..=seg.last {
            within.check(traj.times[j], d[j], d0 * (1.0 + tol) + floor);
        }
        ordering.check(seg.interval.end, d1, d0 * (1.0 + tol) + floor);
    }
    let ok = intervals.iter().all(|c| c.ok) && within.is_empty() && ordering.is_empty();
    Ok(ContractionReport { intervals, within, ordering, ok })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    pub intervals: Vec<IntervalCheck>,
    /// `d(t) ≤ d(t₂ₙ₊₂)` at every sample of a repulsive interval.
    pub within: Violations,
    /// `d(t₂ₙ₊₂) ≥ d(t₂ₙ₊₁)`.
    pub ordering: Violations,
    pub ok: bool,
}

/// `d(t₂ₙ₊₂) ≤ e^{Kb}/(2 − e^{Kb})·d(t₂ₙ₊₁)` on every repulsive interval.
pub fn growth_certificate(traj: &Trajectory, d: &[f64], k: f64, tol: f64) -> Result<GrowthReport, DiagnosticsError> {
    check_segments(traj)?;
    let mut intervals = Vec::new();
    let mut within = Violations::default();
    let mut ordering = Violations::default();
    let floor = ROUNDOFF_FLOOR * d[0];
    for seg in traj.segments.iter().filter(|s| !s.interval.is_good()) {
        let len = seg.interval.len();
        let g = growth_factor(k, len)
            .ok_or(DiagnosticsError::FactorUndefined { index: seg.interval.index, length: len })?;
        let (d0, d1) = (d[seg.first], d[seg.last]);
        intervals.push(IntervalCheck::new(seg, d0, d1, g, g * d0 * (1.0 + tol) + floor));
        for j in seg.first..seg.last {
            within.check(traj.times[j], d[j], d1 * (1.0 + tol) + floor);
        }
        ordering.check(seg.interval.end, d0 * (1.0 - tol) - floor, d1);
    }
    let ok = intervals.iter().all(|c| c.ok) && within.is_empty() && ordering.is_empty();
    Ok(GrowthReport { intervals, within, ordering, ok })
}

/// The `dim` coordinate axes followed by [`RANDOM_DIRECTIONS`] seeded unit vectors.
pub fn default_directions(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..dim)
        .map(|a| (0..dim).map(|b| if a == b { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < dim + RANDOM_DIRECTIONS {
        // rejection sampling from the unit ball gives a uniform direction
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

/// The worst directional bound violated at one sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionalViolation {
    pub t: f64,
    pub sample: usize,
    pub agent: usize,
    pub direction: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxPrincipleReport {
    pub field: StateField,
    /// Axes plus random directions: a spot check, not a proof over all unit vectors.
    pub directions: usize,
    pub samples_checked: usize,
    /// At most one entry per sample.
    pub violations: Vec<DirectionalViolation>,
    pub ok: bool,
}

/// Projections stay inside the hull of the anchor sample: the left endpoint
/// of an attractive interval, the right endpoint of a repulsive one.
pub fn max_principle_certificate(
    traj: &Trajectory,
    field: StateField,
    directions: &[Vec<f64>],
    tol: f64,
) -> Result<MaxPrincipleReport, DiagnosticsError> {
    check_segments(traj)?;
    if directions.is_empty() {
        return Err(DiagnosticsError::Invalid("need at least one direction".into()));
    }
    let (n, dim) = (traj.n, traj.dim);
    if directions.iter().any(|v| v.len() != dim) {
        return Err(DiagnosticsError::Invalid(format!("directions must have length {dim}")));
    }
    let project = |x: &[f64], i: usize, v: &[f64]| -> f64 {
        x[i * dim..(i + 1) * dim].iter().zip(v).map(|(a, b)| a * b).sum()
    };
    let mut worst: BTreeMap<usize, DirectionalViolation> = BTreeMap::new();
    let mut checked = 0;
    for seg in &traj.segments {
        let anchor = if seg.interval.is_good() { seg.first } else { seg.last };
        let xa = field_slice(traj, field, anchor)?;
        let hulls: Vec<(f64, f64)> = directions
            .iter()
            .map(|v| {
                let (mut lo, mut hi, mut big) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
                for i in 0..n {
                    let p = project(xa, i, v);
                    lo = lo.min(p);
                    hi = hi.max(p);
                    big = big.max(p.abs());
                }
                let slack = tol * (hi - lo) + 1e-12 * (1.0 + big);
                (lo - slack, hi + slack)
            })
            .collect();
        for k in seg.first..=seg.last {
            if k == anchor {
                continue;
            }
            checked += 1;
            let x = field_slice(traj, field, k)?;
            for (di, v) in directions.iter().enumerate() {
                let (lo, hi) = hulls[di];
                for i in 0..n {
                    let p = project(x, i, v);
                    let found = if p > hi {
                        Some((p, hi))
                    } else if p < lo {
                        Some((lo, p))
                    } else {
                        None
                    };
                    if let Some((lhs, rhs)) = found {
                        let cand = DirectionalViolation {
                            t: traj.times[k],
                            sample: k,
                            agent: i,
                            direction: di,
                            lhs,
                            rhs,
                            margin: rhs - lhs,
                        };
                        match worst.get(&k) {
                            Some(w) if w.margin <= cand.margin => {}
                            _ => {
                                worst.insert(k, cand);
                            }
                        }
                    }
                }
            }
        }
    }
    let violations: Vec<_> = worst.into_values().collect();
    Ok(MaxPrincipleReport {
        field,
        directions: directions.len(),
        samples_checked: checked,
        ok: violations.is_empty(),
        violations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub field: StateField,
    pub m0: f64,
    /// Largest `|xᵢ(t)|` seen.
    pub max_norm: f64,
    /// `maxᵢ|xᵢ(t)| ≤ M⁰`.
    pub state: Violations,
    /// `|xᵢ(t)| ≤ M⁰ₙ` with `M⁰ₙ` read at the interval's anchor sample.
    pub per_interval: Violations,
    pub psi0: Option<f64>,
    /// Smallest kernel value over all sampled pairs.
    pub kernel_floor: Option<f64>,
    /// `ψ(xᵢ, xⱼ) ≥ ψ₀`.
    pub floor: Violations,
    pub ok: bool,
}

/// Uniform state bound and, for HK, the kernel floor along the run.
pub fn bound_certificates(
    traj: &Trajectory,
    field: StateField,
    m0: f64,
    psi0: Option<f64>,
    kernel: &InfluenceKernel,
    tol: f64,
) -> Result<BoundReport, DiagnosticsError> {
    check_segments(traj)?;
    let (n, dim) = (traj.n, traj.dim);
    let max_norm_at = |x: &[f64]| -> f64 {
        (0..n)
            .map(|i| x[i * dim..(i + 1) * dim].iter().map(|a| a * a).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    };
    let mut norms = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        norms.push(max_norm_at(field_slice(traj, field, k)?));
    }
    let mut state = Violations::default();
    for (k, &m) in norms.iter().enumerate() {
        state.check(traj.times[k], m, m0 * (1.0 + tol));
    }
    let mut per_interval = Violations::default();
    for seg in &traj.segments {
        let anchor = if seg.interval.is_good() { seg.first } else { seg.last };
        let bound = norms[anchor] * (1.0 + tol) + 1e-12;
        for k in seg.first..=seg.last {
            per_interval.check(traj.times[k], norms[k], bound);
        }
    }

    let mut floor = Violations::default();
    let mut kernel_floor = None;
    if let (Some(psi0), StateField::Positions) = (psi0, field) {
        let mut overall = f64::INFINITY;
        for k in 0..traj.len() {
            let x = traj.positions(k);
            let mut low = f64::INFINITY;
            for i in 0..n {
                let xi = &x[i * dim..(i + 1) * dim];
                for j in 0..n {
                    if i == j || (j < i && kernel.is_symmetric()) {
                        continue;
                    }
                    let xj = &x[j * dim..(j + 1) * dim];
                    let v = match kernel.form() {
                        KernelForm::Radial(_) => kernel.eval_radial(crate::kernel::sq_dist(xi, xj).sqrt())?,
                        KernelForm::General(_) => kernel.eval_pair(xi, xj)?,
                    };
                    low = low.min(v);
                }
            }
            floor.check(traj.times[k], psi0 * (1.0 - tol), low);
            overall = overall.min(low);
        }
        kernel_floor = Some(overall);
    }

    let ok = state.is_empty() && per_interval.is_empty() && floor.is_empty();
    Ok(BoundReport {
        field,
        m0,
        max_norm: norms.iter().copied().fold(0.0, f64::max),
        state,
        per_interval,
        psi0,
        kernel_floor,
        floor,
        ok,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub rate: ExpRateCert,
    pub d0: f64,
    pub violations: Violations,
    pub ok: bool,
}

/// `d(t) ≤ e^{−γ(t − ln2/K − T)}·d(0)` at every sample.
pub fn envelope_certificate(traj: &Trajectory, d: &[f64], rate: &ExpRateCert, k: f64, tol: f64) -> EnvelopeReport {
    let d0 = d[0];
    let mut violations = Violations::default();
    for (j, &t) in traj.times.iter().enumerate() {
        violations.check(t, d[j], rate.envelope(k, t) * d0 * (1.0 + tol) + ROUNDOFF_FLOOR * d0);
    }
    EnvelopeReport { rate: *rate, d0, ok: violations.is_empty(), violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::DiameterSeries;
    use crate::dynamics::{ModelSpec, Points, SystemState};
    use crate::integrator::integrate;
    use crate::schedule::{Model, SwitchingSchedule};
    use approx::assert_relative_eq;

    fn two_agent_run(times: Vec<f64>, horizon: f64) -> Trajectory {
        let schedule = SwitchingSchedule::explicit(times, horizon).unwrap();
        let spec = ModelSpec::new(Model::Hk, InfluenceKernel::constant(1.0).unwrap(), schedule, 2, 1).unwrap();
        let init = SystemState::hk(Points::new(2, 1, vec![-0.5, 0.5]).unwrap());
        integrate(&spec, &init, horizon, 1e-3, 1).unwrap()
    }

    #[test]
    fn contraction_factor_examples() {
        assert_relative_eq!(contraction_factor(1.0, 0.5, 1.0), 0.683_939_720_585_721, max_relative = 1e-12);
        let l: f64 = 0.7;
        let expected = (1.0 - (-l).exp()).max((-l).exp());
        assert_relative_eq!(contraction_factor(1.0, 1.0, l), expected, max_relative = 1e-14);
    }

    #[test]
    fn growth_factor_examples() {
        assert_relative_eq!(growth_factor(1.0, (4.0f64 / 3.0).ln()).unwrap(), 2.0, max_relative = 1e-12);
        assert_eq!(growth_factor(1.0, 0.0), Some(1.0));
        assert_relative_eq!(growth_factor(1.0, 0.6).unwrap(), 10.2435, max_relative = 1e-4);
    }

    #[test]
    fn coincident_agents_pass_with_zero_margin() {
        let schedule = SwitchingSchedule::explicit(vec![0.0, 1.0, 1.5], 3.0).unwrap();
        let spec = ModelSpec::new(Model::Hk, InfluenceKernel::constant(1.0).unwrap(), schedule, 3, 2).unwrap();
        let init = SystemState::hk(Points::new(3, 2, vec![0.3, -0.2, 0.3, -0.2, 0.3, -0.2]).unwrap());
        let traj = integrate(&spec, &init, 3.0, 1e-2, 1).unwrap();
        let d = DiameterSeries::from_trajectory(&traj).d_x;
        assert!(d.iter().all(|&x| x == 0.0));
        let c = contraction_certificate(&traj, &d, 1.0, 1.0, 1e-6).unwrap();
        assert!(c.ok);
        assert!(c.intervals.iter().all(|i| i.margin == 0.0));
        let g = growth_certificate(&traj, &d, 1.0, 1e-6).unwrap();
        assert!(g.ok);
        let mp = max_principle_certificate(&traj, StateField::Positions, &default_directions(2, 0), 1e-6).unwrap();
        assert!(mp.ok);
    }

    #[test]
    fn two_agent_certificates_pass() {
        let traj = two_agent_run(vec![0.0, 1.0, 1.5], 3.0);
        let d = DiameterSeries::from_trajectory(&traj).d_x;
        let tol = 1e-6;
        assert!(contraction_certificate(&traj, &d, 1.0, 1.0, tol).unwrap().ok);
        let g = growth_certificate(&traj, &d, 1.0, tol).unwrap();
        assert!(g.ok);
        assert_eq!(g.intervals.len(), 1);
        let mp = max_principle_certificate(&traj, StateField::Positions, &[vec![1.0]], tol).unwrap();
        assert!(mp.ok, "{:?}", mp.violations);
        let kernel = InfluenceKernel::constant(0.7).unwrap();
        let b = bound_certificates(&traj, StateField::Positions, 0.5 * 0.5f64.exp(), Some(0.7), &kernel, tol).unwrap();
        assert!(b.ok);
        assert_eq!(b.kernel_floor, Some(0.7));
    }

    #[test]
    fn perturbed_sample_is_the_single_violation() {
        let mut traj = two_agent_run(vec![0.0, 1.0, 1.5], 3.0);
        let k = 300;
        let mut flat = traj.flat(k).to_vec();
        flat[0] += 1.0;
        traj.overwrite_sample(k, &flat);
        let mp = max_principle_certificate(&traj, StateField::Positions, &default_directions(1, 3), 1e-6).unwrap();
        assert_eq!(mp.violations.len(), 1);
        assert_eq!(mp.violations[0].sample, k);
        assert!(mp.violations[0].margin < 0.0);
    }

    #[test]
    fn frozen_diameter_breaks_envelope_late() {
        let traj = two_agent_run(vec![0.0], 8.0);
        let rate = traj_rate();
        let frozen = vec![1.0; traj.len()];
        let rep = envelope_certificate(&traj, &frozen, &rate, 1.0, 1e-6);
        assert!(!rep.ok);
        assert!(rep.violations.recorded[0].t > std::f64::consts::LN_2 + rate.t_bound);
        let d = DiameterSeries::from_trajectory(&traj).d_x;
        assert!(envelope_certificate(&traj, &d, &rate, 1.0, 1e-6).ok);
    }

    fn traj_rate() -> ExpRateCert {
        SwitchingSchedule::explicit(vec![0.0], 8.0).unwrap().exp_rate(1.0, 1.0).unwrap()
    }

    #[test]
    fn directions_are_unit_and_seeded() {
        let a = default_directions(3, 5);
        assert_eq!(a.len(), 3 + RANDOM_DIRECTIONS);
        for v in &a {
            assert_relative_eq!(v.iter().map(|x| x * x).sum::<f64>(), 1.0, max_relative = 1e-12);
        }
        assert_eq!(a, default_directions(3, 5));
        assert_ne!(a, default_directions(3, 6));
    }
}
