//! Switching schedules: the sequence of switch times, the sign signal `α(t)`,
//! and the schedule-only constants (bad-interval cap, series values, `M⁰`,
//! exponential rate).
//!
//! Intervals are indexed from 0. Even indices are attractive (`α = +1`), odd
//! indices repulsive (`α = −1`). Every interval is right-open, so `α` is a
//! total function: `[t₂ₙ, t₂ₙ₊₁) ↦ +1`, `[t₂ₙ₊₁, t₂ₙ₊₂) ↦ −1`.
//!
//! Certification follows a fixed order: schedule data gives `M⁰`, `M⁰`
//! gives `ψ₀`, and `ψ₀` enters the attractive-interval series. None of these
//! steps looks at a trajectory.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numfmt::serialize_extended;

/// Terms of the bad-interval series below this size switch to a tail bound.
const SERIES_TERM_CUTOFF: f64 = 1e-16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("bad interval {index} has length {length} >= ln2/K = {cap:.4}")]
    BadCapViolated { index: usize, start: f64, length: f64, cap: f64 },
    #[error("schedule has no switch times")]
    EmptySchedule,
    #[error("sum of bad-interval lengths is infinite")]
    InfiniteBadTotal,
    #[error("bad-interval growth series diverges")]
    InfiniteSeries,
    #[error("per-cycle factor c = {c} >= 1; exponential envelope unavailable")]
    RateNotContractive { c: f64 },
    #[error("invalid schedule: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ScheduleFamily {
    /// `t₀ = 0 < t₁ < …`; after the last listed time the final interval never ends.
    Explicit { times: Vec<f64> },
    ConstantLengths { good_len: f64, bad_len: f64 },
    /// Bad lengths `bad0·ratioⁿ`.
    GeometricBad { good_len: f64, bad0: f64, ratio: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub index: usize,
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn is_good(&self) -> bool {
        self.index % 2 == 0
    }

    pub fn sign(&self) -> f64 {
        if self.is_good() {
            1.0
        } else {
            -1.0
        }
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "HK")]
    Hk,
    #[serde(rename = "CS")]
    Cs,
}

/// First schedule hypothesis that failed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleViolation {
    pub interval: usize,
    pub start: f64,
    pub length: f64,
    pub limit: f64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleValidation {
    pub bad_cap_ok: bool,
    #[serde(rename = "S1", serialize_with = "serialize_extended")]
    pub s1: f64,
    /// `None` when undecidable from the inputs (HK without `ψ₀`, or CS).
    #[serde(rename = "S2_diverges")]
    pub s2_diverges: Option<bool>,
    #[serde(serialize_with = "serialize_extended")]
    pub bad_total: f64,
    /// Only evaluated for CS.
    pub good_floor_ok: Option<bool>,
    pub first_violation: Option<ScheduleViolation>,
    /// The same two sums restricted to `[0, horizon]`; always finite.
    pub s1_horizon: f64,
    pub bad_total_horizon: f64,
}

impl ScheduleValidation {
    pub fn ok(&self) -> bool {
        self.bad_cap_ok && self.good_floor_ok.unwrap_or(true)
    }
}

/// Which bound [`compute_m0`] produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundVariant {
    /// `exp(K·Σ bad)·M⁰₀`: uniform bound on `|xᵢ|` (or `|vᵢ|`).
    StateBound,
    /// `exp(S1)·d(0)`: uniform bound on a diameter.
    DiameterBound,
}

/// How the `T` of the exponential envelope was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "case")]
pub enum RateCase {
    /// Attractive lengths are bounded; `T` is their supremum.
    BoundedGood,
    /// Attractive lengths are unbounded; they were split at `T̃`.
    SplitGood { split: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpRateCert {
    pub c: f64,
    pub gamma: f64,
    #[serde(rename = "T")]
    pub t_bound: f64,
    pub case: RateCase,
}

impl ExpRateCert {
    /// `exp(−γ(t − ln2/K − T))`, the envelope factor multiplying `d(0)`.
    pub fn envelope(&self, k: f64, t: f64) -> f64 {
        (-self.gamma * (t - LN_2 / k - self.t_bound)).exp()
    }
}

/// `e^{Kb}/(2 − e^{Kb})`, the worst-case diameter growth over a repulsive interval.
pub fn growth_factor(k: f64, bad_len: f64) -> Option<f64> {
    let e = (k * bad_len).exp();
    if e >= 2.0 {
        None
    } else {
        Some(e / (2.0 - e))
    }
}

/// `ln(e^x/(2 − e^x))` for `x = K·b`, accurate for small `x`.
pub fn growth_log(x: f64) -> f64 {
    x - (-x.exp_m1()).ln_1p()
}

/// `max{1 − e^{−KL}, 1 − (ψ₀/K)(1 − e^{−KL})}`, the attractive-interval contraction.
pub fn contraction_factor(k: f64, psi0: f64, good_len: f64) -> f64 {
    let decay = -(-k * good_len).exp_m1();
    (decay).max(1.0 - psi0 / k * decay)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchingSchedule {
    family: ScheduleFamily,
    horizon: f64,
    split: Option<f64>,
    realized: Vec<Interval>,
}

impl SwitchingSchedule {
    pub fn new(family: ScheduleFamily, horizon: f64) -> Result<Self, ScheduleError> {
        check_family(&family)?;
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(ScheduleError::Invalid(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        let mut s = SwitchingSchedule { family, horizon, split: None, realized: Vec::new() };
        s.realize();
        Ok(s)
    }

    pub fn explicit(times: Vec<f64>, horizon: f64) -> Result<Self, ScheduleError> {
        Self::new(ScheduleFamily::Explicit { times }, horizon)
    }

    pub fn constant_lengths(good_len: f64, bad_len: f64, horizon: f64) -> Result<Self, ScheduleError> {
        Self::new(ScheduleFamily::ConstantLengths { good_len, bad_len }, horizon)
    }

    pub fn geometric_bad(good_len: f64, bad0: f64, ratio: f64, horizon: f64) -> Result<Self, ScheduleError> {
        Self::new(ScheduleFamily::GeometricBad { good_len, bad0, ratio }, horizon)
    }

    /// Splits every attractive interval into pieces of length at most
    /// `max_good`, separated by zero-length repulsive intervals. Trajectories
    /// are unchanged; only the bookkeeping of cycles differs.
    pub fn split_good(&self, max_good: f64) -> Result<Self, ScheduleError> {
        if !(max_good > 0.0 && max_good.is_finite()) {
            return Err(ScheduleError::Invalid(format!("split length must be positive, got {max_good}")));
        }
        let mut s = SwitchingSchedule {
            family: self.family.clone(),
            horizon: self.horizon,
            split: Some(max_good),
            realized: Vec::new(),
        };
        s.realize();
        Ok(s)
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self, ScheduleError> {
        let mut s = Self::new(self.family.clone(), horizon)?;
        if let Some(m) = self.split {
            s = s.split_good(m)?;
        }
        Ok(s)
    }

    pub fn family(&self) -> &ScheduleFamily {
        &self.family
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn split_length(&self) -> Option<f64> {
        self.split
    }

    /// Intervals meeting `[0, horizon)`, the last one clipped at the horizon.
    /// Zero-length intervals produced by splitting are kept for index parity.
    pub fn intervals(&self) -> &[Interval] {
        &self.realized
    }

    /// Unclipped intervals, without end.
    pub fn iter_intervals(&self) -> IntervalIter<'_> {
        IntervalIter::new(self)
    }

    fn realize(&mut self) {
        let horizon = self.horizon;
        let mut out = Vec::new();
        for iv in self.iter_intervals() {
            if iv.start >= horizon {
                break;
            }
            out.push(Interval { end: iv.end.min(horizon), ..iv });
        }
        self.realized = out;
    }

    /// Sign of the interaction at time `t` (right-open convention).
    pub fn alpha_at(&self, t: f64) -> f64 {
        if t < self.horizon {
            let pos = self.realized.partition_point(|iv| iv.end <= t);
            if let Some(iv) = self.realized.get(pos) {
                return iv.sign();
            }
        }
        self.iter_intervals()
            .find(|iv| t >= iv.start && t < iv.end)
            .map(|iv| iv.sign())
            .unwrap_or(1.0)
    }

    /// Distinct switch times strictly inside `(a, b)`, ascending.
    pub fn switch_times_in(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for iv in self.iter_intervals() {
            if iv.start >= b {
                break;
            }
            if iv.start > a && out.last() != Some(&iv.start) {
                out.push(iv.start);
            }
        }
        out
    }

    /// Whether some `tₙ` equals `t` exactly.
    pub fn is_switch_time(&self, t: f64) -> bool {
        self.iter_intervals().take_while(|iv| iv.start <= t).any(|iv| iv.start == t)
    }

    /// Checks the schedule hypotheses without failing on a violated cap;
    /// the violation is recorded in the report instead.
    pub fn assess(&self, k: f64, psi0: Option<f64>, model: Model) -> Result<ScheduleValidation, ScheduleError> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(ScheduleError::Invalid(format!("K must be positive, got {k}")));
        }
        if let ScheduleFamily::Explicit { times } = &self.family {
            if times.is_empty() {
                return Err(ScheduleError::EmptySchedule);
            }
        }
        let cap = LN_2 / k;
        let mut first_violation = self.first_cap_violation(cap).map(|(iv, length)| ScheduleViolation {
            interval: iv.index,
            start: iv.start,
            length,
            limit: cap,
            message: format!("bad interval {} has length {} >= ln2/K = {:.4}", iv.index, length, cap),
        });
        let bad_cap_ok = first_violation.is_none();

        let (s1, bad_total) = if bad_cap_ok { self.bad_series(k) } else { (f64::INFINITY, self.bad_total()) };
        // a finite growth series forces a finite total bad length
        assert!(!(s1.is_finite() && bad_total.is_infinite()), "S1 finite with infinite bad_total");

        let (s1_horizon, bad_total_horizon) = self.realized.iter().filter(|iv| !iv.is_good()).fold(
            (0.0, 0.0),
            |(s, b), iv| {
                let term = if k * iv.len() < LN_2 { growth_log(k * iv.len()) } else { f64::INFINITY };
                (s + term, b + iv.len())
            },
        );

        let good_floor_ok = match model {
            Model::Hk => None,
            Model::Cs => {
                let floor = 1.0 / k;
                let bad = self.first_good_floor_violation(floor);
                if let (Some((iv, length)), None) = (bad, &first_violation) {
                    first_violation = Some(ScheduleViolation {
                        interval: iv.index,
                        start: iv.start,
                        length,
                        limit: floor,
                        message: format!("good interval {} has length {} <= 1/K = {:.4}", iv.index, length, floor),
                    });
                }
                Some(bad.is_none())
            }
        };

        let s2_diverges = match (model, psi0) {
            (Model::Hk, Some(p)) if p > 0.0 => Some(self.has_unbounded_good_supply()),
            _ => None,
        };

        Ok(ScheduleValidation {
            bad_cap_ok,
            s1,
            s2_diverges,
            bad_total,
            good_floor_ok,
            first_violation,
            s1_horizon,
            bad_total_horizon,
        })
    }

    /// [`assess`](Self::assess), failing on the first violated bad-interval cap.
    pub fn validate(&self, k: f64, psi0: Option<f64>, model: Model) -> Result<ScheduleValidation, ScheduleError> {
        let v = self.assess(k, psi0, model)?;
        if !v.bad_cap_ok {
            let f = v.first_violation.as_ref().expect("violation recorded");
            return Err(ScheduleError::BadCapViolated {
                index: f.interval,
                start: f.start,
                length: f.length,
                cap: f.limit,
            });
        }
        Ok(v)
    }

    /// Infinitely many attractive intervals of length bounded below make each
    /// term of the attractive series at most a fixed negative constant.
    fn has_unbounded_good_supply(&self) -> bool {
        match &self.family {
            ScheduleFamily::ConstantLengths { .. } | ScheduleFamily::GeometricBad { .. } => true,
            ScheduleFamily::Explicit { times } => (times.len() - 1) % 2 == 0,
        }
    }

    fn first_cap_violation(&self, cap: f64) -> Option<(Interval, f64)> {
        match &self.family {
            ScheduleFamily::ConstantLengths { good_len, bad_len } => (*bad_len >= cap).then(|| {
                (Interval { index: 1, start: *good_len, end: good_len + bad_len }, *bad_len)
            }),
            ScheduleFamily::GeometricBad { good_len, bad0, .. } => {
                (*bad0 >= cap).then(|| (Interval { index: 1, start: *good_len, end: good_len + bad0 }, *bad0))
            }
            ScheduleFamily::Explicit { .. } => self
                .explicit_base_intervals()
                .into_iter()
                .filter(|iv| !iv.is_good())
                .find(|iv| iv.len() >= cap)
                .map(|iv| (iv, iv.len())),
        }
    }

    fn first_good_floor_violation(&self, floor: f64) -> Option<(Interval, f64)> {
        let good = match &self.family {
            ScheduleFamily::ConstantLengths { good_len, .. } | ScheduleFamily::GeometricBad { good_len, .. } => {
                return (*good_len <= floor).then(|| (Interval { index: 0, start: 0.0, end: *good_len }, *good_len));
            }
            ScheduleFamily::Explicit { .. } => self.explicit_base_intervals(),
        };
        good.into_iter().filter(|iv| iv.is_good()).find(|iv| iv.len() <= floor).map(|iv| (iv, iv.len()))
    }

    fn explicit_base_intervals(&self) -> Vec<Interval> {
        match &self.family {
            ScheduleFamily::Explicit { times } => {
                let mut v: Vec<Interval> = times
                    .windows(2)
                    .enumerate()
                    .map(|(i, w)| Interval { index: i, start: w[0], end: w[1] })
                    .collect();
                let last = *times.last().expect("non-empty");
                v.push(Interval { index: times.len() - 1, start: last, end: f64::INFINITY });
                v
            }
            _ => Vec::new(),
        }
    }

    /// `Σ (t₂ₚ₊₂ − t₂ₚ₊₁)` over the whole schedule.
    pub fn bad_total(&self) -> f64 {
        match &self.family {
            ScheduleFamily::ConstantLengths { bad_len, .. } => {
                if *bad_len > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            ScheduleFamily::GeometricBad { bad0, ratio, .. } => bad0 / (1.0 - ratio),
            ScheduleFamily::Explicit { .. } => {
                self.explicit_base_intervals().iter().filter(|iv| !iv.is_good()).map(|iv| iv.len()).sum()
            }
        }
    }

    /// (S1, bad_total). Requires every bad length below the cap.
    fn bad_series(&self, k: f64) -> (f64, f64) {
        match &self.family {
            ScheduleFamily::ConstantLengths { bad_len, .. } => {
                if *bad_len > 0.0 {
                    (f64::INFINITY, f64::INFINITY)
                } else {
                    (0.0, 0.0)
                }
            }
            ScheduleFamily::GeometricBad { bad0, ratio, .. } => {
                (geometric_growth_series(k, *bad0, *ratio), bad0 / (1.0 - ratio))
            }
            ScheduleFamily::Explicit { .. } => {
                let bad: Vec<f64> = self
                    .explicit_base_intervals()
                    .iter()
                    .filter(|iv| !iv.is_good())
                    .map(|iv| iv.len())
                    .collect();
                (bad.iter().map(|b| growth_log(k * b)).sum(), bad.iter().sum())
            }
        }
    }

    /// Worst per-cycle factor `sup G(b)·C(L)` and the exponential rate built from it.
    pub fn exp_rate(&self, k: f64, psi0: f64) -> Result<ExpRateCert, ScheduleError> {
        self.validate(k, Some(psi0), Model::Hk)?;
        if !(psi0 > 0.0) {
            return Err(ScheduleError::Invalid(format!("psi0 must be positive, got {psi0}")));
        }
        let (sched, case) = match (&self.family, self.split) {
            (_, Some(m)) => (self.clone(), RateCase::SplitGood { split: m }),
            (ScheduleFamily::Explicit { .. }, None) if self.has_unbounded_good_supply() => {
                let m = 1.0 / k + LN_2 / k;
                (self.split_good(m)?, RateCase::SplitGood { split: m })
            }
            _ => (self.clone(), RateCase::BoundedGood),
        };
        let (c, t_bound) = sched.worst_cycle(k, psi0);
        let t_bound = match case {
            RateCase::SplitGood { split } => split,
            RateCase::BoundedGood => t_bound,
        };
        if !(c < 1.0) {
            return Err(ScheduleError::RateNotContractive { c });
        }
        let gamma = (1.0 / c).ln() / (LN_2 / k + t_bound);
        Ok(ExpRateCert { c, gamma, t_bound, case })
    }

    /// Sup of the per-cycle factor and of the attractive lengths. The families
    /// have non-increasing bad lengths and constant good lengths, so their
    /// first cycle is the worst; explicit lists are scanned in full.
    fn worst_cycle(&self, k: f64, psi0: f64) -> (f64, f64) {
        let mut c: f64 = 0.0;
        let mut t_max: f64 = 0.0;
        let mut it = self.iter_intervals().peekable();
        let scan_until = match &self.family {
            ScheduleFamily::Explicit { times } => {
                times.last().copied().unwrap_or(0.0).max(self.horizon) + self.split.unwrap_or(0.0)
            }
            _ => 0.0,
        };
        while let Some(good) = it.next() {
            debug_assert!(good.is_good());
            let bad_len = match it.peek() {
                Some(b) if b.end.is_finite() => b.len(),
                Some(_) => break,
                None => 0.0,
            };
            it.next();
            if !good.end.is_finite() {
                break;
            }
            let g = growth_factor(k, bad_len).unwrap_or(f64::INFINITY);
            c = c.max(g * contraction_factor(k, psi0, good.len()));
            t_max = t_max.max(good.len());
            if good.start >= scan_until {
                break;
            }
        }
        (c, t_max)
    }
}

/// `Σ ln(e^{Kbₙ}/(2 − e^{Kbₙ}))` for `bₙ = b₀qⁿ`: partial sums until the term
/// falls below 1e−16, then the majorant `ln(e^x/(2−e^x)) ≤ 2x/(1−2x)`, which
/// follows from `e^x ≤ 1/(1−x)`. The result is an upper bound.
fn geometric_growth_series(k: f64, bad0: f64, ratio: f64) -> f64 {
    if bad0 == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut b = bad0;
    loop {
        let term = growth_log(k * b);
        if term < SERIES_TERM_CUTOFF {
            let x = k * b;
            // Σ_{p≥P} 2x_p/(1−2x_p) ≤ 2x_P/((1−q)(1−2x_P))
            return sum + 2.0 * x / ((1.0 - ratio) * (1.0 - 2.0 * x));
        }
        sum += term;
        b *= ratio;
    }
}

/// `exp(K·bad_total)·input` or `exp(S1)·input`.
pub fn compute_m0(
    validation: &ScheduleValidation,
    k: f64,
    input: f64,
    variant: BoundVariant,
) -> Result<f64, ScheduleError> {
    match variant {
        BoundVariant::StateBound => {
            if !validation.bad_total.is_finite() {
                return Err(ScheduleError::InfiniteBadTotal);
            }
            Ok((k * validation.bad_total).exp() * input)
        }
        BoundVariant::DiameterBound => {
            if !validation.s1.is_finite() {
                return Err(ScheduleError::InfiniteSeries);
            }
            Ok(validation.s1.exp() * input)
        }
    }
}

fn check_family(f: &ScheduleFamily) -> Result<(), ScheduleError> {
    let bad = |m: String| Err(ScheduleError::Invalid(m));
    match f {
        ScheduleFamily::Explicit { times } => {
            if times.is_empty() {
                return Err(ScheduleError::EmptySchedule);
            }
            if times[0] != 0.0 {
                return bad(format!("explicit schedule must start at 0, got {}", times[0]));
            }
            if times.iter().any(|t| !t.is_finite()) {
                return bad("explicit times must be finite".into());
            }
            if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
                return bad(format!("explicit times must increase strictly: {} then {}", w[0], w[1]));
            }
        }
        ScheduleFamily::ConstantLengths { good_len, bad_len } => {
            if !(*good_len > 0.0 && good_len.is_finite()) {
                return bad(format!("good_len must be positive, got {good_len}"));
            }
            if !(*bad_len >= 0.0 && bad_len.is_finite()) {
                return bad(format!("bad_len must be >= 0, got {bad_len}"));
            }
        }
        ScheduleFamily::GeometricBad { good_len, bad0, ratio } => {
            if !(*good_len > 0.0 && good_len.is_finite()) {
                return bad(format!("good_len must be positive, got {good_len}"));
            }
            if !(*bad0 >= 0.0 && bad0.is_finite()) {
                return bad(format!("bad0 must be >= 0, got {bad0}"));
            }
            if !(*ratio > 0.0 && *ratio < 1.0) {
                return bad(format!("ratio must lie in (0, 1), got {ratio}"));
            }
        }
    }
    Ok(())
}

/// Unbounded stream of intervals of a schedule, splitting applied.
pub struct IntervalIter<'a> {
    schedule: &'a SwitchingSchedule,
    base: usize,
    t: f64,
    out_index: usize,
    /// Remaining split pieces of the current attractive interval:
    /// (count, piece length, end of the unsplit interval).
    pending: Option<(u64, f64, f64)>,
    pending_bad: bool,
}

impl<'a> IntervalIter<'a> {
    fn new(schedule: &'a SwitchingSchedule) -> Self {
        IntervalIter { schedule, base: 0, t: 0.0, out_index: 0, pending: None, pending_bad: false }
    }

    /// Length of base interval `k`, with its exact end time when known.
    fn base_len(&self, k: usize) -> Option<(f64, Option<f64>)> {
        match &self.schedule.family {
            ScheduleFamily::Explicit { times } => {
                if k + 1 < times.len() {
                    Some((times[k + 1] - times[k], Some(times[k + 1])))
                } else if k + 1 == times.len() {
                    Some((f64::INFINITY, None))
                } else {
                    None
                }
            }
            ScheduleFamily::ConstantLengths { good_len, bad_len } => {
                Some((if k % 2 == 0 { *good_len } else { *bad_len }, None))
            }
            ScheduleFamily::GeometricBad { good_len, bad0, ratio } => {
                if k % 2 == 0 {
                    Some((*good_len, None))
                } else {
                    Some((bad0 * ratio.powi(((k - 1) / 2) as i32), None))
                }
            }
        }
    }

    fn emit(&mut self, len: f64, exact_end: Option<f64>) -> Interval {
        let start = self.t;
        let end = exact_end.unwrap_or(start + len);
        self.t = end;
        let iv = Interval { index: self.out_index, start, end };
        self.out_index += 1;
        iv
    }
}

impl Iterator for IntervalIter<'_> {
    type Item = Interval;

    fn next(&mut self) -> Option<Interval> {
        if self.pending_bad {
            self.pending_bad = false;
            return Some(self.emit(0.0, Some(self.t)));
        }
        if let Some((left, piece, base_end)) = self.pending {
            let last = left == 1;
            self.pending = if last { None } else { Some((left - 1, piece, base_end)) };
            self.pending_bad = !last;
            // the last piece lands on the unsplit interval's end exactly
            let iv = if last { self.emit(piece, Some(base_end)) } else { self.emit(piece, None) };
            return Some(iv);
        }
        if self.t.is_infinite() {
            return None;
        }
        let k = self.base;
        let (len, exact) = self.base_len(k)?;
        self.base += 1;
        match self.schedule.split {
            Some(m) if k % 2 == 0 && len > m => {
                if len.is_infinite() {
                    // endless attractive tail: pieces of exactly `m`, forever
                    self.base -= 1;
                    self.pending_bad = true;
                    return Some(self.emit(m, None));
                }
                let count = (len / m).ceil() as u64;
                let piece = len / count as f64;
                let base_end = exact.unwrap_or(self.t + len);
                self.pending = Some((count, piece, base_end));
                self.next()
            }
            _ => Some(self.emit(len, exact)),
        }
    }
}
