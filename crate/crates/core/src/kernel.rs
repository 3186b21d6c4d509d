//! Influence functions: bivariate `ψ(y, z)` and radial `ψ̃(r)`.
//!
//! A kernel carries a declared sup norm `K`. Every evaluation is checked
//! against it (relative tolerance [`SUP_TOL`]) and against strict
//! positivity, because the contraction constants downstream are only valid
//! for a true upper bound and a positive weight.
//!
//! Lower bounds over compact sets are computed on grids. With a Lipschitz
//! constant the grid minimum is lowered by `L·h/2` (1-D) or
//! `L·h·√m/2` (m-dimensional cube grid) and flagged as certified; without
//! one it is a plain grid minimum.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance on the declared sup norm.
pub const SUP_TOL: f64 = 1e-12;

/// Computed lower bounds at or below this value are rejected.
pub const POSITIVITY_FLOOR: f64 = 1e-300;

/// Largest number of evaluations a general-kernel grid may take.
pub const MAX_GRID_POINTS: u64 = 20_000_000;

/// Highest dimension for which general kernels are grid-minimized.
pub const MAX_GRID_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel value {value} at {at} is not strictly positive and finite")]
    NonPositiveValue { value: f64, at: f64 },
    #[error("kernel value {value} exceeds declared sup norm K = {sup_norm}")]
    SupNormViolation { value: f64, sup_norm: f64 },
    #[error("lower bound {value} is not positive; grid step {grid_step} too coarse for the Lipschitz slack")]
    NonPositiveBound { value: f64, grid_step: f64 },
    #[error("general kernel in dimension {dim} > 3 needs an analytic lower bound")]
    DimensionTooLarge { dim: usize },
    #[error("grid of {points} evaluations exceeds the budget of {MAX_GRID_POINTS}; use a coarser step")]
    GridTooLarge { points: u64 },
    #[error("radial kernel evaluated at negative distance {0}")]
    NegativeDistance(f64),
    #[error("point dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid kernel: {0}")]
    Invalid(String),
}

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type PairFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Radial profiles `ψ̃(r)`, `r ≥ 0`.
#[derive(Clone)]
pub enum RadialProfile {
    Constant { c: f64 },
    /// `(1 + r²)^(−β)`
    Rational { beta: f64 },
    /// `exp(−r²/σ²)`
    Gaussian { sigma: f64 },
    /// Smooth bump of the given height over a positive floor, supported on `[0, radius)`.
    Bump { height: f64, floor: f64, radius: f64 },
    Custom(RadialFn),
}

impl RadialProfile {
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            RadialProfile::Constant { c } => c,
            RadialProfile::Rational { beta } => (1.0 + r * r).powf(-beta),
            RadialProfile::Gaussian { sigma } => (-(r * r) / (sigma * sigma)).exp(),
            RadialProfile::Bump { height, floor, radius } => {
                if r < radius {
                    let s = r / radius;
                    floor + (height - floor) * (1.0 - 1.0 / (1.0 - s * s)).exp()
                } else {
                    floor
                }
            }
            RadialProfile::Custom(ref f) => f(r),
        }
    }

    /// Closed-form sup of `|dψ̃/dr|` for the builtin profiles.
    pub fn lipschitz_bound(&self) -> Option<f64> {
        match *self {
            RadialProfile::Constant { .. } => Some(0.0),
            RadialProfile::Rational { beta } => {
                // |d/dr| = 2βr(1+r²)^(−β−1), maximal at r = 1/√(2β+1)
                let r = (2.0 * beta + 1.0).sqrt().recip();
                Some(2.0 * beta * r * (1.0 + r * r).powf(-beta - 1.0))
            }
            RadialProfile::Gaussian { sigma } => {
                Some(std::f64::consts::SQRT_2 / sigma * (-0.5f64).exp())
            }
            RadialProfile::Bump { .. } | RadialProfile::Custom(_) => None,
        }
    }

    fn natural_sup(&self) -> Option<f64> {
        match *self {
            RadialProfile::Constant { c } => Some(c),
            RadialProfile::Rational { .. } | RadialProfile::Gaussian { .. } => Some(1.0),
            RadialProfile::Bump { height, floor, .. } => Some(height.max(floor)),
            RadialProfile::Custom(_) => None,
        }
    }
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialProfile::Constant { c } => write!(f, "Constant({c})"),
            RadialProfile::Rational { beta } => write!(f, "Rational(beta={beta})"),
            RadialProfile::Gaussian { sigma } => write!(f, "Gaussian(sigma={sigma})"),
            RadialProfile::Bump { height, floor, radius } => {
                write!(f, "Bump(height={height}, floor={floor}, radius={radius})")
            }
            RadialProfile::Custom(_) => f.write_str("Custom(<fn>)"),
        }
    }
}

/// Bivariate profiles `ψ(y, z)`.
#[derive(Clone)]
pub enum PairProfile {
    /// `exp(−|y − z|²/σ²)`
    Gaussian { sigma: f64 },
    Custom(PairFn),
}

impl PairProfile {
    pub fn value(&self, y: &[f64], z: &[f64]) -> f64 {
        match *self {
            PairProfile::Gaussian { sigma } => (-sq_dist(y, z) / (sigma * sigma)).exp(),
            PairProfile::Custom(ref f) => f(y, z),
        }
    }
}

impl fmt::Debug for PairProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairProfile::Gaussian { sigma } => write!(f, "Gaussian(sigma={sigma})"),
            PairProfile::Custom(_) => f.write_str("Custom(<fn>)"),
        }
    }
}

#[derive(Clone, Debug)]
pub enum KernelForm {
    General(PairProfile),
    Radial(RadialProfile),
}

/// A positive bounded influence function with its declared sup norm.
#[derive(Clone, Debug)]
pub struct InfluenceKernel {
    form: KernelForm,
    sup_norm: f64,
    lipschitz: Option<f64>,
    nonincreasing: bool,
}

/// A lower bound of the kernel over a ball (or an interval of distances).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelLowerBound {
    pub value: f64,
    pub domain_radius: f64,
    pub certified: bool,
}

/// Outcome of [`InfluenceKernel::sup_norm_check`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupNormReport {
    pub sup_norm: f64,
    pub max_observed: f64,
    /// `sup_norm − max_observed`; negative on failure.
    pub margin: f64,
    pub non_positive: usize,
    pub pass: bool,
}

/// An input in a kernel's domain.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelInput {
    Distance(f64),
    Pair(Vec<f64>, Vec<f64>),
}

impl InfluenceKernel {
    pub fn radial(profile: RadialProfile, sup_norm: f64) -> Result<Self, KernelError> {
        Self::new(KernelForm::Radial(profile), sup_norm)
    }

    pub fn general(profile: PairProfile, sup_norm: f64) -> Result<Self, KernelError> {
        Self::new(KernelForm::General(profile), sup_norm)
    }

    fn new(form: KernelForm, sup_norm: f64) -> Result<Self, KernelError> {
        if !(sup_norm.is_finite() && sup_norm > 0.0) {
            return Err(KernelError::Invalid(format!(
                "sup norm must be positive and finite, got {sup_norm}"
            )));
        }
        Ok(InfluenceKernel { form, sup_norm, lipschitz: None, nonincreasing: false })
    }

    /// `ψ̃ ≡ c`, with `K = c`.
    pub fn constant(c: f64) -> Result<Self, KernelError> {
        Ok(Self::radial(RadialProfile::Constant { c }, c)?.with_nonincreasing(true))
    }

    /// `(1 + r²)^(−β)`, with `K = 1`.
    pub fn rational(beta: f64) -> Result<Self, KernelError> {
        if !(beta >= 0.0) {
            return Err(KernelError::Invalid(format!("beta must be >= 0, got {beta}")));
        }
        Ok(Self::radial(RadialProfile::Rational { beta }, 1.0)?.with_nonincreasing(true))
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_nonincreasing(mut self, flag: bool) -> Self {
        self.nonincreasing = flag && self.is_radial();
        self
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.nonincreasing
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.form, KernelForm::Radial(_))
    }

    /// Radial kernels are symmetric in their two arguments.
    pub fn is_symmetric(&self) -> bool {
        self.is_radial()
    }

    fn guard(&self, value: f64, at: f64) -> Result<f64, KernelError> {
        if !value.is_finite() || value <= 0.0 {
            return Err(KernelError::NonPositiveValue { value, at });
        }
        if value > self.sup_norm * (1.0 + SUP_TOL) {
            return Err(KernelError::SupNormViolation { value, sup_norm: self.sup_norm });
        }
        Ok(value)
    }

    /// `ψ̃(r)`. For a general kernel this is an error.
    pub fn eval_radial(&self, r: f64) -> Result<f64, KernelError> {
        if !(r >= 0.0) {
            return Err(KernelError::NegativeDistance(r));
        }
        match &self.form {
            KernelForm::Radial(p) => self.guard(p.value(r), r),
            KernelForm::General(_) => {
                Err(KernelError::Invalid("general kernel has no radial form".into()))
            }
        }
    }

    /// `ψ(y, z)`; radial kernels are evaluated at `|y − z|`.
    pub fn eval_pair(&self, y: &[f64], z: &[f64]) -> Result<f64, KernelError> {
        if y.len() != z.len() {
            return Err(KernelError::DimensionMismatch(y.len(), z.len()));
        }
        match &self.form {
            KernelForm::Radial(p) => {
                let r = sq_dist(y, z).sqrt();
                self.guard(p.value(r), r)
            }
            KernelForm::General(p) => self.guard(p.value(y, z), sq_dist(y, z).sqrt()),
        }
    }

    pub fn eval(&self, input: &KernelInput) -> Result<f64, KernelError> {
        match input {
            KernelInput::Distance(r) => self.eval_radial(*r),
            KernelInput::Pair(y, z) => self.eval_pair(y, z),
        }
    }

    fn raw(&self, input: &KernelInput) -> f64 {
        match (&self.form, input) {
            (KernelForm::Radial(p), KernelInput::Distance(r)) => p.value(*r),
            (KernelForm::Radial(p), KernelInput::Pair(y, z)) => p.value(sq_dist(y, z).sqrt()),
            (KernelForm::General(p), KernelInput::Pair(y, z)) => p.value(y, z),
            (KernelForm::General(_), KernelInput::Distance(_)) => f64::NAN,
        }
    }

    /// Evaluates without guards and reports the largest value seen against `K`.
    pub fn sup_norm_check(&self, samples: &[KernelInput]) -> SupNormReport {
        let mut max_observed = f64::NEG_INFINITY;
        let mut non_positive = 0;
        for s in samples {
            let v = self.raw(s);
            if !v.is_finite() || v <= 0.0 {
                non_positive += 1;
                continue;
            }
            max_observed = max_observed.max(v);
        }
        let pass = non_positive == 0 && max_observed <= self.sup_norm * (1.0 + SUP_TOL);
        SupNormReport {
            sup_norm: self.sup_norm,
            max_observed,
            margin: self.sup_norm - max_observed,
            non_positive,
            pass,
        }
    }

    /// Lower bound of the kernel on the set the consensus bounds minimize over.
    ///
    /// Radial kernels: `min ψ̃` on `[0, radius]`. General kernels: `min ψ(y, z)`
    /// over `|y|, |z| ≤ radius` in `ℝ^dim`, via a grid on the enclosing cube.
    pub fn lower_bound_on_ball(
        &self,
        radius: f64,
        grid_step: f64,
        dim: usize,
    ) -> Result<KernelLowerBound, KernelError> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(KernelError::Invalid(format!("radius must be finite and >= 0, got {radius}")));
        }
        if !(grid_step > 0.0) {
            return Err(KernelError::Invalid(format!("grid step must be positive, got {grid_step}")));
        }
        let bound = match &self.form {
            KernelForm::Radial(_) => self.radial_lower_bound(radius, grid_step)?,
            KernelForm::General(_) => self.general_lower_bound(radius, grid_step, dim)?,
        };
        if bound.value <= POSITIVITY_FLOOR {
            return Err(KernelError::NonPositiveBound { value: bound.value, grid_step });
        }
        Ok(bound)
    }

    fn radial_lower_bound(&self, radius: f64, step: f64) -> Result<KernelLowerBound, KernelError> {
        if self.nonincreasing || radius == 0.0 {
            return Ok(KernelLowerBound {
                value: self.eval_radial(radius)?,
                domain_radius: radius,
                certified: true,
            });
        }
        let n = (radius / step).ceil().max(1.0) as u64;
        let h = radius / n as f64;
        let mut min = f64::INFINITY;
        for k in 0..=n {
            let r = if k == n { radius } else { k as f64 * h };
            min = min.min(self.eval_radial(r)?);
        }
        Ok(self.apply_slack(min, h, radius))
    }

    fn general_lower_bound(
        &self,
        radius: f64,
        step: f64,
        dim: usize,
    ) -> Result<KernelLowerBound, KernelError> {
        if dim > MAX_GRID_DIM {
            return Err(KernelError::DimensionTooLarge { dim });
        }
        let axes = 2 * dim;
        let n = ((2.0 * radius) / step).ceil().max(1.0) as u64;
        let points = (n + 1).checked_pow(axes as u32).unwrap_or(u64::MAX);
        if points > MAX_GRID_POINTS {
            return Err(KernelError::GridTooLarge { points });
        }
        let h = 2.0 * radius / n as f64;
        let coord = |k: u64| if k == n { radius } else { -radius + k as f64 * h };
        let mut idx = vec![0u64; axes];
        let mut y = vec![0.0; dim];
        let mut z = vec![0.0; dim];
        let mut min = f64::INFINITY;
        'grid: loop {
            for a in 0..dim {
                y[a] = coord(idx[a]);
                z[a] = coord(idx[dim + a]);
            }
            min = min.min(self.eval_pair(&y, &z)?);
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot <= n {
                    continue 'grid;
                }
                *slot = 0;
            }
            break;
        }
        // covering radius of a cube grid in `axes` dimensions
        Ok(self.apply_slack(min, h * (axes as f64).sqrt(), radius))
    }

    fn apply_slack(&self, grid_min: f64, h: f64, radius: f64) -> KernelLowerBound {
        match self.lipschitz {
            Some(l) => KernelLowerBound {
                value: grid_min - l * h / 2.0,
                domain_radius: radius,
                certified: true,
            },
            None => KernelLowerBound { value: grid_min, domain_radius: radius, certified: false },
        }
    }
}

/// Default grid spacing for a bound over `[0, radius]`.
pub fn default_grid_step(radius: f64) -> f64 {
    if radius > 0.0 {
        radius * 1e-3
    } else {
        1e-3
    }
}

/// Incremental minimum of a radial kernel over `[0, r]` for a growing `r`.
///
/// Each call to [`RunningMin::extend`] scans only the new part of the
/// interval. The returned value never increases.
#[derive(Clone, Debug)]
pub struct RunningMin<'k> {
    kernel: &'k InfluenceKernel,
    grid_step: f64,
    reach: f64,
    min: f64,
}

impl<'k> RunningMin<'k> {
    pub fn new(kernel: &'k InfluenceKernel, grid_step: f64) -> Result<Self, KernelError> {
        if !kernel.is_radial() {
            return Err(KernelError::Invalid("running minimum needs a radial kernel".into()));
        }
        if !(grid_step > 0.0) {
            return Err(KernelError::Invalid(format!("grid step must be positive, got {grid_step}")));
        }
        let min = kernel.eval_radial(0.0)?;
        Ok(RunningMin { kernel, grid_step, reach: 0.0, min })
    }

    /// Resumes from a previously computed `(r_prev, min_prev)`.
    pub fn resume(
        kernel: &'k InfluenceKernel,
        grid_step: f64,
        r_prev: f64,
        min_prev: f64,
    ) -> Result<Self, KernelError> {
        let mut rm = Self::new(kernel, grid_step)?;
        rm.reach = r_prev;
        rm.min = min_prev;
        Ok(rm)
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }

    pub fn value(&self) -> f64 {
        self.min
    }

    pub fn extend(&mut self, r_max: f64) -> Result<f64, KernelError> {
        if r_max <= self.reach {
            return Ok(self.min);
        }
        let fresh = if self.kernel.nonincreasing {
            self.kernel.eval_radial(r_max)?
        } else {
            let span = r_max - self.reach;
            let n = (span / self.grid_step).ceil().max(1.0) as u64;
            let h = span / n as f64;
            let mut m = f64::INFINITY;
            for k in 1..=n {
                let r = if k == n { r_max } else { self.reach + k as f64 * h };
                m = m.min(self.kernel.eval_radial(r)?);
            }
            match self.kernel.lipschitz {
                Some(l) => m - l * h / 2.0,
                None => m,
            }
        };
        if fresh <= POSITIVITY_FLOOR {
            return Err(KernelError::NonPositiveBound { value: fresh, grid_step: self.grid_step });
        }
        self.min = self.min.min(fresh);
        self.reach = r_max;
        Ok(self.min)
    }
}

/// `min ψ̃` over `[0, r_max]`, optionally continuing from `(r_prev, min_prev)`.
pub fn running_min(
    kernel: &InfluenceKernel,
    r_max: f64,
    prev: Option<(f64, f64)>,
    grid_step: f64,
) -> Result<f64, KernelError> {
    let mut rm = match prev {
        Some((r, m)) => {
            if r_max < r {
                return Err(KernelError::Invalid(format!(
                    "r_max {r_max} is below the previous reach {r}"
                )));
            }
            RunningMin::resume(kernel, grid_step, r, m)?
        }
        None => RunningMin::new(kernel, grid_step)?,
    };
    rm.extend(r_max)
}

pub(crate) fn sq_dist(y: &[f64], z: &[f64]) -> f64 {
    y.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Builtin families as they appear in run configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelFamily {
    Constant { c: f64 },
    Rational { beta: f64 },
    Gaussian { sigma: f64 },
    Bump { height: f64, floor: f64, radius: f64 },
    GeneralGaussian { sigma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub family: KernelFamily,
    #[serde(rename = "sup_norm_K")]
    pub sup_norm: f64,
    #[serde(rename = "lipschitz_L", default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    /// Defaults to the family's known monotonicity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonincreasing: Option<bool>,
}

impl KernelSpec {
    pub fn build(&self) -> Result<InfluenceKernel, KernelError> {
        let (kernel, monotone) = match self.family {
            KernelFamily::Constant { c } => {
                (InfluenceKernel::radial(RadialProfile::Constant { c }, self.sup_norm)?, true)
            }
            KernelFamily::Rational { beta } => {
                (InfluenceKernel::radial(RadialProfile::Rational { beta }, self.sup_norm)?, beta >= 0.0)
            }
            KernelFamily::Gaussian { sigma } => {
                (InfluenceKernel::radial(RadialProfile::Gaussian { sigma }, self.sup_norm)?, true)
            }
            KernelFamily::Bump { height, floor, radius } => {
                if !(floor > 0.0 && radius > 0.0) {
                    return Err(KernelError::Invalid("bump needs floor > 0 and radius > 0".into()));
                }
                let p = RadialProfile::Bump { height, floor, radius };
                (InfluenceKernel::radial(p, self.sup_norm)?, height >= floor)
            }
            KernelFamily::GeneralGaussian { sigma } => {
                (InfluenceKernel::general(PairProfile::Gaussian { sigma }, self.sup_norm)?, false)
            }
        };
        if let KernelForm::Radial(p) = kernel.form() {
            if let Some(natural) = p.natural_sup() {
                if natural > self.sup_norm * (1.0 + SUP_TOL) {
                    return Err(KernelError::SupNormViolation { value: natural, sup_norm: self.sup_norm });
                }
            }
        }
        let mut kernel = kernel.with_nonincreasing(self.nonincreasing.unwrap_or(monotone));
        if let Some(l) = self.lipschitz {
            kernel = kernel.with_lipschitz(l);
        }
        Ok(kernel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bell() -> InfluenceKernel {
        InfluenceKernel::rational(1.0).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(bell().eval_radial(0.0).unwrap(), 1.0);
        assert_relative_eq!(bell().eval_radial(3.0).unwrap(), 0.1, max_relative = 1e-15);
        let g = InfluenceKernel::general(PairProfile::Gaussian { sigma: 1.0 }, 1.0).unwrap();
        assert_eq!(g.eval_pair(&[0.3, -1.0], &[0.3, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn eval_errors() {
        let over = InfluenceKernel::radial(RadialProfile::Custom(Arc::new(|r| 2.0 / (1.0 + r * r))), 1.0)
            .unwrap();
        assert!(matches!(over.eval_radial(0.0), Err(KernelError::SupNormViolation { .. })));
        let zero = InfluenceKernel::radial(RadialProfile::Custom(Arc::new(|_| 0.0)), 1.0).unwrap();
        assert!(matches!(zero.eval_radial(1.0), Err(KernelError::NonPositiveValue { .. })));
        let nan = InfluenceKernel::radial(RadialProfile::Custom(Arc::new(|_| f64::NAN)), 1.0).unwrap();
        assert!(matches!(nan.eval_radial(1.0), Err(KernelError::NonPositiveValue { .. })));
        assert!(matches!(bell().eval_radial(-1.0), Err(KernelError::NegativeDistance(_))));
        assert!(matches!(bell().eval_pair(&[0.0], &[0.0, 1.0]), Err(KernelError::DimensionMismatch(1, 2))));
    }

    #[test]
    fn sup_norm_check_examples() {
        let samples: Vec<_> = [0.0, 0.5, 10.0].iter().map(|&r| KernelInput::Distance(r)).collect();
        let rep = bell().sup_norm_check(&samples);
        assert!(rep.pass);
        assert_eq!(rep.max_observed, 1.0);

        let twice = InfluenceKernel::radial(RadialProfile::Custom(Arc::new(|r| 2.0 / (1.0 + r * r))), 1.0)
            .unwrap();
        let rep = twice.sup_norm_check(&[KernelInput::Distance(0.0)]);
        assert!(!rep.pass);
        assert_eq!(rep.max_observed, 2.0);
        assert!(rep.margin < 0.0);

        let half = InfluenceKernel::general(PairProfile::Custom(Arc::new(|_, _| 0.5)), 0.5).unwrap();
        let rep = half.sup_norm_check(&[
            KernelInput::Pair(vec![0.0, 1.0], vec![3.0, 4.0]),
            KernelInput::Pair(vec![-2.0, 0.0], vec![0.0, 0.0]),
        ]);
        assert!(rep.pass);
        assert_eq!(rep.margin, 0.0);
    }

    #[test]
    fn lower_bound_examples() {
        let b = bell().lower_bound_on_ball(2.0, 1e-3, 1).unwrap();
        assert_relative_eq!(b.value, 0.2, max_relative = 1e-15);
        assert!(b.certified);

        let c = InfluenceKernel::constant(0.7).unwrap();
        assert_eq!(c.lower_bound_on_ball(5.0, 0.1, 2).unwrap().value, 0.7);

        // without the monotone flag, the Lipschitz slack path is taken
        let slack = bell().with_nonincreasing(false).with_lipschitz(0.65);
        let b = slack.lower_bound_on_ball(2.0, 1e-3, 1).unwrap();
        assert!(b.certified);
        assert!(b.value >= 0.2 - 3.25e-4 - 1e-15);
        assert!(b.value <= 0.2);
    }

    #[test]
    fn lower_bound_errors() {
        let coarse = bell().with_nonincreasing(false).with_lipschitz(10.0);
        assert!(matches!(
            coarse.lower_bound_on_ball(5.0, 1.0, 1),
            Err(KernelError::NonPositiveBound { .. })
        ));
        let g = InfluenceKernel::general(PairProfile::Gaussian { sigma: 1.0 }, 1.0).unwrap();
        assert!(matches!(g.lower_bound_on_ball(1.0, 0.5, 4), Err(KernelError::DimensionTooLarge { dim: 4 })));
        assert!(matches!(g.lower_bound_on_ball(1.0, 1e-3, 3), Err(KernelError::GridTooLarge { .. })));
    }

    #[test]
    fn general_gaussian_grid_bound() {
        // the minimum over two unit balls is attained at antipodal points: exp(-4)
        let g = InfluenceKernel::general(PairProfile::Gaussian { sigma: 1.0 }, 1.0)
            .unwrap()
            .with_lipschitz(2.0 * (-0.5f64).exp());
        let b = g.lower_bound_on_ball(1.0, 0.01, 1).unwrap();
        assert!(b.certified);
        assert!(b.value <= (-4.0f64).exp());
        assert!(b.value > (-4.0f64).exp() - 0.02);
    }

    #[test]
    fn rational_lipschitz_matches_spec_value() {
        let l = RadialProfile::Rational { beta: 1.0 }.lipschitz_bound().unwrap();
        assert_relative_eq!(l, 0.649_519_052_838_329, max_relative = 1e-12);
    }

    #[test]
    fn running_min_examples() {
        assert_eq!(running_min(&bell(), 1.5, None, 1e-3).unwrap(), bell().eval_radial(1.5).unwrap());

        let dip = InfluenceKernel::radial(RadialProfile::Custom(Arc::new(|r: f64| 0.6 + 0.4 * r.cos())), 1.0)
            .unwrap();
        let m = running_min(&dip, std::f64::consts::PI, None, 1e-3).unwrap();
        assert_relative_eq!(m, 0.2, max_relative = 1e-12);

        assert_eq!(running_min(&dip, 2.0, Some((2.0, 0.42)), 1e-3).unwrap(), 0.42);
        assert!(running_min(&dip, 1.0, Some((2.0, 0.42)), 1e-3).is_err());
    }

    #[test]
    fn running_min_incremental_matches_fresh_scan() {
        let dip = InfluenceKernel::radial(RadialProfile::Custom(Arc::new(|r: f64| 0.6 + 0.4 * r.cos())), 1.0)
            .unwrap();
        let mut rm = RunningMin::new(&dip, 1e-3).unwrap();
        let mut last = rm.value();
        for k in 1..=40 {
            let v = rm.extend(k as f64 * 0.1).unwrap();
            assert!(v <= last);
            last = v;
        }
        let fresh = running_min(&dip, 4.0, None, 1e-3).unwrap();
        assert_relative_eq!(last, fresh, max_relative = 1e-6);
    }

    #[test]
    fn spec_roundtrip_and_build() {
        let json = r#"{"family":"rational","beta":0.25,"sup_norm_K":1.0}"#;
        let spec: KernelSpec = serde_json::from_str(json).unwrap();
        let k = spec.build().unwrap();
        assert!(k.is_nonincreasing());
        assert!(k.is_radial());
        let gg: KernelSpec =
            serde_json::from_str(r#"{"family":"general-gaussian","sigma":2.0,"sup_norm_K":1.0,"lipschitz_L":0.7}"#)
                .unwrap();
        let k = gg.build().unwrap();
        assert!(!k.is_radial());
        assert_eq!(k.lipschitz(), Some(0.7));

        let under: KernelSpec =
            serde_json::from_str(r#"{"family":"constant","c":2.0,"sup_norm_K":1.0}"#).unwrap();
        assert!(matches!(under.build(), Err(KernelError::SupNormViolation { .. })));
    }

    #[test]
    fn bump_is_positive_and_monotone() {
        let spec = KernelSpec {
            family: KernelFamily::Bump { height: 1.0, floor: 0.1, radius: 2.0 },
            sup_norm: 1.0,
            lipschitz: None,
            nonincreasing: None,
        };
        let k = spec.build().unwrap();
        let mut last = f64::INFINITY;
        for i in 0..=300 {
            let v = k.eval_radial(i as f64 * 0.01).unwrap();
            assert!(v > 0.0 && v <= last);
            last = v;
        }
        assert_eq!(k.eval_radial(0.0).unwrap(), 1.0);
        assert_eq!(k.eval_radial(5.0).unwrap(), 0.1);
    }
}
