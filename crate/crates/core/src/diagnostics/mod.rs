//! Diameters and the certificate checks run along a finished trajectory.
//!
//! Every check compares a measured `lhs` against a bound `rhs` that already
//! includes its slack, and records `margin = rhs − lhs`. A check passes when
//! the margin is non-negative.

mod certificates;
mod lyapunov;

use serde::Serialize;
use thiserror::Error;

use crate::integrator::Trajectory;
use crate::kernel::KernelError;

pub use certificates::{
    bound_certificates, contraction_certificate, default_directions, envelope_certificate,
    growth_certificate, max_principle_certificate, BoundReport, ContractionReport,
    DirectionalViolation, EnvelopeReport, GrowthReport, IntervalCheck, MaxPrincipleReport,
    StateField, RANDOM_DIRECTIONS,
};
pub use lyapunov::{flocking_detector, lyapunov_series, FlockingVerdict, LyapunovSeries, PhiTable};

/// Slack for the quadrature-based Lyapunov checks.
pub const TOL_LYAP: f64 = 1e-4;

/// Absolute slack per unit of initial diameter, covering roundoff once a
/// diameter has decayed to the last few bits of the state.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// At most this many violations are stored per check; the rest are counted.
pub const MAX_RECORDED: usize = 100;

/// Multiplicative slack `1e−6 + 100·h⁴` absorbing the RK4 global error.
pub fn tol_cert(h_max: f64) -> f64 {
    1e-6 + 100.0 * h_max.powi(4)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("trajectory has no sample at switch time {t}")]
    MissingSwitchSamples { t: f64 },
    #[error("bad interval {index} of length {length} makes the growth factor undefined")]
    FactorUndefined { index: usize, length: f64 },
    #[error("interval {index} has length {length} > T = {t_bound}")]
    TIntervalViolation { index: usize, length: f64, t_bound: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// One failed (or tight) inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl Violation {
    pub fn new(t: f64, lhs: f64, rhs: f64) -> Self {
        Violation { t, lhs, rhs, margin: rhs - lhs }
    }
}

/// Violations of one check, capped at [`MAX_RECORDED`].
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Violations {
    pub total: usize,
    pub recorded: Vec<Violation>,
}

impl Violations {
    /// Records `lhs ≤ rhs` at `t` if it fails.
    pub fn check(&mut self, t: f64, lhs: f64, rhs: f64) -> bool {
        let ok = lhs <= rhs;
        if !ok {
            self.total += 1;
            if self.recorded.len() < MAX_RECORDED {
                self.recorded.push(Violation::new(t, lhs, rhs));
            }
        }
        ok
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

/// Largest pairwise Euclidean distance among the `n = flat.len()/dim` rows.
pub fn diameter(flat: &[f64], dim: usize) -> f64 {
    let n = flat.len() / dim;
    let mut best: f64 = 0.0;
    for i in 0..n {
        let a = &flat[i * dim..(i + 1) * dim];
        for j in i + 1..n {
            let b = &flat[j * dim..(j + 1) * dim];
            best = best.max(crate::kernel::sq_dist(a, b));
        }
    }
    best.sqrt()
}

/// Per-sample diameters. For HK `d_v` is absent and `d_x` is `d`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiameterSeries {
    pub times: Vec<f64>,
    pub d_x: Vec<f64>,
    pub d_v: Option<Vec<f64>>,
}

impl DiameterSeries {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let dim = traj.dim;
        let d_x = (0..traj.len()).map(|k| diameter(traj.positions(k), dim)).collect();
        let d_v = traj
            .velocities(0)
            .map(|_| (0..traj.len()).map(|k| diameter(traj.velocities(k).unwrap(), dim)).collect());
        DiameterSeries { times: traj.times.clone(), d_x, d_v }
    }
}

/// Checks that every segment endpoint is a recorded sample at its switch time.
pub(crate) fn check_segments(traj: &Trajectory) -> Result<(), DiagnosticsError> {
    if traj.segments.is_empty() && traj.final_time() > 0.0 {
        return Err(DiagnosticsError::MissingSwitchSamples { t: 0.0 });
    }
    for seg in &traj.segments {
        if traj.times[seg.first] != seg.interval.start {
            return Err(DiagnosticsError::MissingSwitchSamples { t: seg.interval.start });
        }
        if traj.times[seg.last] != seg.interval.end {
            return Err(DiagnosticsError::MissingSwitchSamples { t: seg.interval.end });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diameter_examples() {
        assert_eq!(diameter(&[1.0, 2.0, 1.0, 2.0], 2), 0.0);
        assert_eq!(diameter(&[0.0, 0.0, 3.0, 4.0], 2), 5.0);
    }

    #[test]
    fn diameter_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<f64> = (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut pairs = 0;
        let mut best: f64 = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                if i < j {
                    pairs += 1;
                }
                let s: f64 = (0..3).map(|a| (pts[3 * i + a] - pts[3 * j + a]).powi(2)).sum();
                best = best.max(s);
            }
        }
        assert_eq!(pairs, 15);
        assert_eq!(diameter(&pts, 3), best.sqrt());
    }

    #[test]
    fn tolerance_formula() {
        assert!((tol_cert(1e-3) - (1e-6 + 1e-10)).abs() < 1e-18);
    }

    #[test]
    fn violations_cap() {
        let mut v = Violations::default();
        for k in 0..(MAX_RECORDED + 5) {
            assert!(!v.check(k as f64, 2.0, 1.0));
        }
        assert!(v.check(0.0, 1.0, 1.0));
        assert_eq!(v.total, MAX_RECORDED + 5);
        assert_eq!(v.recorded.len(), MAX_RECORDED);
        assert_eq!(v.recorded[0].margin, -1.0);
    }
}
