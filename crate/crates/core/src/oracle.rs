//! Ground truths that do not go through the RK4 path.
//!
//! With a constant kernel `ψ ≡ k` and two agents, the difference
//! `x₁ − x₂` obeys `ż = −2αk z`, so `|z(t)| = |z(0)|·exp(−2k·A(t))` with
//! `A(t) = ∫₀ᵗ α`. The Cucker–Smale velocity difference behaves the same
//! way, and the position difference is its integral.

use crate::dynamics::{ModelSpec, SystemState};
use crate::integrator::{run_aligned, IntegrateError, Trajectory};
use crate::kernel::{KernelForm, RadialProfile};
use crate::schedule::SwitchingSchedule;

/// `A(t) = ∫₀ᵗ α(s) ds`, piecewise linear with slopes ±1.
pub fn signed_area(schedule: &SwitchingSchedule, t: f64) -> f64 {
    let mut area = 0.0;
    for iv in schedule.iter_intervals() {
        if iv.start >= t {
            break;
        }
        area += iv.sign() * (iv.end.min(t) - iv.start);
    }
    area
}

/// Exact diameter of two HK agents under `ψ ≡ k`.
pub fn two_agent_hk(d0: f64, k: f64, schedule: &SwitchingSchedule, t: f64) -> f64 {
    d0 * (-2.0 * k * signed_area(schedule, t)).exp()
}

/// Exact velocity diameter of two CS agents under `ψ̃ ≡ k`.
pub fn two_agent_cs(dv0: f64, k: f64, schedule: &SwitchingSchedule, t: f64) -> f64 {
    two_agent_hk(dv0, k, schedule, t)
}

/// `∫₀ᵗ exp(−2k·A(s)) ds`, summed in closed form per interval.
pub fn decay_integral(k: f64, schedule: &SwitchingSchedule, t: f64) -> f64 {
    let mut area = 0.0;
    let mut total = 0.0;
    for iv in schedule.iter_intervals() {
        if iv.start >= t {
            break;
        }
        let len = iv.end.min(t) - iv.start;
        let rate = 2.0 * k * iv.sign();
        // ∫₀^len e^{−2k(A + σs)} ds = e^{−2kA}·(1 − e^{−rate·len})/rate
        total += (-2.0 * k * area).exp() * (-(-rate * len).exp_m1()) / rate;
        area += iv.sign() * len;
    }
    total
}

/// Exact position and velocity diameters `(d_X, d_V)` of two CS agents
/// under `ψ̃ ≡ k`, from the initial differences `x₁ − x₂` and `v₁ − v₂`.
pub fn two_agent_cs_diameters(dx0: &[f64], dv0: &[f64], k: f64, schedule: &SwitchingSchedule, t: f64) -> (f64, f64) {
    let i = decay_integral(k, schedule, t);
    let dx = dx0.iter().zip(dv0).map(|(x, v)| (x + v * i).powi(2)).sum::<f64>().sqrt();
    let dv = two_agent_cs(dv0.iter().map(|v| v * v).sum::<f64>().sqrt(), k, schedule, t);
    (dx, dv)
}

/// The constant value of a kernel, when it has one; the closed forms need it.
pub fn constant_kernel_value(spec: &ModelSpec) -> Option<f64> {
    match spec.kernel.form() {
        KernelForm::Radial(RadialProfile::Constant { c }) => Some(*c),
        _ => None,
    }
}

/// Explicit Euler on the same switch-aligned grid as [`crate::integrator::integrate`].
pub fn fine_euler_reference(
    spec: &ModelSpec,
    init: &SystemState,
    horizon: f64,
    h: f64,
) -> Result<Trajectory, IntegrateError> {
    let mut slope = vec![0.0; spec.state_len()];
    run_aligned(spec, init, horizon, h, 1, |alpha, y, _t, dt| {
        spec.field(alpha, y, &mut slope)?;
        for (yi, si) in y.iter_mut().zip(&slope) {
            *yi += dt * si;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn oracle_schedule() -> SwitchingSchedule {
        SwitchingSchedule::explicit(vec![0.0, 1.0, 1.5], 3.0).unwrap()
    }

    #[test]
    fn hk_closed_form_examples() {
        let s = oracle_schedule();
        assert_eq!(two_agent_hk(2.5, 1.0, &s, 0.0), 2.5);
        assert_relative_eq!(two_agent_hk(1.0, 1.0, &s, 1.0), (-2.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(signed_area(&s, 1.5), 0.5, max_relative = 1e-15);
        assert_relative_eq!(two_agent_hk(1.0, 1.0, &s, 1.5), (-1.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn cs_closed_form_examples() {
        let good = SwitchingSchedule::explicit(vec![0.0], 3.0).unwrap();
        assert_relative_eq!(two_agent_cs(1.0, 1.0, &good, 2.0), (-4.0f64).exp(), max_relative = 1e-15);
        let s = SwitchingSchedule::explicit(vec![0.0, 1.0, 1.4], 2.0).unwrap();
        assert_relative_eq!(two_agent_cs(1.0, 1.0, &s, 1.4), (-1.2f64).exp(), max_relative = 1e-14);
        let (dx, dv) = two_agent_cs_diameters(&[2.0, 0.0], &[0.0, 0.0], 1.0, &s, 1.4);
        assert_eq!((dx, dv), (2.0, 0.0));
    }

    #[test]
    fn decay_integral_matches_quadrature() {
        let s = oracle_schedule();
        let t = 2.7;
        let n = 200_000;
        let h = t / n as f64;
        // composite Simpson on each interval piece is exact enough here
        let f = |x: f64| (-2.0 * signed_area(&s, x)).exp();
        let mut sum = 0.0;
        for i in 0..n {
            let a = i as f64 * h;
            sum += h / 6.0 * (f(a) + 4.0 * f(a + h / 2.0) + f(a + h));
        }
        assert_relative_eq!(decay_integral(1.0, &s, t), sum, max_relative = 1e-9);
    }

    #[test]
    fn signed_area_matches_trapezoid_of_alpha() {
        let s = SwitchingSchedule::geometric_bad(1.0, 0.25, 0.5, 6.0).unwrap();
        // switch-aligned grid: α is constant on every cell
        let mut area = 0.0;
        for iv in s.intervals() {
            area += iv.sign() * iv.len();
            assert!((signed_area(&s, iv.end) - area).abs() <= 1e-12);
        }
    }
}
