use proptest::prelude::*;
use switching_consensus::kernel::{running_min, InfluenceKernel, PairProfile, RadialProfile};
use switching_consensus::oracle::two_agent_hk;
use switching_consensus::schedule::{compute_m0, BoundVariant, Model};
use switching_consensus::{diameter, ModelSpec, SwitchingSchedule};

fn schedule() -> SwitchingSchedule {
    SwitchingSchedule::geometric_bad(1.0, 0.1, 0.5, 10.0).unwrap()
}

fn bump() -> InfluenceKernel {
    // not monotone: dips to 0.2 then recovers
    InfluenceKernel::radial(RadialProfile::Custom(std::sync::Arc::new(|r: f64| 0.2 + 0.8 * (r - 2.0).powi(2) / (1.0 + (r - 2.0).powi(2)))), 1.0)
        .unwrap()
        .with_lipschitz(0.6)
}

fn field(model: Model, kernel: InfluenceKernel, n: usize, dim: usize, alpha: f64, y: &[f64]) -> Vec<f64> {
    let spec = ModelSpec::new(model, kernel, schedule(), n, dim).unwrap();
    let mut out = vec![0.0; y.len()];
    spec.field(alpha, y, &mut out).unwrap();
    out
}

fn points(n: usize, dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n * dim)
}

proptest! {
    #[test]
    fn running_min_is_nonincreasing(a in 0.0..5.0f64, b in 0.0..5.0f64) {
        let k = bump();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let m_lo = running_min(&k, lo, None, 1e-3).unwrap();
        let m_hi = running_min(&k, hi, None, 1e-3).unwrap();
        let resumed = running_min(&k, hi, Some((lo, m_lo)), 1e-3).unwrap();
        prop_assert!(resumed <= m_lo);
        // both are lower bounds of the sampled minimum
        let sampled = (0..=1000).map(|i| k.eval_radial(hi * i as f64 / 1000.0).unwrap()).fold(f64::INFINITY, f64::min);
        prop_assert!(m_hi <= sampled && resumed <= sampled);
        prop_assert!(sampled - m_hi <= 1e-2 && sampled - resumed <= 1e-2);
    }

    #[test]
    fn hk_field_conserves_the_mean(y in points(5, 2), alpha in prop::sample::select(vec![-1.0, 1.0])) {
        let f = field(Model::Hk, InfluenceKernel::rational(0.5).unwrap(), 5, 2, alpha, &y);
        for a in 0..2 {
            let s: f64 = (0..5).map(|i| f[2 * i + a]).sum();
            prop_assert!(s.abs() <= 1e-12);
        }
    }

    #[test]
    fn cs_field_conserves_momentum(y in points(2 * 4, 3)) {
        let f = field(Model::Cs, InfluenceKernel::rational(1.0).unwrap(), 4, 3, 1.0, &y);
        for a in 0..3 {
            let s: f64 = (0..4).map(|i| f[12 + 3 * i + a]).sum();
            prop_assert!(s.abs() <= 1e-12);
        }
    }

    #[test]
    fn radial_field_is_translation_equivariant(y in points(4, 2), shift in prop::array::uniform2(-3.0..3.0f64)) {
        let k = InfluenceKernel::rational(1.0).unwrap();
        let moved: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + shift[i % 2]).collect();
        let f = field(Model::Hk, k.clone(), 4, 2, 1.0, &y);
        let g = field(Model::Hk, k, 4, 2, 1.0, &moved);
        for (a, b) in f.iter().zip(&g) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn field_is_linear_in_alpha(y in points(4, 2)) {
        let k = InfluenceKernel::general(PairProfile::Gaussian { sigma: 1.5 }, 1.0).unwrap();
        let f = field(Model::Hk, k.clone(), 4, 2, 1.0, &y);
        let g = field(Model::Hk, k, 4, 2, -1.0, &y);
        for (a, b) in f.iter().zip(&g) {
            prop_assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn diameter_matches_pairwise_max(y in points(6, 3)) {
        let mut best: f64 = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                let s: f64 = (0..3).map(|a| (y[3 * i + a] - y[3 * j + a]).powi(2)).sum();
                best = best.max(s.sqrt());
            }
        }
        prop_assert!((diameter(&y, 3) - best).abs() <= 1e-15 * (1.0 + best));
    }

    #[test]
    fn m0_grows_with_bad_length(b1 in 0.0..0.6f64, b2 in 0.0..0.6f64, m in 0.0..10.0f64) {
        let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
        let m0 = |b: f64| {
            let s = SwitchingSchedule::geometric_bad(1.0, b, 0.5, 10.0).unwrap();
            let v = s.validate(1.0, None, Model::Hk).unwrap();
            compute_m0(&v, 1.0, m, BoundVariant::StateBound).unwrap()
        };
        prop_assert!(m0(lo) <= m0(hi));
        prop_assert!(m0(lo) >= m);
    }

    #[test]
    fn two_agent_solution_is_scale_covariant(d0 in 0.0..5.0f64, t in 0.0..10.0f64, c in 0.1..10.0f64) {
        let s = schedule();
        let a = two_agent_hk(c * d0, 1.0, &s, t);
        let b = c * two_agent_hk(d0, 1.0, &s, t);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
    }

    #[test]
    fn alpha_is_plus_or_minus_one(t in 0.0..10.0f64) {
        let a = schedule().alpha_at(t);
        prop_assert!(a == 1.0 || a == -1.0);
    }
}
