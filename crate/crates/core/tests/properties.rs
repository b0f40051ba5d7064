use proptest::prelude::*;

use stable_wavelet::depmeas::{
    codifference, estimate_eps1, i_measure, m1, m1_star, m2, representation_transform, u_measure, KernelPair,
};
use stable_wavelet::estimators::ols_weights;
use stable_wavelet::io::fmt_real;
use stable_wavelet::stable::{signed_power, DiscreteKernel};

fn pair_strategy() -> impl Strategy<Value = KernelPair> {
    (1usize..=6, 1.05f64..1.95).prop_flat_map(|(n, alpha)| {
        (
            prop::collection::vec(0.1f64..3.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
        )
            .prop_filter_map("kernels need positive norm", move |(mass, f, g)| {
                KernelPair::new(
                    DiscreteKernel::new(mass.clone(), f).ok()?,
                    DiscreteKernel::new(mass, g).ok()?,
                    alpha,
                )
                .ok()
            })
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #[test]
    fn measures_symmetric(p in pair_strategy()) {
        let q = p.swapped();
        prop_assert!(rel(m2(&p), m2(&q)) < 1e-12);
        prop_assert!(rel(m1(&p).unwrap(), m1(&q).unwrap()) < 1e-12);
        prop_assert!(rel(codifference(&p), codifference(&q)) < 1e-12 || codifference(&p).abs() < 1e-12);
        prop_assert!(rel(m1(&p).unwrap(), m1_star(&p).unwrap() + m1_star(&q).unwrap()) < 1e-12);
    }

    #[test]
    fn holder_bound(p in pair_strategy()) {
        let bound = (p.f_mass() * p.g_mass()).sqrt();
        prop_assert!(m2(&p) <= bound * (1.0 + 1e-12));
        let e = estimate_eps1(&p);
        prop_assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn gap_dominated_by_exponent_gap(p in pair_strategy(), u in -4.0f64..4.0, v in -4.0f64..4.0) {
        let gap = u_measure(&p, u, v).abs();
        let exp_gap = i_measure(&p, u, v).abs();
        prop_assert!(gap <= exp_gap * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn joint_homogeneity(p in pair_strategy(), c in 0.1f64..10.0) {
        let a = p.alpha();
        let scaled = KernelPair::new(p.f().scaled(c), p.g().scaled(c), a).unwrap();
        let k = c.powf(a);
        prop_assert!(rel(m2(&scaled), k * m2(&p)) < 1e-12);
        prop_assert!(rel(m1(&scaled).unwrap(), k * m1(&p).unwrap()) < 1e-12);
        prop_assert!(rel(i_measure(&scaled, 0.3, -0.8), k * i_measure(&p, 0.3, -0.8)) < 1e-9
            || i_measure(&p, 0.3, -0.8).abs() < 1e-12);
    }

    #[test]
    fn representation_change_invariant(
        p in pair_strategy(),
        h in prop::collection::vec((0.1f64..10.0, any::<bool>()), 6),
        shift in 0usize..6,
    ) {
        let n = p.len();
        let h: Vec<f64> = h[..n].iter().map(|(m, s)| if *s { *m } else { -*m }).collect();
        let relabel: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let q = representation_transform(&p, &h, &relabel).unwrap();
        prop_assert!(rel(m2(&p), m2(&q)) < 1e-10);
        prop_assert!(rel(m1_star(&p).unwrap(), m1_star(&q).unwrap()) < 1e-10);
        let (a, b) = (i_measure(&p, 1.3, 0.4), i_measure(&q, 1.3, 0.4));
        prop_assert!(rel(a, b) < 1e-10 || (a - b).abs() < 1e-12);
    }

    #[test]
    fn regression_weight_identities(lo in 1u32..8, span in 1u32..8, hints in prop::collection::vec(0.1f64..10.0, 9)) {
        let hi = lo + span;
        let m = (span + 1) as usize;
        for w in [ols_weights(lo, hi, None).unwrap(), ols_weights(lo, hi, Some(&hints[..m])).unwrap()] {
            let s0: f64 = w.w.iter().sum();
            let s1: f64 = w.js().zip(&w.w).map(|(j, x)| j as f64 * x).sum();
            prop_assert!(s0.abs() < 1e-12);
            prop_assert!((s1 - 1.0).abs() < 1e-12);
            let shifted = w.shifted(3);
            let s1: f64 = shifted.js().zip(&shifted.w).map(|(j, x)| j as f64 * x).sum();
            prop_assert!((s1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn power_inequalities(alpha in 1.01f64..1.99, x1 in -1e3f64..1e3, x2 in -1e3f64..1e3) {
        prop_assume!(x2 != 0.0);
        let d = (signed_power(x1, alpha - 1.0).unwrap() - signed_power(x2, alpha - 1.0).unwrap()).abs();
        let slack = 1e-12 * (1.0 + d);
        prop_assert!(d <= 2.0 * x2.abs().powf(alpha - 2.0) * (x1 - x2).abs() + slack);
        prop_assert!(d <= 2.0 * (x1 - x2).abs().powf(alpha - 1.0) + slack);
        let lhs = ((x1 + x2).abs().powf(alpha) - x1.abs().powf(alpha) - x2.abs().powf(alpha)).abs();
        let scale = (x1.abs() + x2.abs()).powf(alpha);
        prop_assert!(lhs <= 2.0 * (x1 * x2).abs().powf(alpha / 2.0) + 1e-12 * scale);
    }

    #[test]
    fn reals_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
    }
}
