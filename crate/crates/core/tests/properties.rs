use fracvi::bounds::{kl_gaussian, lb_gamma, log_evidence, renyi_gaussian, ConjugateGaussianModel};
use fracvi::calibration::ideal_length;
use fracvi::gmm::{credible_interval, fractional_assignment};
use fracvi::numeric::log_sum_exp;
use fracvi::{Fraction, Gaussian1D};
use proptest::prelude::*;

fn gaussian() -> impl Strategy<Value = Gaussian1D> {
    (-3.0..3.0f64, 0.05..4.0f64).prop_map(|(m, v)| Gaussian1D::new(m, v).unwrap())
}

fn model() -> impl Strategy<Value = ConjugateGaussianModel> {
    (gaussian(), 0.2..3.0f64, prop::collection::vec(-4.0..4.0f64, 1..12))
        .prop_map(|(prior, obs, data)| ConjugateGaussianModel::new(prior, obs, data).unwrap())
}

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01..1.0f64, k).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn unit_interval_bounds_never_exceed_the_evidence(m in model(), q in gaussian(), g in 0.01..0.99f64) {
        if let Ok(b) = lb_gamma(&m, &q, Fraction::new(g).unwrap()) {
            let ev = log_evidence(&m);
            prop_assert!(b.total <= ev + 1e-9 * ev.abs().max(1.0));
        }
    }

    #[test]
    fn negative_fractions_bound_from_above(m in model(), q in gaussian(), g in -4.0..-0.01f64) {
        if let Ok(b) = lb_gamma(&m, &q, Fraction::new(g).unwrap()) {
            let ev = log_evidence(&m);
            prop_assert!(b.total >= ev - 1e-9 * ev.abs().max(1.0));
        }
    }

    #[test]
    fn divergences_are_nonnegative(q in gaussian(), p in gaussian(), a in 0.05..3.0f64) {
        prop_assert!(kl_gaussian(&q, &p) >= -1e-12);
        if let Ok(d) = renyi_gaussian(&q, &p, a) {
            prop_assert!(d >= -1e-12);
        }
    }

    #[test]
    fn renyi_divergence_grows_with_order(q in gaussian(), p in gaussian(), a in 0.05..0.95f64) {
        let lo = renyi_gaussian(&q, &p, a).unwrap();
        let kl = kl_gaussian(&q, &p);
        prop_assert!(lo <= kl + 1e-9 * kl.max(1.0));
    }

    #[test]
    fn interval_contains_the_mean(g in gaussian(), alpha in 0.001..0.999f64) {
        let (lo, hi) = credible_interval(&g, alpha).unwrap();
        prop_assert!(lo < g.mean() && g.mean() < hi);
        prop_assert!(((lo + hi) / 2.0 - g.mean()).abs() < 1e-9);
    }

    #[test]
    fn fractional_assignments_are_probabilities(bayes in simplex(4), prior in simplex(4), g in 0.01..1.0f64) {
        let out = fractional_assignment(&bayes, &prior, g).unwrap();
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(out.iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn log_sum_exp_shifts(xs in prop::collection::vec(-50.0..50.0f64, 1..20), c in -100.0..100.0f64) {
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        prop_assert!((log_sum_exp(&shifted) - log_sum_exp(&xs) - c).abs() < 1e-9);
    }

    #[test]
    fn ideal_length_shrinks_with_data(n in 2usize..2000, k in 1usize..6) {
        prop_assert!(ideal_length(k, n + 1, 1.0, 0.05) < ideal_length(k, n, 1.0, 0.05));
    }
}
