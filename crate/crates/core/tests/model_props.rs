use approx::assert_relative_eq;
use proptest::prelude::*;
use tmsvloss_core::model::{self, DEFAULT_SERIES_TOL};
use tmsvloss_core::{Cutoff, ParamSet, apply_dark_counts, lossy_tmsv_pnd, model_pnd};

fn binomial(n: usize, k: usize, q: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut c = 1.0;
    for i in 0..k {
        c *= (n - i) as f64 / (i + 1) as f64;
    }
    c * q.powi(k as i32) * (1.0 - q).powi((n - k) as i32)
}

fn poisson(mean: f64, k: usize) -> f64 {
    let mut p = (-mean).exp();
    for i in 1..=k {
        p *= mean / i as f64;
    }
    p
}

/// Mixture of binomially thinned pairs `|N,N⟩` with thermal weights.
fn brute_force(theta: &ParamSet, c: usize) -> Vec<f64> {
    let t2 = theta.r.tanh().powi(2);
    let c2 = theta.r.cosh().powi(2);
    let (q1, q2) = (theta.eta1.powi(2), theta.eta2.powi(2));
    let mut clean = vec![0.0; (c + 1) * (c + 1)];
    for k in 0..=c {
        for l in 0..=c {
            let mut s = 0.0;
            let mut n = k.max(l);
            loop {
                let w = t2.powi(n as i32) / c2;
                if w < 1e-40 || n > 20_000 {
                    break;
                }
                s += w * binomial(n, k, q1) * binomial(n, l, q2);
                n += 1;
            }
            clean[k * (c + 1) + l] = s;
        }
    }
    let mut out = vec![0.0; (c + 1) * (c + 1)];
    for m in 0..=c {
        for n in 0..=c {
            let mut s = 0.0;
            for k in 0..=m {
                for l in 0..=n {
                    s += poisson(theta.nu1, m - k) * poisson(theta.nu2, n - l) * clean[k * (c + 1) + l];
                }
            }
            out[m * (c + 1) + n] = s;
        }
    }
    out
}

fn theta_strategy() -> impl Strategy<Value = ParamSet> {
    (0.05f64..1.0, 0.05f64..1.0, 0.0f64..1.5, 0.0f64..0.3, 0.0f64..0.3)
        .prop_map(|(a, b, r, n1, n2)| ParamSet::new(a, b, r, n1, n2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_plus_tail_is_normalized(theta in theta_strategy(), c in 0usize..30) {
        let pnd = model_pnd(&theta, Cutoff::square(c), DEFAULT_SERIES_TOL).unwrap();
        prop_assert!((pnd.total() + pnd.tail_mass() - 1.0).abs() < 1e-12);
        prop_assert!(pnd.probs().iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn phase_does_not_change_statistics(theta in theta_strategy(), phi in -10.0f64..10.0) {
        let c = Cutoff::new(7, 9);
        let a = model_pnd(&theta, c, DEFAULT_SERIES_TOL).unwrap();
        let b = model_pnd(&theta.with_phi(phi), c, DEFAULT_SERIES_TOL).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            prop_assert!((x - y).abs() <= 1e-14);
        }
    }

    #[test]
    fn swapping_modes_transposes(theta in theta_strategy()) {
        let a = model_pnd(&theta, Cutoff::new(6, 11), DEFAULT_SERIES_TOL).unwrap();
        let b = model_pnd(&theta.swapped(), Cutoff::new(11, 6), DEFAULT_SERIES_TOL).unwrap();
        prop_assert_eq!(a.transposed(), b);
    }

    #[test]
    fn agrees_with_mixture_sum(theta in theta_strategy(), c in 0usize..=8) {
        let pnd = model_pnd(&theta, Cutoff::square(c), DEFAULT_SERIES_TOL).unwrap();
        let oracle = brute_force(&theta, c);
        for (x, y) in pnd.probs().iter().zip(&oracle) {
            prop_assert!((x - y).abs() < 1e-12, "{} vs {}", x, y);
        }
    }

    #[test]
    fn tail_shrinks_with_cutoff(theta in theta_strategy()) {
        let mut last = f64::INFINITY;
        for c in [0, 1, 2, 4, 8, 16, 32] {
            let tail = model_pnd(&theta, Cutoff::square(c), DEFAULT_SERIES_TOL).unwrap().tail_mass();
            prop_assert!(tail <= last + 1e-15);
            last = tail;
        }
    }

    #[test]
    fn dark_counts_only_shift_the_means(theta in theta_strategy()) {
        let clean = lossy_tmsv_pnd(&theta, Cutoff::square(150), DEFAULT_SERIES_TOL).unwrap();
        let noisy = apply_dark_counts(&clean, theta.nu1, theta.nu2).unwrap();
        prop_assert!((noisy.mean_a() - clean.mean_a() - theta.nu1).abs() < 1e-8);
        prop_assert!((noisy.mean_b() - clean.mean_b() - theta.nu2).abs() < 1e-8);
    }
}

#[test]
fn marginal_means_match_thinned_thermal_light() {
    let theta = ParamSet::new(0.39202, 0.38206, 1.3, 0.03419, 0.06568);
    let pnd = model::model_pnd_auto(&theta).unwrap();
    let s2 = 1.3f64.sinh().powi(2);
    assert_relative_eq!(pnd.mean_a(), theta.eta1.powi(2) * s2 + theta.nu1, epsilon = 1e-9);
    assert_relative_eq!(pnd.mean_b(), theta.eta2.powi(2) * s2 + theta.nu2, epsilon = 1e-9);
    assert!(pnd.tail_mass() < 1e-12);
}

#[test]
fn invalid_parameters_are_rejected() {
    for theta in [
        ParamSet::new(0.0, 0.5, 1.0, 0.0, 0.0),
        ParamSet::new(1.2, 0.5, 1.0, 0.0, 0.0),
        ParamSet::new(0.5, 0.5, -0.1, 0.0, 0.0),
        ParamSet::new(0.5, 0.5, 1.0, -1e-3, 0.0),
        ParamSet::new(0.5, f64::NAN, 1.0, 0.0, 0.0),
    ] {
        assert!(model_pnd(&theta, Cutoff::square(4), DEFAULT_SERIES_TOL).is_err());
    }
}
