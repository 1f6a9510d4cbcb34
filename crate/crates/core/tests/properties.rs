use proptest::prelude::*;
use supstop_core::backtest::{apply_rule, StoppingRule};
use supstop_core::fracops::{caputo_ly, SmoothFunction, TestFunction};
use supstop_core::regime::{ell, p_star};
use supstop_core::series::{a1_constant, beta_integral, beta_integral_quadrature, build_series};
use supstop_core::stable::{inverse_time_change, path_rng, simulate_path, time_change};
use supstop_core::ModelParams;

/// `a f + b g`.
struct Combo(f64, TestFunction, f64, TestFunction);

impl SmoothFunction for Combo {
    fn value(&self, x: f64) -> f64 {
        self.0 * self.1.value(x) + self.2 * self.3.value(x)
    }
    fn d1(&self, x: f64) -> f64 {
        self.0 * self.1.d1(x) + self.2 * self.3.d1(x)
    }
    fn d2(&self, x: f64) -> f64 {
        self.0 * self.1.d2(x) + self.2 * self.3.d2(x)
    }
    fn breaks(&self) -> Vec<f64> {
        let mut b = self.1.breaks();
        b.extend(self.3.breaks());
        b
    }
}

fn test_function() -> impl Strategy<Value = TestFunction> {
    prop::sample::select(TestFunction::ALL.to_vec())
}

fn alpha_p() -> impl Strategy<Value = (f64, f64)> {
    (1.05f64..1.95).prop_flat_map(|a| (Just(a), 1.01f64..(a - 0.01)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ell_scales_with_c((alpha, p) in alpha_p(), c in 0.05f64..20.0) {
        let base = ell(alpha, p, 1.0).unwrap();
        prop_assert!((ell(alpha, p, c).unwrap() - c * base).abs() <= 1e-13 * (c * base).abs());
    }

    #[test]
    fn time_change_round_trips(alpha in 0.5f64..2.0, s in 0.0f64..20.0) {
        let t = time_change(alpha, s);
        prop_assert!((0.0..1.0).contains(&t));
        prop_assert!((inverse_time_change(alpha, t).unwrap() - s).abs() < 1e-9 * (1.0 + s) * (1.0 + (alpha * s).exp()));
    }

    #[test]
    fn beta_integral_matches_quadrature(mu in 0.1f64..4.0, nu in 0.05f64..1.0, z in 0.05f64..3.0) {
        let a = beta_integral(mu, nu, z).unwrap();
        let b = beta_integral_quadrature(mu, nu, z);
        prop_assert!((a - b).abs() < 1e-9 * a.abs(), "{} vs {}", a, b);
    }

    #[test]
    fn caputo_is_linear(
        f in test_function(), g in test_function(), a in -3.0f64..3.0, b in -3.0f64..3.0,
        alpha in 1.05f64..1.95, y in 0.1f64..4.0,
    ) {
        let lhs = caputo_ly(&Combo(a, f, b, g), y, alpha, 1.0).unwrap();
        let rhs = a * caputo_ly(&f, y, alpha, 1.0).unwrap() + b * caputo_ly(&g, y, alpha, 1.0).unwrap();
        let scale = (a.abs() + b.abs()) * (caputo_ly(&f, y, alpha, 1.0).unwrap().abs() + caputo_ly(&g, y, alpha, 1.0).unwrap().abs());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * scale.max(1e-6), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn a1_is_positive((alpha, p) in alpha_p(), c in 0.1f64..10.0) {
        let a1 = a1_constant(&ModelParams::unit(alpha, c, p).unwrap());
        prop_assert!(a1 > 0.0 && a1.is_finite());
    }

    #[test]
    fn p_star_stays_below_alpha(alpha in 1.58f64..1.995) {
        if let Some(p) = p_star(alpha, 1e-12).unwrap() {
            prop_assert!(p > 1.0 && p < alpha);
        }
    }

    #[test]
    fn rule_losses_are_well_formed(
        (alpha, p) in alpha_p(), seed in 0u64..1000, z in 0.0f64..3.0, z_star in 0.1f64..5.0,
    ) {
        let pr = ModelParams::unit(alpha, 1.0, p).unwrap();
        let path = simulate_path(&pr, 200, seed, &mut path_rng(seed, 0));
        let last = path.len() - 1;
        let st = path.s[last];
        for rule in [
            StoppingRule::StopAtZero,
            StoppingRule::StopAtT,
            StoppingRule::FixedThreshold { z },
            StoppingRule::OptimalBoundary { z_star, beta_star: None },
        ] {
            let (i, loss) = apply_rule(&rule, &pr, &path);
            prop_assert!(i <= last);
            prop_assert!(loss >= 0.0 && loss.is_finite());
            prop_assert!(loss >= 0.0f64.max(st - path.x[i]).powf(p) - 1e-12);
        }
        prop_assert_eq!(apply_rule(&StoppingRule::StopAtT, &pr, &path).0, last);
    }

    #[test]
    fn f1_is_increasing((alpha, p) in alpha_p()) {
        let pr = ModelParams::unit(alpha, 1.0, p).unwrap();
        let s = build_series(&pr, 3.0, 1e-16).unwrap();
        let mut last = s.eval_f1(0.0).unwrap();
        for k in 1..=60 {
            let v = s.eval_f1(3.0 * k as f64 / 60.0).unwrap();
            prop_assert!(v > last);
            last = v;
        }
    }
}
