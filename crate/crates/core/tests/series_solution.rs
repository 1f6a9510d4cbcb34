mod common;

use rayon::prelude::*;
use supstop_core::fracops::{master_residual, termwise_residuals};
use supstop_core::series::{
    a1_constant, build_series, build_series_auto, certified_z_max, eval_v1, laplace_v1_closed, laplace_v1_numeric, DEFAULT_TOL,
};
use supstop_core::special::{gamma, ln_gamma};
use supstop_core::stable::{path_rng, simulate_sup, StableSampler};

use common::{mean_stderr, params};

const GRID: [(f64, f64); 6] = [(1.5, 1.2), (1.8, 1.1), (1.3, 1.2), (1.9, 1.6), (1.8, 1.5), (1.6, 1.3)];

#[test]
fn first_coefficient_formula() {
    for (alpha, p) in GRID {
        for c in [0.5, 1.0, 2.0] {
            let pr = params(alpha, c, p);
            let s = build_series(&pr, 2.0, DEFAULT_TOL).unwrap();
            let want = (p / alpha) / (pr.scale_const() * gamma(alpha + 1.0).unwrap());
            assert!((s.coeffs[1] - want).abs() < 1e-14 * want.abs(), "{alpha} {p} {c}");
            assert_eq!(s.coeffs[0], 1.0);
        }
    }
}

#[test]
fn signs_alternate_from_one() {
    let s = build_series(&params(1.5, 1.0, 1.2), 8.0, DEFAULT_TOL).unwrap();
    for n in 1..s.n_terms - 1 {
        assert_eq!(s.signs[n], -s.signs[n + 1], "n = {n}");
    }
}

/// Ten more terms from the recurrence change `F_1(z_max)` by less than `tol`.
#[test]
fn truncation_is_self_consistent() {
    let tol = 1e-12;
    for (alpha, p) in GRID {
        let pr = params(alpha, 1.0, p);
        let z_max = certified_z_max(&pr, 30.0).unwrap();
        let s = build_series(&pr, z_max, tol).unwrap();
        let k = pr.scale_const();
        let (mut log_a, mut sign) = (s.log_abs[s.n_terms - 1], s.signs[s.n_terms - 1]);
        let mut extra = 0.0;
        for n in s.n_terms - 1..s.n_terms + 9 {
            let m = n as f64;
            let step = (p / alpha - m).abs().ln() + ln_gamma(alpha * m + 1.0).unwrap() - ln_gamma(alpha * (m + 1.0) + 1.0).unwrap() - k.ln();
            log_a += step;
            sign *= (p / alpha - m).signum();
            extra += sign * (log_a + alpha * (m + 1.0) * z_max.ln()).exp();
        }
        assert!(extra.abs() < tol, "({alpha}, {p}): {extra}");
        assert!(extra.abs() <= s.tail_bound);
    }
}

#[test]
fn recurrence_terms_balance() {
    for (alpha, p) in GRID {
        let s = build_series(&params(alpha, 1.0, p), 4.0, DEFAULT_TOL).unwrap();
        let worst = termwise_residuals(&s).unwrap().into_iter().fold(0.0f64, f64::max);
        assert!(worst < 1e-10, "{alpha} {p}: {worst}");
    }
}

#[test]
fn master_equation_at_sample_points() {
    for ((alpha, p), zs) in [((1.5, 1.2), [0.5, 1.0, 2.0]), ((1.8, 1.5), [0.5, 1.0, 2.0])] {
        let s = build_series_auto(&params(alpha, 1.0, p), 30.0).unwrap();
        for z in zs {
            let r = master_residual(&s, z).unwrap();
            assert!(r.abs() < 1e-6, "({alpha}, {p}) z {z}: {r}");
        }
    }
}

#[test]
fn f1_increasing() {
    let s = build_series_auto(&params(1.7, 1.0, 1.1), 30.0).unwrap();
    let mut prev = s.eval_f1(0.0).unwrap();
    for k in 1..=400 {
        let z = s.z_max * k as f64 / 400.0;
        let v = s.eval_f1(z).unwrap();
        assert!(v > prev, "z {z}");
        prev = v;
    }
}

#[test]
fn a1_positive_and_value_at_zero() {
    for alpha in [1.1, 1.3, 1.5, 1.7, 1.9] {
        for k in 1..=5 {
            let p = 1.0 + (alpha - 1.0) * k as f64 / 6.0;
            let pr = params(alpha, 1.0, p);
            let a1 = a1_constant(&pr);
            assert!(a1 > 0.0 && a1.is_finite());
            let s = build_series(&pr, 1.0, DEFAULT_TOL).unwrap();
            assert_eq!(eval_v1(&s, 0.0).unwrap().value, a1);
            assert!(laplace_v1_closed(&pr, 1.0).unwrap() > laplace_v1_closed(&pr, 2.0).unwrap());
        }
    }
}

#[test]
fn laplace_small_lambda_limit() {
    for (alpha, p) in GRID {
        let pr = params(alpha, 1.0, p);
        let k = pr.scale_const();
        let want = a1_constant(&pr) * gamma(1.0 + p / alpha).unwrap() / k.powf(p / alpha);
        let lambda: f64 = 1e-6;
        let got = lambda.powf(1.0 + p) * laplace_v1_closed(&pr, lambda).unwrap();
        assert!((got / want - 1.0).abs() < 1e-3, "{alpha} {p}: {got} vs {want}");
    }
}

#[test]
fn laplace_numeric_matches_closed_form() {
    for (alpha, p) in GRID {
        let pr = params(alpha, 1.0, p);
        let s = build_series_auto(&pr, 30.0).unwrap();
        for lambda in [1.0, 2.0] {
            let (num, closed) = (laplace_v1_numeric(&s, lambda).unwrap(), laplace_v1_closed(&pr, lambda).unwrap());
            assert!((num / closed - 1.0).abs() < 1e-4, "({alpha}, {p}) lambda {lambda}: {num} vs {closed}");
        }
    }
}

#[test]
fn v1_far_out_grows_like_z_pow_p() {
    let pr = params(1.6, 1.0, 1.3);
    let sampler = StableSampler::new(&pr);
    let steps = 1000;
    let scale = sampler.step_scale(1.0 / steps as f64);
    let z: f64 = 50.0;
    let ratios: Vec<f64> = (0..20_000u64)
        .into_par_iter()
        .map(|i| {
            let mut sup = [0.0];
            let x = simulate_sup(&sampler, scale, steps, &mut sup, &mut path_rng(31, i));
            (z.max(sup[0]) - x).powf(pr.p) / z.powf(pr.p)
        })
        .collect();
    let (m, _) = mean_stderr(&ratios);
    assert!((0.98..=1.10).contains(&m), "{m}");
    let s = build_series_auto(&pr, 30.0).unwrap();
    let v = eval_v1(&s, z).unwrap();
    assert!(v.asymptotic && v.value == z.powf(pr.p));
}

/// Brute-force mean of `(z v S_1 - X_1)^p` against `a_1 F_1(z)`.
#[test]
fn v1_matches_monte_carlo() {
    let pr = params(1.5, 1.0, 1.2);
    let s = build_series_auto(&pr, 30.0).unwrap();
    let sampler = StableSampler::new(&pr);
    let steps = 10_000;
    let scale = sampler.step_scale(1.0 / steps as f64);
    let zs = [0.0, 0.5, 1.0];
    let samples: Vec<[f64; 3]> = (0..200_000u64)
        .into_par_iter()
        .map(|i| {
            let mut sup = [0.0];
            let x = simulate_sup(&sampler, scale, steps, &mut sup, &mut path_rng(77, i));
            zs.map(|z: f64| (z.max(sup[0]) - x).powf(pr.p))
        })
        .collect();
    for (k, z) in zs.iter().enumerate() {
        let col: Vec<f64> = samples.iter().map(|v| v[k]).collect();
        let (m, se) = mean_stderr(&col);
        let v1 = eval_v1(&s, *z).unwrap().value;
        assert!((m - v1).abs() < 3.0 * se, "z {z}: MC {m} +/- {se} vs {v1}");
    }
}
