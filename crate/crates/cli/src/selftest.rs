use supstop_core::backtest::{apply_rule, StoppingRule};
use supstop_core::fracops::{caputo_ly, TestFunction};
use supstop_core::regime::{alpha_star_cached, ell};
use supstop_core::series::{beta_integral, build_series};
use supstop_core::special::gamma;
use supstop_core::stable::{inverse_time_change, path_rng, simulate_path, time_change};
use supstop_core::{ModelParams, Result};

type Check = (&'static str, fn() -> Result<bool>);

const CHECKS: &[Check] = &[
    ("time change round trip", time_change_round_trip),
    ("ell vanishes at p = 1", ell_at_one),
    ("beta identity at z = 1", beta_at_one),
    ("series starts at F1(0) = 1", series_origin),
    ("generator kills constants", constant_generator),
    ("running maximum dominates the path", running_max),
    ("stop at zero loses S_T^p", stop_at_zero),
    ("alpha_star in [1.56, 1.58]", alpha_star_range),
];

fn time_change_round_trip() -> Result<bool> {
    for s in [0.0, 0.1, 1.0, 5.0] {
        if (inverse_time_change(1.7, time_change(1.7, s))? - s).abs() > 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

fn ell_at_one() -> Result<bool> {
    Ok(ell(1.7, 1.0, 1.0)? == 0.0)
}

fn beta_at_one() -> Result<bool> {
    let (mu, nu) = (0.7, 0.4);
    let exact = gamma(mu)? * gamma(nu)? / gamma(mu + nu)?;
    Ok((beta_integral(mu, nu, 1.0)? - exact).abs() < 1e-12 * exact)
}

fn series_origin() -> Result<bool> {
    let s = build_series(&ModelParams::unit(1.8, 1.0, 1.1)?, 2.0, 1e-16)?;
    Ok(s.eval_f1(0.0)? == 1.0)
}

fn constant_generator() -> Result<bool> {
    Ok(caputo_ly(&TestFunction::Constant, 1.3, 1.6, 1.0)?.abs() < 1e-14)
}

fn running_max() -> Result<bool> {
    let path = simulate_path(&ModelParams::unit(1.5, 1.0, 1.2)?, 200, 1, &mut path_rng(1, 0));
    Ok(path.s.windows(2).all(|w| w[1] >= w[0]) && path.s.iter().zip(&path.x).all(|(s, x)| s >= x))
}

fn stop_at_zero() -> Result<bool> {
    let params = ModelParams::unit(1.5, 1.0, 1.2)?;
    let path = simulate_path(&params, 200, 2, &mut path_rng(2, 0));
    let (i, loss) = apply_rule(&StoppingRule::StopAtZero, &params, &path);
    Ok(i == 0 && loss == path.s[path.len() - 1].powf(params.p))
}

fn alpha_star_range() -> Result<bool> {
    let a = alpha_star_cached()?;
    Ok((1.56..=1.58).contains(&a))
}

/// Report lines and overall verdict.
pub fn run() -> (String, bool) {
    let mut text = String::new();
    let mut ok = true;
    for (name, check) in CHECKS {
        let line = match check() {
            Ok(true) => format!("PASS {name}\n"),
            Ok(false) => {
                ok = false;
                format!("FAIL {name}\n")
            }
            Err(e) => {
                ok = false;
                format!("FAIL {name}: {e}\n")
            }
        };
        text.push_str(&line);
    }
    (text, ok)
}
