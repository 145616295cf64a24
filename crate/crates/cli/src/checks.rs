//! Self-check battery behind `safezone validate`.

use std::f64::consts::{LN_2, PI};

use rand::{Rng, SeedableRng};
use serde::Serialize;

use safezone_core::averaging::monte_carlo::MC_MIN_SAMPLES;
use safezone_core::averaging::{quad_semi_infinite, McConfig};
use safezone_core::channel::{
    acceptance_probability, eve_transmissivity, offset_pdf, Footprint, GammaGamma, OffsetSq,
    SeededRng,
};
use safezone_core::security::{holevo_bound, holevo_bound_offset, simulate_homodyne};
use safezone_core::specfun::{bessel_k, erf, gamma};
use safezone_core::Error;

use crate::config::ScenarioConfig;
use crate::CliError;

/// Strand count used for the Monte Carlo checks; fixed so the outcome does
/// not depend on the machine.
pub const MC_STRANDS: usize = 8;
pub const HOLEVO_DRAWS: usize = 1000;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: impl Into<String>, error: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            error,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }

    pub fn margin(&self) -> f64 {
        self.tolerance - self.error
    }
}

fn rel(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

/// Runs every check. Configuration errors and too-small sample counts are
/// reported before anything is evaluated.
pub fn run_checks(cfg: &ScenarioConfig, samples: usize, seed: u64) -> Result<Vec<Check>, CliError> {
    cfg.validate()?;
    if samples < MC_MIN_SAMPLES {
        return Err(Error::SampleSize {
            got: samples,
            min: MC_MIN_SAMPLES,
        }
        .into());
    }
    let mut out = Vec::new();
    specfun_checks(cfg, &mut out)?;
    distribution_checks(cfg, &mut out)?;
    holevo_checks(cfg, seed, &mut out)?;
    monte_carlo_checks(cfg, samples, seed, &mut out)?;
    Ok(out)
}

fn specfun_checks(cfg: &ScenarioConfig, out: &mut Vec<Check>) -> Result<(), CliError> {
    out.push(Check::new("gamma(5) = 24", rel(gamma(5.0)?, 24.0), 1e-12));
    out.push(Check::new(
        "gamma(0.5) = sqrt(pi)",
        rel(gamma(0.5)?, PI.sqrt()),
        1e-12,
    ));
    out.push(Check::new(
        "K_0.5(1) = sqrt(pi/2)/e",
        rel(bessel_k(0.5, 1.0)?, (PI / 2.0).sqrt() * (-1.0f64).exp()),
        1e-8,
    ));
    let tp = cfg.turbulence;
    let nu = tp.alpha - tp.beta_gg;
    let x = 2.0 * (tp.alpha * tp.beta_gg).sqrt();
    out.push(Check::new(
        "K_nu(x) = K_-nu(x) at the turbulence order",
        rel(bessel_k(-nu, x)?, bessel_k(nu, x)?),
        1e-12,
    ));
    out.push(Check::new("erf(0) = 0", erf(0.0).abs(), 0.0));
    let odd = (0..=600)
        .map(|j| {
            let x = j as f64 * 0.01;
            (erf(x) + erf(-x)).abs()
        })
        .fold(0.0, f64::max);
    out.push(Check::new("erf odd on [0, 6]", odd, 1e-15));
    Ok(())
}

fn distribution_checks(cfg: &ScenarioConfig, out: &mut Vec<Check>) -> Result<(), CliError> {
    let gg = GammaGamma::new(cfg.turbulence)?;
    let tight = cfg.quad.tightened(1e-3);
    // a NaN from a failed evaluation makes the quadrature itself fail
    let mass = quad_semi_infinite(|h| gg.pdf(h).unwrap_or(f64::NAN), &tight)?;
    out.push(Check::new(
        "gamma-gamma pdf integrates to 1",
        (mass.value - 1.0).abs(),
        1e-6,
    ));
    let mean = quad_semi_infinite(|h| h * gg.pdf(h).unwrap_or(f64::NAN), &tight)?;
    out.push(Check::new(
        "gamma-gamma pdf has unit mean",
        (mean.value - 1.0).abs(),
        1e-6,
    ));

    let g = cfg.geometry;
    let s = g.offset_scale();
    let mass = quad_semi_infinite(
        |u| OffsetSq::new(s * u).map_or(f64::NAN, |off| s * offset_pdf(off, &g)),
        &tight,
    )?;
    out.push(Check::new(
        "offset pdf integrates to 1",
        (mass.value - 1.0).abs(),
        1e-9,
    ));
    let r_th = s.sqrt();
    let closed = 1.0 - (-r_th * r_th / s).exp();
    out.push(Check::new(
        "acceptance probability closed form",
        (acceptance_probability(r_th, &g) - closed).abs(),
        1e-12,
    ));
    Ok(())
}

fn holevo_checks(cfg: &ScenarioConfig, seed: u64, out: &mut Vec<Check>) -> Result<(), CliError> {
    let p = cfg.protocol;
    let g = cfg.geometry;
    let mut rng = SeededRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..HOLEVO_DRAWS {
        let r = OffsetSq::new(rng.random_range(0.0..20.0) * g.offset_scale())?;
        let a = holevo_bound_offset(r, &g, &p);
        let b = holevo_bound(eve_transmissivity(r, &g), &p)?;
        worst = worst.max((a - b).abs());
    }
    out.push(Check::new(
        format!("Holevo closed forms agree over {HOLEVO_DRAWS} offsets"),
        worst,
        1e-12,
    ));
    out.push(Check::new(
        "Holevo bound at eta_E = 0",
        holevo_bound(0.0, &p)?.abs(),
        1e-12,
    ));
    out.push(Check::new(
        "Holevo bound at eta_E = 1",
        (holevo_bound(1.0, &p)? - 0.5 * (p.v_mod + 1.0).ln() / LN_2).abs(),
        1e-12,
    ));
    Ok(())
}

fn monte_carlo_checks(
    cfg: &ScenarioConfig,
    samples: usize,
    seed: u64,
    out: &mut Vec<Check>,
) -> Result<(), CliError> {
    let scenario = cfg.scenario();
    let model = scenario.model()?;
    let mc_cfg = McConfig::new(samples, seed).with_strands(MC_STRANDS);
    let spread = cfg.geometry.offset_scale().sqrt();
    for (label, r_th) in [
        ("r_th = 1 sigma_r", spread),
        ("r_th = 3 sigma_r", 3.0 * spread),
    ] {
        let q = model.thresholded_key_rate(r_th, &cfg.quad)?;
        let mc = model.mc_reference(r_th, &mc_cfg)?;
        out.push(Check::new(
            format!("quadrature vs Monte Carlo I_bar ({label}), |z|"),
            (q.i_bar - mc.i_bar).abs() / mc.stderr_i,
            3.0,
        ));
        out.push(Check::new(
            format!("quadrature vs Monte Carlo K_bar ({label}), |z|"),
            (q.k_bar - mc.k_bar).abs() / mc.stderr_k,
            3.0,
        ));
    }

    let p = cfg.protocol;
    let eta = (p.eta_sys * Footprint::new(&cfg.geometry).a0).min(0.99);
    let analytic = 0.5 * (eta * p.v_mod / ((1.0 - eta) + p.excess_noise)).ln_1p() / LN_2;
    let est = simulate_homodyne(eta, &p, samples, seed)?;
    out.push(Check::new(
        format!("homodyne MI estimate at eta_B = {eta:.4}, relative"),
        rel(est, analytic),
        0.02,
    ));
    Ok(())
}
