//! Point-wise security metrics for Gaussian-modulated coherent states with
//! homodyne detection and reverse reconciliation.
//!
//! All variances are in shot-noise units and all information quantities in
//! bits per channel use.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{Footprint, LinkGeometry, OffsetSq, SeededRng};
use crate::error::{Error, Result};

/// Minimum sample count accepted by [`simulate_homodyne`].
pub const HOMODYNE_MIN_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// Modulation variance V_m (SNU).
    pub v_mod: f64,
    /// Excess noise ξ referred to the channel input (SNU).
    pub excess_noise: f64,
    /// Reconciliation efficiency.
    pub recon_eff: f64,
    /// Deterministic system transmittance η_sys.
    pub eta_sys: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            v_mod: 5.0,
            excess_noise: 0.1,
            recon_eff: 0.95,
            eta_sys: 0.8,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_mod.is_finite() && self.v_mod > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "protocol.v_mod must be > 0 (got {})",
                self.v_mod
            )));
        }
        if !(self.excess_noise.is_finite() && self.excess_noise >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "protocol.excess_noise must be >= 0 (got {})",
                self.excess_noise
            )));
        }
        if !(self.recon_eff > 0.0 && self.recon_eff <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "protocol.recon_eff must lie in (0, 1] (got {})",
                self.recon_eff
            )));
        }
        if !(self.eta_sys > 0.0 && self.eta_sys <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "protocol.eta_sys must lie in (0, 1] (got {})",
                self.eta_sys
            )));
        }
        Ok(())
    }
}

/// (I_AB, χ_AE, K) at one channel condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityPoint {
    pub i_ab: f64,
    pub chi_ae: f64,
    pub key_rate: f64,
}

impl SecurityPoint {
    pub fn evaluate(eta_b: f64, eta_e: f64, proto: &ProtocolParams) -> Result<Self> {
        let i_ab = mutual_information(eta_b, proto)?;
        let chi_ae = holevo_bound(eta_e, proto)?;
        Ok(Self {
            i_ab,
            chi_ae,
            key_rate: secret_key_rate(i_ab, chi_ae, proto.recon_eff),
        })
    }
}

fn check_unit(func: &'static str, eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::Domain {
            func,
            value: eta,
            domain: "0 <= eta <= 1",
        })
    }
}

/// σ_B² = (1 − η_B) + ξ.
pub fn bob_noise_variance(eta_b: f64, proto: &ProtocolParams) -> Result<f64> {
    check_unit("bob_noise_variance", eta_b)?;
    let var = (1.0 - eta_b) + proto.excess_noise;
    if var <= 0.0 {
        return Err(Error::Degenerate(
            "Bob's noise variance is zero (eta_b = 1 with no excess noise)".into(),
        ));
    }
    Ok(var)
}

/// I_AB = ½·log₂(1 + η_B·V_m/σ_B²).
pub fn mutual_information(eta_b: f64, proto: &ProtocolParams) -> Result<f64> {
    let var = bob_noise_variance(eta_b, proto)?;
    Ok(0.5 * (eta_b * proto.v_mod / var).ln_1p() / std::f64::consts::LN_2)
}

/// Unchecked form for integrands; `eta_b` must already lie in [0, 1).
#[inline]
pub(crate) fn mutual_information_raw(eta_b: f64, v_mod: f64, excess_noise: f64) -> f64 {
    0.5 * (eta_b * v_mod / ((1.0 - eta_b) + excess_noise)).ln_1p() / std::f64::consts::LN_2
}

/// Holevo bound for a pure-loss channel of transmissivity η_E:
/// χ_AE = ½·log₂((V_m + 1) / (1 + (1 − η_E)·V_m/(1 + η_E))).
pub fn holevo_bound(eta_e: f64, proto: &ProtocolParams) -> Result<f64> {
    check_unit("holevo_bound", eta_e)?;
    let v = proto.v_mod;
    let denom = 1.0 + (1.0 - eta_e) * v / (1.0 + eta_e);
    Ok(0.5 * ((v + 1.0) / denom).log2().max(0.0))
}

/// Same bound written in terms of the safe-zone fraction s = A_safe·e^{−2r/w²}:
/// χ_AE = ½·log₂((V_m + 1) / (1 + s·V_m/(2 − s))).
#[inline]
pub(crate) fn holevo_from_safe_fraction(safe: f64, v_mod: f64) -> f64 {
    let denom = 1.0 + safe * v_mod / (2.0 - safe);
    0.5 * ((v_mod + 1.0) / denom).log2().max(0.0)
}

/// χ_AE as a function of the squared pointing offset.
pub fn holevo_bound_offset(off: OffsetSq, geom: &LinkGeometry, proto: &ProtocolParams) -> f64 {
    holevo_from_safe_fraction(Footprint::new(geom).safe(off), proto.v_mod)
}

/// K = β·I_AB − χ_AE. Negative values are returned as they are.
pub fn secret_key_rate(i_ab: f64, chi_ae: f64, recon_eff: f64) -> f64 {
    recon_eff * i_ab - chi_ae
}

/// Monte Carlo homodyne experiment. Alice draws q ~ N(0, V_m); Bob records
/// y = √η_B·q + n_B with n_B ~ N(0, σ_B²). The vacuum part of the input
/// quadrature is carried inside n_B so that the conditional variance
/// Var(y | q) equals σ_B².
///
/// The returned estimate is ½·log₂(Var(y) / Var(y | q)), with the
/// conditional variance taken from the least-squares residual of y on q.
pub fn simulate_homodyne(eta_b: f64, proto: &ProtocolParams, n: usize, seed: u64) -> Result<f64> {
    if n < HOMODYNE_MIN_SAMPLES {
        return Err(Error::SampleSize {
            got: n,
            min: HOMODYNE_MIN_SAMPLES,
        });
    }
    let noise_sd = bob_noise_variance(eta_b, proto)?.sqrt();
    let gain = eta_b.sqrt();
    let mod_sd = proto.v_mod.sqrt();
    let mut rng = SeededRng::seed_from_u64(seed);

    let (mut sq, mut sy, mut sqq, mut syy, mut sqy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..n {
        let q: f64 = mod_sd * rng.sample::<f64, _>(StandardNormal);
        let y = gain * q + noise_sd * rng.sample::<f64, _>(StandardNormal);
        sq += q;
        sy += y;
        sqq += q * q;
        syy += y * y;
        sqy += q * y;
    }
    let nf = n as f64;
    let var_q = sqq / nf - (sq / nf).powi(2);
    let var_y = syy / nf - (sy / nf).powi(2);
    let cov = sqy / nf - (sq / nf) * (sy / nf);
    let residual = var_y - cov * cov / var_q;
    Ok(0.5 * (var_y / residual).log2())
}
