//! Optical channel: Gaussian-beam footprint at the receiver, pointing-error
//! statistics, Gamma-Gamma turbulence and the safe-zone power split that
//! yields Bob's and Eve's transmissivities.
//!
//! Units are SI throughout: lengths in meters, angles in radians, and the
//! squared radial offset `r = r_e²` in m².

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun;

/// Seeded random source used by every sampler in the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Largest `f64` strictly below one; clamped transmissivities land here.
pub const MAX_TRANSMISSIVITY: f64 = 1.0 - f64::EPSILON / 2.0;

/// Physical layout of the link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkGeometry {
    /// Link length Z_L (m).
    pub z_link: f64,
    /// Receiver lens radius r_a (m).
    pub aperture_radius: f64,
    /// Safe-zone radius r_safe, lens plus absorbing guard ring (m).
    pub safe_radius: f64,
    /// Transmitter beam waist w₀ (m).
    pub waist: f64,
    /// Wavelength λ (m).
    pub wavelength: f64,
    /// Per-axis angular jitter σ_θ (rad).
    pub jitter_sigma: f64,
    /// Imposed beam radius at the receiver plane (m). When set it replaces
    /// the value propagated from `waist`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beam_radius_override: Option<f64>,
}

impl Default for LinkGeometry {
    fn default() -> Self {
        Self {
            z_link: 500.0,
            aperture_radius: 0.05,
            safe_radius: 0.15,
            waist: 0.05,
            wavelength: 1550e-9,
            jitter_sigma: 50e-6,
            beam_radius_override: None,
        }
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite and > 0 (got {v})"
        )))
    }
}

impl LinkGeometry {
    pub fn validate(&self) -> Result<()> {
        require_positive("geometry.z_link", self.z_link)?;
        require_positive("geometry.aperture_radius", self.aperture_radius)?;
        require_positive("geometry.safe_radius", self.safe_radius)?;
        require_positive("geometry.waist", self.waist)?;
        require_positive("geometry.wavelength", self.wavelength)?;
        require_positive("geometry.jitter_sigma", self.jitter_sigma)?;
        if let Some(w) = self.beam_radius_override {
            require_positive("geometry.beam_radius_override", w)?;
        }
        if self.safe_radius < self.aperture_radius {
            return Err(Error::InvalidParameter(format!(
                "guard ring constraint violated: safe_radius ({}) must be >= aperture_radius ({})",
                self.safe_radius, self.aperture_radius
            )));
        }
        if self.jitter_sigma >= 1e-2 {
            return Err(Error::InvalidParameter(format!(
                "geometry.jitter_sigma ({}) must be < 1e-2 rad for the small-angle offset model",
                self.jitter_sigma
            )));
        }
        Ok(())
    }

    /// Beam radius actually used at the receiver: the override when present,
    /// otherwise [`beam_radius`].
    pub fn receiver_beam_radius(&self) -> f64 {
        self.beam_radius_override
            .unwrap_or_else(|| beam_radius(self))
    }

    /// Scale parameter 2·Z_L²·σ_θ² of the exponential offset law (m²).
    pub fn offset_scale(&self) -> f64 {
        2.0 * self.z_link * self.z_link * self.jitter_sigma * self.jitter_sigma
    }
}

/// Gamma-Gamma shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurbulenceParams {
    pub alpha: f64,
    pub beta_gg: f64,
}

impl Default for TurbulenceParams {
    fn default() -> Self {
        Self {
            alpha: 4.2,
            beta_gg: 1.4,
        }
    }
}

impl TurbulenceParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("turbulence.alpha", self.alpha)?;
        require_positive("turbulence.beta_gg", self.beta_gg)
    }
}

/// Squared radial pointing offset r = r_e² (m²).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct OffsetSq(f64);

impl OffsetSq {
    pub const ZERO: OffsetSq = OffsetSq(0.0);

    pub fn new(r: f64) -> Result<Self> {
        if r >= 0.0 {
            Ok(Self(r))
        } else {
            Err(Error::Domain {
                func: "OffsetSq::new",
                value: r,
                domain: "r >= 0",
            })
        }
    }

    /// From a radial offset r_e in meters.
    pub fn from_radius(r_e: f64) -> Result<Self> {
        Self::new(r_e * r_e)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// w(Z_L) = w₀·√(1 + (λZ_L/(πw₀²))²), ignoring any override.
pub fn beam_radius(geom: &LinkGeometry) -> f64 {
    let w0 = geom.waist;
    let ratio = geom.wavelength * geom.z_link / (PI * w0 * w0);
    w0 * ratio.hypot(1.0)
}

/// (erf(√2·radius/w))²; A₀ for the lens radius, A_safe for the safe radius.
pub fn collection_fraction(radius: f64, w: f64) -> f64 {
    let e = specfun::erf(SQRT_2 * radius / w);
    e * e
}

/// Receiver-plane quantities that do not depend on the random offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub beam_radius: f64,
    pub a0: f64,
    pub a_safe: f64,
    inv_w_sq: f64,
}

impl Footprint {
    pub fn new(geom: &LinkGeometry) -> Self {
        Self::with_beam_radius(geom, geom.receiver_beam_radius())
    }

    pub fn with_beam_radius(geom: &LinkGeometry, w: f64) -> Self {
        Self {
            beam_radius: w,
            a0: collection_fraction(geom.aperture_radius, w),
            a_safe: collection_fraction(geom.safe_radius, w),
            inv_w_sq: 1.0 / (w * w),
        }
    }

    /// Misalignment attenuation exp(−2r/w²).
    pub fn misalignment(&self, off: OffsetSq) -> f64 {
        (-2.0 * off.0 * self.inv_w_sq).exp()
    }

    pub fn pointing(&self, off: OffsetSq) -> f64 {
        self.a0 * self.misalignment(off)
    }

    pub fn safe(&self, off: OffsetSq) -> f64 {
        self.a_safe * self.misalignment(off)
    }

    pub fn eve(&self, off: OffsetSq) -> f64 {
        1.0 - self.safe(off)
    }
}

/// η_po^(B) = A₀·exp(−2r/w²).
pub fn pointing_transmissivity(off: OffsetSq, geom: &LinkGeometry) -> f64 {
    Footprint::new(geom).pointing(off)
}

/// η_safe = A_safe·exp(−2r/w²), the power landing inside the safe zone.
pub fn safe_zone_transmissivity(off: OffsetSq, geom: &LinkGeometry) -> f64 {
    Footprint::new(geom).safe(off)
}

/// η_E = 1 − η_safe. Eve is assumed free of turbulence.
pub fn eve_transmissivity(off: OffsetSq, geom: &LinkGeometry) -> f64 {
    Footprint::new(geom).eve(off)
}

/// Gamma-Gamma law with its normalization precomputed.
#[derive(Debug, Clone, Copy)]
pub struct GammaGamma {
    params: TurbulenceParams,
    ln_norm: f64,
    half_sum: f64,
    order: f64,
    two_sqrt_ab: f64,
}

impl GammaGamma {
    pub fn new(params: TurbulenceParams) -> Result<Self> {
        params.validate()?;
        let TurbulenceParams { alpha, beta_gg } = params;
        let half_sum = 0.5 * (alpha + beta_gg);
        let ln_norm = std::f64::consts::LN_2 + half_sum * (alpha * beta_gg).ln()
            - specfun::ln_gamma(alpha)?
            - specfun::ln_gamma(beta_gg)?;
        Ok(Self {
            params,
            ln_norm,
            half_sum,
            order: alpha - beta_gg,
            two_sqrt_ab: 2.0 * (alpha * beta_gg).sqrt(),
        })
    }

    pub fn params(&self) -> TurbulenceParams {
        self.params
    }

    /// Density at h > 0, evaluated in the log domain.
    pub fn pdf(&self, h: f64) -> Result<f64> {
        if !(h > 0.0) || h.is_infinite() {
            return Err(Error::Domain {
                func: "gg_pdf",
                value: h,
                domain: "0 < h < inf",
            });
        }
        let arg = self.two_sqrt_ab * h.sqrt();
        let ln_k = specfun::ln_bessel_k(self.order, arg)?;
        Ok((self.ln_norm + (self.half_sum - 1.0) * h.ln() + ln_k).exp())
    }

    /// Product of two independent unit-mean Gamma variates.
    pub fn sampler(&self) -> GammaGammaSampler {
        let TurbulenceParams { alpha, beta_gg } = self.params;
        GammaGammaSampler {
            large: Gamma::new(alpha, 1.0 / alpha).expect("validated shape"),
            small: Gamma::new(beta_gg, 1.0 / beta_gg).expect("validated shape"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GammaGammaSampler {
    large: Gamma<f64>,
    small: Gamma<f64>,
}

impl Distribution<f64> for GammaGammaSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.large.sample(rng) * self.small.sample(rng)
    }
}

/// Gamma-Gamma density f_h(h).
pub fn gg_pdf(h: f64, tp: &TurbulenceParams) -> Result<f64> {
    GammaGamma::new(*tp)?.pdf(h)
}

/// One Gamma-Gamma draw. Prefer [`GammaGamma::sampler`] inside loops.
pub fn gg_sample<R: Rng + ?Sized>(tp: &TurbulenceParams, rng: &mut R) -> Result<f64> {
    Ok(GammaGamma::new(*tp)?.sampler().sample(rng))
}

/// Density of r = r_e²: exponential with mean 2Z_L²σ_θ².
pub fn offset_pdf(off: OffsetSq, geom: &LinkGeometry) -> f64 {
    let s = geom.offset_scale();
    (-off.0 / s).exp() / s
}

/// P(r ≤ r_th²) = 1 − exp(−r_th²/(2Z_L²σ_θ²)).
pub fn acceptance_probability(r_th: f64, geom: &LinkGeometry) -> f64 {
    -(-(r_th * r_th) / geom.offset_scale()).exp_m1()
}

/// Draws θ_x, θ_y ~ N(0, σ_θ²) and returns Z_L²(θ_x² + θ_y²).
pub fn offset_sample<R: Rng + ?Sized>(geom: &LinkGeometry, rng: &mut R) -> OffsetSq {
    let tx: f64 = rng.sample::<f64, _>(StandardNormal) * geom.jitter_sigma;
    let ty: f64 = rng.sample::<f64, _>(StandardNormal) * geom.jitter_sigma;
    OffsetSq(geom.z_link * geom.z_link * (tx * tx + ty * ty))
}

/// Bob's transmissivity with a flag for tail events that had to be clamped
/// below one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BobTransmissivity {
    pub eta: f64,
    pub clamped: bool,
}

impl Footprint {
    /// η_B = η_sys·h·A₀·exp(−2r/w²), clamped into [0, 1).
    pub fn bob(&self, off: OffsetSq, h: f64, eta_sys: f64) -> BobTransmissivity {
        clamp_bob(eta_sys * h * self.pointing(off))
    }
}

pub(crate) fn clamp_bob(raw: f64) -> BobTransmissivity {
    if raw >= 1.0 {
        BobTransmissivity {
            eta: MAX_TRANSMISSIVITY,
            clamped: true,
        }
    } else {
        BobTransmissivity {
            eta: raw.max(0.0),
            clamped: false,
        }
    }
}

pub fn bob_transmissivity(
    off: OffsetSq,
    h: f64,
    geom: &LinkGeometry,
    eta_sys: f64,
) -> BobTransmissivity {
    Footprint::new(geom).bob(off, h, eta_sys)
}
