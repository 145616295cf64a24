//! Turbulence- and threshold-averaged metrics.
//!
//! For a squared pointing offset r the turbulence average is
//!
//! ```text
//! I(r) = ∫₀^∞ f_h(h) · I_AB(η_B(r, h)) dh
//! K(r) = β·I(r) − χ_AE(η_E(r))
//! ```
//!
//! and the threshold averages are the truncated expectations
//!
//! ```text
//! Ī(r_th) = (1/s) ∫₀^{r_th²} I(r) e^{−r/s} dr,   s = 2·Z_L²·σ_θ²
//! ```
//!
//! (likewise for K̄). No renormalization by the acceptance probability is
//! applied. The outer integral is evaluated in the variable
//! v = 1 − e^{−r/s}, which turns it into ∫₀^P I(r(v)) dv with P the
//! acceptance probability, so the range is always bounded.

pub mod monte_carlo;
pub mod quad;

use serde::{Deserialize, Serialize};

use crate::channel::{
    acceptance_probability, clamp_bob, Footprint, GammaGamma, LinkGeometry, OffsetSq,
    TurbulenceParams, MAX_TRANSMISSIVITY,
};
use crate::error::{Error, Result};
use crate::security::{holevo_from_safe_fraction, mutual_information_raw, ProtocolParams};

pub use monte_carlo::{mc_reference, McConfig, McEstimate};
pub use quad::{quad_finite, quad_semi_infinite, Estimate, QuadConfig};

/// Inner (turbulence) integrals run this much tighter than the outer one.
pub const INNER_TOLERANCE_FACTOR: f64 = 0.1;

/// Survival probability at which the diagnostic truncated h-integral stops.
pub const DIAGNOSTIC_TAIL_MASS: f64 = 1e-9;

/// How K(r) enters K̄.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyRateMode {
    /// Integrate K(r) with its sign.
    #[default]
    Signed,
    /// Integrate max(K(r), 0).
    Clamped,
}

impl KeyRateMode {
    #[inline]
    fn apply(self, k: f64) -> f64 {
        match self {
            KeyRateMode::Signed => k,
            KeyRateMode::Clamped => k.max(0.0),
        }
    }
}

/// Threshold-averaged metrics at one acceptance threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedPoint {
    /// Acceptance threshold r_th (m).
    pub r_th: f64,
    pub i_bar: f64,
    pub k_bar: f64,
    pub accept_prob: f64,
    /// Combined outer and inner quadrature error estimate (bits).
    pub err_est: f64,
}

/// A fully specified link ready for averaging. Construction validates the
/// inputs and precomputes everything that does not depend on r or h.
#[derive(Debug, Clone, Copy)]
pub struct LinkModel {
    geometry: LinkGeometry,
    protocol: ProtocolParams,
    footprint: Footprint,
    turbulence: GammaGamma,
    mode: KeyRateMode,
}

impl LinkModel {
    pub fn new(
        geometry: &LinkGeometry,
        turbulence: &TurbulenceParams,
        protocol: &ProtocolParams,
    ) -> Result<Self> {
        geometry.validate()?;
        protocol.validate()?;
        Ok(Self {
            geometry: *geometry,
            protocol: *protocol,
            footprint: Footprint::new(geometry),
            turbulence: GammaGamma::new(*turbulence)?,
            mode: KeyRateMode::Signed,
        })
    }

    pub fn with_mode(mut self, mode: KeyRateMode) -> Self {
        self.mode = mode;
        self
    }

    /// Replaces the receiver-plane beam radius.
    pub fn with_beam_radius(mut self, w: f64) -> Result<Self> {
        self.geometry.beam_radius_override = Some(w);
        self.geometry.validate()?;
        self.footprint = Footprint::with_beam_radius(&self.geometry, w);
        Ok(self)
    }

    pub fn geometry(&self) -> &LinkGeometry {
        &self.geometry
    }

    pub fn protocol(&self) -> &ProtocolParams {
        &self.protocol
    }

    pub fn footprint(&self) -> &Footprint {
        &self.footprint
    }

    pub fn turbulence(&self) -> &GammaGamma {
        &self.turbulence
    }

    pub fn mode(&self) -> KeyRateMode {
        self.mode
    }

    /// η_sys·A₀·e^{−2r/w²}: Bob's transmissivity per unit turbulence gain.
    pub fn bob_prefactor(&self, off: OffsetSq) -> f64 {
        self.protocol.eta_sys * self.footprint.pointing(off)
    }

    /// χ_AE(r).
    pub fn holevo(&self, off: OffsetSq) -> f64 {
        holevo_from_safe_fraction(self.footprint.safe(off), self.protocol.v_mod)
    }

    fn point_mi(&self, eta: f64) -> f64 {
        mutual_information_raw(eta, self.protocol.v_mod, self.protocol.excess_noise)
    }

    /// ∫ f_h(h)·I_AB(clamp(c·h)) dh over (0, ∞) in the mapped variable
    /// t = h/(1 + h). Breakpoints sit at the mean gain and at the clamp onset.
    fn mi_for_prefactor(&self, c: f64, cfg: &QuadConfig) -> Result<Estimate> {
        if c <= 0.0 {
            return Ok(Estimate {
                value: 0.0,
                err_est: 0.0,
            });
        }
        let mut breaks = vec![0.0, 0.5, 1.0];
        let t_clamp = quad::semi_infinite_unmap(0.0, 1.0 / c);
        if t_clamp > 0.0 && t_clamp < 1.0 && t_clamp != 0.5 {
            breaks.push(t_clamp);
            breaks.sort_by(f64::total_cmp);
        }
        quad::integrate(
            |t| {
                let (h, jac) = quad::semi_infinite_map(0.0, t);
                if !h.is_finite() {
                    return Ok(0.0);
                }
                let pdf = self.turbulence.pdf(h)?;
                if pdf == 0.0 {
                    return Ok(0.0);
                }
                Ok(pdf * jac * self.point_mi(clamp_bob(c * h).eta))
            },
            &breaks,
            cfg,
        )
    }

    /// Turbulence-averaged mutual information I(r).
    pub fn turbulence_averaged_mi(&self, off: OffsetSq, cfg: &QuadConfig) -> Result<Estimate> {
        self.mi_for_prefactor(self.bob_prefactor(off), cfg)
    }

    /// Diagnostic form of I(r): integrates h over [0, h_q] with h_q the
    /// Gamma-Gamma quantile of survival [`DIAGNOSTIC_TAIL_MASS`], adding the
    /// clamped tail contribution analytically when h_q is past the clamp onset.
    pub fn turbulence_averaged_mi_truncated(
        &self,
        off: OffsetSq,
        cfg: &QuadConfig,
    ) -> Result<Estimate> {
        let c = self.bob_prefactor(off);
        let h_q = self.gg_quantile(1.0 - DIAGNOSTIC_TAIL_MASS, cfg)?;
        let integrand = |h: f64| -> Result<f64> {
            if h <= 0.0 {
                return Ok(0.0);
            }
            Ok(self.turbulence.pdf(h)? * self.point_mi(clamp_bob(c * h).eta))
        };
        let h_clamp = if c > 0.0 { 1.0 / c } else { f64::INFINITY };
        let mut breaks = vec![0.0];
        if h_clamp < h_q {
            breaks.push(h_clamp);
        }
        if h_q > 1.0 && h_clamp != 1.0 {
            breaks.push(1.0);
        }
        breaks.push(h_q);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        quad::integrate(integrand, &breaks, cfg)
    }

    /// Gamma-Gamma CDF at h via quadrature of the density.
    pub fn gg_cdf(&self, h: f64, cfg: &QuadConfig) -> Result<f64> {
        if h <= 0.0 {
            return Ok(0.0);
        }
        let mut breaks = vec![0.0, h];
        if h > 1.0 {
            breaks.insert(1, 1.0);
        }
        let head = quad::integrate(
            |x| self.turbulence.pdf(x.max(f64::MIN_POSITIVE)),
            &breaks,
            cfg,
        )?;
        Ok(head.value.min(1.0))
    }

    /// Inverse CDF by bisection on the quadrature CDF, working with the upper
    /// tail so probabilities close to one stay resolvable.
    pub fn gg_quantile(&self, p: f64, cfg: &QuadConfig) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain {
                func: "gg_quantile",
                value: p,
                domain: "0 < p < 1",
            });
        }
        let tail = 1.0 - p;
        let survival = |h: f64| -> Result<f64> {
            let est = quad::integrate(
                |t| {
                    let (x, jac) = quad::semi_infinite_map(h, t);
                    if !x.is_finite() {
                        return Ok(0.0);
                    }
                    Ok(self.turbulence.pdf(x)? * jac)
                },
                &[0.0, 0.5, 1.0],
                cfg,
            )?;
            Ok(est.value)
        };
        let mut lo = 0.0;
        let mut hi = 1.0;
        while survival(hi)? > tail {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::NoConvergence {
                    func: "gg_quantile",
                    limit: 40,
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if survival(mid)? > tail {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Conditional key rate K(r) = β·I(r) − χ_AE(r), signed.
    pub fn conditional_key_rate(&self, off: OffsetSq, cfg: &QuadConfig) -> Result<Estimate> {
        let i = self.turbulence_averaged_mi(off, cfg)?;
        Ok(Estimate {
            value: self.protocol.recon_eff * i.value - self.holevo(off),
            err_est: self.protocol.recon_eff * i.err_est,
        })
    }

    fn offset_from_acceptance(&self, v: f64) -> OffsetSq {
        // r = −s·ln(1 − v)
        let r = -self.geometry.offset_scale() * (-v).ln_1p();
        OffsetSq::new(r.max(0.0)).unwrap_or(OffsetSq::ZERO)
    }

    fn check_threshold(r_th: f64) -> Result<()> {
        if r_th > 0.0 {
            Ok(())
        } else {
            Err(Error::Domain {
                func: "thresholded average",
                value: r_th,
                domain: "r_th > 0",
            })
        }
    }

    /// Ī(r_th). `r_th = f64::INFINITY` gives the untruncated expectation.
    pub fn thresholded_mi(&self, r_th: f64, cfg: &QuadConfig) -> Result<Estimate> {
        Self::check_threshold(r_th)?;
        let p = acceptance_probability(r_th, &self.geometry);
        if p <= 0.0 {
            return Ok(Estimate {
                value: 0.0,
                err_est: 0.0,
            });
        }
        let inner_cfg = cfg.tightened(INNER_TOLERANCE_FACTOR);
        let mut inner_err: f64 = 0.0;
        let outer = quad::integrate(
            |v| {
                let i = self.turbulence_averaged_mi(self.offset_from_acceptance(v), &inner_cfg)?;
                inner_err = inner_err.max(i.err_est);
                Ok(i.value)
            },
            &[0.0, p],
            cfg,
        )?;
        Ok(Estimate {
            value: outer.value,
            err_est: outer.err_est + p * inner_err,
        })
    }

    /// Ī(r_th) and K̄(r_th) from one joint outer integration.
    pub fn thresholded_key_rate(&self, r_th: f64, cfg: &QuadConfig) -> Result<AveragedPoint> {
        Self::check_threshold(r_th)?;
        let p = acceptance_probability(r_th, &self.geometry);
        if p <= 0.0 {
            return Ok(AveragedPoint {
                r_th,
                i_bar: 0.0,
                k_bar: 0.0,
                accept_prob: 0.0,
                err_est: 0.0,
            });
        }
        let inner_cfg = cfg.tightened(INNER_TOLERANCE_FACTOR);
        let beta = self.protocol.recon_eff;
        let mut inner_err: f64 = 0.0;
        let [i_est, k_est] = quad::integrate_vec(
            |v| {
                let off = self.offset_from_acceptance(v);
                let i = self.turbulence_averaged_mi(off, &inner_cfg)?;
                inner_err = inner_err.max(i.err_est);
                let k = beta * i.value - self.holevo(off);
                Ok([i.value, self.mode.apply(k)])
            },
            &[0.0, p],
            cfg,
        )?;
        Ok(AveragedPoint {
            r_th,
            i_bar: i_est.value,
            k_bar: k_est.value,
            accept_prob: p,
            err_est: i_est.err_est.max(k_est.err_est) + p * inner_err,
        })
    }
}

/// I(r) for one offset.
pub fn turbulence_averaged_mi(
    off: OffsetSq,
    geom: &LinkGeometry,
    tp: &TurbulenceParams,
    proto: &ProtocolParams,
    cfg: &QuadConfig,
) -> Result<f64> {
    Ok(LinkModel::new(geom, tp, proto)?
        .turbulence_averaged_mi(off, cfg)?
        .value)
}

/// K(r) for one offset.
pub fn conditional_key_rate(
    off: OffsetSq,
    geom: &LinkGeometry,
    tp: &TurbulenceParams,
    proto: &ProtocolParams,
    cfg: &QuadConfig,
) -> Result<f64> {
    Ok(LinkModel::new(geom, tp, proto)?
        .conditional_key_rate(off, cfg)?
        .value)
}

/// Ī(r_th) with `r_th` in meters.
pub fn thresholded_mi(
    r_th: f64,
    geom: &LinkGeometry,
    tp: &TurbulenceParams,
    proto: &ProtocolParams,
    cfg: &QuadConfig,
) -> Result<Estimate> {
    LinkModel::new(geom, tp, proto)?.thresholded_mi(r_th, cfg)
}

/// Ī(r_th) and K̄(r_th) with `r_th` in meters.
pub fn thresholded_key_rate(
    r_th: f64,
    geom: &LinkGeometry,
    tp: &TurbulenceParams,
    proto: &ProtocolParams,
    cfg: &QuadConfig,
) -> Result<AveragedPoint> {
    LinkModel::new(geom, tp, proto)?.thresholded_key_rate(r_th, cfg)
}

/// Largest possible I_AB, reached once η_B is clamped.
pub fn saturated_mi(proto: &ProtocolParams) -> f64 {
    mutual_information_raw(MAX_TRANSMISSIVITY, proto.v_mod, proto.excess_noise)
}
