//! TOML scenario configuration.
//!
//! ```toml
//! seed = 7
//!
//! [geometry]
//! z_link = 500.0
//! aperture_radius = 0.05
//!
//! [turbulence]
//! alpha = 4.2
//!
//! [flags]
//! clamped_k = true
//! ```
//!
//! Every section and key is optional; omitted values take the defaults of
//! the core types. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use safezone_core::averaging::{KeyRateMode, QuadConfig};
use safezone_core::channel::{LinkGeometry, TurbulenceParams};
use safezone_core::security::ProtocolParams;
use safezone_core::sweep::Scenario;

use crate::CliError;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    /// Integrate max(K, 0) instead of the signed conditional key rate.
    pub clamped_k: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: LinkGeometry,
    pub turbulence: TurbulenceParams,
    pub protocol: ProtocolParams,
    pub quad: QuadConfig,
    pub seed: u64,
    pub flags: Flags,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            geometry: LinkGeometry::default(),
            turbulence: TurbulenceParams::default(),
            protocol: ProtocolParams::default(),
            quad: QuadConfig::default(),
            seed: DEFAULT_SEED,
            flags: Flags::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario().validate().map_err(CliError::Core)
    }

    pub fn mode(&self) -> KeyRateMode {
        if self.flags.clamped_k {
            KeyRateMode::Clamped
        } else {
            KeyRateMode::Signed
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            geometry: self.geometry,
            turbulence: self.turbulence,
            protocol: self.protocol,
            quad: self.quad,
            mode: self.mode(),
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, CliError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io {
                path: p.display().to_string(),
                source: e,
            })?;
            parse_config(&text)
        }
        None => parse_config(""),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.protocol.eta_sys, 0.8);
        assert_eq!(cfg.geometry.aperture_radius, 0.05);
        assert_eq!(cfg.geometry.safe_radius, 0.15);
        assert_eq!(cfg.protocol.v_mod, 5.0);
        assert_eq!(cfg.protocol.excess_noise, 0.1);
        assert_eq!(cfg.protocol.recon_eff, 0.95);
        assert_eq!(cfg.geometry.jitter_sigma, 50e-6);
        assert_eq!(cfg.geometry.wavelength, 1550e-9);
        assert_eq!((cfg.turbulence.alpha, cfg.turbulence.beta_gg), (4.2, 1.4));
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = parse_config("seed = 3\n[geometry]\nz_link = 800.0\n[flags]\nclamped_k = true\n")
            .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.geometry.z_link, 800.0);
        assert_eq!(cfg.geometry.aperture_radius, 0.05);
        assert_eq!(cfg.mode(), KeyRateMode::Clamped);
    }

    #[test]
    fn negative_jitter_is_rejected() {
        let e = parse_config("[geometry]\njitter_sigma = -1.0\n").unwrap_err();
        assert!(matches!(e, CliError::Core(_)), "{e}");
    }

    #[test]
    fn guard_ring_violation_is_named() {
        let e = parse_config("[geometry]\nsafe_radius = 0.01\n").unwrap_err();
        assert!(e.to_string().contains("guard ring"), "{e}");
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config("[protocol]\nv_mdo = 5.0\n").unwrap_err();
        assert!(matches!(e, CliError::Config(_)));
        assert!(e.to_string().contains("v_mdo"), "{e}");
        let e = parse_config("[extras]\n").unwrap_err();
        assert!(e.to_string().contains("extras"), "{e}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let e = parse_config("[geometry]\nz_link = = 3\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }
}
