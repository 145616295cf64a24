//! Monte Carlo reference for the threshold averages.
//!
//! Pointing offsets and turbulence gains are drawn jointly, the point-wise
//! metrics are evaluated directly (no quadrature anywhere on this path) and
//! the indicator-weighted sums are averaged. Work is split over `strands`
//! independent streams seeded with `seed + strand_index`; the result is a
//! deterministic function of (seed, strands, samples).

use rand::SeedableRng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LinkModel;
use crate::channel::{offset_sample, LinkGeometry, SeededRng, TurbulenceParams};
use crate::error::{Error, Result};
use crate::security::ProtocolParams;

pub const MC_MIN_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub strands: usize,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            strands: 1,
        }
    }

    pub fn with_strands(mut self, strands: usize) -> Self {
        self.strands = strands.max(1);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub i_bar: f64,
    pub k_bar: f64,
    pub stderr_i: f64,
    pub stderr_k: f64,
    /// Fraction of all draws whose η_B had to be clamped below one.
    pub clamp_fraction: f64,
    pub samples: usize,
    pub strands: usize,
}

#[derive(Debug, Default, Clone, Copy)]
struct Sums {
    i: f64,
    ii: f64,
    k: f64,
    kk: f64,
    clamped: u64,
}

impl Sums {
    fn merge(mut self, o: Sums) -> Sums {
        self.i += o.i;
        self.ii += o.ii;
        self.k += o.k;
        self.kk += o.kk;
        self.clamped += o.clamped;
        self
    }
}

impl LinkModel {
    /// Monte Carlo estimate of (Ī, K̄) at threshold `r_th` (m).
    pub fn mc_reference(&self, r_th: f64, mc: &McConfig) -> Result<McEstimate> {
        if mc.samples < MC_MIN_SAMPLES {
            return Err(Error::SampleSize {
                got: mc.samples,
                min: MC_MIN_SAMPLES,
            });
        }
        if !(r_th > 0.0) {
            return Err(Error::Domain {
                func: "mc_reference",
                value: r_th,
                domain: "r_th > 0",
            });
        }
        let strands = mc.strands.max(1);
        let r_max = r_th * r_th;
        let beta = self.protocol().recon_eff;
        let sampler = self.turbulence().sampler();
        let geometry = *self.geometry();

        let per_strand = |index: usize| -> Sums {
            let count = mc.samples / strands + usize::from(index < mc.samples % strands);
            let mut rng = SeededRng::seed_from_u64(mc.seed.wrapping_add(index as u64));
            let mut s = Sums::default();
            for _ in 0..count {
                let off = offset_sample(&geometry, &mut rng);
                let h = sampler.sample(&mut rng);
                if off.value() > r_max {
                    continue;
                }
                let bob = crate::channel::clamp_bob(self.bob_prefactor(off) * h);
                let i = self.point_mi(bob.eta);
                let k = self.mode().apply(beta * i - self.holevo(off));
                s.i += i;
                s.ii += i * i;
                s.k += k;
                s.kk += k * k;
                s.clamped += u64::from(bob.clamped);
            }
            s
        };

        // collect in strand order so the floating-point sum is reproducible
        let parts: Vec<Sums> = (0..strands).into_par_iter().map(per_strand).collect();
        let total = parts.into_iter().fold(Sums::default(), Sums::merge);

        let n = mc.samples as f64;
        let i_bar = total.i / n;
        let k_bar = total.k / n;
        let var_i = (total.ii / n - i_bar * i_bar).max(0.0);
        let var_k = (total.kk / n - k_bar * k_bar).max(0.0);
        Ok(McEstimate {
            i_bar,
            k_bar,
            stderr_i: (var_i / (n - 1.0)).sqrt(),
            stderr_k: (var_k / (n - 1.0)).sqrt(),
            clamp_fraction: total.clamped as f64 / n,
            samples: mc.samples,
            strands,
        })
    }
}

/// Monte Carlo reference for Ī and K̄ on a single strand.
pub fn mc_reference(
    r_th: f64,
    geom: &LinkGeometry,
    tp: &TurbulenceParams,
    proto: &ProtocolParams,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    LinkModel::new(geom, tp, proto)?.mc_reference(r_th, &McConfig::new(n, seed))
}
