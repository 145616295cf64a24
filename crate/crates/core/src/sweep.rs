//! Parameter studies: K̄ versus threshold, K̄ over a (beam radius,
//! threshold) surface, and location of the optimum.
//!
//! Cells are evaluated in parallel; results are always assembled in grid
//! order, so output does not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{AveragedPoint, KeyRateMode, LinkModel, McConfig, McEstimate, QuadConfig};
use crate::channel::{beam_radius, LinkGeometry, TurbulenceParams};
use crate::error::{Error, Result};
use crate::security::ProtocolParams;

/// Number of log-spaced thresholds in the default grid.
pub const DEFAULT_RTH_POINTS: usize = 60;
pub const DEFAULT_RTH_RANGE: (f64, f64) = (1e-3, 1.0);
/// Number of linearly spaced beam radii in the default grid.
pub const DEFAULT_WAIST_POINTS: usize = 40;
pub const DEFAULT_WAIST_RANGE: (f64, f64) = (0.01, 0.3);

/// An argmax tie over more than this fraction of cells is flagged as flat.
pub const FLAT_SURFACE_FRACTION: f64 = 0.1;

/// Everything needed to evaluate the averaged metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scenario {
    pub geometry: LinkGeometry,
    pub turbulence: TurbulenceParams,
    pub protocol: ProtocolParams,
    pub quad: QuadConfig,
    pub mode: KeyRateMode,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.turbulence.validate()?;
        self.protocol.validate()?;
        self.quad.validate()
    }

    pub fn model(&self) -> Result<LinkModel> {
        Ok(LinkModel::new(&self.geometry, &self.turbulence, &self.protocol)?.with_mode(self.mode))
    }

    /// Model with the receiver-plane beam radius imposed.
    pub fn model_with_beam_radius(&self, w: f64) -> Result<LinkModel> {
        self.model()?.with_beam_radius(w)
    }

    /// Averaged metrics at one cell, computed exactly as the sweeps do.
    pub fn evaluate(&self, beam_radius: Option<f64>, r_th: f64) -> Result<AveragedPoint> {
        let model = match beam_radius {
            Some(w) => self.model_with_beam_radius(w)?,
            None => self.model()?,
        };
        model.thresholded_key_rate(r_th, &self.quad)
    }
}

/// The second sweep axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaistAxis {
    /// Beam radius w(Z_L) at the receiver plane, imposed directly (m).
    ReceiverBeamRadius(Vec<f64>),
    /// Transmitter waist w₀ (m), converted through beam propagation.
    TransmitterWaist(Vec<f64>),
}

impl WaistAxis {
    /// Receiver-plane beam radii for this axis.
    pub fn beam_radii(&self, geometry: &LinkGeometry) -> Vec<f64> {
        match self {
            WaistAxis::ReceiverBeamRadius(w) => w.clone(),
            WaistAxis::TransmitterWaist(w0) => w0
                .iter()
                .map(|&waist| beam_radius(&LinkGeometry { waist, ..*geometry }))
                .collect(),
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            WaistAxis::ReceiverBeamRadius(v) | WaistAxis::TransmitterWaist(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub scenario: Scenario,
    /// Acceptance thresholds r_th (m).
    pub rth_grid: Vec<f64>,
    pub waist_grid: Option<WaistAxis>,
    /// Optional Monte Carlo cross-check at every threshold.
    pub mc_check: Option<McConfig>,
}

impl SweepSpec {
    pub fn threshold(scenario: Scenario, rth_grid: Vec<f64>) -> Self {
        Self {
            scenario,
            rth_grid,
            waist_grid: None,
            mc_check: None,
        }
    }

    pub fn surface(scenario: Scenario, waist_grid: WaistAxis, rth_grid: Vec<f64>) -> Self {
        Self {
            scenario,
            rth_grid,
            waist_grid: Some(waist_grid),
            mc_check: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        check_grid("r_th grid", &self.rth_grid)?;
        if let Some(axis) = &self.waist_grid {
            check_grid("waist grid", axis.values())?;
        }
        Ok(())
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} is empty")));
    }
    if grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "{name} values must be finite and > 0"
        )));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be strictly increasing"
        )));
    }
    Ok(())
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln();
    (0..n)
        .map(|j| {
            if j == n - 1 {
                hi
            } else {
                lo * (ratio * j as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|j| if j == n - 1 { hi } else { lo + step * j as f64 })
        .collect()
}

pub fn default_rth_grid() -> Vec<f64> {
    log_grid(DEFAULT_RTH_RANGE.0, DEFAULT_RTH_RANGE.1, DEFAULT_RTH_POINTS)
}

pub fn default_waist_grid() -> Vec<f64> {
    linear_grid(
        DEFAULT_WAIST_RANGE.0,
        DEFAULT_WAIST_RANGE.1,
        DEFAULT_WAIST_POINTS,
    )
}

/// Result of a threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSweep {
    pub points: Vec<AveragedPoint>,
    pub mc: Option<Vec<McEstimate>>,
}

impl ThresholdSweep {
    /// Index of the largest K̄ (first one on ties).
    pub fn argmax(&self) -> Option<usize> {
        argmax_first(self.points.iter().map(|p| p.k_bar))
    }
}

fn argmax_first(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in values.enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    best.map(|(j, _)| j)
}

fn grid_error(index: usize, value: f64, e: Error) -> Error {
    Error::GridPoint {
        index,
        value,
        source: Box::new(e),
    }
}

/// K̄ and Ī at every threshold of `spec.rth_grid`.
pub fn sweep_threshold(spec: &SweepSpec) -> Result<ThresholdSweep> {
    spec.validate()?;
    if spec.waist_grid.is_some() {
        return Err(Error::InvalidParameter(
            "threshold sweep does not take a waist grid; use sweep_surface".into(),
        ));
    }
    let model = spec.scenario.model()?;
    let cfg = spec.scenario.quad;
    let points = spec
        .rth_grid
        .par_iter()
        .enumerate()
        .map(|(j, &r_th)| {
            model
                .thresholded_key_rate(r_th, &cfg)
                .map_err(|e| grid_error(j, r_th, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let mc = match spec.mc_check {
        Some(mc_cfg) => Some(
            spec.rth_grid
                .iter()
                .enumerate()
                .map(|(j, &r_th)| {
                    model
                        .mc_reference(r_th, &mc_cfg)
                        .map_err(|e| grid_error(j, r_th, e))
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok(ThresholdSweep { points, mc })
}

/// One surface cell; `error` is set instead of metrics when it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    /// Receiver-plane beam radius (m).
    pub w: f64,
    pub r_th: f64,
    pub point: Option<AveragedPoint>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub w: f64,
    pub r_th: f64,
    pub k_bar: f64,
    pub w_index: usize,
    pub r_index: usize,
    /// True when the value comes from golden-section refinement rather than
    /// a grid node.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceResult {
    pub scenario: Option<Scenario>,
    pub w_grid: Vec<f64>,
    pub rth_grid: Vec<f64>,
    /// Row-major: all thresholds for `w_grid[0]`, then `w_grid[1]`, ...
    pub cells: Vec<SurfaceCell>,
    pub optimum: Option<Optimum>,
    /// Fraction of all grid cells with K̄ > 0.
    pub secure_region_fraction: f64,
    /// Set when the maximum is shared by more than 10% of the cells.
    pub flat: bool,
}

impl SurfaceResult {
    /// Builds a surface from precomputed K̄ values (row-major, `w` outer).
    pub fn from_values(w_grid: Vec<f64>, rth_grid: Vec<f64>, k_bar: &[f64]) -> Self {
        assert_eq!(k_bar.len(), w_grid.len() * rth_grid.len());
        let mut cells = Vec::with_capacity(k_bar.len());
        for (i, &w) in w_grid.iter().enumerate() {
            for (j, &r_th) in rth_grid.iter().enumerate() {
                cells.push(SurfaceCell {
                    w,
                    r_th,
                    point: Some(AveragedPoint {
                        r_th,
                        i_bar: 0.0,
                        k_bar: k_bar[i * rth_grid.len() + j],
                        accept_prob: 0.0,
                        err_est: 0.0,
                    }),
                    error: None,
                });
            }
        }
        Self::assemble(None, w_grid, rth_grid, cells)
    }

    fn assemble(
        scenario: Option<Scenario>,
        w_grid: Vec<f64>,
        rth_grid: Vec<f64>,
        cells: Vec<SurfaceCell>,
    ) -> Self {
        let mut s = Self {
            scenario,
            w_grid,
            rth_grid,
            cells,
            optimum: None,
            secure_region_fraction: 0.0,
            flat: false,
        };
        let secure = s
            .cells
            .iter()
            .filter(|c| c.point.is_some_and(|p| p.k_bar > 0.0))
            .count();
        s.secure_region_fraction = if s.cells.is_empty() {
            0.0
        } else {
            secure as f64 / s.cells.len() as f64
        };
        if let Some((opt, flat)) = grid_optimum(&s) {
            s.optimum = Some(opt);
            s.flat = flat;
        }
        s
    }

    pub fn cell(&self, w_index: usize, r_index: usize) -> &SurfaceCell {
        &self.cells[w_index * self.rth_grid.len() + r_index]
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }
}

fn grid_optimum(s: &SurfaceResult) -> Option<(Optimum, bool)> {
    let best = argmax_first(
        s.cells
            .iter()
            .map(|c| c.point.map_or(f64::NAN, |p| p.k_bar)),
    )?;
    let k_best = s.cells[best].point?.k_bar;
    let ties = s
        .cells
        .iter()
        .filter(|c| c.point.is_some_and(|p| p.k_bar == k_best))
        .count();
    let n_r = s.rth_grid.len();
    let opt = Optimum {
        w: s.cells[best].w,
        r_th: s.cells[best].r_th,
        k_bar: k_best,
        w_index: best / n_r,
        r_index: best % n_r,
        refined: false,
    };
    Some((
        opt,
        ties as f64 > FLAT_SURFACE_FRACTION * s.cells.len() as f64,
    ))
}

/// Evaluates K̄ over the (beam radius, threshold) grid. Cell failures are
/// recorded on the cell; the surface itself is always returned.
pub fn sweep_surface(spec: &SweepSpec) -> Result<SurfaceResult> {
    spec.validate()?;
    let axis = spec
        .waist_grid
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("surface sweep needs a waist grid".into()))?;
    let w_grid = axis.beam_radii(&spec.scenario.geometry);
    check_grid("receiver beam radius grid", &w_grid)?;
    let scenario = spec.scenario;
    let n_r = spec.rth_grid.len();
    let cells: Vec<SurfaceCell> = (0..w_grid.len() * n_r)
        .into_par_iter()
        .map(|idx| {
            let w = w_grid[idx / n_r];
            let r_th = spec.rth_grid[idx % n_r];
            match scenario.evaluate(Some(w), r_th) {
                Ok(p) => SurfaceCell {
                    w,
                    r_th,
                    point: Some(p),
                    error: None,
                },
                Err(e) => SurfaceCell {
                    w,
                    r_th,
                    point: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SurfaceResult::assemble(
        Some(scenario),
        w_grid,
        spec.rth_grid.clone(),
        cells,
    ))
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of `f` on [lo, hi] down to `tol`.
fn golden_max<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

fn neighbour_bracket(grid: &[f64], i: usize) -> (f64, f64, f64) {
    let lo = if i > 0 { grid[i - 1] } else { grid[i] };
    let hi = if i + 1 < grid.len() {
        grid[i + 1]
    } else {
        grid[i]
    };
    let spacing = if grid.len() > 1 {
        (hi - lo) / ((i + 1).min(grid.len() - 1) - i.saturating_sub(1)) as f64
    } else {
        0.0
    };
    (lo, hi, spacing)
}

/// Optimum with a caller-supplied evaluator for refinement.
pub fn find_optimum_with<F>(surface: &SurfaceResult, refine: Option<F>) -> Result<Optimum>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let (grid_opt, _) = grid_optimum(surface).ok_or_else(|| {
        Error::InvalidParameter("surface has no successfully evaluated cell".into())
    })?;
    let Some(eval) = refine else {
        return Ok(grid_opt);
    };
    let mut best = grid_opt;

    // threshold axis at the grid-optimal beam radius
    let (lo, hi, spacing) = neighbour_bracket(&surface.rth_grid, grid_opt.r_index);
    if hi > lo {
        let (r, k) = golden_max(|r| eval(best.w, r), lo, hi, spacing / 100.0)?;
        if k > best.k_bar {
            best = Optimum {
                r_th: r,
                k_bar: k,
                refined: true,
                ..best
            };
        }
    }
    // beam-radius axis at the (possibly refined) threshold
    let (lo, hi, spacing) = neighbour_bracket(&surface.w_grid, grid_opt.w_index);
    if hi > lo {
        let r_th = best.r_th;
        let (w, k) = golden_max(|w| eval(w, r_th), lo, hi, spacing / 100.0)?;
        if k > best.k_bar {
            best = Optimum {
                w,
                k_bar: k,
                refined: true,
                ..best
            };
        }
    }
    Ok(best)
}

/// Grid argmax of K̄, optionally refined by one golden-section pass per axis
/// around it. Refinement never returns a value below the grid maximum.
pub fn find_optimum(surface: &SurfaceResult, refine: bool) -> Result<Optimum> {
    if !refine {
        return find_optimum_with::<fn(f64, f64) -> Result<f64>>(surface, None);
    }
    let scenario = surface.scenario.ok_or_else(|| {
        Error::InvalidParameter("refinement needs the scenario the surface was built from".into())
    })?;
    find_optimum_with(
        surface,
        Some(|w: f64, r_th: f64| Ok(scenario.evaluate(Some(w), r_th)?.k_bar)),
    )
}
