//! Plot-ready output: CSV tables and JSON reports.
//!
//! Floats in CSV are written with 17 significant digits so reruns can be
//! compared byte for byte. JSON uses shortest round-trip formatting, which
//! is equally deterministic.

use std::io::Write;

use serde::Serialize;

use safezone_core::averaging::{AveragedPoint, KeyRateMode, McEstimate};
use safezone_core::channel::Footprint;
use safezone_core::sweep::{Optimum, SurfaceResult, ThresholdSweep};

use crate::config::ScenarioConfig;
use crate::CliError;

pub const SWEEP_COLUMNS: [&str; 6] = [
    "r_th_m",
    "i_bar_bits",
    "k_bar_bits",
    "k_bar_floored_bits",
    "accept_prob",
    "err_est",
];

pub const MC_COLUMNS: [&str; 4] = [
    "mc_i_bar_bits",
    "mc_k_bar_bits",
    "mc_stderr_i_bits",
    "mc_stderr_k_bits",
];

pub const SURFACE_COLUMNS: [&str; 8] = [
    "w_m",
    "r_th_m",
    "i_bar_bits",
    "k_bar_bits",
    "k_bar_floored_bits",
    "accept_prob",
    "err_est",
    "error",
];

/// 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn point_fields(p: &AveragedPoint) -> [String; 5] {
    [
        fmt17(p.i_bar),
        fmt17(p.k_bar),
        fmt17(p.k_bar.max(0.0)),
        fmt17(p.accept_prob),
        fmt17(p.err_est),
    ]
}

pub fn write_sweep_csv<W: Write>(out: W, sweep: &ThresholdSweep) -> Result<(), CliError> {
    let mut w = csv_writer(out);
    let mut header: Vec<&str> = SWEEP_COLUMNS.to_vec();
    if sweep.mc.is_some() {
        header.extend(MC_COLUMNS);
    }
    w.write_record(&header)?;
    for (j, p) in sweep.points.iter().enumerate() {
        let mut row = vec![fmt17(p.r_th)];
        row.extend(point_fields(p));
        if let Some(mc) = &sweep.mc {
            let m = &mc[j];
            row.extend([m.i_bar, m.k_bar, m.stderr_i, m.stderr_k].map(fmt17));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))
}

pub fn write_surface_csv<W: Write>(out: W, surface: &SurfaceResult) -> Result<(), CliError> {
    let mut w = csv_writer(out);
    w.write_record(SURFACE_COLUMNS)?;
    for c in &surface.cells {
        let mut row = vec![fmt17(c.w), fmt17(c.r_th)];
        match &c.point {
            Some(p) => {
                row.extend(point_fields(p));
                row.push(String::new());
            }
            None => {
                row.extend(std::iter::repeat_n(String::new(), 5));
                row.push(c.error.clone().unwrap_or_default());
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub samples: usize,
    pub seed: u64,
    pub i_bar_bits: f64,
    pub k_bar_bits: f64,
    pub stderr_i_bits: f64,
    pub stderr_k_bits: f64,
    pub clamp_fraction: f64,
}

impl McSummary {
    pub fn new(m: &McEstimate, seed: u64) -> Self {
        Self {
            samples: m.samples,
            seed,
            i_bar_bits: m.i_bar,
            k_bar_bits: m.k_bar,
            stderr_i_bits: m.stderr_i,
            stderr_k_bits: m.stderr_k,
            clamp_fraction: m.clamp_fraction,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointReport {
    pub z_link_m: f64,
    pub r_th_m: f64,
    pub theta_th_urad: f64,
    pub beam_radius_m: f64,
    pub a0: f64,
    pub a_safe: f64,
    pub accept_prob: f64,
    pub i_bar_bits: f64,
    pub k_bar_bits: f64,
    pub k_bar_floored_bits: f64,
    pub err_est_bits: f64,
    pub key_rate_mode: KeyRateMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<McSummary>,
}

impl PointReport {
    pub fn new(cfg: &ScenarioConfig, p: &AveragedPoint, mc: Option<McSummary>) -> Self {
        let fp = Footprint::new(&cfg.geometry);
        Self {
            z_link_m: cfg.geometry.z_link,
            r_th_m: p.r_th,
            theta_th_urad: p.r_th / cfg.geometry.z_link * 1e6,
            beam_radius_m: fp.beam_radius,
            a0: fp.a0,
            a_safe: fp.a_safe,
            accept_prob: p.accept_prob,
            i_bar_bits: p.i_bar,
            k_bar_bits: p.k_bar,
            k_bar_floored_bits: p.k_bar.max(0.0),
            err_est_bits: p.err_est,
            key_rate_mode: cfg.mode(),
            monte_carlo: mc,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OptimumReport {
    pub w_m: f64,
    pub r_th_m: f64,
    pub k_bar_bits: f64,
    pub w_index: usize,
    pub r_th_index: usize,
}

impl From<&Optimum> for OptimumReport {
    fn from(o: &Optimum) -> Self {
        Self {
            w_m: o.w,
            r_th_m: o.r_th,
            k_bar_bits: o.k_bar,
            w_index: o.w_index,
            r_th_index: o.r_index,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceSummary {
    pub z_link_m: f64,
    pub aperture_radius_m: f64,
    pub waist_axis: &'static str,
    pub w_points: usize,
    pub r_th_points: usize,
    /// Grid argmax of K̄; matches the largest k_bar_bits row of the CSV.
    pub optimum: Option<OptimumReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined_optimum: Option<OptimumReport>,
    pub secure_region_fraction: f64,
    pub flat_surface: bool,
    pub failed_cells: usize,
    pub key_rate_mode: KeyRateMode,
}

impl SurfaceSummary {
    pub fn new(
        cfg: &ScenarioConfig,
        surface: &SurfaceResult,
        waist_axis: &'static str,
        refined: Option<&Optimum>,
    ) -> Self {
        Self {
            z_link_m: cfg.geometry.z_link,
            aperture_radius_m: cfg.geometry.aperture_radius,
            waist_axis,
            w_points: surface.w_grid.len(),
            r_th_points: surface.rth_grid.len(),
            optimum: surface.optimum.as_ref().map(OptimumReport::from),
            refined_optimum: refined.map(OptimumReport::from),
            secure_region_fraction: surface.secure_region_fraction,
            flat_surface: surface.flat,
            failed_cells: surface.failed_cells(),
            key_rate_mode: cfg.mode(),
        }
    }
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Output(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(r_th: f64, k: f64) -> AveragedPoint {
        AveragedPoint {
            r_th,
            i_bar: 0.5,
            k_bar: k,
            accept_prob: 0.25,
            err_est: 1e-9,
        }
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(-2.0), "-2.0000000000000000e0");
        for x in [0.1, 1.0 / 3.0, 6.02e23, -1e-300] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn sweep_csv_layout() {
        let sweep = ThresholdSweep {
            points: vec![point(0.01, -0.2), point(0.02, 0.3)],
            mc: None,
        };
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &sweep).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "r_th_m,i_bar_bits,k_bar_bits,k_bar_floored_bits,accept_prob,err_est"
        );
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first[3], fmt17(0.0));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn surface_csv_marks_failures() {
        let mut s = SurfaceResult::from_values(vec![0.05], vec![0.01, 0.02], &[0.1, 0.2]);
        s.cells[1].point = None;
        s.cells[1].error = Some("no convergence, after 500 subdivisions".into());
        let mut buf = Vec::new();
        write_surface_csv(&mut buf, &s).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(&rows[0][7], "");
        assert_eq!(&rows[1][3], "");
        assert!(rows[1][7].contains("500 subdivisions"));
    }
}
