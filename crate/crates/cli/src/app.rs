use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use safezone_core::averaging::monte_carlo::MC_MIN_SAMPLES;
use safezone_core::averaging::McConfig;
use safezone_core::sweep::{
    default_rth_grid, find_optimum, linear_grid, log_grid, sweep_surface, sweep_threshold,
    SweepSpec, WaistAxis, DEFAULT_RTH_POINTS, DEFAULT_RTH_RANGE, DEFAULT_WAIST_POINTS,
    DEFAULT_WAIST_RANGE,
};
use safezone_core::Error;

use crate::checks::{run_checks, MC_STRANDS};
use crate::config::{load_config, ScenarioConfig};
use crate::report::{
    write_json, write_surface_csv, write_sweep_csv, McSummary, PointReport, SurfaceSummary,
};
use crate::CliError;

/// Safe-zone CV-QKD free-space link: averaged key rates, sweeps and checks.
///
/// Exit status: 0 success, 1 I/O, 2 usage, 3 config parse, 4 invalid
/// parameters, 5 numerical failure, 6 failed checks.
#[derive(Parser)]
#[command(name = "safezone", version)]
pub struct Cli {
    /// TOML scenario file; defaults are used for anything omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Average max(K, 0) instead of the signed key rate.
    #[arg(long, global = true)]
    clamped_k: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Averaged metrics at a single threshold, as JSON.
    Point {
        /// Acceptance threshold (m, or µrad with --theta-units).
        r_th: f64,
        #[arg(long)]
        theta_units: bool,
        /// Also run a Monte Carlo cross-check with this many samples.
        #[arg(long, value_name = "N")]
        mc_samples: Option<usize>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// K̄ and Ī over a threshold grid, as CSV.
    Sweep {
        #[command(flatten)]
        grid: ThresholdGrid,
        /// Add Monte Carlo columns computed with this many samples per row.
        #[arg(long, value_name = "N")]
        mc_samples: Option<usize>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// K̄ over a (beam radius, threshold) grid: long-format CSV plus a JSON
    /// summary with the optimum.
    Surface {
        #[command(flatten)]
        grid: ThresholdGrid,
        #[arg(long, default_value_t = DEFAULT_WAIST_RANGE.0, value_name = "M")]
        w_min: f64,
        #[arg(long, default_value_t = DEFAULT_WAIST_RANGE.1, value_name = "M")]
        w_max: f64,
        #[arg(long, default_value_t = DEFAULT_WAIST_POINTS, value_name = "N")]
        w_points: usize,
        /// Which beam size the w grid describes.
        #[arg(long, value_enum, default_value_t = WaistKind::Receiver)]
        waist_axis: WaistKind,
        /// Golden-section refinement around the grid optimum.
        #[arg(long)]
        refine: bool,
        /// CSV path; the summary goes next to it with a .json extension.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Explicit summary path.
        #[arg(long, value_name = "PATH")]
        summary: Option<PathBuf>,
    },
    /// Run the self-check battery and print each check's margin.
    Validate {
        #[arg(long, default_value_t = 1_000_000, value_name = "N")]
        mc_samples: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WaistKind {
    /// Beam radius w(Z_L) at the receiver, imposed directly.
    Receiver,
    /// Transmitter waist w₀, propagated to the receiver.
    Transmitter,
}

#[derive(Args)]
struct ThresholdGrid {
    /// Explicit comma-separated thresholds.
    #[arg(long, value_delimiter = ',', value_name = "LIST", conflicts_with_all = ["r_th_min", "r_th_max", "r_th_points"])]
    r_th: Option<Vec<f64>>,
    #[arg(long, value_name = "X")]
    r_th_min: Option<f64>,
    #[arg(long, value_name = "X")]
    r_th_max: Option<f64>,
    /// Number of log-spaced thresholds.
    #[arg(long, value_name = "N")]
    r_th_points: Option<usize>,
    /// Thresholds given on the command line are angles in µrad
    /// (r_th = Z_L·θ_th).
    #[arg(long)]
    theta_units: bool,
}

impl ThresholdGrid {
    fn resolve(&self, z_link: f64) -> Vec<f64> {
        let scale = if self.theta_units { z_link * 1e-6 } else { 1.0 };
        if let Some(list) = &self.r_th {
            return list.iter().map(|v| v * scale).collect();
        }
        if self.r_th_min.is_none() && self.r_th_max.is_none() && self.r_th_points.is_none() {
            return default_rth_grid();
        }
        let lo = self.r_th_min.map_or(DEFAULT_RTH_RANGE.0, |v| v * scale);
        let hi = self.r_th_max.map_or(DEFAULT_RTH_RANGE.1, |v| v * scale);
        log_grid(lo, hi, self.r_th_points.unwrap_or(DEFAULT_RTH_POINTS))
    }
}

fn open_out<'a>(
    path: Option<&Path>,
    stdout: &'a mut dyn Write,
) -> Result<Box<dyn Write + 'a>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            CliError::Io {
                path: p.display().to_string(),
                source: e,
            }
        })?)),
        None => Box::new(stdout),
    })
}

fn check_mc_samples(n: usize) -> Result<(), CliError> {
    if n < MC_MIN_SAMPLES {
        return Err(Error::SampleSize {
            got: n,
            min: MC_MIN_SAMPLES,
        }
        .into());
    }
    Ok(())
}

/// Executes a parsed command line. Anything that would go to standard
/// output is written to `stdout`; the surface summary falls back to stderr
/// when no path is given.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg: ScenarioConfig = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.clamped_k {
        cfg.flags.clamped_k = true;
    }
    let scenario = cfg.scenario();

    match cli.command {
        Command::Point {
            r_th,
            theta_units,
            mc_samples,
            out,
        } => {
            let r_th = if theta_units {
                r_th * cfg.geometry.z_link * 1e-6
            } else {
                r_th
            };
            if let Some(n) = mc_samples {
                check_mc_samples(n)?;
            }
            let model = scenario.model()?;
            let p = model.thresholded_key_rate(r_th, &cfg.quad)?;
            let mc = match mc_samples {
                Some(n) => {
                    let m = model
                        .mc_reference(r_th, &McConfig::new(n, cfg.seed).with_strands(MC_STRANDS))?;
                    Some(McSummary::new(&m, cfg.seed))
                }
                None => None,
            };
            write_json(open_out(out.as_deref(), stdout)?, &PointReport::new(&cfg, &p, mc))
        }
        Command::Sweep {
            grid,
            mc_samples,
            out,
        } => {
            let mut spec = SweepSpec::threshold(scenario, grid.resolve(cfg.geometry.z_link));
            if let Some(n) = mc_samples {
                check_mc_samples(n)?;
                spec.mc_check = Some(McConfig::new(n, cfg.seed).with_strands(MC_STRANDS));
            }
            let result = sweep_threshold(&spec)?;
            write_sweep_csv(open_out(out.as_deref(), stdout)?, &result)
        }
        Command::Surface {
            grid,
            w_min,
            w_max,
            w_points,
            waist_axis,
            refine,
            out,
            summary,
        } => {
            if w_points == 0 {
                return Err(CliError::Usage("--w-points must be at least 1".into()));
            }
            let ws = linear_grid(w_min, w_max, w_points);
            let (axis, axis_name) = match waist_axis {
                WaistKind::Receiver => (WaistAxis::ReceiverBeamRadius(ws), "receiver_beam_radius"),
                WaistKind::Transmitter => (WaistAxis::TransmitterWaist(ws), "transmitter_waist"),
            };
            let spec = SweepSpec::surface(scenario, axis, grid.resolve(cfg.geometry.z_link));
            let surface = sweep_surface(&spec)?;
            let refined = if refine && surface.optimum.is_some() {
                Some(find_optimum(&surface, true)?)
            } else {
                None
            };
            if surface.flat {
                eprintln!("warning: K̄ maximum is shared by more than 10% of the grid cells");
            }
            write_surface_csv(open_out(out.as_deref(), stdout)?, &surface)?;
            let report = SurfaceSummary::new(&cfg, &surface, axis_name, refined.as_ref());
            match summary.or_else(|| out.map(|p| p.with_extension("json"))) {
                Some(p) => write_json(open_out(Some(&p), stdout)?, &report)?,
                None => write_json(io::stderr().lock(), &report)?,
            }
            match surface.failed_cells() {
                0 => Ok(()),
                failed => Err(CliError::FailedCells {
                    failed,
                    total: surface.cells.len(),
                }),
            }
        }
        Command::Validate { mc_samples } => {
            let checks = run_checks(&cfg, mc_samples, cfg.seed)?;
            let io_err = |e: io::Error| CliError::Output(e.to_string());
            for c in &checks {
                writeln!(
                    stdout,
                    "{}  {:<58} error {:.3e}  tol {:.1e}  margin {:+.3e}",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.name,
                    c.error,
                    c.tolerance,
                    c.margin()
                )
                .map_err(io_err)?;
            }
            let failed = checks.iter().filter(|c| !c.passed()).count();
            writeln!(
                stdout,
                "{} of {} checks passed",
                checks.len() - failed,
                checks.len()
            )
            .map_err(io_err)?;
            if failed > 0 {
                return Err(CliError::ChecksFailed {
                    failed,
                    total: checks.len(),
                });
            }
            Ok(())
        }
    }
}
