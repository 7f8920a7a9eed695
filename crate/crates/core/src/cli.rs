//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 runtime failure.
//! Diagnostics go to standard error; results go to files.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::Config;
use crate::error::Error;
use crate::model::{self, ModelParams, RunSample};
use crate::sim::{self, TerrainShape};
use crate::terrain::{self, Channel};

pub const THREADS_ENV: &str = "REGOLITH_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "regolith",
    version,
    about = "Regression-driven rover terramechanics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write telemetry, error statistics and terrain grids.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit model coefficients from run-log CSVs.
    Fit {
        /// Glob matching run-log CSV files.
        #[arg(long)]
        data: String,
        #[arg(long, value_enum)]
        kind: FitKind,
        #[arg(long)]
        out: PathBuf,
        /// Effective wheel radius used to turn encoder rates into slip, m.
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        /// Reference load for the sinkage fit, N.
        #[arg(long, default_value_t = 8.72)]
        f_ref: f64,
        /// Parameter file supplying the coefficients not being fitted.
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Steady-state slip and sinkage over a grid of speeds and slopes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        v_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alpha_list: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario and export one terrain channel as an ESRI ASCII grid.
    ExportDem {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "rendered")]
        channel: Channel,
        /// Also write `<out>_mask.asc` marking ruts deeper than this, mm.
        #[arg(long)]
        threshold_mm: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitKind {
    #[value(name = "slip_flat")]
    SlipFlat,
    #[value(name = "slip_slope")]
    SlipSlope,
    #[value(name = "sinkage")]
    Sinkage,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: i32,
    error: Error,
}

impl Failure {
    fn input(error: Error) -> Self {
        Self { code: 1, error }
    }

    fn runtime(error: Error) -> Self {
        Self { code: 2, error }
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the chosen command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run { config, out_dir } => cmd_run(&config, &out_dir),
        Command::Fit {
            data,
            kind,
            out,
            radius,
            f_ref,
            base,
        } => cmd_fit(&data, kind, &out, radius, f_ref, base.as_deref()),
        Command::Sweep {
            config,
            v_list,
            alpha_list,
            out,
        } => cmd_sweep(&config, &v_list, &alpha_list, &out, threads_from_env()),
        Command::ExportDem {
            config,
            channel,
            threshold_mm,
            out,
        } => cmd_export_dem(&config, channel, threshold_mm, &out),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.error);
            f.code
        }
    }
}

/// Worker cap for sweeps from `REGOLITH_THREADS`, else the machine's parallelism.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    std::fs::write(path, contents).map_err(|e| Failure::runtime(Error::io(path, e)))
}

/// Loads and validates a config, including that any heightmap it names parses.
fn load_config(path: &Path) -> Result<Config, Failure> {
    let cfg = Config::load(path).map_err(Failure::input)?;
    if let TerrainShape::Heightmap { path: hm } = &cfg.terrain.shape {
        terrain::read_asc(hm).map_err(|e| {
            Failure::input(Error::config("terrain.shape.heightmap.path", e.to_string()))
        })?;
    }
    Ok(cfg)
}

fn cmd_run(config: &Path, out_dir: &Path) -> CmdResult {
    let cfg = load_config(config)?;
    let sc = cfg.scenario();
    let (records, world) = sim::simulate(&sc).map_err(Failure::runtime)?;

    std::fs::create_dir_all(out_dir).map_err(|e| Failure::runtime(Error::io(out_dir, e)))?;
    write_file(
        &out_dir.join("telemetry.csv"),
        &sim::telemetry_csv(&records),
    )?;

    let errors = match sim::error_report(&records, &sc.models, sc.dt(), sc.sim.settle_s) {
        Ok(stats) => serde_json::to_string_pretty(&stats).expect("stats serialize"),
        Err(e) => {
            eprintln!("warning: {e}");
            serde_json::json!({ "error": e.to_string() }).to_string()
        }
    };
    write_file(&out_dir.join("errors.json"), &(errors + "\n"))?;

    for &ch in &cfg.output.dem_channels {
        let path = out_dir.join(format!("dem_{}.asc", ch.name()));
        terrain::write_asc(&world.terrain, ch, &path).map_err(Failure::runtime)?;
    }
    if let Some(th) = cfg.output.threshold_mm {
        terrain::write_mask(&world.terrain, th, &out_dir.join("dem_mask.asc"))
            .map_err(Failure::runtime)?;
    }
    eprintln!(
        "wrote {} telemetry rows to {}",
        records.len(),
        out_dir.join("telemetry.csv").display()
    );
    Ok(())
}

fn load_runs(pattern: &str) -> Result<Vec<Vec<RunSample>>, Failure> {
    let paths = glob::glob(pattern)
        .map_err(|e| Failure::input(Error::config("--data", e.to_string())))?
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::input(Error::config("--data", e.to_string())))?;
    if paths.is_empty() {
        return Err(Failure::input(Error::config(
            "--data",
            format!("no files match `{pattern}`"),
        )));
    }
    paths
        .iter()
        .map(|p| model::read_run_log(p).map_err(Failure::input))
        .collect()
}

fn cmd_fit(
    pattern: &str,
    kind: FitKind,
    out: &Path,
    radius: f64,
    f_ref: f64,
    base: Option<&Path>,
) -> CmdResult {
    let mut params = match base {
        Some(p) => ModelParams::load(p).map_err(Failure::input)?,
        None => ModelParams::default(),
    };
    let runs = load_runs(pattern)?;
    let mut rows: Vec<(RunSample, f64)> = Vec::new();
    for run in &runs {
        let slips = model::slip_from_run(run, radius).map_err(Failure::input)?;
        rows.extend(run.iter().copied().zip(slips.into_iter().map(|(_, s)| s)));
    }

    let residual = match kind {
        FitKind::SlipFlat => {
            let pairs: Vec<(f64, f64)> = rows.iter().map(|(r, s)| (r.omega * radius, *s)).collect();
            let fit = model::fit_slip_flat(&pairs).map_err(Failure::input)?;
            params.slip.a_v = fit.params.a_v;
            params.slip.b_v = fit.params.b_v;
            eprintln!("a_v = {:.6e}", fit.params.a_v);
            eprintln!("b_v = {:.6e}", fit.params.b_v);
            fit.residual_rms
        }
        FitKind::SlipSlope => {
            let triples: Vec<(f64, f64, f64)> = rows
                .iter()
                .map(|(r, s)| (r.omega * radius, r.alpha, *s))
                .collect();
            let fit = model::fit_slip_slope(&triples).map_err(Failure::input)?;
            // Keep the configured clamp; the fit only owns the four coefficients.
            params.slip = model::SlipModelParams {
                s_max: params.slip.s_max,
                ..fit.params
            };
            for (name, v) in [
                ("a_v", fit.params.a_v),
                ("b_v", fit.params.b_v),
                ("a_alpha", fit.params.a_alpha),
                ("b_alpha", fit.params.b_alpha),
            ] {
                eprintln!("{name} = {v:.6e}");
            }
            fit.residual_rms
        }
        FitKind::Sinkage => {
            let triples: Vec<(f64, f64, f64)> = rows
                .iter()
                .filter_map(|(r, s)| Some((*s, r.f_z?, r.z?)))
                .collect();
            let fit = model::fit_sinkage(&triples, f_ref).map_err(Failure::input)?;
            params.sinkage = fit.params;
            for (name, v) in [
                ("c_s", fit.params.c_s),
                ("c_F", fit.params.c_f),
                ("c_0", fit.params.c_0),
                ("F_ref", fit.params.f_ref),
            ] {
                eprintln!("{name} = {v:.6e}");
            }
            fit.residual_rms
        }
    };
    eprintln!("residual_rms = {residual:.6e}");
    params.validate("").map_err(Failure::input)?;
    params.save(out).map_err(Failure::runtime)
}

fn cmd_sweep(
    config: &Path,
    v_list: &[f64],
    alpha_list: &[f64],
    out: &Path,
    threads: usize,
) -> CmdResult {
    let cfg = load_config(config)?;
    let rows = sim::sweep(&cfg.scenario(), v_list, alpha_list, threads).map_err(|e| match e {
        Error::Domain(_) => Failure::input(e),
        other => Failure::runtime(other),
    })?;
    write_file(out, &sim::sweep_csv(&rows))?;
    eprintln!("wrote {} sweep rows to {}", rows.len(), out.display());
    Ok(())
}

fn mask_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "dem".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_mask.asc"))
}

fn cmd_export_dem(
    config: &Path,
    channel: Channel,
    threshold_mm: Option<f64>,
    out: &Path,
) -> CmdResult {
    let cfg = load_config(config)?;
    if !cfg.terrain.deformation {
        return Err(Failure::input(Error::config(
            "terrain.deformation",
            "must be true to export deformation",
        )));
    }
    if let Some(t) = threshold_mm {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Failure::input(Error::config(
                "--threshold-mm",
                "must be non-negative",
            )));
        }
    }
    let (_, world) = sim::simulate(&cfg.scenario()).map_err(Failure::runtime)?;
    terrain::write_asc(&world.terrain, channel, out).map_err(Failure::runtime)?;
    if let Some(t) = threshold_mm {
        let mask = mask_path(out);
        terrain::write_mask(&world.terrain, t, &mask).map_err(Failure::runtime)?;
        eprintln!("wrote mask {}", mask.display());
    }
    Ok(())
}

/// Entry points for embedding and tests; each returns a process exit code.
pub mod commands {
    use super::*;

    fn code(r: CmdResult) -> i32 {
        match r {
            Ok(()) => 0,
            Err(f) => {
                eprintln!("error: {}", f.error);
                f.code
            }
        }
    }

    pub fn run(config: &Path, out_dir: &Path) -> i32 {
        code(cmd_run(config, out_dir))
    }

    pub fn fit(pattern: &str, kind: FitKind, out: &Path, radius: f64, f_ref: f64) -> i32 {
        code(cmd_fit(pattern, kind, out, radius, f_ref, None))
    }

    pub fn sweep(
        config: &Path,
        v_list: &[f64],
        alpha_list: &[f64],
        out: &Path,
        threads: usize,
    ) -> i32 {
        code(cmd_sweep(config, v_list, alpha_list, out, threads))
    }

    pub fn export_dem(
        config: &Path,
        channel: Channel,
        threshold_mm: Option<f64>,
        out: &Path,
    ) -> i32 {
        code(cmd_export_dem(config, channel, threshold_mm, out))
    }
}
