//! Command-line front end for the tweezer pulse toolkit.
//!
//! Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure,
//! 4 sweep completed with failed cells.

mod config;

use clap::{Args, Parser, Subcommand};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use config::{parse_seeds, FileConfig};
use tweezer::dynamics::{evolve, infidelity, quadrature_trajectory, DynamicsError, System};
use tweezer::experiments::{self, csv, ProtocolFamily};
use tweezer::pepr::{optimize, OptimizerHyperparams, PeprError};
use tweezer::protocols::{
    self, check_constraints, normalized_impulse, normalized_impulse_quad, pulse_area,
    rabi_protocol, recoil_compensated_protocol, write_time_series, ControlProtocol,
    SineModeProtocol,
};

const EXIT_CONFIG: i32 = 2;
const EXIT_NUMERICS: i32 = 3;
const EXIT_PARTIAL: i32 = 4;

#[derive(Parser)]
#[command(name = "tweezer", version, about = "Recoil-free pulse engineering for tweezer atoms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Size of the local worker pool (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Seeds, e.g. "3", "1,4,9", or "1..8"; overrides the config.
    #[arg(long)]
    seeds: Option<String>,
    /// Paper-scale iteration count (n_it = 1e5) instead of desk-scale.
    #[arg(long)]
    full_scale: bool,
    /// Emit CSV summaries alongside the record files.
    #[arg(long)]
    emit_csv: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate one protocol and report infidelity and observables.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Protocol file (sine-mode JSON).
        #[arg(long, conflicts_with = "builtin")]
        protocol: Option<PathBuf>,
        /// Builtin protocol: "rabi" or "recoil-compensated".
        #[arg(long)]
        builtin: Option<String>,
        /// Write the sampled control series (t, |Ω|, arg Ω, f_tw) as CSV.
        #[arg(long)]
        series_csv: Option<PathBuf>,
        /// Write the quadrature trajectory as CSV.
        #[arg(long)]
        quadrature_csv: Option<PathBuf>,
    },
    /// Run a PEPR optimization ensemble and store trajectories.
    Optimize(CommonArgs),
    /// Regime sweep over (Ω_max, t_f Ω_max).
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Continue into a directory with existing cell records.
        #[arg(long)]
        resume: bool,
    },
    /// Dissipation comparison at fixed pulse area 3.5π.
    Dissipation {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        resume: bool,
    },
    /// Stroboscopic heating sequence.
    Strobo {
        #[command(flatten)]
        common: CommonArgs,
        /// Repetition count n (records after each (2n-1)-th pulse).
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Phase-space comparison of constant vs recoil-compensated force.
    PhaseSpace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learning-rate calibration scan; writes the lookup table.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project the first-order compensating force from a Rabi protocol.
    ProjectForce {
        #[arg(long)]
        config: PathBuf,
        /// Sine-mode protocol JSON providing |Ω(t)|.
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(workers).build_global()
        {
            eprintln!("error: cannot size worker pool: {e}");
            std::process::exit(EXIT_CONFIG);
        }
    }
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            classify(&e)
        }
    };
    std::process::exit(code);
}

/// Map an error chain onto the exit-code contract.
fn classify(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if cause.is::<DynamicsError>() {
            return EXIT_NUMERICS;
        }
        if let Some(p) = cause.downcast_ref::<PeprError>() {
            return match p {
                PeprError::Config(_) | PeprError::InvalidHyperparams(_) => EXIT_CONFIG,
                _ => EXIT_NUMERICS,
            };
        }
        if let Some(x) = cause.downcast_ref::<experiments::ExperimentError>() {
            return match x {
                experiments::ExperimentError::Dynamics(_) => EXIT_NUMERICS,
                experiments::ExperimentError::Pepr(PeprError::Config(_)) => EXIT_CONFIG,
                experiments::ExperimentError::Pepr(_) => EXIT_NUMERICS,
                _ => EXIT_CONFIG,
            };
        }
    }
    EXIT_CONFIG
}

#[derive(serde::Serialize)]
struct Provenance<'a> {
    tool: &'a str,
    version: &'a str,
    command: String,
    config: &'a FileConfig,
    seeds: &'a [u64],
}

fn write_provenance(
    out: &Path,
    command: &str,
    config: &FileConfig,
    seeds: &[u64],
) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    let record = Provenance {
        tool: "tweezer",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        config,
        seeds,
    };
    let file = std::fs::File::create(out.join("provenance.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &record)?;
    Ok(())
}

fn resolve_seeds(common: &CommonArgs, from_config: Option<Vec<u64>>) -> anyhow::Result<Vec<u64>> {
    if let Some(text) = &common.seeds {
        return parse_seeds(text);
    }
    Ok(from_config.unwrap_or_else(|| (1..=8).collect()))
}

fn run(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::Simulate { config, protocol, builtin, series_csv, quadrature_csv } => {
            cmd_simulate(&config, protocol.as_deref(), builtin.as_deref(), series_csv, quadrature_csv)
        }
        Command::Optimize(common) => cmd_optimize(&common),
        Command::Sweep { common, resume } => cmd_sweep(&common, resume),
        Command::Dissipation { common, resume } => cmd_dissipation(&common, resume),
        Command::Strobo { common, reps } => cmd_strobo(&common, reps),
        Command::PhaseSpace { config, out } => cmd_phase_space(&config, &out),
        Command::Calibrate { config, out } => cmd_calibrate(&config, &out),
        Command::ProjectForce { config, protocol, out } => {
            cmd_project_force(&config, &protocol, &out)
        }
    }
}

enum LoadedProtocol {
    Sine(SineModeProtocol),
    Compensated(protocols::RecoilCompensatedProtocol),
}

impl LoadedProtocol {
    fn duration(&self) -> f64 {
        match self {
            LoadedProtocol::Sine(p) => p.t_f,
            LoadedProtocol::Compensated(p) => p.t_f,
        }
    }
}

fn cmd_simulate(
    config_path: &Path,
    protocol_path: Option<&Path>,
    builtin: Option<&str>,
    series_csv: Option<PathBuf>,
    quadrature_csv: Option<PathBuf>,
) -> anyhow::Result<i32> {
    let file = FileConfig::load(config_path)?;
    let model = file.model()?;
    let settings = file.propagation();
    let sys = System::new(&model)?;

    let loaded = match (protocol_path, builtin) {
        (Some(path), None) => LoadedProtocol::Sine(SineModeProtocol::load(path)?),
        (None, Some("rabi")) => LoadedProtocol::Sine(rabi_protocol(model.omega_max)),
        (None, Some("recoil-compensated")) => {
            LoadedProtocol::Compensated(recoil_compensated_protocol(&model))
        }
        (None, Some(other)) => {
            anyhow::bail!("unknown builtin '{other}' (expected rabi or recoil-compensated)")
        }
        (None, None) => anyhow::bail!("one of --protocol or --builtin is required"),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };

    if let LoadedProtocol::Sine(p) = &loaded {
        let report = check_constraints(p, &model);
        if !report.ok() {
            eprintln!(
                "warning: protocol violates constraints (worst |Ω| = {:.4e}, \
                 worst |df/dt| = {:.4e})",
                report.worst_amplitude, report.worst_velocity
            );
        }
    }

    let t_f = loaded.duration();
    let rho0 = sys.initial_state();
    let (rho, area, impulse) = match &loaded {
        LoadedProtocol::Sine(p) => (
            evolve(&sys, p, &rho0, 0.0, t_f, &settings)?,
            pulse_area(p),
            normalized_impulse(p),
        ),
        LoadedProtocol::Compensated(p) => (
            evolve(&sys, p, &rho0, 0.0, t_f, &settings)?,
            pulse_area(p),
            normalized_impulse_quad(p),
        ),
    };
    let err = infidelity(&rho, &sys.target_state());
    println!("infidelity = {err:.11e}");
    println!("pulse_area_over_pi = {:.11e}", area / PI);
    println!("normalized_impulse = {impulse:.11e}");
    let populations = tweezer::dynamics::motional_populations(&rho);
    let pops: Vec<String> = populations.iter().map(|p| format!("{p:.6e}")).collect();
    println!("motional_populations = [{}]", pops.join(", "));

    if let Some(path) = series_csv {
        let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
        match &loaded {
            LoadedProtocol::Sine(p) => write_time_series(p, 400, &mut out)?,
            LoadedProtocol::Compensated(p) => write_time_series(p, 400, &mut out)?,
        }
    }
    if let Some(path) = quadrature_csv {
        let traj = match &loaded {
            LoadedProtocol::Sine(p) => quadrature_trajectory(&sys, p, &rho0, &settings)?,
            LoadedProtocol::Compensated(p) => quadrature_trajectory(&sys, p, &rho0, &settings)?,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
        use std::io::Write;
        writeln!(out, "t,position_quadrature,momentum_quadrature")?;
        for (t, x, p) in traj {
            writeln!(out, "{t:.11e},{x:.11e},{p:.11e}")?;
        }
    }
    Ok(0)
}

fn cmd_optimize(common: &CommonArgs) -> anyhow::Result<i32> {
    let file = FileConfig::load(&common.config)?;
    let model = file.model()?;
    let settings = file.propagation();
    let area = file
        .optimizer
        .as_ref()
        .and_then(|o| o.tf_pulse_area_over_pi)
        .ok_or_else(|| {
            anyhow::anyhow!("optimize requires [optimizer].tf_pulse_area_over_pi in the config")
        })?;
    let t_f = area * PI / model.omega_max;
    let mut hyper = file.hyperparams(Some(t_f))?;
    if common.full_scale {
        hyper.n_it = 100_000;
    }
    let seeds = resolve_seeds(common, file.optimizer.as_ref().and_then(|o| o.seed.map(|s| vec![s])))?;
    write_provenance(&common.out, "optimize", &file, &seeds)?;

    use rayon::prelude::*;
    let trajectories: Vec<_> = seeds
        .par_iter()
        .map(|&seed| {
            let hyper = OptimizerHyperparams { seed, ..hyper.clone() };
            optimize(&model, t_f, &hyper, &settings)
        })
        .collect::<Result<Vec<_>, _>>()?;

    for traj in &trajectories {
        let path = common.out.join(format!("trajectory_seed{}.json", traj.seed));
        let out = std::fs::File::create(&path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(out), traj)?;
    }
    let best = trajectories
        .iter()
        .min_by(|a, b| a.best_infidelity.total_cmp(&b.best_infidelity))
        .expect("nonempty ensemble");
    best.best_protocol.save(&common.out.join("best_protocol.json"))?;
    println!("best_infidelity = {:.11e} (seed {})", best.best_infidelity, best.seed);
    println!(
        "best_impulse = {:.11e}",
        normalized_impulse(&best.best_protocol)
    );
    Ok(0)
}

fn guard_resume(out: &Path, resume: bool) -> anyhow::Result<()> {
    if resume || !out.exists() {
        return Ok(());
    }
    let has_cells = std::fs::read_dir(out)?
        .filter_map(Result::ok)
        .any(|e| e.file_name().to_string_lossy().starts_with("cell_"));
    anyhow::ensure!(
        !has_cells,
        "{} already holds cell records; pass --resume to continue into it",
        out.display()
    );
    Ok(())
}

fn cmd_sweep(common: &CommonArgs, resume: bool) -> anyhow::Result<i32> {
    let file = FileConfig::load(&common.config)?;
    let model = file.model()?;
    let settings = file.propagation();
    let mut hyper = file.hyperparams(None)?;
    if common.full_scale {
        hyper.n_it = 100_000;
    }
    let sweep = file.sweep.clone().unwrap_or(config::SweepSection {
        omega_max_values: None,
        tf_pulse_area_values: None,
        seeds: None,
    });
    let default_grid = experiments::SweepGridSpec::default_desk();
    let grid = experiments::SweepGridSpec {
        omega_max_values: sweep.omega_max_values.unwrap_or(default_grid.omega_max_values),
        tf_pulse_area_values: sweep
            .tf_pulse_area_values
            .unwrap_or(default_grid.tf_pulse_area_values),
    };
    let seeds = resolve_seeds(common, sweep.seeds)?;
    guard_resume(&common.out, resume)?;
    write_provenance(&common.out, "sweep", &file, &seeds)?;

    let outcome =
        experiments::regime_sweep(&model, &grid, &hyper, &seeds, &settings, &common.out)?;
    println!(
        "sweep: {} cells done ({} resumed), {} failed",
        outcome.records.len(),
        outcome.skipped,
        outcome.failures.len()
    );
    if common.emit_csv {
        csv::write_sweep_grid(&outcome.records, &common.out.join("sweep_grid.csv"))?;
        let map = experiments::impulse_map(&outcome.records, model.eta);
        csv::write_impulse_map(
            &map,
            &common.out.join("impulse_map.csv"),
            &common.out.join("impulse_slice.csv"),
        )?;
        csv::write_lab_time(
            &experiments::lab_time_view(&outcome.records),
            &common.out.join("lab_time.csv"),
        )?;
    }
    Ok(if outcome.failures.is_empty() { 0 } else { EXIT_PARTIAL })
}

fn cmd_dissipation(common: &CommonArgs, resume: bool) -> anyhow::Result<i32> {
    let file = FileConfig::load(&common.config)?;
    let model = file.model()?;
    let settings = file.propagation();
    let mut hyper = file.hyperparams(None)?;
    if common.full_scale {
        hyper.n_it = 100_000;
    }
    let section = file
        .dissipation
        .clone()
        .ok_or_else(|| anyhow::anyhow!("dissipation requires a [dissipation] config section"))?;
    let seeds = resolve_seeds(common, section.seeds.clone())?;
    guard_resume(&common.out, resume)?;
    write_provenance(&common.out, "dissipation", &file, &seeds)?;

    let outcome = experiments::dissipation_sweep(
        &model,
        &section.omega_max_values,
        &section.gamma_z_values,
        &hyper,
        &seeds,
        &settings,
        &common.out,
    )?;
    println!(
        "dissipation: {} cells done ({} resumed), {} failed",
        outcome.records.len(),
        outcome.skipped,
        outcome.failures.len()
    );
    if common.emit_csv {
        csv::write_dissipation_lines(&outcome.records, &common.out.join("dissipation.csv"))?;
    }
    Ok(if outcome.failures.is_empty() { 0 } else { EXIT_PARTIAL })
}

fn cmd_strobo(common: &CommonArgs, reps: Option<usize>) -> anyhow::Result<i32> {
    let file = FileConfig::load(&common.config)?;
    let model = file.model()?;
    let settings = file.propagation();
    let section = file.strobo.clone();
    let n_reps = reps
        .or(section.as_ref().and_then(|s| s.n_reps))
        .unwrap_or(500);
    let family_name = section
        .as_ref()
        .and_then(|s| s.family.clone())
        .unwrap_or_else(|| "both".into());
    let families: Vec<ProtocolFamily> = match family_name.as_str() {
        "rabi" => vec![ProtocolFamily::Rabi],
        "recoil-compensated" => vec![ProtocolFamily::RecoilCompensated],
        "both" => vec![ProtocolFamily::Rabi, ProtocolFamily::RecoilCompensated],
        other => anyhow::bail!("unknown strobo family '{other}'"),
    };
    write_provenance(&common.out, "strobo", &file, &[])?;

    let mut all = Vec::new();
    for family in families {
        let series = experiments::strobo_run(&model, family, n_reps, &settings)?;
        let worst =
            series.iter().map(|r| r.infidelity).fold(0.0_f64, f64::max);
        println!(
            "{family:?}: {} records, 1-F(1) = {:.4e}, max 1-F(n) = {:.4e}",
            series.len(),
            series.first().map(|r| r.infidelity).unwrap_or(f64::NAN),
            worst
        );
        all.extend(series);
    }
    csv::write_strobo_series(&all, &common.out.join("strobo.csv"))?;
    Ok(0)
}

fn cmd_phase_space(config_path: &Path, out: &Path) -> anyhow::Result<i32> {
    let file = FileConfig::load(config_path)?;
    let model = file.model()?;
    let settings = file.propagation();
    write_provenance(out, "phase-space", &file, &[])?;
    let study = experiments::phase_space_study(&model, &settings)?;
    csv::write_phase_space(&study, &out.join("phase_space.csv"))?;
    println!("displacement_ratio = {:.6e}", study.displacement_ratio);
    println!("momentum_ratio = {:.6e}", study.momentum_ratio);
    Ok(0)
}

fn cmd_calibrate(config_path: &Path, out: &Path) -> anyhow::Result<i32> {
    let file = FileConfig::load(config_path)?;
    let model = file.model()?;
    let settings = file.propagation();
    let section = file
        .calibrate
        .clone()
        .ok_or_else(|| anyhow::anyhow!("calibrate requires a [calibrate] config section"))?;
    let seeds = section.seeds.clone().unwrap_or_else(|| vec![1]);
    write_provenance(out, "calibrate", &file, &seeds)?;
    let table = experiments::calibrate_learning_rates(
        &model,
        &section.omega_max_values,
        &seeds,
        section.scan_n_it.unwrap_or(2000),
        &settings,
    );
    table.save(&out.join("learning_rates.json"))?;
    println!("calibrated {} entries", table.entries.len());
    Ok(0)
}

fn cmd_project_force(config_path: &Path, protocol_path: &Path, out: &Path) -> anyhow::Result<i32> {
    let file = FileConfig::load(config_path)?;
    let model = file.model()?;
    let protocol = SineModeProtocol::load(protocol_path)?;
    std::fs::create_dir_all(out)?;
    write_provenance(out, "project-force", &file, &[])?;

    let grid = 4096;
    let h: Vec<f64> = (0..=grid)
        .map(|i| protocol.controls_at(protocol.t_f * i as f64 / grid as f64).rabi_abs())
        .collect();
    let theta_f = protocols::projected_force(&h, model.eta, protocol.t_f, protocol.n_f().max(3))?;
    let projected = SineModeProtocol::new(
        protocol.t_f,
        protocol.theta_x.clone(),
        protocol.theta_y.clone(),
        theta_f.clone(),
    )?;
    projected.save(&out.join("projected_protocol.json"))?;
    let mut series = std::io::BufWriter::new(std::fs::File::create(out.join("projected_force.csv"))?);
    write_time_series(&projected, 400, &mut series)?;
    let coeffs: Vec<String> = theta_f.iter().map(|v| format!("{v:.11e}")).collect();
    println!("theta_f = [{}]", coeffs.join(", "));
    Ok(0)
}
