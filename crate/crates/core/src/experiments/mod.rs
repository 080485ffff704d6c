//! Study drivers: the (Ω_max, t_f Ω_max) regime sweep, the dissipation
//! comparison, the normalized-impulse map, the phase-space comparison, the
//! learning-rate calibration scan, the stroboscopic heating sequence, and
//! the laboratory-time re-axis.
//!
//! Sweeps persist one record file per cell and skip cells already on disk,
//! so an interrupted sweep resumes without recomputation. Cells and
//! ensemble members are independent tasks executed on the rayon pool; each
//! cell has a single writer.

pub mod csv;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

use crate::dynamics::{
    evolve, infidelity, quadrature_trajectory, DynamicsError, PropagationSettings, System,
};
use crate::hilbert::{ConfigError, ModelConfig};
use crate::pepr::{
    optimize, trace_instability, CalibrationEntry, CalibrationTable, OptimizerHyperparams,
    PeprError, ALPHA_SCAN_GRID, FALLBACK_RATES, INSTABILITY_THRESHOLD, T_TEST_GRID_OVER_PI,
};
use crate::protocols::{
    normalized_impulse, rabi_protocol, recoil_compensated_protocol, ConstantForceRabi,
    ControlProtocol, SineModeProtocol,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("dynamics: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("optimizer: {0}")]
    Pepr(#[from] PeprError),
    #[error("empty sweep grid after filtering to 1 <= t_f omega_max/pi <= 4")]
    EmptyGrid,
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Grid of a regime sweep, in the paper's axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGridSpec {
    /// Ω_max values, units of ω₀.
    pub omega_max_values: Vec<f64>,
    /// Available pulse area t_f Ω_max, units of π.
    pub tf_pulse_area_values: Vec<f64>,
}

impl SweepGridSpec {
    /// Desk-scale default grid: Ω_max log-spaced over [1e-2, 2e2], pulse
    /// area linear over [1, 4].
    pub fn default_desk() -> Self {
        let n_omega = 13;
        let (lo, hi) = (1e-2_f64, 2e2_f64);
        let omega_max_values = (0..n_omega)
            .map(|i| {
                (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n_omega - 1) as f64).exp()
            })
            .collect();
        let tf_pulse_area_values = (0..13).map(|i| 1.0 + 0.25 * i as f64).collect();
        SweepGridSpec { omega_max_values, tf_pulse_area_values }
    }
}

/// Identifies one sweep cell (and its record file).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub omega_max: f64,
    /// t_f Ω_max in units of π.
    pub tf_pulse_area: f64,
    pub gamma_z: f64,
}

impl CellKey {
    pub fn filename(&self) -> String {
        format!(
            "cell_om{:.6e}_tf{:.6e}_gz{:.6e}.json",
            self.omega_max, self.tf_pulse_area, self.gamma_z
        )
    }
}

/// Outcome of one optimization seed within a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub best_infidelity: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub final_alpha_dr: f64,
}

/// Persisted result of one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCellRecord {
    pub key: CellKey,
    pub config: ModelConfig,
    pub hyper: OptimizerHyperparams,
    /// Transformation time of the optimized protocols, units 1/ω₀.
    pub t_f: f64,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedResult>,
    /// 1-F_0 of the plain Rabi protocol at its own π-pulse duration.
    pub baseline_rabi: f64,
    /// 1-F_f of the recoil-compensated protocol at its own duration.
    pub baseline_compensated: f64,
    pub best_seed: u64,
    /// 1-F_θ* = min over the ensemble.
    pub best_infidelity: f64,
    pub best_protocol: SineModeProtocol,
    /// Normalized impulse of the best protocol.
    pub impulse: f64,
    pub wall_seconds: f64,
}

/// A cell that failed; sweeps continue past failures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFailure {
    pub key: CellKey,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub records: Vec<SweepCellRecord>,
    pub failures: Vec<CellFailure>,
    pub skipped: usize,
}

/// Index of the record files in a sweep directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepManifest {
    pub cells: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub key: CellKey,
    pub status: String,
    pub best_infidelity: Option<f64>,
}

/// Infidelity of a protocol evolved over its full duration from |↓,0⟩.
pub fn evaluate_protocol<P: ControlProtocol>(
    sys: &System,
    protocol: &P,
    settings: &PropagationSettings,
) -> Result<f64, DynamicsError> {
    let rho = evolve(sys, protocol, &sys.initial_state(), 0.0, protocol.duration(), settings)?;
    Ok(infidelity(&rho, &sys.target_state()))
}

fn compute_cell(
    base: &ModelConfig,
    key: CellKey,
    hyper: &OptimizerHyperparams,
    seeds: &[u64],
    settings: &PropagationSettings,
) -> Result<SweepCellRecord, ExperimentError> {
    let start = Instant::now();
    let config = ModelConfig {
        omega_max: key.omega_max,
        gamma_z: key.gamma_z,
        ..base.clone()
    };
    let sys = System::new(&config)?;
    let t_f = key.tf_pulse_area * PI / key.omega_max;

    let rabi = rabi_protocol(config.omega_max);
    let baseline_rabi = evaluate_protocol(&sys, &rabi, settings)?;
    let compensated = recoil_compensated_protocol(&config);
    let baseline_compensated = evaluate_protocol(&sys, &compensated, settings)?;

    let trajectories: Vec<_> = seeds
        .par_iter()
        .map(|&seed| {
            let hyper = OptimizerHyperparams { seed, ..hyper.clone() };
            optimize(&config, t_f, &hyper, settings)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let per_seed: Vec<SeedResult> = trajectories
        .iter()
        .map(|t| SeedResult {
            seed: t.seed,
            best_infidelity: t.best_infidelity,
            accepted: t.accepted,
            rejected: t.rejected,
            final_alpha_dr: t.final_alpha_dr,
        })
        .collect();
    let best = trajectories
        .iter()
        .min_by(|a, b| a.best_infidelity.total_cmp(&b.best_infidelity))
        .expect("nonempty ensemble");

    Ok(SweepCellRecord {
        key,
        config,
        hyper: hyper.clone(),
        t_f,
        seeds: seeds.to_vec(),
        per_seed,
        baseline_rabi,
        baseline_compensated,
        best_seed: best.seed,
        best_infidelity: best.best_infidelity,
        best_protocol: best.best_protocol.clone(),
        impulse: normalized_impulse(&best.best_protocol),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn run_cells(
    base: &ModelConfig,
    keys: Vec<CellKey>,
    hyper: &OptimizerHyperparams,
    seeds: &[u64],
    settings: &PropagationSettings,
    out_dir: &Path,
) -> Result<SweepOutcome, ExperimentError> {
    if keys.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    assert!(!seeds.is_empty(), "at least one seed required");
    std::fs::create_dir_all(out_dir)?;

    enum CellOutcome {
        Done(Box<SweepCellRecord>),
        Resumed(Box<SweepCellRecord>),
        Failed(CellFailure),
    }

    let outcomes: Vec<CellOutcome> = keys
        .par_iter()
        .map(|&key| {
            let path = out_dir.join(key.filename());
            if path.exists() {
                if let Ok(record) = load_record(&path) {
                    return CellOutcome::Resumed(Box::new(record));
                }
            }
            match compute_cell(base, key, hyper, seeds, settings) {
                Ok(record) => match save_record(&path, &record) {
                    Ok(()) => CellOutcome::Done(Box::new(record)),
                    Err(e) => CellOutcome::Failed(CellFailure { key, error: e.to_string() }),
                },
                Err(e) => CellOutcome::Failed(CellFailure { key, error: e.to_string() }),
            }
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut skipped = 0;
    let mut manifest = SweepManifest { cells: Vec::new() };
    for outcome in outcomes {
        let record = match outcome {
            CellOutcome::Done(r) => r,
            CellOutcome::Resumed(r) => {
                skipped += 1;
                r
            }
            CellOutcome::Failed(f) => {
                manifest.cells.push(ManifestEntry {
                    file: f.key.filename(),
                    key: f.key,
                    status: format!("failed: {}", f.error),
                    best_infidelity: None,
                });
                failures.push(f);
                continue;
            }
        };
        manifest.cells.push(ManifestEntry {
            file: record.key.filename(),
            key: record.key,
            status: "done".into(),
            best_infidelity: Some(record.best_infidelity),
        });
        records.push(*record);
    }
    let manifest_file = std::fs::File::create(out_dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(manifest_file), &manifest)?;
    Ok(SweepOutcome { records, failures, skipped })
}

pub fn save_record(path: &Path, record: &SweepCellRecord) -> Result<(), ExperimentError> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), record)?;
    Ok(())
}

pub fn load_record(path: &Path) -> Result<SweepCellRecord, ExperimentError> {
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// Regime sweep over (Ω_max, t_f Ω_max): per cell, the two analytic
/// baselines plus an ensemble of PEPR optimizations. Cells with pulse area
/// outside [π, 4π] are excluded. Resumable: cells already on disk are
/// skipped.
pub fn regime_sweep(
    base: &ModelConfig,
    grid: &SweepGridSpec,
    hyper: &OptimizerHyperparams,
    seeds: &[u64],
    settings: &PropagationSettings,
    out_dir: &Path,
) -> Result<SweepOutcome, ExperimentError> {
    let keys: Vec<CellKey> = grid
        .omega_max_values
        .iter()
        .flat_map(|&omega| {
            grid.tf_pulse_area_values.iter().map(move |&area| CellKey {
                omega_max: omega,
                tf_pulse_area: area,
                gamma_z: 0.0,
            })
        })
        .filter(|k| (1.0..=4.0 + 1e-12).contains(&k.tf_pulse_area))
        .collect();
    let base = ModelConfig { gamma_z: 0.0, ..base.clone() };
    run_cells(&base, keys, hyper, seeds, settings, out_dir)
}

/// Dissipation comparison at fixed pulse area t_f Ω_max = 3.5π: per
/// (Ω_max, γ_z) point, 1-F_f of the recoil-compensated protocol and the
/// ensemble-best optimized infidelity. γ_z is in units of ω₀/2π.
pub fn dissipation_sweep(
    base: &ModelConfig,
    omega_max_values: &[f64],
    gamma_z_values: &[f64],
    hyper: &OptimizerHyperparams,
    seeds: &[u64],
    settings: &PropagationSettings,
    out_dir: &Path,
) -> Result<SweepOutcome, ExperimentError> {
    let keys: Vec<CellKey> = omega_max_values
        .iter()
        .flat_map(|&omega| {
            gamma_z_values.iter().map(move |&gamma| CellKey {
                omega_max: omega,
                tf_pulse_area: 3.5,
                gamma_z: gamma,
            })
        })
        .collect();
    run_cells(base, keys, hyper, seeds, settings, out_dir)
}

/// Normalized impulse of each cell's best protocol, plus the fixed slice at
/// pulse area 3.5π against the -η reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImpulseMap {
    /// (Ω_max, t_f Ω_max/π, j).
    pub cells: Vec<(f64, f64, f64)>,
    /// (Ω_max, j) along t_f Ω_max/π = 3.5, sorted by Ω_max.
    pub slice: Vec<(f64, f64)>,
    pub minus_eta: f64,
}

pub fn impulse_map(records: &[SweepCellRecord], eta: f64) -> ImpulseMap {
    let cells = records
        .iter()
        .map(|r| (r.key.omega_max, r.key.tf_pulse_area, r.impulse))
        .collect();
    let mut slice: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| (r.key.tf_pulse_area - 3.5).abs() < 1e-9)
        .map(|r| (r.key.omega_max, r.impulse))
        .collect();
    slice.sort_by(|a, b| a.0.total_cmp(&b.0));
    ImpulseMap { cells, slice, minus_eta: -eta }
}

/// Phase-space comparison of the constant-force protocol `f_tw = -η/t_f`
/// against the recoil-compensated curve, both under the sine Rabi pulse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseSpaceStudy {
    pub omega_max: f64,
    /// (t, ⟨a+a†⟩, ⟨i(a†-a)⟩) series for the constant-force protocol.
    pub constant_force: Vec<(f64, f64, f64)>,
    /// Same for the recoil-compensated protocol.
    pub compensated: Vec<(f64, f64, f64)>,
    /// max |displacement| ratio, constant / compensated.
    pub displacement_ratio: f64,
    /// max |momentum| ratio, constant / compensated.
    pub momentum_ratio: f64,
    /// Impulse of the constant-force protocol (exactly -η).
    pub constant_impulse: f64,
}

pub fn phase_space_study(
    base: &ModelConfig,
    settings: &PropagationSettings,
) -> Result<PhaseSpaceStudy, ExperimentError> {
    let config = ModelConfig { gamma_z: 0.0, ..base.clone() };
    let sys = System::new(&config)?;
    let compensated = recoil_compensated_protocol(&config);
    let t_f = compensated.t_f;
    let constant = ConstantForceRabi {
        omega_max: config.omega_max,
        t_f,
        force: -config.eta / t_f,
    };
    let rho0 = sys.initial_state();
    let const_traj = quadrature_trajectory(&sys, &constant, &rho0, settings)?;
    let comp_traj = quadrature_trajectory(&sys, &compensated, &rho0, settings)?;
    let max_abs = |series: &[(f64, f64, f64)], idx: usize| {
        series
            .iter()
            .map(|s| if idx == 0 { s.1.abs() } else { s.2.abs() })
            .fold(0.0_f64, f64::max)
    };
    let displacement_ratio = max_abs(&const_traj, 0) / max_abs(&comp_traj, 0);
    let momentum_ratio = max_abs(&const_traj, 1) / max_abs(&comp_traj, 1);
    Ok(PhaseSpaceStudy {
        omega_max: config.omega_max,
        constant_force: const_traj,
        compensated: comp_traj,
        displacement_ratio,
        momentum_ratio,
        constant_impulse: -config.eta,
    })
}

/// Learning-rate calibration: for each (Ω_max, t_test Ω_max) cell, scan the
/// 11×11 (α_dr, α_tw) grid with short optimization runs and keep the pair
/// with the lowest best infidelity. Cells where every run fails store the
/// conservative fallback, flagged.
pub fn calibrate_learning_rates(
    base: &ModelConfig,
    omega_max_values: &[f64],
    seeds: &[u64],
    scan_n_it: usize,
    settings: &PropagationSettings,
) -> CalibrationTable {
    let mut entries = Vec::new();
    for &omega_max in omega_max_values {
        let config = ModelConfig { omega_max, ..base.clone() };
        for &t_over_pi in T_TEST_GRID_OVER_PI.iter() {
            let t_f = t_over_pi * PI / omega_max;
            let scan: Vec<(f64, f64, f64, f64)> = ALPHA_SCAN_GRID
                .par_iter()
                .flat_map_iter(|&alpha_dr| {
                    ALPHA_SCAN_GRID.iter().map(move |&alpha_tw| (alpha_dr, alpha_tw))
                })
                .filter_map(|(alpha_dr, alpha_tw)| {
                    let mut best = f64::INFINITY;
                    let mut instability = 0.0;
                    for &seed in seeds {
                        let hyper = OptimizerHyperparams {
                            alpha_dr,
                            alpha_tw,
                            n_it: scan_n_it,
                            seed,
                            eval_stride: (scan_n_it / 20).max(1),
                            stall_window: None,
                            ..Default::default()
                        };
                        match optimize(&config, t_f, &hyper, settings) {
                            Ok(t) => {
                                if t.best_infidelity < best {
                                    best = t.best_infidelity;
                                    instability = trace_instability(&t);
                                }
                            }
                            Err(_) => continue,
                        }
                    }
                    best.is_finite().then_some((alpha_dr, alpha_tw, best, instability))
                })
                .collect();
            let entry = match scan
                .iter()
                .min_by(|a, b| a.2.total_cmp(&b.2))
            {
                Some(&(alpha_dr, alpha_tw, best_infidelity, instability)) => CalibrationEntry {
                    omega_max,
                    tf_times_omega_max: t_over_pi * PI,
                    alpha_dr,
                    alpha_tw,
                    best_infidelity,
                    flagged: instability > INSTABILITY_THRESHOLD,
                },
                None => CalibrationEntry {
                    omega_max,
                    tf_times_omega_max: t_over_pi * PI,
                    alpha_dr: FALLBACK_RATES.0,
                    alpha_tw: FALLBACK_RATES.1,
                    best_infidelity: f64::NAN,
                    flagged: true,
                },
            };
            entries.push(entry);
        }
    }
    CalibrationTable { entries }
}

/// Protocol family of a stroboscopic sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolFamily {
    Rabi,
    RecoilCompensated,
}

/// Infidelity after the (2n-1)-th pulse of a stroboscopic sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StroboRecord {
    pub n: usize,
    pub infidelity: f64,
    pub family: ProtocolFamily,
}

/// Alternating π-pulse sequence without state reset: odd pulses use the
/// forward protocol toward |↑,0⟩, even pulses drive back with the
/// sign-flipped restoring potential (the Rabi family repeats the identical
/// pulse). Infidelity against |↑,0⟩ is recorded after each odd pulse.
/// A propagation failure terminates the series with partial results.
pub fn strobo_run(
    config: &ModelConfig,
    family: ProtocolFamily,
    n_reps: usize,
    settings: &PropagationSettings,
) -> Result<Vec<StroboRecord>, ExperimentError> {
    assert!(n_reps >= 1);
    let sys = System::new(config)?;
    let target = sys.target_state();
    let mut rho = sys.initial_state();
    let mut out = Vec::with_capacity(n_reps);
    let rabi = rabi_protocol(config.omega_max);
    let forward = recoil_compensated_protocol(config);
    let backward = forward.force_flipped();
    for pulse in 1..=(2 * n_reps - 1) {
        let result = match family {
            ProtocolFamily::Rabi => evolve(&sys, &rabi, &rho, 0.0, rabi.t_f, settings),
            ProtocolFamily::RecoilCompensated => {
                if pulse % 2 == 1 {
                    evolve(&sys, &forward, &rho, 0.0, forward.t_f, settings)
                } else {
                    evolve(&sys, &backward, &rho, 0.0, backward.t_f, settings)
                }
            }
        };
        match result {
            Ok(next) => rho = next,
            Err(_) if !out.is_empty() => return Ok(out),
            Err(e) => return Err(e.into()),
        }
        if pulse % 2 == 1 {
            out.push(StroboRecord {
                n: pulse.div_ceil(2),
                infidelity: infidelity(&rho, &target),
                family,
            });
        }
    }
    Ok(out)
}

/// Laboratory-time view of sweep records: (Ω_max/ω₀, t_f ω₀/π, 1-F_θ*).
/// Pure re-parameterization, no recomputation.
pub fn lab_time_view(records: &[SweepCellRecord]) -> Vec<(f64, f64, f64)> {
    records
        .iter()
        .map(|r| {
            (r.key.omega_max, r.key.tf_pulse_area / r.key.omega_max, r.best_infidelity)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lab_time_rescale_arithmetic() {
        let key = CellKey { omega_max: 2.0, tf_pulse_area: 3.0, gamma_z: 0.0 };
        let config = ModelConfig::dimensionless(0.505, 2.0, 0.0, 3);
        let record = SweepCellRecord {
            key,
            config,
            hyper: OptimizerHyperparams::default(),
            t_f: 3.0 * PI / 2.0,
            seeds: vec![1],
            per_seed: vec![],
            baseline_rabi: 0.1,
            baseline_compensated: 0.01,
            best_seed: 1,
            best_infidelity: 1e-5,
            best_protocol: SineModeProtocol::zeros(1.0, 1, 1),
            impulse: 0.0,
            wall_seconds: 0.0,
        };
        let view = lab_time_view(&[record]);
        assert_eq!(view.len(), 1);
        assert!((view[0].1 - 1.5).abs() < 1e-14);
        assert!(lab_time_view(&[]).is_empty());
    }

    #[test]
    fn cell_filenames_are_stable() {
        let key = CellKey { omega_max: 0.428, tf_pulse_area: 1.5, gamma_z: 2e-4 };
        assert_eq!(
            key.filename(),
            "cell_om4.280000e-1_tf1.500000e0_gz2.000000e-4.json"
        );
    }

    #[test]
    fn grid_filters_to_populated_region() {
        let grid = SweepGridSpec {
            omega_max_values: vec![1.0],
            tf_pulse_area_values: vec![0.5, 1.0, 2.0, 4.0, 4.5],
        };
        let keys: Vec<CellKey> = grid
            .omega_max_values
            .iter()
            .flat_map(|&omega| {
                grid.tf_pulse_area_values.iter().map(move |&area| CellKey {
                    omega_max: omega,
                    tf_pulse_area: area,
                    gamma_z: 0.0,
                })
            })
            .filter(|k| (1.0..=4.0 + 1e-12).contains(&k.tf_pulse_area))
            .collect();
        assert_eq!(keys.len(), 3);
    }
}
