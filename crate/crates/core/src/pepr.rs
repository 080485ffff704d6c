//! Pulse engineering via projection of response functions (PEPR).
//!
//! One optimization step draws a random time t_r and control channel, forms
//! the commutator of the channel's conjugate operator with the propagated
//! state, propagates that perturbation to the final time under the same
//! master-equation generator, and projects it onto the target to obtain a
//! susceptibility χ. All sine modes of the channel are then updated as
//! `θ_l → θ_l - (2α/t_f) χ sin(πl t_r/t_f)`; updates violating the
//! amplitude or velocity constraint are discarded. Only accepted updates
//! count toward the iteration budget.
//!
//! Sign convention: the susceptibility is computed with the operator that
//! multiplies each control field in the Hamiltonian (B_x/2, B_y/2, -B_f),
//! so that χ_j(t_r) equals minus the response of the final fidelity to a
//! delta kick in h_j at t_r, and the minus sign in the update descends the
//! infidelity for every channel.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;
use thiserror::Error;

use crate::dynamics::{
    evolve, infidelity, propagate_matrix, DensityOperator, DynamicsError, PropagationSettings,
    System,
};
use crate::hilbert::{ConfigError, ModelConfig};
use crate::linalg::matmul_into;
use crate::protocols::{check_constraints, SineModeProtocol};

/// Learning-rate scan grid used by the calibration sweep: {0.01, 0.21, …, 2.01}.
pub const ALPHA_SCAN_GRID: [f64; 11] =
    [0.01, 0.21, 0.41, 0.61, 0.81, 1.01, 1.21, 1.41, 1.61, 1.81, 2.01];

/// Test durations (t Ω_max, units of π) of the calibration sweep.
pub const T_TEST_GRID_OVER_PI: [f64; 7] = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0];

/// Conservative learning rates used outside the calibration table.
pub const FALLBACK_RATES: (f64, f64) = (0.21, 0.21);

/// Mean |Δ log10(1-F)| between checkpoints above which a trace is
/// classified as unstable.
pub const INSTABILITY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum PeprError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("dynamics: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("initialization failed to satisfy constraints after {halvings} halvings")]
    InitializationExhausted { halvings: usize },
    #[error("susceptibility lost anti-Hermiticity: imaginary part {imag:.3e}")]
    NonphysicalSusceptibility { imag: f64 },
    #[error("optimizer stalled: {accepted} accepted vs {rejected} rejected updates")]
    RejectionStall { accepted: usize, rejected: usize },
    #[error("hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// The three control channels of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlChannel {
    RabiX,
    RabiY,
    Force,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerHyperparams {
    /// Learning rate for the B_x/B_y channels.
    pub alpha_dr: f64,
    /// Learning rate for the B_f channel.
    pub alpha_tw: f64,
    /// Number of accepted updates to perform. Zero degenerates to
    /// evaluating the initialization.
    pub n_it: usize,
    /// Rabi sine-mode count.
    pub n_omega: usize,
    /// Force sine-mode count.
    pub n_f: usize,
    pub seed: u64,
    /// Accepted updates between full infidelity evaluations.
    pub eval_stride: usize,
    /// Accepted updates without best-infidelity improvement before α_dr is
    /// halved; `None` disables halving.
    pub stall_window: Option<usize>,
}

impl Default for OptimizerHyperparams {
    fn default() -> Self {
        OptimizerHyperparams {
            alpha_dr: FALLBACK_RATES.0,
            alpha_tw: FALLBACK_RATES.1,
            n_it: 100_000,
            n_omega: 18,
            n_f: 3,
            seed: 0,
            eval_stride: 100,
            stall_window: Some(5000),
        }
    }
}

impl OptimizerHyperparams {
    pub fn validate(&self) -> Result<(), PeprError> {
        if !(self.alpha_dr > 0.0) || !(self.alpha_tw > 0.0) {
            return Err(PeprError::InvalidHyperparams(format!(
                "learning rates must be positive, got ({}, {})",
                self.alpha_dr, self.alpha_tw
            )));
        }
        if self.eval_stride < 1 {
            return Err(PeprError::InvalidHyperparams("eval_stride must be at least 1".into()));
        }
        if self.n_omega < 1 {
            return Err(PeprError::InvalidHyperparams("n_omega must be at least 1".into()));
        }
        Ok(())
    }
}

/// One evaluated point along an optimization trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub accepted: usize,
    pub infidelity: f64,
    pub protocol: SineModeProtocol,
}

/// Result of one optimization trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrajectory {
    pub seed: u64,
    pub t_f: f64,
    pub checkpoints: Vec<Checkpoint>,
    pub final_protocol: SineModeProtocol,
    pub best_protocol: SineModeProtocol,
    pub best_infidelity: f64,
    pub accepted: usize,
    pub rejected: usize,
    /// α_dr after stall halvings.
    pub final_alpha_dr: f64,
    pub halvings: usize,
}

/// Draw initial parameters: `θ_{x/y,l} ~ N(0, Ω_max/(n_Ω √l))`, force modes
/// zero. On a constraint violation all Rabi coefficients are redrawn with
/// the standard deviation halved, until a valid protocol is obtained.
pub fn init_parameters<R: Rng>(
    config: &ModelConfig,
    t_f: f64,
    hyper: &OptimizerHyperparams,
    rng: &mut R,
) -> Result<SineModeProtocol, PeprError> {
    let n_omega = hyper.n_omega;
    for halvings in 0..64 {
        let shrink = 0.5_f64.powi(halvings);
        let draw = |rng: &mut R| -> Vec<f64> {
            (1..=n_omega)
                .map(|l| {
                    let sigma = shrink * config.omega_max / (n_omega as f64 * (l as f64).sqrt());
                    Normal::new(0.0, sigma).expect("positive sigma").sample(rng)
                })
                .collect()
        };
        let theta_x = draw(rng);
        let theta_y = draw(rng);
        let protocol = SineModeProtocol {
            t_f,
            theta_x,
            theta_y,
            theta_f: vec![0.0; hyper.n_f],
        };
        if check_constraints(&protocol, config).ok() {
            return Ok(protocol);
        }
    }
    Err(PeprError::InitializationExhausted { halvings: 64 })
}

/// Susceptibility of the final fidelity to control channel `channel` at time
/// t_r: the commutator of the channel's conjugate operator with ρ(t_r) is
/// propagated to t_f and projected onto the target,
/// `χ = Re{ i Tr(ρ_* δρ(t_f)) }`.
///
/// `rho_tr` must be the state propagated to t_r under `protocol`.
pub fn susceptibility(
    sys: &System,
    protocol: &SineModeProtocol,
    channel: ControlChannel,
    t_r: f64,
    rho_tr: &DensityOperator,
    settings: &PropagationSettings,
) -> Result<f64, PeprError> {
    let (op, scale) = match channel {
        ControlChannel::RabiX => (sys.control_op_x(), 0.5),
        ControlChannel::RabiY => (sys.control_op_y(), 0.5),
        ControlChannel::Force => (sys.control_op_f(), -1.0),
    };
    let dim = sys.dim();
    let mut bm = Array2::zeros((dim, dim));
    let mut mb = Array2::zeros((dim, dim));
    matmul_into(op, rho_tr.matrix(), &mut bm);
    matmul_into(rho_tr.matrix(), op, &mut mb);
    let delta = (&bm - &mb).mapv(|z| z * scale);
    let delta_f = propagate_matrix(sys, protocol, &delta, t_r, protocol.t_f, settings)?;
    let k = sys.target_index();
    let z = delta_f[[k, k]];
    let chi = C64::new(0.0, 1.0) * z;
    if chi.im.abs() > 1e-9 {
        return Err(PeprError::NonphysicalSusceptibility { imag: chi.im });
    }
    Ok(chi.re)
}

/// Apply one PEPR update to every mode of one channel:
/// `θ_l → θ_l - (2α/t_f) χ sin(πl t_r/t_f)`.
pub fn update_step(
    protocol: &SineModeProtocol,
    channel: ControlChannel,
    t_r: f64,
    chi: f64,
    alpha: f64,
) -> SineModeProtocol {
    let mut out = protocol.clone();
    let factor = 2.0 * alpha / protocol.t_f * chi;
    let coeffs = match channel {
        ControlChannel::RabiX => &mut out.theta_x,
        ControlChannel::RabiY => &mut out.theta_y,
        ControlChannel::Force => &mut out.theta_f,
    };
    for (l, th) in coeffs.iter_mut().enumerate() {
        *th -= factor * (PI * (l + 1) as f64 * t_r / protocol.t_f).sin();
    }
    out
}

/// Deterministic learning-rate halving applied on a convergence stall.
pub fn halve_on_stall(alpha: f64) -> f64 {
    alpha / 2.0
}

/// Run one PEPR optimization trajectory of `hyper.n_it` accepted updates at
/// transformation time `t_f`. Deterministic for fixed inputs.
pub fn optimize(
    config: &ModelConfig,
    t_f: f64,
    hyper: &OptimizerHyperparams,
    settings: &PropagationSettings,
) -> Result<OptimizationTrajectory, PeprError> {
    hyper.validate()?;
    let sys = System::new(config)?;
    let mut rng = ChaCha12Rng::seed_from_u64(hyper.seed);
    let mut protocol = init_parameters(config, t_f, hyper, &mut rng)?;
    let rho0 = sys.initial_state();
    let target = sys.target_state();

    let eval = |p: &SineModeProtocol| -> Result<f64, PeprError> {
        let rho = evolve(&sys, p, &rho0, 0.0, t_f, settings)?;
        Ok(infidelity(&rho, &target))
    };

    let mut checkpoints = Vec::new();
    let init_inf = eval(&protocol)?;
    checkpoints.push(Checkpoint { accepted: 0, infidelity: init_inf, protocol: protocol.clone() });
    let mut best_infidelity = init_inf;
    let mut best_protocol = protocol.clone();
    let mut last_improvement = 0_usize;

    let mut alpha_dr = hyper.alpha_dr;
    let mut halvings = 0_usize;
    let mut accepted = 0_usize;
    let mut rejected = 0_usize;
    // Guard against pathological rejection loops.
    let iteration_cap = hyper.n_it.saturating_mul(200).saturating_add(10_000);
    let mut total = 0_usize;

    while accepted < hyper.n_it {
        total += 1;
        if total > iteration_cap {
            return Err(PeprError::RejectionStall { accepted, rejected });
        }
        let t_r = rng.random_range(0.0..=t_f);
        let channel = match rng.random_range(0..3_u32) {
            0 => ControlChannel::RabiX,
            1 => ControlChannel::RabiY,
            _ => ControlChannel::Force,
        };
        let rho_tr = evolve(&sys, &protocol, &rho0, 0.0, t_r, settings)?;
        let chi = susceptibility(&sys, &protocol, channel, t_r, &rho_tr, settings)?;
        let alpha = match channel {
            ControlChannel::Force => hyper.alpha_tw,
            _ => alpha_dr,
        };
        let candidate = update_step(&protocol, channel, t_r, chi, alpha);
        if !check_constraints(&candidate, config).ok() {
            rejected += 1;
            continue;
        }
        protocol = candidate;
        accepted += 1;
        if accepted % hyper.eval_stride == 0 || accepted == hyper.n_it {
            let inf = eval(&protocol)?;
            checkpoints.push(Checkpoint {
                accepted,
                infidelity: inf,
                protocol: protocol.clone(),
            });
            if inf < best_infidelity {
                best_infidelity = inf;
                best_protocol = protocol.clone();
                last_improvement = accepted;
            } else if let Some(window) = hyper.stall_window {
                if accepted - last_improvement >= window {
                    alpha_dr = halve_on_stall(alpha_dr);
                    halvings += 1;
                    last_improvement = accepted;
                }
            }
        }
    }

    Ok(OptimizationTrajectory {
        seed: hyper.seed,
        t_f,
        checkpoints,
        final_protocol: protocol,
        best_protocol,
        best_infidelity,
        accepted,
        rejected,
        final_alpha_dr: alpha_dr,
        halvings,
    })
}

/// Mean upward jump of log10(1-F) between consecutive checkpoints over the
/// second half of a trajectory. Converging traces regress rarely, so this
/// flags the oscillation caused by oversized learning rates without
/// penalizing noisy descent.
pub fn trace_instability(trajectory: &OptimizationTrajectory) -> f64 {
    let infs: Vec<f64> = trajectory
        .checkpoints
        .iter()
        .map(|c| c.infidelity.max(1e-16).log10())
        .collect();
    if infs.len() < 3 {
        return 0.0;
    }
    let start = infs.len() / 2;
    let diffs: Vec<f64> = infs[start..].windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    if diffs.is_empty() {
        return 0.0;
    }
    diffs.iter().sum::<f64>() / diffs.len() as f64
}

/// One calibrated cell of the learning-rate table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub omega_max: f64,
    /// t Ω_max of the test optimization, absolute (not units of π).
    pub tf_times_omega_max: f64,
    pub alpha_dr: f64,
    pub alpha_tw: f64,
    pub best_infidelity: f64,
    /// True when every scanned pair failed or the winning trace was
    /// unstable; such entries hold the conservative fallback rates.
    pub flagged: bool,
}

/// Result of a learning-rate lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    pub alpha_dr: f64,
    pub alpha_tw: f64,
    /// False when the conservative fallback was used.
    pub from_table: bool,
}

/// Learning rates per (Ω_max, t_test Ω_max) cell, produced by the
/// calibration sweep.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub entries: Vec<CalibrationEntry>,
}

impl CalibrationTable {
    pub fn save(&self, path: &Path) -> Result<(), PeprError> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PeprError> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }

    /// Rates for an optimization at (Ω_max, t_f): the entry with the closest
    /// Ω_max (log distance, within a factor of 2), then the closest
    /// t_test Ω_max. Falls back to [`FALLBACK_RATES`] outside the table.
    pub fn lookup(&self, omega_max: f64, t_f: f64) -> LearningRates {
        let fallback = LearningRates {
            alpha_dr: FALLBACK_RATES.0,
            alpha_tw: FALLBACK_RATES.1,
            from_table: false,
        };
        let log_dist = |e: &CalibrationEntry| (e.omega_max.ln() - omega_max.ln()).abs();
        let Some(nearest) = self
            .entries
            .iter()
            .filter(|e| !e.flagged)
            .min_by(|a, b| log_dist(a).total_cmp(&log_dist(b)))
        else {
            return fallback;
        };
        if log_dist(nearest) > std::f64::consts::LN_2 + 1e-12 {
            return fallback;
        }
        let omega_ref = nearest.omega_max;
        let target = t_f * omega_max;
        let best = self
            .entries
            .iter()
            .filter(|e| !e.flagged && e.omega_max == omega_ref)
            .min_by(|a, b| {
                (a.tf_times_omega_max - target)
                    .abs()
                    .total_cmp(&(b.tf_times_omega_max - target).abs())
            })
            .expect("nearest entry exists");
        LearningRates { alpha_dr: best.alpha_dr, alpha_tw: best.alpha_tw, from_table: true }
    }
}
