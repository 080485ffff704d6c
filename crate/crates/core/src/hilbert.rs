//! Truncated spin⊗motion Hilbert space, control operators, and the Lindblad
//! generator.
//!
//! Basis ordering: `|s, n⟩` flattens to index `s (n_max+1) + n` with spin
//! `s = 0 (↓), 1 (↑)` and Fock index `n = 0..n_max`. The drive couples the
//! spin raising operator to the displacement `exp(iη(a+a†))`, so a ↓→↑
//! transition absorbs one photon recoil; the tweezer term is `-f_tw (a+a†)`
//! acting identically on both spin states.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::linalg::{expm_i_real_symmetric, kron};
use crate::protocols::ControlSample;

/// Reduced Planck constant, J·s. Used only for physical-unit conversions.
pub const HBAR: f64 = 1.054571817e-34;

/// Spin index of `|↓⟩` in the flattened basis.
pub const SPIN_DOWN: usize = 0;
/// Spin index of `|↑⟩` in the flattened basis.
pub const SPIN_UP: usize = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("Fock truncation n_max must be at least 1, got {0}")]
    InvalidTruncation(usize),
    #[error("omega_max must be positive, got {0}")]
    InvalidOmegaMax(f64),
    #[error("gamma_z must be nonnegative, got {0}")]
    InvalidGamma(f64),
    #[error("eta must be nonnegative and finite, got {0}")]
    InvalidEta(f64),
    #[error("velocity bound must be positive, got {0}")]
    InvalidVelocityBound(f64),
    #[error(
        "eta = {eta} inconsistent with k*sqrt(hbar/(2 m omega0)) = {derived} \
         (relative error {rel:.3e})"
    )]
    EtaMismatch { eta: f64, derived: f64, rel: f64 },
}

/// Physical trap and laser parameters, used only to derive the oscillator
/// length, the Lamb-Dicke parameter, and the dimensionless velocity bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Trap angular frequency ω₀, rad/s.
    pub omega0_rad_per_s: f64,
    /// Atomic mass, kg.
    pub mass_kg: f64,
    /// Control-laser wave vector k, 1/m.
    pub k_per_m: f64,
}

impl PhysicalParams {
    /// Harmonic oscillator length x₀ = sqrt(ħ/(2 m ω₀)), m.
    pub fn oscillator_length(&self) -> f64 {
        (HBAR / (2.0 * self.mass_kg * self.omega0_rad_per_s)).sqrt()
    }

    /// Lamb-Dicke parameter η = k x₀.
    pub fn lamb_dicke(&self) -> f64 {
        self.k_per_m * self.oscillator_length()
    }

    /// Dimensionless bound on |d f_tw/dt| (units ω₀²) implied by a tweezer
    /// velocity bound in m/s. The trap displacement is r = 2 x₀ f_tw/ω₀, so
    /// |∂_t r| < v_max becomes |d f_tw/dt| < v_max ω₀ / (2 x₀), i.e.
    /// v_max / (2 x₀ ω₀) in units of ω₀².
    pub fn velocity_bound_dimless(&self, v_max_m_per_s: f64) -> f64 {
        v_max_m_per_s / (2.0 * self.oscillator_length() * self.omega0_rad_per_s)
    }
}

/// Model parameters in trap units (ħ = 1, ω₀ = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Lamb-Dicke parameter, dimensionless.
    pub eta: f64,
    /// Maximal Rabi frequency, units of ω₀.
    pub omega_max: f64,
    /// Dephasing rate, units of ω₀/2π.
    pub gamma_z: f64,
    /// Fock truncation index; motional states n = 0..n_max.
    pub n_max: usize,
    /// Bound on |d f_tw/dt|, units of ω₀².
    pub v_max_dimless: f64,
    /// Optional physical parameters for unit conversions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalParams>,
}

impl ModelConfig {
    /// The ¹⁷¹Yb single-photon example: ω₀/2π = 50 kHz, UV drive at 302 nm,
    /// η = 0.505, tweezer velocity bound 500 m/s.
    ///
    /// The velocity bound is derived from the physical trap, but the
    /// physical block itself is not stored: the rounded η = 0.505 differs
    /// from k·x₀ of the raw numbers by 0.16%, beyond the consistency
    /// tolerance of [`ModelConfig::validate`].
    pub fn ytterbium(omega_max: f64, gamma_z: f64, n_max: usize) -> Self {
        let physical = PhysicalParams {
            omega0_rad_per_s: 2.0 * PI * 50e3,
            mass_kg: 171.0 * 1.66053906660e-27,
            k_per_m: 2.0 * PI / 302e-9,
        };
        ModelConfig {
            eta: 0.505,
            omega_max,
            gamma_z,
            n_max,
            v_max_dimless: physical.velocity_bound_dimless(500.0),
            physical: None,
        }
    }

    /// Dimensionless construction with the Yb-derived velocity bound.
    pub fn dimensionless(eta: f64, omega_max: f64, gamma_z: f64, n_max: usize) -> Self {
        ModelConfig {
            eta,
            omega_max,
            gamma_z,
            n_max,
            v_max_dimless: 3.273e4,
            physical: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_max < 1 {
            return Err(ConfigError::InvalidTruncation(self.n_max));
        }
        if !(self.omega_max > 0.0) || !self.omega_max.is_finite() {
            return Err(ConfigError::InvalidOmegaMax(self.omega_max));
        }
        if self.gamma_z < 0.0 || !self.gamma_z.is_finite() {
            return Err(ConfigError::InvalidGamma(self.gamma_z));
        }
        if self.eta < 0.0 || !self.eta.is_finite() {
            return Err(ConfigError::InvalidEta(self.eta));
        }
        if !(self.v_max_dimless > 0.0) {
            return Err(ConfigError::InvalidVelocityBound(self.v_max_dimless));
        }
        if let Some(p) = &self.physical {
            let derived = p.lamb_dicke();
            let rel = (self.eta - derived).abs() / derived.abs().max(f64::MIN_POSITIVE);
            if rel > 1e-6 {
                return Err(ConfigError::EtaMismatch { eta: self.eta, derived, rel });
            }
        }
        Ok(())
    }

    /// Full Hilbert-space dimension 2(n_max+1).
    pub fn dim(&self) -> usize {
        2 * (self.n_max + 1)
    }

    /// Flat basis index of `|s, n⟩`.
    pub fn basis_index(&self, spin: usize, n: usize) -> usize {
        debug_assert!(spin < 2 && n <= self.n_max);
        spin * (self.n_max + 1) + n
    }

    /// Dephasing rate in internal units (ω₀ = 1): the stored value is in
    /// units of ω₀/2π.
    pub fn gamma_internal(&self) -> f64 {
        self.gamma_z / (2.0 * PI)
    }
}

/// Truncated ladder operators `(a, a†)` on the (n_max+1)-dimensional motional
/// space: `a` carries √n on the first superdiagonal.
pub fn build_ladder(n_max: usize) -> Result<(Array2<C64>, Array2<C64>), ConfigError> {
    if n_max < 1 {
        return Err(ConfigError::InvalidTruncation(n_max));
    }
    let dim = n_max + 1;
    let mut a = Array2::zeros((dim, dim));
    for n in 1..dim {
        a[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    let adag = crate::linalg::dagger(&a);
    Ok((a, adag))
}

/// Displacement operator `exp(iη(a+a†))` on the truncated motional space,
/// obtained by exponentiating the truncated generator. Exactly unitary on
/// the truncated space; matches the infinite-dimensional matrix elements
/// only in the truncation-converged corner.
pub fn build_displacement(eta: f64, n_max: usize) -> Result<Array2<C64>, ConfigError> {
    if n_max < 1 {
        return Err(ConfigError::InvalidTruncation(n_max));
    }
    let dim = n_max + 1;
    let mut gen = Array2::zeros((dim, dim));
    for n in 1..dim {
        let v = eta * (n as f64).sqrt();
        gen[[n - 1, n]] = v;
        gen[[n, n - 1]] = v;
    }
    Ok(expm_i_real_symmetric(&gen))
}

/// The three control operators of the drive and tweezer terms.
#[derive(Debug, Clone)]
pub struct ControlSet {
    /// Couples to the real drive quadrature: `σ⁺ e^{iη(a+a†)} + h.c.`
    pub b_x: Array2<C64>,
    /// Couples to the imaginary drive quadrature: `i σ⁺ e^{iη(a+a†)} + h.c.`
    pub b_y: Array2<C64>,
    /// Motional quadrature `a + a†`, identity on spin.
    pub b_f: Array2<C64>,
}

/// Assemble `B_x`, `B_y`, `B_f` on the full space. With Ω = h_x + i h_y the
/// drive Hamiltonian is `H_dr = (h_x/2) B_x + (h_y/2) B_y`, and the tweezer
/// term is `H_tw = -f_tw B_f`.
pub fn build_control_set(config: &ModelConfig) -> ControlSet {
    let mdim = config.n_max + 1;
    let (a, adag) = build_ladder(config.n_max).expect("validated n_max");
    let disp = build_displacement(config.eta, config.n_max).expect("validated n_max");
    let disp_dag = crate::linalg::dagger(&disp);

    let mut sp = Array2::zeros((2, 2)); // |↑⟩⟨↓|
    sp[[SPIN_UP, SPIN_DOWN]] = C64::new(1.0, 0.0);
    let mut sm = Array2::zeros((2, 2)); // |↓⟩⟨↑|
    sm[[SPIN_DOWN, SPIN_UP]] = C64::new(1.0, 0.0);
    let eye2: Array2<C64> = Array2::eye(2);

    let b_x = kron(&sp, &disp) + kron(&sm, &disp_dag);
    let b_y = kron(&sp, &disp).mapv(|z| z * C64::new(0.0, 1.0))
        + kron(&sm, &disp_dag).mapv(|z| z * C64::new(0.0, -1.0));
    let q: Array2<C64> = &a + &adag;
    let b_f = kron(&eye2, &q);
    debug_assert_eq!(b_f.nrows(), 2 * mdim);

    ControlSet { b_x, b_y, b_f }
}

/// Full Hamiltonian at one control sample:
/// `H = ω₀ a†a ⊗ 1 + (h_x/2) B_x + (h_y/2) B_y - f_tw B_f` (ω₀ = 1).
pub fn hamiltonian_at(config: &ModelConfig, controls: ControlSample) -> Array2<C64> {
    let controls_set = build_control_set(config);
    let mut h = Array2::zeros((config.dim(), config.dim()));
    for s in 0..2 {
        for n in 0..=config.n_max {
            let k = config.basis_index(s, n);
            h[[k, k]] = C64::new(n as f64, 0.0);
        }
    }
    h = h
        + controls_set.b_x.mapv(|z| z * (0.5 * controls.h_x))
        + controls_set.b_y.mapv(|z| z * (0.5 * controls.h_y))
        + controls_set.b_f.mapv(|z| z * (-controls.f_tw));
    h
}

/// Right-hand side of the master equation
/// `dρ/dt = -i[H, ρ] + γ_z (L ρ L† - ρ)` with `L = σ_z ⊗ 1` (ħ = 1).
///
/// Since L² = 1 the written form is already the canonical dissipator.
pub fn lindblad_rhs(config: &ModelConfig, h: &Array2<C64>, rho: &Array2<C64>) -> Array2<C64> {
    let dim = config.dim();
    let gamma = config.gamma_internal();
    let hr = h.dot(rho);
    let rh = rho.dot(h);
    let mut out = (&hr - &rh).mapv(|z| z * C64::new(0.0, -1.0));
    if gamma > 0.0 {
        let mdim = config.n_max + 1;
        let sz = |k: usize| if k < mdim { -1.0 } else { 1.0 };
        for j in 0..dim {
            for k in 0..dim {
                // L ρ L† - ρ: off-diagonal spin blocks flip sign, so this is
                // -2ρ on spin coherences and 0 on spin-diagonal blocks.
                out[[j, k]] += gamma * (sz(j) * sz(k) - 1.0) * rho[[j, k]];
            }
        }
    }
    out
}
