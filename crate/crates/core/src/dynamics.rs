//! Density-matrix propagation under a control protocol, fidelity, and
//! physical observables.
//!
//! The master equation is integrated with classical fixed-step RK4 on the
//! full density matrix. Controls are sampled analytically at each stage
//! time, with no piecewise-constant approximation. The step is
//! `h = min(2π/ω₀, 2π/Ω_max, t_f) / substeps_per_period`.
//!
//! Trace is checked every step; positivity is monitored (not enforced) on
//! the final state and an eigenvalue below -1e-6 aborts as an integration
//! failure rather than being clipped.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::hilbert::{build_control_set, ConfigError, ModelConfig, SPIN_DOWN, SPIN_UP};
use crate::linalg::{eigvals_hermitian, hermiticity_defect, matmul_into, trace};
use crate::protocols::{ControlProtocol, ControlSample};

/// Trace drift that aborts a propagation.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
/// Most negative density-matrix eigenvalue tolerated during propagation.
pub const POSITIVITY_FLOOR: f64 = -1e-6;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("propagation interval reversed: t0 = {t0}, t1 = {t1}")]
    ReversedInterval { t0: f64, t1: f64 },
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("trace drifted to {trace} at t = {t} (|1 - trace| > {TRACE_DRIFT_LIMIT})")]
    TraceDrift { t: f64, trace: f64 },
    #[error("density matrix lost positivity: min eigenvalue {min_eig} at t = {t}")]
    PositivityLoss { t: f64, min_eig: f64 },
    #[error("state is not a density matrix: {0}")]
    InvalidState(String),
}

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationSettings {
    /// RK4 substeps per fastest period; at least 10.
    pub substeps_per_period: usize,
    /// Sample count for observable time series.
    pub observable_sample_count: usize,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        PropagationSettings { substeps_per_period: 200, observable_sample_count: 256 }
    }
}

impl PropagationSettings {
    pub fn with_substeps(substeps_per_period: usize) -> Self {
        assert!(substeps_per_period >= 10, "substeps_per_period must be >= 10");
        PropagationSettings { substeps_per_period, ..Default::default() }
    }
}

/// Density matrix on the 2(n_max+1)-dimensional space. Hermitian, unit
/// trace, positive semidefinite up to integrator tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: Array2<C64>,
}

impl DensityOperator {
    /// Validating constructor: Hermitian to 1e-10, trace 1 to 1e-9,
    /// eigenvalues above -1e-9.
    pub fn try_new(matrix: Array2<C64>) -> Result<Self, DynamicsError> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(DynamicsError::InvalidState("matrix not square".into()));
        }
        let herm = hermiticity_defect(&matrix);
        if herm > 1e-10 {
            return Err(DynamicsError::InvalidState(format!(
                "hermiticity defect {herm:.3e}"
            )));
        }
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(DynamicsError::InvalidState(format!("trace {tr}")));
        }
        let min_eig = eigvals_hermitian(&matrix).into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-9 {
            return Err(DynamicsError::InvalidState(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(DensityOperator { matrix })
    }

    /// Pure basis-state projector |k⟩⟨k|.
    pub fn basis_projector(dim: usize, k: usize) -> Self {
        let mut matrix = Array2::zeros((dim, dim));
        matrix[[k, k]] = C64::new(1.0, 0.0);
        DensityOperator { matrix }
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Tr(ρ²).
    pub fn purity(&self) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.dim() {
            for k in 0..self.dim() {
                acc += (self.matrix[[j, k]] * self.matrix[[k, j]]).re;
            }
        }
        acc
    }

    fn from_propagation(matrix: Array2<C64>) -> Self {
        DensityOperator { matrix }
    }
}

/// Precomputed operators for one model configuration. All propagation and
/// optimization flows through a `System`; construction validates the config.
#[derive(Debug, Clone)]
pub struct System {
    pub config: ModelConfig,
    dim: usize,
    /// ω₀ n on the diagonal (identical for both spins).
    h_m_diag: Vec<f64>,
    b_x: Array2<C64>,
    b_y: Array2<C64>,
    b_f: Array2<C64>,
    /// σ_z ⊗ 1 diagonal (−1 on ↓, +1 on ↑).
    sz_diag: Vec<f64>,
    gamma: f64,
}

impl System {
    pub fn new(config: &ModelConfig) -> Result<Self, DynamicsError> {
        config.validate()?;
        let dim = config.dim();
        let controls = build_control_set(config);
        let mdim = config.n_max + 1;
        let h_m_diag = (0..dim).map(|k| (k % mdim) as f64).collect();
        let sz_diag = (0..dim).map(|k| if k < mdim { -1.0 } else { 1.0 }).collect();
        Ok(System {
            config: config.clone(),
            dim,
            h_m_diag,
            b_x: controls.b_x,
            b_y: controls.b_y,
            b_f: controls.b_f,
            sz_diag,
            gamma: config.gamma_internal(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn control_op_x(&self) -> &Array2<C64> {
        &self.b_x
    }

    pub fn control_op_y(&self) -> &Array2<C64> {
        &self.b_y
    }

    pub fn control_op_f(&self) -> &Array2<C64> {
        &self.b_f
    }

    /// |↓,0⟩⟨↓,0|.
    pub fn initial_state(&self) -> DensityOperator {
        DensityOperator::basis_projector(self.dim, self.config.basis_index(SPIN_DOWN, 0))
    }

    /// |↑,0⟩⟨↑,0|.
    pub fn target_state(&self) -> DensityOperator {
        DensityOperator::basis_projector(self.dim, self.config.basis_index(SPIN_UP, 0))
    }

    pub fn target_index(&self) -> usize {
        self.config.basis_index(SPIN_UP, 0)
    }

    /// Full Hamiltonian matrix at one control sample (allocates; the
    /// propagator uses the fused right-hand side instead).
    pub fn hamiltonian(&self, c: ControlSample) -> Array2<C64> {
        let mut h = self.b_x.mapv(|z| z * (0.5 * c.h_x))
            + self.b_y.mapv(|z| z * (0.5 * c.h_y))
            + self.b_f.mapv(|z| z * (-c.f_tw));
        for k in 0..self.dim {
            h[[k, k]] += self.h_m_diag[k];
        }
        h
    }

    /// Fixed RK4 step from the fastest timescale among trap period, Rabi
    /// period, and protocol duration.
    pub fn base_step(&self, protocol_duration: f64, settings: &PropagationSettings) -> f64 {
        let period = (2.0 * PI)
            .min(2.0 * PI / self.config.omega_max)
            .min(protocol_duration);
        period / settings.substeps_per_period.max(10) as f64
    }

    /// dm/dt = -i[H(c), m] + γ (L m L - m), written into `out`.
    fn rhs_into(
        &self,
        c: ControlSample,
        m: &Array2<C64>,
        out: &mut Array2<C64>,
        scratch: &mut Scratch,
    ) {
        let n = self.dim;
        // Drive + force part of H (dense), motional part handled as a diagonal.
        let bc = &mut scratch.bc;
        {
            let bx = self.b_x.as_slice().unwrap();
            let by = self.b_y.as_slice().unwrap();
            let bf = self.b_f.as_slice().unwrap();
            let bcs = bc.as_slice_mut().unwrap();
            let (cx, cy, cf) = (0.5 * c.h_x, 0.5 * c.h_y, -c.f_tw);
            for i in 0..n * n {
                bcs[i] = bx[i] * cx + by[i] * cy + bf[i] * cf;
            }
        }
        matmul_into(bc, m, &mut scratch.t1); // B m
        matmul_into(m, bc, &mut scratch.t2); // m B
        let t1 = scratch.t1.as_slice().unwrap();
        let t2 = scratch.t2.as_slice().unwrap();
        let ms = m.as_slice().unwrap();
        let os = out.as_slice_mut().unwrap();
        let minus_i = C64::new(0.0, -1.0);
        for j in 0..n {
            let dj = self.h_m_diag[j];
            let lj = self.sz_diag[j];
            for k in 0..n {
                let idx = j * n + k;
                // Diagonal H_m commutator is elementwise: (d_j - d_k) m_jk.
                let comm = t1[idx] - t2[idx] + (dj - self.h_m_diag[k]) * ms[idx];
                let mut v = minus_i * comm;
                if self.gamma > 0.0 {
                    v += self.gamma * (lj * self.sz_diag[k] - 1.0) * ms[idx];
                }
                os[idx] = v;
            }
        }
    }
}

struct Scratch {
    bc: Array2<C64>,
    t1: Array2<C64>,
    t2: Array2<C64>,
    k1: Array2<C64>,
    k2: Array2<C64>,
    k3: Array2<C64>,
    k4: Array2<C64>,
    stage: Array2<C64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        let z = || Array2::zeros((dim, dim));
        Scratch { bc: z(), t1: z(), t2: z(), k1: z(), k2: z(), k3: z(), k4: z(), stage: z() }
    }
}

fn axpy(out: &mut Array2<C64>, base: &Array2<C64>, scale: f64, add: &Array2<C64>) {
    let o = out.as_slice_mut().unwrap();
    let b = base.as_slice().unwrap();
    let a = add.as_slice().unwrap();
    for i in 0..o.len() {
        o[i] = b[i] + scale * a[i];
    }
}

/// One RK4 step of length h starting at time t, in place.
fn rk4_step<P: ControlProtocol + ?Sized>(
    sys: &System,
    protocol: &P,
    t: f64,
    h: f64,
    m: &mut Array2<C64>,
    scratch: &mut Scratch,
) {
    let c0 = protocol.controls_at(t);
    let c1 = protocol.controls_at(t + 0.5 * h);
    let c2 = protocol.controls_at(t + h);

    let mut k1 = std::mem::replace(&mut scratch.k1, Array2::zeros((0, 0)));
    let mut k2 = std::mem::replace(&mut scratch.k2, Array2::zeros((0, 0)));
    let mut k3 = std::mem::replace(&mut scratch.k3, Array2::zeros((0, 0)));
    let mut k4 = std::mem::replace(&mut scratch.k4, Array2::zeros((0, 0)));
    let mut stage = std::mem::replace(&mut scratch.stage, Array2::zeros((0, 0)));

    sys.rhs_into(c0, m, &mut k1, scratch);
    axpy(&mut stage, m, 0.5 * h, &k1);
    sys.rhs_into(c1, &stage, &mut k2, scratch);
    axpy(&mut stage, m, 0.5 * h, &k2);
    sys.rhs_into(c1, &stage, &mut k3, scratch);
    axpy(&mut stage, m, h, &k3);
    sys.rhs_into(c2, &stage, &mut k4, scratch);

    {
        let ms = m.as_slice_mut().unwrap();
        let (a, b, c, d) = (
            k1.as_slice().unwrap(),
            k2.as_slice().unwrap(),
            k3.as_slice().unwrap(),
            k4.as_slice().unwrap(),
        );
        let w = h / 6.0;
        for i in 0..ms.len() {
            ms[i] += w * (a[i] + 2.0 * (b[i] + c[i]) + d[i]);
        }
    }

    scratch.k1 = k1;
    scratch.k2 = k2;
    scratch.k3 = k3;
    scratch.k4 = k4;
    scratch.stage = stage;
}

/// Propagate an arbitrary matrix (state perturbations included) from t0 to
/// t1 under the protocol's master-equation generator. No state validation.
pub fn propagate_matrix<P: ControlProtocol + ?Sized>(
    sys: &System,
    protocol: &P,
    m0: &Array2<C64>,
    t0: f64,
    t1: f64,
    settings: &PropagationSettings,
) -> Result<Array2<C64>, DynamicsError> {
    if t1 < t0 {
        return Err(DynamicsError::ReversedInterval { t0, t1 });
    }
    let mut m = m0.clone();
    if t1 == t0 {
        return Ok(m);
    }
    let span = t1 - t0;
    let h_base = sys.base_step(protocol.duration(), settings);
    let nsteps = (span / h_base).ceil().max(1.0) as usize;
    let h = span / nsteps as f64;
    let mut scratch = Scratch::new(sys.dim);
    for step in 0..nsteps {
        let t = t0 + step as f64 * h;
        if t + h == t {
            return Err(DynamicsError::StepUnderflow { t, h });
        }
        rk4_step(sys, protocol, t, h, &mut m, &mut scratch);
    }
    Ok(m)
}

/// Propagate a density operator from t0 to t1, with trace monitoring every
/// step and a positivity check on the result.
pub fn evolve<P: ControlProtocol + ?Sized>(
    sys: &System,
    protocol: &P,
    rho0: &DensityOperator,
    t0: f64,
    t1: f64,
    settings: &PropagationSettings,
) -> Result<DensityOperator, DynamicsError> {
    if t1 < t0 {
        return Err(DynamicsError::ReversedInterval { t0, t1 });
    }
    let mut m = rho0.matrix().clone();
    if t1 > t0 {
        let span = t1 - t0;
        let h_base = sys.base_step(protocol.duration(), settings);
        let nsteps = (span / h_base).ceil().max(1.0) as usize;
        let h = span / nsteps as f64;
        let mut scratch = Scratch::new(sys.dim);
        for step in 0..nsteps {
            let t = t0 + step as f64 * h;
            if t + h == t {
                return Err(DynamicsError::StepUnderflow { t, h });
            }
            rk4_step(sys, protocol, t, h, &mut m, &mut scratch);
            let tr = trace(&m).re;
            if (tr - 1.0).abs() > TRACE_DRIFT_LIMIT {
                return Err(DynamicsError::TraceDrift { t: t + h, trace: tr });
            }
        }
    }
    let min_eig = eigvals_hermitian(&m).into_iter().fold(f64::INFINITY, f64::min);
    if min_eig < POSITIVITY_FLOOR {
        return Err(DynamicsError::PositivityLoss { t: t1, min_eig });
    }
    Ok(DensityOperator::from_propagation(m))
}

/// State infidelity `1 - Tr(target† ρ)`.
pub fn infidelity(rho: &DensityOperator, target: &DensityOperator) -> f64 {
    let mut overlap = C64::new(0.0, 0.0);
    let n = rho.dim();
    let t = target.matrix();
    let r = rho.matrix();
    for j in 0..n {
        for k in 0..n {
            overlap += t[[j, k]].conj() * r[[j, k]];
        }
    }
    1.0 - overlap.re
}

/// Populations of the motional levels, traced over spin. Sums to the trace
/// of ρ (1 within 1e-9).
pub fn motional_populations(rho: &DensityOperator) -> Vec<f64> {
    let mdim = rho.dim() / 2;
    (0..mdim)
        .map(|n| rho.matrix()[[n, n]].re + rho.matrix()[[n + mdim, n + mdim]].re)
        .collect()
}

/// Time series of the dimensionless quadratures `(⟨a+a†⟩, ⟨i(a†−a)⟩)` at
/// uniformly spaced times over the protocol. One photon kick shifts the
/// momentum quadrature by 2η.
pub fn quadrature_trajectory<P: ControlProtocol + ?Sized>(
    sys: &System,
    protocol: &P,
    rho0: &DensityOperator,
    settings: &PropagationSettings,
) -> Result<Vec<(f64, f64, f64)>, DynamicsError> {
    let samples = settings.observable_sample_count.max(2);
    let t_f = protocol.duration();
    let mdim = sys.config.n_max + 1;
    let expect = |m: &Array2<C64>| -> (f64, f64) {
        // ⟨q⟩ and ⟨p⟩ from the ladder structure: only the first Fock
        // off-diagonal contributes.
        let mut x = 0.0;
        let mut p = 0.0;
        for s in 0..2 {
            for n in 0..mdim - 1 {
                let j = s * mdim + n;
                let amp = ((n + 1) as f64).sqrt();
                // q contributes 2 Re, p contributes 2 Im of √(n+1) ρ_{n+1,n}.
                let rho_low = m[[j + 1, j]];
                x += 2.0 * amp * rho_low.re;
                p += 2.0 * amp * rho_low.im;
            }
        }
        (x, p)
    };
    let mut out = Vec::with_capacity(samples + 1);
    let mut rho = rho0.clone();
    let (x0, p0) = expect(rho.matrix());
    out.push((0.0, x0, p0));
    for i in 1..=samples {
        let t_prev = t_f * (i - 1) as f64 / samples as f64;
        let t_cur = t_f * i as f64 / samples as f64;
        rho = evolve(sys, protocol, &rho, t_prev, t_cur, settings)?;
        let (x, p) = expect(rho.matrix());
        out.push((t_cur, x, p));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{rabi_protocol, recoil_compensated_protocol, SineModeProtocol};
    use approx::assert_abs_diff_eq;

    fn sys(eta: f64, omega_max: f64, gamma_z: f64) -> System {
        System::new(&ModelConfig::dimensionless(eta, omega_max, gamma_z, 3)).unwrap()
    }

    #[test]
    fn exact_pi_pulse_at_eta_zero() {
        let s = sys(0.0, 1.0, 0.0);
        let p = rabi_protocol(1.0);
        let rho = evolve(
            &s,
            &p,
            &s.initial_state(),
            0.0,
            p.t_f,
            &PropagationSettings::default(),
        )
        .unwrap();
        let err = infidelity(&rho, &s.target_state());
        assert!(err < 1e-8, "infidelity {err:.3e}");
    }

    #[test]
    fn fock_state_is_stationary_without_controls() {
        let s = sys(0.505, 1.0, 0.0);
        let p = SineModeProtocol::zeros(5.0, 2, 2);
        let rho0 = DensityOperator::basis_projector(8, s.config.basis_index(SPIN_DOWN, 1));
        let rho = evolve(&s, &p, &rho0, 0.0, 5.0, &PropagationSettings::default()).unwrap();
        for (a, b) in rho.matrix().iter().zip(rho0.matrix().iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn infidelity_limits() {
        let s = sys(0.505, 1.0, 0.0);
        let target = s.target_state();
        assert_abs_diff_eq!(infidelity(&target, &target), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(infidelity(&s.initial_state(), &target), 1.0, epsilon = 1e-14);
        let mixed = DensityOperator::try_new(
            Array2::eye(8).mapv(|z: C64| z / 8.0),
        )
        .unwrap();
        assert_abs_diff_eq!(infidelity(&mixed, &target), 1.0 - 1.0 / 8.0, epsilon = 1e-14);
    }

    #[test]
    fn motional_population_cases() {
        let s = sys(0.505, 1.0, 0.0);
        let p = motional_populations(&s.target_state());
        assert_eq!(p.len(), 4);
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-14);
        for v in &p[1..] {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-14);
        }
        let mixed =
            DensityOperator::try_new(Array2::eye(8).mapv(|z: C64| z / 8.0)).unwrap();
        for v in motional_populations(&mixed) {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn dephasing_decay_matches_analytic_rate() {
        // |+⟩⟨+| ⊗ |0⟩⟨0| under pure dephasing: coherence ~ e^{-2γt}.
        let gamma_z = 0.8;
        let s = sys(0.0, 1.0, gamma_z);
        let gamma = s.config.gamma_internal();
        let mut m = Array2::zeros((8, 8));
        let d0 = s.config.basis_index(SPIN_DOWN, 0);
        let u0 = s.config.basis_index(SPIN_UP, 0);
        for j in [d0, u0] {
            for k in [d0, u0] {
                m[[j, k]] = C64::new(0.5, 0.0);
            }
        }
        let rho0 = DensityOperator::try_new(m).unwrap();
        let p = SineModeProtocol::zeros(4.0, 1, 1);
        let t = 2.5;
        let rho = evolve(&s, &p, &rho0, 0.0, t, &PropagationSettings::default()).unwrap();
        // The ↓↑ coherence also rotates at the bare splitting (zero here).
        let coh = rho.matrix()[[d0, u0]];
        assert_abs_diff_eq!(coh.re, 0.5 * (-2.0 * gamma * t).exp(), epsilon = 1e-9);
        assert_abs_diff_eq!(coh.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn recoil_compensated_benchmark_infidelity() {
        // Fast-regime benchmark: Ω_max/ω₀ = 20, η = 0.505 → 1-F_f ≈ 9e-4.
        let s = sys(0.505, 20.0, 0.0);
        let p = recoil_compensated_protocol(&s.config);
        let rho = evolve(
            &s,
            &p,
            &s.initial_state(),
            0.0,
            p.t_f,
            &PropagationSettings::default(),
        )
        .unwrap();
        let err = infidelity(&rho, &s.target_state());
        assert!(
            (err - 9e-4).abs() < 0.3 * 9e-4,
            "1-F_f = {err:.4e}, expected 9e-4 ± 30%"
        );
    }

    #[test]
    fn purity_preserved_without_dissipation() {
        let s = sys(0.505, 2.0, 0.0);
        let p = rabi_protocol(2.0);
        let rho = evolve(
            &s,
            &p,
            &s.initial_state(),
            0.0,
            p.t_f,
            &PropagationSettings::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn semigroup_property_on_matched_grids() {
        let s = sys(0.505, 2.0, 0.1);
        let p = rabi_protocol(2.0);
        let settings = PropagationSettings::default();
        // Split point on the step grid: h divides both segments when the
        // split is at half of an even total span.
        let t_f = p.t_f;
        let full = evolve(&s, &p, &s.initial_state(), 0.0, t_f, &settings).unwrap();
        let h_base = s.base_step(p.t_f, &settings);
        let nsteps = (t_f / h_base).ceil() as usize;
        // Choose a midpoint that is a whole number of steps of the full run.
        let k = nsteps / 2;
        let t_m = t_f * k as f64 / nsteps as f64;
        let part = evolve(&s, &p, &s.initial_state(), 0.0, t_m, &settings).unwrap();
        let part = evolve(&s, &p, &part, t_m, t_f, &settings).unwrap();
        for (a, b) in full.matrix().iter().zip(part.matrix().iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn trace_and_hermiticity_preserved() {
        let s = sys(0.505, 2.0, 0.05);
        let p = SineModeProtocol::new(
            3.0,
            vec![1.2, -0.5, 0.3],
            vec![0.4, 0.2, -0.6],
            vec![0.2, -0.1],
        )
        .unwrap();
        let rho = evolve(&s, &p, &s.initial_state(), 0.0, 3.0, &PropagationSettings::default())
            .unwrap();
        assert_abs_diff_eq!(trace(rho.matrix()).re, 1.0, epsilon = 1e-9);
        assert!(hermiticity_defect(rho.matrix()) < 1e-10);
    }

    #[test]
    fn reversed_interval_rejected() {
        let s = sys(0.0, 1.0, 0.0);
        let p = rabi_protocol(1.0);
        assert!(matches!(
            evolve(&s, &p, &s.initial_state(), 1.0, 0.5, &PropagationSettings::default()),
            Err(DynamicsError::ReversedInterval { .. })
        ));
    }

    #[test]
    fn vacuum_quadratures_vanish_without_controls() {
        let s = sys(0.505, 1.0, 0.0);
        let p = SineModeProtocol::zeros(3.0, 1, 1);
        let traj =
            quadrature_trajectory(&s, &p, &s.initial_state(), &PropagationSettings::default())
                .unwrap();
        for (_, x, pq) in traj {
            assert_abs_diff_eq!(x, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(pq, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_force_drives_classical_oscillation() {
        // H = ω₀ a†a - c q from the ground state: ⟨q⟩(t) = (2c/ω₀)(1 - cos ω₀ t).
        let c = 0.05;
        let s = sys(0.0, 1.0, 0.0);
        let p = crate::protocols::ConstantForceRabi { omega_max: 0.0, t_f: 12.0, force: c };
        let settings =
            PropagationSettings { observable_sample_count: 48, ..Default::default() };
        let traj = quadrature_trajectory(&s, &p, &s.initial_state(), &settings).unwrap();
        for (t, x, _) in traj {
            let expect = 2.0 * c * (1.0 - t.cos());
            assert_abs_diff_eq!(x, expect, epsilon = 1e-5);
        }
    }

    #[test]
    fn step_halving_changes_little() {
        let s = sys(0.505, 20.0, 0.0);
        let p = recoil_compensated_protocol(&s.config);
        let coarse = evolve(
            &s,
            &p,
            &s.initial_state(),
            0.0,
            p.t_f,
            &PropagationSettings::with_substeps(200),
        )
        .unwrap();
        let fine = evolve(
            &s,
            &p,
            &s.initial_state(),
            0.0,
            p.t_f,
            &PropagationSettings::with_substeps(400),
        )
        .unwrap();
        let e1 = infidelity(&coarse, &s.target_state());
        let e2 = infidelity(&fine, &s.target_state());
        assert!((e1 - e2).abs() < 0.01 * e1.abs().max(1e-12), "e1={e1:.4e} e2={e2:.4e}");
    }
}
