//! Pulse protocols: the sine-mode parameterization used by the optimizer,
//! the analytic Rabi and recoil-compensated Rabi protocols, constraint
//! checks, and scalar diagnostics (pulse area, normalized impulse).
//!
//! Every control protocol exposes three fields at time t: the two Rabi
//! quadratures `h_x`, `h_y` with `Ω(t) = h_x(t) + i h_y(t)`, and the
//! normalized tweezer force `f_tw`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

use crate::hilbert::ModelConfig;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("time {t} outside protocol domain [0, {t_f}]")]
    TimeOutOfRange { t: f64, t_f: f64 },
    #[error("amplitude samples must be nonempty")]
    EmptySamples,
    #[error("amplitude samples must be nonnegative, got {0} at index {1}")]
    NegativeAmplitude(f64, usize),
    #[error("theta_x and theta_y must have equal length, got {0} and {1}")]
    MismatchedModeCounts(usize, usize),
    #[error("protocol duration must be positive, got {0}")]
    InvalidDuration(f64),
    #[error("non-finite protocol coefficient")]
    NonFiniteCoefficient,
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Control fields sampled at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSample {
    pub h_x: f64,
    pub h_y: f64,
    pub f_tw: f64,
}

impl ControlSample {
    pub const ZERO: ControlSample = ControlSample { h_x: 0.0, h_y: 0.0, f_tw: 0.0 };

    /// |Ω(t)| = sqrt(h_x² + h_y²).
    pub fn rabi_abs(&self) -> f64 {
        self.h_x.hypot(self.h_y)
    }

    /// arg Ω(t).
    pub fn rabi_arg(&self) -> f64 {
        self.h_y.atan2(self.h_x)
    }
}

/// A time-dependent control protocol on `[0, duration]`.
pub trait ControlProtocol {
    fn duration(&self) -> f64;
    /// Total function of t; integrators may evaluate at stage times that
    /// overshoot the boundary by floating-point slop.
    fn controls_at(&self, t: f64) -> ControlSample;
}

impl<P: ControlProtocol + ?Sized> ControlProtocol for &P {
    fn duration(&self) -> f64 {
        (**self).duration()
    }

    fn controls_at(&self, t: f64) -> ControlSample {
        (**self).controls_at(t)
    }
}

/// Protocol expanded in sine modes `sin(πlt/t_f)`:
/// `h_{x/y}(t) = Σ_l θ_{x/y,l} sin(πlt/t_f)`, `f_tw(t) = Σ_l θ_{f,l} sin(πlt/t_f)`.
/// All three fields vanish at t = 0 and t = t_f by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineModeProtocol {
    pub t_f: f64,
    pub theta_x: Vec<f64>,
    pub theta_y: Vec<f64>,
    pub theta_f: Vec<f64>,
}

impl SineModeProtocol {
    pub fn new(
        t_f: f64,
        theta_x: Vec<f64>,
        theta_y: Vec<f64>,
        theta_f: Vec<f64>,
    ) -> Result<Self, ProtocolError> {
        if !(t_f > 0.0) || !t_f.is_finite() {
            return Err(ProtocolError::InvalidDuration(t_f));
        }
        if theta_x.len() != theta_y.len() {
            return Err(ProtocolError::MismatchedModeCounts(theta_x.len(), theta_y.len()));
        }
        if theta_x
            .iter()
            .chain(&theta_y)
            .chain(&theta_f)
            .any(|c| !c.is_finite())
        {
            return Err(ProtocolError::NonFiniteCoefficient);
        }
        Ok(SineModeProtocol { t_f, theta_x, theta_y, theta_f })
    }

    /// All-zero protocol with the given mode counts.
    pub fn zeros(t_f: f64, n_omega: usize, n_f: usize) -> Self {
        SineModeProtocol {
            t_f,
            theta_x: vec![0.0; n_omega],
            theta_y: vec![0.0; n_omega],
            theta_f: vec![0.0; n_f],
        }
    }

    pub fn n_omega(&self) -> usize {
        self.theta_x.len()
    }

    pub fn n_f(&self) -> usize {
        self.theta_f.len()
    }

    /// Checked evaluation of the three sine series.
    pub fn sample(&self, t: f64) -> Result<ControlSample, ProtocolError> {
        if !(0.0..=self.t_f).contains(&t) {
            return Err(ProtocolError::TimeOutOfRange { t, t_f: self.t_f });
        }
        Ok(self.controls_at(t))
    }

    /// Analytic time derivative of the force series,
    /// `df_tw/dt = Σ_l θ_{f,l} (πl/t_f) cos(πlt/t_f)`.
    pub fn force_derivative(&self, t: f64) -> f64 {
        let x = PI * t / self.t_f;
        let c1 = x.cos();
        // cos(lx) by the Chebyshev recurrence.
        let mut c_prev = 1.0; // cos(0)
        let mut c_cur = c1;
        let mut acc = 0.0;
        for (l, th) in self.theta_f.iter().enumerate() {
            let l = (l + 1) as f64;
            acc += th * (PI * l / self.t_f) * c_cur;
            let c_next = 2.0 * c1 * c_cur - c_prev;
            c_prev = c_cur;
            c_cur = c_next;
        }
        acc
    }

    /// Rotate the drive quadratures by a global phase φ:
    /// `(θ_x, θ_y) → (cosφ θ_x - sinφ θ_y, sinφ θ_x + cosφ θ_y)` mode by mode.
    pub fn phase_rotated(&self, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        let theta_x = self
            .theta_x
            .iter()
            .zip(&self.theta_y)
            .map(|(x, y)| c * x - s * y)
            .collect();
        let theta_y = self
            .theta_x
            .iter()
            .zip(&self.theta_y)
            .map(|(x, y)| s * x + c * y)
            .collect();
        SineModeProtocol { t_f: self.t_f, theta_x, theta_y, theta_f: self.theta_f.clone() }
    }

    pub fn save(&self, path: &Path) -> Result<(), ProtocolError> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ProtocolError> {
        let file = std::fs::File::open(path)?;
        let p: SineModeProtocol = serde_json::from_reader(std::io::BufReader::new(file))?;
        SineModeProtocol::new(p.t_f, p.theta_x, p.theta_y, p.theta_f)
    }
}

impl ControlProtocol for SineModeProtocol {
    fn duration(&self) -> f64 {
        self.t_f
    }

    fn controls_at(&self, t: f64) -> ControlSample {
        let x = PI * t / self.t_f;
        let (s1, c1) = x.sin_cos();
        let two_c1 = 2.0 * c1;
        let n = self.theta_x.len().max(self.theta_f.len());
        let mut s_prev = 0.0; // sin(0)
        let mut s_cur = s1;
        let (mut h_x, mut h_y, mut f_tw) = (0.0, 0.0, 0.0);
        for l in 0..n {
            if l < self.theta_x.len() {
                h_x += self.theta_x[l] * s_cur;
                h_y += self.theta_y[l] * s_cur;
            }
            if l < self.theta_f.len() {
                f_tw += self.theta_f[l] * s_cur;
            }
            let s_next = two_c1 * s_cur - s_prev;
            s_prev = s_cur;
            s_cur = s_next;
        }
        ControlSample { h_x, h_y, f_tw }
    }
}

/// The plain Rabi protocol: `Ω(t) = Ω_max sin(πt/t_f)` with the π-pulse
/// duration `t_f = π²/(2 Ω_max)`, no force.
pub fn rabi_protocol(omega_max: f64) -> SineModeProtocol {
    SineModeProtocol {
        t_f: PI * PI / (2.0 * omega_max),
        theta_x: vec![omega_max],
        theta_y: vec![0.0],
        theta_f: Vec::new(),
    }
}

/// Recoil-compensated Rabi protocol: the l = 1 Rabi pulse plus the exact
/// restoring-force curve
/// `f_tw(t) = -(η Ω_max/2) sin(πt/t_f) sin(π sin²(πt/2t_f))`.
///
/// For Ω_max/ω₀ < 1 the duration carries the Debye-Waller correction
/// `t_f = (π²/2Ω_max) e^{η²/2}`; above, `t_f = π²/(2Ω_max)`. The corrected
/// t_f is used uniformly inside the sine arguments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoilCompensatedProtocol {
    pub omega_max: f64,
    pub eta: f64,
    pub t_f: f64,
    /// +1 for the forward pulse, -1 for the sign-flipped restoring potential
    /// used on even pulses of a stroboscopic sequence.
    pub force_sign: f64,
}

impl RecoilCompensatedProtocol {
    pub fn force_flipped(&self) -> Self {
        RecoilCompensatedProtocol { force_sign: -self.force_sign, ..*self }
    }

    /// The exact force curve at time t (without the sign flip).
    pub fn force_curve(&self, t: f64) -> f64 {
        let half = PI * t / (2.0 * self.t_f);
        let s_half = half.sin();
        -(self.eta * self.omega_max / 2.0)
            * (PI * t / self.t_f).sin()
            * (PI * s_half * s_half).sin()
    }

    /// Project the exact force curve onto the first `n_f` sine modes and
    /// return a sine-mode protocol usable by the optimizer tooling. The
    /// truncated force visibly distorts the curve at small n_f; dynamics of
    /// the recoil-compensated protocol always use the exact curve.
    pub fn sine_projected(&self, n_f: usize) -> SineModeProtocol {
        let grid = 4096;
        let theta_f = (1..=n_f)
            .map(|l| {
                let mut acc = 0.0;
                for i in 0..=grid {
                    let t = self.t_f * i as f64 / grid as f64;
                    let w = if i == 0 || i == grid { 0.5 } else { 1.0 };
                    acc += w * (PI * l as f64 * t / self.t_f).sin() * self.force_curve(t);
                }
                acc * (self.t_f / grid as f64) * (2.0 / self.t_f)
            })
            .collect();
        SineModeProtocol {
            t_f: self.t_f,
            theta_x: vec![self.omega_max],
            theta_y: vec![0.0],
            theta_f,
        }
    }
}

impl ControlProtocol for RecoilCompensatedProtocol {
    fn duration(&self) -> f64 {
        self.t_f
    }

    fn controls_at(&self, t: f64) -> ControlSample {
        ControlSample {
            h_x: self.omega_max * (PI * t / self.t_f).sin(),
            h_y: 0.0,
            f_tw: self.force_sign * self.force_curve(t),
        }
    }
}

pub fn recoil_compensated_protocol(config: &ModelConfig) -> RecoilCompensatedProtocol {
    let base = PI * PI / (2.0 * config.omega_max);
    let t_f = if config.omega_max < 1.0 {
        base * (config.eta * config.eta / 2.0).exp()
    } else {
        base
    };
    RecoilCompensatedProtocol { omega_max: config.omega_max, eta: config.eta, t_f, force_sign: 1.0 }
}

/// Sine Rabi pulse plus a constant restoring force (used in the phase-space
/// comparison; a constant force is not expressible in the sine basis).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantForceRabi {
    pub omega_max: f64,
    pub t_f: f64,
    pub force: f64,
}

impl ControlProtocol for ConstantForceRabi {
    fn duration(&self) -> f64 {
        self.t_f
    }

    fn controls_at(&self, t: f64) -> ControlSample {
        ControlSample {
            h_x: self.omega_max * (PI * t / self.t_f).sin(),
            h_y: 0.0,
            f_tw: self.force,
        }
    }
}

/// Project samples on a uniform grid over `[0, t_f]` onto the first
/// `n_modes` sine modes with the orthogonality normalization 2/t_f.
pub fn project_sine_modes(samples: &[f64], t_f: f64, n_modes: usize) -> Vec<f64> {
    let n = samples.len();
    assert!(n >= 2, "need at least two samples");
    let dt = t_f / (n - 1) as f64;
    (1..=n_modes)
        .map(|l| {
            let mut acc = 0.0;
            for (i, f) in samples.iter().enumerate() {
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                acc += w * (PI * l as f64 * i as f64 / (n - 1) as f64).sin() * f;
            }
            acc * dt * (2.0 / t_f)
        })
        .collect()
}

/// First-order recoil-compensating force derived from an arbitrary Rabi
/// amplitude `h(t) = |Ω(t)|` sampled on a uniform grid over `[0, t_f]`:
/// `f(t) = -(η h(t)/2) sin(∫₀ᵗ h dτ)`, projected onto `n_f` sine modes.
pub fn projected_force(
    h_samples: &[f64],
    eta: f64,
    t_f: f64,
    n_f: usize,
) -> Result<Vec<f64>, ProtocolError> {
    if h_samples.len() < 2 {
        return Err(ProtocolError::EmptySamples);
    }
    if let Some((i, &h)) = h_samples.iter().enumerate().find(|(_, h)| **h < 0.0) {
        return Err(ProtocolError::NegativeAmplitude(h, i));
    }
    let n = h_samples.len();
    let dt = t_f / (n - 1) as f64;
    let mut area = 0.0;
    let f0: Vec<f64> = h_samples
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            if i > 0 {
                area += 0.5 * dt * (h_samples[i - 1] + h);
            }
            -(eta * h / 2.0) * area.sin()
        })
        .collect();
    Ok(project_sine_modes(&f0, t_f, n_f))
}

/// Pulse area `Θ(t_f) = ∫₀^{t_f} |Ω(τ)| dτ` by adaptive Simpson quadrature
/// to 1e-10 absolute.
pub fn pulse_area<P: ControlProtocol>(protocol: &P) -> f64 {
    let f = |t: f64| protocol.controls_at(t).rabi_abs();
    adaptive_simpson(&f, 0.0, protocol.duration(), 1e-10)
}

/// Normalized impulse `j = ∫₀^{t_f} f_tw dt` of a sine-mode protocol, by the
/// closed form `Σ_{l odd} θ_{f,l} 2 t_f/(πl)` (even modes integrate to zero).
pub fn normalized_impulse(protocol: &SineModeProtocol) -> f64 {
    protocol
        .theta_f
        .iter()
        .enumerate()
        .filter(|(l, _)| (l + 1) % 2 == 1)
        .map(|(l, th)| th * 2.0 * protocol.t_f / (PI * (l + 1) as f64))
        .sum()
}

/// Normalized impulse of an arbitrary protocol by quadrature.
pub fn normalized_impulse_quad<P: ControlProtocol>(protocol: &P) -> f64 {
    let f = |t: f64| protocol.controls_at(t).f_tw;
    adaptive_simpson(&f, 0.0, protocol.duration(), 1e-12)
}

/// Constraint evaluation on the grid `t_j = j t_f/100`, j = 0..=100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub amplitude_ok: bool,
    pub velocity_ok: bool,
    /// max_j |Ω(t_j)|, units of ω₀.
    pub worst_amplitude: f64,
    /// max_j |d f_tw/dt|(t_j), units of ω₀².
    pub worst_velocity: f64,
    pub violating_times: Vec<f64>,
}

impl ConstraintReport {
    pub fn ok(&self) -> bool {
        self.amplitude_ok && self.velocity_ok
    }
}

/// Check `|Ω(t_j)| ≤ Ω_max` and `|d f_tw/dt|(t_j) < v_max` on the 101-point
/// grid. The force derivative comes from the analytic sine series.
pub fn check_constraints(protocol: &SineModeProtocol, config: &ModelConfig) -> ConstraintReport {
    let mut report = ConstraintReport {
        amplitude_ok: true,
        velocity_ok: true,
        worst_amplitude: 0.0,
        worst_velocity: 0.0,
        violating_times: Vec::new(),
    };
    for j in 0..=100 {
        let t = protocol.t_f * j as f64 / 100.0;
        let amp = protocol.controls_at(t).rabi_abs();
        let vel = protocol.force_derivative(t).abs();
        report.worst_amplitude = report.worst_amplitude.max(amp);
        report.worst_velocity = report.worst_velocity.max(vel);
        let mut violated = false;
        if amp > config.omega_max {
            report.amplitude_ok = false;
            violated = true;
        }
        if vel >= config.v_max_dimless {
            report.velocity_ok = false;
            violated = true;
        }
        if violated {
            report.violating_times.push(t);
        }
    }
    report
}

/// Write a sampled time series (columns t, |Ω|, arg Ω, f_tw) as CSV.
pub fn write_time_series<P: ControlProtocol, W: Write>(
    protocol: &P,
    samples: usize,
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "t,omega_abs,omega_arg,f_tw")?;
    let t_f = protocol.duration();
    for i in 0..=samples {
        let t = t_f * i as f64 / samples as f64;
        let c = protocol.controls_at(t);
        writeln!(
            out,
            "{:.11e},{:.11e},{:.11e},{:.11e}",
            t,
            c.rabi_abs(),
            c.rabi_arg(),
            c.f_tw
        )?;
    }
    Ok(())
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
}

fn adaptive_simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    whole: f64,
    m: f64,
    fm: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let (left, lm, flm) = simpson(f, a, fa, m, fm);
    let (right, rm, frm) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_simpson_rec(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + adaptive_simpson_rec(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson quadrature with absolute tolerance.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // Seed with a few panels so symmetric integrands cannot fool the
    // first refinement estimate.
    let panels = 8;
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for i in 0..panels {
        let x0 = a + i as f64 * h;
        let x1 = x0 + h;
        let f0 = f(x0);
        let f1 = f(x1);
        let (whole, m, fm) = simpson(&f, x0, f0, x1, f1);
        acc += adaptive_simpson_rec(&f, x0, f0, x1, f1, whole, m, fm, tol / panels as f64, 48);
    }
    acc
}
