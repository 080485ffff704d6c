#![allow(dead_code)]

//! Shared test oracles: finite-difference fidelity gradients and the
//! Laguerre closed form of the displacement operator. These stay
//! independent of the implementation paths they check.

use tweezer::dynamics::{evolve, infidelity, PropagationSettings, System};
use tweezer::pepr::ControlChannel;
use tweezer::protocols::{ControlProtocol, ControlSample, SineModeProtocol};

/// A protocol with one channel shifted by a constant offset.
pub struct OffsetChannel<'a> {
    pub base: &'a SineModeProtocol,
    pub channel: ControlChannel,
    pub offset: f64,
}

impl ControlProtocol for OffsetChannel<'_> {
    fn duration(&self) -> f64 {
        self.base.t_f
    }

    fn controls_at(&self, t: f64) -> ControlSample {
        let mut c = self.base.controls_at(t);
        match self.channel {
            ControlChannel::RabiX => c.h_x += self.offset,
            ControlChannel::RabiY => c.h_y += self.offset,
            ControlChannel::Force => c.f_tw += self.offset,
        }
        c
    }
}

/// Final fidelity with a rectangular kick of integrated strength `eps`
/// applied to one channel on `[t_r - w/2, t_r + w/2]`. The kick window is
/// integrated as its own segment so the discontinuity never falls inside an
/// integration step.
pub fn kicked_fidelity(
    sys: &System,
    protocol: &SineModeProtocol,
    channel: ControlChannel,
    t_r: f64,
    width: f64,
    eps: f64,
    settings: &PropagationSettings,
) -> f64 {
    let t_f = protocol.t_f;
    let a = (t_r - width / 2.0).max(0.0);
    let b = (t_r + width / 2.0).min(t_f);
    let amp = eps / (b - a);
    let rho = evolve(sys, protocol, &sys.initial_state(), 0.0, a, settings).unwrap();
    let kicked = OffsetChannel { base: protocol, channel, offset: amp };
    let rho = evolve(sys, &kicked, &rho, a, b, settings).unwrap();
    let rho = evolve(sys, protocol, &rho, b, t_f, settings).unwrap();
    1.0 - infidelity(&rho, &sys.target_state())
}

/// Central finite difference dF/dε of the final fidelity under a narrow
/// rectangular kick at t_r.
pub fn fd_fidelity_gradient(
    sys: &System,
    protocol: &SineModeProtocol,
    channel: ControlChannel,
    t_r: f64,
    settings: &PropagationSettings,
) -> f64 {
    let width = protocol.t_f / 4096.0;
    let eps = 1e-5;
    let fp = kicked_fidelity(sys, protocol, channel, t_r, width, eps, settings);
    let fm = kicked_fidelity(sys, protocol, channel, t_r, width, -eps, settings);
    (fp - fm) / (2.0 * eps)
}

/// Generalized Laguerre polynomial L_n^{(k)}(x) by the three-term recurrence.
pub fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let kf = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + kf - x;
    for m in 1..n {
        let mf = m as f64;
        let next = ((2.0 * mf + 1.0 + kf - x) * cur - (mf + kf) * prev) / (mf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Closed-form matrix element `⟨m| e^{iη(a+a†)} |n⟩` for m ≥ n:
/// `e^{-η²/2} (iη)^{m-n} sqrt(n!/m!) L_n^{(m-n)}(η²)`.
pub fn displacement_element(m: usize, n: usize, eta: f64) -> num_complex::Complex64 {
    assert!(m >= n);
    let k = m - n;
    let mut fact_ratio = 1.0; // sqrt(n!/m!)
    for j in (n + 1)..=m {
        fact_ratio /= (j as f64).sqrt();
    }
    let i_eta = num_complex::Complex64::new(0.0, eta);
    i_eta.powu(k as u32)
        * ((-eta * eta / 2.0).exp() * fact_ratio * laguerre(n, k, eta * eta))
}
