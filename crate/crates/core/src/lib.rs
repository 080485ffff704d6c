//! Simulation and pulse engineering of recoil-free qubit operations for a
//! single atom held in an optical tweezer.
//!
//! The model is a two-level atom coupled to one quantized motional mode of
//! the trap. A resonant Rabi drive imparts photon recoil through the
//! Lamb-Dicke coupling, leaking population out of the logical subspace
//! `{|↓,0⟩, |↑,0⟩}`. This crate provides
//!
//! - the truncated spin⊗motion Hilbert space and Lindblad generator
//!   ([`hilbert`]),
//! - a dense density-matrix propagator with fidelity and phase-space
//!   observables ([`dynamics`]),
//! - analytic pulse protocols, including a recoil-compensated Rabi pulse
//!   with an exact restoring-force curve ([`protocols`]),
//! - the PEPR stochastic pulse-engineering optimizer ([`pepr`]),
//! - study drivers that sweep the (Ω_max, t_f Ω_max) plane, scan dissipation
//!   rates, and run stroboscopic heating sequences ([`experiments`]).
//!
//! Units: ħ = 1 and ω₀ = 1 throughout. Frequencies are multiples of the trap
//! frequency ω₀, times are multiples of 1/ω₀. Physical quantities enter only
//! through [`hilbert::ModelConfig`] conversions.

pub mod dynamics;
pub mod experiments;
pub mod hilbert;
pub mod linalg;
pub mod pepr;
pub mod protocols;

pub use hilbert::ModelConfig;
pub use protocols::SineModeProtocol;
