//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the measured values. Run with `--nocapture` to see
//! every line; failures repeat their line in the panic message.
//!
//! Known red: criterion 5's minima-position clause and criterion 6's
//! displacement-ratio clause assert literature values that are inconsistent
//! with the defining protocol equations; the measured values and the
//! analysis are printed by the tests.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use tweezer::dynamics::{
    evolve, infidelity, motional_populations, DensityOperator, PropagationSettings, System,
};
use tweezer::experiments::{phase_space_study, strobo_run, ProtocolFamily};
use tweezer::hilbert::{build_displacement, ModelConfig};
use tweezer::linalg::hermiticity_defect;
use tweezer::pepr::{
    init_parameters, optimize, susceptibility, ControlChannel, OptimizerHyperparams,
};
use tweezer::protocols::{
    normalized_impulse, normalized_impulse_quad, rabi_protocol, recoil_compensated_protocol,
    ControlProtocol, SineModeProtocol,
};

const ETA: f64 = 0.505;

fn report(criterion: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {verdict} — {detail}");
    assert!(pass, "criterion {criterion}: {verdict} — {detail}");
}

fn settings() -> PropagationSettings {
    PropagationSettings::default()
}

#[test]
fn criterion_01_exact_limit_pi_pulse() {
    let start = Instant::now();
    let config = ModelConfig::dimensionless(0.0, 1.0, 0.0, 3);
    let sys = System::new(&config).unwrap();
    let protocol = rabi_protocol(1.0);
    let rho = evolve(&sys, &protocol, &sys.initial_state(), 0.0, protocol.t_f, &settings())
        .unwrap();
    let err = infidelity(&rho, &sys.target_state());
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "01 [exact-limit pi pulse]",
        err < 1e-8 && elapsed < 1.0,
        &format!("1-F = {err:.3e} (< 1e-8), runtime {elapsed:.3} s (< 1 s)"),
    );
}

#[test]
fn criterion_02_displacement_operator_oracle() {
    let start = Instant::now();
    let d = build_displacement(ETA, 20).unwrap();
    let mut worst = 0.0_f64;
    for m in 0..4 {
        for n in 0..4 {
            let expect = if m >= n {
                common::displacement_element(m, n, ETA)
            } else {
                // The operator is complex symmetric (symmetric generator).
                common::displacement_element(n, m, ETA)
            };
            worst = worst.max((d[[m, n]] - expect).norm());
        }
    }
    let vacuum = d[[0, 0]].re;
    let debye_waller = (-ETA * ETA / 2.0).exp();
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "02 [displacement-operator oracle]",
        worst < 1e-10
            && (vacuum - debye_waller).abs() < 1e-10
            && (vacuum - 0.88029).abs() < 1e-4
            && elapsed < 1.0,
        &format!(
            "max |Δ| on 4×4 block = {worst:.3e} (< 1e-10), ⟨0|D|0⟩ = {vacuum:.6} \
             (e^(−η²/2) = {debye_waller:.6}), runtime {elapsed:.3} s"
        ),
    );
}

#[test]
fn criterion_03_impulse_identity() {
    let start = Instant::now();
    let config = ModelConfig::dimensionless(ETA, 20.0, 0.0, 3);
    let protocol = recoil_compensated_protocol(&config);
    let j = normalized_impulse_quad(&protocol);
    // Substitution u = π sin²(πt/2t_f) gives ∫ f_tw = −2ηΩ t_f/π² = −η here.
    let closed_form = -2.0 * ETA * config.omega_max * protocol.t_f / (PI * PI);
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "03 [impulse identity]",
        (j + ETA).abs() < 1e-10 && (closed_form + ETA).abs() < 1e-12 && elapsed < 1.0,
        &format!("∫f_tw = {j:.12} vs -η = {:.12} (|Δ| < 1e-10), runtime {elapsed:.3} s", -ETA),
    );
}

#[test]
fn criterion_04_recoil_compensated_benchmark() {
    let start = Instant::now();
    let config = ModelConfig::dimensionless(ETA, 20.0, 0.0, 3);
    let sys = System::new(&config).unwrap();
    let protocol = recoil_compensated_protocol(&config);
    let rho = evolve(&sys, &protocol, &sys.initial_state(), 0.0, protocol.t_f, &settings())
        .unwrap();
    let err = infidelity(&rho, &sys.target_state());
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "04 [recoil-compensated benchmark]",
        (err - 9e-4).abs() < 0.3 * 9e-4 && elapsed < 10.0,
        &format!("1-F_f = {err:.4e} vs 9e-4 ± 30%, runtime {elapsed:.3} s (< 10 s)"),
    );
}

#[test]
fn criterion_05_stroboscopic_heating() {
    let start = Instant::now();
    let config = ModelConfig::dimensionless(ETA, 20.0, 0.0, 3);
    let rabi = strobo_run(&config, ProtocolFamily::Rabi, 500, &settings()).unwrap();
    let comp = strobo_run(&config, ProtocolFamily::RecoilCompensated, 500, &settings()).unwrap();
    let vals: Vec<f64> = rabi.iter().map(|r| r.infidelity).collect();

    // Clause 1: local minima of the Rabi family at n = 10, 30, 50.
    let minima: Vec<usize> = (1..vals.len() - 1)
        .filter(|&i| vals[i] < vals[i - 1] && vals[i] < vals[i + 1])
        .map(|i| i + 1)
        .collect();
    let minima_at_predicted = [10_usize, 30, 50]
        .iter()
        .all(|&p| minima.iter().any(|&m| m.abs_diff(p) <= 2));

    // Clause 2: heating exceeds the first-pulse infidelity in [300, 400].
    let crossing = (300..=400).any(|n| vals[n - 1] > vals[0]);

    // Clause 3: the compensated family stays bounded for all n ≤ 500.
    let comp_max = comp.iter().map(|r| r.infidelity).fold(0.0_f64, f64::max);
    let bounded = comp_max < 3.5e-3 * 1.3;

    let elapsed = start.elapsed().as_secs_f64();
    let detail = format!(
        "minima at {:?} vs predicted 10, 30, 50 ({}); some 1-F_0(n) > 1-F_0(1) = {:.3e} \
         in [300,400] ({}); compensated max = {comp_max:.3e} < 4.55e-3 ({}); \
         runtime {elapsed:.1} s (< 600 s). The observed minima spacing 2Ω_max/(πω₀) = 12.7 \
         follows from the beat period π/(ω₀ t_f) of the sine pulse t_f = π²/(2Ω_max); \
         the predicted spacing 20 corresponds to square-pulse timing t_f = π/Ω_max.",
        &minima[..minima.len().min(6)],
        if minima_at_predicted { "ok" } else { "failed" },
        vals[0],
        if crossing { "ok" } else { "failed" },
        if bounded { "ok" } else { "failed" },
    );
    report(
        "05 [stroboscopic heating]",
        minima_at_predicted && crossing && bounded && elapsed < 600.0,
        &detail,
    );
}

#[test]
fn criterion_06_phase_space_ratios() {
    let start = Instant::now();
    let config = ModelConfig::dimensionless(ETA, 200.0, 0.0, 3);
    let study = phase_space_study(&config, &settings()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let displacement_ok = (30.0..=300.0).contains(&study.displacement_ratio);
    let momentum_ok = (300.0..=3000.0).contains(&study.momentum_ratio);
    report(
        "06 [phase-space ratios]",
        displacement_ok && momentum_ok && elapsed < 60.0,
        &format!(
            "displacement ratio = {:.1} vs [30, 300] ({}); momentum ratio = {:.1} vs \
             [300, 3000] ({}); runtime {elapsed:.2} s (< 60 s). The exact force curve \
             sampled analytically suppresses the displacement beyond the literature \
             band; the momentum ratio lands inside it.",
            study.displacement_ratio,
            if displacement_ok { "ok" } else { "failed" },
            study.momentum_ratio,
            if momentum_ok { "ok" } else { "failed" },
        ),
    );
}

#[test]
fn criterion_07_gradient_oracle_equivalence() {
    let start = Instant::now();
    let settings = settings();
    let channels = [ControlChannel::RabiX, ControlChannel::RabiY, ControlChannel::Force];
    let mut rng = ChaCha12Rng::seed_from_u64(2024);
    let mut worst_rel = 0.0_f64;
    let mut checked = 0;
    'outer: for (case, omega_max) in
        [0.165, 0.428, 1.0, 20.0, 38.83].into_iter().enumerate()
    {
        let config = ModelConfig::dimensionless(ETA, omega_max, 0.0, 3);
        let sys = System::new(&config).unwrap();
        let t_f = 1.5 * PI / omega_max;
        let hyper = OptimizerHyperparams { n_omega: 6, n_f: 3, ..Default::default() };
        for rep in 0..4 {
            let mut protocol = {
                let mut seed_rng = ChaCha12Rng::seed_from_u64(500 + 10 * case as u64 + rep);
                init_parameters(&config, t_f, &hyper, &mut seed_rng).unwrap()
            };
            for th in protocol.theta_f.iter_mut() {
                *th = 0.05 * ETA * omega_max * (rng.random::<f64>() - 0.5);
            }
            let channel = channels[(case + rep as usize) % 3];
            let t_r = rng.random_range(0.05 * t_f..0.95 * t_f);
            let rho_tr =
                evolve(&sys, &protocol, &sys.initial_state(), 0.0, t_r, &settings).unwrap();
            let chi =
                susceptibility(&sys, &protocol, channel, t_r, &rho_tr, &settings).unwrap();
            let fd = common::fd_fidelity_gradient(&sys, &protocol, channel, t_r, &settings);
            let scale = chi.abs().max(fd.abs());
            checked += 1;
            if scale < 1e-9 {
                continue;
            }
            let rel = (chi + fd).abs() / scale;
            worst_rel = worst_rel.max(rel);
            if rel > 0.01 {
                break 'outer;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "07 [gradient-oracle equivalence]",
        checked == 20 && worst_rel <= 0.01 && elapsed < 300.0,
        &format!(
            "{checked}/20 susceptibilities vs central finite differences, worst relative \
             deviation {worst_rel:.4e} (< 1e-2), runtime {elapsed:.1} s (< 300 s)"
        ),
    );
}

#[test]
fn criterion_08_optimizer_efficacy() {
    let start = Instant::now();
    let settings = settings();

    // Intermediate regime: best of 8 seeds at 2e4 accepted updates beats the
    // plain Rabi protocol by at least 1e3.
    let config_a = ModelConfig::dimensionless(ETA, 0.428, 0.0, 3);
    let sys_a = System::new(&config_a).unwrap();
    let rabi = rabi_protocol(config_a.omega_max);
    let baseline = {
        let rho =
            evolve(&sys_a, &rabi, &sys_a.initial_state(), 0.0, rabi.t_f, &settings).unwrap();
        infidelity(&rho, &sys_a.target_state())
    };
    let t_f_a = 1.5 * PI / config_a.omega_max;
    let best_a = (1..=8)
        .map(|seed| {
            let hyper = OptimizerHyperparams {
                alpha_dr: 0.61,
                alpha_tw: 0.21,
                n_it: 20_000,
                seed,
                ..Default::default()
            };
            optimize(&config_a, t_f_a, &hyper, &settings).unwrap().best_infidelity
        })
        .fold(f64::INFINITY, f64::min);
    let improvement = baseline / best_a;

    // Fast regime: the optimized impulse converges to -η within 15%.
    let config_b = ModelConfig::dimensionless(ETA, 38.83, 0.0, 3);
    let t_f_b = 3.0 * PI / config_b.omega_max;
    let best_b = (1..=4)
        .map(|seed| {
            let hyper = OptimizerHyperparams {
                alpha_dr: 1.61,
                alpha_tw: 0.21,
                n_it: 10_000,
                seed,
                ..Default::default()
            };
            optimize(&config_b, t_f_b, &hyper, &settings).unwrap()
        })
        .min_by(|a, b| a.best_infidelity.total_cmp(&b.best_infidelity))
        .unwrap();
    let impulse = normalized_impulse(&best_b.best_protocol);
    let impulse_ok = (impulse + ETA).abs() <= 0.15 * ETA;

    let elapsed = start.elapsed().as_secs_f64();
    report(
        "08 [optimizer efficacy]",
        improvement >= 1e3 && impulse_ok && elapsed < 7200.0,
        &format!(
            "intermediate cell: best 1-F = {best_a:.3e} vs Rabi baseline {baseline:.3e} \
             ({improvement:.0}× ≥ 1e3); fast cell: impulse = {impulse:.4} vs -η = {:.4} \
             (within 15%); runtime {elapsed:.0} s (< 7200 s)",
            -ETA
        ),
    );
}

#[test]
fn criterion_09_dissipation_floor() {
    let start = Instant::now();
    let settings = settings();
    let omega_max = 1.0;
    let t_f = 3.5 * PI / omega_max;
    let floor = |gamma_z: f64| {
        let config = ModelConfig::dimensionless(ETA, omega_max, gamma_z, 3);
        (1..=6)
            .map(|seed| {
                let hyper = OptimizerHyperparams {
                    alpha_dr: 1.01,
                    alpha_tw: 0.61,
                    n_it: 10_000,
                    seed,
                    ..Default::default()
                };
                optimize(&config, t_f, &hyper, &settings).unwrap().best_infidelity
            })
            .fold(f64::INFINITY, f64::min)
    };
    let low = floor(2e-4);
    let high = floor(4e-4);
    let ratio = high / low;
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "09 [dissipation floor]",
        (1.5..=2.5).contains(&ratio) && elapsed < 7200.0,
        &format!(
            "optimal floors {low:.3e} (γ_z = 2e-4) and {high:.3e} (γ_z = 4e-4), \
             doubling ratio {ratio:.3} vs [1.5, 2.5]; runtime {elapsed:.0} s (< 7200 s)"
        ),
    );
}

#[test]
fn criterion_10_numerical_health() {
    let start = Instant::now();
    let config = ModelConfig::dimensionless(ETA, 20.0, 0.0, 3);
    let sys = System::new(&config).unwrap();
    let protocol = recoil_compensated_protocol(&config);

    let rho = evolve(&sys, &protocol, &sys.initial_state(), 0.0, protocol.t_f, &settings())
        .unwrap();
    let trace_err = (tweezer::linalg::trace(rho.matrix()).re - 1.0).abs();
    let herm_err = hermiticity_defect(rho.matrix());
    let purity_err = (rho.purity() - 1.0).abs();

    // Step-halving convergence on the exact-limit pulse and the benchmark.
    let halve = |config: &ModelConfig, protocol: &dyn ControlProtocol| {
        let sys = System::new(config).unwrap();
        let run = |substeps: usize| {
            let s = PropagationSettings::with_substeps(substeps);
            let rho = evolve(&sys, protocol, &sys.initial_state(), 0.0, protocol.duration(), &s)
                .unwrap();
            infidelity(&rho, &sys.target_state())
        };
        (run(200), run(400))
    };
    let eta0 = ModelConfig::dimensionless(0.0, 1.0, 0.0, 3);
    let (c1_coarse, c1_fine) = halve(&eta0, &rabi_protocol(1.0));
    // Near the exact limit the infidelity is pure integrator noise (h⁴
    // scaling), so halving shrinks it ~16×; convergence there means both
    // values sit two decades below the 1e-8 requirement.
    let c1_ok = (c1_coarse - c1_fine).abs() < 0.01 * c1_coarse.abs()
        || c1_coarse.abs().max(c1_fine.abs()) < 1e-10;
    let (c4_coarse, c4_fine) = halve(&config, &protocol);
    let c4_ok = (c4_coarse - c4_fine).abs() < 0.01 * c4_coarse.abs();

    // Populations sum to the trace.
    let pop_sum: f64 = motional_populations(&rho).iter().sum();
    let pop_ok = (pop_sum - 1.0).abs() < 1e-9;

    let elapsed = start.elapsed().as_secs_f64();
    report(
        "10 [numerical health]",
        trace_err < 1e-9
            && herm_err < 1e-10
            && purity_err < 1e-8
            && c1_ok
            && c4_ok
            && pop_ok
            && elapsed < 300.0,
        &format!(
            "trace drift {trace_err:.2e} (< 1e-9), hermiticity {herm_err:.2e} (< 1e-10), \
             purity drift {purity_err:.2e} (< 1e-8), halving Δ: exact-limit \
             {:.2e}, benchmark {:.2e} (< 1% rel); populations sum error {:.2e}; \
             runtime {elapsed:.1} s (< 300 s)",
            (c1_coarse - c1_fine).abs(),
            (c4_coarse - c4_fine).abs(),
            (pop_sum - 1.0).abs(),
        ),
    );
}

/// Reduced-scale echoes of the spec examples that belong with the
/// acceptance run: population diagnostics after the uncompensated pulse.
#[test]
fn rabi_pulse_leaks_into_motional_states() {
    let config = ModelConfig::dimensionless(ETA, 20.0, 0.0, 3);
    let sys = System::new(&config).unwrap();
    let protocol = rabi_protocol(config.omega_max);
    let rho = evolve(&sys, &protocol, &sys.initial_state(), 0.0, protocol.t_f, &settings())
        .unwrap();
    let err = infidelity(&rho, &sys.target_state());
    let populations = motional_populations(&rho);
    let leaked: f64 = populations[1..].iter().sum();
    assert!(populations[0] < 1.0);
    // Motional leakage accounts for most of the infidelity scale.
    assert!(
        leaked > 0.3 * err && leaked < 1.5 * err,
        "leaked {leaked:.3e} vs infidelity {err:.3e}"
    );
}

/// Zero-iteration optimization degenerates to evaluating the initialization
/// and still records a valid protocol.
#[test]
fn zero_iteration_optimize_reports_initialization() {
    let config = ModelConfig::dimensionless(ETA, 1.0, 0.0, 3);
    let hyper = OptimizerHyperparams { n_it: 0, seed: 3, ..Default::default() };
    let traj = optimize(&config, 1.5 * PI, &hyper, &settings()).unwrap();
    assert_eq!(traj.accepted, 0);
    assert_eq!(traj.best_infidelity, traj.checkpoints[0].infidelity);
    let _ = SineModeProtocol::new(
        traj.best_protocol.t_f,
        traj.best_protocol.theta_x.clone(),
        traj.best_protocol.theta_y.clone(),
        traj.best_protocol.theta_f.clone(),
    )
    .unwrap();
}
