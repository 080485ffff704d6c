// Scratch probe for optimizer behavior at the acceptance operating points.
use std::f64::consts::PI;
use std::time::Instant;
use tweezer::dynamics::{PropagationSettings, System};
use tweezer::experiments::evaluate_protocol;
use tweezer::hilbert::ModelConfig;
use tweezer::pepr::{optimize, OptimizerHyperparams};
use tweezer::protocols::{normalized_impulse, rabi_protocol, recoil_compensated_protocol};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("baselines");
    let settings = PropagationSettings::default();

    match mode {
        "baselines" => {
            for omega in [0.165, 0.428, 1.0, 20.0, 38.83, 200.0] {
                let config = ModelConfig::dimensionless(0.505, omega, 0.0, 3);
                let sys = System::new(&config).unwrap();
                let f0 = evaluate_protocol(&sys, &rabi_protocol(omega), &settings).unwrap();
                let comp = recoil_compensated_protocol(&config);
                let ff = evaluate_protocol(&sys, &comp, &settings).unwrap();
                println!("omega={omega:8.3}  1-F0={f0:.6e}  1-Ff={ff:.6e}");
            }
        }
        "scan" => {
            // probe scan omega tf_area n_it alpha_dr alpha_tw seed...
            let omega: f64 = args[2].parse().unwrap();
            let area: f64 = args[3].parse().unwrap();
            let n_it: usize = args[4].parse().unwrap();
            let alpha_dr: f64 = args[5].parse().unwrap();
            let alpha_tw: f64 = args[6].parse().unwrap();
            let seeds: Vec<u64> = args[7..].iter().map(|s| s.parse().unwrap()).collect();
            let config = ModelConfig::dimensionless(0.505, omega, 0.0, 3);
            let t_f = area * PI / omega;
            for seed in seeds {
                let start = Instant::now();
                let hyper = OptimizerHyperparams {
                    alpha_dr,
                    alpha_tw,
                    n_it,
                    seed,
                    eval_stride: 20,
                    ..Default::default()
                };
                let traj = optimize(&config, t_f, &hyper, &settings).unwrap();
                println!(
                    "omega={omega} area={area} a_dr={alpha_dr} a_tw={alpha_tw} seed={seed} \
                     best={:.4e} j={:+.4} acc={} rej={} halv={} jit={:.4} dt={:.1}s",
                    traj.best_infidelity,
                    normalized_impulse(&traj.best_protocol),
                    traj.accepted,
                    traj.rejected,
                    traj.halvings,
                    tweezer::pepr::trace_instability(&traj),
                    start.elapsed().as_secs_f64()
                );
            }
        }
        "gamma" => {
            // probe gamma omega gamma_z n_it alpha_dr alpha_tw seeds...
            let omega: f64 = args[2].parse().unwrap();
            let gamma: f64 = args[3].parse().unwrap();
            let n_it: usize = args[4].parse().unwrap();
            let alpha_dr: f64 = args[5].parse().unwrap();
            let alpha_tw: f64 = args[6].parse().unwrap();
            let seeds: Vec<u64> = args[7..].iter().map(|s| s.parse().unwrap()).collect();
            let config = ModelConfig::dimensionless(0.505, omega, gamma, 3);
            let t_f = 3.5 * PI / omega;
            let sys = System::new(&config).unwrap();
            let ff =
                evaluate_protocol(&sys, &recoil_compensated_protocol(&config), &settings).unwrap();
            println!("omega={omega} gamma={gamma}: 1-Ff={ff:.4e}  gamma*t_f={:.4e}", config.gamma_internal() * t_f);
            let mut best = f64::INFINITY;
            for seed in seeds {
                let hyper = OptimizerHyperparams {
                    alpha_dr,
                    alpha_tw,
                    n_it,
                    seed,
                    eval_stride: 20,
                    ..Default::default()
                };
                let traj = optimize(&config, t_f, &hyper, &settings).unwrap();
                println!("  seed={seed} best={:.4e}", traj.best_infidelity);
                best = best.min(traj.best_infidelity);
            }
            println!("  ensemble best = {best:.4e}");
        }
        "strobo" => {
            let n_reps: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(500);
            let config = ModelConfig::dimensionless(0.505, 20.0, 0.0, 3);
            for family in [
                tweezer::experiments::ProtocolFamily::Rabi,
                tweezer::experiments::ProtocolFamily::RecoilCompensated,
            ] {
                let start = Instant::now();
                let series =
                    tweezer::experiments::strobo_run(&config, family, n_reps, &settings).unwrap();
                let max = series.iter().map(|r| r.infidelity).fold(0.0_f64, f64::max);
                let first = series[0].infidelity;
                println!(
                    "{family:?}: 1-F(1)={first:.4e} max={max:.4e} dt={:.1}s",
                    start.elapsed().as_secs_f64()
                );
                // local minima positions among the first 120 records
                let vals: Vec<f64> = series.iter().map(|r| r.infidelity).collect();
                let minima: Vec<usize> = (1..vals.len().min(120) - 1)
                    .filter(|&i| vals[i] < vals[i - 1] && vals[i] < vals[i + 1])
                    .map(|i| i + 1)
                    .collect();
                println!("  minima n: {minima:?}");
                if let tweezer::experiments::ProtocolFamily::Rabi = family {
                    let crossing: Vec<usize> = series
                        .iter()
                        .filter(|r| r.infidelity > first)
                        .map(|r| r.n)
                        .take(5)
                        .collect();
                    println!("  first n with 1-F(n) > 1-F(1): {crossing:?}");
                }
            }
        }
        other => eprintln!("unknown mode {other}"),
    }
}
