// Scratch: min eigenvalue of the benchmark's final state.
use tweezer::dynamics::{evolve, DensityOperator, PropagationSettings, System};
use tweezer::hilbert::ModelConfig;
use tweezer::linalg::eigvals_hermitian;
use tweezer::protocols::recoil_compensated_protocol;

fn main() {
    let config = ModelConfig::dimensionless(0.505, 20.0, 0.0, 3);
    let sys = System::new(&config).unwrap();
    let p = recoil_compensated_protocol(&config);
    let rho = evolve(&sys, &p, &sys.initial_state(), 0.0, p.t_f, &PropagationSettings::default()).unwrap();
    let eigs = eigvals_hermitian(rho.matrix());
    println!("eigs: {eigs:?}");
    println!("try_new: {:?}", DensityOperator::try_new(rho.matrix().clone()).err());
}
