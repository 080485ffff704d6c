// Scratch: inspect strobo series values.
use tweezer::dynamics::PropagationSettings;
use tweezer::experiments::{strobo_run, ProtocolFamily};
use tweezer::hilbert::ModelConfig;

fn main() {
    let settings = PropagationSettings::default();
    let config = ModelConfig::dimensionless(0.505, 20.0, 0.0, 3);
    let series = strobo_run(&config, ProtocolFamily::Rabi, 500, &settings).unwrap();
    let vals: Vec<f64> = series.iter().map(|r| r.infidelity).collect();
    println!("first = {:.4e}", vals[0]);
    for (label, lo, hi) in [("early", 0, 40), ("mid", 295, 405)] {
        let window = &vals[lo..hi.min(vals.len())];
        let min = window.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = window.iter().cloned().fold(0.0_f64, f64::max);
        println!("{label} [{lo}..{hi}]: min={min:.4e} max={max:.4e}");
    }
    // minima values at the observed dip positions
    for n in [7, 20, 32, 45, 58] {
        println!("1-F({n}) = {:.4e}", vals[n - 1]);
    }
    let above: Vec<usize> = (300..=400).filter(|&n| vals[n - 1] > vals[0]).take(8).collect();
    println!("n in [300,400] with 1-F(n) > 1-F(1): {} values, first {:?}", (300..=400).filter(|&n| vals[n-1] > vals[0]).count(), above);
}
