//! TOML run configuration. Keys carry explicit units
//! (`omega_max_over_omega0`, `gamma_z_times_2pi_over_omega0`, …) because the
//! underlying conventions mix ω₀ and ω₀/2π; unknown keys are rejected.

use serde::{Deserialize, Serialize};
use tweezer::dynamics::PropagationSettings;
use tweezer::hilbert::{ModelConfig, PhysicalParams};
use tweezer::pepr::OptimizerHyperparams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub propagation: PropagationSection,
    pub optimizer: Option<OptimizerSection>,
    pub sweep: Option<SweepSection>,
    pub dissipation: Option<DissipationSection>,
    pub strobo: Option<StroboSection>,
    pub calibrate: Option<CalibrateSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub eta: f64,
    pub omega_max_over_omega0: f64,
    /// γ_z in units of ω₀/2π.
    #[serde(default)]
    pub gamma_z_times_2pi_over_omega0: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Bound on |d f_tw/dt| in units of ω₀². Defaults to the Yb-derived
    /// value when no physical block is given.
    pub v_max_over_omega0_sq: Option<f64>,
    pub physical: Option<PhysicalSection>,
}

fn default_n_max() -> usize {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSection {
    pub omega0_rad_per_s: f64,
    pub mass_kg: f64,
    pub k_per_m: f64,
    /// Tweezer velocity bound, m/s. Default 500.
    pub v_max_m_per_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationSection {
    pub substeps_per_period: Option<usize>,
    pub observable_sample_count: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub alpha_dr: Option<f64>,
    pub alpha_tw: Option<f64>,
    pub n_it: Option<usize>,
    pub n_omega: Option<usize>,
    pub n_f: Option<usize>,
    pub seed: Option<u64>,
    pub eval_stride: Option<usize>,
    /// 0 disables stall halving.
    pub stall_window: Option<usize>,
    /// Transformation time as t_f Ω_max/π; required by `optimize`.
    pub tf_pulse_area_over_pi: Option<f64>,
    /// Learning-rate table produced by `calibrate`; when set and a rate is
    /// not given explicitly, rates come from the table.
    pub learning_rate_table: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub omega_max_values: Option<Vec<f64>>,
    pub tf_pulse_area_values: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationSection {
    pub omega_max_values: Vec<f64>,
    /// γ_z values in units of ω₀/2π.
    pub gamma_z_values: Vec<f64>,
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StroboSection {
    /// "rabi", "recoil-compensated", or "both" (default).
    pub family: Option<String>,
    pub n_reps: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    pub omega_max_values: Vec<f64>,
    pub seeds: Option<Vec<u64>>,
    pub scan_n_it: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let config: FileConfig = toml::from_str(&text)
            .map_err(|e| anyhow::anyhow!("cannot parse config {}: {e}", path.display()))?;
        Ok(config)
    }

    pub fn model(&self) -> anyhow::Result<ModelConfig> {
        let m = &self.model;
        let physical = m.physical.as_ref().map(|p| PhysicalParams {
            omega0_rad_per_s: p.omega0_rad_per_s,
            mass_kg: p.mass_kg,
            k_per_m: p.k_per_m,
        });
        let v_max_dimless = match (&m.v_max_over_omega0_sq, &m.physical) {
            (Some(v), _) => *v,
            (None, Some(p)) => physical
                .as_ref()
                .unwrap()
                .velocity_bound_dimless(p.v_max_m_per_s.unwrap_or(500.0)),
            (None, None) => 3.273e4,
        };
        let config = ModelConfig {
            eta: m.eta,
            omega_max: m.omega_max_over_omega0,
            gamma_z: m.gamma_z_times_2pi_over_omega0,
            n_max: m.n_max,
            v_max_dimless,
            physical,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn propagation(&self) -> PropagationSettings {
        let defaults = PropagationSettings::default();
        PropagationSettings {
            substeps_per_period: self
                .propagation
                .substeps_per_period
                .unwrap_or(defaults.substeps_per_period),
            observable_sample_count: self
                .propagation
                .observable_sample_count
                .unwrap_or(defaults.observable_sample_count),
        }
    }

    /// Hyperparameters with optional learning-rate table lookup at the
    /// given transformation time.
    pub fn hyperparams(&self, t_f: Option<f64>) -> anyhow::Result<OptimizerHyperparams> {
        let defaults = OptimizerHyperparams::default();
        let section = self.optimizer.clone().unwrap_or(OptimizerSection {
            alpha_dr: None,
            alpha_tw: None,
            n_it: None,
            n_omega: None,
            n_f: None,
            seed: None,
            eval_stride: None,
            stall_window: None,
            tf_pulse_area_over_pi: None,
            learning_rate_table: None,
        });
        let (mut alpha_dr, mut alpha_tw) =
            (defaults.alpha_dr, defaults.alpha_tw);
        if let (Some(table_path), Some(t_f)) = (&section.learning_rate_table, t_f) {
            let table = tweezer::pepr::CalibrationTable::load(table_path.as_ref())?;
            let rates = table.lookup(self.model.omega_max_over_omega0, t_f);
            if !rates.from_table {
                eprintln!(
                    "warning: ({}, t_f = {t_f:.4}) outside the calibration table; \
                     using conservative rates ({}, {})",
                    self.model.omega_max_over_omega0, rates.alpha_dr, rates.alpha_tw
                );
            }
            alpha_dr = rates.alpha_dr;
            alpha_tw = rates.alpha_tw;
        }
        Ok(OptimizerHyperparams {
            alpha_dr: section.alpha_dr.unwrap_or(alpha_dr),
            alpha_tw: section.alpha_tw.unwrap_or(alpha_tw),
            n_it: section.n_it.unwrap_or(defaults.n_it),
            n_omega: section.n_omega.unwrap_or(defaults.n_omega),
            n_f: section.n_f.unwrap_or(defaults.n_f),
            seed: section.seed.unwrap_or(defaults.seed),
            eval_stride: section.eval_stride.unwrap_or(defaults.eval_stride),
            stall_window: match section.stall_window {
                Some(0) => None,
                Some(w) => Some(w),
                None => defaults.stall_window,
            },
        })
    }
}

/// Parse a seed list: "7", "1,4,9", or an inclusive range "1..8".
pub fn parse_seeds(text: &str) -> anyhow::Result<Vec<u64>> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo.trim().parse()?;
        let hi: u64 = hi.trim().parse()?;
        anyhow::ensure!(lo <= hi, "empty seed range {text}");
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|s| Ok(s.trim().parse::<u64>()?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_forms() {
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert_eq!(parse_seeds("1,4,9").unwrap(), vec![1, 4, 9]);
        assert_eq!(parse_seeds("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert!(parse_seeds("5..2").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn minimal_config_parses() {
        let text = r#"
            [model]
            eta = 0.505
            omega_max_over_omega0 = 20.0
        "#;
        let config: FileConfig = toml::from_str(text).unwrap();
        let model = config.model().unwrap();
        assert_eq!(model.n_max, 3);
        assert!(model.gamma_z == 0.0);
        assert!((model.v_max_dimless - 3.273e4).abs() < 1.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"
            [model]
            eta = 0.505
            omega_max = 20.0
        "#;
        assert!(toml::from_str::<FileConfig>(text).is_err());
    }
}
