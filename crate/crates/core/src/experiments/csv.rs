//! CSV emitters for the study outputs. Numbers carry 12 significant digits.

use std::io::Write;
use std::path::Path;

use super::{ImpulseMap, PhaseSpaceStudy, StroboRecord, SweepCellRecord};

fn create(path: &Path) -> std::io::Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

macro_rules! num {
    ($v:expr) => {
        format_args!("{:.11e}", $v)
    };
}

/// Regime-sweep grid: one row per cell with the optimized and baseline
/// infidelities.
pub fn write_sweep_grid(records: &[SweepCellRecord], path: &Path) -> std::io::Result<()> {
    let mut out = create(path)?;
    writeln!(
        out,
        "omega_max_over_omega0,tf_pulse_area_over_pi,log10_best_infidelity,\
         best_infidelity,baseline_rabi,baseline_compensated"
    )?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            num!(r.key.omega_max),
            num!(r.key.tf_pulse_area),
            num!(r.best_infidelity.max(1e-300).log10()),
            num!(r.best_infidelity),
            num!(r.baseline_rabi),
            num!(r.baseline_compensated)
        )?;
    }
    out.flush()
}

/// Dissipation lines: one row per (Ω_max, γ_z) point.
pub fn write_dissipation_lines(records: &[SweepCellRecord], path: &Path) -> std::io::Result<()> {
    let mut out = create(path)?;
    writeln!(
        out,
        "omega_max_over_omega0,gamma_z_times_2pi_over_omega0,\
         one_minus_f_compensated,one_minus_f_optimized"
    )?;
    let mut rows: Vec<&SweepCellRecord> = records.iter().collect();
    rows.sort_by(|a, b| {
        (a.key.gamma_z, a.key.omega_max)
            .partial_cmp(&(b.key.gamma_z, b.key.omega_max))
            .unwrap()
    });
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            num!(r.key.omega_max),
            num!(r.key.gamma_z),
            num!(r.baseline_compensated),
            num!(r.best_infidelity)
        )?;
    }
    out.flush()
}

/// Impulse map grid plus the fixed pulse-area slice with the -η reference.
pub fn write_impulse_map(map: &ImpulseMap, grid_path: &Path, slice_path: &Path) -> std::io::Result<()> {
    let mut out = create(grid_path)?;
    writeln!(out, "omega_max_over_omega0,tf_pulse_area_over_pi,impulse")?;
    for (omega, area, j) in &map.cells {
        writeln!(out, "{},{},{}", num!(omega), num!(area), num!(j))?;
    }
    out.flush()?;
    let mut out = create(slice_path)?;
    writeln!(out, "omega_max_over_omega0,impulse,minus_eta")?;
    for (omega, j) in &map.slice {
        writeln!(out, "{},{},{}", num!(omega), num!(j), num!(map.minus_eta))?;
    }
    out.flush()
}

/// Stroboscopic series: one row per recorded odd pulse.
pub fn write_strobo_series(records: &[StroboRecord], path: &Path) -> std::io::Result<()> {
    let mut out = create(path)?;
    writeln!(out, "family,n,infidelity")?;
    for r in records {
        writeln!(out, "{:?},{},{}", r.family, r.n, num!(r.infidelity))?;
    }
    out.flush()
}

/// Phase-space quadrature series of both protocols.
pub fn write_phase_space(study: &PhaseSpaceStudy, path: &Path) -> std::io::Result<()> {
    let mut out = create(path)?;
    writeln!(out, "protocol,t,position_quadrature,momentum_quadrature")?;
    for (t, x, p) in &study.constant_force {
        writeln!(out, "constant_force,{},{},{}", num!(t), num!(x), num!(p))?;
    }
    for (t, x, p) in &study.compensated {
        writeln!(out, "recoil_compensated,{},{},{}", num!(t), num!(x), num!(p))?;
    }
    out.flush()
}

/// Laboratory-time re-axis of sweep records.
pub fn write_lab_time(view: &[(f64, f64, f64)], path: &Path) -> std::io::Result<()> {
    let mut out = create(path)?;
    writeln!(out, "omega_max_over_omega0,tf_omega0_over_pi,best_infidelity")?;
    for (omega, tf, inf) in view {
        writeln!(out, "{},{},{}", num!(omega), num!(tf), num!(inf))?;
    }
    out.flush()
}
