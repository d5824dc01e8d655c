//! `ramsey` and `echo`: interference visibility vs inter-pulse delay.
//!
//! Both emit the same CSV shape (`delay_ps,p_b,visibility`): `p_b` is the
//! final biexciton population at the base phase of the last pulse, and
//! `visibility` the contrast fitted from a full final-pulse phase turn.
//! The static detuning ensemble configured under `ensemble.*` (plus the
//! base `dynamics.detuning`) is averaged before the fit.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use timebin_core::dynamics::{echo_scan, ramsey_scan, FringePoint};

use crate::config::{linspace, ExperimentConfig};
use crate::error::Result;
use crate::report::{write_atomic, ReportBuilder};

fn fringe_csv(points: &[FringePoint]) -> Vec<u8> {
    let mut s = String::from("delay_ps,p_b,visibility\n");
    for p in points {
        writeln!(s, "{},{},{}", p.delay, p.p_b, p.visibility).expect("string write");
    }
    s.into_bytes()
}

fn finish(
    command: &'static str,
    cfg: &ExperimentConfig,
    out_dir: &Path,
    start: Instant,
    rows: &[FringePoint],
) -> Result<()> {
    let csv_path = out_dir.join(format!("{command}.csv"));
    write_atomic(&csv_path, &fringe_csv(rows))?;
    let mut rb = ReportBuilder::new(command, cfg, start);
    rb.note_illustrative_defaults(cfg);
    rb.add_output(csv_path);
    rb.set_summary(serde_json::json!({
        "delay_points": rows.len(),
        "visibility_first": rows.first().map(|p| p.visibility),
        "visibility_last": rows.last().map(|p| p.visibility),
        "ensemble_samples": if cfg.ensemble.detuning_std > 0.0 { cfg.ensemble.n_samples } else { 1 },
    }));
    rb.finish(out_dir)?;
    Ok(())
}

pub fn run_ramsey(cfg: &ExperimentConfig, out_dir: &Path, start: Instant) -> Result<()> {
    let delays = linspace(
        cfg.ramsey.delay_min_ps,
        cfg.ramsey.delay_max_ps,
        cfg.ramsey.delay_points,
    );
    let rows = ramsey_scan(
        &cfg.dynamics.level_system(),
        cfg.timing.pulse_sigma_ps,
        &delays,
        cfg.ensemble.detuning_mean + cfg.dynamics.detuning,
        cfg.ensemble.detuning_std,
        cfg.ensemble.n_samples,
        &cfg.dynamics.dephasing(),
        cfg.dynamics.laser_phase,
    )?;
    finish("ramsey", cfg, out_dir, start, &rows)
}

pub fn run_echo(cfg: &ExperimentConfig, out_dir: &Path, start: Instant) -> Result<()> {
    let delays = linspace(cfg.echo.delay_min_ps, cfg.echo.delay_max_ps, cfg.echo.delay_points);
    let rows = echo_scan(
        &cfg.dynamics.level_system(),
        cfg.timing.pulse_sigma_ps,
        &delays,
        cfg.ensemble.detuning_mean + cfg.dynamics.detuning,
        cfg.ensemble.detuning_std,
        cfg.ensemble.n_samples,
        &cfg.dynamics.dephasing(),
    )?;
    finish("echo", cfg, out_dir, start, &rows)
}
