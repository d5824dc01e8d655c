//! `rabi`: excitation probability vs pulse area at fixed pulse width.

use std::path::Path;
use std::time::Instant;

use timebin_core::dynamics::{rabi_scan, write_scan_csv};

use crate::config::{linspace, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::report::{write_atomic, ReportBuilder};

pub fn run(cfg: &ExperimentConfig, out_dir: &Path, start: Instant) -> Result<()> {
    let sys = cfg.dynamics.level_system();
    let deph = cfg.dynamics.dephasing();
    let areas = linspace(0.0, cfg.rabi.area_max_rad, cfg.rabi.area_points);
    let points = rabi_scan(&sys, cfg.timing.pulse_sigma_ps, &areas, &deph)?;

    let mut csv = Vec::new();
    write_scan_csv(&mut csv, "area_rad", &points)
        .map_err(CliError::io("cannot render rabi.csv"))?;
    let csv_path = out_dir.join("rabi.csv");
    write_atomic(&csv_path, &csv)?;

    // first interior crest of the oscillation, for the summary
    let first_crest = points
        .windows(3)
        .find(|w| w[1].p_b >= w[0].p_b && w[1].p_b >= w[2].p_b)
        .map(|w| w[1]);

    let mut rb = ReportBuilder::new("rabi", cfg, start);
    rb.note_illustrative_defaults(cfg);
    rb.add_output(csv_path);
    rb.set_summary(serde_json::json!({
        "area_points": points.len(),
        "pulse_sigma_ps": cfg.timing.pulse_sigma_ps,
        "first_crest_area_rad": first_crest.map(|p| p.x),
        "first_crest_p_b": first_crest.map(|p| p.p_b),
    }));
    rb.finish(out_dir)?;
    Ok(())
}
