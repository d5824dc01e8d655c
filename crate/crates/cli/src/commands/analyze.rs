//! `analyze`: correlate recorded tag streams against the sync channel and
//! histogram the joint slot/detector outcomes; optionally re-run the
//! sampling pipeline across analyzer-1 phases to trace the interference
//! fringe of the middle-slot coincidences.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use timebin_core::analyzer::sample_timetags;
use timebin_core::source::sample_emissions;
use timebin_core::timetag::{coincidences, read_ttb1, TimeTagStream};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::report::{write_atomic, write_json_atomic, ReportBuilder};

fn read_stream(path: &Path) -> Result<TimeTagStream> {
    let bytes =
        std::fs::read(path).map_err(CliError::io(format!("cannot read {}", path.display())))?;
    read_ttb1(&bytes[..])
        .map_err(|e| CliError::InputFormat(format!("{}: {e}", path.display())))
}

/// Middle-slot outcome index of detector A (`detector * 3 + slot`).
const MID_A: usize = 1;

pub fn run(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    side1: &Path,
    side2: &Path,
    sync: &Path,
    fringe_points: Option<usize>,
    start: Instant,
) -> Result<()> {
    let s1 = read_stream(side1)?;
    let s2 = read_stream(side2)?;
    let sy = read_stream(sync)?;

    let hist = coincidences(&s1, &s2, &sy, cfg.timing.delay_ps, cfg.analysis.window_ps)?;
    let hist_path = out_dir.join("histogram.json");
    write_json_atomic(&hist_path, &hist)?;

    let mut rb = ReportBuilder::new("analyze", cfg, start);
    rb.add_output(hist_path);

    if let Some(n) = fringe_points {
        if n == 0 {
            return Err(CliError::Config("--fringe-points must be >= 1".into()));
        }
        // The phase scan re-runs the sampling pipeline from the
        // configuration (seed, pulse count, source, analyzer 2); only the
        // analyzer-1 phase varies. Emission events are phase-independent,
        // so they are drawn once and shared across the scan.
        let events = sample_emissions(&cfg.source, cfg.n_pulses, cfg.seed)?;
        let timing = cfg.timing.to_core();
        let mut csv = String::from("phi1_rad,mid_mid_aa,total_coincidences\n");
        for k in 0..n {
            let phi1 = TAU * k as f64 / n as f64;
            let cfg1 = timebin_core::analyzer::AnalyzerConfig { phase: phi1, ..cfg.analyzer1.clone() };
            let streams = sample_timetags(
                &events,
                &cfg.source,
                &cfg1,
                &cfg.analyzer2,
                &timing,
                cfg.n_pulses,
                cfg.seed,
            )?;
            let h = coincidences(
                &streams.side1,
                &streams.side2,
                &streams.sync,
                cfg.timing.delay_ps,
                cfg.analysis.window_ps,
            )?;
            writeln!(csv, "{phi1},{},{}", h.joint[MID_A][MID_A], h.total_coincidences())
                .expect("string write");
        }
        let fringe_path = out_dir.join("fringe.csv");
        write_atomic(&fringe_path, csv.as_bytes())?;
        rb.add_output(fringe_path);
    }

    let assigned1: u64 = hist.singles1.iter().sum();
    let assigned2: u64 = hist.singles2.iter().sum();
    rb.set_summary(serde_json::json!({
        "n_periods": hist.n_periods,
        "total_coincidences": hist.total_coincidences(),
        "assigned_side1": assigned1,
        "assigned_side2": assigned2,
        "unassigned_side1": hist.unassigned1,
        "unassigned_side2": hist.unassigned2,
    }));
    rb.finish(out_dir)?;
    Ok(())
}
