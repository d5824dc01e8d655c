//! Flat key-value experiment configuration.
//!
//! The on-disk format is one `section.key = value` assignment per line, with
//! `#` starting a comment and blank lines ignored. Every key has a default,
//! so an empty file (or no file at all) is a valid configuration. Unknown
//! and duplicate keys are rejected with the offending line number.
//!
//! [`ExperimentConfig::to_flat_text`] emits every key in canonical order
//! using shortest-round-trip float formatting, so
//! `parse(cfg.to_flat_text()) == cfg` exactly — reports embed that text as
//! the config echo.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use timebin_core::analyzer::{AnalyzerConfig, AnalyzerMode, TimingConfig};
use timebin_core::dynamics::{DephasingModel, LevelSystem};
use timebin_core::source::{Scheme, SourceConfig};

use crate::error::{CliError, Result};

/// Placeholder emitter lifetimes used when the configuration does not pin
/// them: 400 ps biexciton, 600 ps exciton. Reports flag runs that leave
/// these untouched, because they are round illustrative numbers, not
/// measured values.
pub const ILLUSTRATIVE_GAMMA_B: f64 = 1.0 / 400.0;
pub const ILLUSTRATIVE_GAMMA_X: f64 = 1.0 / 600.0;

/// Timing of the pump train, the analyzers' arm imbalance, and detection.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingSection {
    /// Pump repetition period (ps).
    pub rep_period_ps: u64,
    /// RMS width of the drive pulses (ps), used by the emitter scans.
    pub pulse_sigma_ps: f64,
    /// Early/late bin separation = interferometer arm imbalance (ps).
    pub delay_ps: u64,
    /// Detector timing jitter, std of the folded-normal latency (ps).
    pub jitter_std_ps: f64,
    /// Per-photon detection efficiency.
    pub detector_efficiency: f64,
}

impl Default for TimingSection {
    fn default() -> Self {
        Self {
            rep_period_ps: 12_500,
            pulse_sigma_ps: 12.0,
            delay_ps: 3_336,
            jitter_std_ps: 30.0,
            detector_efficiency: 1.0,
        }
    }
}

impl TimingSection {
    pub fn to_core(&self) -> TimingConfig {
        TimingConfig {
            rep_period_ps: self.rep_period_ps,
            delay_ps: self.delay_ps,
            jitter_std_ps: self.jitter_std_ps,
            detector_efficiency: self.detector_efficiency,
        }
    }
}

/// Emitter rates and drive-frame parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSection {
    /// Biexciton decay rate (1/ps).
    pub gamma_b: f64,
    /// Exciton decay rate (1/ps).
    pub gamma_x: f64,
    /// Fine-structure splitting (rad/ps).
    pub fss: f64,
    /// Two-photon detuning of the drive (rad/ps).
    pub detuning: f64,
    /// Constant pure-dephasing rate of the ground-biexciton coherence (1/ps).
    pub dephasing_constant: f64,
    /// Drive-proportional dephasing coefficient (dimensionless).
    pub dephasing_intensity: f64,
    /// Phase of the second interferometer pulse relative to the first (rad).
    pub laser_phase: f64,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self {
            gamma_b: ILLUSTRATIVE_GAMMA_B,
            gamma_x: ILLUSTRATIVE_GAMMA_X,
            fss: 0.0,
            detuning: 0.0,
            dephasing_constant: 0.0,
            dephasing_intensity: 0.0,
            laser_phase: 0.0,
        }
    }
}

impl DynamicsSection {
    pub fn level_system(&self) -> LevelSystem {
        LevelSystem {
            fss: self.fss,
            gamma_b: self.gamma_b,
            gamma_x: self.gamma_x,
            ..LevelSystem::default()
        }
    }

    pub fn dephasing(&self) -> DephasingModel {
        DephasingModel {
            constant_rate: self.dephasing_constant,
            intensity_coefficient: self.dephasing_intensity,
        }
    }

    /// Keys still carrying the illustrative lifetime placeholders, for the
    /// report notes.
    pub fn illustrative_keys(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.gamma_b == ILLUSTRATIVE_GAMMA_B {
            v.push("dynamics.gamma_b");
        }
        if self.gamma_x == ILLUSTRATIVE_GAMMA_X {
            v.push("dynamics.gamma_x");
        }
        v
    }
}

/// Area grid of the excitation-probability scan.
#[derive(Debug, Clone, PartialEq)]
pub struct RabiSection {
    /// Largest pulse area (rad); the grid starts at 0.
    pub area_max_rad: f64,
    /// Number of grid points (>= 2).
    pub area_points: usize,
}

impl Default for RabiSection {
    fn default() -> Self {
        Self { area_max_rad: 3.0 * TAU, area_points: 61 }
    }
}

/// Delay grid of an interference scan.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayScan {
    pub delay_min_ps: f64,
    pub delay_max_ps: f64,
    pub delay_points: usize,
}

/// Static detuning spread averaged over in the interference scans.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSection {
    /// Mean detuning offset (rad/ps), added to `dynamics.detuning`.
    pub detuning_mean: f64,
    /// Spread of the static detuning (rad/ps); 0 disables the ensemble.
    pub detuning_std: f64,
    /// Stratified samples when the spread is nonzero (>= 100).
    pub n_samples: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self { detuning_mean: 0.0, detuning_std: 0.0, n_samples: 100 }
    }
}

/// Count budget and reconstruction options.
#[derive(Debug, Clone, PartialEq)]
pub struct TomoSection {
    /// Pairs simulated per measurement setting.
    pub n_per_setting: u64,
    /// Whether the outer-slot (time-basis) outcomes enter the fit.
    pub include_time_basis: bool,
    /// Parametric bootstrap resamples for the uncertainty intervals (>= 2).
    pub bootstrap_resamples: usize,
}

impl Default for TomoSection {
    fn default() -> Self {
        Self { n_per_setting: 100_000, include_time_basis: true, bootstrap_resamples: 200 }
    }
}

/// Coincidence-counting options.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSection {
    /// Half-width of each slot acceptance window (ps); `2*window` must stay
    /// below `timing.delay_ps`.
    pub window_ps: u64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { window_ps: 500 }
    }
}

/// Everything a run can depend on. One flat text file covers all
/// subcommands; each reads the sections it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: SourceConfig,
    pub analyzer1: AnalyzerConfig,
    pub analyzer2: AnalyzerConfig,
    pub timing: TimingSection,
    pub dynamics: DynamicsSection,
    pub rabi: RabiSection,
    pub ramsey: DelayScan,
    pub echo: DelayScan,
    pub ensemble: EnsembleSection,
    pub tomography: TomoSection,
    pub analysis: AnalysisSection,
    /// Root seed of all random streams.
    pub seed: u64,
    /// Pump periods simulated by `entangle` (and fringe re-runs).
    pub n_pulses: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: SourceConfig::default(),
            analyzer1: AnalyzerConfig::default(),
            analyzer2: AnalyzerConfig::default(),
            timing: TimingSection::default(),
            dynamics: DynamicsSection::default(),
            rabi: RabiSection::default(),
            ramsey: DelayScan { delay_min_ps: 100.0, delay_max_ps: 1000.0, delay_points: 10 },
            echo: DelayScan { delay_min_ps: 100.0, delay_max_ps: 500.0, delay_points: 5 },
            ensemble: EnsembleSection::default(),
            tomography: TomoSection::default(),
            analysis: AnalysisSection::default(),
            seed: 1,
            n_pulses: 1_000_000,
        }
    }
}

fn scheme_str(s: Scheme) -> &'static str {
    match s {
        Scheme::Direct => "direct",
        Scheme::Metastable => "metastable",
    }
}

fn mode_str(m: AnalyzerMode) -> &'static str {
    match m {
        AnalyzerMode::Beamsplitter => "beamsplitter",
        AnalyzerMode::Switch => "switch",
    }
}

fn parse_scheme(v: &str) -> std::result::Result<Scheme, String> {
    match v {
        "direct" => Ok(Scheme::Direct),
        "metastable" => Ok(Scheme::Metastable),
        _ => Err(format!("expected \"direct\" or \"metastable\", got {v:?}")),
    }
}

fn parse_mode(v: &str) -> std::result::Result<AnalyzerMode, String> {
    match v {
        "beamsplitter" => Ok(AnalyzerMode::Beamsplitter),
        "switch" => Ok(AnalyzerMode::Switch),
        _ => Err(format!("expected \"beamsplitter\" or \"switch\", got {v:?}")),
    }
}

fn parse_f64(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|e| format!("bad number {v:?}: {e}"))?;
    if !x.is_finite() {
        return Err(format!("number must be finite, got {v:?}"));
    }
    Ok(x)
}

fn parse_u64(v: &str) -> std::result::Result<u64, String> {
    v.parse().map_err(|e| format!("bad integer {v:?}: {e}"))
}

fn parse_usize(v: &str) -> std::result::Result<usize, String> {
    v.parse().map_err(|e| format!("bad integer {v:?}: {e}"))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected \"true\" or \"false\", got {v:?}")),
    }
}

fn analyzer_mut(cfg: &mut ExperimentConfig, first: bool) -> &mut AnalyzerConfig {
    if first {
        &mut cfg.analyzer1
    } else {
        &mut cfg.analyzer2
    }
}

/// Assign one key. Returns an error message without positional context.
fn apply_key(
    cfg: &mut ExperimentConfig,
    key: &str,
    value: &str,
) -> std::result::Result<(), String> {
    let analyzer = analyzer_mut;
    match key {
        "source.excitation_prob" => cfg.source.excitation_prob = parse_f64(value)?,
        "source.pump_phase" => cfg.source.pump_phase = parse_f64(value)?,
        "source.scheme" => cfg.source.scheme = parse_scheme(value)?,
        "source.coherence_factor" => cfg.source.coherence_factor = parse_f64(value)?,
        "source.early_late_imbalance" => cfg.source.early_late_imbalance = parse_f64(value)?,
        "source.incoherent_pump" => cfg.source.incoherent_pump = parse_bool(value)?,

        "analyzer1.phase" | "analyzer2.phase" => {
            analyzer(cfg, key.starts_with("analyzer1")).phase = parse_f64(value)?
        }
        "analyzer1.mode" | "analyzer2.mode" => {
            analyzer(cfg, key.starts_with("analyzer1")).mode = parse_mode(value)?
        }
        "analyzer1.input_reflectivity" | "analyzer2.input_reflectivity" => {
            analyzer(cfg, key.starts_with("analyzer1")).input_reflectivity = parse_f64(value)?
        }
        "analyzer1.output_reflectivity" | "analyzer2.output_reflectivity" => {
            analyzer(cfg, key.starts_with("analyzer1")).output_reflectivity = parse_f64(value)?
        }
        "analyzer1.arm_transmission_short" | "analyzer2.arm_transmission_short" => {
            analyzer(cfg, key.starts_with("analyzer1")).arm_transmission_short = parse_f64(value)?
        }
        "analyzer1.arm_transmission_long" | "analyzer2.arm_transmission_long" => {
            analyzer(cfg, key.starts_with("analyzer1")).arm_transmission_long = parse_f64(value)?
        }

        "timing.rep_period_ps" => cfg.timing.rep_period_ps = parse_u64(value)?,
        "timing.pulse_sigma_ps" => cfg.timing.pulse_sigma_ps = parse_f64(value)?,
        "timing.delay_ps" => cfg.timing.delay_ps = parse_u64(value)?,
        "timing.jitter_std_ps" => cfg.timing.jitter_std_ps = parse_f64(value)?,
        "timing.detector_efficiency" => cfg.timing.detector_efficiency = parse_f64(value)?,

        "dynamics.gamma_b" => cfg.dynamics.gamma_b = parse_f64(value)?,
        "dynamics.gamma_x" => cfg.dynamics.gamma_x = parse_f64(value)?,
        "dynamics.fss" => cfg.dynamics.fss = parse_f64(value)?,
        "dynamics.detuning" => cfg.dynamics.detuning = parse_f64(value)?,
        "dynamics.dephasing_constant" => cfg.dynamics.dephasing_constant = parse_f64(value)?,
        "dynamics.dephasing_intensity" => cfg.dynamics.dephasing_intensity = parse_f64(value)?,
        "dynamics.laser_phase" => cfg.dynamics.laser_phase = parse_f64(value)?,

        "rabi.area_max_rad" => cfg.rabi.area_max_rad = parse_f64(value)?,
        "rabi.area_points" => cfg.rabi.area_points = parse_usize(value)?,

        "ramsey.delay_min_ps" => cfg.ramsey.delay_min_ps = parse_f64(value)?,
        "ramsey.delay_max_ps" => cfg.ramsey.delay_max_ps = parse_f64(value)?,
        "ramsey.delay_points" => cfg.ramsey.delay_points = parse_usize(value)?,

        "echo.delay_min_ps" => cfg.echo.delay_min_ps = parse_f64(value)?,
        "echo.delay_max_ps" => cfg.echo.delay_max_ps = parse_f64(value)?,
        "echo.delay_points" => cfg.echo.delay_points = parse_usize(value)?,

        "ensemble.detuning_mean" => cfg.ensemble.detuning_mean = parse_f64(value)?,
        "ensemble.detuning_std" => cfg.ensemble.detuning_std = parse_f64(value)?,
        "ensemble.n_samples" => cfg.ensemble.n_samples = parse_usize(value)?,

        "tomography.n_per_setting" => cfg.tomography.n_per_setting = parse_u64(value)?,
        "tomography.include_time_basis" => {
            cfg.tomography.include_time_basis = parse_bool(value)?
        }
        "tomography.bootstrap_resamples" => {
            cfg.tomography.bootstrap_resamples = parse_usize(value)?
        }

        "analysis.window_ps" => cfg.analysis.window_ps = parse_u64(value)?,

        "seed" => cfg.seed = parse_u64(value)?,
        "n_pulses" => cfg.n_pulses = parse_u64(value)?,

        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parse the flat text form on top of the defaults, then validate.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {lineno}: expected `key = value`, got {raw:?}"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(CliError::Config(format!("line {lineno}: empty key")));
            }
            if !seen.insert(key.to_string()) {
                return Err(CliError::Config(format!("line {lineno}: duplicate key {key:?}")));
            }
            apply_key(&mut cfg, key, value)
                .map_err(|msg| CliError::Config(format!("line {lineno}: {msg}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read and parse a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Cross-field validation on top of the per-type checks.
    pub fn validate(&self) -> Result<()> {
        let ctx = |section: &'static str| {
            move |e: timebin_core::Error| CliError::Config(format!("{section}: {e}"))
        };
        self.source.validate().map_err(ctx("source"))?;
        self.analyzer1.validate().map_err(ctx("analyzer1"))?;
        self.analyzer2.validate().map_err(ctx("analyzer2"))?;
        self.timing.to_core().validate().map_err(ctx("timing"))?;
        self.dynamics.level_system().validate().map_err(ctx("dynamics"))?;
        self.dynamics.dephasing().validate().map_err(ctx("dynamics"))?;
        if !(self.timing.pulse_sigma_ps > 0.0) {
            return Err(CliError::Config(format!(
                "timing.pulse_sigma_ps must be > 0, got {}",
                self.timing.pulse_sigma_ps
            )));
        }
        if !self.dynamics.laser_phase.is_finite() {
            return Err(CliError::Config("dynamics.laser_phase must be finite".into()));
        }
        if !(self.rabi.area_max_rad > 0.0) {
            return Err(CliError::Config(format!(
                "rabi.area_max_rad must be > 0, got {}",
                self.rabi.area_max_rad
            )));
        }
        if self.rabi.area_points < 2 {
            return Err(CliError::Config(format!(
                "rabi.area_points must be >= 2, got {}",
                self.rabi.area_points
            )));
        }
        for (name, scan) in [("ramsey", &self.ramsey), ("echo", &self.echo)] {
            if !(scan.delay_min_ps > 0.0) {
                return Err(CliError::Config(format!(
                    "{name}.delay_min_ps must be > 0, got {}",
                    scan.delay_min_ps
                )));
            }
            if scan.delay_max_ps < scan.delay_min_ps {
                return Err(CliError::Config(format!(
                    "{name}.delay_max_ps must be >= {name}.delay_min_ps"
                )));
            }
            if scan.delay_points == 0 {
                return Err(CliError::Config(format!("{name}.delay_points must be >= 1")));
            }
            if scan.delay_points == 1 && scan.delay_max_ps != scan.delay_min_ps {
                return Err(CliError::Config(format!(
                    "{name}: a single delay point needs delay_min_ps == delay_max_ps"
                )));
            }
        }
        if self.ensemble.detuning_std < 0.0 || !self.ensemble.detuning_std.is_finite() {
            return Err(CliError::Config(
                "ensemble.detuning_std must be finite and >= 0".into(),
            ));
        }
        if self.ensemble.n_samples == 0 {
            return Err(CliError::Config("ensemble.n_samples must be >= 1".into()));
        }
        if self.ensemble.detuning_std > 0.0 && self.ensemble.n_samples < 100 {
            return Err(CliError::Config(format!(
                "ensemble.n_samples must be >= 100 when ensemble.detuning_std > 0, got {}",
                self.ensemble.n_samples
            )));
        }
        if self.tomography.n_per_setting == 0 {
            return Err(CliError::Config("tomography.n_per_setting must be >= 1".into()));
        }
        if self.tomography.bootstrap_resamples < 2 {
            return Err(CliError::Config(format!(
                "tomography.bootstrap_resamples must be >= 2, got {}",
                self.tomography.bootstrap_resamples
            )));
        }
        if self.analysis.window_ps == 0 || 2 * self.analysis.window_ps >= self.timing.delay_ps {
            return Err(CliError::Config(format!(
                "analysis.window_ps must satisfy 0 < 2 * window < timing.delay_ps; \
                 got window {}, delay {}",
                self.analysis.window_ps, self.timing.delay_ps
            )));
        }
        Ok(())
    }

    /// Canonical flat text listing every key. Floats use shortest
    /// round-trip formatting, so parsing the text reproduces the
    /// configuration exactly.
    pub fn to_flat_text(&self) -> String {
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: &dyn std::fmt::Display| {
            writeln!(s, "{k} = {v}").expect("string write");
        };
        kv(&mut s, "source.excitation_prob", &self.source.excitation_prob);
        kv(&mut s, "source.pump_phase", &self.source.pump_phase);
        kv(&mut s, "source.scheme", &scheme_str(self.source.scheme));
        kv(&mut s, "source.coherence_factor", &self.source.coherence_factor);
        kv(&mut s, "source.early_late_imbalance", &self.source.early_late_imbalance);
        kv(&mut s, "source.incoherent_pump", &self.source.incoherent_pump);
        for (name, a) in [("analyzer1", &self.analyzer1), ("analyzer2", &self.analyzer2)] {
            kv(&mut s, &format!("{name}.phase"), &a.phase);
            kv(&mut s, &format!("{name}.mode"), &mode_str(a.mode));
            kv(&mut s, &format!("{name}.input_reflectivity"), &a.input_reflectivity);
            kv(&mut s, &format!("{name}.output_reflectivity"), &a.output_reflectivity);
            kv(&mut s, &format!("{name}.arm_transmission_short"), &a.arm_transmission_short);
            kv(&mut s, &format!("{name}.arm_transmission_long"), &a.arm_transmission_long);
        }
        kv(&mut s, "timing.rep_period_ps", &self.timing.rep_period_ps);
        kv(&mut s, "timing.pulse_sigma_ps", &self.timing.pulse_sigma_ps);
        kv(&mut s, "timing.delay_ps", &self.timing.delay_ps);
        kv(&mut s, "timing.jitter_std_ps", &self.timing.jitter_std_ps);
        kv(&mut s, "timing.detector_efficiency", &self.timing.detector_efficiency);
        kv(&mut s, "dynamics.gamma_b", &self.dynamics.gamma_b);
        kv(&mut s, "dynamics.gamma_x", &self.dynamics.gamma_x);
        kv(&mut s, "dynamics.fss", &self.dynamics.fss);
        kv(&mut s, "dynamics.detuning", &self.dynamics.detuning);
        kv(&mut s, "dynamics.dephasing_constant", &self.dynamics.dephasing_constant);
        kv(&mut s, "dynamics.dephasing_intensity", &self.dynamics.dephasing_intensity);
        kv(&mut s, "dynamics.laser_phase", &self.dynamics.laser_phase);
        kv(&mut s, "rabi.area_max_rad", &self.rabi.area_max_rad);
        kv(&mut s, "rabi.area_points", &self.rabi.area_points);
        for (name, scan) in [("ramsey", &self.ramsey), ("echo", &self.echo)] {
            kv(&mut s, &format!("{name}.delay_min_ps"), &scan.delay_min_ps);
            kv(&mut s, &format!("{name}.delay_max_ps"), &scan.delay_max_ps);
            kv(&mut s, &format!("{name}.delay_points"), &scan.delay_points);
        }
        kv(&mut s, "ensemble.detuning_mean", &self.ensemble.detuning_mean);
        kv(&mut s, "ensemble.detuning_std", &self.ensemble.detuning_std);
        kv(&mut s, "ensemble.n_samples", &self.ensemble.n_samples);
        kv(&mut s, "tomography.n_per_setting", &self.tomography.n_per_setting);
        kv(&mut s, "tomography.include_time_basis", &self.tomography.include_time_basis);
        kv(&mut s, "tomography.bootstrap_resamples", &self.tomography.bootstrap_resamples);
        kv(&mut s, "analysis.window_ps", &self.analysis.window_ps);
        kv(&mut s, "seed", &self.seed);
        kv(&mut s, "n_pulses", &self.n_pulses);
        s
    }
}

/// `n` evenly spaced values from `a` to `b` inclusive (`n >= 1`; a single
/// point sits at `a`).
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1, "linspace needs at least one point");
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
