//! Pair states produced by the cascade per pump pulse, and emission-event
//! sampling for the two excitation schemes.
//!
//! Time-bin basis order is `(EE, EL, LE, LL)`: index = 2*q1 + q2 with photon
//! 1 the first factor, `E -> 0`, `L -> 1`. Photon 1 is the first photon of
//! the cascade (the one emitted by the upper transition), photon 2 the
//! second; each is analyzed on its own side downstream.
//!
//! Two excitation schemes are modeled at the event level:
//!
//! - `Direct`: each of the two pump pulses excites the emitter independently
//!   with probability p, so a period can contain two cascades (one localized
//!   in the early bin, one in the late bin). Those double events carry no
//!   interbin coherence and show up downstream as accidental coincidences.
//! - `Metastable`: the emitter is armed through a shelving state that can
//!   fire at most once per period, so a pair is created with probability p
//!   and never doubled.
//!
//! A single-cascade event is coherent across both bins; its flags record
//! which pump slot fired as classical bookkeeping only, and detection
//! statistics downstream come from the full pair state.

use std::io::{BufRead, Write};

use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, StateVector};
use crate::rng::{stream_rng, Domain};

/// A two-photon time-bin state: 4x4 density matrix over `(EE, EL, LE, LL)`.
pub type PairState = DensityMatrix;

/// How the emitter is pumped each period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Direct,
    Metastable,
}

/// Per-pulse source model.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    /// Probability that one pump pulse produces a cascade (per bin for
    /// `Direct`, per period for `Metastable`).
    pub excitation_prob: f64,
    /// Phase between the early and late pump amplitudes, inherited by the
    /// pair coherence.
    pub pump_phase: f64,
    pub scheme: Scheme,
    /// Scale factor in [0, 1] on the interbin coherence of the pair state.
    pub coherence_factor: f64,
    /// Population imbalance epsilon: P(EE) = (1+eps)/2, P(LL) = (1-eps)/2.
    pub early_late_imbalance: f64,
    /// An incoherently pumped emitter has no stable phase reference: the
    /// pair phase is uniformly random each period and the average state
    /// loses its off-diagonal block entirely.
    pub incoherent_pump: bool,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            excitation_prob: 0.06,
            pump_phase: 0.0,
            scheme: Scheme::Metastable,
            coherence_factor: 1.0,
            early_late_imbalance: 0.0,
            incoherent_pump: false,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.excitation_prob) {
            return Err(Error::InvalidInput(format!(
                "excitation_prob must be in [0, 1], got {}",
                self.excitation_prob
            )));
        }
        if !(0.0..=1.0).contains(&self.coherence_factor) {
            return Err(Error::InvalidInput(format!(
                "coherence_factor must be in [0, 1], got {}",
                self.coherence_factor
            )));
        }
        if !self.early_late_imbalance.is_finite() || self.early_late_imbalance.abs() >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "early_late_imbalance must be in (-1, 1), got {}",
                self.early_late_imbalance
            )));
        }
        if !self.pump_phase.is_finite() {
            return Err(Error::InvalidInput("pump_phase must be finite".into()));
        }
        Ok(())
    }
}

/// One pump period that produced at least one cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionEvent {
    pub pulse_index: u64,
    /// A cascade was fired by the early pump slot.
    pub early_emitted: bool,
    /// A cascade was fired by the late pump slot.
    pub late_emitted: bool,
    /// Pump phase for this period: the configured phase for coherent
    /// pumping, uniform in [0, 2pi) when `incoherent_pump` is set.
    pub pair_phase: f64,
}

impl EmissionEvent {
    /// Two cascades in one period (direct scheme only).
    pub fn is_double(&self) -> bool {
        self.early_emitted && self.late_emitted
    }
}

/// The ideal pair ket (|EE> + e^{i phase} |LL>)/sqrt(2).
pub fn ideal_ket(phase: f64) -> StateVector {
    let inv = C64::from(1.0 / 2f64.sqrt());
    StateVector::new(vec![
        inv,
        C64::from(0.0),
        C64::from(0.0),
        inv * C64::from_polar(1.0, phase),
    ])
    .expect("unit norm by construction")
}

/// The ideal pair state as a density matrix.
pub fn ideal_state(phase: f64) -> PairState {
    ideal_ket(phase).to_density()
}

/// X-shaped pair state with populations split (1+eps)/2, (1-eps)/2 over
/// EE/LL and interbin coherence v * sqrt(P_EE * P_LL) * e^{i phase}.
///
/// ```text
///        [ a  0  0  c*]
/// rho =  [ 0  0  0  0 ]      a = (1+eps)/2, d = (1-eps)/2,
///        [ 0  0  0  0 ]      c = v sqrt(a d) e^{i phase}
///        [ c  0  0  d ]
/// ```
pub fn x_state(coherence: f64, imbalance: f64, phase: f64) -> Result<PairState> {
    if !(0.0..=1.0).contains(&coherence) {
        return Err(Error::InvalidInput(format!(
            "coherence must be in [0, 1], got {coherence}"
        )));
    }
    if !imbalance.is_finite() || imbalance.abs() >= 1.0 {
        return Err(Error::InvalidInput(format!(
            "imbalance must be in (-1, 1), got {imbalance}"
        )));
    }
    let a = (1.0 + imbalance) / 2.0;
    let d = (1.0 - imbalance) / 2.0;
    let c = C64::from_polar(coherence * (a * d).sqrt(), phase);
    let mut m = nalgebra::DMatrix::from_element(4, 4, C64::from(0.0));
    m[(0, 0)] = C64::from(a);
    m[(3, 3)] = C64::from(d);
    m[(3, 0)] = c;
    m[(0, 3)] = c.conj();
    DensityMatrix::new(m)
}

/// The pair state the configured source emits on average each period.
///
/// Coherent pumping keeps the configured pump phase; incoherent pumping
/// randomizes it period to period, which averages the coherence away.
pub fn realistic_state(cfg: &SourceConfig) -> Result<PairState> {
    cfg.validate()?;
    let v = if cfg.incoherent_pump { 0.0 } else { cfg.coherence_factor };
    x_state(v, cfg.early_late_imbalance, cfg.pump_phase)
}

/// Polarization x time-bin hyperentangled ket, 16-dimensional,
/// polarization major:
///
/// ```text
/// (|HH> + e^{i phi_pol} |VV>)/sqrt(2)  (x)  (|EE> + e^{i phi_l} |LL>)/sqrt(2)
/// ```
pub fn hyper_state(phi_pol: f64, phi_l: f64) -> StateVector {
    ideal_ket(phi_pol).tensor(&ideal_ket(phi_l))
}

/// Sample emission events for pump periods `[0, n_pulses)`.
pub fn sample_emissions(cfg: &SourceConfig, n_pulses: u64, seed: u64) -> Result<Vec<EmissionEvent>> {
    sample_emissions_range(cfg, 0, n_pulses, seed)
}

/// Sample emission events for pump periods `[lo, hi)`. Concatenating
/// adjacent ranges reproduces the full-range stream exactly, because each
/// period draws only from its own `(seed, pulse_index)` stream.
pub fn sample_emissions_range(
    cfg: &SourceConfig,
    lo: u64,
    hi: u64,
    seed: u64,
) -> Result<Vec<EmissionEvent>> {
    cfg.validate()?;
    if hi < lo {
        return Err(Error::InvalidInput(format!(
            "empty-range bounds reversed: [{lo}, {hi})"
        )));
    }
    let mut events = Vec::new();
    for pulse_index in lo..hi {
        let mut rng = stream_rng(seed, Domain::Emission, pulse_index);
        let (early, late) = match cfg.scheme {
            Scheme::Direct => {
                let early = rng.random::<f64>() < cfg.excitation_prob;
                let late = rng.random::<f64>() < cfg.excitation_prob;
                (early, late)
            }
            Scheme::Metastable => {
                if rng.random::<f64>() < cfg.excitation_prob {
                    // bookkeeping only: record which pump slot fired; the
                    // pair itself stays coherent across both bins
                    let early = rng.random::<bool>();
                    (early, !early)
                } else {
                    (false, false)
                }
            }
        };
        if !(early || late) {
            continue;
        }
        let pair_phase = if cfg.incoherent_pump {
            rng.random::<f64>() * std::f64::consts::TAU
        } else {
            cfg.pump_phase
        };
        events.push(EmissionEvent { pulse_index, early_emitted: early, late_emitted: late, pair_phase });
    }
    Ok(events)
}

/// Write events as CSV: `pulse_index,early,late,phase`.
pub fn write_emissions_csv<W: Write>(mut w: W, events: &[EmissionEvent]) -> std::io::Result<()> {
    writeln!(w, "pulse_index,early,late,phase_rad")?;
    for e in events {
        writeln!(
            w,
            "{},{},{},{}",
            e.pulse_index, e.early_emitted as u8, e.late_emitted as u8, e.pair_phase
        )?;
    }
    Ok(())
}

/// Read events back from the CSV written by [`write_emissions_csv`].
pub fn read_emissions_csv<R: BufRead>(r: R) -> Result<Vec<EmissionEvent>> {
    let mut events = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::BadFormat {
            offset: lineno as u64,
            reason: format!("io error: {e}"),
        })?;
        if lineno == 0 {
            if line.trim() != "pulse_index,early,late,phase_rad" {
                return Err(Error::BadFormat {
                    offset: 0,
                    reason: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 4 {
            return Err(Error::BadFormat {
                offset: lineno as u64,
                reason: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let parse_flag = |s: &str| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(Error::BadFormat {
                offset: lineno as u64,
                reason: format!("flag field must be 0 or 1, got {s:?}"),
            }),
        };
        events.push(EmissionEvent {
            pulse_index: fields[0].parse().map_err(|e| Error::BadFormat {
                offset: lineno as u64,
                reason: format!("bad pulse_index: {e}"),
            })?,
            early_emitted: parse_flag(fields[1])?,
            late_emitted: parse_flag(fields[2])?,
            pair_phase: fields[3].parse().map_err(|e| Error::BadFormat {
                offset: lineno as u64,
                reason: format!("bad phase: {e}"),
            })?,
        });
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{Keep, TOL_ARITHMETIC, TOL_STATE};
    use std::f64::consts::PI;

    fn max_abs_diff(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
        (a.matrix() - b.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn ideal_state_phase_zero_is_phi_plus() {
        let rho = ideal_state(0.0);
        for (i, j, want) in [
            (0usize, 0usize, 0.5),
            (3, 3, 0.5),
            (0, 3, 0.5),
            (3, 0, 0.5),
            (1, 1, 0.0),
            (2, 2, 0.0),
        ] {
            assert!((rho.entry(i, j) - C64::from(want)).norm() < TOL_ARITHMETIC);
        }
    }

    #[test]
    fn ideal_state_phase_pi_is_phi_minus() {
        let rho = ideal_state(PI);
        assert!((rho.entry(0, 3).re + 0.5).abs() < TOL_ARITHMETIC);
        assert!(rho.entry(0, 3).im.abs() < TOL_ARITHMETIC);
    }

    #[test]
    fn ideal_state_is_pure_for_any_phase() {
        for k in 0..16 {
            let rho = ideal_state(2.0 * PI * k as f64 / 16.0);
            assert!((rho.purity() - 1.0).abs() < TOL_STATE);
        }
    }

    #[test]
    fn realistic_state_full_coherence_is_ideal() {
        let cfg = SourceConfig { coherence_factor: 1.0, ..Default::default() };
        let rho = realistic_state(&cfg).unwrap();
        assert!(max_abs_diff(&rho, &ideal_state(0.0)) < TOL_ARITHMETIC);
    }

    #[test]
    fn realistic_state_incoherent_pump_kills_coherence() {
        let cfg = SourceConfig { incoherent_pump: true, ..Default::default() };
        let rho = realistic_state(&cfg).unwrap();
        assert!(rho.entry(0, 3).norm() < TOL_ARITHMETIC);
        assert!((rho.entry(0, 0).re - 0.5).abs() < TOL_ARITHMETIC);
    }

    #[test]
    fn x_state_imbalance_moves_populations() {
        let rho = x_state(1.0, 0.2, 0.0).unwrap();
        assert!((rho.entry(0, 0).re - 0.6).abs() < TOL_ARITHMETIC);
        assert!((rho.entry(3, 3).re - 0.4).abs() < TOL_ARITHMETIC);
        // coherence capped by sqrt(a d)
        assert!((rho.entry(3, 0).norm() - (0.6f64 * 0.4).sqrt()).abs() < TOL_ARITHMETIC);
    }

    #[test]
    fn x_state_admissible_over_parameter_grid() {
        for iv in 0..=4 {
            for ie in -3i32..=3 {
                let v = iv as f64 / 4.0;
                let eps = ie as f64 * 0.25;
                // DensityMatrix::new validates PSD internally
                assert!(x_state(v, eps, 1.2).is_ok(), "v={v} eps={eps}");
            }
        }
        assert!(x_state(1.5, 0.0, 0.0).is_err());
        assert!(x_state(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn hyper_state_reduces_to_both_ideal_pairs() {
        let phi_pol = 0.7;
        let phi_l = 1.9;
        let h = hyper_state(phi_pol, phi_l).to_density();
        assert_eq!(h.dim(), 16);
        let pol = h.partial_trace((4, 4), Keep::First).unwrap();
        let tb = h.partial_trace((4, 4), Keep::Second).unwrap();
        assert!(max_abs_diff(&pol, &ideal_state(phi_pol)) < TOL_ARITHMETIC);
        assert!(max_abs_diff(&tb, &ideal_state(phi_l)) < TOL_ARITHMETIC);
    }

    #[test]
    fn zero_probability_emits_nothing() {
        let cfg = SourceConfig { excitation_prob: 0.0, ..Default::default() };
        assert!(sample_emissions(&cfg, 10_000, 1).unwrap().is_empty());
    }

    #[test]
    fn metastable_never_doubles() {
        let cfg = SourceConfig {
            excitation_prob: 0.5,
            scheme: Scheme::Metastable,
            ..Default::default()
        };
        let events = sample_emissions(&cfg, 100_000, 2).unwrap();
        assert!(!events.is_empty());
        assert!(events.iter().all(|e| !e.is_double()));
    }

    #[test]
    fn direct_double_fraction_matches_bernoulli_oracle() {
        // oracle: among periods with at least one cascade, the double
        // fraction is p^2 / (2p - p^2) = p / (2 - p)
        let p = 0.06;
        let cfg = SourceConfig {
            excitation_prob: p,
            scheme: Scheme::Direct,
            ..Default::default()
        };
        let n = 1_000_000u64;
        let events = sample_emissions(&cfg, n, 3).unwrap();
        let doubles = events.iter().filter(|e| e.is_double()).count() as f64;
        let expect = p / (2.0 - p);
        let n_any = events.len() as f64;
        let sigma = (expect * (1.0 - expect) / n_any).sqrt();
        assert!(
            (doubles / n_any - expect).abs() < 3.0 * sigma,
            "double fraction {} vs {expect} (3 sigma = {})",
            doubles / n_any,
            3.0 * sigma
        );
        // emitting fraction itself
        let p_any = 2.0 * p - p * p;
        let sig_any = (p_any * (1.0 - p_any) / n as f64).sqrt();
        assert!((n_any / n as f64 - p_any).abs() < 4.0 * sig_any);
    }

    #[test]
    fn emissions_are_reproducible_and_shardable() {
        let cfg = SourceConfig { excitation_prob: 0.1, ..Default::default() };
        let full = sample_emissions(&cfg, 5_000, 42).unwrap();
        let again = sample_emissions(&cfg, 5_000, 42).unwrap();
        assert_eq!(full, again);
        let mut sharded = sample_emissions_range(&cfg, 0, 1_234, 42).unwrap();
        sharded.extend(sample_emissions_range(&cfg, 1_234, 5_000, 42).unwrap());
        assert_eq!(full, sharded);
        let other_seed = sample_emissions(&cfg, 5_000, 43).unwrap();
        assert_ne!(full, other_seed);
    }

    #[test]
    fn incoherent_pump_randomizes_phase() {
        let cfg = SourceConfig {
            excitation_prob: 1.0,
            incoherent_pump: true,
            ..Default::default()
        };
        let events = sample_emissions(&cfg, 200, 7).unwrap();
        let mean: f64 = events.iter().map(|e| e.pair_phase).sum::<f64>() / events.len() as f64;
        assert!(events.iter().any(|e| (e.pair_phase - mean).abs() > 0.1));
        // circular mean of e^{i phase} should be small
        let (s, c): (f64, f64) = events
            .iter()
            .fold((0.0, 0.0), |(s, c), e| (s + e.pair_phase.sin(), c + e.pair_phase.cos()));
        let r = (s * s + c * c).sqrt() / events.len() as f64;
        assert!(r < 0.25, "resultant length {r}");
    }

    #[test]
    fn emission_csv_round_trips() {
        let cfg = SourceConfig {
            excitation_prob: 0.3,
            scheme: Scheme::Direct,
            incoherent_pump: true,
            ..Default::default()
        };
        let events = sample_emissions(&cfg, 500, 9).unwrap();
        let mut buf = Vec::new();
        write_emissions_csv(&mut buf, &events).unwrap();
        let back = read_emissions_csv(std::io::BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(events, back);
    }

    #[test]
    fn emission_csv_rejects_garbage() {
        let bad = "pulse_index,early,late,phase_rad\n1,2,0,0.5\n";
        assert!(read_emissions_csv(std::io::BufReader::new(bad.as_bytes())).is_err());
        let bad_header = "index,early,late,phase\n";
        assert!(read_emissions_csv(std::io::BufReader::new(bad_header.as_bytes())).is_err());
    }

    #[test]
    fn config_validation_bounds() {
        let bad_p = SourceConfig { excitation_prob: 1.2, ..Default::default() };
        assert!(bad_p.validate().is_err());
        let bad_v = SourceConfig { coherence_factor: -0.1, ..Default::default() };
        assert!(bad_v.validate().is_err());
        let bad_eps = SourceConfig { early_late_imbalance: 1.0, ..Default::default() };
        assert!(bad_eps.validate().is_err());
    }
}
