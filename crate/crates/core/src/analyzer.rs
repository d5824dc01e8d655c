//! Time-bin analyzers as POVMs, joint and singles statistics, and time-tag
//! sampling.
//!
//! Each side of the experiment analyzes one photon of the pair in an
//! unbalanced interferometer whose arm-length difference equals the pump
//! pulse separation. A photon therefore arrives at one of three time slots
//! behind the output beamsplitter:
//!
//! ```text
//! slot 0 (early):  early bin, short arm          projects on |E>
//! slot 1 (middle): early+long or late+short      projects on |E> +- e^{i phase}|L>
//! slot 2 (late):   late bin, long arm            projects on |L>
//! ```
//!
//! The middle slot erases the emission-time information; its two output
//! detectors measure the conjugate superposition bases. With symmetric
//! lossless splitters each outer-slot operator is (1/4)|E><E| (or |L><L|)
//! per detector and each middle operator is (1/2)|+-_phase><+-_phase|, so
//! the six operators sum to the identity.
//!
//! In `Switch` mode the input splitter is replaced by an active routing
//! element (early bin into the long arm, late bin into the short arm), which
//! folds all probability into the middle slot; the outer-slot operators
//! vanish and the middle ones become full projectors.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::hilbert::{trace_product, DensityMatrix, Keep};
use crate::rng::{stream_rng, Domain};
use crate::source::{EmissionEvent, SourceConfig};
use crate::timetag::{TimeTag, TimeTagStream};

/// Output detector behind the second splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    A,
    B,
}

/// Arrival slot relative to the sync of the pump period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Early,
    Middle,
    Late,
}

/// One single-photon detection outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionOutcome {
    pub detector: Detector,
    pub slot: Slot,
}

impl DetectionOutcome {
    /// Fixed enumeration order: detector major, slot minor.
    pub const ALL: [DetectionOutcome; 6] = [
        DetectionOutcome { detector: Detector::A, slot: Slot::Early },
        DetectionOutcome { detector: Detector::A, slot: Slot::Middle },
        DetectionOutcome { detector: Detector::A, slot: Slot::Late },
        DetectionOutcome { detector: Detector::B, slot: Slot::Early },
        DetectionOutcome { detector: Detector::B, slot: Slot::Middle },
        DetectionOutcome { detector: Detector::B, slot: Slot::Late },
    ];

    pub fn index(&self) -> usize {
        let d = match self.detector {
            Detector::A => 0,
            Detector::B => 1,
        };
        let s = match self.slot {
            Slot::Early => 0,
            Slot::Middle => 1,
            Slot::Late => 2,
        };
        d * 3 + s
    }

    pub fn from_index(i: usize) -> Option<DetectionOutcome> {
        Self::ALL.get(i).copied()
    }

    pub fn slot_offset(&self) -> u64 {
        match self.slot {
            Slot::Early => 0,
            Slot::Middle => 1,
            Slot::Late => 2,
        }
    }
}

/// How the input element routes the two bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyzerMode {
    /// Passive splitter: every photon may take either arm.
    Beamsplitter,
    /// Active routing: early bin into the long arm, late bin into the short
    /// arm, so every photon lands in the middle slot.
    Switch,
}

/// One analyzer. Reflectivities are intensity fractions of the input and
/// output splitters; arm transmissions model propagation loss in each arm.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzerConfig {
    /// Analysis phase of the long arm, radians.
    pub phase: f64,
    pub mode: AnalyzerMode,
    /// Input splitter reflectivity r1 (fraction sent into the long arm).
    /// Ignored in `Switch` mode.
    pub input_reflectivity: f64,
    /// Output splitter reflectivity r2.
    pub output_reflectivity: f64,
    pub arm_transmission_short: f64,
    pub arm_transmission_long: f64,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self {
            phase: 0.0,
            mode: AnalyzerMode::Beamsplitter,
            input_reflectivity: 0.5,
            output_reflectivity: 0.5,
            arm_transmission_short: 1.0,
            arm_transmission_long: 1.0,
        }
    }
}

impl AnalyzerConfig {
    pub fn with_phase(phase: f64) -> Self {
        Self { phase, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input_reflectivity", self.input_reflectivity),
            ("output_reflectivity", self.output_reflectivity),
            ("arm_transmission_short", self.arm_transmission_short),
            ("arm_transmission_long", self.arm_transmission_long),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if !self.phase.is_finite() {
            return Err(Error::InvalidInput("analyzer phase must be finite".into()));
        }
        Ok(())
    }

    pub fn is_lossless(&self) -> bool {
        self.arm_transmission_short == 1.0 && self.arm_transmission_long == 1.0
    }
}

fn outer(m_e: C64, m_l: C64) -> DMatrix<C64> {
    // probability |m_e a_E + m_l a_L|^2 == tr(M rho) with M_ij = conj(m_i) m_j
    DMatrix::from_row_slice(
        2,
        2,
        &[
            m_e.conj() * m_e,
            m_e.conj() * m_l,
            m_l.conj() * m_e,
            m_l.conj() * m_l,
        ],
    )
}

/// The six detection operators of one analyzer, in [`DetectionOutcome::ALL`]
/// order. Operators sum to the identity when the analyzer is lossless.
pub fn povm(cfg: &AnalyzerConfig) -> Result<Vec<DMatrix<C64>>> {
    cfg.validate()?;
    let t2 = (1.0 - cfg.output_reflectivity).sqrt();
    let r2 = cfg.output_reflectivity.sqrt();
    let es = cfg.arm_transmission_short.sqrt();
    let el = cfg.arm_transmission_long.sqrt();
    let p = C64::from_polar(1.0, cfg.phase);
    let zero = C64::from(0.0);

    // Amplitude functionals (m_E, m_L) per outcome. The output splitter maps
    // (short, long) inputs to A = t2*short + r2*long, B = r2*short - t2*long.
    let rows: [(C64, C64); 6] = match cfg.mode {
        AnalyzerMode::Beamsplitter => {
            let t1 = (1.0 - cfg.input_reflectivity).sqrt();
            let r1 = cfg.input_reflectivity.sqrt();
            [
                (C64::from(t1 * t2 * es), zero),             // A early
                (p * (r1 * r2 * el), C64::from(t1 * t2 * es)), // A middle
                (zero, p * (r1 * r2 * el)),                  // A late
                (C64::from(t1 * r2 * es), zero),             // B early
                (p * (-r1 * t2 * el), C64::from(t1 * r2 * es)), // B middle
                (zero, p * (-r1 * t2 * el)),                 // B late
            ]
        }
        AnalyzerMode::Switch => [
            (zero, zero),
            (p * (r2 * el), C64::from(t2 * es)), // A middle
            (zero, zero),
            (zero, zero),
            (p * (-t2 * el), C64::from(r2 * es)), // B middle
            (zero, zero),
        ],
    };
    Ok(rows.iter().map(|&(e, l)| outer(e, l)).collect())
}

/// Photon-1 or photon-2 side of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    One,
    Two,
}

fn check_pair_dim(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 4 {
        return Err(Error::Dimension { context: "pair state", expected: 4, got: rho.dim() });
    }
    Ok(())
}

/// Tensor-product operators M1(o1) x M2(o2), flattened o1*6 + o2.
pub fn joint_operator_table(
    cfg1: &AnalyzerConfig,
    cfg2: &AnalyzerConfig,
) -> Result<Vec<DMatrix<C64>>> {
    let m1 = povm(cfg1)?;
    let m2 = povm(cfg2)?;
    let mut table = Vec::with_capacity(36);
    for a in &m1 {
        for b in &m2 {
            table.push(a.kronecker(b));
        }
    }
    Ok(table)
}

/// Joint detection probabilities P(o1, o2) = tr[(M1 x M2) rho], indexed
/// `[o1][o2]` in [`DetectionOutcome::ALL`] order. Sums to 1 for lossless
/// analyzers.
pub fn joint_probabilities(
    rho: &DensityMatrix,
    cfg1: &AnalyzerConfig,
    cfg2: &AnalyzerConfig,
) -> Result<[[f64; 6]; 6]> {
    check_pair_dim(rho)?;
    let table = joint_operator_table(cfg1, cfg2)?;
    let mut out = [[0.0; 6]; 6];
    for o1 in 0..6 {
        for o2 in 0..6 {
            out[o1][o2] = trace_product(&table[o1 * 6 + o2], rho.matrix()).re;
        }
    }
    Ok(out)
}

/// Single-side detection probabilities, from the reduced state of `side`.
pub fn singles_probabilities(
    rho: &DensityMatrix,
    cfg: &AnalyzerConfig,
    side: Side,
) -> Result<[f64; 6]> {
    check_pair_dim(rho)?;
    let keep = match side {
        Side::One => Keep::First,
        Side::Two => Keep::Second,
    };
    let reduced = rho.partial_trace((2, 2), keep)?;
    let ops = povm(cfg)?;
    let mut out = [0.0; 6];
    for (o, m) in ops.iter().enumerate() {
        out[o] = trace_product(m, reduced.matrix()).re;
    }
    Ok(out)
}

/// Middle-middle coincidence probability of one detector pairing as a
/// function of the side-1 analysis phase, with side 2 held at `phi2`.
/// Analyzers are symmetric lossless beamsplitters.
pub fn fringe_scan(
    rho: &DensityMatrix,
    phi1_values: &[f64],
    phi2: f64,
    pairing: (Detector, Detector),
) -> Result<Vec<(f64, f64)>> {
    check_pair_dim(rho)?;
    let o1 = DetectionOutcome { detector: pairing.0, slot: Slot::Middle }.index();
    let o2 = DetectionOutcome { detector: pairing.1, slot: Slot::Middle }.index();
    let cfg2 = AnalyzerConfig::with_phase(phi2);
    let mut out = Vec::with_capacity(phi1_values.len());
    for &phi1 in phi1_values {
        let probs = joint_probabilities(rho, &AnalyzerConfig::with_phase(phi1), &cfg2)?;
        out.push((phi1, probs[o1][o2]));
    }
    Ok(out)
}

/// Detector channel numbering used by [`sample_timetags`].
pub const CH_SYNC: u8 = 0;
pub const CH_SIDE1_A: u8 = 1;
pub const CH_SIDE1_B: u8 = 2;
pub const CH_SIDE2_A: u8 = 3;
pub const CH_SIDE2_B: u8 = 4;
pub const CHANNEL_COUNT: u32 = 5;

/// Detection timing model shared by both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingConfig {
    /// Pump repetition period, ps.
    pub rep_period_ps: u64,
    /// Interferometer arm imbalance = pump pulse separation, ps.
    pub delay_ps: u64,
    /// Detector timing jitter (std of the folded-normal latency), ps.
    pub jitter_std_ps: f64,
    /// Detection efficiency applied per photon at the detector.
    pub detector_efficiency: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            rep_period_ps: 12_500,
            delay_ps: 3_336,
            jitter_std_ps: 30.0,
            detector_efficiency: 1.0,
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delay_ps == 0 {
            return Err(Error::InvalidInput("delay_ps must be positive".into()));
        }
        if 3 * self.delay_ps >= self.rep_period_ps {
            return Err(Error::InvalidInput(format!(
                "delay {} must be smaller than rep_period/3 = {}",
                self.delay_ps,
                self.rep_period_ps as f64 / 3.0
            )));
        }
        if !self.jitter_std_ps.is_finite() || self.jitter_std_ps < 0.0 {
            return Err(Error::InvalidInput("jitter_std_ps must be finite and >= 0".into()));
        }
        if 2.0 * self.delay_ps as f64 + 6.0 * self.jitter_std_ps >= self.rep_period_ps as f64 {
            return Err(Error::InvalidInput(
                "2*delay + 6*jitter_std must stay inside one period".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.detector_efficiency) {
            return Err(Error::InvalidInput(format!(
                "detector_efficiency must be in [0, 1], got {}",
                self.detector_efficiency
            )));
        }
        Ok(())
    }
}

/// The three tag streams one acquisition produces.
#[derive(Debug, Clone, PartialEq)]
pub struct TagStreams {
    pub side1: TimeTagStream,
    pub side2: TimeTagStream,
    pub sync: TimeTagStream,
}

/// Detection latency: folded normal, clamped at 6 sigma so every tag stays
/// strictly inside `[pulse_start, pulse_start + 2*delay + 6*jitter_std]`.
fn sample_jitter<R: Rng>(rng: &mut R, std_ps: f64) -> u64 {
    if std_ps == 0.0 {
        return 0;
    }
    let normal = Normal::new(0.0, std_ps).expect("validated std");
    let j = normal.sample(rng).abs().min(6.0 * std_ps);
    j.round() as u64
}

/// Walk a cumulative distribution; entries may not sum to 1 (the remainder
/// means the photon was lost).
fn pick_outcome(u: f64, probs: &[f64]) -> Option<usize> {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Some(i);
        }
    }
    None
}

/// Sample detector time tags for a run of `n_pulses` pump periods.
///
/// Every period contributes one sync tag. A period with a single cascade
/// carries the coherent pair state implied by the source config and its
/// event phase; the joint outcome is drawn from the two-analyzer POVM. A
/// direct-scheme double event is two independent bin-localized cascades,
/// each photon routed through its analyzer's single-photon statistics; such
/// periods produce the accidental coincidences of the direct scheme.
///
/// Per event the draw order is fixed: for a single cascade, the joint
/// outcome, then one survival draw per photon (side 1 first) against the
/// detector efficiency; for a double, per-photon outcome draws already
/// folding in the efficiency (early cascade side 1, side 2, then late
/// cascade side 1, side 2). Jitter is drawn after the outcomes, per
/// generated tag, side 1 before side 2. Each period consumes only its own
/// `(seed, pulse_index)` stream, so sharding over pulse ranges is
/// reproducible.
pub fn sample_timetags(
    events: &[EmissionEvent],
    src: &SourceConfig,
    cfg1: &AnalyzerConfig,
    cfg2: &AnalyzerConfig,
    timing: &TimingConfig,
    n_pulses: u64,
    seed: u64,
) -> Result<TagStreams> {
    src.validate()?;
    timing.validate()?;
    let eta = timing.detector_efficiency;

    // per-side joint table including detector efficiency
    let table = joint_operator_table(cfg1, cfg2)?;
    let m1 = povm(cfg1)?;
    let m2 = povm(cfg2)?;
    // single-photon outcome probabilities for bin-localized photons
    let marg = |ops: &[DMatrix<C64>], bin: usize| -> [f64; 6] {
        let mut out = [0.0; 6];
        for (o, m) in ops.iter().enumerate() {
            out[o] = eta * m[(bin, bin)].re;
        }
        out
    };
    let p1_early = marg(&m1, 0);
    let p1_late = marg(&m1, 1);
    let p2_early = marg(&m2, 0);
    let p2_late = marg(&m2, 1);

    let mut last_index: Option<u64> = None;
    for e in events {
        if e.pulse_index >= n_pulses {
            return Err(Error::InvalidInput(format!(
                "event pulse_index {} outside [0, {n_pulses})",
                e.pulse_index
            )));
        }
        if let Some(prev) = last_index {
            if e.pulse_index <= prev {
                return Err(Error::InvalidInput(
                    "emission events must be strictly increasing in pulse_index".into(),
                ));
            }
        }
        last_index = Some(e.pulse_index);
    }

    // cache of the 36 joint probabilities, keyed by the event phase bits;
    // coherent pumping hits one entry, incoherent pumping recomputes
    let mut cached_phase: Option<u64> = None;
    let mut joint: [f64; 36] = [0.0; 36];

    let mut side1: Vec<TimeTag> = Vec::new();
    let mut side2: Vec<TimeTag> = Vec::new();

    for e in events {
        let mut rng = stream_rng(seed, Domain::TimeTag, e.pulse_index);
        let start = e.pulse_index * timing.rep_period_ps;
        // (channel index within side, outcome) pending tags for this period
        let mut pend1: Vec<(u64, u8)> = Vec::new();
        let mut pend2: Vec<(u64, u8)> = Vec::new();

        if e.is_double() {
            // two bin-localized cascades; four independent photons
            for (bin, p1, p2) in [(0u64, &p1_early, &p2_early), (1, &p1_late, &p2_late)] {
                let _ = bin;
                let u1 = rng.random::<f64>();
                let o1 = pick_outcome(u1, p1);
                let u2 = rng.random::<f64>();
                let o2 = pick_outcome(u2, p2);
                if let Some(o) = o1 {
                    let out = DetectionOutcome::ALL[o];
                    let ch = if out.detector == Detector::A { CH_SIDE1_A } else { CH_SIDE1_B };
                    pend1.push((out.slot_offset(), ch));
                }
                if let Some(o) = o2 {
                    let out = DetectionOutcome::ALL[o];
                    let ch = if out.detector == Detector::A { CH_SIDE2_A } else { CH_SIDE2_B };
                    pend2.push((out.slot_offset(), ch));
                }
            }
        } else {
            let bits = e.pair_phase.to_bits();
            if cached_phase != Some(bits) {
                let rho = crate::source::x_state(
                    src.coherence_factor,
                    src.early_late_imbalance,
                    e.pair_phase,
                )?;
                for (k, op) in table.iter().enumerate() {
                    joint[k] = trace_product(op, rho.matrix()).re.max(0.0);
                }
                cached_phase = Some(bits);
            }
            // joint outcome first, then one survival draw per photon, so a
            // lost photon still leaves its partner's single behind
            let u = rng.random::<f64>();
            let outcome = pick_outcome(u, &joint);
            let keep1 = rng.random::<f64>() < eta;
            let keep2 = rng.random::<f64>() < eta;
            if let Some(k) = outcome {
                let out1 = DetectionOutcome::ALL[k / 6];
                let out2 = DetectionOutcome::ALL[k % 6];
                if keep1 {
                    let ch1 = if out1.detector == Detector::A { CH_SIDE1_A } else { CH_SIDE1_B };
                    pend1.push((out1.slot_offset(), ch1));
                }
                if keep2 {
                    let ch2 = if out2.detector == Detector::A { CH_SIDE2_A } else { CH_SIDE2_B };
                    pend2.push((out2.slot_offset(), ch2));
                }
            }
        }

        for (pend, out_vec) in [(&mut pend1, &mut side1), (&mut pend2, &mut side2)] {
            let mut tags: Vec<TimeTag> = pend
                .iter()
                .map(|&(slot, ch)| {
                    let t = start + slot * timing.delay_ps + sample_jitter(&mut rng, timing.jitter_std_ps);
                    TimeTag { timestamp_ps: t, channel: ch }
                })
                .collect();
            tags.sort_by_key(|t| t.timestamp_ps);
            out_vec.extend(tags);
        }
    }

    let sync: Vec<TimeTag> = (0..n_pulses)
        .map(|i| TimeTag { timestamp_ps: i * timing.rep_period_ps, channel: CH_SYNC })
        .collect();

    Ok(TagStreams {
        side1: TimeTagStream::new(CHANNEL_COUNT, side1)?,
        side2: TimeTagStream::new(CHANNEL_COUNT, side2)?,
        sync: TimeTagStream::new(CHANNEL_COUNT, sync)?,
    })
}
