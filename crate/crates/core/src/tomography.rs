//! Two-qubit state tomography on time-bin pairs: simulated count records
//! over analyzer phase settings, iterative maximum-likelihood
//! reconstruction, and the entanglement figures of merit (fidelity,
//! concurrence, purity) with bootstrap uncertainties.
//!
//! Measurement model: both sides use symmetric lossless analyzers at phases
//! `(phi1, phi2)`; a setting's effective measurement operators are the 36
//! joint detection operators of [`crate::analyzer`]. The middle slots give
//! equator projections, the outer slots the E/L projections — a setting
//! grid over one phase turn is tomographically over-complete once the
//! time-basis (outer-slot) outcomes are included, and provably incomplete
//! without them (the rank check refuses equator-only data).

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::analyzer::{joint_operator_table, AnalyzerConfig};
use crate::error::{Error, Result};
use crate::hilbert::{herm_eigs, DensityMatrix, StateVector};
use crate::rng::{stream_rng, Domain};
use crate::source::PairState;

/// One tomographic setting: the two analyzer phases, and whether the
/// outer-slot (E/L basis) outcomes enter the reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub phi1: f64,
    pub phi2: f64,
    pub includes_time_basis: bool,
}

impl MeasurementSetting {
    pub fn new(phi1: f64, phi2: f64, includes_time_basis: bool) -> Result<Self> {
        let s = Self { phi1, phi2, includes_time_basis };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("phi1", self.phi1), ("phi2", self.phi2)] {
            if !(0.0..TAU).contains(&p) {
                return Err(Error::InvalidInput(format!(
                    "{name} must lie in [0, 2pi), got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Counts over the 36 joint outcomes at one setting, row-major in
/// `(side-1 outcome, side-2 outcome)` with the detector-major outcome order
/// of [`crate::analyzer::DetectionOutcome::ALL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: MeasurementSetting,
    /// Exactly 36 entries.
    pub counts: Vec<u64>,
    /// Pairs sent into the analyzers; `sum(counts) <= n_total` (losses).
    pub n_total: u64,
}

impl CountRecord {
    pub fn new(setting: MeasurementSetting, counts: Vec<u64>, n_total: u64) -> Result<Self> {
        if counts.len() != 36 {
            return Err(Error::Dimension {
                context: "count record",
                expected: 36,
                got: counts.len(),
            });
        }
        let sum: u64 = counts.iter().sum();
        if sum > n_total {
            return Err(Error::InvalidInput(format!(
                "counts sum to {sum} > n_total = {n_total}"
            )));
        }
        setting.validate()?;
        Ok(Self { setting, counts, n_total })
    }
}

/// Output of the maximum-likelihood reconstruction.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub rho_hat: DensityMatrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after every accepted iteration (non-decreasing up to
    /// floating-point summation noise).
    pub ll_trace: Vec<f64>,
}

/// Entanglement figures of merit of a reconstructed (or exact) state.
#[derive(Debug, Clone)]
pub struct EntanglementReport {
    pub fidelity_target: StateVector,
    pub fidelity: f64,
    pub concurrence: f64,
    pub purity: f64,
}

/// Bootstrap uncertainties of the figures of merit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapStats {
    pub n_resamples: usize,
    pub fidelity_mean: f64,
    pub fidelity_std: f64,
    pub concurrence_mean: f64,
    pub concurrence_std: f64,
}

/// The canonical 16-setting grid: both phases over {0, pi/2, pi, 3pi/2},
/// phi1-major.
pub fn default_settings(include_time_basis: bool) -> Vec<MeasurementSetting> {
    let grid = [0.0, TAU / 4.0, TAU / 2.0, 3.0 * TAU / 4.0];
    let mut out = Vec::with_capacity(16);
    for &phi1 in &grid {
        for &phi2 in &grid {
            out.push(MeasurementSetting { phi1, phi2, includes_time_basis: include_time_basis });
        }
    }
    out
}

/// The 36 joint operators of a setting, as stack matrices for the hot loop.
fn setting_operators(s: &MeasurementSetting) -> Result<Vec<Matrix4<C64>>> {
    let table = joint_operator_table(
        &AnalyzerConfig::with_phase(s.phi1),
        &AnalyzerConfig::with_phase(s.phi2),
    )?;
    Ok(table
        .iter()
        .map(|m| Matrix4::from_fn(|i, j| m[(i, j)]))
        .collect())
}

fn tr_prod(a: &Matrix4<C64>, rho: &Matrix4<C64>) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            s += (a[(i, j)] * rho[(j, i)]).re;
        }
    }
    s
}

/// Conditional-binomial multinomial sampler (deterministic draw order).
fn multinomial<R: Rng>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass_left: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let p = p.max(0.0);
        if k + 1 == probs.len() || mass_left <= p {
            out[k] = remaining;
            break;
        }
        let q = (p / mass_left).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
        out[k] = draw;
        remaining -= draw;
        mass_left -= p;
    }
    out
}

/// Simulate count records for a state over the given settings,
/// `n_per_setting` pairs each, with symmetric lossless analyzers.
/// Setting `i` draws only from the `(seed, i)` stream, so records are
/// reproducible independently of one another.
pub fn simulate_counts(
    rho: &PairState,
    settings: &[MeasurementSetting],
    n_per_setting: u64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    if n_per_setting == 0 {
        return Err(Error::InvalidInput("n_per_setting must be >= 1".into()));
    }
    let rho4 = Matrix4::from_fn(|i, j| rho.matrix()[(i, j)]);
    let mut records = Vec::with_capacity(settings.len());
    for (idx, s) in settings.iter().enumerate() {
        s.validate()?;
        let ops = setting_operators(s)?;
        let probs: Vec<f64> = ops.iter().map(|op| tr_prod(op, &rho4).max(0.0)).collect();
        let mut rng = stream_rng(seed, Domain::TomoCounts, idx as u64);
        let counts = multinomial(&mut rng, n_per_setting, &probs);
        records.push(CountRecord::new(*s, counts, n_per_setting)?);
    }
    Ok(records)
}

/// The outcome indices a record contributes: all 36, or only the four
/// middle–middle cells when the time basis is excluded.
fn used_outcomes(setting: &MeasurementSetting) -> Vec<usize> {
    if setting.includes_time_basis {
        (0..36).collect()
    } else {
        // middle-slot outcome indices per side are 1 (detector A) and 4 (B)
        let mids = [1usize, 4];
        let mut v = Vec::with_capacity(4);
        for &o1 in &mids {
            for &o2 in &mids {
                v.push(o1 * 6 + o2);
            }
        }
        v
    }
}

/// Real 16-vector coordinates of a Hermitian 4x4 matrix (diagonal, then
/// re/im of the upper triangle) — the measurement map acts on these.
fn hermitian_coords(m: &Matrix4<C64>) -> [f64; 16] {
    let mut v = [0.0; 16];
    for i in 0..4 {
        v[i] = m[(i, i)].re;
    }
    let mut k = 4;
    for i in 0..4 {
        for j in (i + 1)..4 {
            v[k] = m[(i, j)].re;
            v[k + 1] = m[(i, j)].im;
            k += 2;
        }
    }
    v
}

const NEEDED_RANK: usize = 16;

/// Rank of the measurement map over the 16-dimensional real space of
/// Hermitian matrices.
fn measurement_rank(ops: &[Matrix4<C64>]) -> usize {
    let rows = ops.len();
    let m = DMatrix::<f64>::from_fn(rows, 16, |r, c| hermitian_coords(&ops[r])[c]);
    let svd = m.svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|&&s| s > 1e-9 * smax).count()
}

struct Problem {
    ops: Vec<Matrix4<C64>>,
    counts: Vec<f64>,
    n_total: f64,
}

fn build_problem(records: &[CountRecord]) -> Result<Problem> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no count records".into()));
    }
    let mut ops = Vec::new();
    let mut counts = Vec::new();
    for rec in records {
        if rec.counts.len() != 36 {
            return Err(Error::Dimension {
                context: "count record",
                expected: 36,
                got: rec.counts.len(),
            });
        }
        let setting_ops = setting_operators(&rec.setting)?;
        for o in used_outcomes(&rec.setting) {
            ops.push(setting_ops[o]);
            counts.push(rec.counts[o] as f64);
        }
    }
    let n_total: f64 = counts.iter().sum();
    if n_total <= 0.0 {
        return Err(Error::InvalidInput("all counts are zero".into()));
    }

    let rank = measurement_rank(&ops);
    if rank < NEEDED_RANK {
        return Err(Error::IncompleteSettings { rank, needed: NEEDED_RANK });
    }

    // the plain iterative update is an ascent step only when the effects
    // sum to a multiple of the identity; refuse unbalanced sets loudly
    let mut g = Matrix4::from_element(C64::new(0.0, 0.0));
    for op in &ops {
        g += *op;
    }
    let scale = (g[(0, 0)].re + g[(1, 1)].re + g[(2, 2)].re + g[(3, 3)].re) / 4.0;
    let mut dev: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let expect = if i == j { C64::from(scale) } else { C64::new(0.0, 0.0) };
            dev = dev.max((g[(i, j)] - expect).norm());
        }
    }
    if dev > 1e-9 * scale.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "measurement effects are unbalanced: max |G - (trG/4)I| entry = {dev:.3e}"
        )));
    }
    Ok(Problem { ops, counts, n_total })
}

fn log_likelihood(p: &Problem, rho: &Matrix4<C64>) -> f64 {
    let mut ll = 0.0;
    for (op, &n) in p.ops.iter().zip(p.counts.iter()) {
        if n > 0.0 {
            ll += n * tr_prod(op, rho).max(1e-300).ln();
        }
    }
    ll
}

const MAX_ITERATIONS: usize = 10_000;
const LL_GAIN_STOP: f64 = 1e-10;

/// Iterative maximum-likelihood reconstruction (diluted R-rho-R updates,
/// dilution 0.5, started from the maximally mixed state).
///
/// Stops when the log-likelihood gain drops below 1e-10 or after 10^4
/// iterations. Refuses tomographically incomplete settings (measurement-map
/// rank below 16) and all-zero counts. The returned state is projected onto
/// the physical cone (eigenvalues clamped at zero, trace renormalized).
pub fn reconstruct_mle(records: &[CountRecord]) -> Result<ReconstructionResult> {
    let p = build_problem(records)?;
    let mut rho = Matrix4::<C64>::identity() * C64::from(0.25);
    let mut ll = log_likelihood(&p, &rho);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=MAX_ITERATIONS {
        iterations = it;
        // R = sum_j n_j / (N p_j) Pi_j
        let mut r = Matrix4::<C64>::from_element(C64::new(0.0, 0.0));
        for (op, &n) in p.ops.iter().zip(p.counts.iter()) {
            if n > 0.0 {
                let pj = tr_prod(op, &rho).max(1e-300);
                r += *op * C64::from(n / (p.n_total * pj));
            }
        }
        // accept the diluted update, halving the step if roundoff ever
        // makes the likelihood dip (it should not: each full step ascends)
        let round_eps = (1.0 + ll.abs()) * 1e-12;
        let mut lambda = 0.5;
        let mut accepted = None;
        for _ in 0..40 {
            let a = Matrix4::<C64>::identity() * C64::from(1.0 - lambda) + r * C64::from(lambda);
            let mut cand = a * rho * a;
            // re-hermitize and normalize
            cand = Matrix4::from_fn(|i, j| (cand[(i, j)] + cand[(j, i)].conj()) * C64::from(0.5));
            let tr = cand[(0, 0)].re + cand[(1, 1)].re + cand[(2, 2)].re + cand[(3, 3)].re;
            cand *= C64::from(1.0 / tr);
            let ll_cand = log_likelihood(&p, &cand);
            if ll_cand >= ll - round_eps {
                accepted = Some((cand, ll_cand));
                break;
            }
            lambda /= 2.0;
        }
        let Some((next, ll_next)) = accepted else {
            // no step improves the likelihood: we are at the fixed point up
            // to floating-point resolution
            converged = true;
            break;
        };
        let gain = ll_next - ll;
        rho = next;
        ll = ll_next;
        trace.push(ll);
        if gain < LL_GAIN_STOP {
            converged = true;
            break;
        }
    }

    // project onto the physical cone and validate exactly
    let d = DMatrix::from_fn(4, 4, |i, j| rho[(i, j)]);
    let (vals, vecs) = herm_eigs(&d)?;
    let clamped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    let diag = DMatrix::from_fn(4, 4, |i, j| {
        if i == j { C64::from(clamped[i] / total) } else { C64::new(0.0, 0.0) }
    });
    let rec = &vecs * diag * vecs.adjoint();
    Ok(ReconstructionResult {
        rho_hat: DensityMatrix::new(rec)?,
        log_likelihood: ll,
        iterations,
        converged,
        ll_trace: trace,
    })
}

/// Overlap fidelity of a state with a pure target, `<psi| rho |psi>`.
pub fn fidelity(rho: &DensityMatrix, target: &StateVector) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(Error::Dimension {
            context: "fidelity",
            expected: rho.dim(),
            got: target.dim(),
        });
    }
    let m = rho.matrix();
    let a = target.amplitudes();
    let mut f = C64::new(0.0, 0.0);
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            f += a[i].conj() * m[(i, j)] * a[j];
        }
    }
    Ok(f.re.clamp(0.0, 1.0))
}

/// sigma_y (x) sigma_y: anti-diagonal (-1, +1, +1, -1).
fn spin_flip_matrix() -> DMatrix<C64> {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    DMatrix::from_row_slice(
        4,
        4,
        &[
            z, z, z, -one, //
            z, z, one, z, //
            z, one, z, z, //
            -one, z, z, z,
        ],
    )
}

fn spin_flipped(rho: &DensityMatrix) -> DMatrix<C64> {
    let yy = spin_flip_matrix();
    let conj = rho.matrix().map(|v| v.conj());
    &yy * conj * &yy
}

fn check_two_qubit(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 4 {
        return Err(Error::Dimension { context: "concurrence", expected: 4, got: rho.dim() });
    }
    Ok(())
}

/// Two-qubit concurrence `max(0, l1 - l2 - l3 - l4)` where the `l_i`
/// (decreasing) are the eigenvalues of the R-matrix
/// `sqrt(sqrt(rho) rho~ sqrt(rho))`, `rho~` being the spin-flipped state.
///
/// Numerically the `l_i` are computed as the singular values of the
/// complex-symmetric matrix `tau = W^T (sy x sy) W`, where `rho = W W^+`
/// with subnormalized eigenvectors as columns — an exact identity that
/// avoids square-rooting roundoff-sized eigenvalues (which would cost
/// half the significant digits precisely at the pure states the
/// reference values pin to 1e-10).
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    check_two_qubit(rho)?;
    let (vals, vecs) = herm_eigs(rho.matrix())?;
    let mut w = vecs.clone();
    for (k, &mu) in vals.iter().enumerate() {
        let s = C64::from(mu.max(0.0).sqrt());
        for i in 0..4 {
            w[(i, k)] *= s;
        }
    }
    let tau = w.transpose() * spin_flip_matrix() * &w;
    // singular values through the Hermitian embedding [[0, tau], [tau^+, 0]],
    // whose spectrum is {+s_i} U {-s_i}
    let mut emb = DMatrix::<C64>::zeros(8, 8);
    for i in 0..4 {
        for j in 0..4 {
            emb[(i, j + 4)] = tau[(i, j)];
            emb[(i + 4, j)] = tau[(j, i)].conj();
        }
    }
    let (svals, _) = herm_eigs(&emb)?;
    let c = svals[0] - svals[1] - svals[2] - svals[3];
    Ok(c.clamp(0.0, 1.0))
}

/// The same quantity from the square roots of the eigenvalues of the
/// (non-Hermitian) product `rho * rho~`, computed through the real 8x8
/// embedding `[[Re, -Im], [Im, Re]]` whose spectrum doubles the complex one.
pub fn concurrence_via_product(rho: &DensityMatrix) -> Result<f64> {
    check_two_qubit(rho)?;
    let prod = rho.matrix() * spin_flipped(rho);
    let mut emb = DMatrix::<f64>::zeros(8, 8);
    for i in 0..4 {
        for j in 0..4 {
            emb[(i, j)] = prod[(i, j)].re;
            emb[(i, j + 4)] = -prod[(i, j)].im;
            emb[(i + 4, j)] = prod[(i, j)].im;
            emb[(i + 4, j + 4)] = prod[(i, j)].re;
        }
    }
    let eigs = emb.complex_eigenvalues();
    let mut re: Vec<f64> = eigs
        .iter()
        .map(|z| {
            if z.im.abs() > 1e-8 {
                return f64::NAN;
            }
            z.re
        })
        .collect();
    if re.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical(
            "product spectrum is not real: rho * rho~ should have real non-negative eigenvalues"
                .into(),
        ));
    }
    // rank-deficient products carry exact-zero eigenvalues that the solver
    // returns as O(eps * scale) noise; square-rooting that noise would cost
    // half the significant digits, so treat it as the zero it is
    let scale = re.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 64.0 * f64::EPSILON * scale;
    for v in re.iter_mut() {
        if v.abs() < floor {
            *v = 0.0;
        }
    }
    re.sort_by(|a, b| b.total_cmp(a));
    // each complex eigenvalue appears twice in the embedding; take one of
    // each adjacent pair
    let lams: Vec<f64> = [0, 2, 4, 6].iter().map(|&k| re[k].max(0.0).sqrt()).collect();
    let c = lams[0] - lams[1] - lams[2] - lams[3];
    Ok(c.clamp(0.0, 1.0))
}

/// trace(rho^2).
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}

/// Figures of merit of a state against a pure target.
pub fn entanglement_report(rho: &DensityMatrix, target: &StateVector) -> Result<EntanglementReport> {
    Ok(EntanglementReport {
        fidelity_target: target.clone(),
        fidelity: fidelity(rho, target)?,
        concurrence: concurrence(rho)?,
        purity: purity(rho),
    })
}

/// Parametric bootstrap of the figures of merit: reconstruct once, then
/// resample counts from the fitted state at the original settings and
/// totals, re-reconstruct, and report mean/std of fidelity and concurrence.
/// Resample `r` draws only from the `(seed, r)` stream.
pub fn bootstrap_entanglement(
    records: &[CountRecord],
    target: &StateVector,
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapStats> {
    if n_resamples < 2 {
        return Err(Error::InvalidInput("bootstrap needs at least 2 resamples".into()));
    }
    let point = reconstruct_mle(records)?;
    let rho4 = Matrix4::from_fn(|i, j| point.rho_hat.matrix()[(i, j)]);
    // per-record outcome probabilities under the fitted state
    let mut probs = Vec::with_capacity(records.len());
    for rec in records {
        let ops = setting_operators(&rec.setting)?;
        let p: Vec<f64> = ops.iter().map(|op| tr_prod(op, &rho4).max(0.0)).collect();
        probs.push(p);
    }
    let pairs: Vec<Result<(f64, f64)>> = (0..n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, Domain::Bootstrap, r as u64);
            let mut resampled = Vec::with_capacity(records.len());
            for (rec, p) in records.iter().zip(probs.iter()) {
                let counts = multinomial(&mut rng, rec.n_total, p);
                resampled.push(CountRecord::new(rec.setting, counts, rec.n_total)?);
            }
            let fit = reconstruct_mle(&resampled)?;
            Ok((fidelity(&fit.rho_hat, target)?, concurrence(&fit.rho_hat)?))
        })
        .collect();
    let mut fs = Vec::with_capacity(n_resamples);
    let mut cs = Vec::with_capacity(n_resamples);
    for p in pairs {
        let (f, c) = p?;
        fs.push(f);
        cs.push(c);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let std = |v: &[f64], m: f64| {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let (fm, cm) = (mean(&fs), mean(&cs));
    Ok(BootstrapStats {
        n_resamples,
        fidelity_mean: fm,
        fidelity_std: std(&fs, fm),
        concurrence_mean: cm,
        concurrence_std: std(&cs, cm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::trace_distance;
    use crate::source::{ideal_ket, ideal_state, x_state};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn werner(v: f64) -> DensityMatrix {
        let phi = ideal_state(0.0);
        let m = phi.matrix() * C64::from(v)
            + DMatrix::<C64>::identity(4, 4) * C64::from((1.0 - v) / 4.0);
        DensityMatrix::new(m).unwrap()
    }

    #[test]
    fn fidelity_basics() {
        let phi = ideal_ket(0.0);
        assert!((fidelity(&ideal_state(0.0), &phi).unwrap() - 1.0).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(4);
        assert!((fidelity(&mixed, &phi).unwrap() - 0.25).abs() < 1e-12);
        // X-state with coherence V/2 against the matching Bell target
        let rho = x_state(0.78, 0.0, PI).unwrap();
        let target = ideal_ket(PI);
        assert!((fidelity(&rho, &target).unwrap() - 0.89).abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_linear_in_the_state() {
        let target = ideal_ket(0.3);
        let r1 = x_state(0.6, 0.1, 0.3).unwrap();
        let r2 = DensityMatrix::maximally_mixed(4);
        for lam in [0.0, 0.25, 0.6, 1.0] {
            let mix = DensityMatrix::new(
                r1.matrix() * C64::from(lam) + r2.matrix() * C64::from(1.0 - lam),
            )
            .unwrap();
            let lhs = fidelity(&mix, &target).unwrap();
            let rhs = lam * fidelity(&r1, &target).unwrap()
                + (1.0 - lam) * fidelity(&r2, &target).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn concurrence_reference_values() {
        assert!((concurrence(&ideal_state(0.0)).unwrap() - 1.0).abs() < 1e-9);
        assert!((concurrence(&ideal_state(PI)).unwrap() - 1.0).abs() < 1e-9);
        assert!(concurrence(&DensityMatrix::maximally_mixed(4)).unwrap() < 1e-9);
        // Werner family: C = max(0, (3v - 1)/2)
        assert!((concurrence(&werner(0.8)).unwrap() - 0.7).abs() < 1e-9);
        for k in 0..50 {
            let v = k as f64 / 49.0;
            let expect = ((3.0 * v - 1.0) / 2.0).max(0.0);
            let c = concurrence(&werner(v)).unwrap();
            assert!((c - expect).abs() < 1e-9, "v = {v}: {c} vs {expect}");
        }
        // X-state closed form 2|c| with c = V/2 (balanced)
        let rho = x_state(0.78, 0.0, 0.7).unwrap();
        assert!((concurrence(&rho).unwrap() - 0.78).abs() < 1e-9);
    }

    #[test]
    fn concurrence_matches_pure_state_closed_form() {
        // C(|psi>) = 2 |a d - b c| for amplitudes (a, b, c, d)
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let amps: Vec<C64> = (0..4)
                .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let psi = StateVector::normalized(amps.clone()).unwrap();
            let a = psi.amplitudes();
            let expect = 2.0 * (a[0] * a[3] - a[1] * a[2]).norm();
            let c = concurrence(&psi.to_density()).unwrap();
            assert!((c - expect).abs() < 1e-9, "{c} vs {expect}");
        }
    }

    fn random_local_unitary(rng: &mut impl Rng) -> DMatrix<C64> {
        let g = DMatrix::from_fn(2, 2, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let qr = g.qr();
        let q = qr.q();
        let r = qr.r();
        // fix the phase so Q is unique (diagonal of R positive)
        DMatrix::from_fn(2, 2, |i, j| {
            let d = r[(j, j)];
            q[(i, j)] * d / C64::from(d.norm().max(1e-300))
        })
    }

    #[test]
    fn concurrence_is_invariant_under_local_unitaries() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let states = [
            ideal_state(0.4),
            werner(0.75),
            x_state(0.6, 0.2, 1.1).unwrap(),
        ];
        for k in 0..100 {
            let rho = &states[k % states.len()];
            let u = random_local_unitary(&mut rng).kronecker(&random_local_unitary(&mut rng));
            let rotated = DensityMatrix::new(&u * rho.matrix() * u.adjoint()).unwrap();
            let c0 = concurrence(rho).unwrap();
            let c1 = concurrence(&rotated).unwrap();
            assert!((c0 - c1).abs() < 1e-8, "case {k}: {c0} vs {c1}");
        }
    }

    #[test]
    fn both_concurrence_routes_agree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let mut states: Vec<DensityMatrix> = vec![
            ideal_state(0.0),
            DensityMatrix::maximally_mixed(4),
            werner(0.3),
            werner(0.9),
            x_state(0.78, 0.1, 2.2).unwrap(),
        ];
        for _ in 0..30 {
            let g = DMatrix::from_fn(4, 4, |_, _| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let psd = &g * g.adjoint();
            let tr: f64 = psd.diagonal().iter().map(|z| z.re).sum();
            states.push(DensityMatrix::new(psd / C64::from(tr)).unwrap());
        }
        for (i, rho) in states.iter().enumerate() {
            let a = concurrence(rho).unwrap();
            let b = concurrence_via_product(rho).unwrap();
            assert!((a - b).abs() < 1e-9, "state {i}: {a} vs {b}");
        }
    }

    #[test]
    fn concurrence_equals_two_fidelity_minus_one_on_balanced_x_states() {
        for k in 0..20 {
            let v = 0.5 + 0.5 * k as f64 / 19.0; // entangled branch
            let rho = x_state(v, 0.0, PI).unwrap();
            let f = fidelity(&rho, &ideal_ket(PI)).unwrap();
            let c = concurrence(&rho).unwrap();
            assert!((c - (2.0 * f - 1.0)).abs() < 1e-10, "v = {v}");
        }
    }

    #[test]
    fn purity_values() {
        assert!((purity(&ideal_state(0.0)) - 1.0).abs() < 1e-12);
        assert!((purity(&DensityMatrix::maximally_mixed(4)) - 0.25).abs() < 1e-12);
        let v = 0.78;
        let rho = x_state(v, 0.0, 0.0).unwrap();
        assert!((purity(&rho) - 0.5 * (1.0 + v * v)).abs() < 1e-12);
    }

    #[test]
    fn default_settings_cover_the_grid() {
        let s = default_settings(true);
        assert_eq!(s.len(), 16);
        assert!(s.iter().all(|x| x.includes_time_basis));
        assert!(s.iter().all(|x| x.validate().is_ok()));
        assert!((s[0].phi1 - 0.0).abs() < 1e-15 && (s[1].phi2 - TAU / 4.0).abs() < 1e-15);
        assert!(MeasurementSetting::new(-0.1, 0.0, true).is_err());
        assert!(MeasurementSetting::new(0.0, TAU, true).is_err());
    }

    #[test]
    fn simulated_counts_follow_the_joint_law() {
        let settings = vec![MeasurementSetting::new(0.0, 0.0, true).unwrap()];
        let n = 1_000_000u64;
        let recs = simulate_counts(&ideal_state(0.0), &settings, n, 42).unwrap();
        assert_eq!(recs.len(), 1);
        let rec = &recs[0];
        assert_eq!(rec.counts.iter().sum::<u64>(), n); // lossless
        // A-mid/A-mid holds 1/8 of the mass
        let idx = 1 * 6 + 1;
        let p_hat = rec.counts[idx] as f64 / n as f64;
        let sigma = (0.125 * 0.875 / n as f64).sqrt();
        assert!((p_hat - 0.125).abs() < 3.0 * sigma, "{p_hat} vs 1/8 (sigma {sigma})");
    }

    #[test]
    fn localized_pair_never_hits_late_slots() {
        let ee = StateVector::new(vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ])
        .unwrap()
        .to_density();
        let recs = simulate_counts(&ee, &default_settings(true), 20_000, 7).unwrap();
        for rec in &recs {
            for o1 in 0..6 {
                for o2 in 0..6 {
                    let late1 = o1 % 3 == 2;
                    let late2 = o2 % 3 == 2;
                    if late1 || late2 {
                        assert_eq!(rec.counts[o1 * 6 + o2], 0);
                    }
                }
            }
        }
    }

    #[test]
    fn counts_are_reproducible_per_setting_stream() {
        let s = default_settings(true);
        let a = simulate_counts(&werner(0.7), &s, 5_000, 99).unwrap();
        let b = simulate_counts(&werner(0.7), &s, 5_000, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate_counts(&werner(0.7), &s, 5_000, 100).unwrap();
        assert_ne!(a, c);
        // setting i depends only on (seed, i): a subset re-simulation matches
        let sub = simulate_counts(&werner(0.7), &s[..4], 5_000, 99).unwrap();
        assert_eq!(&a[..4], &sub[..]);
    }

    #[test]
    fn reconstruction_round_trips_reference_states() {
        let settings = default_settings(true);
        let cases: Vec<(&str, DensityMatrix, f64)> = vec![
            ("bell", ideal_state(0.0), 0.995),
            ("realistic", x_state(0.78, 0.0, PI).unwrap(), 0.995),
            ("mixed", DensityMatrix::maximally_mixed(4), 0.995),
        ];
        for (name, truth, floor) in cases {
            let recs = simulate_counts(&truth, &settings, 100_000, 4).unwrap();
            let fit = reconstruct_mle(&recs).unwrap();
            assert!(fit.converged, "{name} did not converge");
            let f = crate::hilbert::fidelity_mixed(&fit.rho_hat, &truth).unwrap();
            assert!(f >= floor, "{name}: fidelity {f}");
            // the likelihood trace never decreases beyond summation noise
            for w in fit.ll_trace.windows(2) {
                let eps = (1.0 + w[0].abs()) * 1e-12;
                assert!(w[1] >= w[0] - eps, "{name}: ll dropped {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn reconstructed_concurrence_matches_the_source_coherence() {
        let truth = x_state(0.78, 0.0, PI).unwrap();
        let recs = simulate_counts(&truth, &default_settings(true), 100_000, 21).unwrap();
        let fit = reconstruct_mle(&recs).unwrap();
        let c = concurrence(&fit.rho_hat).unwrap();
        assert!((c - 0.78).abs() < 0.02, "concurrence {c}");
        let f = fidelity(&fit.rho_hat, &ideal_ket(PI)).unwrap();
        assert!((f - 0.89).abs() < 0.02, "fidelity {f}");
    }

    #[test]
    fn error_shrinks_with_count_volume() {
        let truth = x_state(0.8, 0.05, 0.9).unwrap();
        let settings = default_settings(true);
        let mut errs = Vec::new();
        for (i, n) in [1_000u64, 10_000, 100_000].into_iter().enumerate() {
            let recs = simulate_counts(&truth, &settings, n, 70 + i as u64).unwrap();
            let fit = reconstruct_mle(&recs).unwrap();
            errs.push(trace_distance(&fit.rho_hat, &truth).unwrap());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "errors {errs:?}");
    }

    #[test]
    fn equator_only_settings_are_refused_with_rank_report() {
        let truth = ideal_state(0.0);
        let recs = simulate_counts(&truth, &default_settings(false), 10_000, 3).unwrap();
        match reconstruct_mle(&recs).unwrap_err() {
            Error::IncompleteSettings { rank, needed } => {
                assert!(rank < 16, "rank {rank}");
                assert_eq!(needed, 16);
            }
            other => panic!("expected IncompleteSettings, got {other:?}"),
        }
    }

    #[test]
    fn mixed_full_and_equator_records_reconstruct_consistently() {
        // an equator-only record uses just the four middle-middle effects;
        // those sum to I/4, so adding it keeps the effect sum proportional
        // to the identity and the joint fit stays consistent (its missing
        // mass is state-independent)
        let truth = ideal_state(0.0);
        let mut settings = default_settings(true);
        settings.push(MeasurementSetting::new(0.1, 0.2, false).unwrap());
        let recs = simulate_counts(&truth, &settings, 50_000, 3).unwrap();
        let fit = reconstruct_mle(&recs).unwrap();
        assert!(fit.converged);
        let f = crate::hilbert::fidelity_mixed(&fit.rho_hat, &truth).unwrap();
        assert!(f >= 0.995, "fidelity {f}");
    }

    #[test]
    fn zero_counts_are_refused() {
        let setting = MeasurementSetting::new(0.0, 0.0, true).unwrap();
        let rec = CountRecord::new(setting, vec![0; 36], 100).unwrap();
        assert!(matches!(reconstruct_mle(&[rec]).unwrap_err(), Error::InvalidInput(_)));
        assert!(reconstruct_mle(&[]).is_err());
    }

    #[test]
    fn count_record_validation() {
        let s = MeasurementSetting::new(0.0, 0.0, true).unwrap();
        assert!(CountRecord::new(s, vec![0; 35], 10).is_err());
        assert!(CountRecord::new(s, vec![1; 36], 10).is_err()); // sum 36 > 10
        assert!(CountRecord::new(s, vec![1; 36], 36).is_ok());
    }

    #[test]
    fn bootstrap_spreads_are_finite_and_centered() {
        let truth = x_state(0.78, 0.0, PI).unwrap();
        let recs = simulate_counts(&truth, &default_settings(true), 3_000, 12).unwrap();
        let target = ideal_ket(PI);
        let stats = bootstrap_entanglement(&recs, &target, 20, 5).unwrap();
        assert!(stats.fidelity_std > 0.0 && stats.fidelity_std < 0.05);
        assert!(stats.concurrence_std > 0.0 && stats.concurrence_std < 0.1);
        assert!((stats.fidelity_mean - 0.89).abs() < 0.05);
        assert!((stats.concurrence_mean - 0.78).abs() < 0.1);
        assert!(bootstrap_entanglement(&recs, &target, 1, 5).is_err());
    }

    #[test]
    fn multinomial_sampler_is_unbiased_enough() {
        // 4-sigma check of the conditional-binomial construction
        let probs = [0.1, 0.2, 0.3, 0.4];
        let mut rng = stream_rng(8, Domain::TomoCounts, 0);
        let n = 200_000u64;
        let counts = multinomial(&mut rng, n, &probs);
        assert_eq!(counts.iter().sum::<u64>(), n);
        for (k, &p) in probs.iter().enumerate() {
            let sigma = (p * (1.0 - p) * n as f64).sqrt();
            let diff = counts[k] as f64 - p * n as f64;
            assert!(diff.abs() < 4.0 * sigma, "outcome {k}: diff {diff}, sigma {sigma}");
        }
    }
}
