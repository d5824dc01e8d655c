//! Dense complex linear algebra for few-qubit states.
//!
//! Dimensions in this crate are tiny (at most 16, for a polarization x
//! time-bin hyperentangled pair), so everything is dense and eager. Numeric
//! checks follow a fixed tolerance ladder:
//!
//! ```text
//! TOL_ARITHMETIC     1e-12   plain arithmetic identities
//! TOL_STATE          1e-10   state invariants (hermiticity, unit trace/norm)
//! TOL_SPECTRAL       1e-9    anything passing through an eigensolver
//! TOL_RECONSTRUCTION 1e-8    matrices rebuilt from spectra
//! ```
//!
//! Tighter checks fail loudly instead of being silently loosened.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const TOL_ARITHMETIC: f64 = 1e-12;
pub const TOL_STATE: f64 = 1e-10;
pub const TOL_SPECTRAL: f64 = 1e-9;
pub const TOL_RECONSTRUCTION: f64 = 1e-8;

/// Eigenvalues of a nominally positive matrix in `[-PSD_CLAMP, 0)` are
/// treated as numerical noise and clamped to zero by [`psd_sqrt`]; anything
/// below `-PSD_CLAMP` is a genuine negativity and an error.
pub const PSD_CLAMP: f64 = 1e-6;

/// Largest `|m - m^H|` entry.
pub fn hermiticity_deviation(m: &DMatrix<C64>) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Trace of a square matrix.
pub fn trace(m: &DMatrix<C64>) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// tr(a * b) without forming the product.
pub fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = C64::from(0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// A pure state: complex amplitudes with unit norm (within `TOL_STATE`).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidState("state vector must be non-empty".into()));
        }
        let amps = DVector::from_vec(amplitudes);
        let norm = amps.norm();
        if (norm - 1.0).abs() > TOL_STATE {
            return Err(Error::InvalidState(format!(
                "state vector norm {norm} deviates from 1 by more than {TOL_STATE}"
            )));
        }
        Ok(Self { amps })
    }

    /// Build from unnormalized amplitudes, rescaling to unit norm.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let amps = DVector::from_vec(amplitudes);
        let norm = amps.norm();
        if norm < 1e-300 {
            return Err(Error::InvalidState("cannot normalize the zero vector".into()));
        }
        Ok(Self { amps: amps / C64::from(norm) })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn amplitude(&self, i: usize) -> C64 {
        self.amps[i]
    }

    /// Kronecker product, left factor major: index = i_self * other.dim + i_other.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        StateVector { amps: self.amps.kronecker(&other.amps) }
    }

    /// The projector |psi><psi| as a density matrix.
    pub fn to_density(&self) -> DensityMatrix {
        let m = &self.amps * self.amps.adjoint();
        DensityMatrix { m }
    }

    /// <self|other>.
    pub fn overlap(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension {
                context: "overlap",
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self.amps.dotc(&other.amps))
    }
}

/// Which factor of a bipartite product to keep in a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

/// A density matrix: Hermitian (1e-10), unit trace (1e-10), eigenvalues
/// >= -1e-9. Construction validates all three.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension {
                context: "density matrix",
                expected: m.nrows().max(1),
                got: m.ncols(),
            });
        }
        let dev = hermiticity_deviation(&m);
        if dev > TOL_STATE {
            return Err(Error::NonHermitian { deviation: dev });
        }
        let tr = trace(&m);
        if (tr.re - 1.0).abs() > TOL_STATE || tr.im.abs() > TOL_STATE {
            return Err(Error::InvalidState(format!(
                "density matrix trace {tr} deviates from 1 by more than {TOL_STATE}"
            )));
        }
        let eigs = m.clone().symmetric_eigen().eigenvalues;
        if let Some(min) = eigs.iter().cloned().reduce(f64::min) {
            if min < -TOL_SPECTRAL {
                return Err(Error::InvalidState(format!(
                    "density matrix has eigenvalue {min:.3e} below -{TOL_SPECTRAL}"
                )));
            }
        }
        Ok(Self { m })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        psi.to_density()
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let m = DMatrix::from_diagonal_element(dim, dim, C64::from(1.0 / dim as f64));
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    /// Kronecker product, left factor major.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix { m: self.m.kronecker(&other.m) }
    }

    /// Trace out one factor of a `dims.0 x dims.1` product space.
    pub fn partial_trace(&self, dims: (usize, usize), keep: Keep) -> Result<DensityMatrix> {
        let (da, db) = dims;
        if da * db != self.dim() {
            return Err(Error::Dimension {
                context: "partial trace",
                expected: self.dim(),
                got: da * db,
            });
        }
        let m = match keep {
            Keep::First => DMatrix::from_fn(da, da, |i, j| {
                (0..db).map(|k| self.m[(i * db + k, j * db + k)]).sum()
            }),
            Keep::Second => DMatrix::from_fn(db, db, |k, l| {
                (0..da).map(|i| self.m[(i * db + k, i * db + l)]).sum()
            }),
        };
        // reduced state of a valid state is valid; validate anyway
        DensityMatrix::new(m)
    }

    /// Eigenvalues, descending. Always real within `TOL_SPECTRAL` of the
    /// stored spectrum.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let (vals, _) = herm_eigs(&self.m).expect("density matrix is Hermitian by construction");
        vals
    }

    /// tr(rho^2).
    pub fn purity(&self) -> f64 {
        trace(&(&self.m * &self.m)).re
    }
}

/// A general square operator. Hermiticity is checked where an operation
/// requires it, not at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
}

impl Operator {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension {
                context: "operator",
                expected: m.nrows().max(1),
                got: m.ncols(),
            });
        }
        Ok(Self { m })
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn is_hermitian(&self) -> bool {
        hermiticity_deviation(&self.m) <= TOL_STATE
    }

    /// Kronecker product, left factor major.
    pub fn tensor(&self, other: &Operator) -> Operator {
        Operator { m: self.m.kronecker(&other.m) }
    }
}

/// Hermitian eigendecomposition with eigenvalues sorted descending and
/// eigenvector columns permuted to match. Errors if the input deviates from
/// Hermitian by more than `TOL_STATE`.
pub fn herm_eigs(m: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let dev = hermiticity_deviation(m);
    if dev > TOL_STATE {
        return Err(Error::NonHermitian { deviation: dev });
    }
    let se = m.clone().symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| se.eigenvectors[(r, order[c])]);
    Ok((vals, vecs))
}

/// Square root of a positive semidefinite Hermitian matrix.
///
/// Eigenvalues in `[-PSD_CLAMP, 0)` are clamped to zero; anything below
/// `-PSD_CLAMP` is an error rather than a silent fix.
pub fn psd_sqrt(m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let (vals, vecs) = herm_eigs(m)?;
    let mut roots = Vec::with_capacity(vals.len());
    for &v in &vals {
        if v < -PSD_CLAMP {
            return Err(Error::InvalidState(format!(
                "matrix is not positive semidefinite: eigenvalue {v:.3e} below -{PSD_CLAMP}"
            )));
        }
        roots.push(C64::from(v.max(0.0).sqrt()));
    }
    let d = DMatrix::from_diagonal(&DVector::from_vec(roots));
    Ok(&vecs * d * vecs.adjoint())
}

/// tr(rho * op). Real within `TOL_STATE` when `op` is Hermitian.
pub fn expectation(rho: &DensityMatrix, op: &Operator) -> Result<C64> {
    if rho.dim() != op.dim() {
        return Err(Error::Dimension {
            context: "expectation",
            expected: rho.dim(),
            got: op.dim(),
        });
    }
    Ok(trace(&(rho.matrix() * op.matrix())))
}

/// Uhlmann fidelity of two density matrices: (tr sqrt(sqrt(a) b sqrt(a)))^2.
pub fn fidelity_mixed(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            context: "fidelity",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let sa = psd_sqrt(a.matrix())?;
    let inner = &sa * b.matrix() * &sa;
    let root = psd_sqrt(&inner)?;
    let f = trace(&root).re.powi(2);
    Ok(f.clamp(0.0, 1.0))
}

/// Trace distance (1/2) * sum |eig(a - b)|.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            context: "trace distance",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let diff = a.matrix() - b.matrix();
    let (vals, _) = herm_eigs(&diff)?;
    Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_ginibre(n: usize, r: &mut ChaCha8Rng) -> DMatrix<C64> {
        DMatrix::from_fn(n, n, |_, _| c(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5))
    }

    fn random_psd(n: usize, r: &mut ChaCha8Rng) -> DMatrix<C64> {
        let g = random_ginibre(n, r);
        let p = &g * g.adjoint();
        let t = trace(&p).re;
        p / C64::from(t)
    }

    fn random_unitary(n: usize, r: &mut ChaCha8Rng) -> DMatrix<C64> {
        random_ginibre(n, r).qr().q()
    }

    /// Independent Kronecker product oracle: direct index arithmetic.
    fn naive_kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
        let (ra, ca) = (a.nrows(), a.ncols());
        let (rb, cb) = (b.nrows(), b.ncols());
        DMatrix::from_fn(ra * rb, ca * cb, |i, j| {
            a[(i / rb, j / cb)] * b[(i % rb, j % cb)]
        })
    }

    fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn state_vector_validates_norm() {
        assert!(StateVector::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).is_ok());
        assert!(StateVector::new(vec![c(1.0, 0.0), c(0.5, 0.0)]).is_err());
        let s = StateVector::normalized(vec![c(3.0, 0.0), c(4.0, 0.0)]).unwrap();
        assert!((s.amplitude(0).re - 0.6).abs() < TOL_ARITHMETIC);
        assert!(StateVector::normalized(vec![c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn tensor_matches_naive_kron() {
        let mut r = rng(11);
        for _ in 0..20 {
            let a = Operator::new(random_ginibre(2, &mut r)).unwrap();
            let b = Operator::new(random_ginibre(3, &mut r)).unwrap();
            let k = a.tensor(&b);
            assert!(max_abs_diff(k.matrix(), &naive_kron(a.matrix(), b.matrix())) < TOL_ARITHMETIC);
        }
        // index convention: left factor major
        let e0 = StateVector::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let e1 = StateVector::new(vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let s = e1.tensor(&e0); // |1>|0> -> index 2
        assert!((s.amplitude(2).re - 1.0).abs() < TOL_ARITHMETIC);
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        let i2 = Operator::identity(2);
        let i4 = i2.tensor(&i2);
        assert!(max_abs_diff(i4.matrix(), Operator::identity(4).matrix()) < TOL_ARITHMETIC);
    }

    #[test]
    fn partial_trace_inverts_tensor() {
        let mut r = rng(21);
        for _ in 0..20 {
            let a = DensityMatrix::new(random_psd(2, &mut r)).unwrap();
            let b = DensityMatrix::new(random_psd(3, &mut r)).unwrap();
            let prod = a.tensor(&b);
            let ra = prod.partial_trace((2, 3), Keep::First).unwrap();
            let rb = prod.partial_trace((2, 3), Keep::Second).unwrap();
            assert!(max_abs_diff(ra.matrix(), a.matrix()) < TOL_ARITHMETIC);
            assert!(max_abs_diff(rb.matrix(), b.matrix()) < TOL_ARITHMETIC);
        }
    }

    #[test]
    fn partial_trace_of_bell_state_is_mixed() {
        let inv = 1.0 / 2f64.sqrt();
        let bell = StateVector::new(vec![c(inv, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(inv, 0.0)])
            .unwrap()
            .to_density();
        for keep in [Keep::First, Keep::Second] {
            let red = bell.partial_trace((2, 2), keep).unwrap();
            assert!(
                max_abs_diff(red.matrix(), DensityMatrix::maximally_mixed(2).matrix())
                    < TOL_ARITHMETIC
            );
        }
    }

    #[test]
    fn partial_trace_matches_index_sum_oracle() {
        let mut r = rng(31);
        let rho = DensityMatrix::new(random_psd(6, &mut r)).unwrap();
        let red = rho.partial_trace((2, 3), Keep::First).unwrap();
        // oracle: explicit double loop, written independently of the impl
        for i in 0..2 {
            for j in 0..2 {
                let mut s = c(0.0, 0.0);
                for k in 0..3 {
                    s += rho.entry(i * 3 + k, j * 3 + k);
                }
                assert!((red.entry(i, j) - s).norm() < TOL_ARITHMETIC);
            }
        }
    }

    #[test]
    fn herm_eigs_on_pauli_y() {
        let sy = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let (vals, vecs) = herm_eigs(&sy).unwrap();
        assert!((vals[0] - 1.0).abs() < TOL_SPECTRAL);
        assert!((vals[1] + 1.0).abs() < TOL_SPECTRAL);
        // reconstruction
        let d = DMatrix::from_diagonal(&DVector::from_vec(
            vals.iter().map(|&v| C64::from(v)).collect(),
        ));
        assert!(max_abs_diff(&(&vecs * d * vecs.adjoint()), &sy) < TOL_RECONSTRUCTION);
    }

    #[test]
    fn herm_eigs_sorted_descending_and_unitarily_invariant() {
        let mut r = rng(41);
        for _ in 0..50 {
            let h0 = random_psd(4, &mut r);
            let (vals, _) = herm_eigs(&h0).unwrap();
            for w in vals.windows(2) {
                assert!(w[0] >= w[1] - TOL_SPECTRAL);
            }
            let u = random_unitary(4, &mut r);
            let h1 = &u * &h0 * u.adjoint();
            let (vals_u, _) = herm_eigs(&h1).unwrap();
            for (a, b) in vals.iter().zip(vals_u.iter()) {
                assert!((a - b).abs() < TOL_SPECTRAL);
            }
        }
    }

    #[test]
    fn herm_eigs_roots_annihilate_characteristic_polynomial() {
        let mut r = rng(51);
        let h = random_psd(4, &mut r);
        let (vals, _) = herm_eigs(&h).unwrap();
        for &v in &vals {
            let shifted = &h - DMatrix::from_diagonal_element(4, 4, C64::from(v));
            assert!(shifted.determinant().norm() < 1e-10);
        }
    }

    #[test]
    fn herm_eigs_rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(herm_eigs(&m), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn psd_sqrt_known_cases() {
        let half = DensityMatrix::maximally_mixed(2);
        let s = psd_sqrt(half.matrix()).unwrap();
        let expect = DMatrix::from_diagonal_element(2, 2, C64::from(0.5f64.sqrt()));
        assert!(max_abs_diff(&s, &expect) < TOL_RECONSTRUCTION);

        // projectors are their own square root
        let psi = StateVector::normalized(vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let p = psi.to_density();
        assert!(max_abs_diff(&psd_sqrt(p.matrix()).unwrap(), p.matrix()) < TOL_RECONSTRUCTION);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::from(0.64),
            C64::from(0.36),
            C64::from(0.0),
            C64::from(0.0),
        ]));
        let sd = psd_sqrt(&d).unwrap();
        assert!((sd[(0, 0)].re - 0.8).abs() < TOL_RECONSTRUCTION);
        assert!((sd[(1, 1)].re - 0.6).abs() < TOL_RECONSTRUCTION);
    }

    #[test]
    fn psd_sqrt_squares_back_on_random_psd() {
        let mut r = rng(61);
        for _ in 0..1000 {
            let p = random_psd(4, &mut r);
            let s = psd_sqrt(&p).unwrap();
            assert!(max_abs_diff(&(&s * &s), &p) < TOL_RECONSTRUCTION);
        }
    }

    #[test]
    fn psd_sqrt_clamps_noise_but_rejects_negativity() {
        let near = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::from(1.0),
            C64::from(-1e-7),
        ]));
        let s = psd_sqrt(&near).unwrap();
        assert!((s[(1, 1)].re).abs() < TOL_ARITHMETIC);

        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::from(1.0),
            C64::from(-1e-5),
        ]));
        assert!(psd_sqrt(&bad).is_err());
    }

    #[test]
    fn expectation_against_spectral_oracle() {
        let mut r = rng(71);
        let rho = DensityMatrix::new(random_psd(4, &mut r)).unwrap();
        let g = random_ginibre(4, &mut r);
        let herm = Operator::new(&g + g.adjoint()).unwrap();
        let e = expectation(&rho, &herm).unwrap();
        assert!(e.im.abs() < TOL_STATE);
        // oracle: sum_k lambda_k <v_k| rho |v_k>
        let (vals, vecs) = herm_eigs(herm.matrix()).unwrap();
        let mut acc = 0.0;
        for k in 0..4 {
            let v = vecs.column(k);
            let mut q = c(0.0, 0.0);
            for i in 0..4 {
                for j in 0..4 {
                    q += v[i].conj() * rho.entry(i, j) * v[j];
                }
            }
            acc += vals[k] * q.re;
        }
        assert!((e.re - acc).abs() < 1e-10);
    }

    #[test]
    fn expectation_trivials() {
        let mixed = DensityMatrix::maximally_mixed(2);
        let sy = Operator::new(DMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
        ))
        .unwrap();
        assert!(expectation(&mixed, &sy).unwrap().norm() < TOL_ARITHMETIC);

        let e0 = StateVector::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let proj = Operator::new(e0.to_density().matrix().clone()).unwrap();
        let rho = e0.to_density();
        assert!((expectation(&rho, &proj).unwrap().re - 1.0).abs() < TOL_ARITHMETIC);
    }

    #[test]
    fn density_matrix_validation() {
        // non-hermitian
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(0.5, 0.0)]);
        assert!(matches!(DensityMatrix::new(m), Err(Error::NonHermitian { .. })));
        // wrong trace
        let m = DMatrix::from_diagonal_element(2, 2, C64::from(1.0));
        assert!(DensityMatrix::new(m).is_err());
        // negative eigenvalue
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::from(1.5), C64::from(-0.5)]));
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn fidelity_mixed_reduces_to_overlap_for_pure_states() {
        let mut r = rng(81);
        for _ in 0..20 {
            let g = random_ginibre(4, &mut r);
            let a = StateVector::normalized(g.column(0).iter().cloned().collect()).unwrap();
            let b = StateVector::normalized(g.column(1).iter().cloned().collect()).unwrap();
            let f = fidelity_mixed(&a.to_density(), &b.to_density()).unwrap();
            let ov = a.overlap(&b).unwrap().norm_sqr();
            assert!((f - ov).abs() < 1e-7);
        }
    }

    #[test]
    fn fidelity_and_trace_distance_extremes() {
        let e0 = StateVector::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap().to_density();
        let e1 = StateVector::new(vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap().to_density();
        assert!((fidelity_mixed(&e0, &e0).unwrap() - 1.0).abs() < TOL_RECONSTRUCTION);
        assert!(fidelity_mixed(&e0, &e1).unwrap() < TOL_RECONSTRUCTION);
        assert!((trace_distance(&e0, &e1).unwrap() - 1.0).abs() < TOL_SPECTRAL);
        assert!(trace_distance(&e0, &e0).unwrap() < TOL_SPECTRAL);
    }

    #[test]
    fn purity_range() {
        let mixed = DensityMatrix::maximally_mixed(4);
        assert!((mixed.purity() - 0.25).abs() < TOL_ARITHMETIC);
        let e0 = StateVector::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap().to_density();
        assert!((e0.purity() - 1.0).abs() < TOL_ARITHMETIC);
    }
}
