//! Symmetric matrix primitives: soft eigenvalue thresholding, rank
//! truncation, hollow norms, truncated eigendecomposition, PSD projection,
//! and numerical rank.
//!
//! Everything here works on dense symmetric matrices. Eigendecompositions
//! order eigenpairs by decreasing absolute eigenvalue; on an exact tie the
//! positive eigenvalue comes first, and within the same sign the solver's
//! order is preserved, so outputs are deterministic.
//!
//! Two execution paths back the spectral operations: a full dense
//! decomposition, and a Lanczos iteration with full reorthogonalization that
//! only computes the leading eigenpairs. The Lanczos path is used when a
//! caller supplies a `budget` (the rank cap `s`), which drops the cost of a
//! thresholding step from O(n³) to roughly O(n²·s). When the budget turns
//! out to be too small to represent the result exactly, the operation fails
//! with [`Error::BudgetExceeded`] rather than silently truncating, and the
//! caller can retry with a larger budget.

mod lanczos;

use std::cmp::Ordering;
use std::ops::{Add, Index, Mul, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative tolerance for reading ranks off estimated matrices.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Residual tolerance guaranteed by [`eigen_truncated`]:
/// ‖M·v − γ·v‖₂ ≤ `EIGEN_RESIDUAL_TOL` · max(1, |γ|).
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

/// Dense symmetric real matrix.
///
/// The two invariants — exact symmetry (`m[(i,j)]` and `m[(j,i)]` are the
/// same float) and finiteness — are enforced on construction. Raw matrices
/// are symmetrized as `(M + Mᵀ)/2` once on ingestion; all internal
/// operations preserve symmetry exactly by mirroring the upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: DMatrix<f64>,
}

impl SymMatrix {
    /// Ingests a raw dense matrix: checks finiteness and symmetrizes as
    /// `(M + Mᵀ)/2`.
    pub fn from_dense(raw: DMatrix<f64>) -> Result<Self> {
        if raw.nrows() != raw.ncols() {
            return Err(Error::InvalidInput(format!(
                "expected a square matrix, got {}x{}",
                raw.nrows(),
                raw.ncols()
            )));
        }
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "matrix has non-finite entries".into(),
            ));
        }
        let n = raw.nrows();
        let mut data = raw;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (data[(i, j)] + data[(j, i)]);
                data[(i, j)] = avg;
                data[(j, i)] = avg;
            }
        }
        Ok(Self { data })
    }

    /// Builds a symmetric matrix from a generator called once per `i ≤ j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        Self { data }
    }

    /// The zero matrix.
    pub fn zeros(n: usize) -> Self {
        Self {
            data: DMatrix::zeros(n, n),
        }
    }

    /// Diagonal matrix from the given entries.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            data: DMatrix::from_diagonal(&DVector::from_row_slice(diag)),
        }
    }

    /// Node count (matrix side length).
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Read-only view of the underlying dense storage.
    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Consumes the wrapper, returning the dense storage.
    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Sets entry `(i, j)` and its mirror `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[(i, j)] = v;
        self.data[(j, i)] = v;
    }

    /// Zeroes the diagonal in place.
    pub fn zero_diagonal(&mut self) {
        for i in 0..self.n() {
            self.data[(i, i)] = 0.0;
        }
    }

    /// Frobenius norm over all entries.
    pub fn frobenius(&self) -> f64 {
        self.data.norm()
    }

    /// Largest |eigenvalue| (spectral norm).
    pub fn spectral_norm(&self) -> f64 {
        dense_eigenvalues_sorted(self).first().map_or(0.0, |g| g.abs())
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.data * v
    }

    /// Internal constructor for matrices already exactly symmetric.
    pub(crate) fn from_exact(data: DMatrix<f64>) -> Self {
        debug_assert!(data.nrows() == data.ncols());
        debug_assert!((0..data.nrows()).all(|i| {
            (i..data.ncols()).all(|j| data[(i, j)] == data[(j, i)])
        }));
        Self { data }
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, index: (usize, usize)) -> &f64 {
        &self.data[index]
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix::from_exact(&self.data + &rhs.data)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix::from_exact(&self.data - &rhs.data)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, c: f64) -> SymMatrix {
        SymMatrix::from_exact(&self.data * c)
    }
}

/// A partial (or full) symmetric eigendecomposition: `d` orthonormal
/// eigenvectors with their eigenvalues, ordered by decreasing `|γ|`
/// (positive first on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl EigenPair {
    /// Builds from unordered eigenpairs, applying the canonical ordering.
    pub fn from_unsorted(vectors: DMatrix<f64>, values: DVector<f64>) -> Self {
        assert_eq!(vectors.ncols(), values.len(), "vector/value count mismatch");
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| eig_order(values[a], values[b]));
        let vectors = vectors.select_columns(&idx);
        let values = DVector::from_iterator(idx.len(), idx.iter().map(|&i| values[i]));
        Self { vectors, values }
    }

    /// An empty decomposition (the zero matrix's canonical form).
    pub fn empty(n: usize) -> Self {
        Self {
            vectors: DMatrix::zeros(n, 0),
            values: DVector::zeros(0),
        }
    }

    /// Node count.
    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    /// Number of stored eigenpairs.
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// The `n × d` eigenvector matrix.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Eigenvalues, `|γ|` non-increasing.
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// Sum of |eigenvalues| (the nuclear norm of the reconstruction).
    pub fn nuclear_norm(&self) -> f64 {
        self.values.iter().map(|g| g.abs()).sum()
    }

    /// Reassembles the dense matrix `Σ γ_j v_j v_jᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.n();
        if self.dim() == 0 {
            return SymMatrix::zeros(n);
        }
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.values[j];
        }
        let mut data = scaled * self.vectors.transpose();
        // Mirror the upper triangle so symmetry is exact, not just to rounding.
        for i in 0..n {
            for j in (i + 1)..n {
                data[(j, i)] = data[(i, j)];
            }
        }
        SymMatrix::from_exact(data)
    }

    /// Keeps the leading `d` pairs.
    pub fn take_leading(&self, d: usize) -> Self {
        let d = d.min(self.dim());
        Self {
            vectors: self.vectors.columns(0, d).into_owned(),
            values: self.values.rows(0, d).into_owned(),
        }
    }

    /// Applies `f` to each eigenvalue, dropping pairs mapped to exact zero.
    pub(crate) fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let mapped: Vec<f64> = self.values.iter().map(|&g| f(g)).collect();
        let keep: Vec<usize> = (0..mapped.len()).filter(|&j| mapped[j] != 0.0).collect();
        let vectors = self.vectors.select_columns(&keep);
        let values = DVector::from_iterator(keep.len(), keep.iter().map(|&j| mapped[j]));
        Self::from_unsorted(vectors, values)
    }

    /// Worst orthonormality defect `max |VᵀV − I|`, for diagnostics.
    pub fn orthonormality_defect(&self) -> f64 {
        let d = self.dim();
        let gram = self.vectors.transpose() * &self.vectors;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// Canonical eigenvalue order: |γ| descending, positive first on an exact tie.
fn eig_order(x: f64, y: f64) -> Ordering {
    y.abs()
        .partial_cmp(&x.abs())
        .unwrap_or(Ordering::Equal)
        .then_with(|| y.partial_cmp(&x).unwrap_or(Ordering::Equal))
}

/// Factorization residuals above this (relative to `max(1, ‖M‖)`) mean the
/// QR backend failed and the Jacobi fallback takes over. Roundoff keeps
/// honest decompositions near 1e−13 even at the largest dense sizes used
/// here; observed backend failures sit near 1e−5.
const QR_RESIDUAL_GUARD: f64 = 1e-10;

/// Full dense eigendecomposition in canonical order.
///
/// The QR backend occasionally mispairs eigenvectors when several
/// eigenvalues cluster near zero (a low-rank matrix under a tiny
/// perturbation is the typical trigger), leaving a factorization residual
/// orders of magnitude above roundoff while the vectors stay orthonormal.
/// Every decomposition is therefore verified via `‖M·V − V·Γ‖` — one extra
/// matrix product — and on failure the matrix is re-decomposed with cyclic
/// Jacobi rotations, which converge unconditionally at machine precision.
pub(crate) fn dense_eigen(m: &SymMatrix) -> EigenPair {
    let se = m.data.clone().symmetric_eigen();
    let mut resid = &m.data * &se.eigenvectors;
    for (mut r, (v, &g)) in resid
        .column_iter_mut()
        .zip(se.eigenvectors.column_iter().zip(se.eigenvalues.iter()))
    {
        r.axpy(-g, &v, 1.0);
    }
    if resid.norm() <= QR_RESIDUAL_GUARD * m.data.norm().max(1.0) {
        return EigenPair::from_unsorted(se.eigenvectors, se.eigenvalues);
    }
    let (vectors, values) = jacobi_eigen(&m.data);
    EigenPair::from_unsorted(vectors, values)
}

/// Cyclic Jacobi eigendecomposition: slower than the QR backend but
/// unconditionally convergent, used as the fallback when the residual check
/// in [`dense_eigen`] fails.
fn jacobi_eigen(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if (2.0 * off).sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    a[(r, p)] = c * arp - s * arq;
                    a[(r, q)] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[(p, r)];
                    let aqr = a[(q, r)];
                    a[(p, r)] = c * apr - s * aqr;
                    a[(q, r)] = s * apr + c * aqr;
                }
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }
    (v, DVector::from_iterator(n, (0..n).map(|i| a[(i, i)])))
}

/// Eigenvalues only (no vectors), in canonical order.
pub(crate) fn dense_eigenvalues_sorted(m: &SymMatrix) -> Vec<f64> {
    let mut vals: Vec<f64> = m.data.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|&a, &b| eig_order(a, b));
    vals
}

/// Leading-`k` eigenpairs, choosing between the Lanczos path and a dense
/// decomposition based on problem size.
pub(crate) fn leading_eigen(m: &SymMatrix, k: usize) -> Result<EigenPair> {
    let n = m.n();
    let k = k.min(n);
    if k == 0 {
        return Ok(EigenPair::empty(n));
    }
    if n <= 48 || k * 3 >= n {
        return Ok(dense_eigen(m).take_leading(k));
    }
    lanczos::leading_eigenpairs(m, k)
}

/// Soft eigenvalue thresholding at level `t`, returning the surviving
/// (shrunk) eigenpairs only. This is the workhorse behind
/// [`soft_threshold_svd`]; the solver uses it directly to keep the low-rank
/// factors without reassembling dense matrices.
pub(crate) fn soft_threshold_eigen(
    m: &SymMatrix,
    t: f64,
    budget: Option<usize>,
) -> Result<EigenPair> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::InvalidInput(format!(
            "threshold must be finite and nonnegative, got {t}"
        )));
    }
    let n = m.n();
    let shrink = |g: f64| g.signum() * (g.abs() - t).max(0.0);
    match budget {
        None => Ok(dense_eigen(m).map_values(shrink)),
        Some(s) => {
            if s == 0 {
                return Err(Error::InvalidInput("budget must be ≥ 1".into()));
            }
            if s >= n {
                return Ok(dense_eigen(m).map_values(shrink));
            }
            // One extra pair proves whether the budget was large enough: if
            // the (s+1)-th |eigenvalue| still clears the threshold, the
            // budgeted result would differ from the full computation.
            let pairs = leading_eigen(m, s + 1)?;
            let last = pairs.values()[pairs.dim() - 1].abs();
            if pairs.dim() == s + 1 && last > t {
                return Err(Error::BudgetExceeded {
                    found: pairs.dim(),
                });
            }
            Ok(pairs.take_leading(s).map_values(shrink))
        }
    }
}

/// Soft singular-value thresholding `S_T(M)`: the minimizer of
/// `½‖M − X‖_F² + T‖X‖_*` over symmetric `X`. Eigenvalues move toward zero
/// by `T` and vanish when `|γ| ≤ T`.
///
/// With a `budget`, only the leading `budget` eigenpairs are computed; the
/// result equals the full computation whenever the post-threshold rank fits
/// the budget, and the call fails with [`Error::BudgetExceeded`] otherwise.
pub fn soft_threshold_svd(m: &SymMatrix, t: f64, budget: Option<usize>) -> Result<SymMatrix> {
    if t == 0.0 && budget.is_none() {
        return Ok(m.clone());
    }
    Ok(soft_threshold_eigen(m, t, budget)?.reconstruct())
}

/// Top-`d` eigenpairs without shrinkage (the factors of `[M]_d`).
pub(crate) fn truncate_rank_eigen(m: &SymMatrix, d: usize) -> Result<EigenPair> {
    let n = m.n();
    if d > n {
        return Err(Error::InvalidInput(format!(
            "truncation rank {d} exceeds matrix size {n}"
        )));
    }
    leading_eigen(m, d)
}

/// Best rank-`d` approximation `[M]_d`: eigendecomposition truncated to the
/// `d` largest-|γ| pairs. `d = 0` gives the zero matrix.
pub fn truncate_rank(m: &SymMatrix, d: usize) -> Result<SymMatrix> {
    if d == 0 {
        return Ok(SymMatrix::zeros(m.n()));
    }
    Ok(truncate_rank_eigen(m, d)?.reconstruct())
}

/// Frobenius norm restricted to off-diagonal entries: `√(Σ_{i≠j} M_{ij}²)`.
pub fn hollow_frobenius(m: &SymMatrix) -> f64 {
    let n = m.n();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = m[(i, j)];
            acc += v * v;
        }
    }
    (2.0 * acc).sqrt()
}

/// Leading-`d` eigenpairs by `|γ|`, each satisfying
/// `‖M·v − γ·v‖₂ ≤ 1e−8 · max(1, |γ|)`.
pub fn eigen_truncated(m: &SymMatrix, d: usize) -> Result<EigenPair> {
    let n = m.n();
    if d < 1 || d > n {
        return Err(Error::InvalidInput(format!(
            "requested {d} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let pairs = leading_eigen(m, d)?;
    for j in 0..pairs.dim() {
        let v = pairs.vectors().column(j).into_owned();
        let g = pairs.values()[j];
        let resid = (m.matvec(&v) - g * &v).norm();
        if resid > EIGEN_RESIDUAL_TOL * g.abs().max(1.0) {
            return Err(Error::NumericalFailure(format!(
                "eigenpair {j} residual {resid:.3e} exceeds tolerance"
            )));
        }
    }
    Ok(pairs)
}

/// Projection onto the PSD cone: eigenvalues clipped at zero. This is the
/// Frobenius-nearest PSD matrix.
pub fn psd_project(m: &SymMatrix) -> SymMatrix {
    dense_eigen(m).map_values(|g| g.max(0.0)).reconstruct()
}

/// Number of eigenvalues with `|γ| > tol · max(1, |γ₁|)`.
pub fn numerical_rank(m: &SymMatrix, tol: f64) -> usize {
    assert!(tol > 0.0, "tolerance must be positive");
    let vals = dense_eigenvalues_sorted(m);
    rank_from_values(vals.iter().copied(), tol)
}

/// Rank rule shared with decompositions that already hold their eigenvalues:
/// count of `|γ| > tol · max(1, max|γ|)`.
pub(crate) fn rank_from_values(values: impl IntoIterator<Item = f64>, tol: f64) -> usize {
    let vals: Vec<f64> = values.into_iter().collect();
    let top = vals.iter().fold(0.0_f64, |a, &g| a.max(g.abs()));
    let cut = tol * top.max(1.0);
    vals.iter().filter(|g| g.abs() > cut).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_sym(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        SymMatrix::from_fn(n, |_, _| rng.gen_range(-2.0..2.0))
    }

    fn assert_close(a: &SymMatrix, b: &SymMatrix, tol: f64) {
        let diff = (a - b).frobenius();
        assert!(diff <= tol, "matrices differ by {diff:.3e} (tol {tol:.1e})");
    }

    #[test]
    fn ingestion_symmetrizes_and_validates() {
        let raw = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 1.0, 2.0]);
        let m = SymMatrix::from_dense(raw).unwrap();
        assert_eq!(m[(0, 1)], 2.0);
        assert_eq!(m[(1, 0)], 2.0);

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 2.0]);
        assert!(matches!(
            SymMatrix::from_dense(bad),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn soft_threshold_diagonal_example() {
        let m = SymMatrix::from_diagonal(&[5.0, 3.0, 1.0]);
        let out = soft_threshold_svd(&m, 2.0, None).unwrap();
        let expect = SymMatrix::from_diagonal(&[3.0, 1.0, 0.0]);
        assert_close(&out, &expect, 1e-12);
    }

    #[test]
    fn soft_threshold_zero_is_identity() {
        let m = random_sym(7, 1);
        let out = soft_threshold_svd(&m, 0.0, None).unwrap();
        assert_close(&out, &m, 0.0);
    }

    #[test]
    fn soft_threshold_first_order_optimality() {
        // Smaller sibling of the acceptance-scale perturbation check.
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for seed in 0..5 {
            let m = random_sym(6, 100 + seed);
            let vals = dense_eigenvalues_sorted(&m);
            let t = vals[vals.len() / 2].abs();
            let out = soft_threshold_svd(&m, t, None).unwrap();
            let obj = |x: &SymMatrix| {
                0.5 * (x - &m).frobenius().powi(2)
                    + t * dense_eigenvalues_sorted(x).iter().map(|g| g.abs()).sum::<f64>()
            };
            let base = obj(&out);
            for _ in 0..100 {
                let dir = SymMatrix::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
                for eps in [1e-3, 1e-4] {
                    let pert = &out + &(&dir * eps);
                    assert!(
                        base <= obj(&pert) + 1e-12 * base.abs().max(1.0),
                        "perturbation beat the prox output"
                    );
                }
            }
        }
    }

    #[test]
    fn budget_matches_full_when_rank_fits() {
        let m = random_sym(60, 2);
        let vals = dense_eigenvalues_sorted(&m);
        // Threshold chosen so exactly 4 eigenvalues survive.
        let t = 0.5 * (vals[3].abs() + vals[4].abs());
        let full = soft_threshold_svd(&m, t, None).unwrap();
        let budgeted = soft_threshold_svd(&m, t, Some(6)).unwrap();
        assert_close(&budgeted, &full, 1e-8);
    }

    #[test]
    fn budget_too_small_reports_exceeded() {
        let m = random_sym(60, 3);
        let vals = dense_eigenvalues_sorted(&m);
        let t = 0.5 * (vals[7].abs() + vals[8].abs()); // true post-threshold rank 8
        match soft_threshold_svd(&m, t, Some(3)) {
            Err(Error::BudgetExceeded { found }) => assert_eq!(found, 4),
            other => panic!("expected BudgetExceeded, got {other:?}"),
        }
    }

    #[test]
    fn truncate_rank_examples() {
        let m = SymMatrix::from_diagonal(&[3.0, 2.0, 1.0]);
        let out = truncate_rank(&m, 1).unwrap();
        assert_close(&out, &SymMatrix::from_diagonal(&[3.0, 0.0, 0.0]), 1e-12);

        // Rank-2 matrix: truncation beyond rank is the identity map.
        let pair = eigen_truncated(&random_sym(5, 4), 2).unwrap();
        let rank2 = pair.reconstruct();
        let out = truncate_rank(&rank2, 3).unwrap();
        assert_close(&out, &rank2, 1e-10);

        assert!(truncate_rank(&m, 4).is_err());
        assert_close(&truncate_rank(&m, 0).unwrap(), &SymMatrix::zeros(3), 0.0);
    }

    #[test]
    fn truncate_rank_error_matches_trailing_eigenvalues() {
        let m = random_sym(5, 5);
        let out = truncate_rank(&m, 2).unwrap();
        let vals = dense_eigenvalues_sorted(&m);
        let expect: f64 = vals[2..].iter().map(|g| g * g).sum::<f64>().sqrt();
        let got = (&m - &out).frobenius();
        assert!((got - expect).abs() <= 1e-10, "{got} vs {expect}");
    }

    #[test]
    fn hollow_frobenius_examples() {
        let ones = SymMatrix::from_fn(3, |_, _| 1.0);
        assert!((hollow_frobenius(&ones) - 6.0_f64.sqrt()).abs() < 1e-12);

        assert_eq!(hollow_frobenius(&SymMatrix::from_diagonal(&[4.0, 5.0])), 0.0);

        let mut m = SymMatrix::zeros(3);
        m.set(0, 1, 1.0);
        m.set(1, 2, 2.0);
        assert!((hollow_frobenius(&m) - 10.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn eigen_truncated_identity_and_analytic() {
        let eye = SymMatrix::from_diagonal(&[1.0, 1.0, 1.0]);
        let pair = eigen_truncated(&eye, 2).unwrap();
        assert_eq!(pair.dim(), 2);
        assert!((pair.values()[0] - 1.0).abs() < 1e-12);
        assert!((pair.values()[1] - 1.0).abs() < 1e-12);
        assert!(pair.orthonormality_defect() < 1e-10);

        let mut swap = SymMatrix::zeros(2);
        swap.set(0, 1, 1.0);
        let pair = eigen_truncated(&swap, 2).unwrap();
        // Tie on |γ|: the positive eigenvalue is listed first.
        assert!((pair.values()[0] - 1.0).abs() < 1e-12);
        assert!((pair.values()[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_truncated_full_reconstruction() {
        let m = random_sym(8, 6);
        let pair = eigen_truncated(&m, 8).unwrap();
        assert_close(&pair.reconstruct(), &m, 1e-8);
    }

    #[test]
    fn dense_eigen_survives_clustered_tiny_eigenvalues() {
        // A low-rank matrix plus a tiny single-entry perturbation has
        // several eigenvalues clustered near zero — the regime where the QR
        // backend can mispair eigenvectors and return a factorization off
        // by the perturbation's magnitude (observed: 2e-5 at seed 322,
        // entry (4,5), bump -1e-5). The residual guard must reroute such
        // cases to the Jacobi fallback.
        use rand_distr::StandardNormal;
        for seed in 300..340u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let base = SymMatrix::from_fn(6, |_, _| {
                0.5 * rng.sample::<f64, _>(StandardNormal)
            });
            let low = truncate_rank(&base, 2).unwrap();
            for (i, j) in [(0, 1), (2, 4), (4, 5)] {
                for bump in [-1e-5, 1e-5] {
                    let mut m = low.clone();
                    let cur = m[(i, j)];
                    m.set(i, j, cur + bump);
                    let pair = dense_eigen(&m);
                    assert_close(&pair.reconstruct(), &m, 1e-9);
                }
            }
        }
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        // Large enough that the truncated path actually runs.
        for seed in [7, 8, 9] {
            let m = random_sym(120, seed);
            let truncated = eigen_truncated(&m, 5).unwrap();
            let dense = dense_eigen(&m).take_leading(5);
            for j in 0..5 {
                assert!(
                    (truncated.values()[j] - dense.values()[j]).abs() < 1e-8,
                    "eigenvalue {j} mismatch"
                );
            }
            assert!(truncated.orthonormality_defect() < 1e-10);
        }
    }

    #[test]
    fn lanczos_handles_multiplicity() {
        // diag(2,2,1,...) exhausts a Krylov space early; the solver must
        // still find both copies of the repeated eigenvalue.
        let mut diag = vec![1.0; 60];
        diag[0] = 2.0;
        diag[1] = 2.0;
        let m = SymMatrix::from_diagonal(&diag);
        let pair = eigen_truncated(&m, 3).unwrap();
        assert!((pair.values()[0] - 2.0).abs() < 1e-9);
        assert!((pair.values()[1] - 2.0).abs() < 1e-9);
        assert!((pair.values()[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn psd_project_examples() {
        let m = SymMatrix::from_diagonal(&[2.0, -1.0]);
        assert_close(&psd_project(&m), &SymMatrix::from_diagonal(&[2.0, 0.0]), 1e-12);

        let psd = {
            let r = random_sym(5, 8);
            let pair = dense_eigen(&r).map_values(|g| g.abs());
            pair.reconstruct()
        };
        assert_close(&psd_project(&psd), &psd, 1e-10);
    }

    #[test]
    fn psd_project_is_nearest_psd() {
        let m = random_sym(6, 9);
        let out = psd_project(&m);
        // Eigen-clip oracle computed by hand from the dense decomposition.
        let pair = dense_eigen(&m);
        let clipped = pair.map_values(|g| g.max(0.0)).reconstruct();
        assert_close(&out, &clipped, 1e-10);
        let min_eig = dense_eigenvalues_sorted(&out)
            .iter()
            .fold(f64::INFINITY, |a, &g| a.min(g));
        assert!(min_eig >= -1e-10);
    }

    #[test]
    fn numerical_rank_examples() {
        assert_eq!(numerical_rank(&SymMatrix::zeros(4), 1e-8), 0);
        assert_eq!(
            numerical_rank(&SymMatrix::from_diagonal(&[1.0, 1e-14]), 1e-8),
            1
        );

        let m = random_sym(10, 10);
        let vals = dense_eigenvalues_sorted(&m);
        let t = 0.5 * (vals[4].abs() + vals[5].abs());
        let thresholded = soft_threshold_svd(&m, t, None).unwrap();
        let expect = vals.iter().filter(|g| g.abs() > t).count();
        assert_eq!(numerical_rank(&thresholded, DEFAULT_RANK_TOL), expect);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn soft_threshold_commutes_with_negation(seed in 0u64..500, t in 0.0f64..3.0) {
            let m = random_sym(6, seed);
            let a = soft_threshold_svd(&m, t, None).unwrap();
            let b = soft_threshold_svd(&(&m * -1.0), t, None).unwrap();
            // The identity is exact in real arithmetic; numerically it holds
            // to the accuracy of two independent eigendecompositions, whose
            // residuals the backend only bounds near EIGEN_RESIDUAL_TOL.
            prop_assert!((&a + &b).frobenius() < EIGEN_RESIDUAL_TOL * m.frobenius().max(1.0));
        }

        #[test]
        fn soft_threshold_contracts(seed in 0u64..500, t in 0.0f64..3.0) {
            let m = random_sym(6, seed);
            let out = soft_threshold_svd(&m, t, None).unwrap();
            let nn_out: f64 = dense_eigenvalues_sorted(&out).iter().map(|g| g.abs()).sum();
            let nn_in: f64 = dense_eigenvalues_sorted(&m).iter().map(|g| g.abs()).sum();
            prop_assert!(nn_out <= nn_in + 1e-10);
            let diff_spectral = (&out - &m).spectral_norm();
            prop_assert!(diff_spectral <= t + 1e-10);
        }

        #[test]
        fn truncate_rank_idempotent(seed in 0u64..500, d in 0usize..6) {
            let m = random_sym(6, seed);
            let once = truncate_rank(&m, d).unwrap();
            let twice = truncate_rank(&once, d).unwrap();
            prop_assert!((&once - &twice).frobenius() < 1e-10);
        }

        #[test]
        fn hollow_bounded_by_frobenius(seed in 0u64..500) {
            let m = random_sym(5, seed);
            prop_assert!(hollow_frobenius(&m) <= m.frobenius() + 1e-12);
            let mut hollowed = m.clone();
            hollowed.zero_diagonal();
            let h = hollow_frobenius(&hollowed);
            prop_assert!((h - hollowed.frobenius()).abs() < 1e-12);
        }

        #[test]
        fn psd_project_idempotent(seed in 0u64..500) {
            let m = random_sym(6, seed);
            let once = psd_project(&m);
            let twice = psd_project(&once);
            prop_assert!((&once - &twice).frobenius() < 1e-10);
        }
    }
}
