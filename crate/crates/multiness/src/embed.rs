//! Latent-position extraction from symmetric similarity matrices, sign
//! alignment against a reference, relative error metrics, and the rank
//! condition that decides whether common and individual structure are
//! separable.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix, DEFAULT_RANK_TOL};
use crate::model::{EdgeFamily, LatentDecomposition, Signature};

/// Adjacency spectral embedding with an indefinite signature.
///
/// Takes the leading `d` eigenpairs by absolute eigenvalue and scales each
/// eigenvector by `|γ|^{1/2}`, so `coords · I_{p,q} · coordsᵀ` equals the
/// best rank-`d` approximation of `m`. Columns are ordered assortative
/// block first, each block by `|γ|` descending. `d` may exceed the
/// numerical rank; excess dimensions come back as zero columns and are
/// counted in neither side of the signature.
pub fn ase(m: &SymMatrix, d: usize) -> Result<(DMatrix<f64>, Signature)> {
    if d == 0 {
        return Err(Error::InvalidInput(
            "embedding dimension must be at least 1".into(),
        ));
    }
    let n = m.n();
    let pair = linalg::dense_eigen(m);
    let top = pair.values().iter().fold(0.0_f64, |a, &g| a.max(g.abs()));
    let cut = DEFAULT_RANK_TOL * top.max(1.0);
    // Leading-d pairs above the rank cutoff, split by sign.
    let lead = d.min(pair.dim());
    let mut pos: Vec<usize> = Vec::new();
    let mut neg: Vec<usize> = Vec::new();
    for j in 0..lead {
        let g = pair.values()[j];
        if g.abs() > cut {
            if g > 0.0 {
                pos.push(j);
            } else {
                neg.push(j);
            }
        }
    }
    let mut coords = DMatrix::zeros(n, d);
    for (t, &j) in pos.iter().chain(neg.iter()).enumerate() {
        let scale = pair.values()[j].abs().sqrt();
        for i in 0..n {
            coords[(i, t)] = scale * pair.vectors()[(i, j)];
        }
    }
    Ok((coords, Signature::new(pos.len(), neg.len())))
}

/// Spectral gaps `|γ_t| − |γ_{t+1}|` for `t = 1..d` of a symmetric matrix,
/// so callers can judge how well-separated the embedded dimensions are
/// before trusting a sign alignment.
pub fn spectral_gaps(m: &SymMatrix, d: usize) -> Vec<f64> {
    let vals = linalg::dense_eigenvalues_sorted(m);
    let at = |t: usize| vals.get(t).map_or(0.0, |g| g.abs());
    (0..d.min(m.n())).map(|t| at(t) - at(t + 1)).collect()
}

/// Flips the sign of each column of `xhat` to best match `xref`:
/// per column `j`, the sign minimizing `‖s·xhat⁽ʲ⁾ − xref⁽ʲ⁾‖`, with ties
/// resolved to `+1`. Returns the aligned matrix and the signs.
pub fn align_columns(
    xhat: &DMatrix<f64>,
    xref: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if xhat.shape() != xref.shape() {
        return Err(Error::InvalidInput(format!(
            "shape mismatch: {:?} vs {:?}",
            xhat.shape(),
            xref.shape()
        )));
    }
    let mut aligned = xhat.clone();
    let mut signs = Vec::with_capacity(xhat.ncols());
    for j in 0..xhat.ncols() {
        // ‖s·x − r‖² = ‖x‖² − 2s⟨x,r⟩ + ‖r‖², minimized by s = sign⟨x,r⟩.
        let dot = xhat.column(j).dot(&xref.column(j));
        let s = if dot < 0.0 { -1.0 } else { 1.0 };
        signs.push(s);
        if s < 0.0 {
            for i in 0..xhat.nrows() {
                aligned[(i, j)] = -aligned[(i, j)];
            }
        }
    }
    Ok((aligned, signs))
}

/// Relative errors of an estimated decomposition against the truth, all
/// in the hollow Frobenius norm (diagonals excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMetrics {
    /// Common-component error `‖F̂−F‖/‖F‖`.
    pub err_f: f64,
    /// Mean individual-component error `(1/m) Σ ‖Ĝ_k−G_k‖/‖G_k‖`.
    pub err_g: f64,
    /// Mean expected-adjacency error, on `F+G_k` for Gaussian edges and on
    /// the linked probabilities for Bernoulli edges.
    pub err_p: f64,
    /// Set when the corresponding true norm was zero, in which case that
    /// metric is the non-normalized (absolute) error instead of a ratio.
    pub f_not_normalized: bool,
    pub g_not_normalized: bool,
    pub p_not_normalized: bool,
}

fn ratio_or_flag(num: f64, den: f64, flag: &mut bool) -> f64 {
    if den == 0.0 {
        *flag = true;
        num
    } else {
        num / den
    }
}

/// Computes [`ErrorMetrics`] for an estimate against the truth. When a true
/// norm is zero the corresponding metric degrades to the absolute error
/// and the matching flag is set.
pub fn error_metrics(
    fam: &EdgeFamily,
    dec_hat: &LatentDecomposition,
    dec_true: &LatentDecomposition,
) -> Result<ErrorMetrics> {
    if dec_hat.n() != dec_true.n() || dec_hat.m() != dec_true.m() {
        return Err(Error::InvalidInput(format!(
            "decomposition shapes disagree: ({}, {}) vs ({}, {})",
            dec_hat.n(),
            dec_hat.m(),
            dec_true.n(),
            dec_true.m()
        )));
    }
    let m = dec_true.m();
    let mut out = ErrorMetrics {
        err_f: 0.0,
        err_g: 0.0,
        err_p: 0.0,
        f_not_normalized: false,
        g_not_normalized: false,
        p_not_normalized: false,
    };

    let f_hat = dec_hat.common().dense();
    let f_true = dec_true.common().dense();
    out.err_f = ratio_or_flag(
        linalg::hollow_frobenius(&(f_hat - f_true)),
        linalg::hollow_frobenius(f_true),
        &mut out.f_not_normalized,
    );

    // A zero-norm truth in any layer switches the whole mean to the
    // non-normalized form so the layers stay commensurable.
    let g_norms: Vec<f64> = (0..m)
        .map(|k| linalg::hollow_frobenius(dec_true.individual(k).dense()))
        .collect();
    out.g_not_normalized = g_norms.iter().any(|&x| x == 0.0);
    let p_mats_hat: Vec<SymMatrix> = (0..m).map(|k| link_matrix(fam, &dec_hat.theta(k))).collect();
    let p_mats_true: Vec<SymMatrix> =
        (0..m).map(|k| link_matrix(fam, &dec_true.theta(k))).collect();
    let p_norms: Vec<f64> = p_mats_true.iter().map(linalg::hollow_frobenius).collect();
    out.p_not_normalized = p_norms.iter().any(|&x| x == 0.0);

    for k in 0..m {
        let g_err = linalg::hollow_frobenius(
            &(dec_hat.individual(k).dense() - dec_true.individual(k).dense()),
        );
        out.err_g += if out.g_not_normalized { g_err } else { g_err / g_norms[k] };
        let p_err = linalg::hollow_frobenius(&(&p_mats_hat[k] - &p_mats_true[k]));
        out.err_p += if out.p_not_normalized { p_err } else { p_err / p_norms[k] };
    }
    out.err_g /= m as f64;
    out.err_p /= m as f64;
    Ok(out)
}

fn link_matrix(fam: &EdgeFamily, theta: &SymMatrix) -> SymMatrix {
    match fam {
        EdgeFamily::GaussianIdentity { .. } => theta.clone(),
        EdgeFamily::BernoulliLogistic => {
            SymMatrix::from_fn(theta.n(), |i, j| fam.link(theta[(i, j)]))
        }
    }
}

/// Decides, pairwise, whether the common positions can be told apart from
/// each pair of individual positions: edge `(k, l)` is present exactly when
/// the columns of `[V  U_k  U_l]` are linearly independent (full numerical
/// rank at `tol`, relative to the largest singular value). Returns the edge
/// list and whether the graph on the `m` layers is connected.
pub fn identifiability_check(
    v: &DMatrix<f64>,
    us: &[DMatrix<f64>],
    tol: f64,
) -> Result<(Vec<(usize, usize)>, bool)> {
    let n = v.nrows();
    if us.iter().any(|u| u.nrows() != n) {
        return Err(Error::InvalidInput(
            "latent position matrices must share the node count".into(),
        ));
    }
    let m = us.len();
    let mut edges = Vec::new();
    let mut adj = vec![vec![false; m]; m];
    for k in 0..m {
        for l in (k + 1)..m {
            let total = v.ncols() + us[k].ncols() + us[l].ncols();
            if n < total {
                continue; // cannot be full column rank
            }
            let mut cat = DMatrix::zeros(n, total);
            cat.view_mut((0, 0), (n, v.ncols())).copy_from(v);
            cat.view_mut((0, v.ncols()), (n, us[k].ncols())).copy_from(&us[k]);
            cat.view_mut((0, v.ncols() + us[k].ncols()), (n, us[l].ncols()))
                .copy_from(&us[l]);
            if rect_rank(&cat, tol) == total {
                edges.push((k, l));
                adj[k][l] = true;
                adj[l][k] = true;
            }
        }
    }
    // Breadth-first search from layer 0.
    let mut seen = vec![false; m];
    let mut queue = std::collections::VecDeque::new();
    if m > 0 {
        seen[0] = true;
        queue.push_back(0);
    }
    while let Some(k) = queue.pop_front() {
        for l in 0..m {
            if adj[k][l] && !seen[l] {
                seen[l] = true;
                queue.push_back(l);
            }
        }
    }
    let connected = seen.iter().all(|&s| s);
    Ok((edges, connected))
}

/// Column rank of a rectangular matrix: singular values above
/// `tol · max(1, σ₁)`.
fn rect_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    if a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().singular_values();
    let top = sv.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    let cut = tol * top.max(1.0);
    sv.iter().filter(|&&s| s > cut).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{similarity_matrix, LowRank};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn normal_matrix(seed: u64, n: usize, d: usize) -> DMatrix<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
    }

    fn random_sym(seed: u64, n: usize) -> SymMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        SymMatrix::from_fn(n, |i, j| {
            if i <= j {
                rng.gen_range(-1.0..1.0)
            } else {
                0.0
            }
        })
    }

    #[test]
    fn ase_recovers_rank_one() {
        let n = 6;
        let mut v = DVector::zeros(n);
        v[1] = 2.0;
        let f = SymMatrix::from_fn(n, |i, j| v[i] * v[j]);
        let (coords, sig) = ase(&f, 1).unwrap();
        assert_eq!(sig, Signature::new(1, 0));
        let same: f64 = (0..n).map(|i| (coords[(i, 0)] - v[i]).abs()).sum();
        let flip: f64 = (0..n).map(|i| (coords[(i, 0)] + v[i]).abs()).sum();
        assert!(same.min(flip) < 1e-10, "coords differ from ±v");
    }

    #[test]
    fn ase_two_by_two_exchange() {
        let m = SymMatrix::from_fn(2, |i, j| if i == j { 0.0 } else { 1.0 });
        let (coords, sig) = ase(&m, 2).unwrap();
        assert_eq!(sig, Signature::new(1, 1));
        let r = 1.0 / 2.0_f64.sqrt();
        for i in 0..2 {
            for j in 0..2 {
                assert!((coords[(i, j)].abs() - r).abs() < 1e-12);
            }
        }
        // Assortative column first: reconstruction with I_{1,1} matches.
        for i in 0..2 {
            for j in 0..2 {
                let rec = coords[(i, 0)] * coords[(j, 0)] - coords[(i, 1)] * coords[(j, 1)];
                assert!((rec - m[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ase_reconstructs_similarity() {
        let x = normal_matrix(5, 12, 3);
        let sig = Signature::new(2, 1);
        let m = similarity_matrix(&x, sig).unwrap();
        let (coords, sig_hat) = ase(&m, 3).unwrap();
        assert_eq!(sig_hat, sig);
        let rec = similarity_matrix(&coords, sig_hat).unwrap();
        assert!((&rec - &m).frobenius() < 1e-8);
    }

    #[test]
    fn ase_truncates_like_best_rank_d() {
        for seed in [1_u64, 2, 3] {
            let m = random_sym(seed, 9);
            for d in [1usize, 3, 5] {
                let (coords, sig) = ase(&m, d).unwrap();
                let rec = similarity_matrix(&coords, Signature::new(sig.p, d - sig.p)).unwrap();
                let best = crate::linalg::truncate_rank(&m, d).unwrap();
                assert!(
                    (&rec - &best).frobenius() < 1e-8,
                    "rank-{d} reconstruction mismatch"
                );
            }
        }
    }

    #[test]
    fn ase_pads_excess_dimensions_with_zeros() {
        let x = normal_matrix(7, 10, 2);
        let m = similarity_matrix(&x, Signature::new(2, 0)).unwrap();
        let (coords, sig) = ase(&m, 5).unwrap();
        assert_eq!(sig, Signature::new(2, 0));
        for j in 2..5 {
            for i in 0..10 {
                assert_eq!(coords[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn align_identity_and_negation() {
        let x = normal_matrix(11, 8, 3);
        let (aligned, signs) = align_columns(&x, &x).unwrap();
        assert_eq!(signs, vec![1.0; 3]);
        assert_eq!(aligned, x);

        let neg = -&x;
        let (aligned, signs) = align_columns(&neg, &x).unwrap();
        assert_eq!(signs, vec![-1.0; 3]);
        assert!((&aligned - &x).norm() < 1e-15);
    }

    #[test]
    fn align_matches_brute_force() {
        for seed in 0..10u64 {
            let xref = normal_matrix(100 + seed, 7, 3);
            let noise = normal_matrix(200 + seed, 7, 3);
            let mut xhat = &xref * 1.0;
            // Random flips plus noise.
            let mut rng = ChaCha12Rng::seed_from_u64(300 + seed);
            for j in 0..3 {
                let s = if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
                for i in 0..7 {
                    xhat[(i, j)] = s * xref[(i, j)] + 0.3 * noise[(i, j)];
                }
            }
            let (aligned, _) = align_columns(&xhat, &xref).unwrap();
            let got = (&aligned - &xref).norm_squared();
            // Brute force over all 2^3 sign patterns.
            let mut best = f64::INFINITY;
            for bits in 0..8u32 {
                let mut total = 0.0;
                for j in 0..3 {
                    let s = if bits >> j & 1 == 1 { -1.0 } else { 1.0 };
                    let mut col = 0.0;
                    for i in 0..7 {
                        let d = s * xhat[(i, j)] - xref[(i, j)];
                        col += d * d;
                    }
                    total += col;
                }
                best = best.min(total);
            }
            assert!((got - best).abs() < 1e-12, "seed {seed}: {got} vs {best}");
        }
    }

    #[test]
    fn align_never_increases_column_distance() {
        for seed in 0..20u64 {
            let xref = normal_matrix(400 + seed, 6, 4);
            let xhat = normal_matrix(500 + seed, 6, 4);
            let (aligned, _) = align_columns(&xhat, &xref).unwrap();
            for j in 0..4 {
                let before = (xhat.column(j) - xref.column(j)).norm();
                let after = (aligned.column(j) - xref.column(j)).norm();
                assert!(after <= before + 1e-15);
            }
        }
    }

    fn decomposition_from(x: &DMatrix<f64>, us: &[DMatrix<f64>]) -> LatentDecomposition {
        let f = similarity_matrix(x, Signature::new(x.ncols(), 0)).unwrap();
        let common = LowRank::from_dense(&f, 1e-12);
        let individual = us
            .iter()
            .map(|u| {
                let g = similarity_matrix(u, Signature::new(u.ncols(), 0)).unwrap();
                LowRank::from_dense(&g, 1e-12)
            })
            .collect();
        LatentDecomposition::new(common, individual).unwrap()
    }

    #[test]
    fn metrics_vanish_on_equality_and_hit_one_on_zero() {
        let v = normal_matrix(1, 10, 2);
        let us = [normal_matrix(2, 10, 1), normal_matrix(3, 10, 1)];
        let dec = decomposition_from(&v, &us);
        let fam = &EdgeFamily::gaussian();
        let e = error_metrics(fam, &dec, &dec).unwrap();
        assert_eq!((e.err_f, e.err_g, e.err_p), (0.0, 0.0, 0.0));
        assert!(!e.f_not_normalized && !e.g_not_normalized && !e.p_not_normalized);

        let zero = LatentDecomposition::zero(10, 2);
        let e = error_metrics(fam, &zero, &dec).unwrap();
        assert!((e.err_f - 1.0).abs() < 1e-12);
        assert!((e.err_g - 1.0).abs() < 1e-12);
        assert!((e.err_p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_flag_zero_norm_truth() {
        let v = normal_matrix(4, 8, 2);
        let us = [normal_matrix(5, 8, 1)];
        let hat = decomposition_from(&v, &us);
        let zero_truth = LatentDecomposition::zero(8, 1);
        let e = error_metrics(&EdgeFamily::gaussian(), &hat, &zero_truth).unwrap();
        assert!(e.f_not_normalized && e.g_not_normalized);
        // Absolute error = the estimate's own hollow norm.
        let expect = crate::linalg::hollow_frobenius(hat.common().dense());
        assert!((e.err_f - expect).abs() < 1e-12);
    }

    #[test]
    fn probability_errors_shrink_in_saturation() {
        // Saturated log-odds (every θ_ij ≥ 4): a small uniform shift barely
        // moves the probabilities, so the probability-scale error is far
        // below the log-odds-scale error.
        let v = DMatrix::from_fn(10, 1, |i, _| 2.0 + 0.1 * i as f64);
        let us = [DMatrix::zeros(10, 0)];
        let truth = decomposition_from(&v, &us);
        let c = 0.01;
        let shifted = SymMatrix::from_fn(10, |i, j| truth.common().dense()[(i, j)] + c);
        let hat = LatentDecomposition::new(
            LowRank::from_dense(&shifted, 1e-12),
            vec![LowRank::zero(10)],
        )
        .unwrap();
        let on_probs = error_metrics(&EdgeFamily::BernoulliLogistic, &hat, &truth)
            .unwrap()
            .err_p;
        let on_logodds = error_metrics(&EdgeFamily::gaussian(), &hat, &truth)
            .unwrap()
            .err_p;
        assert!(
            on_probs < on_logodds,
            "probability error {on_probs} not below log-odds error {on_logodds}"
        );
    }

    #[test]
    fn metrics_invariant_under_node_permutation() {
        let v = normal_matrix(21, 9, 2);
        let us = [normal_matrix(22, 9, 2)];
        let vh = normal_matrix(23, 9, 2);
        let ush = [normal_matrix(24, 9, 2)];
        let truth = decomposition_from(&v, &us);
        let hat = decomposition_from(&vh, &ush);
        let base = error_metrics(&EdgeFamily::gaussian(), &hat, &truth).unwrap();

        // One fixed permutation applied to every latent matrix alike.
        let perm: Vec<usize> = vec![3, 1, 4, 0, 8, 6, 2, 7, 5];
        let apply = |x: &DMatrix<f64>| {
            DMatrix::from_fn(9, x.ncols(), |i, j| x[(perm[i], j)])
        };
        let truth_p = decomposition_from(&apply(&v), &[apply(&us[0])]);
        let hat_p = decomposition_from(&apply(&vh), &[apply(&ush[0])]);
        let permuted = error_metrics(&EdgeFamily::gaussian(), &hat_p, &truth_p).unwrap();
        assert!((base.err_f - permuted.err_f).abs() < 1e-12);
        assert!((base.err_g - permuted.err_g).abs() < 1e-12);
        assert!((base.err_p - permuted.err_p).abs() < 1e-12);
    }

    #[test]
    fn identifiability_single_layer_trivially_connected() {
        let v = normal_matrix(31, 10, 2);
        let us = [normal_matrix(32, 10, 2)];
        let (edges, connected) = identifiability_check(&v, &us, 1e-8).unwrap();
        assert!(edges.is_empty());
        assert!(connected);
    }

    #[test]
    fn identifiability_detects_shared_column() {
        let v = normal_matrix(41, 12, 2);
        let u1 = normal_matrix(42, 12, 2);
        // U₂'s first column copies V's first column: exact rank deficiency.
        let mut u2 = normal_matrix(43, 12, 2);
        for i in 0..12 {
            u2[(i, 0)] = v[(i, 0)];
        }
        let (edges, connected) = identifiability_check(&v, &[u1, u2], 1e-8).unwrap();
        assert!(!edges.contains(&(0, 1)));
        assert!(!connected);
    }

    #[test]
    fn identifiability_generic_position_is_complete() {
        let (d1, d2, n) = (3usize, 4usize, 16usize);
        assert!(n >= d1 + 2 * d2 + 5);
        for seed in 0..20u64 {
            let v = normal_matrix(1000 + 31 * seed, n, d1);
            let us: Vec<_> = (0..3)
                .map(|k| normal_matrix(2000 + 31 * seed + k, n, d2))
                .collect();
            let (edges, connected) = identifiability_check(&v, &us, 1e-8).unwrap();
            assert_eq!(edges, vec![(0, 1), (0, 2), (1, 2)], "seed {seed}");
            assert!(connected);
        }
    }

    #[test]
    fn identifiability_invariant_to_common_basis_change() {
        let v = normal_matrix(51, 12, 2);
        let us = [normal_matrix(52, 12, 3), normal_matrix(53, 12, 3)];
        let base = identifiability_check(&v, &us, 1e-8).unwrap();
        // Any invertible right factor leaves column spaces, hence ranks, alone.
        let t = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 1.5]);
        let transformed = identifiability_check(&(&v * t), &us, 1e-8).unwrap();
        assert_eq!(base, transformed);
    }

    #[test]
    fn identifiability_short_matrix_cannot_fill_rank() {
        // n below the combined dimension: edges impossible, not an error.
        let v = normal_matrix(61, 5, 2);
        let us = [normal_matrix(62, 5, 2), normal_matrix(63, 5, 2)];
        let (edges, connected) = identifiability_check(&v, &us, 1e-8).unwrap();
        assert!(edges.is_empty());
        assert!(!connected);
    }

    #[test]
    fn spectral_gaps_report_separation() {
        let f = SymMatrix::from_diagonal(&[5.0, -3.0, 1.0, 0.0]);
        let gaps = spectral_gaps(&f, 3);
        assert_eq!(gaps.len(), 3);
        assert!((gaps[0] - 2.0).abs() < 1e-12);
        assert!((gaps[1] - 2.0).abs() < 1e-12);
        assert!((gaps[2] - 1.0).abs() < 1e-12);
    }
}
