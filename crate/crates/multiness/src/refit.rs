//! Eigenvalue refitting: keep the eigenvectors and ranks of a fitted
//! decomposition fixed and re-estimate all eigenvalues jointly by
//! maximizing the unpenalized likelihood over the observed entries.
//!
//! With eigenvectors fixed, the natural parameter of entry `(i, j)` in
//! layer `k` is linear in the eigenvalues: one coefficient per common
//! eigenvector `v_ℓ` (predictor `v_{iℓ} v_{jℓ}`) and one per layer-`k`
//! eigenvector. That makes the problem a small generalized linear model —
//! least squares for Gaussian edges, logistic regression for binary ones.
//! The design matrix is never materialized; its cross products accumulate
//! in one pass over the observed triples per layer, reduced in layer order
//! so results are deterministic.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::EigenPair;
use crate::model::{self, EdgeFamily, LatentDecomposition, MultiplexNetwork};
use crate::solver::{self, FitReport, SolverConfig};

/// Newton iteration cap for the logistic refit.
const MAX_NEWTON: usize = 50;
/// Infinity-norm gradient tolerance declaring the logistic refit converged.
const GRAD_TOL: f64 = 1e-8;
/// Relative eigenvalue cutoff below which the normal-equation matrix counts
/// as rank deficient.
const DESIGN_RANK_TOL: f64 = 1e-12;

/// What the refitting stage did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RefitReport {
    /// The logistic refit failed (separation or no convergence within the
    /// iteration cap) and the pre-refit eigenvalues were kept.
    pub fell_back: bool,
    /// Newton iterations used by the logistic refit (zero for Gaussian).
    pub newton_iterations: usize,
    pub warnings: Vec<String>,
}

/// Splits a stacked coefficient vector back into per-component blocks.
struct Layout {
    d1: usize,
    d2: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl Layout {
    fn new(dec: &LatentDecomposition) -> Self {
        let d1 = dec.common().rank();
        let d2: Vec<usize> = dec.individuals().iter().map(|g| g.rank()).collect();
        let mut offsets = Vec::with_capacity(d2.len());
        let mut at = d1;
        for &d in &d2 {
            offsets.push(at);
            at += d;
        }
        Self { d1, d2, offsets, total: at }
    }

    fn stack(&self, dec: &LatentDecomposition) -> DVector<f64> {
        let mut gamma = DVector::zeros(self.total);
        for (t, &g) in dec.common().eigen().values().iter().enumerate() {
            gamma[t] = g;
        }
        for (k, low) in dec.individuals().iter().enumerate() {
            for (t, &g) in low.eigen().values().iter().enumerate() {
                gamma[self.offsets[k] + t] = g;
            }
        }
        gamma
    }
}

/// Per-layer accumulator of the GLM cross products restricted to the
/// blocks a layer touches: the common block `c` and its own block `k`.
struct LayerAccum {
    h_cc: DMatrix<f64>,
    h_ck: DMatrix<f64>,
    h_kk: DMatrix<f64>,
    b_c: DVector<f64>,
    b_k: DVector<f64>,
    loss: f64,
    grad_c: DVector<f64>,
    grad_k: DVector<f64>,
    max_abs_theta: f64,
}

/// One pass over layer `k`'s observed triples. For Gaussian edges the
/// weights are 1 and `b` holds `Xᵀa`; for Bernoulli the weights are
/// `μ(1−μ)` at the current coefficients and the gradient is `Xᵀ(μ−a)`.
fn accumulate_layer(
    fam: &EdgeFamily,
    net: &MultiplexNetwork,
    dec: &LatentDecomposition,
    layout: &Layout,
    gamma: &DVector<f64>,
    k: usize,
) -> LayerAccum {
    let n = net.n();
    let d1 = layout.d1;
    let dk = layout.d2[k];
    let off = layout.offsets[k];
    let v = dec.common().eigen().vectors();
    let u = dec.individual(k).eigen().vectors();
    let a_mat = net.layer(k);
    let mask = net.mask();

    let mut acc = LayerAccum {
        h_cc: DMatrix::zeros(d1, d1),
        h_ck: DMatrix::zeros(d1, dk),
        h_kk: DMatrix::zeros(dk, dk),
        b_c: DVector::zeros(d1),
        b_k: DVector::zeros(dk),
        loss: 0.0,
        grad_c: DVector::zeros(d1),
        grad_k: DVector::zeros(dk),
        max_abs_theta: 0.0,
    };
    let mut x = vec![0.0; d1 + dk];
    for i in 0..n {
        for j in i..n {
            if !mask.is_observed(k, i, j) {
                continue;
            }
            for l in 0..d1 {
                x[l] = v[(i, l)] * v[(j, l)];
            }
            for l in 0..dk {
                x[d1 + l] = u[(i, l)] * u[(j, l)];
            }
            let a = a_mat[(i, j)];
            let theta: f64 = (0..d1).map(|l| x[l] * gamma[l]).sum::<f64>()
                + (0..dk).map(|l| x[d1 + l] * gamma[off + l]).sum::<f64>();
            let (w, r) = match fam {
                EdgeFamily::GaussianIdentity { .. } => (1.0, theta - a),
                EdgeFamily::BernoulliLogistic => {
                    let mu = fam.link(theta);
                    (mu * (1.0 - mu), mu - a)
                }
            };
            acc.loss += fam.entry_loss(a, theta);
            acc.max_abs_theta = acc.max_abs_theta.max(theta.abs());
            for l in 0..d1 {
                acc.grad_c[l] += r * x[l];
                acc.b_c[l] += a * x[l];
                for t in l..d1 {
                    acc.h_cc[(l, t)] += w * x[l] * x[t];
                }
                for t in 0..dk {
                    acc.h_ck[(l, t)] += w * x[l] * x[d1 + t];
                }
            }
            for l in 0..dk {
                acc.grad_k[l] += r * x[d1 + l];
                acc.b_k[l] += a * x[d1 + l];
                for t in l..dk {
                    acc.h_kk[(l, t)] += w * x[d1 + l] * x[d1 + t];
                }
            }
        }
    }
    for l in 0..d1 {
        for t in 0..l {
            acc.h_cc[(l, t)] = acc.h_cc[(t, l)];
        }
    }
    for l in 0..dk {
        for t in 0..l {
            acc.h_kk[(l, t)] = acc.h_kk[(t, l)];
        }
    }
    acc
}

/// The assembled GLM state at one coefficient vector.
struct GlmState {
    h: DMatrix<f64>,
    b: DVector<f64>,
    grad: DVector<f64>,
    loss: f64,
    max_abs_theta: f64,
}

/// Assembles the full cross-product matrix, gradient, and loss from the
/// per-layer pieces, summing in layer order.
fn assemble(layout: &Layout, parts: Vec<LayerAccum>) -> GlmState {
    let t = layout.total;
    let d1 = layout.d1;
    let mut st = GlmState {
        h: DMatrix::zeros(t, t),
        b: DVector::zeros(t),
        grad: DVector::zeros(t),
        loss: 0.0,
        max_abs_theta: 0.0,
    };
    for (k, acc) in parts.into_iter().enumerate() {
        let off = layout.offsets[k];
        let dk = layout.d2[k];
        for l in 0..d1 {
            st.b[l] += acc.b_c[l];
            st.grad[l] += acc.grad_c[l];
            for s in 0..d1 {
                st.h[(l, s)] += acc.h_cc[(l, s)];
            }
            for s in 0..dk {
                st.h[(l, off + s)] += acc.h_ck[(l, s)];
                st.h[(off + s, l)] += acc.h_ck[(l, s)];
            }
        }
        for l in 0..dk {
            st.b[off + l] += acc.b_k[l];
            st.grad[off + l] += acc.grad_k[l];
            for s in 0..dk {
                st.h[(off + l, off + s)] += acc.h_kk[(l, s)];
            }
        }
        st.loss += acc.loss;
        st.max_abs_theta = st.max_abs_theta.max(acc.max_abs_theta);
    }
    st
}

fn accumulate_all(
    fam: &EdgeFamily,
    net: &MultiplexNetwork,
    dec: &LatentDecomposition,
    layout: &Layout,
    gamma: &DVector<f64>,
) -> GlmState {
    let parts: Vec<LayerAccum> = (0..net.m())
        .into_par_iter()
        .map(|k| accumulate_layer(fam, net, dec, layout, gamma, k))
        .collect();
    assemble(layout, parts)
}

/// Solves the symmetric system `H x = rhs` by eigendecomposition, failing
/// when `H` is numerically rank deficient at [`DESIGN_RANK_TOL`].
fn solve_sym(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let se = h.clone().symmetric_eigen();
    let top = se.eigenvalues.iter().fold(0.0_f64, |a, &g| a.max(g.abs()));
    if top == 0.0 {
        return None;
    }
    let cut = DESIGN_RANK_TOL * top;
    if se.eigenvalues.iter().any(|g| g.abs() <= cut) {
        return None;
    }
    let mut y = se.eigenvectors.transpose() * rhs;
    for t in 0..y.len() {
        y[t] /= se.eigenvalues[t];
    }
    Some(&se.eigenvectors * y)
}

/// Rebuilds a decomposition with the same eigenvectors but the given
/// stacked eigenvalues; pairs are re-sorted by magnitude and signatures
/// recomputed from the new signs (zeros count as assortative, keeping
/// ranks intact).
fn rebuild(
    dec: &LatentDecomposition,
    layout: &Layout,
    gamma: &DVector<f64>,
) -> Result<LatentDecomposition> {
    let remake = |vectors: &DMatrix<f64>, vals: &[f64]| {
        let pair = EigenPair::from_unsorted(
            vectors.clone(),
            DVector::from_column_slice(vals),
        );
        model::LowRank::from_eigen_keep_all(pair)
    };
    let common_vals: Vec<f64> = (0..layout.d1).map(|t| gamma[t]).collect();
    let common = remake(dec.common().eigen().vectors(), &common_vals);
    let individual = dec
        .individuals()
        .iter()
        .enumerate()
        .map(|(k, low)| {
            let off = layout.offsets[k];
            let vals: Vec<f64> = (0..layout.d2[k]).map(|t| gamma[off + t]).collect();
            remake(low.eigen().vectors(), &vals)
        })
        .collect();
    LatentDecomposition::new(common, individual)
}

/// Re-estimates every eigenvalue of `dec` by fitting the induced
/// generalized linear model over the observed entries, holding
/// eigenvectors and ranks fixed.
///
/// Gaussian edges solve the normal equations exactly; a rank-deficient
/// design (duplicate eigenvectors) is [`Error::DegenerateDesign`]. Binary
/// edges run damped Newton from the current eigenvalues; separation or
/// non-convergence keeps the input eigenvalues and sets
/// [`RefitReport::fell_back`] instead of failing.
pub fn refit_eigenvalues(
    fam: &EdgeFamily,
    net: &MultiplexNetwork,
    dec: &LatentDecomposition,
) -> Result<(LatentDecomposition, RefitReport)> {
    if dec.n() != net.n() || dec.m() != net.m() {
        return Err(Error::InvalidInput(format!(
            "decomposition shape ({}, {}) does not match network ({}, {})",
            dec.n(),
            dec.m(),
            net.n(),
            net.m()
        )));
    }
    let layout = Layout::new(dec);
    let mut report = RefitReport::default();
    if layout.total == 0 {
        return Ok((dec.clone(), report));
    }
    let gamma0 = layout.stack(dec);

    match fam {
        EdgeFamily::GaussianIdentity { .. } => {
            let st = accumulate_all(fam, net, dec, &layout, &gamma0);
            let gamma = solve_sym(&st.h, &st.b).ok_or_else(|| {
                Error::DegenerateDesign(
                    "normal-equation matrix is rank deficient".into(),
                )
            })?;
            Ok((rebuild(dec, &layout, &gamma)?, report))
        }
        EdgeFamily::BernoulliLogistic => {
            // The unweighted cross products decide design rank up front.
            let probe = accumulate_all(&EdgeFamily::gaussian(), net, dec, &layout, &gamma0);
            if solve_sym(&probe.h, &probe.b).is_none() {
                return Err(Error::DegenerateDesign(
                    "logistic design matrix is rank deficient".into(),
                ));
            }
            match newton_logistic(net, dec, &layout, gamma0.clone(), &mut report) {
                Some(gamma) => Ok((rebuild(dec, &layout, &gamma)?, report)),
                None => {
                    report.fell_back = true;
                    report.warnings.push(
                        "logistic refit did not converge (possible separation); \
                         keeping pre-refit eigenvalues"
                            .into(),
                    );
                    Ok((dec.clone(), report))
                }
            }
        }
    }
}

/// Log-odds magnitude past which probabilities are numerically 0 or 1;
/// reaching it means the likelihood has no usable finite maximizer
/// (separation), so the refit falls back.
const SATURATION_BOUND: f64 = 30.0;

/// Damped Newton for the logistic refit. Returns the coefficients at a
/// gradient zero, or `None` when the iteration cap is hit, the Hessian
/// collapses, the log-odds saturate, or no damping step decreases the loss.
fn newton_logistic(
    net: &MultiplexNetwork,
    dec: &LatentDecomposition,
    layout: &Layout,
    mut gamma: DVector<f64>,
    report: &mut RefitReport,
) -> Option<DVector<f64>> {
    let fam = &EdgeFamily::BernoulliLogistic;
    let mut st = accumulate_all(fam, net, dec, layout, &gamma);
    for it in 0..MAX_NEWTON {
        if st.max_abs_theta > SATURATION_BOUND {
            return None;
        }
        if st.grad.amax() <= GRAD_TOL {
            report.newton_iterations = it;
            return Some(gamma);
        }
        let step = solve_sym(&st.h, &st.grad)?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &gamma - scale * &step;
            if cand.iter().all(|g| g.is_finite()) {
                let next = accumulate_all(fam, net, dec, layout, &cand);
                if next.loss <= st.loss + 1e-12 * st.loss.abs().max(1.0) {
                    gamma = cand;
                    st = next;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    report.newton_iterations = MAX_NEWTON;
    None
}

/// The two-stage estimator: penalized fit, then eigenvalue refitting on the
/// result. The report carries both stages.
pub fn fit_plus(
    fam: &EdgeFamily,
    net: &MultiplexNetwork,
    cfg: &SolverConfig,
) -> Result<(LatentDecomposition, FitReport)> {
    let (dec, mut report) = solver::fit(fam, net, cfg)?;
    let (refitted, refit_report) = refit_eigenvalues(fam, net, &dec)?;
    report.refit = Some(refit_report);
    report.final_ranks = refitted.ranks(crate::linalg::DEFAULT_RANK_TOL);
    Ok((refitted, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{SymMatrix, DEFAULT_RANK_TOL};
    use crate::model::{masked_loss, LowRank, Signature};
    use crate::simulate::gen_gaussian;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn orthonormal_cols(seed: u64, n: usize, d: usize) -> DMatrix<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let z = DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal));
        let (q, _) = z.qr().unpack();
        q.columns(0, d).into_owned()
    }

    fn low_rank_from(vectors: DMatrix<f64>, values: &[f64]) -> LowRank {
        LowRank::from_eigen(EigenPair::from_unsorted(
            vectors,
            DVector::from_column_slice(values),
        ))
    }

    /// Hollow adjacency layers from exact dense components.
    fn network_from(f: &SymMatrix, gs: &[SymMatrix]) -> MultiplexNetwork {
        let layers = gs
            .iter()
            .map(|g| {
                let mut a = f + g;
                a.zero_diagonal();
                a
            })
            .collect();
        MultiplexNetwork::new(layers, false).unwrap()
    }

    #[test]
    fn zero_ranks_pass_through() {
        let (net, _) = gen_gaussian(10, 2, 1, 1, 0.5, 1).unwrap();
        let dec = LatentDecomposition::zero(10, 2);
        let (out, report) = refit_eigenvalues(&EdgeFamily::gaussian(), &net, &dec).unwrap();
        assert_eq!(out.common().rank(), 0);
        assert!(out.individuals().iter().all(|g| g.rank() == 0));
        assert!(!report.fell_back);
    }

    #[test]
    fn gaussian_refit_removes_shrinkage_exactly() {
        let n = 12;
        let v = orthonormal_cols(3, n, 2);
        let u1 = orthonormal_cols(4, n, 1);
        let u2 = orthonormal_cols(5, n, 1);
        let true_f = [5.0, -3.0];
        let true_g = [2.5];
        let f = low_rank_from(v.clone(), &true_f);
        let g1 = low_rank_from(u1.clone(), &true_g);
        let g2 = low_rank_from(u2.clone(), &true_g);
        let net = network_from(f.dense(), &[g1.dense().clone(), g2.dense().clone()]);

        // Same eigenvectors, shrunken eigenvalues: the refit must restore
        // the generating values since the noiseless system is exact.
        let shrunk = LatentDecomposition::new(
            low_rank_from(v.clone(), &[4.3, -2.3]),
            vec![low_rank_from(u1, &[1.8]), low_rank_from(u2, &[1.8])],
        )
        .unwrap();
        let (out, report) =
            refit_eigenvalues(&EdgeFamily::gaussian(), &net, &shrunk).unwrap();
        assert!(!report.fell_back);

        let mut got: Vec<f64> = out.common().eigen().values().iter().copied().collect();
        got.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((got[0] - 5.0).abs() < 1e-8, "common values {got:?}");
        assert!((got[1] + 3.0).abs() < 1e-8);
        for k in 0..2 {
            let vals = out.individual(k).eigen().values();
            assert_eq!(vals.len(), 1);
            assert!((vals[0] - 2.5).abs() < 1e-8);
        }
    }

    #[test]
    fn refit_keeps_column_spaces_and_ranks() {
        let (net, _) = gen_gaussian(14, 2, 2, 1, 0.3, 7).unwrap();
        let cfg = SolverConfig::new(6.0, vec![1.0 / (2.0_f64).sqrt(); 2]);
        let (dec, _) = solver::fit(&EdgeFamily::gaussian(), &net, &cfg).unwrap();
        let (out, _) = refit_eigenvalues(&EdgeFamily::gaussian(), &net, &dec).unwrap();

        assert_eq!(out.common().rank(), dec.common().rank());
        for k in 0..2 {
            assert_eq!(out.individual(k).rank(), dec.individual(k).rank());
        }
        // Column spaces agree: compare the projectors V Vᵀ.
        let proj = |low: &LowRank| {
            let v = low.eigen().vectors();
            v * v.transpose()
        };
        assert!((proj(out.common()) - proj(dec.common())).norm() < 1e-12);
        for k in 0..2 {
            assert!((proj(out.individual(k)) - proj(dec.individual(k))).norm() < 1e-12);
        }
    }

    #[test]
    fn gaussian_refit_weakly_decreases_loss() {
        let fam = &EdgeFamily::gaussian();
        for seed in [11u64, 12, 13] {
            let (net, _) = gen_gaussian(13, 3, 2, 1, 1.0, seed).unwrap();
            let cfg = SolverConfig::new(8.0, vec![1.0 / (3.0_f64).sqrt(); 3]);
            let (dec, _) = solver::fit(fam, &net, &cfg).unwrap();
            if dec.common().rank() == 0 && dec.individuals().iter().all(|g| g.rank() == 0) {
                continue;
            }
            let (out, _) = refit_eigenvalues(fam, &net, &dec).unwrap();
            let before = masked_loss(fam, &net, &dec).unwrap();
            let after = masked_loss(fam, &net, &out).unwrap();
            assert!(
                after <= before + 1e-12 * before.abs().max(1.0),
                "seed {seed}: loss rose {before} -> {after}"
            );
        }
    }

    #[test]
    fn logistic_refit_matches_dense_newton_oracle() {
        // Small binary network with rank-1 common and individual parts.
        let n = 8;
        let v = orthonormal_cols(21, n, 1);
        let u1 = orthonormal_cols(22, n, 1);
        let u2 = orthonormal_cols(23, n, 1);
        let dec = LatentDecomposition::new(
            low_rank_from(v, &[3.0]),
            vec![low_rank_from(u1, &[2.0]), low_rank_from(u2, &[-2.0])],
        )
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(24);
        let layers: Vec<SymMatrix> = (0..2)
            .map(|k| {
                let theta = dec.theta(k);
                let mut a = SymMatrix::zeros(n);
                for i in 0..n {
                    for j in (i + 1)..n {
                        if rng.gen_bool(crate::model::expit(theta[(i, j)])) {
                            a.set(i, j, 1.0);
                        }
                    }
                }
                a
            })
            .collect();
        let net = MultiplexNetwork::new(layers, false).unwrap();

        let (out, report) =
            refit_eigenvalues(&EdgeFamily::BernoulliLogistic, &net, &dec).unwrap();
        assert!(!report.fell_back, "unexpected fallback: {:?}", report.warnings);

        // Independent oracle: materialize the dense design and run plain
        // Newton from zero.
        let mut rows: Vec<[f64; 3]> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        let vv = dec.common().eigen().vectors();
        for k in 0..2 {
            let uu = dec.individual(k).eigen().vectors();
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut row = [0.0; 3];
                    row[0] = vv[(i, 0)] * vv[(j, 0)];
                    row[1 + k] = uu[(i, 0)] * uu[(j, 0)];
                    rows.push(row);
                    ys.push(net.layer(k)[(i, j)]);
                }
            }
        }
        let mut beta: DVector<f64> = DVector::zeros(3);
        for _ in 0..200 {
            let mut g: DVector<f64> = DVector::zeros(3);
            let mut h: DMatrix<f64> = DMatrix::zeros(3, 3);
            for (row, &y) in rows.iter().zip(&ys) {
                let theta: f64 = (0..3).map(|t| row[t] * beta[t]).sum();
                let mu = crate::model::expit(theta);
                let w = mu * (1.0 - mu);
                for t in 0..3 {
                    g[t] += (mu - y) * row[t];
                    for s in 0..3 {
                        h[(t, s)] += w * row[t] * row[s];
                    }
                }
            }
            if g.amax() < 1e-12 {
                break;
            }
            let step = h.lu().solve(&g).unwrap();
            beta -= step;
        }

        let got_common = out.common().eigen().values()[0];
        assert!((got_common - beta[0]).abs() < 1e-6, "{got_common} vs {}", beta[0]);
        for k in 0..2 {
            let got = out.individual(k).eigen().values()[0];
            assert!((got - beta[1 + k]).abs() < 1e-6, "layer {k}: {got} vs {}", beta[1 + k]);
        }
    }

    #[test]
    fn logistic_separation_falls_back_with_warning() {
        // Edges exactly equal to the sign pattern of the rank-1 predictor:
        // the likelihood has no finite maximizer.
        let n = 6;
        let v = orthonormal_cols(31, n, 1);
        let dec = LatentDecomposition::new(
            low_rank_from(v.clone(), &[1.0]),
            vec![LowRank::zero(n)],
        )
        .unwrap();
        let mut a = SymMatrix::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if v[(i, 0)] * v[(j, 0)] > 0.0 {
                    a.set(i, j, 1.0);
                }
            }
        }
        let net = MultiplexNetwork::new(vec![a], false).unwrap();
        let (out, report) =
            refit_eigenvalues(&EdgeFamily::BernoulliLogistic, &net, &dec).unwrap();
        assert!(report.fell_back);
        assert!(!report.warnings.is_empty());
        // Pre-refit eigenvalues kept.
        assert_eq!(out.common().eigen().values()[0], 1.0);
    }

    #[test]
    fn duplicate_eigenvectors_are_degenerate() {
        let n = 10;
        let v = orthonormal_cols(41, n, 1);
        let mut doubled = DMatrix::zeros(n, 2);
        doubled.set_column(0, &v.column(0));
        doubled.set_column(1, &v.column(0));
        let dec = LatentDecomposition::new(
            low_rank_from(doubled, &[3.0, 2.0]),
            vec![LowRank::zero(n)],
        )
        .unwrap();
        let (net, _) = gen_gaussian(n, 1, 1, 1, 0.5, 42).unwrap();
        let err = refit_eigenvalues(&EdgeFamily::gaussian(), &net, &dec).unwrap_err();
        assert!(matches!(err, Error::DegenerateDesign(_)));
    }

    #[test]
    fn fit_plus_zero_data_gives_zero() {
        let layers = vec![SymMatrix::zeros(8); 2];
        let net = MultiplexNetwork::new(layers, false).unwrap();
        let cfg = SolverConfig::new(1.0, vec![0.7; 2]);
        let (dec, report) = fit_plus(&EdgeFamily::gaussian(), &net, &cfg).unwrap();
        assert_eq!(dec.common().rank(), 0);
        assert!(dec.individuals().iter().all(|g| g.rank() == 0));
        assert!(report.refit.is_some());
        assert_eq!(report.final_ranks, (0, vec![0, 0]));
    }

    #[test]
    fn fit_plus_improves_common_recovery_on_average() {
        // Shrinkage bias makes the one-stage estimate undershoot; with the
        // bias removed the common-part error should not be worse on average.
        let mut err_plain = 0.0;
        let mut err_plus = 0.0;
        let reps = 20;
        let (n, m) = (40, 4);
        let lam = 2.309 * (n as f64 * m as f64).sqrt();
        for rep in 0..reps {
            let (net, truth) = gen_gaussian(n, m, 2, 1, 1.0, 900 + rep).unwrap();
            let cfg = SolverConfig::new(lam, vec![1.0 / (m as f64).sqrt(); m]);
            let fam = &EdgeFamily::gaussian();
            let (dec, _) = solver::fit(fam, &net, &cfg).unwrap();
            let (dec_plus, _) = fit_plus(fam, &net, &cfg).unwrap();
            let denom = crate::linalg::hollow_frobenius(&truth.f);
            err_plain +=
                crate::linalg::hollow_frobenius(&(dec.common().dense() - &truth.f)) / denom;
            err_plus += crate::linalg::hollow_frobenius(
                &(dec_plus.common().dense() - &truth.f),
            ) / denom;
        }
        assert!(
            err_plus <= err_plain,
            "refit hurt on average: {} vs {}",
            err_plus / reps as f64,
            err_plain / reps as f64
        );
    }

    #[test]
    fn fit_plus_finds_no_individual_structure_in_null_case() {
        let (n, m) = (50, 3);
        let lam = 2.309 * (n as f64 * m as f64).sqrt();
        for rep in 0..5u64 {
            let (net, _) = gen_gaussian(n, m, 2, 0, 1.0, 700 + rep).unwrap();
            let cfg = SolverConfig::new(lam, vec![1.0 / (m as f64).sqrt(); m]);
            let (dec, _) = fit_plus(&EdgeFamily::gaussian(), &net, &cfg).unwrap();
            let (_, d2) = dec.ranks(DEFAULT_RANK_TOL);
            assert!(d2.iter().all(|&d| d == 0), "rep {rep}: ranks {d2:?}");
        }
    }

    #[test]
    fn refit_reorders_by_magnitude_and_recounts_signature() {
        // Feed eigenvalues whose refitted magnitudes swap order.
        let n = 12;
        let v = orthonormal_cols(51, n, 2);
        let truth = low_rank_from(v.clone(), &[-6.0, 2.0]);
        let net = network_from(truth.dense(), &[SymMatrix::zeros(n)]);
        let start = LatentDecomposition::new(
            low_rank_from(v, &[1.0, -1.0]),
            vec![LowRank::zero(n)],
        )
        .unwrap();
        let (out, _) = refit_eigenvalues(&EdgeFamily::gaussian(), &net, &start).unwrap();
        let vals = out.common().eigen().values();
        assert!((vals[0] + 6.0).abs() < 1e-8, "values {vals:?}");
        assert!((vals[1] - 2.0).abs() < 1e-8);
        assert_eq!(out.common().signature(), Signature::new(1, 1));
    }
}
