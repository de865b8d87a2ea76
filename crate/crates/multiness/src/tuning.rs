//! Tuning-parameter selection: noise estimation from the median singular
//! value, adaptive penalty weights, and edge cross-validation.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::model::{EdgeFamily, MultiplexNetwork};
use crate::simulate::{hold_out, HoldoutMode};
use crate::solver::{self, SolverConfig};

/// Default sharpness of the adaptive penalty level.
pub const DEFAULT_DELTA: f64 = 0.309;
/// Default fraction of observed entries each cross-validation fold hides.
pub const DEFAULT_CV_HOLDOUT: f64 = 0.1;
/// Default number of cross-validation folds.
pub const DEFAULT_CV_FOLDS: usize = 5;

/// How a [`TuningSelection`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuningMethod {
    AdaptiveUniform,
    AdaptiveLayerwise,
    CrossValidated,
    Fixed,
}

/// A selected set of penalty parameters.
#[derive(Debug, Clone)]
pub struct TuningSelection {
    pub lambda: f64,
    pub alphas: Vec<f64>,
    /// The δ that generated `lambda`; `NaN` when λ was not δ-derived.
    pub delta: f64,
    pub per_layer_sigma: Vec<f64>,
    pub method: TuningMethod,
    /// Human-readable diagnostics (degenerate inputs, skipped folds).
    pub warnings: Vec<String>,
}

impl TuningSelection {
    /// Wraps caller-chosen parameters without any data-driven selection.
    pub fn fixed(lambda: f64, alphas: Vec<f64>) -> Self {
        Self {
            lambda,
            alphas,
            delta: f64::NAN,
            per_layer_sigma: Vec::new(),
            method: TuningMethod::Fixed,
            warnings: Vec::new(),
        }
    }
}

/// Median of the Marchenko–Pastur law at aspect ratio 1, computed once by
/// numerical integration. With the substitution `x = u²` the MP density on
/// `(0, 4]` becomes `√(4 − u²)/π du` on `(0, 2]`; the median in `u` is
/// found by bisecting the Simpson-quadrature CDF at ½ and squared back.
fn mp_median() -> f64 {
    static MEDIAN: OnceLock<f64> = OnceLock::new();
    *MEDIAN.get_or_init(|| {
        let cdf = |u: f64| simpson(|t| (4.0 - t * t).sqrt() / std::f64::consts::PI, 0.0, u, 2048);
        let mut lo = 0.0_f64;
        let mut hi = 2.0_f64;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let u = 0.5 * (lo + hi);
        u * u
    })
}

/// Composite Simpson rule with `steps` (even) subintervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, steps: usize) -> f64 {
    let h = (b - a) / steps as f64;
    let mut acc = f(a) + f(b);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Noise-level estimate from the median singular value: `s_med / √(n·μ_med)`
/// with `μ_med` the Marchenko–Pastur median at aspect ratio 1, the white-
/// noise calibration that makes the estimator consistent for an iid
/// Gaussian matrix and insensitive to a low-rank signal offset.
/// Homogeneous of degree one in the data.
pub fn sigma_mad(a: &SymMatrix) -> f64 {
    let n = a.n();
    let mut sv: Vec<f64> = linalg::dense_eigenvalues_sorted(a)
        .iter()
        .map(|g| g.abs())
        .collect();
    sv.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let med = if n % 2 == 1 {
        sv[n / 2]
    } else {
        0.5 * (sv[n / 2 - 1] + sv[n / 2])
    };
    med / (n as f64 * mp_median()).sqrt()
}

/// A copy of layer `k` with unobserved entries zeroed, so masked values
/// cannot leak into noise estimation. Returns a borrowed clone only when
/// something is actually hidden.
fn observed_layer(net: &MultiplexNetwork, k: usize) -> SymMatrix {
    let n = net.n();
    let mut out = net.layer(k).clone();
    for i in 0..n {
        for j in i..n {
            if !net.mask().is_observed(k, i, j) {
                out.set(i, j, 0.0);
            }
        }
    }
    out
}

fn per_layer_sigmas(net: &MultiplexNetwork) -> Vec<f64> {
    (0..net.m())
        .into_par_iter()
        .map(|k| sigma_mad(&observed_layer(net, k)))
        .collect()
}

/// Data-adaptive penalty parameters at sharpness `δ` (must exceed −2).
///
/// Uniform (`layerwise = false`): pooled noise `σ̂ = (Σσ̂²_k / m)^{1/2}`,
/// `λ = (2+δ)·σ̂·√(nm)`, and equal weights `α_k = m^{−1/2}`.
/// Layer-specific (`layerwise = true`): `λ = (2+δ)·√(nm)·(Σσ̂²_k)^{1/2}`
/// with weights `α_k = m^{−1/2}·(σ̂²_k / Σσ̂²)^{1/2}`, so better-measured
/// layers are shrunk less; the weights satisfy `Σα_k² = 1/m`.
///
/// All-zero data yields `λ = 0` with a warning rather than an error.
pub fn adaptive_params(
    net: &MultiplexNetwork,
    delta: f64,
    layerwise: bool,
) -> Result<TuningSelection> {
    if !(delta > -2.0) {
        return Err(Error::InvalidInput(format!(
            "delta must exceed -2, got {delta}"
        )));
    }
    let n = net.n() as f64;
    let m = net.m() as f64;
    let sigmas = per_layer_sigmas(net);
    let total_var: f64 = sigmas.iter().map(|s| s * s).sum();
    let mut warnings = Vec::new();
    if total_var == 0.0 {
        warnings.push("all layers are zero; selected lambda = 0".into());
    }
    let (lambda, alphas, method) = if layerwise {
        let lambda = (2.0 + delta) * (n * m).sqrt() * total_var.sqrt();
        let alphas = sigmas
            .iter()
            .map(|s| {
                if total_var == 0.0 {
                    1.0 / m.sqrt()
                } else {
                    (s * s / total_var).sqrt() / m.sqrt()
                }
            })
            .collect();
        (lambda, alphas, TuningMethod::AdaptiveLayerwise)
    } else {
        let pooled = (total_var / m).sqrt();
        let lambda = (2.0 + delta) * pooled * (n * m).sqrt();
        (
            lambda,
            vec![1.0 / m.sqrt(); net.m()],
            TuningMethod::AdaptiveUniform,
        )
    };
    Ok(TuningSelection {
        lambda,
        alphas,
        delta,
        per_layer_sigma: sigmas,
        method,
        warnings,
    })
}

/// The grid an [`edge_cv`] search runs over.
#[derive(Debug, Clone)]
pub enum CvCandidates {
    /// Sharpness values fed through [`adaptive_params`] (uniform or
    /// layer-specific weighting).
    Deltas { values: Vec<f64>, layerwise: bool },
    /// Explicit penalty levels, each with equal weights `α_k = m^{−1/2}`.
    Lambdas(Vec<f64>),
    /// Constants `C` in `λ = C·√(nm)`, the parametrization suited to
    /// sparse binary networks; equal weights.
    Constants(Vec<f64>),
}

/// Per-candidate, per-fold record of a cross-validation run.
#[derive(Debug, Clone)]
pub struct CvReport {
    /// λ of each candidate, in input order.
    pub candidate_lambdas: Vec<f64>,
    /// Mean held-out per-entry loss per candidate (over surviving folds).
    pub mean_scores: Vec<f64>,
    /// `fold_scores[c][f]` = candidate `c` on surviving fold `f`.
    pub fold_scores: Vec<Vec<f64>>,
    /// Indices of folds skipped because the holdout emptied some layer.
    pub skipped_folds: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Selects among `candidates` by edge cross-validation: each fold hides a
/// symmetric random `holdout_frac` of the observed off-diagonal triples,
/// refits every candidate on the remainder (the solver handles partial
/// observation natively), and scores the hidden triples by per-entry loss —
/// squared error for Gaussian edges, deviance `2(ν(θ̂) − a·θ̂)` for binary
/// ones. The candidate with the smallest mean score wins; ties go to the
/// smaller λ. A fold whose holdout empties a layer is skipped with a
/// warning; if every fold is skipped the search fails with
/// [`Error::CvFailed`].
pub fn edge_cv(
    fam: &EdgeFamily,
    net: &MultiplexNetwork,
    candidates: &CvCandidates,
    holdout_frac: f64,
    n_folds: usize,
    seed: u64,
) -> Result<(TuningSelection, CvReport)> {
    if !(holdout_frac > 0.0 && holdout_frac < 1.0) {
        return Err(Error::InvalidInput(format!(
            "holdout fraction must lie in (0, 1), got {holdout_frac}"
        )));
    }
    if n_folds == 0 {
        return Err(Error::InvalidInput("need at least one fold".into()));
    }
    let n = net.n() as f64;
    let m = net.m() as f64;
    let equal = vec![1.0 / m.sqrt(); net.m()];
    // Materialize (lambda, alphas, delta) per candidate. σ̂, and hence the
    // δ-derived candidates, come from the full observed data once.
    let mut grid: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    match candidates {
        CvCandidates::Deltas { values, layerwise } => {
            for &d in values {
                let sel = adaptive_params(net, d, *layerwise)?;
                grid.push((sel.lambda, sel.alphas, d));
            }
        }
        CvCandidates::Lambdas(ls) => {
            for &l in ls {
                grid.push((l, equal.clone(), f64::NAN));
            }
        }
        CvCandidates::Constants(cs) => {
            for &c in cs {
                grid.push((c * (n * m).sqrt(), equal.clone(), f64::NAN));
            }
        }
    }
    if grid.is_empty() {
        return Err(Error::InvalidInput("need at least one candidate".into()));
    }
    if grid
        .iter()
        .any(|(l, al, _)| !l.is_finite() || *l < 0.0 || al.iter().any(|a| !a.is_finite()))
    {
        return Err(Error::InvalidInput(
            "candidate penalties must be finite and nonnegative".into(),
        ));
    }

    let mut warnings = Vec::new();
    let mut skipped_folds = Vec::new();
    let mut folds = Vec::new();
    for f in 0..n_folds {
        match hold_out(net, holdout_frac, HoldoutMode::AllLayers, seed.wrapping_add(f as u64)) {
            Ok(pair) => folds.push(pair),
            Err(Error::HoldoutTooLarge(why)) => {
                warnings.push(format!("fold {f} skipped: {why}"));
                skipped_folds.push(f);
            }
            Err(e) => return Err(e),
        }
    }
    if folds.is_empty() {
        return Err(Error::CvFailed(format!(
            "all {n_folds} folds were skipped"
        )));
    }

    // Score the whole candidate × fold grid; both axes are independent, so
    // the work is flat-parallel and written back by index.
    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..folds.len()).map(move |f| (c, f)))
        .collect();
    let scored: Vec<(usize, usize, Result<f64>)> = tasks
        .into_par_iter()
        .map(|(c, f)| {
            let (train, held) = &folds[f];
            let (lambda, alphas, _) = &grid[c];
            let cfg = SolverConfig::new(*lambda, alphas.clone());
            let score = solver::fit(fam, train, &cfg).map(|(dec, _)| {
                let mut acc = 0.0;
                let mut last_k = usize::MAX;
                let mut theta = SymMatrix::zeros(0);
                for &(k, i, j) in held {
                    if k != last_k {
                        theta = dec.theta(k);
                        last_k = k;
                    }
                    acc += cv_entry_loss(fam, net.layer(k)[(i, j)], theta[(i, j)]);
                }
                acc / held.len() as f64
            });
            (c, f, score)
        })
        .collect();

    let mut fold_scores = vec![vec![f64::NAN; folds.len()]; grid.len()];
    for (c, f, score) in scored {
        match score {
            Ok(s) => fold_scores[c][f] = s,
            Err(e) => {
                warnings.push(format!(
                    "candidate {c} (lambda={:.6e}) failed on fold {f}: {e}; scored as +inf",
                    grid[c].0
                ));
                fold_scores[c][f] = f64::INFINITY;
            }
        }
    }
    let mean_scores: Vec<f64> = fold_scores
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect();

    let mut best = 0usize;
    for c in 1..grid.len() {
        let better = mean_scores[c] < mean_scores[best]
            || (mean_scores[c] == mean_scores[best] && grid[c].0 < grid[best].0);
        if better {
            best = c;
        }
    }

    let report = CvReport {
        candidate_lambdas: grid.iter().map(|g| g.0).collect(),
        mean_scores,
        fold_scores,
        skipped_folds,
        warnings: warnings.clone(),
    };
    let selection = TuningSelection {
        lambda: grid[best].0,
        alphas: grid[best].1.clone(),
        delta: grid[best].2,
        per_layer_sigma: per_layer_sigmas(net),
        method: TuningMethod::CrossValidated,
        warnings,
    };
    Ok((selection, report))
}

/// Held-out per-entry score: squared error for Gaussian edges, deviance for
/// binary ones (both zero at a perfect saturated fit).
fn cv_entry_loss(fam: &EdgeFamily, a: f64, theta: f64) -> f64 {
    match fam {
        EdgeFamily::GaussianIdentity { .. } => {
            let r = a - theta;
            r * r
        }
        EdgeFamily::BernoulliLogistic => 2.0 * fam.entry_loss(a, theta),
    }
}
