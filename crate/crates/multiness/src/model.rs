//! The statistical model layer: edge families, generalized inner-product
//! similarity, masked log-likelihood, and its block gradients.
//!
//! Each observed layer follows `A_{k,ij} ~ Q(·; θ_{k,ij}, φ)` with natural
//! parameter `θ_k = F + G_k`, where `Q` is either Gaussian with identity
//! link or Bernoulli with logistic link. The smooth part of the objective is
//! the negative log-likelihood summed over observed node pairs; gradients
//! with respect to `F` and each `G_k` are the masked residual matrices
//! `μ − A`, which is what the solver's proximal steps consume.
//!
//! Conventions used throughout: pair sums run over `i < j` with symmetric
//! write-back; diagonals participate only when the network records
//! self-loops; unobserved triples contribute nothing to losses or
//! gradients. The Gaussian loss is plain least squares — any `1/σ²` factor
//! is folded into the tuning parameters, which is what makes the unit step
//! size reproduce the closed-form soft-thresholding updates.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, EigenPair, SymMatrix};

/// Counts of assortative (`p`) and disassortative (`q`) latent dimensions;
/// the matrix `I_{p,q} = diag(1,…,1,−1,…,−1)` of the generalized inner
/// product `κ_{p,q}(x, y) = xᵀ I_{p,q} y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub p: usize,
    pub q: usize,
}

impl Signature {
    pub fn new(p: usize, q: usize) -> Self {
        Self { p, q }
    }

    /// Total latent dimension `p + q`.
    pub fn dim(&self) -> usize {
        self.p + self.q
    }
}

/// Edge distribution family: determines link, per-entry loss, and residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeFamily {
    /// Real edge weights, identity link, least-squares loss. The noise
    /// standard deviation is recorded when known but never enters the loss;
    /// it only informs tuning.
    GaussianIdentity { sigma: Option<f64> },
    /// Binary edges, logistic link `g(θ) = 1/(1+e^{−θ})`, Bernoulli
    /// log-likelihood loss.
    BernoulliLogistic,
}

impl EdgeFamily {
    /// Gaussian family with unspecified noise level.
    pub fn gaussian() -> Self {
        EdgeFamily::GaussianIdentity { sigma: None }
    }

    /// Gaussian family with a known noise standard deviation.
    pub fn gaussian_with_sigma(sigma: f64) -> Self {
        EdgeFamily::GaussianIdentity { sigma: Some(sigma) }
    }

    pub fn is_bernoulli(&self) -> bool {
        matches!(self, EdgeFamily::BernoulliLogistic)
    }

    /// Mean function: `μ = g(θ)` (identity for Gaussian, expit for
    /// Bernoulli).
    pub fn link(&self, theta: f64) -> f64 {
        match self {
            EdgeFamily::GaussianIdentity { .. } => theta,
            EdgeFamily::BernoulliLogistic => expit(theta),
        }
    }

    /// Per-entry negative log-likelihood (Gaussian: `½(a−θ)²`; Bernoulli:
    /// `ν(θ) − a·θ` with `ν(θ) = log(1+eᶿ)`).
    pub fn entry_loss(&self, a: f64, theta: f64) -> f64 {
        match self {
            EdgeFamily::GaussianIdentity { .. } => {
                let r = a - theta;
                0.5 * r * r
            }
            EdgeFamily::BernoulliLogistic => log_partition(theta) - a * theta,
        }
    }

    /// Gradient of [`Self::entry_loss`] in `θ`: the residual `μ − a`.
    pub fn entry_residual(&self, a: f64, theta: f64) -> f64 {
        self.link(theta) - a
    }

    /// Checks an observed value is admissible for this family.
    fn validate_entry(&self, a: f64, k: usize, i: usize, j: usize) -> Result<()> {
        match self {
            EdgeFamily::GaussianIdentity { .. } => Ok(()),
            EdgeFamily::BernoulliLogistic => {
                if a == 0.0 || a == 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!(
                        "Bernoulli entry A_{k}[{i},{j}] = {a} is not 0 or 1"
                    )))
                }
            }
        }
    }
}

/// Numerically stable `log(1 + eᶿ)`.
pub(crate) fn log_partition(theta: f64) -> f64 {
    theta.max(0.0) + (-theta.abs()).exp().ln_1p()
}

/// Numerically stable logistic function.
pub(crate) fn expit(theta: f64) -> f64 {
    if theta >= 0.0 {
        1.0 / (1.0 + (-theta).exp())
    } else {
        let e = theta.exp();
        e / (1.0 + e)
    }
}

/// Per-layer symmetric indicator of which `(i, j, k)` triples are observed.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMask {
    layers: Vec<DMatrix<bool>>,
}

impl ObservationMask {
    /// Fully observed mask; the diagonal is marked unobserved unless the
    /// network records self-loops.
    pub fn full(n: usize, m: usize, self_loops: bool) -> Self {
        let mut layer = DMatrix::from_element(n, n, true);
        if !self_loops {
            for i in 0..n {
                layer[(i, i)] = false;
            }
        }
        Self {
            layers: vec![layer; m],
        }
    }

    pub fn n(&self) -> usize {
        self.layers.first().map_or(0, |l| l.nrows())
    }

    pub fn m(&self) -> usize {
        self.layers.len()
    }

    pub fn is_observed(&self, k: usize, i: usize, j: usize) -> bool {
        self.layers[k][(i, j)]
    }

    /// Hides the symmetric pair `(i, j)` (and `(j, i)`) in layer `k`.
    pub fn hide(&mut self, k: usize, i: usize, j: usize) {
        self.layers[k][(i, j)] = false;
        self.layers[k][(j, i)] = false;
    }

    /// Number of observed upper-triangle entries in layer `k` (diagonal
    /// included when marked observed).
    pub fn observed_count(&self, k: usize) -> usize {
        let n = self.n();
        let mut count = 0;
        for i in 0..n {
            for j in i..n {
                if self.layers[k][(i, j)] {
                    count += 1;
                }
            }
        }
        count
    }

    /// Observed strictly-off-diagonal pair count in layer `k`.
    pub fn observed_offdiag_count(&self, k: usize) -> usize {
        let n = self.n();
        let mut count = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.layers[k][(i, j)] {
                    count += 1;
                }
            }
        }
        count
    }

    fn clear_diagonal(&mut self) {
        let n = self.n();
        for layer in &mut self.layers {
            for i in 0..n {
                layer[(i, i)] = false;
            }
        }
    }
}

/// A multiplex network: `m` symmetric layers over one shared node set, with
/// an observation mask.
#[derive(Debug, Clone)]
pub struct MultiplexNetwork {
    layers: Vec<SymMatrix>,
    mask: ObservationMask,
    self_loops: bool,
}

impl MultiplexNetwork {
    /// Fully observed network.
    pub fn new(layers: Vec<SymMatrix>, self_loops: bool) -> Result<Self> {
        let m = layers.len();
        let n = layers.first().map_or(0, SymMatrix::n);
        Self::with_mask(layers, ObservationMask::full(n, m, self_loops), self_loops)
    }

    /// Network with an explicit observation mask. When self-loops are
    /// absent, diagonal triples are forced unobserved.
    pub fn with_mask(
        layers: Vec<SymMatrix>,
        mut mask: ObservationMask,
        self_loops: bool,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("a network needs at least one layer".into()));
        }
        let n = layers[0].n();
        if n < 2 {
            return Err(Error::InvalidInput("a network needs at least two nodes".into()));
        }
        if layers.iter().any(|l| l.n() != n) {
            return Err(Error::InvalidInput("layers have mismatched sizes".into()));
        }
        if mask.n() != n || mask.m() != layers.len() {
            return Err(Error::InvalidInput(format!(
                "mask shape {}x{} does not match network {}x{}",
                mask.n(),
                mask.m(),
                n,
                layers.len()
            )));
        }
        if !self_loops {
            mask.clear_diagonal();
        }
        Ok(Self {
            layers,
            mask,
            self_loops,
        })
    }

    /// Replaces the mask (e.g. with a cross-validation fold), keeping data.
    pub fn with_replaced_mask(&self, mask: ObservationMask) -> Result<Self> {
        Self::with_mask(self.layers.clone(), mask, self.self_loops)
    }

    pub fn n(&self) -> usize {
        self.layers[0].n()
    }

    pub fn m(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, k: usize) -> &SymMatrix {
        &self.layers[k]
    }

    pub fn layers(&self) -> &[SymMatrix] {
        &self.layers
    }

    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    pub fn self_loops(&self) -> bool {
        self.self_loops
    }
}

/// One low-rank symmetric component held in factored form: eigenpairs plus
/// the signature read off the eigenvalue signs. The dense form is
/// reconstructed on first use and cached.
#[derive(Debug, Clone)]
pub struct LowRank {
    eig: EigenPair,
    sig: Signature,
    dense: OnceLock<SymMatrix>,
}

impl LowRank {
    /// The zero component.
    pub fn zero(n: usize) -> Self {
        Self {
            eig: EigenPair::empty(n),
            sig: Signature::new(0, 0),
            dense: OnceLock::new(),
        }
    }

    /// Builds from eigenpairs, dropping exact-zero eigenvalues so that the
    /// signature equals the signs of what is stored.
    pub fn from_eigen(pair: EigenPair) -> Self {
        let pair = pair.map_values(|g| g); // drops exact zeros
        let p = pair.values().iter().filter(|&&g| g > 0.0).count();
        let q = pair.dim() - p;
        Self {
            eig: pair,
            sig: Signature::new(p, q),
            dense: OnceLock::new(),
        }
    }

    /// Builds keeping every supplied eigenpair. Used by refitting, which
    /// must preserve ranks even if a refitted eigenvalue lands on zero;
    /// such a value counts toward the assortative side.
    pub(crate) fn from_eigen_keep_all(pair: EigenPair) -> Self {
        let p = pair.values().iter().filter(|&&g| g >= 0.0).count();
        let q = pair.dim() - p;
        Self {
            eig: pair,
            sig: Signature::new(p, q),
            dense: OnceLock::new(),
        }
    }

    /// Builds from a dense symmetric matrix via a full eigendecomposition,
    /// pruning eigenvalues below `tol` relative to the largest.
    pub fn from_dense(m: &SymMatrix, tol: f64) -> Self {
        let pair = linalg::dense_eigen(m);
        let top = pair.values().iter().fold(0.0_f64, |a, &g| a.max(g.abs()));
        let cut = tol * top.max(1.0);
        Self::from_eigen(pair.map_values(|g| if g.abs() > cut { g } else { 0.0 }))
    }

    pub fn n(&self) -> usize {
        self.eig.n()
    }

    /// Stored rank (number of kept eigenpairs).
    pub fn rank(&self) -> usize {
        self.eig.dim()
    }

    /// Rank at the reporting tolerance (see [`linalg::numerical_rank`]).
    pub fn numerical_rank(&self, tol: f64) -> usize {
        linalg::rank_from_values(self.eig.values().iter().copied(), tol)
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn eigen(&self) -> &EigenPair {
        &self.eig
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.eig.nuclear_norm()
    }

    /// Dense form, reconstructed on first call.
    pub fn dense(&self) -> &SymMatrix {
        self.dense.get_or_init(|| self.eig.reconstruct())
    }
}

/// The estimated decomposition: common component `F` plus one individual
/// component `G_k` per layer.
#[derive(Debug, Clone)]
pub struct LatentDecomposition {
    common: LowRank,
    individual: Vec<LowRank>,
}

impl LatentDecomposition {
    pub fn new(common: LowRank, individual: Vec<LowRank>) -> Result<Self> {
        let n = common.n();
        if individual.iter().any(|g| g.n() != n) {
            return Err(Error::InvalidInput(
                "individual components disagree with the common component size".into(),
            ));
        }
        Ok(Self { common, individual })
    }

    /// All-zero decomposition for an `n`-node, `m`-layer network.
    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            common: LowRank::zero(n),
            individual: (0..m).map(|_| LowRank::zero(n)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.common.n()
    }

    pub fn m(&self) -> usize {
        self.individual.len()
    }

    pub fn common(&self) -> &LowRank {
        &self.common
    }

    pub fn individual(&self, k: usize) -> &LowRank {
        &self.individual[k]
    }

    pub fn individuals(&self) -> &[LowRank] {
        &self.individual
    }

    /// Natural parameter matrix `θ_k = F + G_k` for layer `k`.
    pub fn theta(&self, k: usize) -> SymMatrix {
        self.common.dense() + self.individual[k].dense()
    }

    /// Estimated ranks `(d̂₁, d̂₂ₖ)` at the given relative tolerance.
    pub fn ranks(&self, tol: f64) -> (usize, Vec<usize>) {
        (
            self.common.numerical_rank(tol),
            self.individual.iter().map(|g| g.numerical_rank(tol)).collect(),
        )
    }
}

/// Generalized inner-product similarity `X · I_{p,q} · Xᵀ`.
pub fn similarity_matrix(x: &DMatrix<f64>, sig: Signature) -> Result<SymMatrix> {
    if sig.dim() != x.ncols() {
        return Err(Error::InvalidInput(format!(
            "signature ({}, {}) does not match {} latent columns",
            sig.p,
            sig.q,
            x.ncols()
        )));
    }
    let mut scaled = x.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        if j >= sig.p {
            col *= -1.0;
        }
    }
    let mut data = scaled * x.transpose();
    let n = data.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            data[(j, i)] = data[(i, j)];
        }
    }
    Ok(SymMatrix::from_exact(data))
}

/// Which block of the decomposition a gradient refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Common,
    Individual(usize),
}

/// Negative log-likelihood over observed triples for one layer, given its
/// natural parameter matrix.
pub(crate) fn layer_loss(
    fam: &EdgeFamily,
    net: &MultiplexNetwork,
    k: usize,
    theta: &SymMatrix,
) -> Result<f64> {
    let n = net.n();
    let a = net.layer(k);
    let mask = net.mask();
    let mut acc = 0.0;
    for i in 0..n {
        for j in i..n {
            if (i < j || net.self_loops()) && mask.is_observed(k, i, j) {
                fam.validate_entry(a[(i, j)], k, i, j)?;
                acc += fam.entry_loss(a[(i, j)], theta[(i, j)]);
            }
        }
    }
    Ok(acc)
}

/// Negative log-likelihood accumulated over *ordered* observed pairs —
/// each off-diagonal dyad twice, the diagonal once. This is the loss whose
/// gradient in the symmetric-matrix Frobenius geometry is exactly the full
/// residual matrix of [`layer_gradient`], so it is the quantity the
/// proximal updates provably decrease; [`layer_loss`] counts each dyad
/// once instead.
pub(crate) fn layer_ordered_loss(
    fam: &EdgeFamily,
    net: &MultiplexNetwork,
    k: usize,
    theta: &SymMatrix,
) -> Result<f64> {
    let n = net.n();
    let a = net.layer(k);
    let mask = net.mask();
    let mut acc = 0.0;
    for i in 0..n {
        for j in i..n {
            if (i < j || net.self_loops()) && mask.is_observed(k, i, j) {
                fam.validate_entry(a[(i, j)], k, i, j)?;
                let w = if i == j { 1.0 } else { 2.0 };
                acc += w * fam.entry_loss(a[(i, j)], theta[(i, j)]);
            }
        }
    }
    Ok(acc)
}

/// Sum of [`layer_ordered_loss`] over layers.
pub(crate) fn ordered_loss(
    fam: &EdgeFamily,
    net: &MultiplexNetwork,
    dec: &LatentDecomposition,
) -> Result<f64> {
    let mut acc = 0.0;
    for k in 0..net.m() {
        acc += layer_ordered_loss(fam, net, k, &dec.theta(k))?;
    }
    Ok(acc)
}

/// Masked residual matrix `μ − A` for one layer: the gradient of
/// [`layer_loss`] in the symmetric natural parameter. Unobserved triples
/// and (without self-loops) the diagonal are zero.
pub(crate) fn layer_gradient(
    fam: &EdgeFamily,
    net: &MultiplexNetwork,
    k: usize,
    theta: &SymMatrix,
) -> Result<SymMatrix> {
    let n = net.n();
    let a = net.layer(k);
    let mask = net.mask();
    let mut grad = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            if (i < j || net.self_loops()) && mask.is_observed(k, i, j) {
                fam.validate_entry(a[(i, j)], k, i, j)?;
                grad.set(i, j, fam.entry_residual(a[(i, j)], theta[(i, j)]));
            }
        }
    }
    Ok(grad)
}

/// Negative log-likelihood of the decomposition over all observed triples.
pub fn masked_loss(
    fam: &EdgeFamily,
    net: &MultiplexNetwork,
    dec: &LatentDecomposition,
) -> Result<f64> {
    check_dims(net, dec)?;
    let mut acc = 0.0;
    for k in 0..net.m() {
        acc += layer_loss(fam, net, k, &dec.theta(k))?;
    }
    Ok(acc)
}

/// Gradient of [`masked_loss`] with respect to one block of the
/// decomposition. The common block's gradient is the sum of the per-layer
/// residual matrices, accumulated in layer order.
pub fn block_gradient(
    fam: &EdgeFamily,
    net: &MultiplexNetwork,
    dec: &LatentDecomposition,
    block: Block,
) -> Result<SymMatrix> {
    check_dims(net, dec)?;
    match block {
        Block::Individual(k) => {
            if k >= net.m() {
                return Err(Error::InvalidInput(format!(
                    "layer index {k} out of range for m={}",
                    net.m()
                )));
            }
            layer_gradient(fam, net, k, &dec.theta(k))
        }
        Block::Common => {
            let mut acc = SymMatrix::zeros(net.n());
            for k in 0..net.m() {
                acc = &acc + &layer_gradient(fam, net, k, &dec.theta(k))?;
            }
            Ok(acc)
        }
    }
}

/// Entrywise expected adjacency `g(F + G_k)`.
pub fn expected_adjacency(fam: &EdgeFamily, f: &SymMatrix, gk: &SymMatrix) -> SymMatrix {
    let theta = f + gk;
    SymMatrix::from_fn(theta.n(), |i, j| fam.link(theta[(i, j)]))
}

fn check_dims(net: &MultiplexNetwork, dec: &LatentDecomposition) -> Result<()> {
    if dec.n() != net.n() || dec.m() != net.m() {
        return Err(Error::InvalidInput(format!(
            "decomposition shape ({} nodes, {} layers) does not match network ({}, {})",
            dec.n(),
            dec.m(),
            net.n(),
            net.m()
        )));
    }
    Ok(())
}
