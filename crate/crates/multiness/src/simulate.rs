//! Seeded synthetic multiplex networks with known shared and individual
//! structure, plus edge-holdout utilities.
//!
//! Randomness contract: every generator derives its draws from a
//! `ChaCha12` generator with a fixed stream layout — stream 0 for the
//! common latent positions, and streams `1+3k` (layer latents), `2+3k`
//! (edge noise / coin flips), `3+3k` (rotations) for layer `k`. Adding
//! layers therefore never perturbs earlier layers' draws, and
//! [`gen_correlated`] at `ρ = 0` reproduces [`gen_gaussian`] bit for bit.
//! Within a stream, matrices fill column by column and symmetric noise
//! fills the upper triangle row by row.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::model::{
    expit, similarity_matrix, EdgeFamily, MultiplexNetwork, Signature,
};

/// A held-out triple `(layer, i, j)` with `i < j`.
pub type HeldOutTriple = (usize, usize, usize);

/// The ground truth behind a generated network.
#[derive(Debug, Clone)]
pub struct SimTruth {
    /// Common latent positions (possibly augmented; see [`gen_logistic`]).
    pub v: DMatrix<f64>,
    /// Per-layer individual latent positions.
    pub us: Vec<DMatrix<f64>>,
    pub sig_common: Signature,
    pub sig_individual: Vec<Signature>,
    /// Dense common similarity `F = V I V^T` (diagonal included).
    pub f: SymMatrix,
    /// Dense individual similarities `G_k = U_k I U_k^T`.
    pub gs: Vec<SymMatrix>,
    pub family: EdgeFamily,
    pub sigma: Option<f64>,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub seed: u64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal_matrix(rng: &mut ChaCha12Rng, nrows: usize, ncols: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(nrows, ncols);
    for j in 0..ncols {
        for i in 0..nrows {
            x[(i, j)] = rng.sample(StandardNormal);
        }
    }
    x
}

/// Symmetric hollow noise matrix with iid `N(0, σ²)` above the diagonal.
fn symmetric_noise(rng: &mut ChaCha12Rng, n: usize, sigma: f64) -> SymMatrix {
    let mut e = SymMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let z: f64 = rng.sample(StandardNormal);
            e.set(i, j, sigma * z);
        }
    }
    e
}

/// Haar-distributed rotation: QR of a standard-normal square matrix with
/// the sign of R's diagonal fixed positive.
fn haar_rotation(rng: &mut ChaCha12Rng, d: usize) -> DMatrix<f64> {
    let z = normal_matrix(rng, d, d);
    let (mut q, r) = z.qr().unpack();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

fn check_shape(n: usize, m: usize) -> Result<()> {
    if n < 2 || m < 1 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 nodes and 1 layer, got n={n}, m={m}"
        )));
    }
    Ok(())
}

fn hollow(mut m: SymMatrix) -> SymMatrix {
    m.zero_diagonal();
    m
}

/// Gaussian-edge networks: `A_k = F + G_k + E_k` off the diagonal, with
/// `F = VVᵀ`, `G_k = U_k U_kᵀ`, standard-normal latent entries, and iid
/// `N(0, σ²)` noise. Layers are hollow (no self-loops).
pub fn gen_gaussian(
    n: usize,
    m: usize,
    d1: usize,
    d2: usize,
    sigma: f64,
    seed: u64,
) -> Result<(MultiplexNetwork, SimTruth)> {
    check_shape(n, m)?;
    if !(sigma >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise level must be nonnegative, got {sigma}"
        )));
    }
    gen_gaussian_inner(n, m, d1, d2, sigma, None, seed)
}

/// Shared Gaussian machinery; `rho = Some(ρ)` switches the layer latents
/// to the correlated construction `U_k = ρ·V·O_k + √(1−ρ²)·Z_k`.
fn gen_gaussian_inner(
    n: usize,
    m: usize,
    d1: usize,
    d2: usize,
    sigma: f64,
    rho: Option<f64>,
    seed: u64,
) -> Result<(MultiplexNetwork, SimTruth)> {
    let v = normal_matrix(&mut stream_rng(seed, 0), n, d1);
    let sig1 = Signature::new(d1, 0);
    let sig2 = Signature::new(d2, 0);
    let f = similarity_matrix(&v, sig1)?;

    let mut us = Vec::with_capacity(m);
    let mut gs = Vec::with_capacity(m);
    let mut layers = Vec::with_capacity(m);
    for k in 0..m {
        let z = normal_matrix(&mut stream_rng(seed, 1 + 3 * k as u64), n, d2);
        let u = match rho {
            None => z,
            Some(r) => {
                let o = haar_rotation(&mut stream_rng(seed, 3 + 3 * k as u64), d2);
                r * (&v * o) + (1.0 - r * r).sqrt() * z
            }
        };
        let g = similarity_matrix(&u, sig2)?;
        let e = symmetric_noise(&mut stream_rng(seed, 2 + 3 * k as u64), n, sigma);
        layers.push(hollow(&(&f + &g) + &e));
        us.push(u);
        gs.push(g);
    }

    let net = MultiplexNetwork::new(layers, false)?;
    let truth = SimTruth {
        v,
        us,
        sig_common: sig1,
        sig_individual: vec![sig2; m],
        f,
        gs,
        family: EdgeFamily::gaussian_with_sigma(sigma),
        sigma: Some(sigma),
        beta: None,
        rho,
        seed,
    };
    Ok((net, truth))
}

/// Binary-edge networks: `P_k = g(VVᵀ + U_k U_kᵀ − β·11ᵀ)` with the
/// logistic link. The density offset `β` is recorded in the truth as one
/// extra disassortative common coordinate `√β·1`, so the common truth is
/// `F = VVᵀ − β·11ᵀ` with signature `(d1, 1)` when `β > 0`.
pub fn gen_logistic(
    n: usize,
    m: usize,
    d1: usize,
    d2: usize,
    beta: f64,
    seed: u64,
) -> Result<(MultiplexNetwork, SimTruth)> {
    check_shape(n, m)?;
    if !(beta >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "density offset must be nonnegative, got {beta}"
        )));
    }
    let v_raw = normal_matrix(&mut stream_rng(seed, 0), n, d1);
    // Augment with the offset coordinate.
    let (v, sig1) = if beta > 0.0 {
        let mut v = DMatrix::zeros(n, d1 + 1);
        v.view_mut((0, 0), (n, d1)).copy_from(&v_raw);
        let b = beta.sqrt();
        for i in 0..n {
            v[(i, d1)] = b;
        }
        (v, Signature::new(d1, 1))
    } else {
        (v_raw, Signature::new(d1, 0))
    };
    let sig2 = Signature::new(d2, 0);
    let f = similarity_matrix(&v, sig1)?;

    let mut us = Vec::with_capacity(m);
    let mut gs = Vec::with_capacity(m);
    let mut layers = Vec::with_capacity(m);
    for k in 0..m {
        let u = normal_matrix(&mut stream_rng(seed, 1 + 3 * k as u64), n, d2);
        let g = similarity_matrix(&u, sig2)?;
        let theta = &f + &g;
        let mut coin = stream_rng(seed, 2 + 3 * k as u64);
        let mut a = SymMatrix::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if coin.gen_bool(expit(theta[(i, j)])) {
                    a.set(i, j, 1.0);
                }
            }
        }
        layers.push(a);
        us.push(u);
        gs.push(g);
    }

    let net = MultiplexNetwork::new(layers, false)?;
    let truth = SimTruth {
        v,
        us,
        sig_common: sig1,
        sig_individual: vec![sig2; m],
        f,
        gs,
        family: EdgeFamily::BernoulliLogistic,
        sigma: None,
        beta: Some(beta),
        rho: None,
        seed,
    };
    Ok((net, truth))
}

/// Gaussian-edge networks whose layer latents share structure with the
/// common ones: `U_k = ρ·V·O_k + √(1−ρ²)·Z_k` with `O_k` a Haar rotation.
/// Requires `d1 = d2` (the product `V·O_k` is undefined otherwise).
/// At `ρ = 0` the output is bit-for-bit that of [`gen_gaussian`].
pub fn gen_correlated(
    n: usize,
    m: usize,
    d1: usize,
    d2: usize,
    sigma: f64,
    rho: f64,
    seed: u64,
) -> Result<(MultiplexNetwork, SimTruth)> {
    check_shape(n, m)?;
    if !(sigma >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise level must be nonnegative, got {sigma}"
        )));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!(
            "correlation must lie in [0, 1], got {rho}"
        )));
    }
    if d1 != d2 {
        return Err(Error::InvalidInput(format!(
            "correlated latents need equal dimensions, got d1={d1}, d2={d2}"
        )));
    }
    gen_gaussian_inner(n, m, d1, d2, sigma, Some(rho), seed)
}

/// Which triples a holdout may touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HoldoutMode {
    /// Every observed off-diagonal triple in every layer is eligible.
    AllLayers,
    /// Only one layer's observed off-diagonal triples are eligible;
    /// `nonzero_only` restricts further to entries with nonzero values.
    SingleLayer { layer: usize, nonzero_only: bool },
}

/// Randomly hides a fraction of eligible triples, symmetrically, returning
/// the masked network and the held-out index list (each pair listed once,
/// as `(layer, i, j)` with `i < j`).
pub fn hold_out(
    net: &MultiplexNetwork,
    frac: f64,
    mode: HoldoutMode,
    seed: u64,
) -> Result<(MultiplexNetwork, Vec<HeldOutTriple>)> {
    if !(0.0..1.0).contains(&frac) {
        return Err(Error::InvalidInput(format!(
            "holdout fraction must lie in [0, 1), got {frac}"
        )));
    }
    if let HoldoutMode::SingleLayer { layer, .. } = mode {
        if layer >= net.m() {
            return Err(Error::InvalidInput(format!(
                "layer index {layer} out of range for m={}",
                net.m()
            )));
        }
    }
    let n = net.n();
    let mut mask = net.mask().clone();
    let mut held = Vec::new();
    let mut rng = stream_rng(seed, 0);
    for k in 0..net.m() {
        let (eligible_layer, nonzero_only) = match mode {
            HoldoutMode::AllLayers => (true, false),
            HoldoutMode::SingleLayer { layer, nonzero_only } => (k == layer, nonzero_only),
        };
        if !eligible_layer {
            continue;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if !net.mask().is_observed(k, i, j) {
                    continue;
                }
                if nonzero_only && net.layer(k)[(i, j)] == 0.0 {
                    continue;
                }
                if rng.gen_bool(frac) {
                    mask.hide(k, i, j);
                    held.push((k, i, j));
                }
            }
        }
        if mask_offdiag_empty(&mask, k, n) {
            return Err(Error::HoldoutTooLarge(format!(
                "layer {k} has no observed off-diagonal entries left"
            )));
        }
    }
    let train = net.with_replaced_mask(mask)?;
    Ok((train, held))
}

fn mask_offdiag_empty(mask: &crate::model::ObservationMask, k: usize, n: usize) -> bool {
    for i in 0..n {
        for j in (i + 1)..n {
            if mask.is_observed(k, i, j) {
                return false;
            }
        }
    }
    true
}
