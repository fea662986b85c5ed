//! One-step random construction in `l1^n(l2^B)`: the spherical mean of the
//! block norm, the admissible subspace dimension, and random subspaces drawn
//! from the budgeted bit stream.

use std::f64::consts::PI;

use serde::Serialize;

use crate::blockspace::{BlockShape, SubspaceBasis};
use crate::error::{Error, Result};
use crate::linalg;
use crate::randbits::{BitStream, GaussianSpec};
use crate::special::ln_gamma_half_ratio;

/// Default for both universal constants `c1` (scalar case) and `c2` (blocks).
pub const DEFAULT_C: f64 = 0.05;

/// `floor(x)` that tolerates `x` landing a few ulps under an integer.
pub(crate) fn floor_tol(x: f64) -> f64 {
    (x + 1e-9 * x.abs().max(1.0)).floor()
}

/// The mean of the block norm over the unit sphere of `R^{nB}` together
/// with its two-sided estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanNorm {
    pub shape: BlockShape,
    pub value: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// `E|Y| / E|X|` for `Y` standard Gaussian and `X` uniform on the
    /// sphere in dimension `nB`: `sqrt(2) Gamma((nB+1)/2) / Gamma(nB/2)`.
    pub gaussian_factor: f64,
    /// The Lipschitz constant `b = sqrt(n)` of the block norm against `l2`.
    pub lipschitz: f64,
}

/// Closed form of `M(n, B) = E_{x in S^{nB-1}} |x|`:
/// `Gamma((B+1)/2)/Gamma(B/2) * Gamma(nB/2)/Gamma((nB+1)/2) * n`.
///
/// Bounds: for `B = 1`, `sqrt(2/pi) sqrt(n) < M < sqrt(1 + 1/(n-1)) sqrt(2/pi) sqrt(n)`
/// (upper bound `sqrt(n)` when `n = 1`); for `B > 1`,
/// `sqrt(1 - 1/B) sqrt(n) < M <= sqrt(n)`.
pub fn mean_norm(shape: BlockShape) -> MeanNorm {
    let n = shape.blocks() as f64;
    let b = shape.width() as f64;
    let nb = n * b;
    let value = if shape.blocks() == 1 {
        1.0
    } else {
        (ln_gamma_half_ratio(b / 2.0) - ln_gamma_half_ratio(nb / 2.0)).exp() * n
    };
    let sqrt_n = n.sqrt();
    let (lower_bound, upper_bound) = if shape.width() == 1 {
        let base = (2.0 / PI).sqrt() * sqrt_n;
        let upper = if shape.blocks() == 1 {
            sqrt_n
        } else {
            (1.0 + 1.0 / (n - 1.0)).sqrt() * base
        };
        (base, upper)
    } else {
        ((1.0 - 1.0 / b).sqrt() * sqrt_n, sqrt_n)
    };
    MeanNorm {
        shape,
        value,
        lower_bound,
        upper_bound,
        gaussian_factor: 2f64.sqrt() * ln_gamma_half_ratio(nb / 2.0).exp(),
        lipschitz: sqrt_n,
    }
}

/// Parameters of one random step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneStepParams {
    pub shape: BlockShape,
    pub eps: f64,
    pub m: usize,
    pub c1: f64,
    pub c2: f64,
}

impl OneStepParams {
    pub fn new(shape: BlockShape, eps: f64, m: usize, c1: f64, c2: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::domain(format!("eps must lie in (0, 1), got {eps}")));
        }
        if !(c1 > 0.0 && c2 > 0.0) {
            return Err(Error::domain("universal constants must be positive"));
        }
        let cap = max_subspace_dim(shape, eps, c1, c2);
        if m == 0 || m > cap {
            return Err(Error::domain(format!(
                "m = {m} outside the admissible range [1, {cap}] for {shape:?} at eps = {eps}"
            )));
        }
        Ok(Self {
            shape,
            eps,
            m,
            c1,
            c2,
        })
    }
}

/// Largest `m` the concentration threshold admits: `floor(c1 eps^2 n)` for
/// `B = 1`, `floor(c2 eps^2 n B)` otherwise. Zero means infeasible.
pub fn max_subspace_dim(shape: BlockShape, eps: f64, c1: f64, c2: f64) -> usize {
    let raw = if shape.width() == 1 {
        c1 * eps * eps * shape.blocks() as f64
    } else {
        c2 * eps * eps * shape.ambient_dim() as f64
    };
    floor_tol(raw).max(0.0) as usize
}

/// A random `m`-dimensional subspace of `shape`.
///
/// Fills an `nB x m` matrix with discretized Gaussians column by column,
/// then orthonormalizes it (modified Gram-Schmidt with re-orthogonalization,
/// positive leading coordinates). Consumes exactly `nB * m * t` bits; a
/// short stream fails before anything is read.
pub fn random_subspace(
    shape: BlockShape,
    m: usize,
    stream: &mut BitStream,
    spec: GaussianSpec,
) -> Result<SubspaceBasis> {
    let rows = shape.ambient_dim();
    if m == 0 || m > rows {
        return Err(Error::domain(format!(
            "subspace dimension must satisfy 1 <= m <= {rows}, got {m}"
        )));
    }
    let needed = (rows as u64)
        .checked_mul(m as u64)
        .and_then(|e| e.checked_mul(spec.bits() as u64))
        .ok_or_else(|| Error::domain("bit requirement overflows u64"))?;
    stream.ensure(needed, "random subspace")?;
    let mut q = Vec::with_capacity(rows * m);
    for _ in 0..rows * m {
        q.push(stream.next_gaussian(spec)?);
    }
    linalg::orthonormalize_mgs(&mut q, rows, m)?;
    SubspaceBasis::from_parts(shape, m, q)
}
