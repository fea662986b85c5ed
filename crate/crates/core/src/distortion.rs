//! Estimating and certifying `Lambda_1(E)`, the infimum of the normalized
//! ratio over the unit sphere of a subspace.
//!
//! Three estimators, all upper bounds on `Lambda_1` because each reports a
//! ratio actually attained by some subspace element:
//!
//! * [`sample_ratios`]: uniform points of the subspace sphere;
//! * [`minimize_ratio`]: projected subgradient descent from sampled starts;
//! * [`grid_oracle`]: a `delta`-net of the coefficient sphere for `m <= 3`.
//!
//! The grid oracle is also a lower bound up to `delta`: on the unit sphere
//! `a -> block_norm(Q a) / sqrt(n)` is 1-Lipschitz because
//! `block_norm(Q v) <= sqrt(n) |v|_2`, so the true minimum is within the
//! covering radius of the best net point.
//!
//! Exploratory randomness comes from [`KeyedNormals`]; sample `i` under key
//! `k` is the same point whichever estimator asks for it.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::blockspace::{self, BlockShape, SubspaceBasis};
use crate::error::{Error, Result};
use crate::keyed::KeyedNormals;
use crate::linalg::{self, KahanSum};

/// Initial step of the subgradient search.
pub const STEP0: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sampled,
    Subgradient,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionEstimate {
    /// Smallest normalized ratio witnessed.
    pub lambda_hat: f64,
    /// Coefficients of the witnessing element in the basis.
    pub witness: Vec<f64>,
    pub method: Method,
    /// Certified: `Lambda_1 in [lambda_hat - bracket_halfwidth, lambda_hat]`
    /// (grid only, zero otherwise).
    pub bracket_halfwidth: f64,
    pub samples_or_iters: u64,
}

impl DistortionEstimate {
    /// Distortion against the trivial upper envelope 1: `1 / lambda_hat`.
    pub fn distortion(&self) -> f64 {
        1.0 / self.lambda_hat
    }

    /// Certified lower end of the bracket.
    pub fn lower(&self) -> f64 {
        self.lambda_hat - self.bracket_halfwidth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioStats {
    pub count: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub p01: f64,
    pub p50: f64,
    pub key: u64,
}

#[inline]
fn ratio_at(basis: &SubspaceBasis, a: &[f64]) -> f64 {
    let x = linalg::mat_vec(basis.matrix(), basis.rows(), a);
    let l2 = blockspace::l2_norm(&x);
    blockspace::ratio_unchecked(&x, basis.shape(), l2)
}

fn normalize(a: &mut [f64]) {
    let norm = blockspace::l2_norm(a);
    for v in a.iter_mut() {
        *v /= norm;
    }
}

/// Coefficients of sample `index`: a uniform point of the unit sphere of `R^m`.
pub fn sample_coefficients(m: usize, key: u64, index: u64) -> Vec<f64> {
    let mut a = KeyedNormals::new(key, index).normals(m);
    normalize(&mut a);
    a
}

/// Normalized ratios of `count` uniform points of the subspace sphere, in
/// sample order.
pub fn sample_ratio_values(basis: &SubspaceBasis, count: usize, key: u64) -> Vec<f64> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| ratio_at(basis, &sample_coefficients(basis.dim(), key, i)))
        .collect()
}

/// Nearest-rank quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn ratio_stats(values: &[f64], key: u64) -> Result<RatioStats> {
    if values.is_empty() {
        return Err(Error::domain("ratio statistics need at least one sample"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().copied().collect::<KahanSum>().value() / values.len() as f64;
    Ok(RatioStats {
        count: values.len() as u64,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        mean: mean.min(sorted[sorted.len() - 1]),
        p01: quantile(&sorted, 0.01),
        p50: quantile(&sorted, 0.5),
        key,
    })
}

/// Summary of the normalized ratio over `count` uniform points of the
/// subspace sphere. Reproducible from `key`; uses no budgeted bits.
pub fn sample_ratios(basis: &SubspaceBasis, count: usize, key: u64) -> Result<RatioStats> {
    if count == 0 {
        return Err(Error::domain("sample count must be >= 1"));
    }
    ratio_stats(&sample_ratio_values(basis, count, key), key)
}

/// Projected subgradient descent on `a -> ratio(Q a)` over the unit sphere,
/// from one start. Returns the best point visited, including the start.
fn descend(basis: &SubspaceBasis, mut a: Vec<f64>, iters: usize) -> (f64, Vec<f64>) {
    normalize(&mut a);
    let shape = basis.shape();
    let rows = basis.rows();
    let width = shape.width();
    let inv_sqrt_n = 1.0 / (shape.blocks() as f64).sqrt();
    let mut best = ratio_at(basis, &a);
    let mut best_a = a.clone();
    let mut s = vec![0.0; rows];
    for tau in 0..iters {
        let x = linalg::mat_vec(basis.matrix(), rows, &a);
        for (sb, xb) in s.chunks_exact_mut(width).zip(x.chunks_exact(width)) {
            let nrm = linalg::sum_squares(xb).sqrt();
            if nrm > 0.0 {
                for (si, xi) in sb.iter_mut().zip(xb) {
                    *si = xi / nrm;
                }
            } else {
                sb.fill(0.0);
            }
        }
        let mut g = linalg::mat_t_vec(basis.matrix(), rows, &s);
        for gi in g.iter_mut() {
            *gi *= inv_sqrt_n;
        }
        let radial = linalg::dot(&g, &a);
        let step = STEP0 / ((tau + 1) as f64).sqrt();
        for (ai, gi) in a.iter_mut().zip(&g) {
            *ai -= step * (gi - radial * *ai);
        }
        normalize(&mut a);
        let val = ratio_at(basis, &a);
        if val < best {
            best = val;
            best_a.copy_from_slice(&a);
        }
    }
    (best, best_a)
}

/// Subgradient search from explicit starting coefficients.
pub fn minimize_ratio_from(
    basis: &SubspaceBasis,
    starts: &[Vec<f64>],
    iters: usize,
) -> Result<DistortionEstimate> {
    if starts.is_empty() || iters == 0 {
        return Err(Error::domain(
            "minimize_ratio needs at least one start and one iteration",
        ));
    }
    for s in starts {
        if s.len() != basis.dim() {
            return Err(Error::Shape {
                expected: basis.dim(),
                actual: s.len(),
            });
        }
        if blockspace::l2_norm(s) == 0.0 {
            return Err(Error::domain("starting coefficients must be nonzero"));
        }
    }
    let runs: Vec<(f64, Vec<f64>)> = starts
        .par_iter()
        .map(|s| descend(basis, s.clone(), iters))
        .collect();
    let (lambda_hat, witness) = runs
        .into_iter()
        .reduce(|best, cur| if cur.0 < best.0 { cur } else { best })
        .expect("at least one start");
    Ok(DistortionEstimate {
        lambda_hat,
        witness,
        method: Method::Subgradient,
        bracket_halfwidth: 0.0,
        samples_or_iters: (starts.len() * iters) as u64,
    })
}

/// Heuristic minimization of the normalized ratio over the subspace sphere.
///
/// Restart `r` starts from sample `r` of [`sample_ratios`] under the same
/// key, and each run keeps its running minimum, so with
/// `restarts >= count` the result never exceeds the sampled minimum. Step
/// size `0.2 / sqrt(tau + 1)`; the block subgradient is `Q^T s / sqrt(n)`
/// with `s_i = x_i / |x_i|_2` (zero on vanishing blocks), projected onto
/// the tangent space before renormalizing.
pub fn minimize_ratio(
    basis: &SubspaceBasis,
    restarts: usize,
    iters: usize,
    key: u64,
) -> Result<DistortionEstimate> {
    let starts: Vec<Vec<f64>> = (0..restarts as u64)
        .map(|r| sample_coefficients(basis.dim(), key, r))
        .collect();
    minimize_ratio_from(basis, &starts, iters)
}

/// Net points of one latitude band of the upper unit hemisphere of `R^3`.
struct Band {
    polar: f64,
    azimuths: usize,
}

fn hemisphere_bands(delta: f64) -> Vec<Band> {
    // Band spacing h = delta / sqrt(2). A point is within h/2 in polar
    // angle of its band center and within h / (2 s) in azimuth, where s
    // bounds sin(polar) over the band, so its geodesic distance to the net
    // is at most h < delta.
    let h = delta / 2f64.sqrt();
    let count = (PI / 2.0 / h).ceil() as usize;
    let spacing = PI / 2.0 / count as f64;
    (0..count)
        .map(|i| {
            let polar = (i as f64 + 0.5) * spacing;
            let s = (polar.sin() + h / 2.0).min(1.0);
            Band {
                polar,
                azimuths: ((2.0 * PI * s / h).ceil() as usize).max(1),
            }
        })
        .collect()
}

/// Certified bracket on `Lambda_1` for subspaces of dimension at most 3.
///
/// Every coefficient direction (up to sign, which leaves the ratio
/// unchanged) lies within `delta` of a net point, so
/// `Lambda_1 in [lambda_hat - delta, lambda_hat]`. `m = 1` is exact.
pub fn grid_oracle(basis: &SubspaceBasis, delta: f64) -> Result<DistortionEstimate> {
    if !(delta > 0.0 && delta <= 0.1) {
        return Err(Error::domain(format!(
            "grid resolution must lie in (0, 0.1], got {delta}"
        )));
    }
    let best_of = |points: Vec<(f64, Vec<f64>)>| {
        points
            .into_iter()
            .reduce(|best, cur| if cur.0 < best.0 { cur } else { best })
            .expect("nonempty net")
    };
    match basis.dim() {
        1 => Ok(DistortionEstimate {
            lambda_hat: ratio_at(basis, &[1.0]),
            witness: vec![1.0],
            method: Method::Grid,
            bracket_halfwidth: 0.0,
            samples_or_iters: 1,
        }),
        2 => {
            // Angles j * pi / K on the half circle; chord radius <= pi / (2K) <= delta.
            let k = (PI / (2.0 * delta)).ceil() as usize;
            let points: Vec<(f64, Vec<f64>)> = (0..k)
                .into_par_iter()
                .map(|j| {
                    let theta = j as f64 * PI / k as f64;
                    let a = vec![theta.cos(), theta.sin()];
                    (ratio_at(basis, &a), a)
                })
                .collect();
            let (lambda_hat, witness) = best_of(points);
            Ok(DistortionEstimate {
                lambda_hat,
                witness,
                method: Method::Grid,
                bracket_halfwidth: delta,
                samples_or_iters: k as u64,
            })
        }
        3 => {
            let bands = hemisphere_bands(delta);
            let total: usize = bands.iter().map(|b| b.azimuths).sum();
            let per_band: Vec<(f64, Vec<f64>)> = bands
                .par_iter()
                .map(|band| {
                    let (sp, cp) = band.polar.sin_cos();
                    let mut best = (f64::INFINITY, Vec::new());
                    let mut a = [0.0; 3];
                    for j in 0..band.azimuths {
                        let phi = 2.0 * PI * j as f64 / band.azimuths as f64;
                        let (sa, ca) = phi.sin_cos();
                        a[0] = sp * ca;
                        a[1] = sp * sa;
                        a[2] = cp;
                        let v = ratio_at(basis, &a);
                        if v < best.0 {
                            best = (v, a.to_vec());
                        }
                    }
                    best
                })
                .collect();
            let (lambda_hat, witness) = best_of(per_band);
            Ok(DistortionEstimate {
                lambda_hat,
                witness,
                method: Method::Grid,
                bracket_halfwidth: delta,
                samples_or_iters: total as u64,
            })
        }
        m => Err(Error::Unsupported(format!(
            "grid certification is limited to m <= 3, got m = {m}"
        ))),
    }
}

/// Monte Carlo estimate of the spherical mean of the block norm in
/// dimension `nB`, with its standard error.
pub fn mc_mean_norm(shape: BlockShape, count: usize, key: u64) -> Result<(f64, f64)> {
    if count < 100 {
        return Err(Error::domain(format!(
            "mc_mean_norm needs count >= 100, got {count}"
        )));
    }
    let d = shape.ambient_dim();
    let values: Vec<f64> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let g = KeyedNormals::new(key, i).normals(d);
            // For n = 1 both norms take the same path, so the ratio is exactly 1.
            blockspace::block_norm_unchecked(&g, shape) / blockspace::l2_norm(&g)
        })
        .collect();
    let n = count as f64;
    let mean = values.iter().copied().collect::<KahanSum>().value() / n;
    let var = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .collect::<KahanSum>()
        .value()
        / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
