//! End-to-end construction: plan the parameters, draw one small random
//! block subspace, tensor it `k` times, embed each `l2^beta` block into
//! `l1^{n'}` through a second random subspace, and certify the result.
//!
//! Schedule for a target dimension `N`, accuracy `eps` and randomness
//! exponent `gamma`:
//!
//! * `k = ceil(1/gamma)`, `B = ceil(1/eps)`, `beta = B^k`;
//! * `n'` is the least integer with `beta <= floor(c1 eps^2 n')`, so a random
//!   `beta`-dimensional subspace of `l1^{n'}` is admissible;
//! * `n` is the largest integer with `n^k n' <= N`; the unused coordinates
//!   are zero padding;
//! * `m = floor(c2 eps^2 (1 - 1/B) n B)`.
//!
//! Each tensor factor loses at most `(1 - eps) sqrt(1 - 1/B) >= (1 - eps)^{3/2}`
//! and the embedding one more `(1 - eps)`, which gives the predicted lower
//! ratio `(1 - eps)^{3k/2} (1 - eps)` relative to the scaling
//! `M0 = sqrt(2/pi) sqrt(n' n^k)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::blockspace::{BlockShape, SubspaceBasis};
use crate::distortion::{self, DistortionEstimate, RatioStats};
use crate::dvoretzky::{floor_tol, mean_norm, random_subspace, DEFAULT_C};
use crate::error::{Error, Result};
use crate::linalg;
use crate::randbits::{required_bits, BitStream, GaussianSpec};
use crate::tensor::{tensor_power, DEFAULT_ELEMENT_CAP};

/// Smallest target dimension the planner accepts.
pub const MIN_TARGET: u64 = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub c1: f64,
    pub c2: f64,
    /// Dimension-floor constant; defaults to `c2 / 4`.
    pub c0: Option<f64>,
    pub c_univ: f64,
    pub retries: u32,
    pub element_cap: usize,
    pub samples: usize,
    pub restarts: usize,
    pub iters: usize,
    pub key: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            c1: DEFAULT_C,
            c2: DEFAULT_C,
            c0: None,
            c_univ: 1.0,
            retries: 0,
            element_cap: DEFAULT_ELEMENT_CAP,
            samples: 10_000,
            restarts: 8,
            iters: 200,
            key: 0,
        }
    }
}

impl Config {
    pub fn c0(&self) -> f64 {
        self.c0.unwrap_or(self.c2 / 4.0)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c1", self.c1),
            ("c2", self.c2),
            ("c0", self.c0()),
            ("c_univ", self.c_univ),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Which constraint made a plan infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    /// Fewer than two base blocks fit under the target dimension.
    BaseBlocks,
    /// The base subspace dimension rounds to zero.
    BaseDimension,
    /// The stage bits exceed the randomness budget.
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfeasibilityReport {
    pub binding: Binding,
    pub message: String,
    /// The part of the schedule fixed before the binding constraint.
    pub k: u32,
    #[serde(rename = "B")]
    pub b: usize,
    pub beta: usize,
    pub n_prime: usize,
    pub n: usize,
    /// Smallest `c2` that would make the base dimension positive.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suggested_c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_bits: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_bits: Option<u64>,
}

impl std::fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn infeasible(report: InfeasibilityReport) -> Error {
    Error::Infeasible(Box::new(report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionPlan {
    pub n_target: u64,
    pub eps: f64,
    pub gamma: f64,
    pub k: u32,
    pub n: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub m: usize,
    pub n_prime: usize,
    pub beta: usize,
    pub nu: usize,
    pub n_final: usize,
    /// Bits per discretized Gaussian.
    pub t: u32,
    pub base_bits: u64,
    pub embedding_bits: u64,
    pub predicted_bits: u64,
    pub budget_bits: u64,
    pub predicted_dim: usize,
    pub dimension_floor: u64,
    pub predicted_ratio_lower: f64,
    pub predicted_ratio_upper: f64,
    pub base_scaling: f64,
    pub scaling_m: f64,
    pub config: Config,
}

impl ConstructionPlan {
    pub fn base_shape(&self) -> BlockShape {
        BlockShape::new(self.n, self.b).expect("validated by plan")
    }

    pub fn gaussian_spec(&self) -> GaussianSpec {
        GaussianSpec::new(self.t).expect("clamped by plan")
    }

    /// Lowest normalized ratio the interval bookkeeping predicts on the
    /// final scalar subspace.
    pub fn normalized_floor(&self) -> f64 {
        self.predicted_ratio_lower * (2.0 / PI).sqrt()
    }

    pub fn predicted_interval(&self) -> [f64; 2] {
        [
            self.predicted_ratio_lower * self.base_scaling,
            self.predicted_ratio_upper * self.base_scaling,
        ]
    }
}

/// `ceil(x)` that tolerates `x` landing a few ulps above an integer.
fn ceil_tol(x: f64) -> f64 {
    (x - 1e-9 * x.abs().max(1.0)).ceil()
}

fn checked_pow(base: usize, k: u32) -> Option<usize> {
    base.checked_pow(k)
}

/// Derives every construction parameter for target dimension `n_target`.
pub fn plan(n_target: u64, eps: f64, gamma: f64, config: &Config) -> Result<ConstructionPlan> {
    if n_target < MIN_TARGET {
        return Err(Error::domain(format!(
            "target dimension must be >= {MIN_TARGET}, got {n_target}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain(format!(
            "gamma must lie in (0, 1], got {gamma}"
        )));
    }
    config.validate()?;
    let (c1, c2) = (config.c1, config.c2);
    let eps2 = eps * eps;

    let k = ceil_tol(1.0 / gamma) as u32;
    let b = ceil_tol(1.0 / eps) as usize;
    let beta = checked_pow(b, k).ok_or_else(|| Error::domain("B^k overflows"))?;

    let embeds = |np: usize| floor_tol(c1 * eps2 * np as f64) >= beta as f64;
    let mut n_prime = (ceil_tol(beta as f64 / (c1 * eps2)) as usize)
        .max(beta)
        .max(2);
    while n_prime > beta.max(2) && embeds(n_prime - 1) {
        n_prime -= 1;
    }
    while !embeds(n_prime) {
        n_prime += 1;
    }

    let n_target_usize = usize::try_from(n_target).map_err(|_| Error::domain("N exceeds usize"))?;
    let fits = |n: usize| {
        checked_pow(n, k)
            .and_then(|p| p.checked_mul(n_prime))
            .is_some_and(|total| total <= n_target_usize)
    };
    let mut n = ((n_target as f64 / n_prime as f64).powf(1.0 / k as f64)).floor() as usize;
    while n > 0 && !fits(n) {
        n -= 1;
    }
    while fits(n + 1) {
        n += 1;
    }
    if n < 2 {
        return Err(infeasible(InfeasibilityReport {
            binding: Binding::BaseBlocks,
            message: format!(
                "only n = {n} base blocks fit: n^{k} * n' must stay <= N = {n_target} with n' = {n_prime}"
            ),
            k,
            b,
            beta,
            n_prime,
            n,
            suggested_c2: None,
            predicted_bits: None,
            budget_bits: None,
        }));
    }

    let m_raw = if b >= 2 {
        c2 * eps2 * (1.0 - 1.0 / b as f64) * (n * b) as f64
    } else {
        c1 * eps2 * n as f64
    };
    let m = (floor_tol(m_raw) as usize).min(n * b);
    if m < 1 {
        let per_c = m_raw / if b >= 2 { c2 } else { c1 };
        return Err(infeasible(InfeasibilityReport {
            binding: Binding::BaseDimension,
            message: format!(
                "base subspace dimension floor({m_raw:.4}) = 0 for n = {n}, B = {b}; c2 too small"
            ),
            k,
            b,
            beta,
            n_prime,
            n,
            suggested_c2: Some(1.0 / per_c),
            predicted_bits: None,
            budget_bits: None,
        }));
    }

    let spec = GaussianSpec::for_params(m, n, b, eps);
    let t = spec.bits();
    let base_bits = (n * b * m) as u64 * t as u64;
    let embedding_bits = (n_prime * beta) as u64 * t as u64;
    let predicted_bits = base_bits + embedding_bits;
    let budget_bits = required_bits(n_target, eps, gamma, config.c_univ)?;
    if predicted_bits > budget_bits {
        return Err(infeasible(InfeasibilityReport {
            binding: Binding::Budget,
            message: format!(
                "construction needs {predicted_bits} bits, budget allows {budget_bits}"
            ),
            k,
            b,
            beta,
            n_prime,
            n,
            suggested_c2: None,
            predicted_bits: Some(predicted_bits),
            budget_bits: Some(budget_bits),
        }));
    }

    let nu = checked_pow(n, k).expect("bounded by N");
    let predicted_dim = checked_pow(m, k).ok_or_else(|| Error::domain("m^k overflows"))?;
    let dimension_floor =
        ((config.c0() * eps2).powi(k as i32) * nu as f64 * beta as f64).floor() as u64;
    let lower = (1.0 - eps).powf(1.5 * k as f64) * (1.0 - eps);
    let upper = (1.0 + eps) * (1.0 + 1.0 / (n_prime as f64 - 1.0)).sqrt();
    let base_scaling = (2.0 / PI).sqrt() * ((n_prime * nu) as f64).sqrt();

    Ok(ConstructionPlan {
        n_target,
        eps,
        gamma,
        k,
        n,
        b,
        m,
        n_prime,
        beta,
        nu,
        n_final: nu * n_prime,
        t,
        base_bits,
        embedding_bits,
        predicted_bits,
        budget_bits,
        predicted_dim,
        dimension_floor,
        predicted_ratio_lower: lower,
        predicted_ratio_upper: upper,
        base_scaling,
        scaling_m: base_scaling * (lower + upper) / 2.0,
        config: config.clone(),
    })
}

/// A block subspace flattened into a scalar `l1` space.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEmbedding {
    pub basis: SubspaceBasis,
    /// The scaling `M_G` of the block map `v -> G v`.
    pub scaling_m: f64,
    /// `G` is the identity, so the block map is a coordinate inclusion and
    /// carries no distortion certificate of its own.
    pub identity: bool,
}

/// Replaces every `beta`-wide block value `v` of `f` by `G v`, giving a
/// subspace of `l1^{nu n'}`. `G` is orthonormal, so Euclidean norms are
/// preserved exactly.
pub fn embed_blocks(
    f: &SubspaceBasis,
    g: &SubspaceBasis,
    scaling_m: f64,
) -> Result<BlockEmbedding> {
    let beta = f.shape().width();
    if g.shape().width() != 1 {
        return Err(Error::Unsupported(
            "the block embedding must map into a scalar l1 space".into(),
        ));
    }
    if g.dim() != beta {
        return Err(Error::Shape {
            expected: beta,
            actual: g.dim(),
        });
    }
    let nu = f.shape().blocks();
    let n_prime = g.rows();
    let rows = nu * n_prime;
    let mut q = vec![0.0; rows * f.dim()];
    q.par_chunks_mut(rows)
        .zip(f.matrix().par_chunks(f.rows()))
        .for_each(|(out, col)| {
            for (dst, v) in out.chunks_exact_mut(n_prime).zip(col.chunks_exact(beta)) {
                dst.copy_from_slice(&linalg::mat_vec(g.matrix(), n_prime, v));
            }
        });
    let identity = n_prime == beta && *g == SubspaceBasis::identity(g.shape());
    Ok(BlockEmbedding {
        basis: SubspaceBasis::from_parts(BlockShape::scalar(rows)?, f.dim(), q)?,
        scaling_m,
        identity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    /// Scalar coordinates actually used (before zero padding).
    pub n_final: usize,
    /// Predicted `[lower, upper]` for `|x|_1 / |x|_2` on the subspace.
    pub predicted_interval: [f64; 2],
    /// The same interval divided by `sqrt(n_final)`.
    pub predicted_ratio_interval: [f64; 2],
    pub embedding_scaling: f64,
    /// Empirical median of `|x|_1 / |x|_2`.
    pub empirical_m: f64,
    pub sampled: RatioStats,
    pub witness: DistortionEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionResult {
    pub plan: ConstructionPlan,
    /// The subspace of `l1^{n_final}`; see [`ConstructionResult::padded_basis`].
    pub basis: SubspaceBasis,
    pub scaling_m: f64,
    pub bits_consumed: u64,
    pub attempts: u32,
    pub certificate: Certificate,
}

impl ConstructionResult {
    /// The basis zero-padded to the target dimension `N`.
    pub fn padded_basis(&self) -> Result<SubspaceBasis> {
        self.basis.zero_padded(self.plan.n_target as usize)
    }
}

struct Attempt {
    basis: SubspaceBasis,
    certificate: Certificate,
}

fn attempt(plan: &ConstructionPlan, stream: &mut BitStream) -> Result<Attempt> {
    let cfg = &plan.config;
    let spec = plan.gaussian_spec();
    let base = random_subspace(plan.base_shape(), plan.m, stream, spec)?;
    let f = tensor_power(&base, plan.k as usize, cfg.element_cap)?;
    let g_shape = BlockShape::scalar(plan.n_prime)?;
    let g = random_subspace(g_shape, plan.beta, stream, spec)?;
    let m_g = mean_norm(g_shape).value;
    let embedded = embed_blocks(&f, &g, m_g)?;
    let final_basis = embedded.basis;
    if (final_basis.rows() as u128) * (final_basis.dim() as u128) > cfg.element_cap as u128 {
        return Err(Error::Capacity {
            elements: final_basis.rows() as u128 * final_basis.dim() as u128,
            cap: cfg.element_cap,
        });
    }

    let sampled = distortion::sample_ratios(&final_basis, cfg.samples, cfg.key)?;
    let witness = distortion::minimize_ratio(&final_basis, cfg.restarts, cfg.iters, cfg.key)?;
    let sqrt_n = (plan.n_final as f64).sqrt();
    let interval = plan.predicted_interval();
    let certificate = Certificate {
        n_final: plan.n_final,
        predicted_interval: interval,
        predicted_ratio_interval: [interval[0] / sqrt_n, (interval[1] / sqrt_n).min(1.0)],
        embedding_scaling: m_g,
        empirical_m: sampled.p50 * sqrt_n,
        sampled,
        witness,
    };
    Ok(Attempt {
        basis: final_basis,
        certificate,
    })
}

/// Runs the full construction on the budgeted `stream`.
///
/// Stage order is fixed (base subspace, then embedding subspace), so bit
/// accounting is canonical: every attempt consumes exactly
/// `plan.predicted_bits`. With `config.retries > 0`, an attempt whose
/// sampled 1st-percentile ratio falls below the predicted normalized floor
/// is redrawn from fresh bits while retries and bits last.
pub fn construct(
    n_target: u64,
    eps: f64,
    gamma: f64,
    stream: &mut BitStream,
    config: &Config,
) -> Result<ConstructionResult> {
    let plan = plan(n_target, eps, gamma, config)?;
    stream.ensure(plan.predicted_bits, "construction")?;
    let start = stream.consumed();
    let mut attempts = 1;
    let mut current = attempt(&plan, stream)?;
    while attempts <= config.retries
        && current.certificate.sampled.p01 < plan.normalized_floor()
        && stream.remaining() >= plan.predicted_bits
    {
        current = attempt(&plan, stream)?;
        attempts += 1;
    }
    Ok(ConstructionResult {
        scaling_m: plan.scaling_m,
        bits_consumed: stream.consumed() - start,
        attempts,
        basis: current.basis,
        certificate: current.certificate,
        plan,
    })
}
