//! Explicit-ish almost-Euclidean subspaces of `l1^N` with few random bits.
//!
//! A small Gaussian subspace of the block space `l1^n(l2^B)` is drawn from a
//! caller-supplied bit string, tensored with itself `k` times, and its
//! `l2`-blocks are finally pushed into a scalar `l1` space by one more
//! random subspace. See [`pipeline::construct`].

pub mod blockspace;
pub mod cli;
pub mod distortion;
pub mod dvoretzky;
pub mod error;
pub mod format;
pub mod keyed;
pub mod linalg;
pub mod pipeline;
pub mod randbits;
pub mod special;
pub mod tensor;

pub use blockspace::{block_norm, normalized_ratio, AmbientVector, BlockShape, SubspaceBasis};
pub use distortion::{
    grid_oracle, minimize_ratio, sample_ratios, DistortionEstimate, Method, RatioStats,
};
pub use dvoretzky::{mean_norm, random_subspace, MeanNorm, OneStepParams};
pub use error::{Error, Result};
pub use pipeline::{construct, embed_blocks, plan, Config, ConstructionPlan, ConstructionResult};
pub use randbits::{required_bits, BitStream, GaussianSpec};
pub use tensor::{tensor_bases, tensor_power, TensorLayout};
