//! Frozen reference values (regenerate with `tests/data/gen_oracles.py`)
//! and small statistics helpers shared by the integration suites.
#![allow(dead_code, clippy::excessive_precision)]

use l1tensor::{BitStream, BlockShape, GaussianSpec, SubspaceBasis};
use statrs::distribution::{ContinuousCDF, Normal};

/// `(t, k, Phi^{-1}((k + 0.5) / 2^t))`
pub const QUANTILES: &[(u32, u64, f64)] = &[
    (16, 0, -4.3249190408260462572),
    (16, 32768, 0.000019124056051512083651),
    (16, 65535, 4.3249190408260462572),
    (32, 0, -6.3379577545537892525),
    (32, 12345, -4.5354227620904280563),
    (52, 0, -8.2095361516013868556),
];

/// `(u, Phi^{-1}(u))`
pub const PROBIT: &[(f64, f64)] = &[
    (1e-16, -8.2220822161304356127),
    (1e-12, -7.0344838253011319298),
    (1e-10, -6.3613409024040562047),
    (1e-5, -4.2648907939228246285),
    (0.001, -3.0902323061678135415),
    (0.02425, -1.9729610513118848503),
    (0.03, -1.8807936081512509389),
    (0.1, -1.281551565544600467),
    (0.25, -0.6744897501960817432),
    (0.4, -0.2533471031357997988),
    (0.49, -0.025068908258711035762),
    (0.4999, -0.00025066283008803509892),
    (0.5001, 0.00025066283008803509892),
    (0.6, 0.2533471031357997988),
    (0.75, 0.6744897501960817432),
    (0.9, 1.281551565544600467),
    (0.97, 1.8807936081512509389),
    (0.97575, 1.9729610513118848503),
    (0.999, 3.0902323061678135415),
    (0.99999, 4.2648907939228246285),
];

/// `((n, B), M(n, B))`
pub const MEAN_NORM: &[((usize, usize), f64)] = &[
    ((1, 1), 1.0),
    ((1, 7), 1.0),
    ((2, 1), 1.2732395447351626862),
    ((4, 1), 1.6976527263135502482),
    ((8, 2), 2.5460761460761460761),
    ((16, 4), 3.7746578106753112695),
    ((2, 16), 1.4032204910228397237),
    ((3, 5), 1.67578125),
    ((100, 1), 7.9988173434884059835),
    ((1000, 1), 25.237633838999707882),
    ((1000, 1000), 31.614879800699042297),
    ((1000000, 1), 797.88476027403049046),
    ((500000, 2), 626.65722532203687305),
    ((1000, 3), 29.137052802309828197),
];

/// `ceil(max(100, 0.25^-6) * log2(40000))`
pub const REQUIRED_BITS_1E4: u64 = 62619;

pub fn shape(n: usize, b: usize) -> BlockShape {
    BlockShape::new(n, b).unwrap()
}

/// Kolmogorov-Smirnov distance of `data` from the standard normal.
pub fn ks_normal(data: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// `rows x cols` discretized Gaussians in column-major order.
pub fn gaussian_matrix(
    stream: &mut BitStream,
    rows: usize,
    cols: usize,
    spec: GaussianSpec,
) -> Vec<f64> {
    (0..rows * cols)
        .map(|_| stream.next_gaussian(spec).unwrap())
        .collect()
}

/// A random orthonormal basis from keyed test bytes.
pub fn random_basis(shape: BlockShape, m: usize, index: u64) -> SubspaceBasis {
    let spec = GaussianSpec::new(32).unwrap();
    let bytes = l1tensor::randbits::reference_seed_bytes(index, shape.ambient_dim() * m * 4);
    let mut s = BitStream::from_bytes(bytes);
    l1tensor::random_subspace(shape, m, &mut s, spec).unwrap()
}
