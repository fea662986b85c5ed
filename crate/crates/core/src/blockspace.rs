//! Vectors and norms on block spaces `l1^n(l2^B)`.
//!
//! A vector of a shape `(n, B)` has `n * B` coordinates laid out block-major:
//! block `i` occupies `[i * B, (i + 1) * B)`. The block norm is the sum of the
//! Euclidean norms of the blocks; `B = 1` is the plain `l1` norm.
//!
//! Ratios are reported in the normalized-measure convention, so for every
//! nonzero vector `0 < block_norm / (sqrt(n) * l2) <= 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, KahanSum};

/// Orthonormality tolerance every [`SubspaceBasis`] satisfies.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockShape {
    n: usize,
    #[serde(rename = "B")]
    b: usize,
}

impl BlockShape {
    pub fn new(n: usize, b: usize) -> Result<Self> {
        if n == 0 || b == 0 {
            return Err(Error::domain(format!(
                "block shape needs n >= 1 and B >= 1, got ({n}, {b})"
            )));
        }
        n.checked_mul(b)
            .ok_or_else(|| Error::domain("ambient dimension overflows usize"))?;
        Ok(Self { n, b })
    }

    /// The scalar space `l1^n`.
    pub fn scalar(n: usize) -> Result<Self> {
        Self::new(n, 1)
    }

    /// Number of blocks.
    #[inline]
    pub fn blocks(&self) -> usize {
        self.n
    }

    /// Block width.
    #[inline]
    pub fn width(&self) -> usize {
        self.b
    }

    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.n * self.b
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(Error::Shape {
                expected: self.ambient_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }
}

/// A coordinate vector paired with the shape it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientVector {
    shape: BlockShape,
    coords: Vec<f64>,
}

impl AmbientVector {
    pub fn new(shape: BlockShape, coords: Vec<f64>) -> Result<Self> {
        shape.check(&coords)?;
        Ok(Self { shape, coords })
    }

    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn block(&self, i: usize) -> &[f64] {
        let b = self.shape.width();
        &self.coords[i * b..(i + 1) * b]
    }

    pub fn block_norm(&self) -> f64 {
        block_norm_unchecked(&self.coords, self.shape)
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.coords)
    }

    pub fn normalized_ratio(&self) -> Result<f64> {
        normalized_ratio(&self.coords, self.shape)
    }
}

/// Sum of the Euclidean norms of the blocks of `x`.
pub fn block_norm(x: &[f64], shape: BlockShape) -> Result<f64> {
    shape.check(x)?;
    Ok(block_norm_unchecked(x, shape))
}

pub(crate) fn block_norm_unchecked(x: &[f64], shape: BlockShape) -> f64 {
    if shape.width() == 1 {
        return l1_norm(x);
    }
    x.chunks_exact(shape.width())
        .map(|blk| linalg::sum_squares(blk).sqrt())
        .collect::<KahanSum>()
        .value()
}

/// Plain `l1` norm with compensated summation.
pub fn l1_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).collect::<KahanSum>().value()
}

pub fn l2_norm(x: &[f64]) -> f64 {
    linalg::sum_squares(x).sqrt()
}

/// `block_norm(x) / (sqrt(n) * |x|_2)`, the quantity whose infimum over a
/// subspace is its `Lambda_1` constant.
pub fn normalized_ratio(x: &[f64], shape: BlockShape) -> Result<f64> {
    shape.check(x)?;
    let l2 = l2_norm(x);
    if l2 == 0.0 {
        return Err(Error::domain("normalized ratio of the zero vector"));
    }
    Ok(ratio_unchecked(x, shape, l2))
}

#[inline]
pub(crate) fn ratio_unchecked(x: &[f64], shape: BlockShape, l2: f64) -> f64 {
    // Cauchy-Schwarz bounds the exact value by 1; clamp rounding noise.
    (block_norm_unchecked(x, shape) / ((shape.blocks() as f64).sqrt() * l2)).min(1.0)
}

/// An orthonormal basis of an `m`-dimensional subspace of a block space.
///
/// The matrix has `shape.ambient_dim()` rows and `m` columns and is stored
/// column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    shape: BlockShape,
    m: usize,
    q: Vec<f64>,
}

impl SubspaceBasis {
    /// Wraps a column-major matrix, verifying the orthonormality invariant.
    pub fn new(shape: BlockShape, m: usize, q: Vec<f64>) -> Result<Self> {
        let basis = Self::from_parts(shape, m, q)?;
        let residual = basis.residual();
        if residual.is_nan() || residual > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal { residual });
        }
        Ok(basis)
    }

    /// Orthonormalizes arbitrary spanning columns (modified Gram-Schmidt with
    /// re-orthogonalization, positive leading coordinates).
    pub fn orthonormalized(shape: BlockShape, m: usize, mut q: Vec<f64>) -> Result<Self> {
        Self::check_dims(shape, m, q.len())?;
        linalg::orthonormalize_mgs(&mut q, shape.ambient_dim(), m)?;
        Ok(Self { shape, m, q })
    }

    /// Builds a basis from explicit columns; see [`SubspaceBasis::new`].
    pub fn from_columns(shape: BlockShape, columns: &[Vec<f64>]) -> Result<Self> {
        let mut q = Vec::with_capacity(shape.ambient_dim() * columns.len());
        for c in columns {
            shape.check(c)?;
            q.extend_from_slice(c);
        }
        Self::new(shape, columns.len(), q)
    }

    /// The whole space, spanned by the standard basis.
    pub fn identity(shape: BlockShape) -> Self {
        let d = shape.ambient_dim();
        let mut q = vec![0.0; d * d];
        for j in 0..d {
            q[j * d + j] = 1.0;
        }
        Self { shape, m: d, q }
    }

    fn check_dims(shape: BlockShape, m: usize, len: usize) -> Result<()> {
        let rows = shape.ambient_dim();
        if m == 0 || m > rows {
            return Err(Error::domain(format!(
                "subspace dimension must satisfy 1 <= m <= {rows}, got {m}"
            )));
        }
        if len != rows * m {
            return Err(Error::Shape {
                expected: rows * m,
                actual: len,
            });
        }
        Ok(())
    }

    pub(crate) fn from_parts(shape: BlockShape, m: usize, q: Vec<f64>) -> Result<Self> {
        Self::check_dims(shape, m, q.len())?;
        Ok(Self { shape, m, q })
    }

    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> usize {
        self.shape.ambient_dim()
    }

    /// Column-major matrix entries.
    pub fn matrix(&self) -> &[f64] {
        &self.q
    }

    pub fn into_matrix(self) -> Vec<f64> {
        self.q
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let r = self.rows();
        &self.q[j * r..(j + 1) * r]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.q.chunks_exact(self.rows())
    }

    /// `Q a`: the subspace element with coefficients `a`.
    pub fn apply(&self, a: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.m {
            return Err(Error::Shape {
                expected: self.m,
                actual: a.len(),
            });
        }
        Ok(linalg::mat_vec(&self.q, self.rows(), a))
    }

    /// `Q^T v`: coordinates of the projection of `v` onto the subspace.
    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.shape.check(v)?;
        Ok(linalg::mat_t_vec(&self.q, self.rows(), v))
    }

    /// Largest entry of `|Q^T Q - I|`.
    pub fn residual(&self) -> f64 {
        linalg::orthonormality_residual(&self.q, self.rows(), self.m)
    }

    /// Reinterprets the same coordinates under another shape of equal
    /// ambient dimension.
    pub fn with_shape(self, shape: BlockShape) -> Result<Self> {
        if shape.ambient_dim() != self.rows() {
            return Err(Error::Shape {
                expected: self.rows(),
                actual: shape.ambient_dim(),
            });
        }
        Ok(Self { shape, ..self })
    }

    /// Appends zero coordinates to reach `total` scalar coordinates. Only
    /// defined for scalar shapes (`B = 1`).
    pub fn zero_padded(&self, total: usize) -> Result<Self> {
        if self.shape.width() != 1 {
            return Err(Error::Unsupported(
                "zero padding of non-scalar block shapes".into(),
            ));
        }
        let rows = self.rows();
        if total < rows {
            return Err(Error::domain(format!(
                "cannot pad {rows} coordinates down to {total}"
            )));
        }
        let mut q = Vec::with_capacity(total * self.m);
        for col in self.columns() {
            q.extend_from_slice(col);
            q.resize(q.len() + (total - rows), 0.0);
        }
        Ok(Self {
            shape: BlockShape::scalar(total)?,
            m: self.m,
            q,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shape(n: usize, b: usize) -> BlockShape {
        BlockShape::new(n, b).unwrap()
    }

    #[test]
    fn shape_validation() {
        assert!(BlockShape::new(0, 1).is_err());
        assert!(BlockShape::new(1, 0).is_err());
        assert_eq!(shape(3, 4).ambient_dim(), 12);
    }

    #[test]
    fn block_norm_examples() {
        assert_eq!(block_norm(&[3.0, 4.0], shape(1, 2)).unwrap(), 5.0);
        assert_eq!(block_norm(&[1.0; 4], shape(4, 1)).unwrap(), 4.0);
        let v = block_norm(&[1.0; 4], shape(2, 2)).unwrap();
        assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!((v - 2.828427).abs() < 1e-6);
    }

    #[test]
    fn block_norm_rejects_mismatch() {
        let err = block_norm(&[1.0; 3], shape(2, 2)).unwrap_err();
        assert!(matches!(
            err,
            Error::Shape {
                expected: 4,
                actual: 3
            }
        ));
    }

    #[test]
    fn l2_examples() {
        assert_eq!(l2_norm(&[0.0; 3]), 0.0);
        assert_eq!(l2_norm(&[3.0, 4.0]), 5.0);
        assert_eq!(l2_norm(&[1.0; 4]), 2.0);
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(
            normalized_ratio(&[1.0, 0.0, 0.0, 0.0], shape(4, 1)).unwrap(),
            0.5
        );
        assert_eq!(normalized_ratio(&[1.0; 4], shape(2, 2)).unwrap(), 1.0);
        let r = normalized_ratio(&[1.0, 1.0, 0.0, 0.0], shape(4, 1)).unwrap();
        assert!((r - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ratio_of_zero_is_domain_error() {
        assert!(matches!(
            normalized_ratio(&[0.0; 4], shape(2, 2)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ambient_vector_pairs_shape() {
        assert!(AmbientVector::new(shape(2, 2), vec![1.0; 3]).is_err());
        let v = AmbientVector::new(shape(2, 2), vec![3.0, 4.0, 0.0, 0.0]).unwrap();
        assert_eq!(v.block(0), &[3.0, 4.0]);
        assert_eq!(v.block_norm(), 5.0);
        assert_eq!(v.normalized_ratio().unwrap(), 5.0 / (2f64.sqrt() * 5.0));
    }

    #[test]
    fn basis_invariants() {
        let s = shape(2, 1);
        assert!(SubspaceBasis::new(s, 1, vec![1.0, 1.0]).is_err());
        assert!(SubspaceBasis::new(s, 3, vec![0.0; 6]).is_err());
        let b = SubspaceBasis::orthonormalized(s, 1, vec![-2.0, 0.0]).unwrap();
        assert_eq!(b.column(0), &[1.0, 0.0]);
        let full = SubspaceBasis::identity(shape(2, 2));
        assert_eq!(full.dim(), 4);
        assert_eq!(full.residual(), 0.0);
    }

    #[test]
    fn zero_padding_keeps_norms() {
        let b = SubspaceBasis::orthonormalized(shape(3, 1), 2, vec![1.0, 2.0, 3.0, -1.0, 0.5, 2.0])
            .unwrap();
        let p = b.zero_padded(5).unwrap();
        assert_eq!(p.rows(), 5);
        let a = [0.3, -0.7];
        let x = b.apply(&a).unwrap();
        let y = p.apply(&a).unwrap();
        assert_eq!(l1_norm(&x), l1_norm(&y));
        assert_eq!(l2_norm(&x), l2_norm(&y));
        assert_eq!(&y[3..], &[0.0, 0.0]);
    }

    fn vec_and_shape() -> impl Strategy<Value = (BlockShape, Vec<f64>)> {
        (
            prop::sample::select(vec![1usize, 2, 4, 8]),
            prop::sample::select(vec![1usize, 2, 4, 8]),
        )
            .prop_flat_map(|(n, b)| {
                (
                    Just(shape(n, b)),
                    prop::collection::vec(-1e3f64..1e3, n * b),
                )
            })
            .prop_filter("nonzero", |(_, x)| x.iter().any(|v| *v != 0.0))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn ratio_in_unit_interval((s, x) in vec_and_shape()) {
            let r = normalized_ratio(&x, s).unwrap();
            prop_assert!(r > 0.0 && r <= 1.0);
        }

        #[test]
        fn ratio_scale_invariant((s, x) in vec_and_shape()) {
            let r = normalized_ratio(&x, s).unwrap();
            for lambda in [-2.0, 0.5] {
                let y: Vec<f64> = x.iter().map(|v| v * lambda).collect();
                prop_assert_eq!(normalized_ratio(&y, s).unwrap(), r);
            }
            let y: Vec<f64> = x.iter().map(|v| v * 1e6).collect();
            prop_assert!((normalized_ratio(&y, s).unwrap() - r).abs() <= 4.0 * f64::EPSILON);
        }

        #[test]
        fn block_norm_below_cauchy_schwarz((s, x) in vec_and_shape()) {
            let bn = block_norm(&x, s).unwrap();
            prop_assert!(bn <= (s.blocks() as f64).sqrt() * l2_norm(&x) * (1.0 + 1e-14));
        }

        #[test]
        fn scalar_block_norm_is_l1(x in prop::collection::vec(-1e6f64..1e6, 1..64)) {
            let s = BlockShape::scalar(x.len()).unwrap();
            prop_assert_eq!(block_norm(&x, s).unwrap(), l1_norm(&x));
        }

        #[test]
        fn equal_blocks_attain_cauchy_schwarz(
            blk in prop::collection::vec(-10f64..10.0, 1..6).prop_filter("nonzero", |b| b.iter().any(|v| v.abs() > 1e-3)),
            n in 1usize..9,
            signs in prop::collection::vec(any::<bool>(), 9),
        ) {
            // Blocks that are +-copies of each other all share one l2 norm.
            let s = shape(n, blk.len());
            let mut x = Vec::new();
            for sign in signs.iter().take(n) {
                x.extend(blk.iter().map(|v| if *sign { *v } else { -*v }));
            }
            prop_assert!((normalized_ratio(&x, s).unwrap() - 1.0).abs() < 1e-14);
        }
    }
}
