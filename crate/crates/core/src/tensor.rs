//! Tensor products of block subspaces.
//!
//! For shapes `(n1, B1)` and `(n2, B2)` the product shape is
//! `(n1 n2, B1 B2)`: global block `i = i1 n2 + i2`, in-block offset
//! `b = b1 B2 + b2`. The raw Kronecker coordinate
//! `(i1 B1 + b1) n2 B2 + (i2 B2 + b2)` is moved to `i B + b`, which puts
//! the `B1 x B2` sub-blocks belonging to one pair of blocks next to each
//! other so that the product block norm is the `H (x) K` norm.
//!
//! Product columns are ordered j-major: column `(j, k)` sits at
//! `j * m2 + k`.

use rayon::prelude::*;

use crate::blockspace::{BlockShape, SubspaceBasis};
use crate::error::{Error, Result};

/// Default cap on the number of matrix elements a product may allocate.
pub const DEFAULT_ELEMENT_CAP: usize = 1 << 27;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorLayout {
    pub left: BlockShape,
    pub right: BlockShape,
    pub product: BlockShape,
}

impl TensorLayout {
    pub fn new(left: BlockShape, right: BlockShape) -> Result<Self> {
        let n = left
            .blocks()
            .checked_mul(right.blocks())
            .ok_or_else(|| Error::domain("product block count overflows"))?;
        let b = left
            .width()
            .checked_mul(right.width())
            .ok_or_else(|| Error::domain("product block width overflows"))?;
        Ok(Self {
            left,
            right,
            product: BlockShape::new(n, b)?,
        })
    }

    /// Position in the product layout of the raw Kronecker coordinate `raw`.
    #[inline]
    pub fn product_index(&self, raw: usize) -> usize {
        let d2 = self.right.ambient_dim();
        let (r1, r2) = (raw / d2, raw % d2);
        self.product_index_of(r1, r2)
    }

    /// Position of the pair `(x[r1], y[r2])` in the product layout.
    #[inline]
    pub fn product_index_of(&self, r1: usize, r2: usize) -> usize {
        let (b1w, b2w) = (self.left.width(), self.right.width());
        let (i1, b1) = (r1 / b1w, r1 % b1w);
        let (i2, b2) = (r2 / b2w, r2 % b2w);
        (i1 * self.right.blocks() + i2) * self.product.width() + b1 * b2w + b2
    }

    /// The permutation taking raw Kronecker order to product order.
    pub fn permutation(&self) -> Vec<usize> {
        (0..self.product.ambient_dim())
            .map(|r| self.product_index(r))
            .collect()
    }

    /// `x (x) y` written in product layout.
    pub fn tensor_vectors(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        check_len(x, self.left.ambient_dim())?;
        check_len(y, self.right.ambient_dim())?;
        let mut out = vec![0.0; self.product.ambient_dim()];
        self.write_product(x, y, &mut out);
        Ok(out)
    }

    fn write_product(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let (b1w, b2w) = (self.left.width(), self.right.width());
        let pw = self.product.width();
        let n2 = self.right.blocks();
        for (i1, xb) in x.chunks_exact(b1w).enumerate() {
            for (i2, yb) in y.chunks_exact(b2w).enumerate() {
                let base = (i1 * n2 + i2) * pw;
                let dst = &mut out[base..base + pw];
                for (b1, xv) in xb.iter().enumerate() {
                    for (b2, yv) in yb.iter().enumerate() {
                        dst[b1 * b2w + b2] = xv * yv;
                    }
                }
            }
        }
    }
}

fn check_len(x: &[f64], expected: usize) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Shape {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

/// Coefficients `t_{jk}` of an element `sum t_jk phi_j (x) psi_k` of a
/// product subspace, stored row-major (`j`-major, matching column order).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    rows: usize,
    cols: usize,
    t: Vec<f64>,
}

impl CoefficientMatrix {
    pub fn new(rows: usize, cols: usize, t: Vec<f64>) -> Result<Self> {
        check_len(&t, rows * cols)?;
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("tensor coefficients must be finite"));
        }
        Ok(Self { rows, cols, t })
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.t[j * self.cols + k]
    }

    /// Coefficient vector for the j-major product basis.
    pub fn as_coefficients(&self) -> &[f64] {
        &self.t
    }

    /// Row `j` combined against the right factor: `sum_k t_jk psi_k`.
    pub fn row_element(&self, right: &SubspaceBasis, j: usize) -> Result<Vec<f64>> {
        right.apply(&self.t[j * self.cols..(j + 1) * self.cols])
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

fn check_capacity(rows: usize, cols: usize, cap: usize) -> Result<()> {
    let elements = rows as u128 * cols as u128;
    if elements > cap as u128 {
        return Err(Error::Capacity { elements, cap });
    }
    Ok(())
}

/// Basis of `E (x) F` from bases of `E` and `F`.
pub fn tensor_bases(a: &SubspaceBasis, b: &SubspaceBasis, cap: usize) -> Result<SubspaceBasis> {
    let layout = TensorLayout::new(a.shape(), b.shape())?;
    let rows = layout.product.ambient_dim();
    let m = a.dim() * b.dim();
    check_capacity(rows, m, cap)?;
    let mut q = vec![0.0; rows * m];
    let m2 = b.dim();
    q.par_chunks_mut(rows).enumerate().for_each(|(col, out)| {
        let (j, k) = (col / m2, col % m2);
        layout.write_product(a.column(j), b.column(k), out);
    });
    SubspaceBasis::from_parts(layout.product, m, q)
}

/// `a (x) a (x) ... (x) a` (`k` factors), associated to the left.
pub fn tensor_power(a: &SubspaceBasis, k: usize, cap: usize) -> Result<SubspaceBasis> {
    if k == 0 {
        return Err(Error::domain("tensor power needs k >= 1"));
    }
    // Check the final size before building any intermediate.
    let mut rows = 1u128;
    let mut cols = 1u128;
    for _ in 0..k {
        rows = rows.saturating_mul(a.rows() as u128);
        cols = cols.saturating_mul(a.dim() as u128);
    }
    let elements = rows.saturating_mul(cols);
    if elements > cap as u128 {
        return Err(Error::Capacity { elements, cap });
    }
    let mut acc = a.clone();
    for _ in 1..k {
        acc = tensor_bases(&acc, a, cap)?;
    }
    Ok(acc)
}

/// `E (x) R^d`: the tensor with the full space of shape `(1, d)`.
pub fn extend_with_full_block(a: &SubspaceBasis, d: usize, cap: usize) -> Result<SubspaceBasis> {
    if d == 0 {
        return Err(Error::domain("full block width must be >= 1"));
    }
    let full = SubspaceBasis::identity(BlockShape::new(1, d)?);
    tensor_bases(a, &full, cap)
}
