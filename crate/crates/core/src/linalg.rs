//! Small dense kernels shared by the subspace modules.
//!
//! Matrices are stored column-major in a flat `Vec<f64>`; column `j` of a
//! `rows x cols` matrix occupies `data[j * rows..(j + 1) * rows]`.

use crate::error::{Error, Result};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

#[inline]
pub fn sum_squares(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).collect::<KahanSum>().value()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y = Q a` for a column-major `rows x a.len()` matrix.
pub fn mat_vec(q: &[f64], rows: usize, a: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; rows];
    for (col, &coef) in q.chunks_exact(rows).zip(a) {
        if coef == 0.0 {
            continue;
        }
        for (yi, qi) in y.iter_mut().zip(col) {
            *yi += coef * qi;
        }
    }
    y
}

/// `Q^T v` for a column-major matrix with `rows = v.len()`.
pub fn mat_t_vec(q: &[f64], rows: usize, v: &[f64]) -> Vec<f64> {
    q.chunks_exact(rows).map(|col| dot(col, v)).collect()
}

/// Largest entry of `|Q^T Q - I|`.
pub fn orthonormality_residual(q: &[f64], rows: usize, cols: usize) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..cols {
        let cj = &q[j * rows..(j + 1) * rows];
        for k in j..cols {
            let ck = &q[k * rows..(k + 1) * rows];
            let target = if j == k { 1.0 } else { 0.0 };
            worst = worst.max((dot(cj, ck) - target).abs());
        }
    }
    worst
}

/// Modified Gram-Schmidt with one full re-orthogonalization pass, in place.
///
/// Each output column is sign-normalized so that its first nonzero
/// coordinate is positive. A column whose residual norm falls below
/// `1e-12` times its original norm is reported as degenerate.
pub fn orthonormalize_mgs(data: &mut [f64], rows: usize, cols: usize) -> Result<()> {
    assert_eq!(data.len(), rows * cols);
    for j in 0..cols {
        let (done, rest) = data.split_at_mut(j * rows);
        let v = &mut rest[..rows];
        let original = sum_squares(v).sqrt();
        for _pass in 0..2 {
            for i in 0..j {
                let qi = &done[i * rows..(i + 1) * rows];
                let r = dot(qi, v);
                for (vk, qk) in v.iter_mut().zip(qi) {
                    *vk -= r * qk;
                }
            }
        }
        let norm = sum_squares(v).sqrt();
        if !norm.is_finite() || norm <= 1e-12 * original {
            return Err(Error::DegenerateRandomness { column: j });
        }
        let lead = v.iter().copied().find(|x| *x != 0.0).unwrap_or(1.0);
        let scale = if lead < 0.0 { -1.0 / norm } else { 1.0 / norm };
        for vk in v.iter_mut() {
            *vk *= scale;
        }
    }
    Ok(())
}
