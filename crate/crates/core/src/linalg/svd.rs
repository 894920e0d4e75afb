//! Thin singular value decomposition by one-sided (Hestenes) Jacobi rotations.
//!
//! The input is orthogonalized column by column until every pair of columns
//! is orthogonal to working precision. Column norms are then the singular
//! values, the normalized columns the left singular vectors, and the
//! accumulated rotations the right singular vectors. Wide inputs are handled
//! through their transpose.

use super::matrix::{dot, norm, Matrix};
use crate::error::{Error, Result};

/// Relative orthogonality threshold for a column pair.
const ORTHO_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 80;
/// Singular values below `max(K, L) · s₁ · RANK_TOL` are treated as zero.
const RANK_TOL: f64 = 1e-12;

/// `x = u · diag(s) · vᵀ` with `rank` retained triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactorization {
    /// K×ρ left singular vectors.
    pub u: Matrix,
    /// Non-increasing, strictly positive singular values.
    pub s: Vec<f64>,
    /// L×ρ right singular vectors.
    pub v: Matrix,
}

impl SvdFactorization {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Shape of the factorized matrix.
    pub fn source_shape(&self) -> (usize, usize) {
        (self.u.rows(), self.v.rows())
    }

    pub fn left_vector(&self, i: usize) -> Vec<f64> {
        self.u.column(i)
    }

    pub fn right_vector(&self, i: usize) -> Vec<f64> {
        self.v.column(i)
    }
}

/// Thin SVD with numerical-rank truncation and canonical signs.
pub fn svd(x: &Matrix) -> Result<SvdFactorization> {
    if x.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if let Some(i) = x.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: i / x.cols(),
            col: i % x.cols(),
        });
    }
    let (k_rows, l_cols) = x.shape();
    let transposed = k_rows < l_cols;
    let a = if transposed { x.transpose() } else { x.clone() };
    let (mut cols, rot) = one_sided_jacobi(&a)?;

    let norms: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let s_max = norms[order[0]];
    let cutoff = k_rows.max(l_cols) as f64 * s_max * RANK_TOL;
    let kept: Vec<usize> = if s_max > 0.0 {
        order.into_iter().filter(|&i| norms[i] > cutoff).collect()
    } else {
        Vec::new()
    };

    let s: Vec<f64> = kept.iter().map(|&i| norms[i]).collect();
    let left: Vec<Vec<f64>> = kept
        .iter()
        .map(|&i| {
            let c = std::mem::take(&mut cols[i]);
            c.into_iter().map(|v| v / norms[i]).collect()
        })
        .collect();
    let right: Vec<Vec<f64>> = kept.iter().map(|&i| rot[i].clone()).collect();

    let left = columns_or_empty(&left, a.rows())?;
    let right = columns_or_empty(&right, a.cols())?;
    let f = if transposed {
        SvdFactorization {
            u: right,
            s,
            v: left,
        }
    } else {
        SvdFactorization { u: left, s, v: right }
    };
    Ok(canonicalize_signs(f))
}

fn columns_or_empty(cols: &[Vec<f64>], nrows: usize) -> Result<Matrix> {
    if cols.is_empty() {
        Ok(Matrix::zeros(nrows, 0))
    } else {
        Matrix::from_columns(cols)
    }
}

type Columns = Vec<Vec<f64>>;

/// Returns the rotated columns of `a` and the accumulated rotation columns.
fn one_sided_jacobi(a: &Matrix) -> Result<(Columns, Columns)> {
    let n = a.cols();
    let mut cols = a.columns();
    let mut rot: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    // columns below this squared norm are numerical noise
    let negligible = (f64::EPSILON * a.frobenius_norm()).powi(2);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0
                    || alpha.min(beta) <= negligible
                    || gamma.abs() <= ORTHO_TOL * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, p, q, c, s);
                rotate_pair(&mut rot, p, q, c, s);
            }
        }
        if !rotated {
            return Ok((cols, rot));
        }
    }
    Err(Error::Numerical(format!(
        "Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
    )))
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Flip each `(uᵢ, vᵢ)` pair jointly so that `Σⱼ vⱼᵢ > 0`.
///
/// When the sum is zero to rounding, the first non-negligible entry of `vᵢ`
/// is made positive instead. Idempotent, and the product `u·diag(s)·vᵀ` is
/// unchanged.
pub fn canonicalize_signs(mut f: SvdFactorization) -> SvdFactorization {
    for i in 0..f.rank() {
        let v = f.v.column(i);
        let l1: f64 = v.iter().map(|x| x.abs()).sum();
        let tie = 1e-12 * l1.max(f64::MIN_POSITIVE);
        let sum: f64 = v.iter().sum();
        let flip = if sum.abs() > tie {
            sum < 0.0
        } else {
            v.iter().find(|x| x.abs() > tie).is_some_and(|&x| x < 0.0)
        };
        if flip {
            for r in 0..f.v.rows() {
                f.v[(r, i)] = -f.v[(r, i)];
            }
            for r in 0..f.u.rows() {
                f.u[(r, i)] = -f.u[(r, i)];
            }
        }
    }
    f
}

/// Sum of the first `k` rank-one terms `sᵢ uᵢ vᵢᵀ`.
pub fn reconstruct_rank(f: &SvdFactorization, k: usize) -> Result<Matrix> {
    if k == 0 || k > f.rank() {
        return Err(Error::RankOutOfRange {
            requested: k,
            rank: f.rank(),
        });
    }
    let (rows, cols) = f.source_shape();
    let mut out = Matrix::zeros(rows, cols);
    for i in 0..k {
        let si = f.s[i];
        for r in 0..rows {
            let ur = si * f.u[(r, i)];
            if ur == 0.0 {
                continue;
            }
            for c in 0..cols {
                out[(r, c)] += ur * f.v[(c, i)];
            }
        }
    }
    Ok(out)
}

/// Fraction of the total squared norm carried by each singular value.
pub fn explained_share(f: &SvdFactorization) -> Result<Vec<f64>> {
    if f.rank() == 0 {
        return Err(Error::RankOutOfRange {
            requested: 1,
            rank: 0,
        });
    }
    let total: f64 = f.s.iter().map(|s| s * s).sum();
    Ok(f.s.iter().map(|s| s * s / total).collect())
}
