//! Dense linear algebra: the matrix type, thin SVD and the preprocessing
//! used to relate the SVD of centered data to principal components.

mod eigen;
mod matrix;
mod svd;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use matrix::Matrix;
pub use svd::{canonicalize_signs, explained_share, reconstruct_rank, svd, SvdFactorization};

pub(crate) use matrix::{dot, norm};

use crate::error::{Error, Result};

/// Subtract each column's mean; with `normalize`, also scale every column to
/// unit Euclidean norm so that `cᵀc` is the correlation matrix.
pub fn center_columns(x: &Matrix, normalize: bool) -> Result<Matrix> {
    let (rows, cols) = x.shape();
    if rows < 2 {
        return Err(Error::InvalidInput(format!(
            "centering needs at least 2 rows, got {rows}"
        )));
    }
    let mut out = x.clone();
    for j in 0..cols {
        let mean = (0..rows).map(|i| x[(i, j)]).sum::<f64>() / rows as f64;
        for i in 0..rows {
            out[(i, j)] -= mean;
        }
        if normalize {
            let n = norm(&out.column(j));
            let spread = (0..rows).map(|i| x[(i, j)].abs()).fold(0.0, f64::max);
            if n <= 1e-14 * spread.max(f64::MIN_POSITIVE) {
                return Err(Error::ZeroVariance(j));
            }
            for i in 0..rows {
                out[(i, j)] /= n;
            }
        }
    }
    Ok(out)
}

/// Centered columns scaled by `1/√(N−1)`, so that `cᵀc` is the sample covariance.
pub fn covariance_form(x: &Matrix) -> Result<Matrix> {
    let c = center_columns(x, false)?;
    let k = 1.0 / ((x.rows() - 1) as f64).sqrt();
    Ok(c.map(|v| v * k))
}

/// Frobenius norm of `a − b`.
pub fn frobenius_residual(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            format!("{:?}", a.shape()),
            format!("{:?}", b.shape()),
        ));
    }
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Pearson correlation of two equal-length samples.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::shape(
            format!("two samples of equal length >= 2 (first has {})", a.len()),
            format!("{}", b.len()),
        ));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::InvalidInput("correlation of a constant sample".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Smallest pairwise Pearson correlation among the columns of `x`.
pub fn min_column_correlation(x: &Matrix) -> Result<f64> {
    let cols = x.columns();
    let mut min = f64::INFINITY;
    for i in 0..cols.len() {
        for j in (i + 1)..cols.len() {
            min = min.min(pearson(&cols[i], &cols[j])?);
        }
    }
    Ok(min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centering() {
        let x = Matrix::from_rows(&[vec![1.0], vec![3.0]]).unwrap();
        let c = center_columns(&x, false).unwrap();
        assert_eq!(c.as_slice(), &[-1.0, 1.0]);
        assert_eq!(center_columns(&c, false).unwrap(), c);

        let n = center_columns(&Matrix::from_rows(&[vec![1.0], vec![2.0], vec![6.0]]).unwrap(), true)
            .unwrap();
        assert!((norm(&n.column(0)) - 1.0).abs() < 1e-14);
        assert!(n.column(0).iter().sum::<f64>().abs() < 1e-14);
    }

    #[test]
    fn centering_errors() {
        let one_row = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(center_columns(&one_row, false).is_err());
        let flat = Matrix::from_rows(&[vec![1.0, 5.0], vec![2.0, 5.0]]).unwrap();
        assert!(matches!(center_columns(&flat, true), Err(Error::ZeroVariance(1))));
        assert!(center_columns(&flat, false).is_ok());
    }

    #[test]
    fn covariance_form_gives_sample_covariance() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0], vec![4.0, 0.0]]).unwrap();
        let g = covariance_form(&x).unwrap().gram();
        // var(1,2,4) = 7/3, cov = -2
        assert!((g[(0, 0)] - 7.0 / 3.0).abs() < 1e-14);
        assert!((g[(0, 1)] + 1.5).abs() < 1e-14);
    }

    #[test]
    fn residuals() {
        let a = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(frobenius_residual(&a, &a).unwrap(), 0.0);
        assert_eq!(frobenius_residual(&a, &Matrix::zeros(1, 2)).unwrap(), 5.0);
        assert!(frobenius_residual(&a, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn correlation() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]).unwrap() - 0.9986).abs() < 1e-3);
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }
}
