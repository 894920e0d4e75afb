//! Ordinary least squares with inference statistics, and covariate-driven
//! prediction of component weights and whole schedules.

pub mod special;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::measures::derive_delta;
use crate::schedule::{reconstruct, AgeSchedule, ComponentBasis};

/// Covariates whose values must lie in `[0, 1]`.
const FRACTIONS: [&str; 4] = ["hiv_prev", "art_cov", "q45_15", "q5_0"];

/// Per-schedule covariates. Cells may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    pub labels: Vec<String>,
    names: Vec<String>,
    /// `columns[j][i]` is covariate `names[j]` for schedule `labels[i]`.
    columns: Vec<Vec<Option<f64>>>,
}

impl CovariateTable {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate schedule label '{dup}'")));
        }
        Ok(CovariateTable {
            labels,
            names: Vec::new(),
            columns: Vec::new(),
        })
    }

    /// Add or replace a named column, validating the value ranges of the
    /// known covariates.
    pub fn insert(&mut self, name: &str, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.labels.len() {
            return Err(Error::shape(
                format!("{} values for column {name}", self.labels.len()),
                format!("{}", values.len()),
            ));
        }
        for (label, v) in self.labels.iter().zip(&values) {
            let Some(v) = *v else { continue };
            let bad = !v.is_finite()
                || (FRACTIONS.contains(&name) && !(0.0..=1.0).contains(&v))
                || (name == "e0" && v <= 0.0);
            if bad {
                return Err(Error::InvalidInput(format!(
                    "covariate {name} = {v} out of range for '{label}'"
                )));
            }
        }
        match self.names.iter().position(|n| n == name) {
            Some(j) => self.columns[j] = values,
            None => {
                self.names.push(name.to_string());
                self.columns.push(values);
            }
        }
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn get(&self, name: &str, label: &str) -> Result<f64> {
        let missing = || Error::MissingCovariate {
            name: name.to_string(),
            label: label.to_string(),
        };
        let j = self.names.iter().position(|n| n == name).ok_or_else(missing)?;
        let i = self.labels.iter().position(|l| l == label).ok_or_else(missing)?;
        self.columns[j][i].ok_or_else(missing)
    }

    /// Values of `name` for the given schedules, in that order.
    pub fn column_for(&self, name: &str, labels: &[String]) -> Result<Vec<f64>> {
        labels.iter().map(|l| self.get(name, l)).collect()
    }

    pub fn raw_column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|j| self.columns[j].as_slice())
    }

    pub fn row(&self, label: &str) -> Result<CovariateRow<'_>> {
        let label = self
            .labels
            .iter()
            .find(|l| *l == label)
            .ok_or_else(|| Error::LabelMismatch(format!("no covariates for '{label}'")))?;
        Ok(CovariateRow { table: self, label })
    }

    /// Add `delta` (fraction) and `delta_pct` (percentage points) from
    /// `hiv_prev` and `art_cov` where both are present.
    pub fn with_delta(mut self) -> Result<Self> {
        let (Some(h), Some(a)) = (self.raw_column("hiv_prev"), self.raw_column("art_cov")) else {
            return Ok(self);
        };
        let delta = h
            .iter()
            .zip(a)
            .map(|(h, a)| match (h, a) {
                (Some(h), Some(a)) => derive_delta(*h, *a).map(Some),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        let pct = delta.iter().map(|d| d.map(|d| d * 100.0)).collect();
        self.insert("delta", delta)?;
        self.insert("delta_pct", pct)?;
        Ok(self)
    }
}

/// The covariates of a single schedule.
#[derive(Debug, Clone, Copy)]
pub struct CovariateRow<'a> {
    table: &'a CovariateTable,
    label: &'a str,
}

impl<'a> CovariateRow<'a> {
    pub fn label(&self) -> &str {
        self.label
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.table.get(name, self.label)
    }
}

/// A fitted linear model. When `intercept` is set the first coefficient is
/// the intercept and the rest follow `predictors`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    #[serde(default)]
    pub response: String,
    pub predictors: Vec<String>,
    pub intercept: bool,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub n: usize,
    #[serde(default)]
    pub residuals: Vec<f64>,
}

impl LinearModel {
    pub fn intercept_value(&self) -> f64 {
        if self.intercept {
            self.coefficients[0]
        } else {
            0.0
        }
    }

    /// Slope coefficients, in predictor order.
    pub fn slopes(&self) -> &[f64] {
        &self.coefficients[usize::from(self.intercept)..]
    }

    /// Evaluate at one covariate row.
    pub fn predict(&self, row: CovariateRow<'_>) -> Result<f64> {
        let mut y = self.intercept_value();
        for (name, b) in self.predictors.iter().zip(self.slopes()) {
            y += b * row.get(name)?;
        }
        Ok(y)
    }

    /// Evaluate at explicit predictor values.
    pub fn predict_values(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.predictors.len() {
            return Err(Error::shape(
                format!("{} predictor values", self.predictors.len()),
                format!("{}", x.len()),
            ));
        }
        Ok(self.intercept_value() + dot(self.slopes(), x))
    }
}

/// Householder QR of a tall matrix, stored compactly.
struct Qr {
    /// R in the upper triangle, reflectors below.
    a: Matrix,
    betas: Vec<f64>,
}

fn householder_qr(x: &Matrix) -> Qr {
    let (n, p) = x.shape();
    let mut a = x.clone();
    let mut betas = vec![0.0; p];
    for j in 0..p {
        let norm: f64 = (j..n).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[(j, j)] > 0.0 { -norm } else { norm };
        let v0 = a[(j, j)] - alpha;
        // v = (1, a[j+1..]/v0), beta = -v0/alpha
        for i in (j + 1)..n {
            a[(i, j)] /= v0;
        }
        let beta = -v0 / alpha;
        betas[j] = beta;
        a[(j, j)] = alpha;
        for c in (j + 1)..p {
            let mut s = a[(j, c)];
            for i in (j + 1)..n {
                s += a[(i, j)] * a[(i, c)];
            }
            s *= beta;
            a[(j, c)] -= s;
            for i in (j + 1)..n {
                let vij = a[(i, j)];
                a[(i, c)] -= s * vij;
            }
        }
    }
    Qr { a, betas }
}

impl Qr {
    fn check_rank(&self) -> Result<()> {
        let p = self.a.cols();
        let diag: Vec<f64> = (0..p).map(|j| self.a[(j, j)].abs()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let tol = max * 1e-12 * self.a.rows().max(p) as f64;
        if max == 0.0 || diag.iter().any(|&d| d <= tol) {
            return Err(Error::RankDeficient);
        }
        Ok(())
    }

    /// `Qᵀ y`.
    fn qt_mul(&self, y: &[f64]) -> Vec<f64> {
        let p = self.a.cols();
        let mut z = y.to_vec();
        for j in 0..p {
            let mut s = z[j];
            for (i, zi) in z.iter().enumerate().skip(j + 1) {
                s += self.a[(i, j)] * zi;
            }
            s *= self.betas[j];
            z[j] -= s;
            for (i, zi) in z.iter_mut().enumerate().skip(j + 1) {
                *zi -= s * self.a[(i, j)];
            }
        }
        z
    }

    /// Solve `R b = z[..p]`.
    fn solve_r(&self, z: &[f64]) -> Vec<f64> {
        let p = self.a.cols();
        let mut b = vec![0.0; p];
        for j in (0..p).rev() {
            let mut s = z[j];
            for (c, bc) in b.iter().enumerate().skip(j + 1) {
                s -= self.a[(j, c)] * bc;
            }
            b[j] = s / self.a[(j, j)];
        }
        b
    }

    /// Diagonal of `(RᵀR)⁻¹ = R⁻¹R⁻ᵀ`.
    fn inverse_gram_diag(&self) -> Vec<f64> {
        let p = self.a.cols();
        // columns of R⁻¹
        let mut rinv = Matrix::zeros(p, p);
        for c in 0..p {
            let mut e = vec![0.0; p];
            e[c] = 1.0;
            let col = self.solve_r(&e);
            for r in 0..p {
                rinv[(r, c)] = col[r];
            }
        }
        (0..p).map(|i| dot(rinv.row(i), rinv.row(i))).collect()
    }
}

/// Least-squares solution of `design · b ≈ y`.
pub fn least_squares(design: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    let (n, p) = design.shape();
    if y.len() != n {
        return Err(Error::shape(format!("{n} responses"), format!("{}", y.len())));
    }
    if n < p {
        return Err(Error::InsufficientData { n, p });
    }
    let qr = householder_qr(design);
    qr.check_rank()?;
    Ok(qr.solve_r(&qr.qt_mul(y)))
}

/// Fit `y` on named predictor columns by OLS.
///
/// Standard errors come from `σ̂²(XᵀX)⁻¹` with `σ̂² = RSS/(n − p)`, and
/// p-values are two-sided from Student's t with `n − p` degrees of freedom.
/// Without an intercept, R² is taken about zero rather than the mean.
pub fn ols_fit(y: &[f64], predictors: &[(&str, &[f64])], intercept: bool) -> Result<LinearModel> {
    let n = y.len();
    let p = predictors.len() + usize::from(intercept);
    if p == 0 {
        return Err(Error::InvalidInput("model has no terms".into()));
    }
    if n <= p {
        return Err(Error::InsufficientData { n, p });
    }
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    if intercept {
        cols.push(vec![1.0; n]);
    }
    for (name, col) in predictors {
        if col.len() != n {
            return Err(Error::shape(
                format!("{n} values for predictor {name}"),
                format!("{}", col.len()),
            ));
        }
        cols.push(col.to_vec());
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    let design = Matrix::from_columns(&cols)?;
    let qr = householder_qr(&design);
    qr.check_rank()?;
    let coefficients = qr.solve_r(&qr.qt_mul(y));

    let residuals: Vec<f64> = (0..n)
        .map(|i| y[i] - dot(design.row(i), &coefficients))
        .collect();
    let rss = dot(&residuals, &residuals);
    let center = if intercept { y.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let tss: f64 = y.iter().map(|v| (v - center) * (v - center)).sum();
    let r_squared = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 1.0 };

    let df = (n - p) as f64;
    let sigma2 = rss / df;
    let standard_errors: Vec<f64> = qr
        .inverse_gram_diag()
        .into_iter()
        .map(|d| (sigma2 * d).sqrt())
        .collect();
    let t_values: Vec<f64> = coefficients
        .iter()
        .zip(&standard_errors)
        .map(|(b, se)| if *se > 0.0 { b / se } else { f64::INFINITY.copysign(*b) })
        .collect();
    let p_values = t_values
        .iter()
        .map(|&t| special::student_t_two_sided(t, df))
        .collect();

    Ok(LinearModel {
        response: String::new(),
        predictors: predictors.iter().map(|(n, _)| n.to_string()).collect(),
        intercept,
        coefficients,
        standard_errors,
        t_values,
        p_values,
        r_squared,
        n,
        residuals,
    })
}

/// Fit `y` on covariates drawn from `table` for the given schedules.
pub fn ols_fit_table(
    y: &[f64],
    labels: &[String],
    table: &CovariateTable,
    predictors: &[&str],
    intercept: bool,
) -> Result<LinearModel> {
    let cols = predictors
        .iter()
        .map(|name| table.column_for(name, labels))
        .collect::<Result<Vec<_>>>()?;
    let named: Vec<(&str, &[f64])> = predictors
        .iter()
        .zip(&cols)
        .map(|(n, c)| (*n, c.as_slice()))
        .collect();
    ols_fit(y, &named, intercept)
}

/// One predicted weight per model.
pub fn predict_weights(models: &[LinearModel], row: CovariateRow<'_>) -> Result<Vec<f64>> {
    models.iter().map(|m| m.predict(row)).collect()
}

/// Predict a whole schedule from covariates through the basis.
pub fn predict_schedule(
    basis: &ComponentBasis,
    models: &[LinearModel],
    row: CovariateRow<'_>,
) -> Result<AgeSchedule> {
    if models.len() != basis.c() {
        return Err(Error::shape(
            format!("{} models (one per component)", basis.c()),
            format!("{}", models.len()),
        ));
    }
    reconstruct(basis, &predict_weights(models, row)?)
}
