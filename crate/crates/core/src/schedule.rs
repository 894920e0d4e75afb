//! Component models of age schedules.
//!
//! A matrix of schedules (one column per schedule, one row per age group) is
//! factorized with the SVD. The scaled left singular vectors `Λᵢ = sᵢuᵢ` are
//! the components, and every schedule is a weighted sum of them. Keeping only
//! the first few components gives a compact model of the schedules and a
//! smoother that removes small, unsystematic variation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, reconstruct_rank, svd, Matrix, SvdFactorization};
use crate::par;

/// Whether values are rates on their natural scale or natural-log rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Natural,
    Log,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Natural => "natural",
            Scale::Log => "log",
        }
    }
}

fn check_scale(expected: Scale, found: Scale) -> Result<()> {
    if expected != found {
        return Err(Error::ScaleMismatch {
            expected: expected.as_str().into(),
            found: found.as_str().into(),
        });
    }
    Ok(())
}

/// One schedule: a value per age group.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeSchedule {
    pub group_labels: Vec<String>,
    pub values: Vec<f64>,
    pub scale: Scale,
}

impl AgeSchedule {
    pub fn new(group_labels: Vec<String>, values: Vec<f64>, scale: Scale) -> Result<Self> {
        if group_labels.len() != values.len() {
            return Err(Error::shape(
                format!("{} values", group_labels.len()),
                format!("{}", values.len()),
            ));
        }
        if values.is_empty() {
            return Err(Error::InvalidInput("schedule has no age groups".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        Ok(AgeSchedule {
            group_labels,
            values,
            scale,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Natural log of a natural-scale schedule; rates must be strictly positive.
    pub fn to_log(&self) -> Result<AgeSchedule> {
        check_scale(Scale::Natural, self.scale)?;
        let values = log_values(&self.values, |i| (i, 0))?;
        Ok(AgeSchedule {
            group_labels: self.group_labels.clone(),
            values,
            scale: Scale::Log,
        })
    }

    /// Back-transform a log schedule to rates.
    pub fn to_natural(&self) -> AgeSchedule {
        match self.scale {
            Scale::Natural => self.clone(),
            Scale::Log => AgeSchedule {
                group_labels: self.group_labels.clone(),
                values: self.values.iter().map(|v| v.exp()).collect(),
                scale: Scale::Natural,
            },
        }
    }
}

fn log_values(values: &[f64], pos: impl Fn(usize) -> (usize, usize)) -> Result<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > 0.0 {
                Ok(v.ln())
            } else {
                let (row, col) = pos(i);
                Err(Error::InvalidInput(format!(
                    "cannot take the log of non-positive rate {v} at row {row}, column {col}"
                )))
            }
        })
        .collect()
}

/// Age groups × schedules, with labels on both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleMatrix {
    pub group_labels: Vec<String>,
    pub schedule_labels: Vec<String>,
    pub data: Matrix,
    pub scale: Scale,
}

impl ScheduleMatrix {
    pub fn new(
        group_labels: Vec<String>,
        schedule_labels: Vec<String>,
        data: Matrix,
        scale: Scale,
    ) -> Result<Self> {
        if data.shape() != (group_labels.len(), schedule_labels.len()) {
            return Err(Error::shape(
                format!("{}x{}", group_labels.len(), schedule_labels.len()),
                format!("{}x{}", data.rows(), data.cols()),
            ));
        }
        Ok(ScheduleMatrix {
            group_labels,
            schedule_labels,
            data,
            scale,
        })
    }

    /// Assemble from schedules sharing one age grid and scale.
    pub fn from_schedules(labels: Vec<String>, schedules: &[AgeSchedule]) -> Result<Self> {
        let first = schedules
            .first()
            .ok_or_else(|| Error::InvalidInput("no schedules".into()))?;
        for s in schedules {
            if s.group_labels != first.group_labels {
                return Err(Error::LabelMismatch("schedules use different age groups".into()));
            }
            check_scale(first.scale, s.scale)?;
        }
        let cols: Vec<Vec<f64>> = schedules.iter().map(|s| s.values.clone()).collect();
        ScheduleMatrix::new(
            first.group_labels.clone(),
            labels,
            Matrix::from_columns(&cols)?,
            first.scale,
        )
    }

    pub fn groups(&self) -> usize {
        self.data.rows()
    }

    pub fn schedules(&self) -> usize {
        self.data.cols()
    }

    pub fn column(&self, h: usize) -> AgeSchedule {
        AgeSchedule {
            group_labels: self.group_labels.clone(),
            values: self.data.column(h),
            scale: self.scale,
        }
    }

    pub fn column_by_label(&self, label: &str) -> Option<AgeSchedule> {
        self.schedule_labels
            .iter()
            .position(|l| l == label)
            .map(|h| self.column(h))
    }

    pub fn to_log(&self) -> Result<ScheduleMatrix> {
        check_scale(Scale::Natural, self.scale)?;
        let cols = self.data.cols();
        let values = log_values(self.data.as_slice(), |i| (i / cols, i % cols))?;
        Ok(ScheduleMatrix {
            group_labels: self.group_labels.clone(),
            schedule_labels: self.schedule_labels.clone(),
            data: Matrix::new(self.data.rows(), cols, values)?,
            scale: Scale::Log,
        })
    }

    pub fn to_natural(&self) -> ScheduleMatrix {
        match self.scale {
            Scale::Natural => self.clone(),
            Scale::Log => ScheduleMatrix {
                data: self.data.map(f64::exp),
                ..self.clone()
            },
        }
    }
}

/// Scaled components `Λᵢ = sᵢuᵢ` taken from the SVD of a schedule matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentBasis {
    pub group_labels: Vec<String>,
    pub components: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub scale: Scale,
    pub source_id: String,
}

impl ComponentBasis {
    /// Number of components.
    pub fn c(&self) -> usize {
        self.components.len()
    }

    pub fn groups(&self) -> usize {
        self.group_labels.len()
    }

    /// The basis restricted to its first `c` components.
    pub fn truncate(&self, c: usize) -> Result<ComponentBasis> {
        if c == 0 || c > self.c() {
            return Err(Error::RankOutOfRange {
                requested: c,
                rank: self.c(),
            });
        }
        Ok(ComponentBasis {
            components: self.components[..c].to_vec(),
            singular_values: self.singular_values[..c].to_vec(),
            ..self.clone()
        })
    }
}

/// Weights for one schedule and the schedule they reproduce.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedSchedule {
    pub betas: Vec<f64>,
    pub predicted: AgeSchedule,
    pub residual_norm: f64,
}

fn check_components(a: &ScheduleMatrix, f: &SvdFactorization, c: usize) -> Result<()> {
    if c == 0 || c > f.rank() {
        return Err(Error::RankOutOfRange {
            requested: c,
            rank: f.rank(),
        });
    }
    debug_assert_eq!(f.source_shape(), a.data.shape());
    Ok(())
}

/// Basis from an already-computed factorization of `a.data`.
pub fn basis_from_svd(
    a: &ScheduleMatrix,
    f: &SvdFactorization,
    c: usize,
    source_id: &str,
) -> Result<ComponentBasis> {
    check_components(a, f, c)?;
    let components = (0..c)
        .map(|i| f.left_vector(i).into_iter().map(|u| u * f.s[i]).collect())
        .collect();
    Ok(ComponentBasis {
        group_labels: a.group_labels.clone(),
        components,
        singular_values: f.s[..c].to_vec(),
        scale: a.scale,
        source_id: source_id.to_string(),
    })
}

/// First `c` canonical components of `a`.
pub fn build_basis(a: &ScheduleMatrix, c: usize) -> Result<ComponentBasis> {
    let f = svd(&a.data)?;
    basis_from_svd(a, &f, c, "")
}

/// SVD weights: row `h` holds `(v_h1, …, v_hc)`, the weights that rebuild
/// schedule `h` from the components.
pub fn svd_weights(a: &ScheduleMatrix, c: usize) -> Result<Matrix> {
    let f = svd(&a.data)?;
    weights_from_svd(a, &f, c)
}

pub fn weights_from_svd(a: &ScheduleMatrix, f: &SvdFactorization, c: usize) -> Result<Matrix> {
    check_components(a, f, c)?;
    let h = f.v.rows();
    let mut w = Matrix::zeros(h, c);
    for r in 0..h {
        for i in 0..c {
            w[(r, i)] = f.v[(r, i)];
        }
    }
    Ok(w)
}

fn check_against_basis(observed: &AgeSchedule, basis: &ComponentBasis) -> Result<()> {
    if observed.len() != basis.groups() {
        return Err(Error::shape(
            format!("{} age groups", basis.groups()),
            format!("{}", observed.len()),
        ));
    }
    check_scale(basis.scale, observed.scale)
}

/// Least-squares weights of `observed` on the basis components (no intercept).
///
/// The components are mutually orthogonal, so each weight is a separate
/// projection `βᵢ = Λᵢ·x / Λᵢ·Λᵢ`.
pub fn fit_weights(observed: &AgeSchedule, basis: &ComponentBasis) -> Result<FittedSchedule> {
    check_against_basis(observed, basis)?;
    let betas: Vec<f64> = basis
        .components
        .iter()
        .map(|lam| dot(lam, &observed.values) / dot(lam, lam))
        .collect();
    finish_fit(observed, basis, betas)
}

/// The same fit solved as a general least-squares problem on the components.
pub fn fit_weights_lstsq(observed: &AgeSchedule, basis: &ComponentBasis) -> Result<FittedSchedule> {
    check_against_basis(observed, basis)?;
    let design = Matrix::from_columns(&basis.components)?;
    let betas = crate::regress::least_squares(&design, &observed.values)?;
    finish_fit(observed, basis, betas)
}

fn finish_fit(
    observed: &AgeSchedule,
    basis: &ComponentBasis,
    betas: Vec<f64>,
) -> Result<FittedSchedule> {
    let predicted = reconstruct(basis, &betas)?;
    let residual_norm = observed
        .values
        .iter()
        .zip(&predicted.values)
        .map(|(o, p)| (o - p) * (o - p))
        .sum::<f64>()
        .sqrt();
    Ok(FittedSchedule {
        betas,
        predicted,
        residual_norm,
    })
}

/// Fit every column of `a` against `basis`.
pub fn fit_matrix(a: &ScheduleMatrix, basis: &ComponentBasis) -> Result<Vec<FittedSchedule>> {
    let cols: Vec<AgeSchedule> = (0..a.schedules()).map(|h| a.column(h)).collect();
    par::try_map(&cols, |s| fit_weights(s, basis))
}

/// `Σ βᵢ Λᵢ`.
pub fn reconstruct(basis: &ComponentBasis, betas: &[f64]) -> Result<AgeSchedule> {
    if betas.len() != basis.c() {
        return Err(Error::shape(
            format!("{} weights", basis.c()),
            format!("{}", betas.len()),
        ));
    }
    let mut values = vec![0.0; basis.groups()];
    for (b, lam) in betas.iter().zip(&basis.components) {
        for (v, l) in values.iter_mut().zip(lam) {
            *v += b * l;
        }
    }
    Ok(AgeSchedule {
        group_labels: basis.group_labels.clone(),
        values,
        scale: basis.scale,
    })
}

/// Rebuild one schedule per weight row.
pub fn reconstruct_all(
    basis: &ComponentBasis,
    weights: &Matrix,
    labels: Vec<String>,
) -> Result<ScheduleMatrix> {
    let rows: Vec<usize> = (0..weights.rows()).collect();
    let schedules = par::try_map(&rows, |&h| reconstruct(basis, weights.row(h)))?;
    ScheduleMatrix::from_schedules(labels, &schedules)
}

/// Replace every schedule by its `c`-component reconstruction.
pub fn smooth_matrix(a: &ScheduleMatrix, c: usize) -> Result<ScheduleMatrix> {
    let f = svd(&a.data)?;
    check_components(a, &f, c)?;
    Ok(ScheduleMatrix {
        data: reconstruct_rank(&f, c)?,
        ..a.clone()
    })
}

/// Absolute-error summary between predicted and observed schedules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub mae: f64,
    /// Quantiles of |error| at probabilities 0.01, 0.25, 0.50, 0.75, 0.99.
    pub quantiles: [f64; 5],
}

pub const SUMMARY_PROBS: [f64; 5] = [0.01, 0.25, 0.50, 0.75, 0.99];

/// Mean absolute error and five quantiles of |predicted − observed|.
pub fn error_metrics(predicted: &ScheduleMatrix, observed: &ScheduleMatrix) -> Result<ErrorSummary> {
    if predicted.data.shape() != observed.data.shape() {
        return Err(Error::shape(
            format!("{:?}", observed.data.shape()),
            format!("{:?}", predicted.data.shape()),
        ));
    }
    check_scale(observed.scale, predicted.scale)?;
    let abs: Vec<f64> = predicted
        .data
        .as_slice()
        .iter()
        .zip(observed.data.as_slice())
        .map(|(p, o)| (p - o).abs())
        .collect();
    summarize_abs_errors(abs)
}

pub(crate) fn summarize_abs_errors(mut abs: Vec<f64>) -> Result<ErrorSummary> {
    if abs.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let mae = abs.iter().sum::<f64>() / abs.len() as f64;
    abs.sort_by(f64::total_cmp);
    Ok(ErrorSummary {
        mae,
        quantiles: SUMMARY_PROBS.map(|p| quantile_sorted(&abs, p)),
    })
}

/// Quantile with linear interpolation between order statistics at `(n−1)p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub const FEMALE_PREFIX: &str = "F_";
pub const MALE_PREFIX: &str = "M_";

/// Stack female rows over male rows for the same schedules.
pub fn concat_sexes(female: &ScheduleMatrix, male: &ScheduleMatrix) -> Result<ScheduleMatrix> {
    if female.schedule_labels != male.schedule_labels {
        return Err(Error::LabelMismatch(format!(
            "female schedules {:?} differ from male schedules {:?}",
            female.schedule_labels, male.schedule_labels
        )));
    }
    if female.group_labels != male.group_labels {
        return Err(Error::LabelMismatch("female and male age groups differ".into()));
    }
    check_scale(female.scale, male.scale)?;
    let labels = female
        .group_labels
        .iter()
        .map(|g| format!("{FEMALE_PREFIX}{g}"))
        .chain(male.group_labels.iter().map(|g| format!("{MALE_PREFIX}{g}")))
        .collect();
    let mut values = female.data.as_slice().to_vec();
    values.extend_from_slice(male.data.as_slice());
    ScheduleMatrix::new(
        labels,
        female.schedule_labels.clone(),
        Matrix::new(female.groups() + male.groups(), female.schedules(), values)?,
        female.scale,
    )
}

/// Inverse of [`concat_sexes`]: rows are split by their `F_`/`M_` prefix.
pub fn split_sexes(a: &ScheduleMatrix) -> Result<(ScheduleMatrix, ScheduleMatrix)> {
    let pick = |prefix: &str| -> Result<ScheduleMatrix> {
        let rows: Vec<usize> = (0..a.groups())
            .filter(|&i| a.group_labels[i].starts_with(prefix))
            .collect();
        if rows.is_empty() {
            return Err(Error::LabelMismatch(format!("no rows with prefix {prefix}")));
        }
        let labels = rows
            .iter()
            .map(|&i| a.group_labels[i][prefix.len()..].to_string())
            .collect();
        let data: Vec<Vec<f64>> = rows.iter().map(|&i| a.data.row(i).to_vec()).collect();
        ScheduleMatrix::new(labels, a.schedule_labels.clone(), Matrix::from_rows(&data)?, a.scale)
    };
    Ok((pick(FEMALE_PREFIX)?, pick(MALE_PREFIX)?))
}
