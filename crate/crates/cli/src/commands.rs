use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use agecomp::cluster::{characteristic_schedules, select_by_bic, Family};
use agecomp::io::{
    emit_plot, load_basis, load_covariates, load_matrix_csv, load_models, load_ppm,
    load_schedule_csv, write_basis, write_labeled_csv, write_models, write_ppm, write_schedule_csv,
    PlotLabels, PpmFormat, Series, SeriesStyle,
};
use agecomp::linalg::{explained_share, svd, Matrix};
use agecomp::measures::{interval_death_prob, life_table_from_mx, parse_age_grid, LifeTable};
use agecomp::regress::{ols_fit_table, predict_schedule, LinearModel};
use agecomp::schedule::{
    basis_from_svd, concat_sexes, error_metrics, fit_matrix, reconstruct_all, smooth_matrix,
    weights_from_svd, ScheduleMatrix,
};
use serde_json::json;
use thiserror::Error;

use crate::{Command, Format, Rank, ScheduleArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] agecomp::Error),
    #[error("{path}: {source}")]
    Write { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(e) if e.is_numerical() => 3,
            CliError::Lib(_) | CliError::Write { .. } => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Buffered output to a file or standard output.
struct Sink {
    path: PathBuf,
    inner: Box<dyn Write>,
}

impl Sink {
    fn open(out: Option<&Path>) -> Result<Sink> {
        match out {
            Some(p) => {
                let f = File::create(p).map_err(|source| CliError::Write {
                    path: p.to_path_buf(),
                    source,
                })?;
                Ok(Sink {
                    path: p.to_path_buf(),
                    inner: Box::new(BufWriter::new(f)),
                })
            }
            None => Ok(Sink {
                path: PathBuf::from("<stdout>"),
                inner: Box::new(BufWriter::new(io::stdout().lock())),
            }),
        }
    }

    fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|source| CliError::Write {
            path: self.path,
            source,
        })
    }

    fn json(mut self, value: &serde_json::Value) -> Result<()> {
        serde_json::to_writer_pretty(&mut self.inner, value).map_err(agecomp::Error::from)?;
        writeln!(self.inner).map_err(agecomp::Error::from)?;
        self.finish()
    }
}

impl Write for Sink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.inner.write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

pub fn run(cmd: Command, out: Option<&Path>, format: Option<Format>) -> Result<()> {
    match cmd {
        Command::Decompose { input, rank, weights } => {
            decompose(&input, &rank, weights.as_deref(), out, format)
        }
        Command::Reconstruct { basis, weights, rank } => reconstruct(&basis, &weights, &rank, out),
        Command::Smooth { input, components } => {
            let a = load_schedules(&input)?;
            let s = smooth_matrix(&a, components)?;
            write_schedules(&s, out)
        }
        Command::Fit { input, basis } => fit(&input, &basis, out),
        Command::Regress {
            weights,
            covariates,
            predictors,
            components,
            no_intercept,
        } => regress(&weights, &covariates, &predictors, components, !no_intercept, out, format),
        Command::Predict {
            basis,
            models,
            covariates,
        } => predict(&basis, &models, &covariates, out),
        Command::Cluster {
            weights,
            components,
            k_range,
            family,
            seed,
            basis,
            patterns,
        } => {
            let ks = parse_k_range(&k_range)?;
            let families = parse_families(&family)?;
            let pattern_out = basis.as_deref().zip(patterns.as_deref());
            cluster(&weights, components, &ks, &families, seed, pattern_out, out, format)
        }
        Command::Metrics {
            predicted,
            observed,
            log,
        } => metrics(&predicted, &observed, log, out, format),
        Command::Image { input, rank, ascii } => image(&input, rank, ascii, out),
        Command::Lifetable { input, column } => lifetable(&input, column.as_deref(), out, format),
        Command::Plot {
            observed,
            predicted,
            weights,
            log,
            title,
        } => plot(observed.zip(predicted), weights.as_deref(), log, title, out),
    }
}

fn load_schedules(args: &ScheduleArgs) -> Result<ScheduleMatrix> {
    match (args.concat_sexes, args.inputs.as_slice()) {
        (true, [f, m]) => {
            let f = load_schedule_csv(f, args.log)?;
            let m = load_schedule_csv(m, args.log)?;
            Ok(concat_sexes(&f, &m)?)
        }
        (true, _) => Err(usage("--concat-sexes needs exactly two inputs: female then male")),
        (false, [one]) => Ok(load_schedule_csv(one, args.log)?),
        (false, _) => Err(usage("give one input file, or two with --concat-sexes")),
    }
}

fn write_schedules(a: &ScheduleMatrix, out: Option<&Path>) -> Result<()> {
    let mut sink = Sink::open(out)?;
    write_schedule_csv(&mut sink, a)?;
    sink.finish()
}

fn weight_names(c: usize) -> Vec<String> {
    (1..=c).map(|i| format!("v{i}")).collect()
}

fn write_weights(path: Option<&Path>, labels: &[String], w: &Matrix) -> Result<()> {
    let mut sink = Sink::open(path)?;
    write_labeled_csv(&mut sink, "schedule", &weight_names(w.cols()), labels, w)?;
    sink.finish()
}

fn choose_rank(rank: &Rank, available: usize) -> Result<usize> {
    match (rank.full, rank.components) {
        (true, _) => Ok(available),
        (false, Some(0)) => Err(usage("--components must be at least 1")),
        (false, Some(c)) => Ok(c),
        (false, None) => Ok(2.min(available)),
    }
}

fn decompose(
    input: &ScheduleArgs,
    rank: &Rank,
    weights: Option<&Path>,
    out: Option<&Path>,
    format: Option<Format>,
) -> Result<()> {
    let a = load_schedules(input)?;
    let f = svd(&a.data)?;
    let c = choose_rank(rank, f.rank())?;
    let source = input
        .inputs
        .iter()
        .filter_map(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("+");
    let basis = basis_from_svd(&a, &f, c, &source)?;
    for (i, (s, share)) in f.s.iter().zip(explained_share(&f)?).enumerate() {
        eprintln!("s{} = {s:.6}  ({:.4}%)", i + 1, 100.0 * share);
    }
    if let Some(path) = weights {
        write_weights(Some(path), &a.schedule_labels, &weights_from_svd(&a, &f, c)?)?;
    }
    let mut sink = Sink::open(out)?;
    match format.unwrap_or(Format::Json) {
        Format::Json => write_basis(&mut sink, &basis)?,
        Format::Csv => {
            let m = Matrix::from_columns(&basis.components)?;
            let names: Vec<String> = (1..=c).map(|i| format!("lambda{i}")).collect();
            write_labeled_csv(&mut sink, "age", &names, &basis.group_labels, &m)?;
        }
    }
    sink.finish()
}

fn reconstruct(basis: &Path, weights: &Path, rank: &Rank, out: Option<&Path>) -> Result<()> {
    let basis = load_basis(basis)?;
    let (table, w) = load_matrix_csv(weights)?;
    let c = choose_rank(rank, basis.c().min(w.cols()))?;
    let basis = basis.truncate(c)?;
    if w.cols() < c {
        return Err(usage(format!("weights have {} columns, {c} needed", w.cols())));
    }
    let cols: Vec<Vec<f64>> = (0..c).map(|i| w.column(i)).collect();
    let a = reconstruct_all(&basis, &Matrix::from_columns(&cols)?, table.labels)?;
    write_schedules(&a, out)
}

fn fit(input: &ScheduleArgs, basis: &Path, out: Option<&Path>) -> Result<()> {
    let a = load_schedules(input)?;
    let basis = load_basis(basis)?;
    if a.group_labels != basis.group_labels {
        return Err(agecomp::Error::LabelMismatch("schedule age groups differ from the basis".into()).into());
    }
    let fits = fit_matrix(&a, &basis)?;
    let rows: Vec<Vec<f64>> = fits.iter().map(|f| f.betas.clone()).collect();
    write_weights(out, &a.schedule_labels, &Matrix::from_rows(&rows)?)
}

fn regress(
    weights: &Path,
    covariates: &Path,
    predictors: &[String],
    components: Option<usize>,
    intercept: bool,
    out: Option<&Path>,
    format: Option<Format>,
) -> Result<()> {
    let (table, w) = load_matrix_csv(weights)?;
    let cov = load_covariates(covariates)?;
    let c = components.unwrap_or(w.cols());
    if c == 0 || c > w.cols() {
        return Err(usage(format!("--components must be in 1..={}", w.cols())));
    }
    let names: Vec<&str> = predictors.iter().map(String::as_str).collect();
    let models = (0..c)
        .map(|i| {
            let mut m = ols_fit_table(&w.column(i), &table.labels, &cov, &names, intercept)?;
            m.response = table.columns[i].clone();
            Ok(m)
        })
        .collect::<agecomp::Result<Vec<LinearModel>>>()?;
    let mut sink = Sink::open(out)?;
    match format.unwrap_or(Format::Json) {
        Format::Json => write_models(&mut sink, &models)?,
        Format::Csv => {
            writeln!(sink, "response,term,estimate,std_error,t_value,p_value,r_squared")
                .map_err(agecomp::Error::from)?;
            for m in &models {
                let terms = intercept.then_some("(intercept)").into_iter().chain(names.iter().copied());
                for (j, term) in terms.enumerate() {
                    writeln!(
                        sink,
                        "{},{term},{:?},{:?},{:?},{:?},{:?}",
                        m.response,
                        m.coefficients[j],
                        m.standard_errors[j],
                        m.t_values[j],
                        m.p_values[j],
                        m.r_squared
                    )
                    .map_err(agecomp::Error::from)?;
                }
            }
        }
    }
    sink.finish()
}

fn predict(basis: &Path, models: &Path, covariates: &Path, out: Option<&Path>) -> Result<()> {
    let basis = load_basis(basis)?;
    let models = load_models(models)?;
    if models.len() != basis.c() {
        return Err(usage(format!(
            "{} models for a basis of {} components",
            models.len(),
            basis.c()
        )));
    }
    let cov = load_covariates(covariates)?;
    let mut labels = Vec::new();
    let mut schedules = Vec::new();
    for label in &cov.labels {
        match predict_schedule(&basis, &models, cov.row(label)?) {
            Ok(s) => {
                labels.push(label.clone());
                schedules.push(s);
            }
            Err(agecomp::Error::MissingCovariate { name, .. }) => {
                eprintln!("skipping '{label}': no value for {name}");
            }
            Err(e) => return Err(e.into()),
        }
    }
    if schedules.is_empty() {
        return Err(agecomp::Error::InvalidInput("no covariate row has every predictor".into()).into());
    }
    write_schedules(&ScheduleMatrix::from_schedules(labels, &schedules)?, out)
}

fn parse_k_range(s: &str) -> Result<Vec<usize>> {
    let bad = || usage(format!("bad --k-range '{s}'"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let ks: Vec<usize> = if let Some((a, b)) = s.split_once("..=").or_else(|| s.split_once("..")) {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once('-') {
        (num(a)?..=num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<Result<_>>()?
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err(bad());
    }
    Ok(ks)
}

fn parse_families(s: &str) -> Result<Vec<Family>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Family::ALL.to_vec());
    }
    s.split(',')
        .map(|f| f.trim().parse::<Family>().map_err(|_| usage(format!("unknown family '{f}'"))))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cluster(
    weights: &Path,
    components: Option<usize>,
    ks: &[usize],
    families: &[Family],
    seed: u64,
    patterns: Option<(&Path, &Path)>,
    out: Option<&Path>,
    format: Option<Format>,
) -> Result<()> {
    let (table, w) = load_matrix_csv(weights)?;
    let c = components.unwrap_or(w.cols());
    if c == 0 || c > w.cols() {
        return Err(usage(format!("--components must be in 1..={}", w.cols())));
    }
    let w = Matrix::from_columns(&(0..c).map(|i| w.column(i)).collect::<Vec<_>>())?;
    let model = select_by_bic(&w, ks, families, seed)?;
    let assignment = model.assign(&w)?;
    eprintln!(
        "selected {} with k = {} (BIC {:.4})",
        model.family, model.k, model.bic
    );
    if let Some((basis, path)) = patterns {
        let basis = load_basis(basis)?.truncate(c)?;
        let schedules = characteristic_schedules(&assignment, &w, &basis)?;
        let labels = (1..=schedules.len()).map(|l| format!("cluster{l}")).collect();
        write_schedules(&ScheduleMatrix::from_schedules(labels, &schedules)?, Some(path))?;
    }
    let mut sink = Sink::open(out)?;
    match format.unwrap_or(Format::Csv) {
        Format::Csv => {
            writeln!(sink, "schedule,cluster").map_err(agecomp::Error::from)?;
            for (l, k) in table.labels.iter().zip(&assignment.labels) {
                writeln!(sink, "{l},{k}").map_err(agecomp::Error::from)?;
            }
            sink.finish()
        }
        Format::Json => {
            let order = &assignment.component_order;
            sink.json(&json!({
                "k": model.k,
                "family": model.family.as_str(),
                "bic": model.bic,
                "log_likelihood": model.log_likelihood,
                "n_params": model.n_params,
                "degenerate": model.degenerate,
                "mixing_weights": order.iter().map(|&j| model.weights[j]).collect::<Vec<_>>(),
                "means": order.iter().map(|&j| model.means[j].clone()).collect::<Vec<_>>(),
                "assignments": table.labels.iter().zip(&assignment.labels)
                    .map(|(l, k)| json!({"schedule": l, "cluster": k}))
                    .collect::<Vec<_>>(),
            }))
        }
    }
}

fn metrics(
    predicted: &Path,
    observed: &Path,
    log: bool,
    out: Option<&Path>,
    format: Option<Format>,
) -> Result<()> {
    let p = load_schedule_csv(predicted, log)?;
    let o = load_schedule_csv(observed, log)?;
    let e = error_metrics(&p, &o)?;
    let mut sink = Sink::open(out)?;
    match format.unwrap_or(Format::Csv) {
        Format::Csv => {
            writeln!(sink, "statistic,value").map_err(agecomp::Error::from)?;
            writeln!(sink, "mae,{:?}", e.mae).map_err(agecomp::Error::from)?;
            for (name, q) in ["q01", "q25", "q50", "q75", "q99"].iter().zip(e.quantiles) {
                writeln!(sink, "{name},{q:?}").map_err(agecomp::Error::from)?;
            }
            sink.finish()
        }
        Format::Json => sink.json(&serde_json::to_value(e).map_err(agecomp::Error::from)?),
    }
}

fn image(input: &Path, k: usize, ascii: bool, out: Option<&Path>) -> Result<()> {
    let img = load_ppm(input)?;
    let approx = agecomp::image::image_rank_approx(&img, k)?;
    let err = agecomp::image::channel_errors(&approx, &img)?;
    eprintln!("rank {k}: channel errors r {:.3}, g {:.3}, b {:.3}", err[0], err[1], err[2]);
    let fmt = if ascii { PpmFormat::Ascii } else { PpmFormat::Binary };
    let mut sink = Sink::open(out)?;
    write_ppm(&mut sink, &approx, fmt)?;
    sink.finish()
}

fn lifetable(input: &Path, column: Option<&str>, out: Option<&Path>, format: Option<Format>) -> Result<()> {
    let a = load_schedule_csv(input, false)?;
    let groups = parse_age_grid(&a.group_labels)?;
    let mut sink = Sink::open(out)?;
    let fmt = format.unwrap_or(Format::Csv);
    if let Some(label) = column {
        let col = a
            .column_by_label(label)
            .ok_or_else(|| usage(format!("no schedule '{label}' in {}", input.display())))?;
        let lt = life_table_from_mx(&col, &groups)?;
        return match fmt {
            Format::Json => sink.json(&serde_json::to_value(&lt).map_err(agecomp::Error::from)?),
            Format::Csv => {
                write_table(&mut sink, &a.group_labels, &lt)?;
                sink.finish()
            }
        };
    }
    let mut rows = Vec::new();
    for h in 0..a.schedules() {
        let lt = life_table_from_mx(&a.column(h), &groups)?;
        rows.push(vec![
            lt.e0(),
            interval_death_prob(&lt, 0.0, 5.0)?,
            interval_death_prob(&lt, 15.0, 45.0)?,
        ]);
    }
    let names = ["e0", "q5_0", "q45_15"].map(String::from);
    match fmt {
        Format::Csv => {
            write_labeled_csv(&mut sink, "schedule", &names, &a.schedule_labels, &Matrix::from_rows(&rows)?)?;
            sink.finish()
        }
        Format::Json => sink.json(&json!(a
            .schedule_labels
            .iter()
            .zip(&rows)
            .map(|(l, r)| json!({"schedule": l, "e0": r[0], "q5_0": r[1], "q45_15": r[2]}))
            .collect::<Vec<_>>())),
    }
}

fn write_table(sink: &mut Sink, labels: &[String], lt: &LifeTable) -> Result<()> {
    let cols = [&lt.mx, &lt.ax, &lt.qx, &lt.lx, &lt.dx, &lt.big_lx, &lt.tx, &lt.ex];
    let m = Matrix::from_columns(&cols.map(|c| c.clone()))?;
    let names = ["mx", "ax", "qx", "lx", "dx", "Lx", "Tx", "ex"].map(String::from);
    write_labeled_csv(sink, "age", &names, labels, &m)?;
    Ok(())
}

fn plot(
    scatter: Option<(PathBuf, PathBuf)>,
    weights: Option<&Path>,
    log: bool,
    title: String,
    out: Option<&Path>,
) -> Result<()> {
    let out = out.ok_or_else(|| usage("plot needs --out"))?;
    let (series, labels) = match (scatter, weights) {
        (Some((obs, pred)), None) => {
            let o = load_schedule_csv(&obs, log)?;
            let p = load_schedule_csv(&pred, log)?;
            if o.data.shape() != p.data.shape() {
                return Err(agecomp::Error::ShapeMismatch {
                    expected: format!("{:?}", o.data.shape()),
                    found: format!("{:?}", p.data.shape()),
                }
                .into());
            }
            let s = Series::new(
                "schedules",
                o.data.as_slice().to_vec(),
                p.data.as_slice().to_vec(),
                SeriesStyle::Scatter,
            );
            let labels = PlotLabels {
                title,
                x: "observed".into(),
                y: "predicted".into(),
            };
            (vec![s], labels)
        }
        (None, Some(w)) => {
            let (table, m) = load_matrix_csv(w)?;
            let x: Vec<f64> = table
                .labels
                .iter()
                .enumerate()
                .map(|(i, l)| l.parse().unwrap_or(i as f64))
                .collect();
            let series = table
                .columns
                .iter()
                .enumerate()
                .map(|(j, name)| Series::new(name.clone(), x.clone(), m.column(j), SeriesStyle::Line))
                .collect();
            let labels = PlotLabels {
                title,
                x: table.key.clone(),
                y: "weight".into(),
            };
            (series, labels)
        }
        _ => return Err(usage("plot needs --observed with --predicted, or --weights")),
    };
    emit_plot(&series, &labels, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_ranges() {
        assert_eq!(parse_k_range("1-6").unwrap(), vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(parse_k_range("2..4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_k_range("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_k_range("1,3").unwrap(), vec![1, 3]);
        assert!(parse_k_range("0-2").is_err());
        assert!(parse_k_range("4-2").is_err());
        assert!(parse_k_range("x").is_err());
    }

    #[test]
    fn families() {
        assert_eq!(parse_families("all").unwrap(), Family::ALL.to_vec());
        assert_eq!(
            parse_families("full, diag").unwrap(),
            vec![Family::Full, Family::Diagonal]
        );
        assert!(parse_families("vvv").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(usage("x").exit_code(), 1);
        assert_eq!(CliError::from(agecomp::Error::EmptyMatrix).exit_code(), 2);
        assert_eq!(CliError::from(agecomp::Error::RankDeficient).exit_code(), 3);
    }
}
