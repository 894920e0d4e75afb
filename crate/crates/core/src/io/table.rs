use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::regress::CovariateTable;
use crate::schedule::{Scale, ScheduleMatrix};

/// A CSV table whose first column holds row labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTable {
    /// Header of the label column.
    pub key: String,
    pub columns: Vec<String>,
    pub labels: Vec<String>,
    /// Row-major cells; empty cells are `None`.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl LabeledTable {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.cells.iter().map(|r| r[j]).collect())
    }
}

/// Parse a labeled CSV. Blank cells become `None`; anything else must be a
/// finite number.
pub fn read_labeled<R: Read>(reader: R, path: &Path) -> Result<LabeledTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: "file is empty".into(),
            })
        }
    };
    let mut header = header.iter().map(str::to_string);
    let key = header.next().unwrap_or_default();
    let columns: Vec<String> = header.collect();
    if columns.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: "header has no data columns".into(),
        });
    }
    let width = columns.len() + 1;
    let mut labels = Vec::new();
    let mut cells = Vec::new();
    for (idx, rec) in records.enumerate() {
        let rec = rec?;
        let row = idx + 2;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                col: rec.len().min(width),
                msg: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        labels.push(rec[0].to_string());
        let vals = rec
            .iter()
            .enumerate()
            .skip(1)
            .map(|(col, cell)| {
                if cell.is_empty() {
                    return Ok(None);
                }
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(Some(v)),
                    _ => Err(Error::Parse {
                        path: path.to_path_buf(),
                        row,
                        col: col + 1,
                        msg: format!("'{cell}' is not a finite number"),
                    }),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        cells.push(vals);
    }
    if labels.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: "no data rows".into(),
        });
    }
    Ok(LabeledTable {
        key,
        columns,
        labels,
        cells,
    })
}

pub fn read_labeled_file(path: &Path) -> Result<LabeledTable> {
    let f = std::fs::File::open(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    read_labeled(std::io::BufReader::new(f), path)
}

/// Schedules from CSV: header `age,<schedule labels…>`, one age group per row.
/// With `log`, rates are replaced by their natural log.
pub fn parse_schedule_csv<R: Read>(reader: R, path: &Path, log: bool) -> Result<ScheduleMatrix> {
    let t = read_labeled(reader, path)?;
    if !t.key.eq_ignore_ascii_case("age") {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            col: 1,
            msg: format!("first header cell must be 'age', found '{}'", t.key),
        });
    }
    let mut data = Vec::with_capacity(t.labels.len() * t.columns.len());
    for (i, row) in t.cells.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            let at = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                row: i + 2,
                col: j + 2,
                msg,
            };
            let v = cell.ok_or_else(|| at("empty cell".into()))?;
            if log {
                if v <= 0.0 {
                    return Err(at(format!("cannot take the log of non-positive rate {v}")));
                }
                data.push(v.ln());
            } else {
                data.push(v);
            }
        }
    }
    let scale = if log { Scale::Log } else { Scale::Natural };
    let m = Matrix::new(t.labels.len(), t.columns.len(), data)?;
    ScheduleMatrix::new(t.labels, t.columns, m, scale)
}

pub fn load_schedule_csv(path: &Path, log: bool) -> Result<ScheduleMatrix> {
    let f = std::fs::File::open(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    parse_schedule_csv(std::io::BufReader::new(f), path, log)
}

fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_schedule_csv<W: Write>(w: W, a: &ScheduleMatrix) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["age".to_string()];
    header.extend(a.schedule_labels.iter().cloned());
    wtr.write_record(&header)?;
    for (i, g) in a.group_labels.iter().enumerate() {
        let mut rec = vec![g.clone()];
        rec.extend(a.data.row(i).iter().map(|&v| fmt_num(v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Write a labeled numeric table (e.g. weights, one row per schedule).
pub fn write_labeled_csv<W: Write>(
    w: W,
    key: &str,
    columns: &[String],
    labels: &[String],
    values: &Matrix,
) -> Result<()> {
    if values.shape() != (labels.len(), columns.len()) {
        return Err(Error::shape(
            format!("{}x{}", labels.len(), columns.len()),
            format!("{}x{}", values.rows(), values.cols()),
        ));
    }
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec![key.to_string()];
    header.extend(columns.iter().cloned());
    wtr.write_record(&header)?;
    for (i, l) in labels.iter().enumerate() {
        let mut rec = vec![l.clone()];
        rec.extend(values.row(i).iter().map(|&v| fmt_num(v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// A complete numeric table: labels and a dense matrix.
pub fn load_matrix_csv(path: &Path) -> Result<(LabeledTable, Matrix)> {
    let t = read_labeled_file(path)?;
    let mut data = Vec::new();
    for (i, row) in t.cells.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            data.push(c.ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                row: i + 2,
                col: j + 2,
                msg: "empty cell".into(),
            })?);
        }
    }
    let m = Matrix::new(t.labels.len(), t.columns.len(), data)?;
    Ok((t, m))
}

/// Covariates keyed by schedule label, with `delta`/`delta_pct` derived when
/// HIV prevalence and ART coverage are present.
pub fn load_covariates(path: &Path) -> Result<CovariateTable> {
    let t = read_labeled_file(path)?;
    let mut table = CovariateTable::new(t.labels.clone())?;
    for name in &t.columns {
        table.insert(name, t.column(name).expect("column exists"))?;
    }
    table.with_delta()
}
