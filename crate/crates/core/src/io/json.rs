use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regress::LinearModel;
use crate::schedule::{ComponentBasis, Scale};

/// On-disk form of a basis. Numbers are decimal strings in shortest
/// round-trip form so that reading back yields identical floats.
#[derive(Debug, Serialize, Deserialize)]
struct BasisFile {
    group_labels: Vec<String>,
    singular_values: Vec<String>,
    components: Vec<Vec<String>>,
    c: usize,
    scale: Scale,
    source_id: String,
}

fn encode(v: f64) -> String {
    format!("{v:?}")
}

fn decode(s: &str, path: &Path) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            msg: format!("'{s}' is not a finite number"),
        })
}

pub fn write_basis<W: Write>(w: W, basis: &ComponentBasis) -> Result<()> {
    let file = BasisFile {
        group_labels: basis.group_labels.clone(),
        singular_values: basis.singular_values.iter().map(|&v| encode(v)).collect(),
        components: basis
            .components
            .iter()
            .map(|c| c.iter().map(|&v| encode(v)).collect())
            .collect(),
        c: basis.c(),
        scale: basis.scale,
        source_id: basis.source_id.clone(),
    };
    serde_json::to_writer_pretty(w, &file)?;
    Ok(())
}

pub fn read_basis<R: Read>(r: R, path: &Path) -> Result<ComponentBasis> {
    let file: BasisFile = serde_json::from_reader(r).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let bad = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    if file.c != file.components.len() || file.c != file.singular_values.len() {
        return Err(bad(format!(
            "c = {} but {} components and {} singular values",
            file.c,
            file.components.len(),
            file.singular_values.len()
        )));
    }
    if file.c == 0 {
        return Err(bad("basis has no components".into()));
    }
    let g = file.group_labels.len();
    let components = file
        .components
        .iter()
        .map(|c| {
            if c.len() != g {
                return Err(bad(format!("component of length {} for {g} age groups", c.len())));
            }
            c.iter().map(|s| decode(s, path)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let singular_values = file
        .singular_values
        .iter()
        .map(|s| decode(s, path))
        .collect::<Result<Vec<_>>>()?;
    Ok(ComponentBasis {
        group_labels: file.group_labels,
        components,
        singular_values,
        scale: file.scale,
        source_id: file.source_id,
    })
}

pub fn load_basis(path: &Path) -> Result<ComponentBasis> {
    let f = std::fs::File::open(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    read_basis(std::io::BufReader::new(f), path)
}

pub fn write_models<W: Write>(w: W, models: &[LinearModel]) -> Result<()> {
    serde_json::to_writer_pretty(w, models)?;
    Ok(())
}

pub fn load_models(path: &Path) -> Result<Vec<LinearModel>> {
    let f = std::fs::File::open(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let models: Vec<LinearModel> =
        serde_json::from_reader(std::io::BufReader::new(f)).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    for m in &models {
        if m.coefficients.len() != m.predictors.len() + usize::from(m.intercept) {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: format!("model '{}' has inconsistent coefficients", m.response),
            });
        }
    }
    Ok(models)
}
