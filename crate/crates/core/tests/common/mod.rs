#![allow(dead_code)]

use std::path::PathBuf;

use agecomp::io::{load_covariates, load_schedule_csv};
use agecomp::regress::CovariateTable;
use agecomp::schedule::{concat_sexes, ScheduleMatrix};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn load(name: &str, log: bool) -> ScheduleMatrix {
    load_schedule_csv(&data_path(name), log).unwrap()
}

/// Log mortality, female rows over male rows: 38 × 19.
pub fn am() -> ScheduleMatrix {
    concat_sexes(&load("mx_female.csv", true), &load("mx_male.csv", true)).unwrap()
}

/// Log fertility: 7 × 19.
pub fn af() -> ScheduleMatrix {
    load("asfr.csv", true)
}

pub fn mx_covariates() -> CovariateTable {
    load_covariates(&data_path("mx_covariates.csv")).unwrap()
}

pub fn fx_covariates() -> CovariateTable {
    load_covariates(&data_path("fx_covariates.csv")).unwrap()
}

/// `a` equals `b` or `-b` entry by entry within `tol`.
pub fn close_up_to_sign(a: &[f64], b: &[f64], tol: f64) -> bool {
    let plus = a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol);
    let minus = a.iter().zip(b).all(|(x, y)| (x + y).abs() <= tol);
    plus || minus
}

/// True when every label occupies one run of consecutive observations.
pub fn contiguous(labels: &[usize]) -> bool {
    let mut seen = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if i > 0 && labels[i - 1] == l {
            continue;
        }
        if seen.contains(&l) {
            return false;
        }
        seen.push(l);
    }
    true
}
