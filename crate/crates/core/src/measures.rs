//! Period life tables, interval death probabilities, TFR and the untreated
//! infection covariate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::schedule::{AgeSchedule, Scale};

/// An age interval `[start, start + width)`; `width` is `None` for the open
/// last interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgeGroup {
    pub start: f64,
    pub width: Option<f64>,
}

impl AgeGroup {
    pub fn is_open(&self) -> bool {
        self.width.is_none()
    }
}

/// Parse labels such as `0`, `1-4`, `85+` into contiguous age groups.
///
/// A single-age label like `0` spans up to the start of the next group.
pub fn parse_age_grid(labels: &[String]) -> Result<Vec<AgeGroup>> {
    let bad = |l: &str, why: &str| Error::InvalidInput(format!("age group '{l}': {why}"));
    let num = |s: &str, l: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| bad(l, "not an age"))
    };
    // (start, inclusive end if given, open)
    let mut parsed = Vec::with_capacity(labels.len());
    for l in labels {
        let l = l.trim();
        if let Some(s) = l.strip_suffix('+') {
            parsed.push((num(s, l)?, None, true));
        } else if let Some((a, b)) = l.split_once('-') {
            let (a, b) = (num(a, l)?, num(b, l)?);
            if b < a {
                return Err(bad(l, "end before start"));
            }
            parsed.push((a, Some(b), false));
        } else {
            parsed.push((num(l, l)?, None, false));
        }
    }
    if parsed.is_empty() {
        return Err(Error::InvalidInput("empty age grid".into()));
    }
    let last = parsed.len() - 1;
    let mut groups = Vec::with_capacity(parsed.len());
    for (i, &(start, end, open)) in parsed.iter().enumerate() {
        if open != (i == last) {
            return Err(bad(&labels[i], "only the last group may be, and must be, open"));
        }
        let width = if open {
            None
        } else {
            let next = parsed[i + 1].0;
            let w = next - start;
            if w <= 0.0 {
                return Err(bad(&labels[i], "groups are not ascending"));
            }
            if let Some(e) = end {
                if (e + 1.0 - next).abs() > 1e-9 {
                    return Err(bad(&labels[i], "groups are not contiguous"));
                }
            }
            Some(w)
        };
        groups.push(AgeGroup { start, width });
    }
    Ok(groups)
}

/// Abridged period life table with radix 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifeTable {
    pub groups: Vec<AgeGroup>,
    pub mx: Vec<f64>,
    pub ax: Vec<f64>,
    pub qx: Vec<f64>,
    pub lx: Vec<f64>,
    pub dx: Vec<f64>,
    #[serde(rename = "Lx")]
    pub big_lx: Vec<f64>,
    #[serde(rename = "Tx")]
    pub tx: Vec<f64>,
    pub ex: Vec<f64>,
}

impl LifeTable {
    pub fn e0(&self) -> f64 {
        self.ex[0]
    }
}

fn separation_factor(g: &AgeGroup, n: f64) -> f64 {
    match (g.start, n) {
        (s, w) if s == 0.0 && w == 1.0 => 0.3,
        (s, w) if s == 1.0 && w == 4.0 => 1.5,
        _ => n / 2.0,
    }
}

/// Build a life table from natural-scale death rates.
///
/// Closed intervals use `qx = n·mx / (1 + (n − ax)·mx)` with `a₀ = 0.3`,
/// `a` for ages 1–4 of 1.5 and `n/2` elsewhere. The open interval has
/// `qx = 1` and `Lx = lx/mx`.
pub fn life_table_from_mx(mx: &AgeSchedule, groups: &[AgeGroup]) -> Result<LifeTable> {
    if mx.scale != Scale::Natural {
        return Err(Error::ScaleMismatch {
            expected: "natural".into(),
            found: mx.scale.as_str().into(),
        });
    }
    if mx.len() != groups.len() {
        return Err(Error::shape(
            format!("{} rates", groups.len()),
            format!("{}", mx.len()),
        ));
    }
    let last = groups.len() - 1;
    if groups.iter().enumerate().any(|(i, g)| g.is_open() != (i == last)) {
        return Err(Error::InvalidInput("age grid must end with one open group".into()));
    }
    for (i, &m) in mx.values.iter().enumerate() {
        if !m.is_finite() || m < 0.0 {
            return Err(Error::InvalidInput(format!(
                "death rate {m} for age group {} is not a non-negative number",
                mx.group_labels[i]
            )));
        }
    }
    if mx.values[last] <= 0.0 {
        return Err(Error::InvalidInput(
            "the open age group needs a positive death rate".into(),
        ));
    }

    let k = groups.len();
    let (mut ax, mut qx) = (vec![0.0; k], vec![0.0; k]);
    let (mut lx, mut dx, mut big_lx) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    let mut l = 1.0;
    for (i, g) in groups.iter().enumerate() {
        let m = mx.values[i];
        lx[i] = l;
        match g.width {
            Some(n) => {
                let a = separation_factor(g, n);
                let q = (n * m / (1.0 + (n - a) * m)).min(1.0);
                ax[i] = a;
                qx[i] = q;
                dx[i] = l * q;
                big_lx[i] = n * (l - dx[i]) + a * dx[i];
                l -= dx[i];
            }
            None => {
                ax[i] = 1.0 / m;
                qx[i] = 1.0;
                dx[i] = l;
                big_lx[i] = l / m;
            }
        }
    }
    let mut tx = vec![0.0; k];
    let mut acc = 0.0;
    for i in (0..k).rev() {
        acc += big_lx[i];
        tx[i] = acc;
    }
    let ex = tx
        .iter()
        .zip(&lx)
        .map(|(t, l)| if *l > 0.0 { t / l } else { 0.0 })
        .collect();
    Ok(LifeTable {
        groups: groups.to_vec(),
        mx: mx.values.clone(),
        ax,
        qx,
        lx,
        dx,
        big_lx,
        tx,
        ex,
    })
}

fn survivors_at(lt: &LifeTable, age: f64) -> Option<f64> {
    lt.groups.iter().zip(&lt.lx).find_map(|(g, l)| {
        if (g.start - age).abs() < 1e-9 {
            Some(*l)
        } else {
            None
        }
    })
}

/// Probability of dying in `[x, x + n)` given survival to `x`.
pub fn interval_death_prob(lt: &LifeTable, x: f64, n: f64) -> Result<f64> {
    let off = |a: f64| Error::InvalidInput(format!("age {a} is not a group boundary"));
    let lx = survivors_at(lt, x).ok_or_else(|| off(x))?;
    let ly = survivors_at(lt, x + n).ok_or_else(|| off(x + n))?;
    if n <= 0.0 {
        return Err(Error::InvalidInput(format!("interval width {n} is not positive")));
    }
    if lx == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - ly / lx)
}

/// Total fertility rate: `width · Σ rates`.
pub fn tfr(asfr: &AgeSchedule, width: f64) -> Result<f64> {
    if asfr.scale != Scale::Natural {
        return Err(Error::ScaleMismatch {
            expected: "natural".into(),
            found: asfr.scale.as_str().into(),
        });
    }
    if let Some(v) = asfr.values.iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidInput(format!("negative fertility rate {v}")));
    }
    Ok(width * asfr.values.iter().sum::<f64>())
}

/// HIV prevalence minus ART coverage, clamped at zero.
pub fn derive_delta(hiv_prev: f64, art_cov: f64) -> Result<f64> {
    for (name, v) in [("hiv_prev", hiv_prev), ("art_cov", art_cov)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidInput(format!("{name} = {v} is not a fraction")));
        }
    }
    let d = hiv_prev - art_cov;
    if d < 0.0 {
        log::warn!("ART coverage {art_cov} exceeds HIV prevalence {hiv_prev}; delta clamped to 0");
        return Ok(0.0);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn schedule(l: &[&str], values: Vec<f64>) -> AgeSchedule {
        AgeSchedule::new(labels(l), values, Scale::Natural).unwrap()
    }

    #[test]
    fn grid_parsing() {
        let g = parse_age_grid(&labels(&["0", "1-4", "5-9", "10+"])).unwrap();
        assert_eq!(g[0], AgeGroup { start: 0.0, width: Some(1.0) });
        assert_eq!(g[1], AgeGroup { start: 1.0, width: Some(4.0) });
        assert_eq!(g[3], AgeGroup { start: 10.0, width: None });
        assert!(parse_age_grid(&labels(&["0", "1-4"])).is_err());
        assert!(parse_age_grid(&labels(&["0", "2-4", "5+"])).is_ok());
        assert!(parse_age_grid(&labels(&["0-4", "6-9", "10+"])).is_err());
        assert!(parse_age_grid(&labels(&["5+", "10+"])).is_err());
        assert!(parse_age_grid(&labels(&["x", "1+"])).is_err());
    }

    #[test]
    fn single_open_group() {
        let g = parse_age_grid(&labels(&["0+"])).unwrap();
        let lt = life_table_from_mx(&schedule(&["0+"], vec![0.02]), &g).unwrap();
        assert!((lt.e0() - 50.0).abs() < 1e-12);
        assert_eq!(lt.qx, vec![1.0]);
    }

    #[test]
    fn zero_rate_closed_interval() {
        let l = ["0", "1-4", "5+"];
        let g = parse_age_grid(&labels(&l)).unwrap();
        let lt = life_table_from_mx(&schedule(&l, vec![0.0, 0.01, 0.1]), &g).unwrap();
        assert_eq!(lt.qx[0], 0.0);
        assert_eq!(lt.lx[1], 1.0);
        assert!((interval_death_prob(&lt, 0.0, 1.0).unwrap()).abs() < 1e-15);
        let q = 4.0 * 0.01 / (1.0 + 2.5 * 0.01);
        assert!((interval_death_prob(&lt, 0.0, 5.0).unwrap() - q).abs() < 1e-15);
        assert!(interval_death_prob(&lt, 0.0, 3.0).is_err());
    }

    #[test]
    fn rejects_bad_rates() {
        let l = ["0", "1+"];
        let g = parse_age_grid(&labels(&l)).unwrap();
        assert!(life_table_from_mx(&schedule(&l, vec![-0.1, 0.1]), &g).is_err());
        assert!(life_table_from_mx(&schedule(&l, vec![0.1, 0.0]), &g).is_err());
        let logged = AgeSchedule::new(labels(&l), vec![-3.0, -2.0], Scale::Log).unwrap();
        assert!(matches!(life_table_from_mx(&logged, &g), Err(Error::ScaleMismatch { .. })));
    }

    #[test]
    fn fertility_totals() {
        let l = ["a", "b", "c", "d", "e", "f", "g"];
        assert!((tfr(&schedule(&l, vec![0.1; 7]), 5.0).unwrap() - 3.5).abs() < 1e-12);
        assert_eq!(tfr(&schedule(&l, vec![0.0; 7]), 5.0).unwrap(), 0.0);
        let mut neg = vec![0.1; 7];
        neg[3] = -0.01;
        assert!(tfr(&schedule(&l, neg), 5.0).is_err());
    }

    #[test]
    fn delta() {
        assert!((derive_delta(0.03243, 0.0).unwrap() - 0.03243).abs() < 1e-15);
        assert!((derive_delta(0.17586, 0.02192).unwrap() - 0.15394).abs() < 1e-12);
        assert_eq!(derive_delta(0.2, 0.2).unwrap(), 0.0);
        assert_eq!(derive_delta(0.1, 0.3).unwrap(), 0.0);
        assert!(derive_delta(1.2, 0.0).is_err());
    }
}
