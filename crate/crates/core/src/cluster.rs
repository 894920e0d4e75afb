//! Gaussian mixture clustering of weight vectors, fitted by EM and chosen by
//! BIC, plus the median schedule of each cluster.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::par;
use crate::schedule::{reconstruct, AgeSchedule, ComponentBasis};

/// Covariance structure of the mixture components.
///
/// `Spherical`, `Diagonal` and `Full` give every component its own
/// covariance of that shape. `Eev` shares volume and shape across components
/// and lets only the orientation vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Spherical,
    Diagonal,
    Eev,
    Full,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Spherical, Family::Diagonal, Family::Eev, Family::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Spherical => "spherical",
            Family::Diagonal => "diagonal",
            Family::Eev => "eev",
            Family::Full => "full",
        }
    }

    /// Free parameters of a `k`-component mixture in `d` dimensions.
    pub fn n_params(self, k: usize, d: usize) -> usize {
        let cov = match self {
            Family::Spherical => k,
            Family::Diagonal => k * d,
            Family::Eev => 1 + (d - 1) + k * d * (d - 1) / 2,
            Family::Full => k * d * (d + 1) / 2,
        };
        (k - 1) + k * d + cov
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spherical" => Ok(Family::Spherical),
            "diagonal" | "diag" => Ok(Family::Diagonal),
            "eev" => Ok(Family::Eev),
            "full" => Ok(Family::Full),
            other => Err(Error::InvalidInput(format!("unknown covariance family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    /// Stop once the log-likelihood gain falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Independent initializations; the best likelihood is kept.
    pub restarts: usize,
    /// Variance floor relative to the mean per-dimension data variance.
    pub floor_scale: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            tol: 1e-8,
            max_iter: 500,
            restarts: 5,
            floor_scale: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub family: Family,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Matrix>,
    pub log_likelihood: f64,
    pub bic: f64,
    pub n_params: usize,
    /// Log-likelihood after every E-step of the kept run.
    pub ll_trace: Vec<f64>,
    /// Some covariance fell below the variance floor and was clamped to it.
    pub degenerate: bool,
}

/// Hard and soft cluster memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Labels `1..=k`, numbered in order of first appearance.
    pub labels: Vec<usize>,
    /// n×k posterior probabilities, columns in label order.
    pub responsibilities: Matrix,
    /// `component_order[l - 1]` is the model component behind label `l`.
    pub component_order: Vec<usize>,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.responsibilities.cols()
    }

    /// Observation indices for each label.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l - 1].push(i);
        }
        out
    }
}

struct Params {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covs: Vec<Matrix>,
}

struct Run {
    params: Params,
    ll: f64,
    trace: Vec<f64>,
    degenerate: bool,
}

fn variance_floor(points: &Matrix, scale: f64) -> f64 {
    let (n, d) = points.shape();
    let mut total = 0.0;
    for j in 0..d {
        let col = points.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        total += col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    }
    let v = total / d as f64;
    if v > 0.0 {
        scale * v
    } else {
        scale
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: the first center uniformly, then each next one with
/// probability proportional to the squared distance to the nearest center.
fn seed_centers(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let n = points.rows();
    let mut centers = vec![rng.gen_range(0..n)];
    let mut dist: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), points.row(centers[0])))
        .collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "fewer than {k} distinct points to seed {k} clusters"
            )));
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = n - 1;
        for (i, &w) in dist.iter().enumerate() {
            if w > 0.0 && target < w {
                pick = i;
                break;
            }
            target -= w;
        }
        while dist[pick] == 0.0 {
            pick -= 1;
        }
        centers.push(pick);
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(sq_dist(points.row(i), points.row(pick)));
        }
    }
    Ok(centers)
}

fn hard_assignment(points: &Matrix, centers: &[usize]) -> Matrix {
    let (n, k) = (points.rows(), centers.len());
    let mut r = Matrix::zeros(n, k);
    for i in 0..n {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, &c) in centers.iter().enumerate() {
            let d = sq_dist(points.row(i), points.row(c));
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        r[(i, best)] = 1.0;
    }
    r
}

/// Lower-triangular Cholesky factor of an SPD matrix.
fn cholesky(a: &Matrix) -> Option<Matrix> {
    let d = a.rows();
    let mut l = Matrix::zeros(d, d);
    for j in 0..d {
        let mut s = a[(j, j)];
        for p in 0..j {
            s -= l[(j, p)] * l[(j, p)];
        }
        if s.is_nan() || s <= 0.0 {
            return None;
        }
        l[(j, j)] = s.sqrt();
        for i in (j + 1)..d {
            let mut s = a[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / l[(j, j)];
        }
    }
    Some(l)
}

/// Replace eigenvalues below `floor` by `floor`.
fn clamp_eigen(s: &Matrix, floor: f64) -> Result<Matrix> {
    let e = symmetric_eigen(s)?;
    let d = s.rows();
    let mut out = Matrix::zeros(d, d);
    for (m, &lam) in e.values.iter().enumerate() {
        let lam = lam.max(floor);
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] += lam * e.vectors[(i, m)] * e.vectors[(j, m)];
            }
        }
    }
    Ok(out)
}

fn min_eigen(s: &Matrix) -> Result<f64> {
    Ok(symmetric_eigen(s)?.values.last().copied().unwrap_or(0.0))
}

/// Maximization step. Returns the parameters and whether any covariance had
/// to be floored.
fn m_step(points: &Matrix, r: &Matrix, family: Family, floor: f64) -> Result<(Params, bool)> {
    let (n, d) = points.shape();
    let k = r.cols();
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut scatter = Vec::with_capacity(k);
    let mut counts = Vec::with_capacity(k);
    let mut degenerate = false;
    for j in 0..k {
        let nk: f64 = (0..n).map(|i| r[(i, j)]).sum();
        if nk <= f64::EPSILON * n as f64 {
            degenerate = true;
        }
        let nk_safe = nk.max(f64::MIN_POSITIVE);
        let mut mu = vec![0.0; d];
        for i in 0..n {
            for (m, x) in mu.iter_mut().zip(points.row(i)) {
                *m += r[(i, j)] * x;
            }
        }
        mu.iter_mut().for_each(|m| *m /= nk_safe);
        let mut w = Matrix::zeros(d, d);
        for i in 0..n {
            let dev: Vec<f64> = points.row(i).iter().zip(&mu).map(|(x, m)| x - m).collect();
            for a in 0..d {
                for b in 0..d {
                    w[(a, b)] += r[(i, j)] * dev[a] * dev[b];
                }
            }
        }
        weights.push(nk / n as f64);
        means.push(mu);
        scatter.push(w);
        counts.push(nk_safe);
    }

    let mut covs = Vec::with_capacity(k);
    match family {
        Family::Spherical => {
            for (w, nk) in scatter.iter().zip(&counts) {
                let tr: f64 = (0..d).map(|a| w[(a, a)]).sum();
                let mut v = tr / (d as f64 * nk);
                if v.is_nan() || v < floor {
                    degenerate = true;
                    v = floor;
                }
                covs.push(Matrix::identity(d).map(|x| x * v));
            }
        }
        Family::Diagonal => {
            for (w, nk) in scatter.iter().zip(&counts) {
                let mut s = Matrix::zeros(d, d);
                for a in 0..d {
                    let mut v = w[(a, a)] / nk;
                    if v.is_nan() || v < floor {
                        degenerate = true;
                        v = floor;
                    }
                    s[(a, a)] = v;
                }
                covs.push(s);
            }
        }
        Family::Full => {
            for (w, nk) in scatter.iter().zip(&counts) {
                let s = w.map(|x| x / nk);
                if min_eigen(&s)?.partial_cmp(&floor).is_none_or(|o| o.is_lt()) {
                    degenerate = true;
                    covs.push(clamp_eigen(&s, floor)?);
                } else {
                    covs.push(s);
                }
            }
        }
        Family::Eev => {
            let eig = scatter
                .iter()
                .map(symmetric_eigen)
                .collect::<Result<Vec<_>>>()?;
            // eigenvalues come sorted, so the shapes pair up by rank
            let omega: Vec<f64> = (0..d)
                .map(|a| eig.iter().map(|e| e.values[a]).sum::<f64>())
                .collect();
            let log_det: f64 = omega.iter().map(|o| o.max(0.0).ln()).sum::<f64>() / d as f64;
            let vol = log_det.exp();
            let (lambda, shape) = if vol > 0.0 && vol.is_finite() {
                (vol / n as f64, omega.iter().map(|o| o / vol).collect::<Vec<_>>())
            } else {
                degenerate = true;
                (floor, vec![1.0; d])
            };
            for e in &eig {
                let mut s = Matrix::zeros(d, d);
                for (m, a) in shape.iter().enumerate() {
                    let lam = lambda * a;
                    for i in 0..d {
                        for j in 0..d {
                            s[(i, j)] += lam * e.vectors[(i, m)] * e.vectors[(j, m)];
                        }
                    }
                }
                if min_eigen(&s)?.partial_cmp(&floor).is_none_or(|o| o.is_lt()) {
                    degenerate = true;
                    s = clamp_eigen(&s, floor)?;
                }
                covs.push(s);
            }
        }
    }
    Ok((Params { weights, means, covs }, degenerate))
}

/// Per-observation log of `w_j · N(x | μ_j, Σ_j)`.
fn log_joint(points: &Matrix, p: &Params) -> Result<Matrix> {
    let (n, d) = points.shape();
    let k = p.weights.len();
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let mut out = Matrix::zeros(n, k);
    for j in 0..k {
        let l = cholesky(&p.covs[j])
            .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?;
        let log_det: f64 = 2.0 * (0..d).map(|a| l[(a, a)].ln()).sum::<f64>();
        let lw = p.weights[j].ln();
        for i in 0..n {
            // solve L z = x − μ
            let x = points.row(i);
            let mut z = vec![0.0; d];
            for a in 0..d {
                let mut s = x[a] - p.means[j][a];
                for b in 0..a {
                    s -= l[(a, b)] * z[b];
                }
                z[a] = s / l[(a, a)];
            }
            let maha: f64 = z.iter().map(|v| v * v).sum();
            out[(i, j)] = lw - 0.5 * (d as f64 * ln2pi + log_det + maha);
        }
    }
    Ok(out)
}

/// Expectation step: responsibilities and the log-likelihood.
fn e_step(points: &Matrix, p: &Params) -> Result<(Matrix, f64)> {
    let mut r = log_joint(points, p)?;
    let (n, k) = r.shape();
    let mut ll = 0.0;
    for i in 0..n {
        let row = r.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        ll += lse;
        for j in 0..k {
            r[(i, j)] = (r[(i, j)] - lse).exp();
        }
    }
    if !ll.is_finite() {
        return Err(Error::Numerical("log-likelihood is not finite".into()));
    }
    Ok((r, ll))
}

fn run_em(
    points: &Matrix,
    init: Matrix,
    family: Family,
    floor: f64,
    opts: &EmOptions,
) -> Result<Run> {
    let mut r = init;
    let mut trace = Vec::new();
    let mut last: Option<(Params, f64)> = None;
    let mut ll_old = f64::NEG_INFINITY;
    for _ in 0..opts.max_iter.max(1) {
        let (params, degenerate) = m_step(points, &r, family, floor)?;
        if degenerate {
            // keep the floored parameters, with their likelihood, and stop
            let (_, ll) = e_step(points, &params)?;
            trace.push(ll);
            return Ok(Run { params, ll, trace, degenerate: true });
        }
        let (r_new, ll) = e_step(points, &params)?;
        trace.push(ll);
        r = r_new;
        let done = ll - ll_old < opts.tol;
        ll_old = ll;
        last = Some((params, ll));
        if done {
            break;
        }
    }
    let (params, ll) = last.expect("at least one iteration");
    Ok(Run { params, ll, trace, degenerate: false })
}

/// Fit a `k`-component mixture by EM with default options.
pub fn fit_gmm_em(points: &Matrix, k: usize, family: Family, seed: u64) -> Result<GmmModel> {
    fit_gmm_em_with(points, k, family, seed, &EmOptions::default())
}

/// Fit a `k`-component mixture by EM, keeping the best of several seeded
/// restarts. Runs that had to floor a covariance are kept only when every
/// run did.
pub fn fit_gmm_em_with(
    points: &Matrix,
    k: usize,
    family: Family,
    seed: u64,
    opts: &EmOptions,
) -> Result<GmmModel> {
    let (n, d) = points.shape();
    if d == 0 || n == 0 {
        return Err(Error::EmptyMatrix);
    }
    if k == 0 {
        return Err(Error::InvalidInput("number of clusters must be at least 1".into()));
    }
    if n < k {
        return Err(Error::InsufficientData { n, p: k });
    }
    let floor = variance_floor(points, opts.floor_scale);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Run> = None;
    for _ in 0..opts.restarts.max(1) {
        let centers = seed_centers(points, k, &mut rng)?;
        let run = run_em(points, hard_assignment(points, &centers), family, floor, opts)?;
        let better = match &best {
            None => true,
            Some(b) => (b.degenerate && !run.degenerate)
                || (b.degenerate == run.degenerate && run.ll > b.ll),
        };
        if better {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");
    let n_params = family.n_params(k, d);
    Ok(GmmModel {
        k,
        d,
        n,
        family,
        weights: run.params.weights,
        means: run.params.means,
        covariances: run.params.covs,
        log_likelihood: run.ll,
        bic: -2.0 * run.ll + n_params as f64 * (n as f64).ln(),
        n_params,
        ll_trace: run.trace,
        degenerate: run.degenerate,
    })
}

impl GmmModel {
    fn params(&self) -> Params {
        Params {
            weights: self.weights.clone(),
            means: self.means.clone(),
            covs: self.covariances.clone(),
        }
    }

    /// Posterior memberships of `points`, with labels numbered by first
    /// appearance so that equivalent mixtures give identical labels.
    pub fn assign(&self, points: &Matrix) -> Result<ClusterAssignment> {
        if points.cols() != self.d {
            return Err(Error::shape(format!("{} columns", self.d), format!("{}", points.cols())));
        }
        let (r, _) = e_step(points, &self.params())?;
        let n = r.rows();
        let argmax: Vec<usize> = (0..n)
            .map(|i| {
                let row = r.row(i);
                (0..self.k).fold(0, |b, j| if row[j] > row[b] { j } else { b })
            })
            .collect();
        let mut order: Vec<usize> = Vec::with_capacity(self.k);
        for &j in &argmax {
            if !order.contains(&j) {
                order.push(j);
            }
        }
        order.extend((0..self.k).filter(|j| !argmax.contains(j)));
        let mut rank = vec![0; self.k];
        for (pos, &j) in order.iter().enumerate() {
            rank[j] = pos;
        }
        let mut resp = Matrix::zeros(n, self.k);
        for i in 0..n {
            for j in 0..self.k {
                resp[(i, rank[j])] = r[(i, j)];
            }
        }
        Ok(ClusterAssignment {
            labels: argmax.iter().map(|&j| rank[j] + 1).collect(),
            responsibilities: resp,
            component_order: order,
        })
    }
}

/// One evaluated point of a BIC grid.
#[derive(Debug)]
pub struct GridEntry {
    pub k: usize,
    pub family: Family,
    pub model: Result<GmmModel>,
}

/// Fit every `(k, family)` combination, in parallel when enabled.
pub fn bic_grid(
    points: &Matrix,
    ks: &[usize],
    families: &[Family],
    seed: u64,
    opts: &EmOptions,
) -> Vec<GridEntry> {
    let cells: Vec<(usize, Family)> = ks
        .iter()
        .flat_map(|&k| families.iter().map(move |&f| (k, f)))
        .collect();
    par::map(&cells, |&(k, family)| GridEntry {
        k,
        family,
        model: fit_gmm_em_with(points, k, family, seed, opts),
    })
}

/// Pick the lowest-BIC model from a grid.
///
/// Fits that failed are skipped, and floored fits are considered only when
/// nothing else succeeded. Ties go to the smaller `k`, then the simpler family.
pub fn best_of_grid(grid: Vec<GridEntry>) -> Result<GmmModel> {
    let mut first_err = None;
    let mut fitted = Vec::new();
    for entry in grid {
        match entry.model {
            Ok(m) => fitted.push(m),
            Err(e) => {
                log::debug!("k={} {}: {e}", entry.k, entry.family);
                first_err.get_or_insert(e);
            }
        }
    }
    let any_regular = fitted.iter().any(|m| !m.degenerate);
    let candidates = fitted.into_iter().filter(|m| !any_regular || !m.degenerate);
    let mut best: Option<GmmModel> = None;
    for m in candidates {
        let replace = match &best {
            None => true,
            Some(b) => {
                let tie = (m.bic - b.bic).abs() <= 1e-9 * b.bic.abs().max(1.0);
                if tie {
                    (m.k, m.family) < (b.k, b.family)
                } else {
                    m.bic < b.bic
                }
            }
        };
        if replace {
            best = Some(m);
        }
    }
    best.ok_or_else(|| {
        first_err.unwrap_or_else(|| Error::InvalidInput("empty model grid".into()))
    })
}

/// Fit the grid `ks × families` and return the model with the lowest BIC.
pub fn select_by_bic(points: &Matrix, ks: &[usize], families: &[Family], seed: u64) -> Result<GmmModel> {
    select_by_bic_with(points, ks, families, seed, &EmOptions::default())
}

pub fn select_by_bic_with(
    points: &Matrix,
    ks: &[usize],
    families: &[Family],
    seed: u64,
    opts: &EmOptions,
) -> Result<GmmModel> {
    if ks.is_empty() || families.is_empty() {
        return Err(Error::InvalidInput("empty model grid".into()));
    }
    best_of_grid(bic_grid(points, ks, families, seed, opts))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Component-wise median weights of each cluster, reconstructed through
/// the basis. One schedule per label, in label order.
pub fn characteristic_schedules(
    assignment: &ClusterAssignment,
    weights: &Matrix,
    basis: &ComponentBasis,
) -> Result<Vec<AgeSchedule>> {
    if assignment.labels.len() != weights.rows() {
        return Err(Error::shape(
            format!("{} weight rows", assignment.labels.len()),
            format!("{}", weights.rows()),
        ));
    }
    assignment
        .members()
        .iter()
        .enumerate()
        .map(|(l, rows)| {
            if rows.is_empty() {
                return Err(Error::InvalidInput(format!("cluster {} has no members", l + 1)));
            }
            let med: Vec<f64> = (0..weights.cols())
                .map(|c| median(&mut rows.iter().map(|&i| weights[(i, c)]).collect::<Vec<_>>()))
                .collect();
            reconstruct(basis, &med)
        })
        .collect()
}
