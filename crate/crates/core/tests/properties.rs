use agecomp::cluster::{best_of_grid, bic_grid, fit_gmm_em, EmOptions, Family, GmmModel};
use agecomp::linalg::{canonicalize_signs, frobenius_residual, pearson, reconstruct_rank, svd, Matrix};
use agecomp::measures::{life_table_from_mx, parse_age_grid, tfr};
use agecomp::regress::{ols_fit, ols_fit_table, predict_schedule, CovariateTable};
use agecomp::schedule::{
    build_basis, error_metrics, fit_weights, fit_weights_lstsq, reconstruct, smooth_matrix,
    svd_weights, AgeSchedule, Scale, ScheduleMatrix,
};
use proptest::prelude::*;

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0..10.0f64, r * c).prop_map(move |v| Matrix::new(r, c, v).unwrap())
    })
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn schedule_matrix(max_groups: usize, max_cols: usize) -> impl Strategy<Value = ScheduleMatrix> {
    matrix(max_groups, max_cols).prop_map(|m| {
        let (g, h) = m.shape();
        ScheduleMatrix::new(labels("g", g), labels("y", h), m, Scale::Log).unwrap()
    })
}

fn orthonormal_gap(m: &Matrix) -> f64 {
    let g = m.gram();
    let mut worst = 0.0f64;
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - want).abs());
        }
    }
    worst
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn svd_is_orthonormal_and_round_trips(x in matrix(50, 50)) {
        let f = svd(&x).unwrap();
        prop_assert!(f.rank() >= 1);
        prop_assert!(orthonormal_gap(&f.u) < 1e-10);
        prop_assert!(orthonormal_gap(&f.v) < 1e-10);
        prop_assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(f.s.iter().all(|&s| s > 0.0));
        let back = reconstruct_rank(&f, f.rank()).unwrap();
        prop_assert!(frobenius_residual(&x, &back).unwrap() / x.frobenius_norm() < 1e-8);
    }

    #[test]
    fn signs_are_canonical(x in matrix(12, 12)) {
        let f = svd(&x).unwrap();
        for i in 0..f.rank() {
            let v = f.right_vector(i);
            let sum: f64 = v.iter().sum();
            let first = v.iter().copied().find(|e| e.abs() > 1e-12).unwrap();
            prop_assert!(sum > 0.0 || (sum.abs() <= 1e-12 && first > 0.0));
        }
        prop_assert_eq!(canonicalize_signs(f.clone()), f);
    }

    #[test]
    fn truncation_residual_is_the_tail(x in matrix(15, 15)) {
        let f = svd(&x).unwrap();
        let total: f64 = f.s.iter().map(|s| s * s).sum();
        for k in 1..f.rank() {
            let r = frobenius_residual(&x, &reconstruct_rank(&f, k).unwrap()).unwrap();
            let tail: f64 = f.s[k..].iter().map(|s| s * s).sum();
            prop_assert!((r * r - tail).abs() <= 1e-8 * tail.max(1e-6 * total));
        }
    }

    #[test]
    fn truncation_has_rank_at_most_k(x in matrix(10, 10), k in 1usize..4) {
        let f = svd(&x).unwrap();
        let k = k.min(f.rank());
        let low = svd(&reconstruct_rank(&f, k).unwrap()).unwrap();
        prop_assert!(low.rank() <= k);
    }

    #[test]
    fn weights_rebuild_columns_at_full_rank(a in schedule_matrix(12, 8)) {
        let f = svd(&a.data).unwrap();
        let c = f.rank();
        let basis = build_basis(&a, c).unwrap();
        let w = svd_weights(&a, c).unwrap();
        for h in 0..a.schedules() {
            let col = a.column(h);
            let scale = col.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            let rebuilt = reconstruct(&basis, w.row(h)).unwrap();
            prop_assert!(max_gap(&rebuilt.values, &col.values) < 1e-8 * scale);
            let fit = fit_weights(&col, &basis).unwrap();
            prop_assert!(max_gap(&fit.betas, w.row(h)) < 1e-8);
        }
    }

    #[test]
    fn projection_matches_general_least_squares(a in schedule_matrix(12, 8), c in 1usize..4) {
        let f = svd(&a.data).unwrap();
        let c = c.min(f.rank());
        let basis = build_basis(&a, c).unwrap();
        let cond = f.s[0] / f.s[c - 1];
        for h in 0..a.schedules() {
            let col = a.column(h);
            let p = fit_weights(&col, &basis).unwrap();
            let q = fit_weights_lstsq(&col, &basis).unwrap();
            let scale = p.betas.iter().fold(1.0f64, |m, b| m.max(b.abs()));
            prop_assert!(max_gap(&p.betas, &q.betas) <= 1e-10 * cond * scale);
        }
    }

    #[test]
    fn residual_shrinks_with_more_components(a in schedule_matrix(12, 8)) {
        let rank = svd(&a.data).unwrap().rank();
        let full = build_basis(&a, rank).unwrap();
        for h in 0..a.schedules() {
            let col = a.column(h);
            let mut last = f64::INFINITY;
            for c in 1..=rank {
                let r = fit_weights(&col, &full.truncate(c).unwrap()).unwrap().residual_norm;
                prop_assert!(r <= last * (1.0 + 1e-12) + 1e-12);
                last = r;
            }
        }
    }

    #[test]
    fn smoothing_has_rank_at_most_c(a in schedule_matrix(12, 8), c in 1usize..4) {
        let c = c.min(svd(&a.data).unwrap().rank());
        let s = smooth_matrix(&a, c).unwrap();
        prop_assert!(svd(&s.data).unwrap().rank() <= c);
    }

    #[test]
    fn error_quantiles_are_ordered(a in schedule_matrix(10, 6), c in 1usize..3) {
        let c = c.min(svd(&a.data).unwrap().rank());
        let s = smooth_matrix(&a, c).unwrap();
        let e = error_metrics(&s, &a).unwrap();
        prop_assert!(e.quantiles[0] >= 0.0);
        prop_assert!(e.quantiles.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(e.mae >= 0.0 && e.mae <= max_gap(s.data.as_slice(), a.data.as_slice()));
    }
}

fn design() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (8usize..40, 1usize..4).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(prop::collection::vec(-3.0..3.0f64, n), p),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ols_matches_normal_equations((y, xs) in design()) {
        let named: Vec<(String, &[f64])> =
            xs.iter().enumerate().map(|(j, x)| (format!("x{j}"), x.as_slice())).collect();
        let preds: Vec<(&str, &[f64])> = named.iter().map(|(n, x)| (n.as_str(), *x)).collect();
        let m = ols_fit(&y, &preds, true).unwrap();

        let n = y.len();
        let p = xs.len() + 1;
        let x = nalgebra::DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { xs[j - 1][i] });
        let yv = nalgebra::DVector::from_column_slice(&y);
        let xtx = x.transpose() * &x;
        let oracle = xtx.clone().lu().solve(&(x.transpose() * &yv)).unwrap();
        let cond = {
            let e = xtx.symmetric_eigenvalues();
            e.max() / e.min()
        };
        prop_assume!(cond < 1e6);
        for j in 0..p {
            prop_assert!((m.coefficients[j] - oracle[j]).abs() < 1e-10 * oracle.amax().max(1.0));
        }

        // residuals orthogonal to the design, summing to zero
        let resid = &m.residuals;
        prop_assert!(resid.iter().sum::<f64>().abs() < 1e-8 * (n as f64).sqrt() * (1.0 + y.iter().map(|v| v.abs()).sum::<f64>()));
        for xj in &xs {
            let d: f64 = xj.iter().zip(resid).map(|(a, b)| a * b).sum();
            let scale = xj.iter().map(|v| v * v).sum::<f64>().sqrt()
                * resid.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(d.abs() <= 1e-8 * scale.max(1e-12));
        }

        // R² is the squared correlation of fitted and observed
        let fitted: Vec<f64> = y.iter().zip(resid).map(|(a, e)| a - e).collect();
        let r = pearson(&fitted, &y).unwrap();
        prop_assert!((m.r_squared - r * r).abs() < 1e-10);
        prop_assert!((0.0..=1.0).contains(&m.r_squared));
        for j in 0..p {
            if m.standard_errors[j] > 0.0 {
                prop_assert!((m.t_values[j] - m.coefficients[j] / m.standard_errors[j]).abs() < 1e-9 * m.t_values[j].abs().max(1.0));
            }
            prop_assert!((0.0..=1.0).contains(&m.p_values[j]));
        }
    }

    #[test]
    fn predictions_ignore_a_joint_sign_flip(
        data in prop::collection::vec(-6.0..-0.5f64, 8 * 10),
        cov in prop::collection::vec(0.0..10.0f64, 10),
        which in 0usize..2,
    ) {
        let m = Matrix::new(8, 10, data).unwrap();
        let a = ScheduleMatrix::new(labels("g", 8), labels("y", 10), m, Scale::Log).unwrap();
        let mut table = CovariateTable::new(a.schedule_labels.clone()).unwrap();
        table.insert("x", cov.into_iter().map(Some).collect()).unwrap();

        let basis = build_basis(&a, 2).unwrap();
        let w = svd_weights(&a, 2).unwrap();
        let fit = |w: &Matrix| -> Vec<_> {
            (0..2)
                .map(|i| ols_fit_table(&w.column(i), &a.schedule_labels, &table, &["x"], true).unwrap())
                .collect()
        };
        let models = fit(&w);

        let mut flipped_basis = basis.clone();
        flipped_basis.components[which].iter_mut().for_each(|v| *v = -*v);
        let flipped_w = Matrix::from_columns(
            &(0..2)
                .map(|i| {
                    let c = w.column(i);
                    if i == which { c.iter().map(|v| -v).collect() } else { c }
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let flipped_models = fit(&flipped_w);

        for y in &a.schedule_labels {
            let p = predict_schedule(&basis, &models, table.row(y).unwrap()).unwrap();
            let q = predict_schedule(&flipped_basis, &flipped_models, table.row(y).unwrap()).unwrap();
            prop_assert!(max_gap(&p.values, &q.values) < 1e-12);
        }
    }
}

fn cloud() -> impl Strategy<Value = Matrix> {
    (10usize..30, 1usize..4).prop_flat_map(|(n, centres)| {
        prop::collection::vec((0..centres, -1.0..1.0f64, -1.0..1.0f64), n).prop_map(|pts| {
            let rows: Vec<Vec<f64>> = pts
                .into_iter()
                .map(|(c, dx, dy)| vec![4.0 * c as f64 + dx, -3.0 * c as f64 + dy])
                .collect();
            Matrix::from_rows(&rows).unwrap()
        })
    })
}

fn family() -> impl Strategy<Value = Family> {
    prop::sample::select(Family::ALL.to_vec())
}

fn permuted(m: &GmmModel, perm: &[usize]) -> GmmModel {
    GmmModel {
        weights: perm.iter().map(|&j| m.weights[j]).collect(),
        means: perm.iter().map(|&j| m.means[j].clone()).collect(),
        covariances: perm.iter().map(|&j| m.covariances[j].clone()).collect(),
        ..m.clone()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn em_is_monotone_and_well_formed(x in cloud(), k in 1usize..4, fam in family(), seed in 0u64..1000) {
        let m = fit_gmm_em(&x, k, fam, seed).unwrap();
        for w in m.ll_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10 * w[0].abs().max(1.0));
        }
        prop_assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(m.weights.iter().all(|&w| w > 0.0));
        for c in &m.covariances {
            prop_assert!(frobenius_residual(c, &c.transpose()).unwrap() < 1e-12);
            let f = svd(c).unwrap();
            prop_assert_eq!(f.rank(), m.d);
        }
        let bic = -2.0 * m.log_likelihood + m.n_params as f64 * (m.n as f64).ln();
        prop_assert!((m.bic - bic).abs() < 1e-9 * bic.abs().max(1.0));

        let a = m.assign(&x).unwrap();
        for i in 0..x.rows() {
            let row = a.responsibilities.row(i);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(row[a.labels[i] - 1], best);
        }
    }

    #[test]
    fn fits_are_deterministic(x in cloud(), k in 1usize..4, fam in family(), seed in 0u64..1000) {
        prop_assert_eq!(fit_gmm_em(&x, k, fam, seed).unwrap(), fit_gmm_em(&x, k, fam, seed).unwrap());
    }

    #[test]
    fn relabelling_components_keeps_the_partition(x in cloud(), k in 2usize..4, seed in 0u64..1000) {
        let m = fit_gmm_em(&x, k, Family::Full, seed).unwrap();
        let mut perm: Vec<usize> = (0..k).collect();
        perm.rotate_left(1);
        let a = m.assign(&x).unwrap();
        let b = permuted(&m, &perm).assign(&x).unwrap();
        prop_assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn selected_bic_is_minimal(x in cloud(), seed in 0u64..1000) {
        let grid = bic_grid(&x, &[1, 2, 3], &Family::ALL, seed, &EmOptions::default());
        let bics: Vec<(f64, bool)> = grid
            .iter()
            .filter_map(|e| e.model.as_ref().ok().map(|m| (m.bic, m.degenerate)))
            .collect();
        let best = best_of_grid(grid).unwrap();
        for (bic, degenerate) in bics {
            if degenerate == best.degenerate {
                prop_assert!(best.bic <= bic + 1e-9 * bic.abs().max(1.0));
            }
        }
    }
}

const GRID: [&str; 19] = [
    "0", "1-4", "5-9", "10-14", "15-19", "20-24", "25-29", "30-34", "35-39", "40-44", "45-49",
    "50-54", "55-59", "60-64", "65-69", "70-74", "75-79", "80-84", "85+",
];

fn mx_schedule(values: Vec<f64>) -> AgeSchedule {
    AgeSchedule::new(GRID.iter().map(|s| s.to_string()).collect(), values, Scale::Natural).unwrap()
}

// Above 1/aₓ (0.4 for five-year groups) qx saturates at 1 and the table
// ends early, so rates stay below that.
fn rates() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-4..0.35f64, 19)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn life_table_is_consistent(mx in rates()) {
        let groups = parse_age_grid(&GRID.map(String::from)).unwrap();
        let lt = life_table_from_mx(&mx_schedule(mx), &groups).unwrap();
        prop_assert!(lt.lx.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(lt.tx.windows(2).all(|w| w[1] < w[0]));
        prop_assert!(lt.qx.iter().all(|q| (0.0..=1.0).contains(q)));
        prop_assert_eq!(*lt.qx.last().unwrap(), 1.0);
        for i in 0..19 {
            let tail: f64 = lt.big_lx[i..].iter().sum();
            prop_assert!((lt.tx[i] - tail).abs() < 1e-12 * tail.max(1.0));
            prop_assert!((lt.ex[i] - lt.tx[i] / lt.lx[i]).abs() < 1e-12 * lt.ex[i].max(1.0));
        }
    }

    #[test]
    fn e0_falls_when_any_rate_rises(
        mx in rates(),
        i in 0usize..19,
        factor in 1.01..1.14f64,
    ) {
        let groups = parse_age_grid(&GRID.map(String::from)).unwrap();
        let base = life_table_from_mx(&mx_schedule(mx.clone()), &groups).unwrap().e0();
        let mut worse = mx;
        worse[i] *= factor;
        let e0 = life_table_from_mx(&mx_schedule(worse), &groups).unwrap().e0();
        prop_assert!(e0 < base);
    }

    #[test]
    fn tfr_is_linear(
        a in prop::collection::vec(0.0..0.4f64, 7),
        b in prop::collection::vec(0.0..0.4f64, 7),
    ) {
        let grid: Vec<String> = (0..7).map(|i| format!("{}-{}", 15 + 5 * i, 19 + 5 * i)).collect();
        let s = |v: Vec<f64>| AgeSchedule::new(grid.clone(), v, Scale::Natural).unwrap();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let lhs = tfr(&s(sum), 5.0).unwrap();
        let rhs = tfr(&s(a), 5.0).unwrap() + tfr(&s(b), 5.0).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }
}
