use std::hint::black_box;
use std::path::PathBuf;

use agecomp::cluster::{bic_grid, EmOptions, Family};
use agecomp::image::image_rank_approx;
use agecomp::io::{load_schedule_csv, RgbImage};
use agecomp::linalg::{svd, Matrix};
use agecomp::par;
use agecomp::schedule::{concat_sexes, svd_weights};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("1 thread", one), ("all threads", all)]
}

fn batch_svd(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mats: Vec<Matrix> = (0..64)
        .map(|_| Matrix::new(40, 20, (0..800).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
        .collect();
    let mut g = c.benchmark_group("batch_svd_64x40x20");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| par::map(&mats, |m| svd(black_box(m)).unwrap().s[0])))
        });
    }
    g.finish();
}

fn gmm_grid(c: &mut Criterion) {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let f = load_schedule_csv(&data.join("mx_female.csv"), true).unwrap();
    let m = load_schedule_csv(&data.join("mx_male.csv"), true).unwrap();
    let w = svd_weights(&concat_sexes(&f, &m).unwrap(), 2).unwrap();
    let ks: Vec<usize> = (1..=6).collect();
    let opts = EmOptions::default();
    let mut g = c.benchmark_group("bic_grid_k1to6");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| bic_grid(black_box(&w), &ks, &Family::ALL, 0, &opts)))
        });
    }
    g.finish();
}

fn image(c: &mut Criterion) {
    let n = 96;
    let pixels = (0..n * n)
        .map(|i| {
            let (x, y) = ((i % n) as f64, (i / n) as f64);
            let r = 255.0 * x / n as f64;
            let g = 127.5 * (1.0 + (0.2 * x * y / n as f64).sin());
            let b = 255.0 * ((x - 40.0).hypot(y - 30.0) / n as f64).min(1.0);
            [r as u8, g as u8, b as u8]
        })
        .collect();
    let img = RgbImage::new(n, n, pixels).unwrap();
    let mut g = c.benchmark_group("image_rank16_96x96");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| image_rank_approx(black_box(&img), 16).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, batch_svd, gmm_grid, image);
criterion_main!(benches);
