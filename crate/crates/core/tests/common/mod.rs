#![allow(dead_code)]

use dcm_core::data::{DataSet, Outputs};
use dcm_core::kernels::{center_gram, gram, KernelSpec};
use dcm_core::linalg::principal_angles;
use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat<f64> {
    Mat::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// 2-D Gaussian inputs with continuous output `y = x₁ + noise`, spread over `domains` groups.
pub fn regression_toy(seed: u64, n: usize, domains: i64, noise: f64) -> DataSet {
    let mut r = rng(seed);
    let x = randn(&mut r, n, 2);
    let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] + noise * r.sample::<f64, _>(StandardNormal)).collect();
    let d: Vec<i64> = (0..n).map(|i| (i as i64 % domains) + 1).collect();
    DataSet::new(x, Outputs::Continuous(y), d).unwrap()
}

/// Binary labels from a noisy linear rule; each domain gets its own mean shift.
pub fn classification_toy(seed: u64, n: usize, domains: i64) -> DataSet {
    let mut r = rng(seed);
    let shifts: Vec<f64> = (0..domains).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    let d: Vec<i64> = (0..n).map(|i| (i as i64 % domains) + 1).collect();
    let mut x = randn(&mut r, n, 3);
    for i in 0..n {
        x[(i, 1)] += shifts[(d[i] - 1) as usize];
    }
    let y: Vec<i64> = (0..n)
        .map(|i| if x[(i, 0)] + 0.3 * r.sample::<f64, _>(StandardNormal) >= 0.0 { 1 } else { -1 })
        .collect();
    DataSet::new(x, Outputs::Discrete(y), d).unwrap()
}

pub fn centered_gram(spec: &KernelSpec, x: MatRef<'_, f64>) -> Mat<f64> {
    center_gram(gram(spec, x).unwrap().as_ref())
}

pub fn max_angle(b1: MatRef<'_, f64>, b2: MatRef<'_, f64>, metric: MatRef<'_, f64>) -> f64 {
    principal_angles(b1, b2, metric).unwrap().into_iter().fold(0.0, f64::max)
}

pub fn max_abs_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}
