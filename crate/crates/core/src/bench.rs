//! Wall-clock sweeps over sample size.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{synth_with_size, SynthConfig};
use crate::dcm::{Algorithm, KernelSet};
use crate::error::{Error, Result};
use crate::eval::{fit_method, ExperimentConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub landmarks: usize,
    pub algorithms: Vec<Algorithm>,
    pub epsilon: f64,
    pub gamma: f64,
    pub m: usize,
    pub seed: u64,
    /// Each timing is the minimum over this many fits.
    pub repeats: usize,
    /// Dense algorithms are skipped above this size.
    pub dense_max: Option<usize>,
    pub synth: SynthConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![1000, 2000, 4000, 8000],
            landmarks: 50,
            algorithms: vec![Algorithm::FastDcm],
            epsilon: 1e-3,
            gamma: 0.5,
            m: 2,
            seed: 0,
            repeats: 3,
            dense_max: None,
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub landmarks: usize,
    pub algorithm: String,
    pub seconds: f64,
}

/// Time `fit` for every (size, algorithm) pair on synthetic data of exactly that size.
pub fn bench_sweep(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.sizes.is_empty() || cfg.algorithms.is_empty() {
        return Err(Error::InvalidInput("bench needs at least one size and one algorithm".into()));
    }
    let exp = ExperimentConfig {
        epsilon: cfg.epsilon,
        gamma: cfg.gamma,
        m: cfg.m,
        landmarks: cfg.landmarks,
        ..ExperimentConfig::default()
    };
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        let data = synth_with_size(&cfg.synth.clone().with_seed(cfg.seed), n)?;
        let kernels = KernelSet::for_data(&data, cfg.gamma, None)?;
        for &alg in &cfg.algorithms {
            if !alg.is_fast() && cfg.dense_max.is_some_and(|cap| n > cap) {
                continue;
            }
            let mut best = f64::INFINITY;
            for _ in 0..cfg.repeats.max(1) {
                let t = Instant::now();
                fit_method(alg, &data, &kernels, &exp, cfg.seed)?;
                best = best.min(t.elapsed().as_secs_f64());
            }
            log::info!("bench: N = {n}, M = {}, {alg}: {best:.4} s", cfg.landmarks);
            rows.push(BenchRow { n, landmarks: cfg.landmarks, algorithm: alg.name().into(), seconds: best });
        }
    }
    Ok(rows)
}

/// Least-squares slope of `log t` against `log n`.
pub fn loglog_slope(ns: &[usize], ts: &[f64]) -> Result<f64> {
    if ns.len() != ts.len() || ns.len() < 2 {
        return Err(Error::InvalidInput("slope needs at least two (n, t) points".into()));
    }
    if ts.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidInput("slope needs positive timings".into()));
    }
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("n,landmarks,algorithm,seconds\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.n, r.landmarks, r.algorithm, r.seconds);
    }
    out
}

pub fn write_bench_csv(rows: &[BenchRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, bench_csv(rows)).map_err(|e| Error::io(path, e))
}
