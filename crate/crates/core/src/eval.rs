//! Downstream prediction on projected features and the repeated-split
//! experiment runner.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use faer::{Mat, MatRef, Side};
use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{split_domains, synth_generate, DataSet, LabelKind, Outputs, SynthConfig};
use crate::dcm::{fit_coir_with, fit_dcm_with, fit_kpca, Algorithm, KernelSet, ProjectionModel, SolverMode};
use crate::error::{Error, Result};
use crate::fast::{fit_fastcoir, fit_fastdcm};
use crate::kernels::{center_cross_with_means, center_gram, cross_gram, gram, row_means};
use crate::metrics::{classify, metric_auc, metric_rmse, Confusion};

/// Ridge-regularized affine predictor `f ↦ wᵀf + b`; the intercept is not
/// penalized.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictor {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Regularization actually used (larger than requested after a fallback).
    pub lambda: f64,
}

impl LinearPredictor {
    /// Scores for an `m × N` feature matrix.
    pub fn predict(&self, features: MatRef<'_, f64>) -> Vec<f64> {
        (0..features.ncols())
            .map(|j| self.intercept + (0..features.nrows()).map(|i| self.weights[i] * features[(i, j)]).sum::<f64>())
            .collect()
    }
}

/// Fit `w, b` minimizing `‖Fᵀw + b − t‖² + λ‖w‖²` on an `m × N` feature matrix.
pub fn krr_fit(features: MatRef<'_, f64>, targets: &[f64], lambda: f64) -> Result<LinearPredictor> {
    let (m, n) = (features.nrows(), features.ncols());
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    if targets.len() != n || n == 0 {
        return Err(Error::InvalidInput(format!("{n} samples but {} targets", targets.len())));
    }
    let tbar = targets.iter().sum::<f64>() / n as f64;
    let fbar: Vec<f64> = (0..m).map(|i| (0..n).map(|j| features[(i, j)]).sum::<f64>() / n as f64).collect();
    let fc = Mat::from_fn(m, n, |i, j| features[(i, j)] - fbar[i]);
    let tc = Mat::from_fn(n, 1, |j, _| targets[j] - tbar);
    let gram = &fc * fc.transpose();
    let rhs = &fc * &tc;
    let mut lam = lambda;
    for attempt in 0..8 {
        let mut g = gram.clone();
        for i in 0..m {
            g[(i, i)] += lam;
        }
        if let Ok(llt) = g.llt(Side::Lower) {
            use faer::linalg::solvers::Solve;
            let w = llt.solve(&rhs);
            if w.as_ref().is_all_finite() {
                let weights: Vec<f64> = (0..m).map(|i| w[(i, 0)]).collect();
                let intercept = tbar - weights.iter().zip(&fbar).map(|(a, b)| a * b).sum::<f64>();
                return Ok(LinearPredictor { weights, intercept, lambda: lam });
            }
        }
        let next = lam * 10.0;
        warn!("krr_fit: feature Gram not positive definite at λ = {lam:.3e} (attempt {attempt}); retrying with λ = {next:.3e}");
        lam = next;
    }
    Err(Error::RankDeficient(format!("krr_fit: feature matrix degenerate even at λ = {lam:.3e}")))
}

/// A projection algorithm, or ridge prediction straight on centered kernel features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Projection(Algorithm),
    Baseline,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Projection(a) => a.name(),
            Method::Baseline => "baseline",
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("baseline") {
            Ok(Method::Baseline)
        } else {
            Algorithm::from_str(s).map(Method::Projection)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Percentage of correctly classified test samples.
    Accuracy,
    Auc,
    Gmean,
    Rmse,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Auc => "auc",
            Metric::Gmean => "gmean",
            Metric::Rmse => "rmse",
        }
    }

    pub fn defaults_for(kind: LabelKind) -> Vec<Metric> {
        match kind {
            LabelKind::Discrete => vec![Metric::Accuracy, Metric::Auc, Metric::Gmean],
            LabelKind::Continuous => vec![Metric::Rmse],
        }
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "accuracy" | "acc" => Ok(Metric::Accuracy),
            "auc" => Ok(Metric::Auc),
            "gmean" | "g-mean" => Ok(Metric::Gmean),
            "rmse" => Ok(Metric::Rmse),
            _ => Err(Error::InvalidInput(format!("unknown metric '{s}'"))),
        }
    }
}

/// Protocol of a repeated domain-split experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub epsilon: f64,
    pub gamma: f64,
    pub gamma_y: Option<f64>,
    pub m: usize,
    /// Landmark count for the fast algorithms.
    pub landmarks: usize,
    pub seed: u64,
    pub reps: usize,
    /// Number of domains used for training in each split.
    pub train_domains: usize,
    /// Ridge penalty of the downstream predictor.
    pub lambda: f64,
    pub solver: SolverMode,
    /// Empty means the defaults for the label kind.
    pub metrics: Vec<Metric>,
    /// Data generator, redrawn with seed `seed + i` in repetition `i`.
    /// Ignored when a fixed dataset is supplied.
    pub synth: SynthConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: vec![Method::Projection(Algorithm::Dcm), Method::Projection(Algorithm::Coir), Method::Baseline],
            epsilon: 1e-3,
            gamma: 0.5,
            gamma_y: None,
            m: 2,
            landmarks: 50,
            seed: 0,
            reps: 20,
            train_domains: 7,
            lambda: 1.0,
            solver: SolverMode::Regularized,
            metrics: Vec::new(),
            synth: SynthConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.reps as u64).map(|i| self.seed + i).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods to evaluate".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidInput("need at least one repetition".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidInput("m must be at least 1".into()));
        }
        let fast = self.methods.iter().any(|m| matches!(m, Method::Projection(a) if a.is_fast()));
        if fast && self.m > self.landmarks {
            return Err(Error::InvalidInput(format!("m = {} exceeds M = {}", self.m, self.landmarks)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and sample standard deviation (0 for a single value), summed in index order.
    pub fn of(v: &[f64]) -> Stat {
        let n = v.len();
        if n == 0 {
            return Stat { mean: f64::NAN, std: 0.0 };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub method: String,
    pub n_train: usize,
    pub n_test: usize,
    pub test_domains: Vec<i64>,
    pub metrics: BTreeMap<String, f64>,
    pub seconds: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub metrics: BTreeMap<String, Stat>,
    pub seconds: BTreeMap<String, Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub repetitions: usize,
    pub summaries: Vec<MethodSummary>,
    pub records: Vec<RepRecord>,
}

impl EvalReport {
    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn mean(&self, method: &str, metric: Metric) -> Option<f64> {
        self.summary(method)?.metrics.get(metric.name()).map(|s| s.mean)
    }

    /// Copy with all wall-clock entries removed; the remainder is a pure
    /// function of the configuration.
    pub fn without_timing(&self) -> EvalReport {
        let mut r = self.clone();
        r.summaries.iter_mut().for_each(|s| s.seconds.clear());
        r.records.iter_mut().for_each(|s| s.seconds.clear());
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text table: one row per method, `mean ± std` per metric.
    pub fn to_text(&self) -> String {
        let metrics: Vec<String> = self
            .summaries
            .first()
            .map(|s| s.metrics.keys().cloned().collect())
            .unwrap_or_default();
        let stages = ["fit", "transform", "predict"];
        let mut header = vec!["method".to_string()];
        header.extend(metrics.iter().cloned());
        header.extend(stages.iter().map(|s| format!("{s} (s)")));
        let mut rows = vec![header];
        for s in &self.summaries {
            let mut row = vec![s.method.clone()];
            for m in &metrics {
                let st = s.metrics[m];
                row.push(format!("{:.4} ± {:.4}", st.mean, st.std));
            }
            for st in stages {
                row.push(s.seconds.get(st).map_or("-".into(), |t| format!("{:.4}", t.mean)));
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} repetitions, seeds {}..={}, epsilon {}, gamma {}, m {}, M {}",
            self.repetitions,
            self.seeds.first().copied().unwrap_or(0),
            self.seeds.last().copied().unwrap_or(0),
            self.config.epsilon,
            self.config.gamma,
            self.config.m,
            self.config.landmarks
        );
        for (k, r) in rows.iter().enumerate() {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, &w))| {
                    let pad = w - cell.chars().count();
                    if c == 0 {
                        format!("{cell}{}", " ".repeat(pad))
                    } else {
                        format!("{}{cell}", " ".repeat(pad))
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", line.join("  "));
            if k == 0 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
        }
        out
    }

    /// One CSV row per (repetition, method).
    pub fn to_csv(&self) -> String {
        let metrics: Vec<String> = self
            .records
            .first()
            .map(|r| r.metrics.keys().cloned().collect())
            .unwrap_or_default();
        let stages: Vec<String> = self
            .records
            .first()
            .map(|r| r.seconds.keys().cloned().collect())
            .unwrap_or_default();
        let mut out = String::from("rep,seed,method,n_train,n_test");
        for m in &metrics {
            out.push(',');
            out.push_str(m);
        }
        for s in &stages {
            let _ = write!(out, ",{s}_seconds");
        }
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{},{},{},{},{}", r.rep, r.seed, r.method, r.n_train, r.n_test);
            for m in &metrics {
                let _ = write!(out, ",{}", r.metrics[m]);
            }
            for s in &stages {
                let _ = write!(out, ",{}", r.seconds.get(s).copied().unwrap_or(f64::NAN));
            }
            out.push('\n');
        }
        out
    }

    /// Write `<stem>.json`, `<stem>.txt` and `<stem>.csv`.
    pub fn write_all(&self, stem: impl AsRef<Path>) -> Result<()> {
        let stem = stem.as_ref();
        for (ext, body) in [("json", self.to_json()), ("txt", self.to_text()), ("csv", self.to_csv())] {
            let p = stem.with_extension(ext);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Map binary discrete labels to ±1 (smaller class label → −1).
pub fn binary_labels(y: &Outputs) -> Result<(i64, i64)> {
    let Outputs::Discrete(v) = y else {
        return Err(Error::InvalidInput("classification needs discrete labels".into()));
    };
    if v.iter().all(|&c| c == 1 || c == -1) {
        return Ok((-1, 1));
    }
    let mut classes: Vec<i64> = v.clone();
    classes.sort_unstable();
    classes.dedup();
    match classes.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::InvalidInput(format!(
            "binary classification only; found {} classes",
            classes.len()
        ))),
    }
}

/// Regression targets, or ±1 class targets when `classes` is given.
fn targets(y: &Outputs, classes: Option<(i64, i64)>) -> Vec<f64> {
    match (y, classes) {
        (Outputs::Discrete(v), Some(c)) => v.iter().map(|&l| if l == c.1 { 1.0 } else { -1.0 }).collect(),
        _ => y.as_f64(),
    }
}

fn score(scores: &[f64], truth: &[f64], classification: bool, metrics: &[Metric]) -> Result<BTreeMap<String, f64>> {
    let labels: Vec<i64> = truth.iter().map(|&v| if v < 0.0 { -1 } else { 1 }).collect();
    let mut out = BTreeMap::new();
    for &metric in metrics {
        let v = match metric {
            Metric::Rmse => metric_rmse(scores, truth)?,
            _ if !classification => {
                return Err(Error::UndefinedMetric(format!("{} needs discrete labels", metric.name())));
            }
            Metric::Accuracy => 100.0 * Confusion::from_labels(&classify(scores), &labels)?.accuracy(),
            Metric::Gmean => Confusion::from_labels(&classify(scores), &labels)?.gmean()?,
            Metric::Auc => metric_auc(scores, &labels)?,
        };
        out.insert(metric.name().to_string(), v);
    }
    Ok(out)
}

/// Fit one projection algorithm with the experiment's parameters.
pub fn fit_method(
    algorithm: Algorithm,
    data: &DataSet,
    kernels: &KernelSet,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<ProjectionModel> {
    match algorithm {
        Algorithm::Dcm => fit_dcm_with(data, kernels, cfg.epsilon, cfg.m, cfg.solver),
        Algorithm::Coir => fit_coir_with(data, kernels, cfg.epsilon, cfg.m, cfg.solver),
        Algorithm::Kpca => fit_kpca(data, &kernels.x, cfg.m),
        Algorithm::FastDcm => fit_fastdcm(data, kernels, cfg.epsilon, cfg.m, cfg.landmarks, seed),
        Algorithm::FastCoir => fit_fastcoir(data, kernels, cfg.epsilon, cfg.m, cfg.landmarks, seed),
    }
}

struct Features {
    train: Mat<f64>,
    test: Mat<f64>,
    fit_s: f64,
    transform_s: f64,
}

fn features_for(method: Method, train: &DataSet, test: &DataSet, kernels: &KernelSet, cfg: &ExperimentConfig, seed: u64) -> Result<Features> {
    match method {
        Method::Projection(a) => {
            let t0 = Instant::now();
            let model = fit_method(a, train, kernels, cfg, seed)?;
            let fit_s = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let ftr = model.transform(train.x.as_ref())?;
            let fte = model.transform(test.x.as_ref())?;
            Ok(Features { train: ftr, test: fte, fit_s, transform_s: t1.elapsed().as_secs_f64() })
        }
        Method::Baseline => {
            // Centered kernel columns, with test columns centered by training statistics.
            let t0 = Instant::now();
            let k = gram(&kernels.x, train.x.as_ref())?;
            let means = row_means(k.as_ref());
            let ftr = center_gram(k.as_ref());
            let fit_s = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let kz = cross_gram(&kernels.x, train.x.as_ref(), test.x.as_ref())?;
            let fte = center_cross_with_means(kz.as_ref(), &means);
            Ok(Features { train: ftr, test: fte, fit_s, transform_s: t1.elapsed().as_secs_f64() })
        }
    }
}

/// Shuffle the observed domains with the repetition seed and take the first
/// `train_domains` for training.
pub fn choose_train_domains(data: &DataSet, train_domains: usize, seed: u64) -> Result<Vec<i64>> {
    let mut domains = data.domains();
    if train_domains == 0 || train_domains >= domains.len() {
        return Err(Error::InvalidInput(format!(
            "cannot train on {train_domains} of {} domains",
            domains.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    domains.shuffle(&mut rng);
    let mut chosen = domains[..train_domains].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

fn run_rep(rep: usize, seed: u64, data: &DataSet, cfg: &ExperimentConfig, metrics: &[Metric]) -> Result<Vec<RepRecord>> {
    let train_ids = choose_train_domains(data, cfg.train_domains, seed)?;
    let (train, test) = split_domains(data, &train_ids)?;
    let test_domains = test.domains();
    let kernels = KernelSet::for_data(&train, cfg.gamma, cfg.gamma_y)?;
    let classes = match data.y.kind() {
        LabelKind::Discrete => Some(binary_labels(&data.y)?),
        LabelKind::Continuous => None,
    };
    let (t_train, t_test) = (targets(&train.y, classes), targets(&test.y, classes));

    let mut out = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let f = features_for(method, &train, &test, &kernels, cfg, seed)?;
        let t2 = Instant::now();
        let pred = krr_fit(f.train.as_ref(), &t_train, cfg.lambda)?;
        let scores = pred.predict(f.test.as_ref());
        let predict_s = t2.elapsed().as_secs_f64();

        let values = score(&scores, &t_test, classes.is_some(), metrics)?;
        let seconds = BTreeMap::from([
            ("fit".to_string(), f.fit_s),
            ("transform".to_string(), f.transform_s),
            ("predict".to_string(), predict_s),
        ]);
        out.push(RepRecord {
            rep,
            seed,
            method: method.name().to_string(),
            n_train: train.n(),
            n_test: test.n(),
            test_domains: test_domains.clone(),
            metrics: values,
            seconds,
        });
    }
    Ok(out)
}

/// Run `cfg.reps` repetitions with seeds `seed, seed+1, …`. Each repetition
/// draws fresh synthetic data (or reuses `fixed`) and a fresh domain split;
/// every method sees the same split.
pub fn run_experiment(cfg: &ExperimentConfig, fixed: Option<&DataSet>) -> Result<EvalReport> {
    cfg.validate()?;
    let kind = fixed.map_or(LabelKind::Discrete, |d| d.y.kind());
    let metrics = if cfg.metrics.is_empty() { Metric::defaults_for(kind) } else { cfg.metrics.clone() };
    let seeds = cfg.seeds();
    let mut records = Vec::new();
    for (rep, &seed) in seeds.iter().enumerate() {
        let tag = |e: Error| Error::Repetition { rep, seed, source: Box::new(e) };
        let owned;
        let data = match fixed {
            Some(d) => d,
            None => {
                owned = synth_generate(&cfg.synth.clone().with_seed(seed)).map_err(tag)?;
                &owned
            }
        };
        records.extend(run_rep(rep, seed, data, cfg, &metrics).map_err(tag)?);
    }
    let summaries = cfg
        .methods
        .iter()
        .map(|m| {
            let rows: Vec<&RepRecord> = records.iter().filter(|r| r.method == m.name()).collect();
            let stat = |get: &dyn Fn(&RepRecord) -> Option<f64>| Stat::of(&rows.iter().filter_map(|r| get(r)).collect::<Vec<_>>());
            let metrics_s = metrics
                .iter()
                .map(|k| (k.name().to_string(), stat(&|r| r.metrics.get(k.name()).copied())))
                .collect();
            let seconds = ["fit", "transform", "predict"]
                .iter()
                .map(|k| (k.to_string(), stat(&|r| r.seconds.get(*k).copied())))
                .collect();
            MethodSummary { method: m.name().to_string(), metrics: metrics_s, seconds }
        })
        .collect();
    Ok(EvalReport { config: cfg.clone(), seeds, repetitions: cfg.reps, summaries, records })
}

/// Evaluate a fitted model: transform both sets, fit the downstream predictor
/// on `train`, and score `test`.
pub fn evaluate_model(model: &ProjectionModel, train: &DataSet, test: &DataSet, lambda: f64, metrics: &[Metric]) -> Result<BTreeMap<String, f64>> {
    let ftr = model.transform(train.x.as_ref())?;
    let fte = model.transform(test.x.as_ref())?;
    let classes = match train.y.kind() {
        LabelKind::Discrete => Some(binary_labels(&train.y)?),
        LabelKind::Continuous => None,
    };
    let (t_train, t_test) = (targets(&train.y, classes), targets(&test.y, classes));
    let pred = krr_fit(ftr.as_ref(), &t_train, lambda)?;
    let scores = pred.predict(fte.as_ref());
    score(&scores, &t_test, classes.is_some(), metrics)
}
