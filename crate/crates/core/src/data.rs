//! Multi-domain datasets: synthetic generation and CSV ingestion.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use faer::Mat;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outputs {
    Discrete(Vec<i64>),
    Continuous(Vec<f64>),
}

impl Outputs {
    pub fn len(&self) -> usize {
        match self {
            Outputs::Discrete(v) => v.len(),
            Outputs::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> LabelKind {
        match self {
            Outputs::Discrete(_) => LabelKind::Discrete,
            Outputs::Continuous(_) => LabelKind::Continuous,
        }
    }

    pub fn as_f64(&self) -> Vec<f64> {
        match self {
            Outputs::Discrete(v) => v.iter().map(|&c| c as f64).collect(),
            Outputs::Continuous(v) => v.clone(),
        }
    }

    fn select(&self, idx: &[usize]) -> Outputs {
        match self {
            Outputs::Discrete(v) => Outputs::Discrete(idx.iter().map(|&i| v[i]).collect()),
            Outputs::Continuous(v) => Outputs::Continuous(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Samples `(x_i, y_i, d_i)`, one row of `x` per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub x: Mat<f64>,
    pub y: Outputs,
    pub d: Vec<i64>,
    pub feature_names: Vec<String>,
}

impl DataSet {
    pub fn new(x: Mat<f64>, y: Outputs, d: Vec<i64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(x, y, d, names)
    }

    pub fn with_names(x: Mat<f64>, y: Outputs, d: Vec<i64>, feature_names: Vec<String>) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("dataset has no samples".into()));
        }
        if y.len() != n || d.len() != n {
            return Err(Error::InvalidInput(format!(
                "dataset has {n} inputs, {} outputs and {} domain labels",
                y.len(),
                d.len()
            )));
        }
        if feature_names.len() != x.ncols() {
            return Err(Error::InvalidInput(format!(
                "{} feature names for {} features",
                feature_names.len(),
                x.ncols()
            )));
        }
        Ok(DataSet { x, y, d, feature_names })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn domain_sizes(&self) -> BTreeMap<i64, usize> {
        let mut m = BTreeMap::new();
        for &d in &self.d {
            *m.entry(d).or_insert(0) += 1;
        }
        m
    }

    pub fn domains(&self) -> Vec<i64> {
        self.domain_sizes().into_keys().collect()
    }

    /// Outputs as an `N × 1` matrix, the item layout the kernels expect.
    pub fn y_items(&self) -> Mat<f64> {
        let y = self.y.as_f64();
        Mat::from_fn(y.len(), 1, |i, _| y[i])
    }

    pub fn d_items(&self) -> Mat<f64> {
        Mat::from_fn(self.d.len(), 1, |i, _| self.d[i] as f64)
    }

    /// Rows `idx` in the given order.
    pub fn select(&self, idx: &[usize]) -> DataSet {
        DataSet {
            x: Mat::from_fn(idx.len(), self.dim(), |i, j| self.x[(idx[i], j)]),
            y: self.y.select(idx),
            d: idx.iter().map(|&i| self.d[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Parameters of the Wishart/Poisson synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Number of domains `T`.
    pub domains: usize,
    /// Feature dimension `n`.
    pub dim: usize,
    /// Wishart scale: covariances are drawn from `W(η·I, n)`.
    pub eta: f64,
    /// Poisson mean of the per-domain sample count.
    pub mean_count: f64,
    pub seed: u64,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub c: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let dim = 10;
        let (b1, b2) = default_weights(dim);
        SynthConfig { domains: 10, dim, eta: 0.5, mean_count: 100.0, seed: 0, b1, b2, c: 0.5 }
    }
}

impl SynthConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains == 0 || self.dim == 0 {
            return Err(Error::InvalidInput("synthetic config needs T ≥ 1 and n ≥ 1".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidInput(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.mean_count >= 1.0 && self.mean_count.is_finite()) {
            return Err(Error::InvalidInput(format!("mean_count must be ≥ 1, got {}", self.mean_count)));
        }
        if self.b1.len() != self.dim || self.b2.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "b1/b2 have lengths {}/{}, expected {}",
                self.b1.len(),
                self.b2.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// Unit-norm label weights `b₁, b₂` drawn from a fixed seed-0 stream.
pub fn default_weights(dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut unit = || {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        v.into_iter().map(|t| t / norm).collect::<Vec<f64>>()
    };
    let b1 = unit();
    let b2 = unit();
    (b1, b2)
}

/// `A` (`dof × n`, entries `N(0, η)`); `AᵀA ~ W(η·I, dof)`.
fn wishart_factor<R: Rng + ?Sized>(eta: f64, n: usize, dof: usize, rng: &mut R) -> Mat<f64> {
    let normal = Normal::new(0.0, eta.sqrt()).expect("eta validated positive");
    let mut a = Mat::zeros(dof, n);
    for i in 0..dof {
        for j in 0..n {
            a[(i, j)] = normal.sample(rng);
        }
    }
    a
}

/// One draw from the Wishart distribution `W(η·I_n, dof)`.
pub fn sample_wishart<R: Rng + ?Sized>(eta: f64, n: usize, dof: usize, rng: &mut R) -> Mat<f64> {
    let a = wishart_factor(eta, n, dof, rng);
    let mut s = a.transpose() * &a;
    crate::linalg::symmetrize(&mut s);
    s
}

/// `sgn` with `sgn(0) = +1`.
#[inline]
fn sgn(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Per-domain draw: the domain's RNG stream positioned after its sample count
/// and Wishart factor `A` (so `Σ_t = AᵀA`).
fn domain_setup(cfg: &SynthConfig, poisson: &Poisson<f64>, t: usize) -> (ChaCha8Rng, usize, Mat<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(t as u64);
    let count = loop {
        let k = poisson.sample(&mut rng) as usize;
        if k > 0 {
            break k;
        }
    };
    let a = wishart_factor(cfg.eta, cfg.dim, cfg.dim, &mut rng);
    (rng, count, a)
}

fn poisson_for(cfg: &SynthConfig) -> Result<Poisson<f64>> {
    cfg.validate()?;
    Poisson::new(cfg.mean_count).map_err(|e| Error::InvalidInput(format!("Poisson mean {}: {e}", cfg.mean_count)))
}

/// The covariances `Σ_t` that `synth_generate` samples domain `t + 1` from.
pub fn synth_covariances(cfg: &SynthConfig) -> Result<Vec<Mat<f64>>> {
    let poisson = poisson_for(cfg)?;
    Ok((0..cfg.domains)
        .map(|t| {
            let (_, _, a) = domain_setup(cfg, &poisson, t);
            let mut s = a.transpose() * &a;
            crate::linalg::symmetrize(&mut s);
            s
        })
        .collect())
}

/// Generate the multi-domain benchmark. Domain `t` draws from its own
/// ChaCha stream, so its samples do not depend on `T`.
pub fn synth_generate(cfg: &SynthConfig) -> Result<DataSet> {
    let poisson = poisson_for(cfg)?;
    let n = cfg.dim;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut domains = Vec::new();
    for t in 0..cfg.domains {
        let (mut rng, count, a) = domain_setup(cfg, &poisson, t);
        // x = Aᵀw with w ~ N(0, I) has covariance AᵀA = Σ_t.
        for _ in 0..count {
            let w: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let x: Vec<f64> = (0..n).map(|j| (0..n).map(|i| a[(i, j)] * w[i]).sum()).collect();
            let e1: f64 = rng.sample(StandardNormal);
            let e2: f64 = rng.sample(StandardNormal);
            let p1: f64 = x.iter().zip(&cfg.b1).map(|(u, v)| u * v).sum::<f64>() + e1;
            let p2: f64 = x.iter().zip(&cfg.b2).map(|(u, v)| u * v).sum::<f64>() + e2;
            let y = sgn(sgn(p1) * (p2.abs() + cfg.c).ln());
            rows.push(x);
            labels.push(y as i64);
            domains.push(t as i64 + 1);
        }
    }
    let x = Mat::from_fn(rows.len(), n, |i, j| rows[i][j]);
    DataSet::new(x, Outputs::Discrete(labels), domains)
}

/// Synthetic data with exactly `total` rows: the Poisson mean is scaled to
/// overshoot, then a seeded subset (original order kept) is returned.
pub fn synth_with_size(cfg: &SynthConfig, total: usize) -> Result<DataSet> {
    if total == 0 {
        return Err(Error::InvalidInput("requested an empty dataset".into()));
    }
    let mut c = cfg.clone();
    c.mean_count = (total as f64 / c.domains as f64 * 1.2).max(1.0);
    let mut data = synth_generate(&c)?;
    while data.n() < total {
        c.mean_count *= 1.25;
        data = synth_generate(&c)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    let mut idx = index::sample(&mut rng, data.n(), total).into_vec();
    idx.sort_unstable();
    Ok(data.select(&idx))
}

/// Column roles for CSV ingestion. An empty `feature_cols` means "every
/// column that is neither the label nor the domain column".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub feature_cols: Vec<String>,
    pub label_col: String,
    pub domain_col: String,
    pub label_kind: LabelKind,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            feature_cols: Vec::new(),
            label_col: "y".into(),
            domain_col: "domain".into(),
            label_kind: LabelKind::Discrete,
        }
    }
}

fn parse_integral(s: &str) -> Option<i64> {
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    let f: f64 = s.parse().ok()?;
    (f.fract() == 0.0 && f.abs() < 9.0e15).then_some(f as i64)
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<DataSet> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.is_empty() {
        return Err(Error::InvalidInput(format!("{}: empty file", path.display())));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("{}: missing column '{name}'", path.display())))
    };
    let label_idx = find(&schema.label_col)?;
    let domain_idx = find(&schema.domain_col)?;
    let feature_idx: Vec<usize> = if schema.feature_cols.is_empty() {
        (0..headers.len()).filter(|&i| i != label_idx && i != domain_idx).collect()
    } else {
        schema.feature_cols.iter().map(|c| find(c)).collect::<Result<_>>()?
    };
    if feature_idx.is_empty() {
        return Err(Error::Schema(format!("{}: no feature columns", path.display())));
    }
    let names: Vec<String> = feature_idx.iter().map(|&i| headers[i].trim().to_string()).collect();

    let mut xs: Vec<f64> = Vec::new();
    let mut yd: Vec<i64> = Vec::new();
    let mut yc: Vec<f64> = Vec::new();
    let mut ds: Vec<i64> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |col: &str, val: &str, what: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("column '{col}': cannot parse '{val}' as {what}"),
        };
        for (&i, name) in feature_idx.iter().zip(&names) {
            let s = rec[i].trim();
            xs.push(s.parse::<f64>().map_err(|_| bad(name, s, "a number"))?);
        }
        let s = rec[label_idx].trim();
        match schema.label_kind {
            LabelKind::Discrete => yd.push(parse_integral(s).ok_or_else(|| bad(&schema.label_col, s, "an integer label"))?),
            LabelKind::Continuous => yc.push(s.parse::<f64>().map_err(|_| bad(&schema.label_col, s, "a number"))?),
        }
        let s = rec[domain_idx].trim();
        ds.push(parse_integral(s).ok_or_else(|| bad(&schema.domain_col, s, "an integer domain label"))?);
    }
    if ds.is_empty() {
        return Err(Error::InvalidInput(format!("{}: empty file (no data rows)", path.display())));
    }
    let p = names.len();
    let x = Mat::from_fn(ds.len(), p, |i, j| xs[i * p + j]);
    let y = match schema.label_kind {
        LabelKind::Discrete => Outputs::Discrete(yd),
        LabelKind::Continuous => Outputs::Continuous(yc),
    };
    DataSet::with_names(x, y, ds, names)
}

/// Feature columns only, for inputs that may lack labels and domains. With
/// an empty `schema.feature_cols`, every column except the schema's label
/// and domain columns (when present) is a feature.
pub fn load_features(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<(Mat<f64>, Vec<String>)> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.is_empty() {
        return Err(Error::InvalidInput(format!("{}: empty file", path.display())));
    }
    let idx: Vec<usize> = if schema.feature_cols.is_empty() {
        (0..headers.len())
            .filter(|&i| {
                let h = headers[i].trim();
                h != schema.label_col && h != schema.domain_col
            })
            .collect()
    } else {
        schema
            .feature_cols
            .iter()
            .map(|c| {
                headers
                    .iter()
                    .position(|h| h.trim() == c)
                    .ok_or_else(|| Error::Schema(format!("{}: missing column '{c}'", path.display())))
            })
            .collect::<Result<_>>()?
    };
    if idx.is_empty() {
        return Err(Error::Schema(format!("{}: no feature columns", path.display())));
    }
    let names: Vec<String> = idx.iter().map(|&i| headers[i].trim().to_string()).collect();
    let mut xs = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        for (&i, name) in idx.iter().zip(&names) {
            let s = rec[i].trim();
            xs.push(s.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("column '{name}': cannot parse '{s}' as a number"),
            })?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::InvalidInput(format!("{}: empty file (no data rows)", path.display())));
    }
    let p = names.len();
    Ok((Mat::from_fn(rows, p, |i, j| xs[i * p + j]), names))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line());
    match (e.into_kind(), line) {
        (csv::ErrorKind::Io(io), _) => Error::io(path, io),
        (kind, Some(line)) => Error::Parse { path: path.to_path_buf(), line, msg: format!("{kind:?}") },
        (kind, None) => Error::InvalidInput(format!("{}: {kind:?}", path.display())),
    }
}

/// Write features, then `y`, then `domain`. Floats use the shortest
/// representation that round-trips exactly.
pub fn write_csv(data: &DataSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = data.feature_names.clone();
    header.push("y".into());
    header.push("domain".into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = (0..data.dim()).map(|j| format!("{}", data.x[(i, j)])).collect();
        rec.push(match &data.y {
            Outputs::Discrete(v) => v[i].to_string(),
            Outputs::Continuous(v) => format!("{}", v[i]),
        });
        rec.push(data.d[i].to_string());
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Split by domain label: samples of `train_domains` go left, the rest right.
pub fn split_domains(data: &DataSet, train_domains: &[i64]) -> Result<(DataSet, DataSet)> {
    let observed: BTreeSet<i64> = data.d.iter().copied().collect();
    let wanted: BTreeSet<i64> = train_domains.iter().copied().collect();
    if let Some(bad) = wanted.iter().find(|d| !observed.contains(d)) {
        return Err(Error::InvalidInput(format!("unknown domain label {bad}")));
    }
    if wanted.is_empty() || wanted.len() == observed.len() {
        return Err(Error::InvalidInput(format!(
            "training domains must be a proper nonempty subset of the {} observed domains",
            observed.len()
        )));
    }
    let (tr, te): (Vec<usize>, Vec<usize>) = (0..data.n()).partition(|&i| wanted.contains(&data.d[i]));
    Ok((data.select(&tr), data.select(&te)))
}
