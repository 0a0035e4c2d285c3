//! Dense DCM / COIR / KPCA fitting and projection.

use std::fmt;
use std::str::FromStr;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::data::{DataSet, Outputs};
use crate::error::{Error, Result};
use crate::kernels::{center_gram, cross_gram, gram, median_gamma, row_means, GramBundle, KernelSpec};
use crate::linalg::{add_diag, gen_eig, solve, sym_eig, symmetrize, EigPairs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dcm,
    Coir,
    Kpca,
    FastDcm,
    FastCoir,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Dcm, Algorithm::Coir, Algorithm::Kpca, Algorithm::FastDcm, Algorithm::FastCoir];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dcm => "dcm",
            Algorithm::Coir => "coir",
            Algorithm::Kpca => "kpca",
            Algorithm::FastDcm => "fastdcm",
            Algorithm::FastCoir => "fastcoir",
        }
    }

    pub fn is_fast(self) -> bool {
        matches!(self, Algorithm::FastDcm | Algorithm::FastCoir)
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Algorithm::Dcm => 0,
            Algorithm::Coir => 1,
            Algorithm::Kpca => 2,
            Algorithm::FastDcm => 3,
            Algorithm::FastCoir => 4,
        }
    }

    pub(crate) fn from_tag(t: u8) -> Option<Self> {
        Algorithm::ALL.into_iter().find(|a| a.tag() == t)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidInput(format!("unknown algorithm '{s}'")))
    }
}

/// How the dense generalized eigenproblem is posed.
///
/// `Regularized` solves `(K_x·B + Nε·I)⁻¹ K_x·A`: the pencil left-multiplied
/// by `K_x` with an `Nε` ridge, which is exactly what the Nyström path
/// approximates. `Exact` solves `Aβ = λBβ` itself with no ridge, restricted
/// to the numerical range of `K_x` (outside it both sides vanish).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    #[default]
    Regularized,
    Exact,
}

impl FromStr for SolverMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "regularized" => Ok(SolverMode::Regularized),
            "exact" => Ok(SolverMode::Exact),
            _ => Err(Error::InvalidInput(format!("unknown solver mode '{s}'"))),
        }
    }
}

/// Kernels for inputs, outputs and domain labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSet {
    pub x: KernelSpec,
    pub y: KernelSpec,
    pub d: KernelSpec,
}

impl KernelSet {
    /// RBF(`gamma`) on inputs, Delta on discrete outputs and domains, RBF on
    /// continuous outputs with `gamma_y` defaulting to the median heuristic.
    pub fn for_data(data: &DataSet, gamma: f64, gamma_y: Option<f64>) -> Result<Self> {
        let y = match &data.y {
            Outputs::Discrete(_) => KernelSpec::delta(),
            Outputs::Continuous(v) => KernelSpec::rbf(match gamma_y {
                Some(g) => g,
                None => median_gamma(v)?,
            }),
        };
        let set = KernelSet { x: KernelSpec::rbf(gamma), y, d: KernelSpec::delta() };
        set.x.validate()?;
        set.y.validate()?;
        Ok(set)
    }
}

/// Relative eigenvalue floor defining the numerical range of `K_x`.
const RANGE_RTOL: f64 = 1e-10;

/// Centered Grams of a dataset plus the raw `K_x` row means needed to
/// center test columns later.
pub fn gram_bundle(data: &DataSet, kernels: &KernelSet) -> Result<(GramBundle, Vec<f64>)> {
    let kx = gram(&kernels.x, data.x.as_ref())?;
    let means = row_means(kx.as_ref());
    let ky = gram(&kernels.y, data.y_items().as_ref())?;
    let kd = gram(&kernels.d, data.d_items().as_ref())?;
    let bundle = GramBundle {
        kx: center_gram(kx.as_ref()),
        ky: center_gram(ky.as_ref()),
        kd: center_gram(kd.as_ref()),
        centered: true,
    };
    Ok((bundle, means))
}

fn check_bundle(g: &GramBundle) -> Result<usize> {
    let n = g.n();
    for (name, k) in [("Kx", &g.kx), ("Ky", &g.ky), ("Kd", &g.kd)] {
        if k.nrows() != n || k.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "{name} is {}x{}, expected {n}x{n}",
                k.nrows(),
                k.ncols()
            )));
        }
        let scale = (0..n).map(|i| k[(i, i)].abs()).fold(0.0, f64::max);
        if (0..n).any(|i| k[(i, i)] < -1e-10 * scale.max(1.0)) {
            return Err(Error::InvalidInput(format!("{name} has a negative diagonal entry; not PSD")));
        }
    }
    Ok(n)
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {eps}")));
    }
    Ok(())
}

/// `K(K + c·I)⁻¹`, symmetric for symmetric PSD `K`.
fn shrink(k: &Mat<f64>, c: f64, what: &str) -> Result<Mat<f64>> {
    let mut lhs = k.clone();
    add_diag(&mut lhs, c);
    // (K + cI)⁻¹K = K(K + cI)⁻¹ since the two commute.
    let mut p = solve(lhs.as_ref(), k.as_ref(), what)?;
    symmetrize(&mut p);
    Ok(p)
}

/// The operator pair
/// `A = K_y(K_y+NεI)⁻¹K_xK_x + K_x`, `B = K_d(K_d+NεI)⁻¹K_xK_x + K_x`.
pub fn build_operator_pair(g: &GramBundle, epsilon: f64) -> Result<(Mat<f64>, Mat<f64>)> {
    check_epsilon(epsilon)?;
    let n = check_bundle(g)?;
    let c = n as f64 * epsilon;
    let k2 = &g.kx * &g.kx;
    let py = shrink(&g.ky, c, "K_y + Nε·I")?;
    let pd = shrink(&g.kd, c, "K_d + Nε·I")?;
    let a = &py * &k2 + &g.kx;
    let b = &pd * &k2 + &g.kx;
    Ok((a, b))
}

/// Leading `m` eigenpairs of the DCM pencil on a centered bundle.
/// `with_domain = false` drops the `K_d` term (COIR).
///
/// Returned vectors are scaled to `βᵀK_xβ = 1` with the sign fixed so the
/// largest-magnitude entry is positive.
pub fn solve_bundle(g: &GramBundle, epsilon: f64, m: usize, mode: SolverMode, with_domain: bool) -> Result<EigPairs> {
    check_epsilon(epsilon)?;
    let n = check_bundle(g)?;
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!("need 1 ≤ m ≤ N = {n}, got m = {m}")));
    }
    let c = n as f64 * epsilon;
    let mut pairs = match mode {
        SolverMode::Regularized => {
            let k2 = &g.kx * &g.kx;
            let py = shrink(&g.ky, c, "K_y + Nε·I")?;
            let ka = &g.kx * (&py * &k2 + &g.kx);
            let kb = if with_domain {
                let pd = shrink(&g.kd, c, "K_d + Nε·I")?;
                &g.kx * (&pd * &k2 + &g.kx)
            } else {
                k2
            };
            gen_eig(ka.as_ref(), kb.as_ref(), m, c)?
        }
        SolverMode::Exact => solve_exact(g, c, m, with_domain)?,
    };
    normalize_columns(&mut pairs.vectors, g.kx.as_ref());
    Ok(pairs)
}

/// Ridge-free solve on `range(K_x) = span(Q)`, `K_x = QΣQᵀ`. With
/// `β = QΣ^{-3/2}c` and `Ŝ_α = Σ^{1/2}QᵀP_αQΣ^{1/2}`, the pencil becomes
/// `(I + Ŝ_y)c = λ(I + Ŝ_d)c`: symmetric, with SPD right-hand side.
fn solve_exact(g: &GramBundle, c: f64, m: usize, with_domain: bool) -> Result<EigPairs> {
    let n = g.n();
    let eig = sym_eig(g.kx.as_ref())?;
    let top = eig.values.first().copied().unwrap_or(0.0);
    let r = eig.values.iter().take_while(|&&s| s > RANGE_RTOL * top).count();
    if r < m {
        return Err(Error::RankDeficient(format!("K_x has numerical rank {r} < m = {m}")));
    }
    let sig: Vec<f64> = eig.values[..r].to_vec();
    let q = eig.vectors.subcols(0, r);
    let qd = Mat::from_fn(n, r, |i, j| q[(i, j)] * sig[j].sqrt());
    let reduce = |k: &Mat<f64>, what: &str| -> Result<Mat<f64>> {
        let p = shrink(k, c, what)?;
        let mut s = qd.transpose() * (&p * &qd);
        symmetrize(&mut s);
        add_diag(&mut s, 1.0);
        Ok(s)
    };
    let lhs = reduce(&g.ky, "K_y + Nε·I")?;
    let rhs = if with_domain { reduce(&g.kd, "K_d + Nε·I")? } else { Mat::identity(r, r) };
    let red = gen_eig(lhs.as_ref(), rhs.as_ref(), m, 0.0)?;
    let scaled = Mat::from_fn(r, m, |i, j| red.vectors[(i, j)] / (sig[i] * sig[i].sqrt()));
    let mut vectors = q * &scaled;
    for j in 0..m {
        let norm = (0..n).map(|i| vectors[(i, j)].powi(2)).sum::<f64>().sqrt();
        for i in 0..n {
            vectors[(i, j)] /= norm;
        }
    }
    Ok(EigPairs { values: red.values, vectors })
}

/// Scale each column to `βᵀKβ = 1` (unit 2-norm if it lies in the null space
/// of `K`), then make its largest-magnitude entry positive.
pub(crate) fn normalize_columns(b: &mut Mat<f64>, k: MatRef<'_, f64>) {
    let kb = k * b.as_ref();
    let kscale = k.norm_l2();
    for j in 0..b.ncols() {
        let n = b.nrows();
        let q: f64 = (0..n).map(|i| b[(i, j)] * kb[(i, j)]).sum();
        let nn: f64 = (0..n).map(|i| b[(i, j)] * b[(i, j)]).sum();
        let s = if q > 1e-13 * kscale * nn { q.sqrt() } else { nn.sqrt() };
        let s = if s > 0.0 { s } else { 1.0 };
        flip_and_scale(b, j, s);
    }
}

pub(crate) fn flip_and_scale(b: &mut Mat<f64>, j: usize, s: f64) {
    let n = b.nrows();
    let mut arg = 0;
    for i in 1..n {
        if b[(i, j)].abs() > b[(arg, j)].abs() {
            arg = i;
        }
    }
    let s = if n > 0 && b[(arg, j)] < 0.0 { -s } else { s };
    for i in 0..n {
        b[(i, j)] /= s;
    }
}

/// A fitted projection. New points `z` map to
/// `weightsᵀ·(k(refs, z) − offsets)`; for dense models `refs` is the training
/// set, `offsets` its Gram row means and `weights = H𝓑`; for Nyström models
/// `refs` are the landmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    pub algorithm: Algorithm,
    pub kernel: KernelSpec,
    /// `N × m` expansion coefficients `𝓑` over the training samples.
    pub coefficients: Mat<f64>,
    pub eigenvalues: Vec<f64>,
    pub refs: Mat<f64>,
    pub offsets: Vec<f64>,
    pub weights: Mat<f64>,
    /// Landmark sample indices (Nyström models only).
    pub landmarks: Option<Vec<usize>>,
}

impl ProjectionModel {
    pub fn m(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn n_train(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn dim(&self) -> usize {
        self.refs.ncols()
    }

    pub fn transform(&self, z: MatRef<'_, f64>) -> Result<Mat<f64>> {
        transform(self, z)
    }

    pub(crate) fn dense(
        algorithm: Algorithm,
        kernel: KernelSpec,
        pairs: EigPairs,
        refs: Mat<f64>,
        means: Vec<f64>,
    ) -> Self {
        let b = pairs.vectors;
        let (n, m) = (b.nrows(), b.ncols());
        let mut w = b.clone();
        for j in 0..m {
            let mu = (0..n).map(|i| b[(i, j)]).sum::<f64>() / n as f64;
            for i in 0..n {
                w[(i, j)] -= mu;
            }
        }
        ProjectionModel {
            algorithm,
            kernel,
            coefficients: b,
            eigenvalues: pairs.values,
            refs,
            offsets: means,
            weights: w,
            landmarks: None,
        }
    }
}

/// Project `z` (one point per row) to an `m × N_T` feature matrix.
pub fn transform(model: &ProjectionModel, z: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if z.ncols() != model.dim() {
        return Err(Error::InvalidInput(format!(
            "model expects {} features, got {}",
            model.dim(),
            z.ncols()
        )));
    }
    let mut kz = cross_gram(&model.kernel, model.refs.as_ref(), z)?;
    for j in 0..kz.ncols() {
        for i in 0..kz.nrows() {
            kz[(i, j)] -= model.offsets[i];
        }
    }
    Ok(model.weights.transpose() * &kz)
}

fn check_m(m: usize, n: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidInput("m must be at least 1".into()));
    }
    if m > n {
        return Err(Error::InvalidInput(format!("m = {m} exceeds N = {n}")));
    }
    Ok(())
}

fn fit_dense(
    data: &DataSet,
    kernels: &KernelSet,
    epsilon: f64,
    m: usize,
    mode: SolverMode,
    algorithm: Algorithm,
) -> Result<ProjectionModel> {
    check_m(m, data.n())?;
    check_epsilon(epsilon)?;
    let (bundle, means) = gram_bundle(data, kernels)?;
    let pairs = solve_bundle(&bundle, epsilon, m, mode, algorithm == Algorithm::Dcm)?;
    Ok(ProjectionModel::dense(algorithm, kernels.x, pairs, data.x.clone(), means))
}

pub fn fit_dcm(data: &DataSet, kernels: &KernelSet, epsilon: f64, m: usize) -> Result<ProjectionModel> {
    fit_dense(data, kernels, epsilon, m, SolverMode::Regularized, Algorithm::Dcm)
}

pub fn fit_coir(data: &DataSet, kernels: &KernelSet, epsilon: f64, m: usize) -> Result<ProjectionModel> {
    fit_dense(data, kernels, epsilon, m, SolverMode::Regularized, Algorithm::Coir)
}

pub fn fit_dcm_with(data: &DataSet, kernels: &KernelSet, epsilon: f64, m: usize, mode: SolverMode) -> Result<ProjectionModel> {
    fit_dense(data, kernels, epsilon, m, mode, Algorithm::Dcm)
}

pub fn fit_coir_with(data: &DataSet, kernels: &KernelSet, epsilon: f64, m: usize, mode: SolverMode) -> Result<ProjectionModel> {
    fit_dense(data, kernels, epsilon, m, mode, Algorithm::Coir)
}

/// Kernel PCA: top-`m` eigenvectors of centered `K_x`, scaled to `βᵀK_xβ = 1`.
pub fn fit_kpca(data: &DataSet, spec_x: &KernelSpec, m: usize) -> Result<ProjectionModel> {
    check_m(m, data.n())?;
    let kx = gram(spec_x, data.x.as_ref())?;
    let means = row_means(kx.as_ref());
    let kc = center_gram(kx.as_ref());
    let eig = sym_eig(kc.as_ref())?;
    let n = data.n();
    let mut vectors = Mat::from_fn(n, m, |i, j| eig.vectors[(i, j)]);
    normalize_columns(&mut vectors, kc.as_ref());
    let pairs = EigPairs { values: eig.values[..m].to_vec(), vectors };
    Ok(ProjectionModel::dense(Algorithm::Kpca, *spec_x, pairs, data.x.clone(), means))
}
