//! Nyström fast path (FastDCM / FastCOIR): every kernel is sketched through
//! `M` uniformly sampled landmarks and the eigenproblem is reduced to `M × M`.
//! No `N × N` matrix is ever formed.

use faer::{Mat, MatRef};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::DataSet;
use crate::dcm::{flip_and_scale, Algorithm, KernelSet, ProjectionModel};
use crate::error::{Error, Result};
use crate::kernels::{cross_gram, KernelSpec};
use crate::linalg::{add_diag, gen_eig, pinv_sym, ridge_inverse, solve, sym_eig, symmetrize, EigPairs};

/// Relative eigenvalue floor for truncating `S_xx`.
const SXX_RTOL: f64 = 1e-10;

/// How the landmark blocks `W_α` are inverted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LandmarkInverse {
    /// Pseudo-inverse dropping eigenvalues below `rtol·max`.
    Pseudo { rtol: f64 },
    /// `(W + jitter·I)⁻¹` with `jitter = rel·tr(W)/M`.
    Jitter { rel: f64 },
}

impl Default for LandmarkInverse {
    fn default() -> Self {
        LandmarkInverse::Pseudo { rtol: 1e-8 }
    }
}

/// Cross products `S_αβ = C_αᵀC_β`.
#[derive(Debug, Clone)]
pub struct SketchProducts {
    pub xx: Mat<f64>,
    pub xy: Mat<f64>,
    pub xd: Mat<f64>,
    pub yy: Mat<f64>,
    pub dd: Mat<f64>,
    pub yx: Mat<f64>,
    pub dx: Mat<f64>,
}

#[derive(Debug, Clone)]
pub struct NystromSketch {
    pub landmarks: Vec<usize>,
    /// Column-centered `N × M` kernel columns.
    pub cx: Mat<f64>,
    pub cy: Mat<f64>,
    pub cd: Mat<f64>,
    /// Inverses of the (uncentered) landmark blocks.
    pub wx: Mat<f64>,
    pub wy: Mat<f64>,
    pub wd: Mat<f64>,
    /// Column means removed from the raw `K_x[:, L]`.
    pub mean_x: Vec<f64>,
    pub s: SketchProducts,
}

impl NystromSketch {
    pub fn n(&self) -> usize {
        self.cx.nrows()
    }

    pub fn m_landmarks(&self) -> usize {
        self.landmarks.len()
    }

    /// `C_x W̃_x C_xᵀ`, the centered Nyström approximation of `K_x` (dense; tests only).
    pub fn reconstruct_x(&self) -> Mat<f64> {
        let mut k = &self.cx * (&self.wx * self.cx.transpose());
        symmetrize(&mut k);
        k
    }
}

/// `M` distinct indices drawn uniformly without replacement.
pub fn sample_landmarks(n: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!("need 1 ≤ M ≤ N = {n}, got M = {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, n, m).into_vec())
}

fn rows(x: MatRef<'_, f64>, idx: &[usize]) -> Mat<f64> {
    Mat::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

struct Block {
    c: Mat<f64>,
    w_inv: Mat<f64>,
    mean: Vec<f64>,
}

fn sketch_block(spec: &KernelSpec, items: MatRef<'_, f64>, landmarks: &[usize], inverse: LandmarkInverse, what: &str) -> Result<Block> {
    let lm = rows(items, landmarks);
    let mut c = cross_gram(spec, items, lm.as_ref())?;
    let (n, m) = (c.nrows(), c.ncols());
    let mut w = Mat::from_fn(m, m, |i, j| c[(landmarks[i], j)]);
    symmetrize(&mut w);
    let w_inv = match inverse {
        LandmarkInverse::Pseudo { rtol } => {
            let (inv, rank) = pinv_sym(w.as_ref(), rtol)?;
            if rank == 0 {
                return Err(Error::SingularMatrix(format!("landmark block W_{what} is zero")));
            }
            inv
        }
        LandmarkInverse::Jitter { rel } => {
            let tr: f64 = (0..m).map(|i| w[(i, i)]).sum();
            ridge_inverse(w.as_ref(), rel * tr / m as f64)
                .map_err(|e| Error::SingularMatrix(format!("landmark block W_{what}: {e}")))?
        }
    };
    let mean: Vec<f64> = (0..m).map(|j| (0..n).map(|i| c[(i, j)]).sum::<f64>() / n as f64).collect();
    for j in 0..m {
        for i in 0..n {
            c[(i, j)] -= mean[j];
        }
    }
    Ok(Block { c, w_inv, mean })
}

pub fn build_sketch(data: &DataSet, kernels: &KernelSet, landmarks: &[usize]) -> Result<NystromSketch> {
    build_sketch_with(data, kernels, landmarks, LandmarkInverse::default())
}

pub fn build_sketch_with(
    data: &DataSet,
    kernels: &KernelSet,
    landmarks: &[usize],
    inverse: LandmarkInverse,
) -> Result<NystromSketch> {
    let n = data.n();
    if landmarks.is_empty() || landmarks.len() > n {
        return Err(Error::InvalidInput(format!("need 1 ≤ M ≤ N = {n} landmarks, got {}", landmarks.len())));
    }
    let mut seen = vec![false; n];
    for &l in landmarks {
        if l >= n || std::mem::replace(&mut seen[l], true) {
            return Err(Error::InvalidInput(format!("landmark index {l} out of range or repeated")));
        }
    }
    let bx = sketch_block(&kernels.x, data.x.as_ref(), landmarks, inverse, "x")?;
    let by = sketch_block(&kernels.y, data.y_items().as_ref(), landmarks, inverse, "y")?;
    let bd = sketch_block(&kernels.d, data.d_items().as_ref(), landmarks, inverse, "d")?;
    let t = |a: &Mat<f64>, b: &Mat<f64>| a.transpose() * b;
    let mut xx = t(&bx.c, &bx.c);
    symmetrize(&mut xx);
    let xy = t(&bx.c, &by.c);
    let xd = t(&bx.c, &bd.c);
    let mut yy = t(&by.c, &by.c);
    symmetrize(&mut yy);
    let mut dd = t(&bd.c, &bd.c);
    symmetrize(&mut dd);
    let s = SketchProducts { yx: xy.transpose().to_owned(), dx: xd.transpose().to_owned(), xx, xy, xd, yy, dd };
    Ok(NystromSketch {
        landmarks: landmarks.to_vec(),
        cx: bx.c,
        cy: by.c,
        cd: bd.c,
        wx: bx.w_inv,
        wy: by.w_inv,
        wd: bd.w_inv,
        mean_x: bx.mean,
        s,
    })
}

/// The `M × M` reduced operator
/// `Ω = (W̃ₓS_xdW̃_d(S_ddW̃_d+NεI)⁻¹S_dxW̃ₓS_xxW̃ₓS_xx + W̃ₓS_xxW̃ₓS_xx + NεI)⁻¹
///      (W̃ₓS_xyW̃_y(S_yyW̃_y+NεI)⁻¹S_yxW̃ₓS_xxW̃ₓ + W̃ₓS_xxW̃ₓ)`.
/// With `with_domain = false` the `S_xd` term is dropped (FastCOIR).
pub fn compute_omega(sk: &NystromSketch, n: usize, epsilon: f64, with_domain: bool) -> Result<Mat<f64>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    let c = n as f64 * epsilon;
    let s = &sk.s;
    let wx = &sk.wx;
    // W̃ₓS_xxW̃ₓ
    let wsw = wx * (&s.xx * wx);

    let mut inner_y = &s.yy * &sk.wy;
    add_diag(&mut inner_y, c);
    let tail_y = solve(inner_y.as_ref(), (&s.yx * &wsw).as_ref(), "S_yy·W̃_y + Nε·I")?;
    let num = wx * (&s.xy * (&sk.wy * tail_y)) + &wsw;

    let mut den = &wsw * &s.xx;
    if with_domain {
        let mut inner_d = &s.dd * &sk.wd;
        add_diag(&mut inner_d, c);
        let tail_d = solve(inner_d.as_ref(), (&s.dx * &den).as_ref(), "S_dd·W̃_d + Nε·I")?;
        den += wx * (&s.xd * (&sk.wd * tail_d));
    }
    add_diag(&mut den, c);
    solve(den.as_ref(), num.as_ref(), "outer factor of Ω")
}

/// Leading `m` eigenpairs recovered from `Ω`: with `S_xx = VΛ²Vᵀ` (truncated),
/// eigendecompose `VᵀΩV·VᵀS_xxV = ΘΔΘ⁻¹` and return `𝓑̃ = C_xVΘ`, each column
/// scaled to `β̃ᵀC_xW̃_xC_xᵀβ̃ = 1`.
pub fn fast_eig(sk: &NystromSketch, omega: MatRef<'_, f64>, m: usize) -> Result<EigPairs> {
    let eig = sym_eig(sk.s.xx.as_ref())?;
    let top = eig.values.first().copied().unwrap_or(0.0);
    let r = eig.values.iter().take_while(|&&v| v > SXX_RTOL * top).count();
    if r < m || m == 0 {
        return Err(Error::RankDeficient(format!("S_xx has effective rank {r}, requested m = {m}")));
    }
    let v = eig.vectors.subcols(0, r);
    let vsv = v.transpose() * (&sk.s.xx * v);
    let t = (v.transpose() * (omega * v)) * &vsv;
    let red = gen_eig(t.as_ref(), Mat::<f64>::identity(r, r).as_ref(), m, 0.0)?;
    let mut b = &sk.cx * (v * &red.vectors);
    // β̃ᵀK̃β̃ with K̃ = C_xW̃C_xᵀ, evaluated through C_xᵀβ̃ to stay O(NM).
    let u = sk.cx.transpose() * &b;
    let wu = &sk.wx * &u;
    for j in 0..m {
        let q: f64 = (0..u.nrows()).map(|i| u[(i, j)] * wu[(i, j)]).sum();
        let nn: f64 = (0..b.nrows()).map(|i| b[(i, j)].powi(2)).sum();
        let s = if q > 0.0 { q.sqrt() } else { nn.sqrt().max(f64::MIN_POSITIVE) };
        flip_and_scale(&mut b, j, s);
    }
    Ok(EigPairs { values: red.values, vectors: b })
}

fn fit_fast(
    data: &DataSet,
    kernels: &KernelSet,
    epsilon: f64,
    m: usize,
    landmarks_m: usize,
    seed: u64,
    algorithm: Algorithm,
) -> Result<ProjectionModel> {
    let n = data.n();
    if m == 0 {
        return Err(Error::InvalidInput("m must be at least 1".into()));
    }
    if m > landmarks_m {
        return Err(Error::InvalidInput(format!("m = {m} exceeds the landmark count M = {landmarks_m}")));
    }
    if landmarks_m > n {
        return Err(Error::InvalidInput(format!("M = {landmarks_m} exceeds N = {n}")));
    }
    let landmarks = sample_landmarks(n, landmarks_m, seed)?;
    let sk = build_sketch(data, kernels, &landmarks)?;
    let omega = compute_omega(&sk, n, epsilon, algorithm == Algorithm::FastDcm)?;
    let pairs = fast_eig(&sk, omega.as_ref(), m)?;
    // z ↦ 𝓑̃ᵀC_xW̃_x(k_L(z) − μ_L)
    let weights = &sk.wx * (sk.cx.transpose() * &pairs.vectors);
    Ok(ProjectionModel {
        algorithm,
        kernel: kernels.x,
        coefficients: pairs.vectors,
        eigenvalues: pairs.values,
        refs: rows(data.x.as_ref(), &landmarks),
        offsets: sk.mean_x,
        weights,
        landmarks: Some(landmarks),
    })
}

pub fn fit_fastdcm(data: &DataSet, kernels: &KernelSet, epsilon: f64, m: usize, landmarks: usize, seed: u64) -> Result<ProjectionModel> {
    fit_fast(data, kernels, epsilon, m, landmarks, seed, Algorithm::FastDcm)
}

pub fn fit_fastcoir(data: &DataSet, kernels: &KernelSet, epsilon: f64, m: usize, landmarks: usize, seed: u64) -> Result<ProjectionModel> {
    fit_fast(data, kernels, epsilon, m, landmarks, seed, Algorithm::FastCoir)
}
