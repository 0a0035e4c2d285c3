//! Kernel evaluation, Gram assembly and double centering.
//!
//! Items are rows of a matrix: feature vectors for inputs, length-1 rows for
//! labels. Centering realizes zero-mean feature maps via `HKH` with
//! `H = I − 𝟙𝟙ᵀ/N`.

use faer::{Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// RBF width `γ` in `exp(−γ‖a−b‖²)`; ignored for `Delta`.
    pub gamma: f64,
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Self {
        KernelSpec { kind: KernelKind::Rbf, gamma }
    }

    pub fn delta() -> Self {
        KernelSpec { kind: KernelKind::Delta, gamma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == KernelKind::Rbf && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "RBF gamma must be positive and finite, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    #[inline]
    fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * d2).exp()
            }
            KernelKind::Delta => {
                if a == b {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `k(a, b)` for a single pair.
pub fn eval_kernel(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    spec.validate()?;
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "kernel arguments have dimensions {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(spec.eval_unchecked(a, b))
}

fn rows_of(x: MatRef<'_, f64>) -> Vec<Vec<f64>> {
    (0..x.nrows())
        .map(|i| (0..x.ncols()).map(|j| x[(i, j)]).collect())
        .collect()
}

/// Gram matrix over the rows of `x`.
pub fn gram(spec: &KernelSpec, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
    spec.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::InvalidInput("gram of an empty set".into()));
    }
    let rows = rows_of(x);
    // Upper triangle in parallel, mirrored afterwards so the result is exactly symmetric.
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| spec.eval_unchecked(&rows[i], &rows[j])).collect())
        .collect();
    let mut k = Mat::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Cross-Gram `K(i, j) = k(x_i, z_j)`, shape `N × N_T`.
pub fn cross_gram(spec: &KernelSpec, x: MatRef<'_, f64>, z: MatRef<'_, f64>) -> Result<Mat<f64>> {
    spec.validate()?;
    if x.ncols() != z.ncols() {
        return Err(Error::InvalidInput(format!(
            "cross_gram: feature dimensions {} and {} differ",
            x.ncols(),
            z.ncols()
        )));
    }
    let xr = rows_of(x);
    let zr = rows_of(z);
    let cols: Vec<Vec<f64>> = zr
        .par_iter()
        .map(|zj| xr.iter().map(|xi| spec.eval_unchecked(xi, zj)).collect())
        .collect();
    Ok(Mat::from_fn(xr.len(), zr.len(), |i, j| cols[j][i]))
}

/// Row means of a square matrix (the training statistics used by `center_cross`).
pub fn row_means(k: MatRef<'_, f64>) -> Vec<f64> {
    let n = k.ncols() as f64;
    (0..k.nrows())
        .map(|i| (0..k.ncols()).map(|j| k[(i, j)]).sum::<f64>() / n)
        .collect()
}

fn col_means(k: MatRef<'_, f64>) -> Vec<f64> {
    let n = k.nrows() as f64;
    (0..k.ncols())
        .map(|j| (0..k.nrows()).map(|i| k[(i, j)]).sum::<f64>() / n)
        .collect()
}

/// `HKH`: subtract row and column means, add back the grand mean.
pub fn center_gram(k: MatRef<'_, f64>) -> Mat<f64> {
    let r = row_means(k);
    let c = col_means(k);
    let g = r.iter().sum::<f64>() / r.len().max(1) as f64;
    let mut out = Mat::from_fn(k.nrows(), k.ncols(), |i, j| k[(i, j)] - r[i] - c[j] + g);
    // Rounding in the two mean vectors can leave ~1e-17 asymmetry.
    let n = out.nrows();
    if n == out.ncols() {
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
    }
    out
}

/// Center test columns against training statistics:
/// column `j` becomes `H·(kz_j − rowmean(K))`.
pub fn center_cross(kz: MatRef<'_, f64>, k: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if k.nrows() != k.ncols() || kz.nrows() != k.nrows() {
        return Err(Error::InvalidInput(format!(
            "center_cross: Kz is {}x{}, K is {}x{}",
            kz.nrows(),
            kz.ncols(),
            k.nrows(),
            k.ncols()
        )));
    }
    Ok(center_cross_with_means(kz, &row_means(k)))
}

/// `center_cross` with precomputed training row means.
pub fn center_cross_with_means(kz: MatRef<'_, f64>, means: &[f64]) -> Mat<f64> {
    let n = kz.nrows();
    let mut out = Mat::from_fn(n, kz.ncols(), |i, j| kz[(i, j)] - means[i]);
    for j in 0..out.ncols() {
        let mu = (0..n).map(|i| out[(i, j)]).sum::<f64>() / n as f64;
        for i in 0..n {
            out[(i, j)] -= mu;
        }
    }
    out
}

/// Median heuristic width for continuous outputs: `γ_y = 1/(2·median(y)²)`.
pub fn median_gamma(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::InvalidInput("median heuristic on empty outputs".into()));
    }
    let mut v = y.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let med = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    if med == 0.0 || !med.is_finite() {
        return Err(Error::InvalidInput(format!(
            "median heuristic undefined: median(y) = {med}"
        )));
    }
    Ok(1.0 / (2.0 * med * med))
}

/// Centered Gram matrices for inputs, outputs and domains.
#[derive(Debug, Clone)]
pub struct GramBundle {
    pub kx: Mat<f64>,
    pub ky: Mat<f64>,
    pub kd: Mat<f64>,
    pub centered: bool,
}

impl GramBundle {
    pub fn n(&self) -> usize {
        self.kx.nrows()
    }

    /// Build from raw (uncentered) Grams, centering all three uniformly.
    pub fn from_raw(kx: MatRef<'_, f64>, ky: MatRef<'_, f64>, kd: MatRef<'_, f64>) -> Result<Self> {
        let n = kx.nrows();
        for (name, m) in [("Kx", kx), ("Ky", ky), ("Kd", kd)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidInput(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(GramBundle {
            kx: center_gram(kx),
            ky: center_gram(ky),
            kd: center_gram(kd),
            centered: true,
        })
    }
}
