//! Dense eigen/SVD/solve utilities built on faer.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Eigenpairs with values sorted non-increasing; column `i` of `vectors`
/// belongs to `values[i]`.
#[derive(Debug, Clone)]
pub struct EigPairs {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

pub fn frobenius(a: MatRef<'_, f64>) -> f64 {
    a.norm_l2()
}

pub fn identity(n: usize) -> Mat<f64> {
    Mat::identity(n, n)
}

pub(crate) fn add_diag(a: &mut Mat<f64>, v: f64) {
    for i in 0..a.nrows().min(a.ncols()) {
        a[(i, i)] += v;
    }
}

pub(crate) fn symmetrize(a: &mut Mat<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

fn check_square(a: MatRef<'_, f64>, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

fn check_symmetric(a: MatRef<'_, f64>, rel_tol: f64, what: &str) -> Result<()> {
    check_square(a, what)?;
    let asym = (a - a.transpose()).norm_l2();
    let scale = a.norm_l2();
    if asym > rel_tol * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput(format!(
            "{what} is not symmetric (‖A−Aᵀ‖_F = {asym:.3e}, ‖A‖_F = {scale:.3e})"
        )));
    }
    Ok(())
}

/// Symmetric eigendecomposition, values descending.
pub fn sym_eig(s: MatRef<'_, f64>) -> Result<EigPairs> {
    check_symmetric(s, 1e-8, "sym_eig input")?;
    let n = s.nrows();
    if n == 0 {
        return Ok(EigPairs { values: vec![], vectors: Mat::zeros(0, 0) });
    }
    let evd = s
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::InvalidInput(format!("symmetric eigensolver failed: {e:?}")))?;
    // faer returns ascending order.
    let values: Vec<f64> = (0..n).rev().map(|i| evd.S()[i]).collect();
    let u = evd.U();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    Ok(EigPairs { values, vectors })
}

/// Relative pivot size below which an LU factorization is treated as singular.
const SINGULAR_RCOND: f64 = 1e-14;

/// Solve `M X = rhs`, failing with `SingularMatrix(what)` on a numerically singular `M`.
pub(crate) fn solve(m: MatRef<'_, f64>, rhs: MatRef<'_, f64>, what: &str) -> Result<Mat<f64>> {
    let n = check_square(m, what)?;
    let lu = m.partial_piv_lu();
    let u = lu.U();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let d = u[(i, i)].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if n > 0 && (hi == 0.0 || !(lo > SINGULAR_RCOND * hi) || !hi.is_finite()) {
        return Err(Error::SingularMatrix(format!(
            "{what} (pivot ratio {:.3e})",
            if hi > 0.0 { lo / hi } else { 0.0 }
        )));
    }
    let x = lu.solve(rhs);
    if !x.as_ref().is_all_finite() {
        return Err(Error::SingularMatrix(format!("{what} (non-finite solution)")));
    }
    Ok(x)
}

/// The `m` eigenpairs with largest real part of `(B + ridge·I)⁻¹A`.
///
/// Eigenvectors are real parts of the (phase-aligned) complex eigenvectors,
/// renormalized to unit 2-norm.
pub fn gen_eig(a: MatRef<'_, f64>, b: MatRef<'_, f64>, m: usize, ridge: f64) -> Result<EigPairs> {
    let n = check_square(a, "gen_eig A")?;
    if check_square(b, "gen_eig B")? != n {
        return Err(Error::InvalidInput(format!(
            "gen_eig: A is {n}x{n}, B is {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!("gen_eig: need 1 ≤ m ≤ {n}, got m = {m}")));
    }
    let mut rhs = b.to_owned();
    add_diag(&mut rhs, ridge);
    let x = solve(rhs.as_ref(), a, "gen_eig right-hand side B + ridge·I")?;
    let evd = x
        .eigen()
        .map_err(|e| Error::InvalidInput(format!("nonsymmetric eigensolver failed: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps original index order among ties.
    order.sort_by(|&i, &j| s[j].re.total_cmp(&s[i].re));

    let mut values = Vec::with_capacity(m);
    let mut vectors = Mat::zeros(n, m);
    for (col, &k) in order.iter().take(m).enumerate() {
        let lam = s[k];
        if lam.im.abs() > 1e-6 * (1.0 + lam.re.abs()) {
            return Err(Error::ComplexSpectrum { re: lam.re, im: lam.im });
        }
        values.push(lam.re);
        // Rotate the eigenvector's phase so its real part carries maximal norm.
        let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let z = u[(i, k)];
            xx += z.re * z.re;
            yy += z.im * z.im;
            xy += z.re * z.im;
        }
        let phi = 0.5 * (-2.0 * xy).atan2(xx - yy);
        let (sn, cs) = phi.sin_cos();
        let mut norm = 0.0;
        for i in 0..n {
            let z = u[(i, k)];
            let v = z.re * cs - z.im * sn;
            vectors[(i, col)] = v;
            norm += v * v;
        }
        let norm = norm.sqrt();
        if norm > 0.0 {
            for i in 0..n {
                vectors[(i, col)] /= norm;
            }
        }
    }
    Ok(EigPairs { values, vectors })
}

/// Thin SVD `C = U·diag(s)·Vᵀ` of a tall matrix, singular values non-increasing.
pub fn thin_svd(c: MatRef<'_, f64>) -> Result<Svd> {
    if c.nrows() < c.ncols() {
        return Err(Error::InvalidInput(format!(
            "thin_svd expects N ≥ M, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    let svd = c
        .thin_svd()
        .map_err(|e| Error::InvalidInput(format!("SVD failed to converge: {e:?}")))?;
    let k = c.ncols();
    Ok(Svd {
        u: svd.U().to_owned(),
        s: (0..k).map(|i| svd.S()[i]).collect(),
        v: svd.V().to_owned(),
    })
}

/// `(W + jitter·I)⁻¹` for symmetric `W`.
pub fn ridge_inverse(w: MatRef<'_, f64>, jitter: f64) -> Result<Mat<f64>> {
    check_symmetric(w, 1e-8, "ridge_inverse input")?;
    let n = w.nrows();
    let mut m = w.to_owned();
    add_diag(&mut m, jitter);
    let mut inv = solve(m.as_ref(), identity(n).as_ref(), "W + jitter·I")?;
    symmetrize(&mut inv);
    Ok(inv)
}

/// Pseudo-inverse of a symmetric matrix, dropping eigenvalues with
/// `|λ| ≤ rtol·max|λ|`. Returns the inverse and the retained rank.
pub fn pinv_sym(w: MatRef<'_, f64>, rtol: f64) -> Result<(Mat<f64>, usize)> {
    let eig = sym_eig(w)?;
    let n = w.nrows();
    let top = eig.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let keep: Vec<usize> = (0..n).filter(|&i| eig.values[i].abs() > rtol * top).collect();
    let v = &eig.vectors;
    let scaled = Mat::from_fn(n, keep.len(), |i, j| v[(i, keep[j])] / eig.values[keep[j]]);
    let kept = Mat::from_fn(n, keep.len(), |i, j| v[(i, keep[j])]);
    let mut out = &scaled * kept.transpose();
    symmetrize(&mut out);
    Ok((out, keep.len()))
}

/// Orthonormal basis of `span(b)` under the inner product `⟨u, v⟩ = uᵀMv`.
fn metric_orthonormalize(b: MatRef<'_, f64>, metric: MatRef<'_, f64>, which: &str) -> Result<Mat<f64>> {
    let mb = metric * b;
    let mut g = b.transpose() * &mb;
    symmetrize(&mut g);
    let eig = sym_eig(g.as_ref())?;
    let k = b.ncols();
    let top = eig.values.first().copied().unwrap_or(0.0);
    let low = eig.values.last().copied().unwrap_or(0.0);
    if !(top > 0.0) || low <= 1e-12 * top {
        return Err(Error::RankDeficient(format!(
            "{which} columns are not independent under the metric (Gram eigenvalues {low:.3e}..{top:.3e})"
        )));
    }
    let scale = Mat::from_fn(k, k, |i, j| eig.vectors[(i, j)] / eig.values[j].sqrt());
    Ok(b * scale)
}

/// Principal angles (ascending, in `[0, π/2]`) between `span(b1)` and
/// `span(b2)` under the metric `M`.
pub fn principal_angles(b1: MatRef<'_, f64>, b2: MatRef<'_, f64>, metric: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let n = b1.nrows();
    if b2.nrows() != n || metric.nrows() != n || metric.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "principal_angles: shapes {}x{}, {}x{}, metric {}x{}",
            b1.nrows(),
            b1.ncols(),
            b2.nrows(),
            b2.ncols(),
            metric.nrows(),
            metric.ncols()
        )));
    }
    let q1 = metric_orthonormalize(b1, metric, "B1")?;
    let q2 = metric_orthonormalize(b2, metric, "B2")?;
    let c = q1.transpose() * (metric * &q2);
    let sv = c
        .singular_values()
        .map_err(|e| Error::InvalidInput(format!("SVD failed to converge: {e:?}")))?;
    let mut angles: Vec<f64> = sv.iter().map(|s| s.clamp(0.0, 1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}
