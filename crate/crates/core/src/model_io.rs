//! Versioned little-endian binary container for `ProjectionModel`.
//!
//! Layout: magic `DCMM`, `u32` version, algorithm tag (`u8`), kernel kind
//! (`u8`) and `γ` (`f64`), then `N`, `m`, feature dimension and reference
//! count as `u64`, followed by eigenvalues, coefficients (row-major),
//! reference inputs, offsets and weights as `f64`, and finally an optional
//! landmark-index section.

use std::path::Path;

use faer::Mat;

use crate::dcm::{Algorithm, ProjectionModel};
use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec};

pub const MAGIC: &[u8; 4] = b"DCMM";
pub const VERSION: u32 = 1;

fn put_mat(buf: &mut Vec<u8>, m: &Mat<f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            buf.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
}

pub fn to_bytes(model: &ProjectionModel) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.push(model.algorithm.tag());
    b.push(match model.kernel.kind {
        KernelKind::Rbf => 0,
        KernelKind::Delta => 1,
    });
    b.extend_from_slice(&model.kernel.gamma.to_le_bytes());
    for v in [model.n_train(), model.m(), model.dim(), model.refs.nrows()] {
        b.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for v in &model.eigenvalues {
        b.extend_from_slice(&v.to_le_bytes());
    }
    put_mat(&mut b, &model.coefficients);
    put_mat(&mut b, &model.refs);
    for v in &model.offsets {
        b.extend_from_slice(&v.to_le_bytes());
    }
    put_mat(&mut b, &model.weights);
    match &model.landmarks {
        None => b.push(0),
        Some(l) => {
            b.push(1);
            b.extend_from_slice(&(l.len() as u64).to_le_bytes());
            for &i in l {
                b.extend_from_slice(&(i as u64).to_le_bytes());
            }
        }
    }
    b
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Format(format!("truncated: need {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).ok().filter(|&v| v <= self.buf.len()).ok_or_else(|| Error::Format(format!("implausible size {v}")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn vec(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn mat(&mut self, r: usize, c: usize) -> Result<Mat<f64>> {
        let v = self.vec(r.checked_mul(c).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(Mat::from_fn(r, c, |i, j| v[i * c + j]))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<ProjectionModel> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad magic; not a model file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let tag = r.u8()?;
    let algorithm = Algorithm::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown algorithm tag {tag}")))?;
    let kind = match r.u8()? {
        0 => KernelKind::Rbf,
        1 => KernelKind::Delta,
        k => return Err(Error::Format(format!("unknown kernel tag {k}"))),
    };
    let kernel = KernelSpec { kind, gamma: r.f64()? };
    let (n, m, dim, nref) = (r.usize()?, r.usize()?, r.usize()?, r.usize()?);
    let eigenvalues = r.vec(m)?;
    let coefficients = r.mat(n, m)?;
    let refs = r.mat(nref, dim)?;
    let offsets = r.vec(nref)?;
    let weights = r.mat(nref, m)?;
    let landmarks = match r.u8()? {
        0 => None,
        1 => {
            let k = r.usize()?;
            Some((0..k).map(|_| r.usize()).collect::<Result<Vec<_>>>()?)
        }
        f => return Err(Error::Format(format!("bad landmark flag {f}"))),
    };
    if r.pos != buf.len() {
        return Err(Error::Format(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(ProjectionModel { algorithm, kernel, coefficients, eigenvalues, refs, offsets, weights, landmarks })
}

pub fn save_model(model: &ProjectionModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ProjectionModel> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&buf)
}
