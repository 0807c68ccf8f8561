//! Base kernel families and Gram matrix construction.
//!
//! Every kernel carries a multiplicative `scale` so that a fitted
//! normalization (see [`normalize_spec`]) travels with the spec. The
//! effective kernel is always `scale * raw(x, y)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the PSD check on user-supplied kernel matrices.
pub const PSD_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelKind {
    /// `<x, y>`
    Linear,
    /// Homogeneous `<x, y>^degree`.
    Polynomial { degree: u32 },
    /// `exp(-||x - y||^2 / bandwidth)`
    Gaussian { bandwidth: f64 },
    /// Linear kernel restricted to a subset of (0-based) coordinates.
    CoordinateLinear { coords: Vec<usize> },
    /// User-supplied PSD matrix. Points are looked up by the integer stored
    /// in their first coordinate (`label,ID` in CSV, `label 1:ID` in svmlight).
    Precomputed { matrix: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub kind: KernelKind,
    pub scale: f64,
    pub normalize: bool,
}

impl KernelSpec {
    fn with_kind(kind: KernelKind) -> Self {
        KernelSpec {
            kind,
            scale: 1.0,
            normalize: false,
        }
    }

    pub fn linear() -> Self {
        Self::with_kind(KernelKind::Linear)
    }

    pub fn polynomial(degree: u32) -> Result<Self> {
        if degree == 0 {
            return Err(Error::input("polynomial degree must be >= 1"));
        }
        Ok(Self::with_kind(KernelKind::Polynomial { degree }))
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::input(format!(
                "gaussian bandwidth must be positive, got {bandwidth}"
            )));
        }
        // exp(0) = 1 on the diagonal, so the kernel is already normalized.
        Ok(KernelSpec {
            kind: KernelKind::Gaussian { bandwidth },
            scale: 1.0,
            normalize: true,
        })
    }

    pub fn coordinate_linear(coords: Vec<usize>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::input("coordinate-linear kernel needs at least one coordinate"));
        }
        let mut sorted = coords.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != coords.len() {
            return Err(Error::input("coordinate-linear kernel has duplicate coordinates"));
        }
        Ok(Self::with_kind(KernelKind::CoordinateLinear { coords }))
    }

    /// Accepts a symmetric PSD matrix (checked at [`PSD_TOL`] relative).
    pub fn precomputed(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 || matrix.iter().any(|row| row.len() != n) {
            return Err(Error::input("precomputed kernel matrix must be square and non-empty"));
        }
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::numeric("precomputed kernel matrix has non-finite entries"));
        }
        let dm = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
        let scale = dm.amax();
        let asym = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (dm[(i, j)] - dm[(j, i)]).abs())
            .fold(0.0, f64::max);
        if asym > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::input("precomputed kernel matrix is not symmetric"));
        }
        let eig = dm.symmetric_eigen();
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if min < -PSD_TOL * max.max(0.0) {
            return Err(Error::input(format!(
                "precomputed kernel matrix is not PSD (min eigenvalue {min:e}, max {max:e})"
            )));
        }
        Ok(Self::with_kind(KernelKind::Precomputed { matrix }))
    }

    /// Checks parameter ranges and, when `dim` is known, coordinate bounds.
    pub fn validate(&self, dim: Option<usize>) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::input(format!(
                "kernel scale must be positive, got {}",
                self.scale
            )));
        }
        match &self.kind {
            KernelKind::Polynomial { degree } if *degree == 0 => Err(Error::input("polynomial degree must be >= 1")),
            KernelKind::Gaussian { bandwidth } if !(*bandwidth > 0.0) => {
                Err(Error::input("gaussian bandwidth must be positive"))
            }
            KernelKind::CoordinateLinear { coords } => {
                if coords.is_empty() {
                    return Err(Error::input("coordinate-linear kernel needs coordinates"));
                }
                if let Some(d) = dim {
                    if let Some(c) = coords.iter().find(|&&c| c >= d) {
                        return Err(Error::input(format!("coordinate {c} out of range for dimension {d}")));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Short human-readable label, e.g. `gaussian(bw=1)`.
    pub fn label(&self) -> String {
        match &self.kind {
            KernelKind::Linear => "linear".into(),
            KernelKind::Polynomial { degree } => format!("polynomial(d={degree})"),
            KernelKind::Gaussian { bandwidth } => format!("gaussian(bw={bandwidth})"),
            KernelKind::CoordinateLinear { coords } => format!("coordinate-linear({coords:?})"),
            KernelKind::Precomputed { matrix } => format!("precomputed({}x{})", matrix.len(), matrix.len()),
        }
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn precomputed_index(x: &[f64], n: usize) -> Result<usize> {
    let raw = *x
        .first()
        .ok_or_else(|| Error::input("precomputed kernel needs the sample index in coordinate 0"))?;
    if raw < 0.0 || raw.fract() != 0.0 || raw as usize >= n {
        return Err(Error::input(format!(
            "precomputed kernel index {raw} is not an integer in [0, {n})"
        )));
    }
    Ok(raw as usize)
}

/// Evaluates the (scaled) kernel at a pair of points.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    let raw = match &spec.kind {
        KernelKind::Precomputed { matrix } => {
            let i = precomputed_index(x, matrix.len())?;
            let j = precomputed_index(y, matrix.len())?;
            matrix[i][j]
        }
        kind => {
            if x.len() != y.len() {
                return Err(Error::input(format!("dimension mismatch: {} vs {}", x.len(), y.len())));
            }
            match kind {
                KernelKind::Linear => dot(x, y),
                KernelKind::Polynomial { degree } => dot(x, y).powi(*degree as i32),
                KernelKind::Gaussian { bandwidth } => {
                    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-sq / bandwidth).exp()
                }
                KernelKind::CoordinateLinear { coords } => {
                    let mut acc = 0.0;
                    for &c in coords {
                        if c >= x.len() {
                            return Err(Error::input(format!(
                                "coordinate {c} out of range for dimension {}",
                                x.len()
                            )));
                        }
                        acc += x[c] * y[c];
                    }
                    acc
                }
                KernelKind::Precomputed { .. } => unreachable!(),
            }
        }
    };
    let value = spec.scale * raw;
    if !value.is_finite() {
        return Err(Error::numeric(format!("kernel {} produced {value}", spec.label())));
    }
    Ok(value)
}

/// Unscaled sample kernel matrix `[K]_ij = K(x_i, x_j)`.
///
/// Only the upper triangle is evaluated; the lower triangle is mirrored so
/// the result is exactly symmetric.
pub fn gram(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::input("gram matrix of an empty sample"));
    }
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = eval_kernel(spec, &points[i], &points[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Normalized kernel matrix `K / n`, where `n` is the sample's own size.
pub fn normalized_gram(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = points.len() as f64;
    Ok(gram(spec, points)? / n)
}

/// Rescales `spec` by `1 / max_i K(x_i, x_i)` so the diagonal is at most 1 on `points`.
pub fn normalize_spec(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<KernelSpec> {
    if points.is_empty() {
        return Err(Error::input("cannot normalize a kernel on an empty sample"));
    }
    let mut max_diag = 0.0_f64;
    for x in points {
        max_diag = max_diag.max(eval_kernel(spec, x, x)?);
    }
    if !(max_diag > 0.0) {
        return Err(Error::DegenerateKernel(format!(
            "{} has an all-zero diagonal on the sample",
            spec.label()
        )));
    }
    let mut out = spec.clone();
    out.scale = spec.scale / max_diag;
    out.normalize = true;
    Ok(out)
}

/// Applies [`normalize_spec`] to every spec flagged `normalize`, leaving the rest as given.
pub fn normalize_flagged(kernels: &[KernelSpec], points: &[Vec<f64>]) -> Result<Vec<KernelSpec>> {
    kernels
        .iter()
        .map(|k| {
            if k.normalize {
                normalize_spec(k, points)
            } else {
                Ok(k.clone())
            }
        })
        .collect()
}

/// Largest diagonal entry `max_i K(x_i, x_i)`.
pub fn max_diagonal(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<f64> {
    points
        .iter()
        .map(|x| eval_kernel(spec, x, x))
        .try_fold(0.0_f64, |acc, v| v.map(|v| acc.max(v)))
}
