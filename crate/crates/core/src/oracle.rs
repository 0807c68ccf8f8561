//! Slow reference computations in explicit feature space and by exhaustive
//! enumeration over sign vectors. Used to validate the fast paths.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::constraints::{check_m, ConstraintParams};
use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec};
use crate::spectral::SpectralBundle;

/// Largest explicit feature dimension accepted.
pub const MAX_FEATURE_DIM: usize = 10_000;

/// Largest sample size for sign-vector enumeration.
pub const MAX_ENUM_M: usize = 20;

#[derive(Clone, Debug, PartialEq)]
enum MapKind {
    /// Selected input coordinates.
    Coordinates(Vec<usize>),
    /// All monomials of the given degree in `dim` variables.
    Monomials { dim: usize, degree: u32 },
}

/// Finite-dimensional feature map with `<phi(x), phi(y)> = K(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitFeatureMap {
    kind: MapKind,
    scale: f64,
    /// Multi-indices and sqrt of their multinomial coefficients (monomial maps only).
    monomials: Vec<(Vec<u32>, f64)>,
}

fn multi_indices(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(dim: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == dim - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for a in (0..=left).rev() {
            cur.push(a);
            rec(dim, left - a, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, degree, &mut Vec::new(), &mut out);
    out
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product()
}

impl ExplicitFeatureMap {
    /// Builds the map for a linear, coordinate-linear or polynomial kernel on `dim` inputs.
    pub fn from_spec(spec: &KernelSpec, dim: usize) -> Result<Self> {
        let (kind, monomials) = match &spec.kind {
            KernelKind::Linear => (MapKind::Coordinates((0..dim).collect()), Vec::new()),
            KernelKind::CoordinateLinear { coords } => {
                spec.validate(Some(dim))?;
                (MapKind::Coordinates(coords.clone()), Vec::new())
            }
            KernelKind::Polynomial { degree } => {
                let size = binomial(dim + *degree as usize - 1, *degree as usize);
                if size > MAX_FEATURE_DIM as f64 {
                    return Err(Error::input(format!("explicit feature dimension {size} is too large")));
                }
                let total = factorial(*degree);
                let monos = multi_indices(dim, *degree)
                    .into_iter()
                    .map(|a| {
                        let coef = total / a.iter().map(|v| factorial(*v)).product::<f64>();
                        (a, coef.sqrt())
                    })
                    .collect();
                (MapKind::Monomials { dim, degree: *degree }, monos)
            }
            _ => {
                return Err(Error::input(format!(
                    "{} has no finite explicit feature map",
                    spec.label()
                )))
            }
        };
        Ok(ExplicitFeatureMap {
            kind,
            scale: spec.scale,
            monomials,
        })
    }

    pub fn feature_dim(&self) -> usize {
        match &self.kind {
            MapKind::Coordinates(c) => c.len(),
            MapKind::Monomials { .. } => self.monomials.len(),
        }
    }

    /// Input coordinates the map depends on.
    pub fn support(&self) -> Vec<usize> {
        match &self.kind {
            MapKind::Coordinates(c) => c.clone(),
            MapKind::Monomials { dim, .. } => (0..*dim).collect(),
        }
    }

    pub fn map(&self, x: &[f64]) -> Vec<f64> {
        let s = self.scale.sqrt();
        match &self.kind {
            MapKind::Coordinates(c) => c.iter().map(|&i| s * x[i]).collect(),
            MapKind::Monomials { .. } => self
                .monomials
                .iter()
                .map(|(a, coef)| s * coef * a.iter().zip(x).map(|(e, v)| v.powi(*e as i32)).product::<f64>())
                .collect(),
        }
    }
}

/// `(1/n) sum_x phi(x) phi(x)^T`.
pub fn explicit_covariance(map: &ExplicitFeatureMap, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if points.is_empty() {
        return Err(Error::input("covariance of an empty sample"));
    }
    let d = map.feature_dim();
    if d > MAX_FEATURE_DIM {
        return Err(Error::input("explicit feature dimension too large"));
    }
    let mut c = DMatrix::zeros(d, d);
    for x in points {
        let phi = DVector::from_vec(map.map(x));
        c += &phi * phi.transpose();
    }
    Ok(c / points.len() as f64)
}

/// Eigenvalues of a symmetric matrix in descending order.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `|| Pi_r sum_n sigma_n Phi(x_n) ||` with `Phi = (sqrt(mu_k) phi_k)_k` and `Pi_r`
/// the top-r eigenspace projector of the block-diagonal mixture covariance.
pub fn explicit_projection_norm(
    maps: &[ExplicitFeatureMap],
    mu: &[f64],
    r: usize,
    sigma: &[f64],
    points: &[Vec<f64>],
) -> Result<f64> {
    if maps.len() != mu.len() || sigma.len() != points.len() {
        return Err(Error::input("shape mismatch in explicit projection"));
    }
    let mut used = Vec::new();
    for map in maps {
        for c in map.support() {
            if used.contains(&c) {
                return Err(Error::input("feature maps share input coordinates (not independent)"));
            }
            used.push(c);
        }
    }
    let dims: Vec<usize> = maps.iter().map(|m| m.feature_dim()).collect();
    let total: usize = dims.iter().sum();
    if r == 0 || r > total {
        return Err(Error::input(format!("r = {r} outside 1..={total}")));
    }
    let mut cov = DMatrix::zeros(total, total);
    let mut s = DVector::zeros(total);
    let mut offset = 0;
    for (k, map) in maps.iter().enumerate() {
        let block = explicit_covariance(map, points)? * mu[k];
        cov.view_mut((offset, offset), (dims[k], dims[k])).copy_from(&block);
        for (x, sg) in points.iter().zip(sigma) {
            let phi = map.map(x);
            for (i, v) in phi.iter().enumerate() {
                s[offset + i] += sg * mu[k].sqrt() * v;
            }
        }
        offset += dims[k];
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let sq: f64 = order[..r]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).dot(&s).powi(2))
        .sum();
    Ok(sq.sqrt())
}

/// Calls `f` with every sign vector of length `m` (index bit set means -1).
pub fn for_each_sign_vector(m: usize, mut f: impl FnMut(&[f64])) -> Result<()> {
    if m > MAX_ENUM_M {
        return Err(Error::input(format!("sign enumeration limited to m <= {MAX_ENUM_M}")));
    }
    let mut sigma = vec![0.0; m];
    for bits in 0u64..(1u64 << m) {
        for (i, s) in sigma.iter_mut().enumerate() {
            *s = if bits >> i & 1 == 1 { -1.0 } else { 1.0 };
        }
        f(&sigma);
    }
    Ok(())
}

/// Exact `E |v . sigma|` over all sign vectors.
pub fn exact_abs_correlation(v: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for_each_sign_vector(v.len(), |s| {
        total += v.iter().zip(s).map(|(a, b)| a * b).sum::<f64>().abs()
    })?;
    Ok(total / (1u64 << v.len()) as f64)
}

/// Exact `E max_(k,j) |v_kj . sigma|` over all sign vectors.
pub fn exact_massart(bundle: &SpectralBundle) -> Result<f64> {
    let vectors: Vec<&Vec<f64>> = bundle.spectra.iter().flat_map(|s| s.vectors[..s.rank].iter()).collect();
    let mut total = 0.0;
    for_each_sign_vector(bundle.m, |s| {
        total += vectors
            .iter()
            .map(|v| v.iter().zip(s).map(|(a, b)| a * b).sum::<f64>().abs())
            .fold(0.0, f64::max);
    })?;
    Ok(total / (1u64 << bundle.m) as f64)
}

fn correlations(bundle: &SpectralBundle, sigma: &[f64]) -> Vec<Vec<f64>> {
    bundle
        .spectra
        .iter()
        .map(|s| {
            s.vectors
                .iter()
                .map(|v| v.iter().zip(sigma).map(|(a, b)| a * b).sum::<f64>().powi(2))
                .collect()
        })
        .collect()
}

/// Exact empirical Rademacher complexity for p = 1 (closed-form inner sup)
/// or p = 2 (inner sup over a `grid` x `grid` lattice of M).
pub fn exhaustive_rademacher(bundle: &SpectralBundle, params: &ConstraintParams, grid: usize) -> Result<f64> {
    let m = bundle.m;
    if m > 12 {
        return Err(Error::input("exhaustive Rademacher enumeration needs m <= 12"));
    }
    let r = params.r;
    match bundle.num_kernels() {
        1 => {
            // mu ranges over [1/nu, min(1, Lambda / sum_{j<r} lambda_j)]; the
            // objective grows with mu, so the sup sits at the upper end.
            let lam = &bundle.spectra[0].values;
            let top: f64 = lam.iter().take(r).sum();
            let hi = if top > 0.0 {
                (params.lambda_r / top).min(1.0)
            } else {
                1.0
            };
            if hi < 1.0 / params.nu {
                return Err(Error::Infeasible("M is empty".into()));
            }
            let mut total = 0.0;
            for_each_sign_vector(m, |s| {
                let c = correlations(bundle, s);
                let e: f64 = (0..r.min(lam.len())).map(|j| lam[j] * c[0][j]).sum();
                total += (m as f64 * hi * e).sqrt() / m as f64;
            })?;
            Ok(total / (1u64 << m) as f64)
        }
        2 => {
            // Feasible lattice points with the per-kernel count of the top-r set.
            let mut points: Vec<([f64; 2], [usize; 2])> = Vec::new();
            for i in 1..=grid {
                for j in 1..=grid {
                    let mu = [i as f64 / grid as f64, j as f64 / grid as f64];
                    if !check_m(&mu, params, bundle)?.feasible() {
                        continue;
                    }
                    // Merge the two sorted spectra by weighted value, ties to kernel 0.
                    let (mut a, mut b) = (0, 0);
                    for _ in 0..r {
                        let va = if a < bundle.spectra[0].rank {
                            mu[0] * bundle.spectra[0].values[a]
                        } else {
                            -1.0
                        };
                        let vb = if b < bundle.spectra[1].rank {
                            mu[1] * bundle.spectra[1].values[b]
                        } else {
                            -1.0
                        };
                        if va >= vb {
                            a += 1;
                        } else {
                            b += 1;
                        }
                    }
                    points.push((mu, [a, b]));
                }
            }
            if points.is_empty() {
                return Err(Error::Infeasible("no lattice point of M found".into()));
            }
            let mut total = 0.0;
            for_each_sign_vector(m, |s| {
                let c = correlations(bundle, s);
                // prefix[k][n] = sum_{j<n} lambda_kj c_kj
                let prefix: Vec<Vec<f64>> = (0..2)
                    .map(|k| {
                        let mut acc = vec![0.0];
                        for j in 0..bundle.spectra[k].values.len() {
                            acc.push(acc[j] + bundle.spectra[k].values[j] * c[k][j]);
                        }
                        acc
                    })
                    .collect();
                let best = points
                    .iter()
                    .map(|(mu, n)| mu[0] * prefix[0][n[0]] + mu[1] * prefix[1][n[1]])
                    .fold(0.0, f64::max);
                total += (m as f64 * best).sqrt() / m as f64;
            })?;
            Ok(total / (1u64 << m) as f64)
        }
        _ => Err(Error::input("exhaustive Rademacher enumeration supports p <= 2")),
    }
}

/// Largest sum of `r` unscaled eigenvalues over all index sets, by enumerating subsets.
pub fn brute_force_coupled_term(bundle: &SpectralBundle, r: usize) -> f64 {
    let m = bundle.m as f64;
    let mut values: Vec<f64> = bundle
        .spectra
        .iter()
        .flat_map(|s| (0..bundle.m).map(move |j| m * s.value(j)))
        .collect();
    // Descending order fixes the summation order inside every subset, so the
    // result is bit-comparable with any other largest-first summation.
    values.sort_by(|a, b| b.total_cmp(a));
    let n = values.len();
    let mut best = f64::NEG_INFINITY;
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        best = best.max(idx.iter().map(|&i| values[i]).sum());
        // next combination in lexicographic order
        let mut i = r;
        while i > 0 && idx[i - 1] == n - r + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for t in i..r {
            idx[t] = idx[t - 1] + 1;
        }
    }
    best
}
