//! Per-kernel spectra of normalized Gram matrices and the union-spectrum
//! machinery built on top of them.
//!
//! Under linearly independent base kernels the mixture covariance
//! `sum_k mu_k C_k` has eigenvalues `{mu_k * lambda_kj}`, so every
//! quantity of the weighted operator (top-r index set, Ky-Fan norm,
//! projection norms) reduces to per-kernel eigenpairs computed once.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::{normalized_gram, KernelSpec};

/// Eigenvalues below `DEFAULT_RANK_TOL * lambda_1` do not count toward the effective rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Negative eigenvalues down to `-PSD_CLAMP_TOL * lambda_1` are clamped to zero.
pub const PSD_CLAMP_TOL: f64 = 1e-8;

/// Gaps below this are reported as degenerate.
pub const EIGENGAP_FLOOR: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 10_000;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// `vectors[j]` is the unit eigenvector for `values[j]`.
    pub vectors: Vec<Vec<f64>>,
    /// Number of eigenvalues above `rank_tol * max(lambda_1, 0)`.
    pub rank: usize,
}

/// Dense symmetric eigendecomposition.
///
/// Eigenvectors are sign-normalized so that their largest-magnitude
/// coordinate (first one on ties) is positive.
pub fn eigendecompose(matrix: &DMatrix<f64>, rank_tol: f64) -> Result<Eigen> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n {
        return Err(Error::input("eigendecompose needs a non-empty square matrix"));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("matrix has non-finite entries"));
    }
    let scale = matrix.amax();
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((matrix[(i, j)] - matrix[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::input(format!(
            "matrix is not symmetric (max asymmetry {asym:e}, scale {scale:e})"
        )));
    }

    let eig = SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, MAX_SWEEPS)
        .ok_or_else(|| Error::numeric("symmetric eigensolver did not converge"))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for &col in &order {
        values.push(eig.eigenvalues[col]);
        let mut v: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
        let mut lead = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[lead].abs() {
                lead = i;
            }
        }
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        vectors.push(v);
    }
    let rank = effective_rank(&values, rank_tol);
    Ok(Eigen { values, vectors, rank })
}

fn effective_rank(values: &[f64], rank_tol: f64) -> usize {
    let top = values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    values.iter().take_while(|&&v| v > rank_tol * top).count()
}

/// A (kernel, eigen-index) pair, both 0-based. Ordered by kernel, then index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub kernel: usize,
    pub index: usize,
}

impl Pair {
    pub fn new(kernel: usize, index: usize) -> Self {
        Pair { kernel, index }
    }
}

impl std::fmt::Display for Pair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.kernel, self.index)
    }
}

/// Eigenpairs of one normalized Gram matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpectrum {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub rank: usize,
}

impl KernelSpectrum {
    /// Eigenvalue `j`, treating everything at or beyond the effective rank as zero.
    pub fn value(&self, j: usize) -> f64 {
        if j < self.rank {
            self.values[j]
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralBundle {
    /// Size of the anchor sample.
    pub m: usize,
    pub rank_tol: f64,
    pub anchor_hash: String,
    pub spectra: Vec<KernelSpectrum>,
}

/// SHA-256 over the bit patterns of a point list.
pub fn anchor_hash(points: &[Vec<f64>]) -> String {
    let mut h = Sha256::new();
    h.update((points.len() as u64).to_le_bytes());
    for p in points {
        h.update((p.len() as u64).to_le_bytes());
        for v in p {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Computes per-kernel eigenpairs of the normalized Gram matrices on `points`.
pub fn build_bundle(kernels: &[KernelSpec], points: &[Vec<f64>], rank_tol: f64) -> Result<SpectralBundle> {
    if kernels.is_empty() {
        return Err(Error::input("at least one kernel is required"));
    }
    if !(0.0..1.0).contains(&rank_tol) {
        return Err(Error::input(format!(
            "rank tolerance must lie in [0, 1), got {rank_tol}"
        )));
    }
    let mut spectra = Vec::with_capacity(kernels.len());
    for spec in kernels {
        let kbar = normalized_gram(spec, points)?;
        let mut eig = eigendecompose(&kbar, rank_tol)?;
        let top = eig.values[0].max(0.0);
        for v in eig.values.iter_mut() {
            if *v < 0.0 {
                if *v < -PSD_CLAMP_TOL * top {
                    return Err(Error::numeric(format!(
                        "{} Gram matrix is not PSD (eigenvalue {v:e})",
                        spec.label()
                    )));
                }
                *v = 0.0;
            }
        }
        spectra.push(KernelSpectrum {
            values: eig.values,
            vectors: eig.vectors,
            rank: eig.rank,
        });
    }
    Ok(SpectralBundle {
        m: points.len(),
        rank_tol,
        anchor_hash: anchor_hash(points),
        spectra,
    })
}

impl SpectralBundle {
    /// Assembles a bundle from explicitly given spectra (synthetic experiments and tests).
    ///
    /// Ranks are recomputed from `rank_tol`; vectors must have length `m`.
    pub fn from_spectra(m: usize, rank_tol: f64, spectra: Vec<(Vec<f64>, Vec<Vec<f64>>)>) -> Result<Self> {
        if spectra.is_empty() {
            return Err(Error::input("at least one spectrum is required"));
        }
        let mut out = Vec::with_capacity(spectra.len());
        for (values, vectors) in spectra {
            if values.len() != vectors.len() || vectors.iter().any(|v| v.len() != m) {
                return Err(Error::input("spectrum shape does not match sample size"));
            }
            if values.windows(2).any(|w| w[0] < w[1]) || values.iter().any(|v| *v < 0.0) {
                return Err(Error::input("eigenvalues must be non-negative and non-increasing"));
            }
            let rank = effective_rank(&values, rank_tol);
            out.push(KernelSpectrum { values, vectors, rank });
        }
        Ok(SpectralBundle {
            m,
            rank_tol,
            anchor_hash: String::from("synthetic"),
            spectra: out,
        })
    }

    pub fn num_kernels(&self) -> usize {
        self.spectra.len()
    }

    /// Sum of effective ranks.
    pub fn total_rank(&self) -> usize {
        self.spectra.iter().map(|s| s.rank).sum()
    }

    pub fn value(&self, pair: Pair) -> f64 {
        self.spectra[pair.kernel].value(pair.index)
    }

    pub fn vector(&self, pair: Pair) -> &[f64] {
        &self.spectra[pair.kernel].vectors[pair.index]
    }

    /// All pairs within the effective ranks, in (kernel, index) order.
    pub fn pairs(&self) -> Vec<Pair> {
        self.spectra
            .iter()
            .enumerate()
            .flat_map(|(k, s)| (0..s.rank).map(move |j| Pair::new(k, j)))
            .collect()
    }

    /// SHA-256 over the eigenvalue and eigenvector bits.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.m as u64).to_le_bytes());
        h.update(self.rank_tol.to_bits().to_le_bytes());
        h.update(self.anchor_hash.as_bytes());
        for s in &self.spectra {
            h.update((s.rank as u64).to_le_bytes());
            for v in &s.values {
                h.update(v.to_bits().to_le_bytes());
            }
            for vec in &s.vectors {
                for v in vec {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: SpectralBundle = serde_json::from_str(text)?;
        for s in &bundle.spectra {
            if s.values.len() != s.vectors.len()
                || s.vectors.iter().any(|v| v.len() != bundle.m)
                || s.rank > s.values.len()
            {
                return Err(Error::data(0, "spectral bundle has inconsistent shapes"));
            }
        }
        Ok(bundle)
    }

    fn check_weights(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != self.num_kernels() {
            return Err(Error::input(format!(
                "weight vector has length {}, expected {}",
                mu.len(),
                self.num_kernels()
            )));
        }
        if mu.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::input("weights must be finite and non-negative"));
        }
        Ok(())
    }
}

/// One member of the union spectrum `{mu_k * lambda_kj}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnionEntry {
    pub value: f64,
    pub pair: Pair,
}

/// Weighted eigenvalues over all pairs within the effective ranks, sorted
/// descending with ties broken toward the smaller (kernel, index).
pub fn union_spectrum(bundle: &SpectralBundle, mu: &[f64]) -> Result<Vec<UnionEntry>> {
    bundle.check_weights(mu)?;
    let mut entries: Vec<UnionEntry> = bundle
        .pairs()
        .into_iter()
        .map(|pair| UnionEntry {
            value: mu[pair.kernel] * bundle.value(pair),
            pair,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.value
            .partial_cmp(&a.value)
            .unwrap_or(Ordering::Equal)
            .then(a.pair.cmp(&b.pair))
    });
    Ok(entries)
}

/// The `r` pairs selected by the rank-r projection, in union-spectrum order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexSet(pub Vec<Pair>);

impl IndexSet {
    pub fn pairs(&self) -> &[Pair] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, pair: Pair) -> bool {
        self.0.contains(&pair)
    }

    /// Number of selected pairs per kernel.
    pub fn composition(&self, p: usize) -> Vec<usize> {
        let mut counts = vec![0; p];
        for pair in &self.0 {
            counts[pair.kernel] += 1;
        }
        counts
    }

    /// Same pairs in (kernel, index) order; identifies the set irrespective of ranking.
    pub fn canonical(&self) -> Vec<Pair> {
        let mut v = self.0.clone();
        v.sort();
        v
    }

    /// Builds the prefix index set with `counts[k]` leading eigenpairs of kernel `k`.
    pub fn from_composition(counts: &[usize]) -> Self {
        IndexSet(
            counts
                .iter()
                .enumerate()
                .flat_map(|(k, &n)| (0..n).map(move |j| Pair::new(k, j)))
                .collect(),
        )
    }

    /// Space-separated `kernel:index` tokens.
    pub fn to_token_string(&self) -> String {
        self.canonical()
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn check_r(bundle: &SpectralBundle, r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::Config("r must be at least 1".into()));
    }
    let total = bundle.total_rank();
    if r > total {
        return Err(Error::Config(format!(
            "r = {r} exceeds the total effective rank {total}"
        )));
    }
    Ok(())
}

pub fn top_r_index_set(bundle: &SpectralBundle, mu: &[f64], r: usize) -> Result<IndexSet> {
    check_r(bundle, r)?;
    let entries = union_spectrum(bundle, mu)?;
    Ok(IndexSet(entries.into_iter().take(r).map(|e| e.pair).collect()))
}

/// Ky-Fan r-norm of the mixture covariance: sum of the r largest `mu_k * lambda_kj`.
pub fn kyfan_r(bundle: &SpectralBundle, mu: &[f64], r: usize) -> Result<f64> {
    check_r(bundle, r)?;
    let entries = union_spectrum(bundle, mu)?;
    Ok(entries.iter().take(r).map(|e| e.value).sum())
}

/// Minimum over kernels of `lambda_r - lambda_{r+1}` of the empirical spectra.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigengap {
    pub value: f64,
    /// True when the gap fell below [`EIGENGAP_FLOOR`]; `value` is then 0.
    pub degenerate: bool,
    /// True when computed from sample spectra rather than known operators.
    pub plugin: bool,
}

impl Eigengap {
    /// An analytically known gap (synthetic experiments).
    pub fn exact(value: f64) -> Self {
        let degenerate = !(value >= EIGENGAP_FLOOR);
        Eigengap {
            value: if degenerate { 0.0 } else { value },
            degenerate,
            plugin: false,
        }
    }
}

pub fn eigengap_plugin(bundle: &SpectralBundle, r: usize) -> Result<Eigengap> {
    if r == 0 {
        return Err(Error::Config("r must be at least 1".into()));
    }
    let gap = bundle
        .spectra
        .iter()
        .map(|s| s.value(r - 1) - s.value(r))
        .fold(f64::INFINITY, f64::min);
    let degenerate = !(gap >= EIGENGAP_FLOOR);
    Ok(Eigengap {
        value: if degenerate { 0.0 } else { gap },
        degenerate,
        plugin: true,
    })
}

/// Squared correlations `(v_kj . sigma)^2` for every pair within the effective ranks.
pub fn sigma_correlations(bundle: &SpectralBundle, sigma: &[f64]) -> Result<Vec<Vec<f64>>> {
    if sigma.len() != bundle.m {
        return Err(Error::input(format!(
            "sign vector has length {}, expected {}",
            sigma.len(),
            bundle.m
        )));
    }
    Ok(bundle
        .spectra
        .iter()
        .map(|s| {
            s.vectors[..s.rank]
                .iter()
                .map(|v| {
                    let c: f64 = v.iter().zip(sigma).map(|(a, b)| a * b).sum();
                    c * c
                })
                .collect()
        })
        .collect())
}

/// `|| Pi sum_n sigma_n Phi(x_n) ||` for the rank-r projection induced by `mu`,
/// computed as `sqrt(m * sum_{(k,j) in I_mu} mu_k lambda_kj (v_kj . sigma)^2)`.
pub fn projected_sigma_norm(bundle: &SpectralBundle, mu: &[f64], r: usize, sigma: &[f64]) -> Result<f64> {
    let index = top_r_index_set(bundle, mu, r)?;
    let corr = sigma_correlations(bundle, sigma)?;
    let sum: f64 = index
        .pairs()
        .iter()
        .map(|p| mu[p.kernel] * bundle.value(*p) * corr[p.kernel][p.index])
        .sum();
    Ok((bundle.m as f64 * sum).sqrt())
}
