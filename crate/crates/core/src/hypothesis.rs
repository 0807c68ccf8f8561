//! Spectral features, the selection of (kernel, eigenvector) pairs and the
//! resulting linear hypothesis.
//!
//! With anchor sample `x_1..x_m`, the feature of pair (k, j) is
//!
//! ```text
//! c_kj(x) = sum_n K_k(x, x_n) [v_kj]_n / sqrt(m * lambda_kj)
//! ```
//!
//! and a model scores `h(x) = sum_(k,j) xi_kj * w_kj * c_kj(x)` subject to
//! `sum w_kj^2 / mu_k <= 1`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{check_m, ConstraintParams, FEAS_TOL};
use crate::error::{Error, Result};
use crate::kernels::{eval_kernel, KernelSpec};
use crate::spectral::{build_bundle, IndexSet, Pair, SpectralBundle};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Kernels plus the anchor sample that defines the spectral bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSpace {
    pub kernels: Vec<KernelSpec>,
    pub anchor: Vec<Vec<f64>>,
    pub bundle: SpectralBundle,
}

impl FeatureSpace {
    pub fn new(kernels: Vec<KernelSpec>, anchor: Vec<Vec<f64>>, rank_tol: f64) -> Result<Self> {
        if anchor.is_empty() {
            return Err(Error::input("anchor sample is empty"));
        }
        let bundle = build_bundle(&kernels, &anchor, rank_tol)?;
        Ok(FeatureSpace {
            kernels,
            anchor,
            bundle,
        })
    }

    pub fn dim(&self) -> usize {
        self.anchor[0].len()
    }

    fn check_pair(&self, pair: Pair) -> Result<()> {
        if pair.kernel >= self.bundle.num_kernels() || pair.index >= self.bundle.spectra[pair.kernel].rank {
            return Err(Error::InvalidSelection(format!(
                "pair {pair} is outside the effective rank of the bundle"
            )));
        }
        Ok(())
    }

    /// `K_k(x, x_n)` for every anchor point.
    fn kernel_row(&self, k: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.anchor
            .iter()
            .map(|a| eval_kernel(&self.kernels[k], x, a))
            .collect()
    }

    pub fn c_feature(&self, pair: Pair, x: &[f64]) -> Result<f64> {
        self.check_pair(pair)?;
        let row = self.kernel_row(pair.kernel, x)?;
        Ok(self.project_row(pair, &row))
    }

    fn project_row(&self, pair: Pair, row: &[f64]) -> f64 {
        let v = self.bundle.vector(pair);
        let lam = self.bundle.value(pair) * self.bundle.m as f64;
        let dot: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
        dot / lam.sqrt()
    }

    /// Features of every pair within the effective ranks, for each point.
    ///
    /// Row `i` holds `c_kj(points[i])` in [`SpectralBundle::pairs`] order.
    pub fn features(&self, points: &[Vec<f64>]) -> Result<FeatureMatrix> {
        let pairs = self.bundle.pairs();
        let rows: Result<Vec<Vec<f64>>> = points
            .par_iter()
            .map(|x| {
                let mut out = Vec::with_capacity(pairs.len());
                for k in 0..self.bundle.num_kernels() {
                    let row = self.kernel_row(k, x)?;
                    for j in 0..self.bundle.spectra[k].rank {
                        out.push(self.project_row(Pair::new(k, j), &row));
                    }
                }
                Ok(out)
            })
            .collect();
        Ok(FeatureMatrix { pairs, rows: rows? })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub pairs: Vec<Pair>,
    pub rows: Vec<Vec<f64>>,
}

/// Which pairs enter the projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Selection {
    /// Exactly r pairs, each with weight 1.
    Discrete { pairs: IndexSet },
    /// `xi[k][j]` in [0, 1] for every pair within the ranks, summing to r.
    Continuous { xi: Vec<Vec<f64>> },
}

impl Selection {
    pub fn weight(&self, pair: Pair) -> f64 {
        match self {
            Selection::Discrete { pairs } => {
                if pairs.contains(pair) {
                    1.0
                } else {
                    0.0
                }
            }
            Selection::Continuous { xi } => xi
                .get(pair.kernel)
                .and_then(|row| row.get(pair.index))
                .copied()
                .unwrap_or(0.0),
        }
    }

    /// Pairs with the r largest weights (the selected set itself in discrete mode).
    pub fn dominant(&self, r: usize) -> IndexSet {
        match self {
            Selection::Discrete { pairs } => pairs.clone(),
            Selection::Continuous { xi } => {
                let mut all: Vec<(f64, Pair)> = xi
                    .iter()
                    .enumerate()
                    .flat_map(|(k, row)| row.iter().enumerate().map(move |(j, &v)| (v, Pair::new(k, j))))
                    .collect();
                all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                IndexSet(all.into_iter().take(r).map(|(_, p)| p).collect())
            }
        }
    }

    fn validate(&self, bundle: &SpectralBundle, r: usize) -> Result<()> {
        match self {
            Selection::Discrete { pairs } => {
                if pairs.len() != r {
                    return Err(Error::InvalidSelection(format!(
                        "discrete selection has {} pairs, expected {r}",
                        pairs.len()
                    )));
                }
                let mut seen = pairs.canonical();
                seen.dedup();
                if seen.len() != r {
                    return Err(Error::InvalidSelection("duplicate pairs in selection".into()));
                }
                for p in pairs.pairs() {
                    if p.kernel >= bundle.num_kernels() || p.index >= bundle.spectra[p.kernel].rank {
                        return Err(Error::InvalidSelection(format!(
                            "pair {p} is outside the effective rank"
                        )));
                    }
                }
            }
            Selection::Continuous { xi } => {
                if xi.len() != bundle.num_kernels()
                    || xi.iter().zip(&bundle.spectra).any(|(row, s)| row.len() != s.rank)
                {
                    return Err(Error::InvalidSelection(
                        "continuous selection has the wrong shape".into(),
                    ));
                }
                if xi.iter().flatten().any(|v| !(*v >= -FEAS_TOL && *v <= 1.0 + FEAS_TOL)) {
                    return Err(Error::InvalidSelection("selection weights must lie in [0, 1]".into()));
                }
                let total: f64 = xi.iter().flatten().sum();
                if (total - r as f64).abs() > FEAS_TOL {
                    return Err(Error::InvalidSelection(format!(
                        "selection weights sum to {total}, expected {r}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub space: FeatureSpace,
    pub mu: Vec<f64>,
    pub selection: Selection,
    /// `weights[k][j]` for every pair within the effective rank of kernel k.
    pub weights: Vec<Vec<f64>>,
    pub params: ConstraintParams,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    kernels: Vec<KernelSpec>,
    mu: Vec<f64>,
    selection: Selection,
    weights: Vec<Vec<f64>>,
    anchor: Vec<Vec<f64>>,
    params: ConstraintParams,
    rank_tol: f64,
    bundle_hash: String,
}

impl Model {
    /// `sum_(k,j) w_kj^2 / mu_k`, the transformed norm constraint.
    pub fn weight_norm(&self) -> f64 {
        weight_norm(&self.weights, &self.mu)
    }

    /// Checks shapes, the norm constraint, membership in M and the selection.
    pub fn check_invariants(&self) -> Result<()> {
        let bundle = &self.space.bundle;
        if self.weights.len() != bundle.num_kernels()
            || self.weights.iter().zip(&bundle.spectra).any(|(w, s)| w.len() != s.rank)
        {
            return Err(Error::InvalidSelection("weights do not match the bundle ranks".into()));
        }
        let norm = self.weight_norm();
        if !(norm <= 1.0 + FEAS_TOL) {
            return Err(Error::numeric(format!("weight norm {norm} exceeds 1")));
        }
        let report = check_m(&self.mu, &self.params, bundle)?;
        if !report.feasible() {
            return Err(Error::Infeasible(format!("model weights are outside M: {report:?}")));
        }
        self.selection.validate(bundle, self.params.r)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.space.dim() {
            return Err(Error::input(format!(
                "point has dimension {}, model expects {}",
                x.len(),
                self.space.dim()
            )));
        }
        let bundle = &self.space.bundle;
        let mut h = 0.0;
        for k in 0..bundle.num_kernels() {
            let active: Vec<usize> = (0..bundle.spectra[k].rank)
                .filter(|&j| self.selection.weight(Pair::new(k, j)) != 0.0)
                .collect();
            if active.is_empty() {
                continue;
            }
            let row = self.space.kernel_row(k, x)?;
            for j in active {
                let pair = Pair::new(k, j);
                h += self.selection.weight(pair) * self.weights[k][j] * self.space.project_row(pair, &row);
            }
        }
        Ok(h)
    }

    pub fn evaluate_many(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        points.par_iter().map(|x| self.evaluate(x)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<i8> {
        Ok(sign_label(self.evaluate(x)?))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            kernels: self.space.kernels.clone(),
            mu: self.mu.clone(),
            selection: self.selection.clone(),
            weights: self.weights.clone(),
            anchor: self.space.anchor.clone(),
            params: self.params,
            rank_tol: self.space.bundle.rank_tol,
            bundle_hash: self.space.bundle.content_hash(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parses a model and rebuilds its bundle from the stored anchor sample;
    /// fails if the rebuilt bundle hash differs from the stored one.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::data(
                0,
                format!("unsupported model format version {}", file.format_version),
            ));
        }
        let space = FeatureSpace::new(file.kernels, file.anchor, file.rank_tol)?;
        let hash = space.bundle.content_hash();
        if hash != file.bundle_hash {
            return Err(Error::Verification(format!(
                "rebuilt spectral bundle hash {hash} does not match the stored {}",
                file.bundle_hash
            )));
        }
        let model = Model {
            space,
            mu: file.mu,
            selection: file.selection,
            weights: file.weights,
            params: file.params,
        };
        model.check_invariants()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn weight_norm(weights: &[Vec<f64>], mu: &[f64]) -> f64 {
    weights
        .iter()
        .zip(mu)
        .map(|(w, m)| w.iter().map(|v| v * v).sum::<f64>() / m)
        .sum()
}

/// Sign rule with ties going to +1.
pub fn sign_label(h: f64) -> i8 {
    if h >= 0.0 {
        1
    } else {
        -1
    }
}

/// Fraction of points with `y * h < rho`.
pub fn margin_loss_from_scores(scores: &[f64], labels: &[i8], rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::input(format!("margin rho must be positive, got {rho}")));
    }
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::input(
            "margin loss needs a non-empty sample with one label per score",
        ));
    }
    let below = scores
        .iter()
        .zip(labels)
        .filter(|(h, y)| f64::from(**y) * **h < rho)
        .count();
    Ok(below as f64 / scores.len() as f64)
}

pub fn margin_loss(model: &Model, points: &[Vec<f64>], labels: &[i8], rho: f64) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::input("margin loss of an empty sample"));
    }
    margin_loss_from_scores(&model.evaluate_many(points)?, labels, rho)
}

/// Fraction of points whose predicted label differs from the truth.
pub fn training_error(scores: &[f64], labels: &[i8]) -> f64 {
    let wrong = scores
        .iter()
        .zip(labels)
        .filter(|(h, y)| sign_label(**h) != **y)
        .count();
    wrong as f64 / scores.len().max(1) as f64
}
