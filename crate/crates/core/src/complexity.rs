//! Complexity estimates and generalization bounds: Monte-Carlo Rademacher
//! estimation, the upper and lower bound calculators, and the numerical
//! checks of the inequalities they rest on.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{compositions, kappa, project_to_m, region_problem, ConstraintParams, MSet};
use crate::convex::{Objective, Problem};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{eval_kernel, normalize_spec, KernelSpec};
use crate::oracle::for_each_sign_vector;
use crate::spectral::{
    build_bundle, eigendecompose, sigma_correlations, top_r_index_set, Eigengap, SpectralBundle, DEFAULT_RANK_TOL,
};

/// `eta_0` in the learning-kernels term.
pub const ETA0: f64 = 23.0 / 22.0;

/// Above this many compositions the inner sup only visits multistart-induced ones.
pub const MAX_REGIONS: usize = 256;

/// Number of starts used when the composition count exceeds [`MAX_REGIONS`].
pub const MULTISTARTS: usize = 16;

/// Mean and standard error of a Monte-Carlo average.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub draws: usize,
}

impl McEstimate {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        McEstimate {
            estimate: mean,
            stderr: (var / n).sqrt(),
            draws: values.len(),
        }
    }
}

/// Rademacher sign vector for draw `index`; depends only on (seed, index).
pub fn sign_vector(seed: u64, index: u64, m: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..m).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Averages `f(sigma)` over `draws` sign vectors. Draws run in parallel and
/// are summed in index order, so the result does not depend on thread count.
pub fn monte_carlo<F>(m: usize, draws: usize, seed: u64, f: F) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if draws == 0 {
        return Err(Error::input("at least one draw is required"));
    }
    let values: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|i| f(&sign_vector(seed, i, m)))
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_values(&values))
}

fn exhaustive<F>(m: usize, f: F) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut values = Vec::with_capacity(1 << m.min(20));
    let mut err = None;
    for_each_sign_vector(m, |s| match f(s) {
        Ok(v) => values.push(v),
        Err(e) => err = Some(e),
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(McEstimate {
        estimate: mean,
        stderr: 0.0,
        draws: values.len(),
    })
}

struct Region {
    counts: Vec<usize>,
    problem: Problem,
    start: Vec<f64>,
}

/// `sup_{mu in M} || Pi_mu sum_n sigma_n Phi(x_n) ||` for a fixed bundle and M.
///
/// For one kernel the sup is closed-form. For several kernels M is split into
/// the regions where the top-r set has a fixed per-kernel composition; there
/// the objective is linear in mu and each region is solved by a barrier method.
pub struct InnerSup<'a> {
    bundle: &'a SpectralBundle,
    params: ConstraintParams,
    kind: SupKind,
}

enum SupKind {
    Analytic { mu_max: f64 },
    Regions { regions: Vec<Region>, exhaustive: bool },
}

impl<'a> InnerSup<'a> {
    /// Prepares the solver; `seed` drives the random starts of the multistart fallback.
    pub fn new(bundle: &'a SpectralBundle, params: &ConstraintParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let r = params.r;
        if r > bundle.total_rank() {
            return Err(Error::Config(format!(
                "r = {r} exceeds the total effective rank {}",
                bundle.total_rank()
            )));
        }
        let p = bundle.num_kernels();
        let kind = if p == 1 {
            let top: f64 = (0..r).map(|j| bundle.spectra[0].value(j)).sum();
            let mu_max = (params.lambda_r / top).min(1.0);
            if mu_max * params.nu < 1.0 {
                return Err(Error::Infeasible(format!(
                    "M is empty: the Ky-Fan budget allows mu <= {mu_max}, the inverse-sum budget needs mu >= {}",
                    1.0 / params.nu
                )));
            }
            SupKind::Analytic { mu_max }
        } else {
            MSet::new(bundle, params)?.interior_point()?;
            let all = compositions(bundle, r);
            let exhaustive = all.len() <= MAX_REGIONS;
            let chosen = if exhaustive {
                all
            } else {
                multistart_compositions(bundle, params, seed)?
            };
            let uniform = vec![1.0 / p as f64; p];
            let regions = chosen
                .into_iter()
                .filter_map(|counts| {
                    let problem = region_problem(bundle, params, &counts, 0.0);
                    let start = problem.strictly_feasible_point(&uniform)?;
                    Some(Region { counts, problem, start })
                })
                .collect::<Vec<_>>();
            if regions.is_empty() {
                return Err(Error::numeric("no region of M with non-empty interior was found"));
            }
            SupKind::Regions { regions, exhaustive }
        };
        Ok(InnerSup {
            bundle,
            params: *params,
            kind,
        })
    }

    pub fn method(&self) -> &'static str {
        match &self.kind {
            SupKind::Analytic { .. } => "analytic",
            SupKind::Regions { exhaustive: true, .. } => "region-enumeration",
            SupKind::Regions { exhaustive: false, .. } => "multistart-regions",
        }
    }

    /// Whether the value is only a lower estimate of the true sup.
    pub fn is_lower_estimate(&self) -> bool {
        !matches!(self.kind, SupKind::Analytic { .. })
    }

    pub fn value(&self, sigma: &[f64]) -> Result<f64> {
        let corr = sigma_correlations(self.bundle, sigma)?;
        let m = self.bundle.m as f64;
        let best = match &self.kind {
            SupKind::Analytic { mu_max } => {
                let e: f64 = (0..self.params.r)
                    .map(|j| self.bundle.spectra[0].values[j] * corr[0][j])
                    .sum();
                mu_max * e
            }
            SupKind::Regions { regions, .. } => {
                let mut best = 0.0_f64;
                for region in regions {
                    let b: Vec<f64> = region
                        .counts
                        .iter()
                        .enumerate()
                        .map(|(k, &n)| (0..n).map(|j| self.bundle.spectra[k].values[j] * corr[k][j]).sum())
                        .collect();
                    if b.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    let neg: Vec<f64> = b.iter().map(|v| -v).collect();
                    let mu = region
                        .problem
                        .minimize(&region.start, Objective::Linear(&neg), 1e-10)
                        .ok_or_else(|| Error::numeric("barrier solver failed on a region of M"))?;
                    best = best.max(b.iter().zip(&mu).map(|(a, c)| a * c).sum());
                }
                best
            }
        };
        Ok((m * best.max(0.0)).sqrt())
    }

    /// For one kernel: the dual-norm relaxation `sqrt(m mu_max sum_{j<r} lambda_j * max_{j<r} c_j)`,
    /// an upper bound on [`InnerSup::value`] with equality at r = 1.
    pub fn dual_norm_relaxation(&self, sigma: &[f64]) -> Result<f64> {
        let SupKind::Analytic { mu_max } = self.kind else {
            return Err(Error::input("the dual-norm relaxation is defined for a single kernel"));
        };
        let corr = sigma_correlations(self.bundle, sigma)?;
        let r = self.params.r;
        let top: f64 = (0..r).map(|j| self.bundle.spectra[0].values[j]).sum();
        let max = corr[0][..r].iter().copied().fold(0.0, f64::max);
        Ok((self.bundle.m as f64 * mu_max * top * max).sqrt())
    }
}

/// Compositions of the top-r sets at the uniform point, the projected vertices
/// and random interior points of M.
fn multistart_compositions(bundle: &SpectralBundle, params: &ConstraintParams, seed: u64) -> Result<Vec<Vec<usize>>> {
    let p = bundle.num_kernels();
    let mut starts = vec![vec![1.0 / p as f64; p]];
    for k in 0..p {
        let mut v = vec![1e-3; p];
        v[k] = 1.0;
        starts.push(v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while starts.len() < MULTISTARTS {
        starts.push((0..p).map(|_| rng.random_range(0.01..1.0)).collect());
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    for s in starts {
        let mu = project_to_m(&s, params, bundle)?;
        let counts = top_r_index_set(bundle, &mu, params.r)?.composition(p);
        if !out.contains(&counts) {
            out.push(counts);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum RademacherMethod {
    MonteCarlo {
        draws: usize,
        seed: u64,
    },
    /// Every sign vector (m <= 20).
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub draws: usize,
    pub method: RademacherMethod,
    /// How the inner sup over M was computed.
    pub sup_method: String,
    /// True when the inner sup is solved numerically (the estimate is then a lower estimate).
    pub lower_estimate: bool,
    pub m: usize,
    pub p: usize,
    pub params: ConstraintParams,
}

impl RademacherEstimate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let seed = match self.method {
            RademacherMethod::MonteCarlo { seed, .. } => seed.to_string(),
            RademacherMethod::Exhaustive => String::new(),
        };
        format!(
            "estimate,stderr,draws,seed,sup_method,lower_estimate,m,p,r,lambda_r,nu,delta\n{:e},{:e},{},{},{},{},{},{},{},{:e},{:e},{:e}\n",
            self.estimate,
            self.stderr,
            self.draws,
            seed,
            self.sup_method,
            self.lower_estimate,
            self.m,
            self.p,
            self.params.r,
            self.params.lambda_r,
            self.params.nu,
            self.params.delta
        )
    }
}

/// Empirical Rademacher complexity `E_sigma (1/m) sup_{mu in M} ||Pi_mu sum sigma_n Phi(x_n)||`.
pub fn estimate_rademacher(
    bundle: &SpectralBundle,
    params: &ConstraintParams,
    method: RademacherMethod,
) -> Result<RademacherEstimate> {
    let seed = match method {
        RademacherMethod::MonteCarlo { seed, .. } => seed,
        RademacherMethod::Exhaustive => 0,
    };
    let sup = InnerSup::new(bundle, params, seed)?;
    let m = bundle.m;
    let per_draw = |s: &[f64]| sup.value(s).map(|v| v / m as f64);
    let mc = match method {
        RademacherMethod::MonteCarlo { draws, seed } => monte_carlo(m, draws, seed, per_draw)?,
        RademacherMethod::Exhaustive => exhaustive(m, per_draw)?,
    };
    Ok(RademacherEstimate {
        estimate: mc.estimate,
        stderr: mc.stderr,
        draws: mc.draws,
        method,
        sup_method: sup.method().to_string(),
        lower_estimate: sup.is_lower_estimate(),
        m,
        p: bundle.num_kernels(),
        params: *params,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Terms {
    pub rho: f64,
    pub margin_loss: f64,
    /// `(2 / rho) * complexity total`.
    pub complexity_term: f64,
    /// `3 sqrt(log(4p/delta) / (2m))`.
    pub confidence_term: f64,
    pub total: f64,
}

/// Upper bound on the empirical Rademacher complexity and the derived margin bound.
///
/// Non-finite values serialize as `null` in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub p: usize,
    pub m: usize,
    pub params: ConstraintParams,
    pub kappa: f64,
    pub eigengap: Eigengap,
    /// `sqrt(2 (Lambda + kappa) log(2pm) / m)`.
    pub term1: f64,
    /// `8 kappa nu sqrt(eta0 e ceil(log p)) / (gap sqrt(m))`.
    pub term2: f64,
    pub total: f64,
    /// `sqrt(m) > 2 kappa / gap`.
    pub precondition_holds: bool,
    /// `ceil(log p) = 0` (single kernel): the learning-kernels term vanishes.
    pub single_kernel_degenerate: bool,
    pub theorem2: Option<Theorem2Terms>,
    /// Lower bound `sqrt(Lambda / (2m))`, where it applies.
    pub lower_bound: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl BoundReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let t2 = self.theorem2;
        let mut out = String::from(
            "p,m,r,lambda_r,nu,delta,kappa,eigengap,eigengap_plugin,eigengap_degenerate,term1,term2,total,precondition_holds,rho,margin_loss,theorem2_total,lower_bound\n",
        );
        let _ = writeln!(
            out,
            "{},{},{},{:e},{:e},{:e},{:e},{:e},{},{},{:e},{:e},{:e},{},{},{},{},{}",
            self.p,
            self.m,
            self.params.r,
            self.params.lambda_r,
            self.params.nu,
            self.params.delta,
            self.kappa,
            self.eigengap.value,
            self.eigengap.plugin,
            self.eigengap.degenerate,
            self.term1,
            self.term2,
            self.total,
            self.precondition_holds,
            opt(t2.map(|t| t.rho)),
            opt(t2.map(|t| t.margin_loss)),
            opt(t2.map(|t| t.total)),
            opt(self.lower_bound)
        );
        out
    }
}

/// The complexity upper bound for `p` kernels and `m` labeled points.
pub fn theorem1_bound(params: &ConstraintParams, p: usize, m: usize, gap: Eigengap) -> Result<BoundReport> {
    params.validate()?;
    if m == 0 {
        return Err(Error::input("sample size must be positive"));
    }
    let k = kappa(p, params.delta)?;
    let mf = m as f64;
    let term1 = (2.0 * (params.lambda_r + k) * (2.0 * p as f64 * mf).ln() / mf).sqrt();
    let ceil_log_p = (p as f64).ln().ceil();
    let mut diagnostics = Vec::new();
    let single = ceil_log_p == 0.0;
    if single {
        diagnostics.push("single kernel: ceil(log p) = 0, so the learning-kernels term is zero".into());
    }
    let term2 = if single {
        0.0
    } else if gap.degenerate {
        diagnostics.push("eigengap is zero: the projection term is unbounded".into());
        f64::INFINITY
    } else {
        8.0 * k * params.nu * (ETA0 * std::f64::consts::E * ceil_log_p).sqrt() / (gap.value * mf.sqrt())
    };
    let precondition_holds = !gap.degenerate && mf.sqrt() > 2.0 * k / gap.value;
    if !precondition_holds {
        diagnostics.push(format!(
            "sample-size precondition sqrt(m) > 2 kappa / gap fails (sqrt(m) = {:.4}, 2 kappa / gap = {:.4})",
            mf.sqrt(),
            if gap.degenerate {
                f64::INFINITY
            } else {
                2.0 * k / gap.value
            }
        ));
    }
    if gap.plugin {
        diagnostics.push("eigengap is a plug-in estimate from the sample spectra".into());
    }
    Ok(BoundReport {
        p,
        m,
        params: *params,
        kappa: k,
        eigengap: gap,
        term1,
        term2,
        total: term1 + term2,
        precondition_holds,
        single_kernel_degenerate: single,
        theorem2: None,
        lower_bound: None,
        diagnostics,
    })
}

/// Adds the margin bound `R_rho + (2/rho) total + 3 sqrt(log(4p/delta) / (2m))`.
pub fn theorem2_bound(report: &BoundReport, margin_loss: f64, rho: f64) -> Result<BoundReport> {
    if !(rho > 0.0) {
        return Err(Error::input(format!("margin rho must be positive, got {rho}")));
    }
    if !(0.0..=1.0).contains(&margin_loss) {
        return Err(Error::input("margin loss must lie in [0, 1]"));
    }
    let complexity_term = 2.0 / rho * report.total;
    let confidence_term = 3.0 * ((4.0 * report.p as f64 / report.params.delta).ln() / (2.0 * report.m as f64)).sqrt();
    let mut out = report.clone();
    out.theorem2 = Some(Theorem2Terms {
        rho,
        margin_loss,
        complexity_term,
        confidence_term,
        total: margin_loss + complexity_term + confidence_term,
    });
    Ok(out)
}

/// `sqrt(Lambda / (2m))`.
pub fn theorem3_value(lambda_r: f64, m: usize) -> f64 {
    (lambda_r / (2.0 * m as f64)).sqrt()
}

/// Instance on which the complexity is bounded below by `sqrt(Lambda / (2m))`.
#[derive(Clone, Debug)]
pub struct LowerBoundInstance {
    /// S = U, alternating labels.
    pub data: Dataset,
    /// Normalized linear kernel.
    pub kernel: KernelSpec,
    pub params: ConstraintParams,
    pub bundle: SpectralBundle,
    pub lower_bound: f64,
}

/// A single linear kernel whose normalized Gram matrix has exactly r distinct
/// non-zero eigenvalues (ratios 4^-j), with Ky-Fan budget `lambda_target`.
pub fn lower_bound_construct(m: usize, r: usize, lambda_target: f64) -> Result<LowerBoundInstance> {
    if r == 0 || r >= m {
        return Err(Error::input(format!("need 1 <= r < m, got r = {r}, m = {m}")));
    }
    if !(lambda_target > 0.0) {
        return Err(Error::input("Ky-Fan budget must be positive"));
    }
    let mf = m as f64;
    // Orthonormal columns: constant, then DCT-II cosines.
    let q = |i: usize, j: usize| -> f64 {
        if j == 0 {
            1.0 / mf.sqrt()
        } else {
            (2.0 / mf).sqrt() * (std::f64::consts::PI * (i as f64 + 0.5) * j as f64 / mf).cos()
        }
    };
    let points: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..r).map(|j| q(i, j) * (mf * 4f64.powi(-(j as i32))).sqrt()).collect())
        .collect();
    let labels: Vec<i8> = (0..m).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    let kernel = normalize_spec(&KernelSpec::linear(), &points)?;
    let bundle = build_bundle(std::slice::from_ref(&kernel), &points, DEFAULT_RANK_TOL)?;
    let top = bundle.spectra[0].value(0);
    if lambda_target > top {
        return Err(Error::input(format!(
            "Ky-Fan budget {lambda_target} exceeds the largest achievable eigenvalue {top}"
        )));
    }
    let trace: f64 = bundle.spectra[0].values.iter().sum();
    let params = ConstraintParams {
        r,
        lambda_r: lambda_target,
        nu: (2.0 * trace / lambda_target).max(1.0),
        delta: 0.05,
    };
    Ok(LowerBoundInstance {
        data: Dataset::same_sample(points, labels)?,
        kernel,
        params,
        bundle,
        lower_bound: theorem3_value(lambda_target, m),
    })
}

/// Monte-Carlo estimate of `E |v . sigma|` for a unit vector `v`.
pub fn khintchine_check(v: &[f64], draws: usize, seed: u64) -> Result<McEstimate> {
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::input(format!("vector must have unit norm, got {norm}")));
    }
    monte_carlo(v.len(), draws, seed, |s| {
        Ok(v.iter().zip(s).map(|(a, b)| a * b).sum::<f64>().abs())
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassartCheck {
    pub mc: McEstimate,
    /// `sqrt(2 log(2pm))`.
    pub bound: f64,
}

/// Monte-Carlo estimate of `E max_(k,j,s) s v_kj . sigma` against the finite-class bound.
pub fn massart_check(bundle: &SpectralBundle, draws: usize, seed: u64) -> Result<MassartCheck> {
    let vectors: Vec<&Vec<f64>> = bundle.spectra.iter().flat_map(|s| s.vectors[..s.rank].iter()).collect();
    let mc = monte_carlo(bundle.m, draws, seed, |s| {
        Ok(vectors
            .iter()
            .map(|v| v.iter().zip(s).map(|(a, b)| a * b).sum::<f64>().abs())
            .fold(0.0, f64::max))
    })?;
    let bound = (2.0 * (2.0 * bundle.num_kernels() as f64 * bundle.m as f64).ln()).sqrt();
    Ok(MassartCheck { mc, bound })
}

/// The two-by-two example showing the eigengap dependence is tight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigengapExample {
    /// Trace (nuclear) norm of `P1(A) - P1(B)`.
    pub lhs: f64,
    /// Operator norm of `P1(A) - P1(B)`.
    pub lhs_operator: f64,
    /// `2 ||A - B|| / (lambda_1(A) - lambda_2(A))` with the operator norm.
    pub rhs: f64,
}

/// `A = diag(1 + eps, 1)`, `B = diag(1, 1 + eps)`.
pub fn eigengap_proposition(eps: f64) -> Result<EigengapExample> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::input("epsilon must be positive"));
    }
    let a = DMatrix::from_row_slice(2, 2, &[1.0 + eps, 0.0, 0.0, 1.0]);
    let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0 + eps]);
    let top_projector = |m: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let e = eigendecompose(m, 0.0)?;
        let v = nalgebra::DVector::from_column_slice(&e.vectors[0]);
        Ok(&v * v.transpose())
    };
    let diff = top_projector(&a)? - top_projector(&b)?;
    let sv = diff.singular_values();
    let ea = eigendecompose(&a, 0.0)?;
    let gap = ea.values[0] - ea.values[1];
    let dist = (&a - &b).singular_values().max();
    Ok(EigengapExample {
        lhs: sv.sum(),
        lhs_operator: sv.max(),
        rhs: 2.0 * dist / gap,
    })
}

/// Synthetic distribution for the projection-concentration experiment: one
/// block of independent zero-mean Gaussian coordinates per kernel, with the
/// given variances, and a coordinate-linear kernel on each block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationConfig {
    pub block_variances: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub r: usize,
    pub sizes: Vec<usize>,
    /// u = u_factor * m.
    pub u_factor: usize,
    pub trials: usize,
    /// Random test functions per trial.
    pub test_functions: usize,
    pub delta: f64,
    pub seed: u64,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        ConcentrationConfig {
            block_variances: vec![vec![1.0, 0.25], vec![0.5, 0.1]],
            mu: vec![0.5, 0.5],
            r: 1,
            sizes: vec![50, 100, 200, 400],
            u_factor: 4,
            trials: 200,
            test_functions: 10,
            delta: 0.05,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub m: usize,
    pub u: usize,
    /// `8 kappa nu / (gap sqrt(m))`.
    pub bound_coefficient: f64,
    /// Fraction of trials where every test function satisfied the inequality.
    pub satisfaction_rate: f64,
    /// Mean of `||(Pi_U - Pi_S) v|| / ||v||`.
    pub mean_difference: f64,
    pub max_difference: f64,
    /// Mean and max of `| ||C_U||_(r) - ||C_S||_(r) |`.
    pub kyfan_drift_mean: f64,
    pub kyfan_drift_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub config: ConcentrationConfig,
    pub kappa: f64,
    pub nu: f64,
    /// Exact gap of the per-kernel population covariances.
    pub eigengap: f64,
    pub rows: Vec<ConcentrationRow>,
    /// Least-squares slope of log(mean difference) against log(m).
    pub slope: f64,
}

/// Top-r eigenspace projector of `blockdiag(mu_k C_k)` built from `points`.
pub fn mixture_projector(
    points: &[Vec<f64>],
    blocks: &[Vec<usize>],
    mu: &[f64],
    r: usize,
) -> Result<(DMatrix<f64>, f64)> {
    let d: usize = blocks.iter().map(|b| b.len()).sum();
    let n = points.len() as f64;
    let mut cov = DMatrix::zeros(d, d);
    let mut offset = 0;
    for (k, block) in blocks.iter().enumerate() {
        for x in points {
            for (a, &ca) in block.iter().enumerate() {
                for (b, &cb) in block.iter().enumerate() {
                    cov[(offset + a, offset + b)] += mu[k] * x[ca] * x[cb] / n;
                }
            }
        }
        offset += block.len();
    }
    let eig = eigendecompose(&cov, 0.0)?;
    let mut proj = DMatrix::zeros(d, d);
    for v in &eig.vectors[..r] {
        let v = nalgebra::DVector::from_column_slice(v);
        proj += &v * v.transpose();
    }
    Ok((proj, eig.values[..r].iter().sum()))
}

/// Empirical check that rank-r projections built on S and on U stay close.
pub fn concentration_experiment(cfg: &ConcentrationConfig) -> Result<ConcentrationReport> {
    let p = cfg.block_variances.len();
    if p == 0 || cfg.mu.len() != p || cfg.mu.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::input("one positive weight per block is required"));
    }
    if cfg.r == 0 || cfg.trials == 0 || cfg.test_functions == 0 || cfg.u_factor == 0 {
        return Err(Error::input("r, trials, test_functions and u_factor must be positive"));
    }
    let mut gap = f64::INFINITY;
    for vars in &cfg.block_variances {
        let mut s = vars.clone();
        s.sort_by(|a, b| b.total_cmp(a));
        let at = |j: usize| s.get(j).copied().unwrap_or(0.0);
        gap = gap.min(at(cfg.r - 1) - at(cfg.r));
    }
    let mut mixture: Vec<f64> = cfg
        .block_variances
        .iter()
        .zip(&cfg.mu)
        .flat_map(|(v, m)| v.iter().map(move |x| x * m))
        .collect();
    mixture.sort_by(|a, b| b.total_cmp(a));
    let mixture_gap = mixture.get(cfg.r - 1).copied().unwrap_or(0.0) - mixture.get(cfg.r).copied().unwrap_or(0.0);
    if !(gap > 0.0) || !(mixture_gap > 0.0) {
        return Err(Error::input("generator has a zero eigengap at r"));
    }
    let k = kappa(p, cfg.delta)?;
    let nu: f64 = cfg.mu.iter().map(|m| 1.0 / m).sum();
    let mut blocks = Vec::new();
    let mut stds = Vec::new();
    for vars in &cfg.block_variances {
        let start = stds.len();
        blocks.push((start..start + vars.len()).collect::<Vec<_>>());
        stds.extend(vars.iter().map(|v| v.sqrt()));
    }
    let d = stds.len();
    let mut rows = Vec::new();
    for &m in &cfg.sizes {
        let u = cfg.u_factor * m;
        let coef = 8.0 * k * nu / (gap * (m as f64).sqrt());
        let trials: Vec<(bool, f64, f64, f64)> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (m as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                rng.set_stream(t);
                let mut draw = |n: usize| -> Vec<Vec<f64>> {
                    (0..n)
                        .map(|_| stds.iter().map(|s| s * rng.sample::<f64, _>(StandardNormal)).collect())
                        .collect()
                };
                let s_pts = draw(m);
                let u_pts = draw(u);
                let (ps, ks) = mixture_projector(&s_pts, &blocks, &cfg.mu, cfg.r)?;
                let (pu, ku) = mixture_projector(&u_pts, &blocks, &cfg.mu, cfg.r)?;
                let diff = pu - ps;
                let mut ok = true;
                let mut sum = 0.0;
                let mut max = 0.0_f64;
                for _ in 0..cfg.test_functions {
                    let v = nalgebra::DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let ratio = (&diff * &v).norm() / v.norm();
                    ok &= ratio <= coef;
                    sum += ratio;
                    max = max.max(ratio);
                }
                Ok((ok, sum / cfg.test_functions as f64, max, (ku - ks).abs()))
            })
            .collect::<Result<_>>()?;
        let n = trials.len() as f64;
        rows.push(ConcentrationRow {
            m,
            u,
            bound_coefficient: coef,
            satisfaction_rate: trials.iter().filter(|t| t.0).count() as f64 / n,
            mean_difference: trials.iter().map(|t| t.1).sum::<f64>() / n,
            max_difference: trials.iter().map(|t| t.2).fold(0.0, f64::max),
            kyfan_drift_mean: trials.iter().map(|t| t.3).sum::<f64>() / n,
            kyfan_drift_max: trials.iter().map(|t| t.3).fold(0.0, f64::max),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.m as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_difference.ln()).collect();
    Ok(ConcentrationReport {
        config: cfg.clone(),
        kappa: k,
        nu,
        eigengap: gap,
        slope: least_squares_slope(&xs, &ys),
        rows,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityTerms {
    /// Largest sum of r unscaled eigenvalues taken from any kernels.
    pub coupled: f64,
    /// Largest full trace of a single unscaled kernel matrix.
    pub standard: f64,
}

pub fn compare_complexity_terms(bundle: &SpectralBundle, r: usize) -> Result<ComplexityTerms> {
    if r == 0 || r > bundle.m * bundle.num_kernels() {
        return Err(Error::input(format!("r = {r} is out of range")));
    }
    let m = bundle.m as f64;
    let mut all: Vec<f64> = bundle
        .spectra
        .iter()
        .flat_map(|s| (0..bundle.m).map(move |j| m * s.value(j)))
        .collect();
    all.sort_by(|a, b| b.total_cmp(a));
    let standard = bundle
        .spectra
        .iter()
        .map(|s| (0..bundle.m).map(|j| m * s.value(j)).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(ComplexityTerms {
        coupled: all[..r].iter().sum(),
        standard,
    })
}

/// Orthonormal basis of the column span (relative singular-value cutoff 1e-10).
fn column_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = SVD::new(a.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * smax)
        .collect();
    DMatrix::from_fn(a.nrows(), keep.len(), |i, j| u[(i, keep[j])])
}

/// For each kernel, the sine of the smallest principal angle between the span of
/// its sample functions `K_k(., x_n)` and the span of the other kernels' sample
/// functions, both evaluated on `grid`. Values near 0 suggest dependence. This
/// is a finite-grid surrogate, not a decision procedure.
pub fn independence_diagnostic(kernels: &[KernelSpec], sample: &[Vec<f64>], grid: &[Vec<f64>]) -> Result<Vec<f64>> {
    if let Some(x) = sample.iter().find(|x| !grid.contains(x)) {
        return Err(Error::input(format!(
            "evaluation grid does not contain sample point {x:?}"
        )));
    }
    let mut evals = Vec::with_capacity(kernels.len());
    for spec in kernels {
        let mut f = DMatrix::zeros(grid.len(), sample.len());
        for (i, g) in grid.iter().enumerate() {
            for (n, x) in sample.iter().enumerate() {
                f[(i, n)] = eval_kernel(spec, g, x)?;
            }
        }
        evals.push(f);
    }
    let mut out = Vec::with_capacity(kernels.len());
    for k in 0..kernels.len() {
        let others: Vec<&DMatrix<f64>> = (0..kernels.len()).filter(|&o| o != k).map(|o| &evals[o]).collect();
        if others.is_empty() {
            out.push(1.0);
            continue;
        }
        let cols: usize = others.iter().map(|m| m.ncols()).sum();
        let mut stacked = DMatrix::zeros(grid.len(), cols);
        let mut c = 0;
        for m in others {
            stacked.view_mut((0, c), (m.nrows(), m.ncols())).copy_from(m);
            c += m.ncols();
        }
        let qk = column_basis(&evals[k]);
        let qo = column_basis(&stacked);
        if qk.ncols() == 0 || qo.ncols() == 0 {
            out.push(1.0);
            continue;
        }
        let cos = (qk.transpose() * qo).singular_values().max().min(1.0);
        out.push((1.0 - cos * cos).max(0.0).sqrt());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{exact_abs_correlation, exact_massart, exhaustive_rademacher};

    fn params(r: usize, lambda_r: f64, nu: f64) -> ConstraintParams {
        ConstraintParams {
            r,
            lambda_r,
            nu,
            delta: 0.05,
        }
    }

    #[test]
    fn two_point_example() {
        let b = SpectralBundle::from_spectra(
            2,
            DEFAULT_RANK_TOL,
            vec![(vec![0.7, 0.3], vec![vec![1.0, 0.0], vec![0.0, 1.0]])],
        )
        .unwrap();
        let est = estimate_rademacher(&b, &params(1, 0.7, 2.0), RademacherMethod::Exhaustive).unwrap();
        assert!((est.estimate - 1.4f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(!est.lower_estimate);
        assert!(InnerSup::new(
            &b,
            &ConstraintParams {
                r: 0,
                ..params(1, 0.7, 2.0)
            },
            0
        )
        .is_err());
    }

    #[test]
    fn p1_exhaustive_matches_oracle() {
        let inst = lower_bound_construct(8, 3, 0.3).unwrap();
        let est = estimate_rademacher(&inst.bundle, &inst.params, RademacherMethod::Exhaustive).unwrap();
        let exact = exhaustive_rademacher(&inst.bundle, &inst.params, 10).unwrap();
        assert!((est.estimate - exact).abs() < 1e-10);
        assert!(exact >= theorem3_value(0.3, 8));
    }

    #[test]
    fn true_sup_is_below_dual_norm_relaxation() {
        for r in 1..=3 {
            let inst = lower_bound_construct(10, r, 0.3).unwrap();
            let sup = InnerSup::new(&inst.bundle, &inst.params, 0).unwrap();
            for i in 0..50 {
                let s = sign_vector(3, i, 10);
                let (v, relax) = (sup.value(&s).unwrap(), sup.dual_norm_relaxation(&s).unwrap());
                assert!(v <= relax + 1e-12);
                if r == 1 {
                    assert!((v - relax).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn p2_regions_match_grid_oracle() {
        let pts: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.7).sin(), (t * 1.3).cos(), 0.3 * t - 0.8]
            })
            .collect();
        let kernels = vec![
            normalize_spec(&KernelSpec::coordinate_linear(vec![0, 1]).unwrap(), &pts).unwrap(),
            normalize_spec(&KernelSpec::coordinate_linear(vec![2]).unwrap(), &pts).unwrap(),
        ];
        let b = build_bundle(&kernels, &pts, DEFAULT_RANK_TOL).unwrap();
        let pr = params(2, 0.35, 6.0);
        let est = estimate_rademacher(&b, &pr, RademacherMethod::Exhaustive).unwrap();
        let grid = exhaustive_rademacher(&b, &pr, 400).unwrap();
        assert!(est.lower_estimate);
        assert!(est.estimate >= grid - 1e-9, "{} vs {grid}", est.estimate);
        assert!(est.estimate - grid < 5e-3 * grid, "{} vs {grid}", est.estimate);
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let inst = lower_bound_construct(12, 2, 0.3).unwrap();
        let method = RademacherMethod::MonteCarlo { draws: 500, seed: 9 };
        let a = estimate_rademacher(&inst.bundle, &inst.params, method).unwrap();
        let b = estimate_rademacher(&inst.bundle, &inst.params, method).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn theorem1_examples() {
        let pr = ConstraintParams {
            r: 1,
            lambda_r: 1.0,
            nu: 1.0,
            delta: 2.0 * (-2.0f64).exp(),
        };
        let rep = theorem1_bound(&pr, 1, 100, Eigengap::exact(0.5)).unwrap();
        assert!((rep.kappa - 8.0).abs() < 1e-12);
        assert_eq!(rep.term2, 0.0);
        assert!(rep.single_kernel_degenerate);
        let expected = (2.0 * 9.0 * 200f64.ln() / 100.0).sqrt();
        assert!((rep.total - expected).abs() < 1e-12);
        assert!((rep.total - 0.9766).abs() < 1e-4);
        let mut last = f64::INFINITY;
        for m in [10, 100, 1000, 10000] {
            let t = theorem1_bound(&pr, 3, m, Eigengap::exact(0.2)).unwrap().total;
            assert!(t < last);
            last = t;
        }
        let rep = theorem1_bound(&pr, 2, 100, Eigengap::exact(0.0)).unwrap();
        assert!(rep.term2.is_infinite() && !rep.precondition_holds);
    }

    #[test]
    fn theorem2_assembly() {
        let pr = params(1, 1.0, 2.0);
        let base = theorem1_bound(&pr, 1, 64, Eigengap::exact(0.5)).unwrap();
        let rep = theorem2_bound(&base, 0.0, 0.5).unwrap();
        let t = rep.theorem2.unwrap();
        let conf = 3.0 * ((4.0 / 0.05f64).ln() / 128.0).sqrt();
        assert!((t.total - (4.0 * base.term1 + conf)).abs() < 1e-12);
        let doubled = theorem2_bound(&base, 0.0, 1.0).unwrap().theorem2.unwrap();
        assert_eq!(doubled.complexity_term * 2.0, t.complexity_term);
        assert!(theorem2_bound(&base, 0.0, 0.0).is_err());
        assert!((theorem3_value(0.5, 100) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn lower_bound_instance_shape() {
        let inst = lower_bound_construct(4, 2, 0.3).unwrap();
        let s = &inst.bundle.spectra[0];
        assert_eq!(s.rank, 2);
        assert!(s.values[0] > s.values[1] + 1e-6 && s.values[1] > 1e-6);
        assert!(lower_bound_construct(4, 4, 0.3).is_err());
        assert!(lower_bound_construct(32, 4, 0.99).is_err());
        let big = lower_bound_construct(32, 4, 0.4).unwrap();
        assert!(big.bundle.spectra[0].values[0] >= 0.4);
    }

    #[test]
    fn khintchine_values() {
        let e1 = khintchine_check(&[1.0, 0.0, 0.0], 200, 1).unwrap();
        assert_eq!((e1.estimate, e1.stderr), (1.0, 0.0));
        let h = 1.0 / 2f64.sqrt();
        assert!((exact_abs_correlation(&[h, h]).unwrap() - h).abs() < 1e-15);
        assert!(khintchine_check(&[1.0, 1.0], 10, 1).is_err());
    }

    #[test]
    fn massart_small_cases() {
        let b = SpectralBundle::from_spectra(1, DEFAULT_RANK_TOL, vec![(vec![1.0], vec![vec![1.0]])]).unwrap();
        let c = massart_check(&b, 100, 0).unwrap();
        assert_eq!(c.mc.estimate, 1.0);
        assert!(c.mc.estimate <= c.bound);
        assert_eq!(exact_massart(&b).unwrap(), 1.0);
        let pts: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, 1.0, (i * i) as f64]).collect();
        let b4 = build_bundle(&[KernelSpec::linear()], &pts, DEFAULT_RANK_TOL).unwrap();
        assert!((massart_check(&b4, 10, 0).unwrap().bound - (2.0 * 8f64.ln()).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn eigengap_example_values() {
        for eps in [1e-6, 0.5, 1.0] {
            let e = eigengap_proposition(eps).unwrap();
            assert_eq!(e.lhs, 2.0);
            assert_eq!(e.rhs, 2.0);
            assert_eq!(e.lhs_operator, 1.0);
        }
        assert!(eigengap_proposition(0.0).is_err());
    }

    #[test]
    fn identical_samples_give_identical_projectors() {
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos(), 0.1 * i as f64])
            .collect();
        let blocks = vec![vec![0, 1], vec![2]];
        let (a, _) = mixture_projector(&pts, &blocks, &[0.5, 0.5], 1).unwrap();
        let (b, _) = mixture_projector(&pts, &blocks, &[0.5, 0.5], 1).unwrap();
        assert_eq!((a - b).norm(), 0.0);
    }

    #[test]
    fn degenerate_generator_is_rejected() {
        let cfg = ConcentrationConfig {
            block_variances: vec![vec![1.0, 1.0]],
            mu: vec![1.0],
            ..ConcentrationConfig::default()
        };
        assert!(concentration_experiment(&cfg).is_err());
    }

    #[test]
    fn complexity_terms_examples() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.2, (i as f64).cos()]).collect();
        let b = build_bundle(
            &[normalize_spec(&KernelSpec::linear(), &pts).unwrap()],
            &pts,
            DEFAULT_RANK_TOL,
        )
        .unwrap();
        let t = compare_complexity_terms(&b, 5).unwrap();
        assert!((t.coupled - t.standard).abs() < 1e-12);
        let t1 = compare_complexity_terms(&b, 1).unwrap();
        assert!(t1.coupled <= t1.standard);
    }

    #[test]
    fn independence_scores() {
        let sample: Vec<Vec<f64>> = vec![vec![0.3, -0.5], vec![0.9, 0.2], vec![-0.4, 0.8]];
        let mut grid = sample.clone();
        for i in 0..6 {
            grid.push(vec![0.17 * i as f64 - 0.5, 0.11 * (i * i) as f64 - 0.3]);
        }
        let lin = KernelSpec::coordinate_linear(vec![0]).unwrap();
        let lin2 = KernelSpec::coordinate_linear(vec![1]).unwrap();
        let res = independence_diagnostic(&[lin.clone(), lin2], &sample, &grid).unwrap();
        assert!(res.iter().all(|v| *v > 0.1), "{res:?}");
        let dup = independence_diagnostic(&[lin.clone(), lin.clone()], &sample, &grid).unwrap();
        assert!(dup.iter().all(|v| *v < 1e-6), "{dup:?}");
        let gl = independence_diagnostic(
            &[KernelSpec::gaussian(1.0).unwrap(), KernelSpec::linear()],
            &sample,
            &grid,
        )
        .unwrap();
        assert!(gl.iter().all(|v| *v > 1e-4), "{gl:?}");
        assert!(independence_diagnostic(&[lin], &sample, &grid[3..]).is_err());
    }
}
