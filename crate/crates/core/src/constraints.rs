//! The feasible weight sets M and N, and the concentration constant kappa.
//!
//! M = { mu : ||mu||_(r) <= Lambda, ||mu||_1 <= 1, sum 1/mu_k <= nu, mu > 0 }
//! where `||mu||_(r)` is the Ky-Fan r-norm of the mixture covariance on the
//! unlabeled sample. N replaces the Ky-Fan budget by `Lambda + kappa` measured
//! on the labeled sample.

use serde::{Deserialize, Serialize};

use crate::convex::{Objective, Problem};
use crate::error::{Error, Result};
use crate::spectral::{kyfan_r, top_r_index_set, SpectralBundle};

/// Slack tolerance used when reporting a constraint as satisfied.
pub const FEAS_TOL: f64 = 1e-8;

/// Strict positivity floor applied before any inverse-sum evaluation.
pub const MU_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintParams {
    pub r: usize,
    /// Ky-Fan budget.
    pub lambda_r: f64,
    /// Inverse-sum budget.
    pub nu: f64,
    pub delta: f64,
}

impl ConstraintParams {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::Config("constraints.r must be >= 1".into()));
        }
        if !(self.lambda_r > 0.0 && self.lambda_r.is_finite()) {
            return Err(Error::Config("constraints.lambda_r must be positive".into()));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Config("constraints.nu must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config("constraints.delta must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// `kappa = 4 (1 + sqrt(log(2p/delta) / 2))`.
pub fn kappa(p: usize, delta: f64) -> Result<f64> {
    if p == 0 {
        return Err(Error::input("kappa needs at least one kernel"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input(format!(
            "confidence delta must lie in (0, 1), got {delta}"
        )));
    }
    let arg = 2.0 * p as f64 / delta;
    Ok(4.0 * (1.0 + (arg.ln() / 2.0).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintStatus {
    pub value: f64,
    pub bound: f64,
    /// `bound - value` for upper-bound constraints; `min mu_k` for positivity.
    pub slack: f64,
    pub satisfied: bool,
}

impl ConstraintStatus {
    fn upper(value: f64, bound: f64) -> Self {
        let slack = bound - value;
        ConstraintStatus {
            value,
            bound,
            slack,
            satisfied: slack >= -FEAS_TOL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub kyfan: ConstraintStatus,
    pub l1: ConstraintStatus,
    pub inv_sum: ConstraintStatus,
    pub positivity: ConstraintStatus,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.kyfan.satisfied && self.l1.satisfied && self.inv_sum.satisfied && self.positivity.satisfied
    }
}

fn check_against(mu: &[f64], r: usize, budget: f64, nu: f64, bundle: &SpectralBundle) -> Result<FeasibilityReport> {
    if mu.len() != bundle.num_kernels() {
        return Err(Error::input(format!(
            "weight vector has length {}, expected {}",
            mu.len(),
            bundle.num_kernels()
        )));
    }
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("weights must be finite"));
    }
    let min = mu.iter().copied().fold(f64::INFINITY, f64::min);
    let positivity = ConstraintStatus {
        value: min,
        bound: 0.0,
        slack: min,
        satisfied: min > 0.0,
    };
    // Ky-Fan on the clipped weights; negative entries are already reported above.
    let clipped: Vec<f64> = mu.iter().map(|v| v.max(0.0)).collect();
    let ky = kyfan_r(bundle, &clipped, r)?;
    let l1: f64 = mu.iter().map(|v| v.abs()).sum();
    let inv = if min > 0.0 {
        mu.iter().map(|v| 1.0 / v).sum()
    } else {
        f64::INFINITY
    };
    Ok(FeasibilityReport {
        kyfan: ConstraintStatus::upper(ky, budget),
        l1: ConstraintStatus::upper(l1, 1.0),
        inv_sum: ConstraintStatus::upper(inv, nu),
        positivity,
    })
}

/// Membership report for M, with the Ky-Fan norm measured on `bundle`.
pub fn check_m(mu: &[f64], params: &ConstraintParams, bundle: &SpectralBundle) -> Result<FeasibilityReport> {
    params.validate()?;
    check_against(mu, params.r, params.lambda_r, params.nu, bundle)
}

/// Membership report for N: Ky-Fan budget `Lambda + kappa(p, delta)` on the labeled-sample bundle.
pub fn check_n(mu: &[f64], params: &ConstraintParams, bundle_s: &SpectralBundle) -> Result<FeasibilityReport> {
    params.validate()?;
    let budget = params.lambda_r + kappa(bundle_s.num_kernels(), params.delta)?;
    check_against(mu, params.r, budget, params.nu, bundle_s)
}

/// Per-kernel Ky-Fan coefficients of a composition: `c_k = sum_{j < counts[k]} lambda_kj`.
pub(crate) fn composition_coefficients(bundle: &SpectralBundle, counts: &[usize]) -> Vec<f64> {
    counts
        .iter()
        .enumerate()
        .map(|(k, &n)| (0..n).map(|j| bundle.spectra[k].value(j)).sum())
        .collect()
}

/// Convex description of M. The Ky-Fan norm is a maximum of linear functions
/// (one per composition of r across kernels); halfspaces are added lazily as cuts.
pub(crate) struct MSet<'a> {
    pub bundle: &'a SpectralBundle,
    pub params: ConstraintParams,
    pub problem: Problem,
    cuts: Vec<Vec<usize>>,
}

impl<'a> MSet<'a> {
    pub fn new(bundle: &'a SpectralBundle, params: &ConstraintParams) -> Result<Self> {
        params.validate()?;
        let p = bundle.num_kernels();
        if params.r > bundle.total_rank() {
            return Err(Error::Config(format!(
                "r = {} exceeds the total effective rank {}",
                params.r,
                bundle.total_rank()
            )));
        }
        if params.nu < (p * p) as f64 {
            return Err(Error::Infeasible(format!(
                "nu = {} < p^2 = {}: the inverse-sum and l1 constraints are incompatible",
                params.nu,
                p * p
            )));
        }
        let mut problem = Problem::new(p);
        problem.push(vec![1.0; p], 1.0);
        problem.inv_sum = Some(params.nu);
        Ok(MSet {
            bundle,
            params: *params,
            problem,
            cuts: Vec::new(),
        })
    }

    pub fn p(&self) -> usize {
        self.bundle.num_kernels()
    }

    /// Adds the Ky-Fan halfspace of the top-r composition at `mu`; returns false if already present.
    pub fn add_cut_at(&mut self, mu: &[f64]) -> Result<bool> {
        let clipped: Vec<f64> = mu.iter().map(|v| v.max(MU_FLOOR)).collect();
        let counts = top_r_index_set(self.bundle, &clipped, self.params.r)?.composition(self.p());
        if self.cuts.contains(&counts) {
            return Ok(false);
        }
        let c = composition_coefficients(self.bundle, &counts);
        self.problem.push(c, self.params.lambda_r);
        self.cuts.push(counts);
        Ok(true)
    }

    pub fn kyfan(&self, mu: &[f64]) -> Result<f64> {
        let clipped: Vec<f64> = mu.iter().map(|v| v.max(0.0)).collect();
        kyfan_r(self.bundle, &clipped, self.params.r)
    }

    /// A point with strictly positive slack in every constraint of M.
    pub fn interior_point(&mut self) -> Result<Vec<f64>> {
        let p = self.p();
        let uniform = vec![1.0 / p as f64; p];
        self.add_cut_at(&uniform)?;
        let mut start = uniform;
        loop {
            let point = self.problem.strictly_feasible_point(&start).ok_or_else(|| {
                Error::Infeasible(format!(
                    "constraint set M is empty for r = {}, Lambda = {}, nu = {}",
                    self.params.r, self.params.lambda_r, self.params.nu
                ))
            })?;
            if self.kyfan(&point)? < self.params.lambda_r {
                return Ok(point);
            }
            if !self.add_cut_at(&point)? {
                return Err(Error::Infeasible("M has no strictly interior point".into()));
            }
            start = point;
        }
    }

    /// Minimizes `obj` over M, adding Ky-Fan cuts until the full constraint holds.
    pub fn minimize(&mut self, obj: Objective<'_>, gap_tol: f64) -> Result<Vec<f64>> {
        let interior = self.interior_point()?;
        loop {
            let x = self
                .problem
                .minimize(&interior, obj, gap_tol)
                .ok_or_else(|| Error::numeric("barrier solver failed over M"))?;
            if self.kyfan(&x)? <= self.params.lambda_r {
                return Ok(x);
            }
            if !self.add_cut_at(&x)? {
                // Active composition already cut: the violation is round-off at the boundary.
                return Ok(x);
            }
        }
    }
}

/// Every composition of `r` into per-kernel counts bounded by the effective ranks.
pub(crate) fn compositions(bundle: &SpectralBundle, r: usize) -> Vec<Vec<usize>> {
    fn rec(ranks: &[usize], k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == ranks.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let rest: usize = ranks[k + 1..].iter().sum();
        let lo = left.saturating_sub(rest);
        for n in lo..=left.min(ranks[k]) {
            cur.push(n);
            rec(ranks, k + 1, left - n, cur, out);
            cur.pop();
        }
    }
    let ranks: Vec<usize> = bundle.spectra.iter().map(|s| s.rank).collect();
    let mut out = Vec::new();
    rec(&ranks, 0, r, &mut Vec::new(), &mut out);
    out
}

/// M intersected with the region where the top-r pairs are the prefixes given by `counts`.
///
/// Inside the region the Ky-Fan norm is linear in mu. Every selected value must
/// exceed every unselected one by at least `margin`.
pub(crate) fn region_problem(
    bundle: &SpectralBundle,
    params: &ConstraintParams,
    counts: &[usize],
    margin: f64,
) -> Problem {
    let p = bundle.num_kernels();
    let mut problem = Problem::new(p);
    problem.push(vec![1.0; p], 1.0);
    problem.push(composition_coefficients(bundle, counts), params.lambda_r);
    problem.inv_sum = Some(params.nu);
    for a in 0..p {
        if counts[a] == 0 {
            continue;
        }
        let last = bundle.spectra[a].value(counts[a] - 1);
        for b in 0..p {
            if b == a || counts[b] >= bundle.spectra[b].rank {
                continue;
            }
            let mut g = vec![0.0; p];
            g[b] = bundle.spectra[b].value(counts[b]);
            g[a] -= last;
            problem.push(g, -margin);
        }
    }
    problem
}

/// Euclidean projection onto M (returns the input unchanged if it is already feasible).
///
/// Errors with [`Error::Infeasible`] when M is empty.
pub fn project_to_m(mu: &[f64], params: &ConstraintParams, bundle: &SpectralBundle) -> Result<Vec<f64>> {
    if mu.len() != bundle.num_kernels() || mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("weight vector has wrong length or non-finite entries"));
    }
    let mut set = MSet::new(bundle, params)?;
    if check_m(mu, params, bundle)?.feasible() {
        return Ok(mu.to_vec());
    }
    set.add_cut_at(mu)?;
    let x = set.minimize(Objective::Distance(mu), 1e-13)?;
    let report = check_m(&x, params, bundle)?;
    if !report.feasible() {
        return Err(Error::numeric(format!(
            "projection onto M left violated constraints: {report:?}"
        )));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::DEFAULT_RANK_TOL;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bundle(spectra: &[&[f64]]) -> SpectralBundle {
        let m = spectra.iter().map(|s| s.len()).max().unwrap();
        let parts = spectra
            .iter()
            .map(|vals| {
                let mut values = vals.to_vec();
                values.resize(m, 0.0);
                let vectors = (0..m)
                    .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                    .collect();
                (values, vectors)
            })
            .collect();
        SpectralBundle::from_spectra(m, DEFAULT_RANK_TOL, parts).unwrap()
    }

    fn params(r: usize, lambda_r: f64, nu: f64) -> ConstraintParams {
        ConstraintParams {
            r,
            lambda_r,
            nu,
            delta: 0.05,
        }
    }

    #[test]
    fn kappa_examples() {
        let delta = 2.0 * (-2.0_f64).exp();
        assert!((kappa(1, delta).unwrap() - 8.0).abs() < 1e-12);
        assert!(kappa(1, 2.0).is_err());
        assert!(kappa(1, 0.0).is_err());
        // independent evaluation: log(80) = 4.382026634673881
        let expected = 4.0 * (1.0 + (4.382026634673881_f64 / 2.0).sqrt());
        let k = kappa(2, 0.05).unwrap();
        assert!((k - expected).abs() < 1e-12);
        assert!((k - 9.921).abs() < 1e-3);
    }

    #[test]
    fn kappa_monotone() {
        assert!(kappa(3, 0.05).unwrap() > kappa(2, 0.05).unwrap());
        assert!(kappa(2, 0.01).unwrap() > kappa(2, 0.05).unwrap());
        assert!(kappa(1, 0.999).unwrap() > 4.0);
    }

    #[test]
    fn check_m_examples() {
        let b = bundle(&[&[0.5, 0.3], &[0.4, 0.2]]);
        let rep = check_m(&[0.5, 0.5], &params(1, 10.0, 4.0), &b).unwrap();
        assert!(rep.feasible());
        assert_eq!(rep.inv_sum.slack, 0.0);

        let rep = check_m(&[0.9, 0.05], &params(1, 10.0, 4.0), &b).unwrap();
        assert!(!rep.feasible());
        assert!(!rep.inv_sum.satisfied);
        assert!(rep.l1.satisfied && rep.kyfan.satisfied);

        let rep = check_m(&[0.0, 1.0], &params(1, 10.0, 4.0), &b).unwrap();
        assert!(!rep.positivity.satisfied);
        assert!(rep.inv_sum.value.is_infinite() && !rep.inv_sum.satisfied);
    }

    #[test]
    fn check_n_extends_m() {
        let b = bundle(&[&[50.0, 3.0], &[40.0, 2.0]]);
        let k = kappa(2, 0.05).unwrap();
        let mu = [0.5, 0.5];
        let ky = kyfan_r(&b, &mu, 1).unwrap();
        // kyfan = Lambda + kappa/2: in N, not in M
        let pr = params(1, ky - k / 2.0, 4.0);
        assert!(!check_m(&mu, &pr, &b).unwrap().feasible());
        assert!(check_n(&mu, &pr, &b).unwrap().feasible());
        // kyfan = Lambda + 2 kappa: neither
        let pr = params(1, ky - 2.0 * k, 4.0);
        assert!(!check_m(&mu, &pr, &b).unwrap().feasible());
        assert!(!check_n(&mu, &pr, &b).unwrap().feasible());
    }

    #[test]
    fn m_feasible_implies_n_feasible() {
        let b = bundle(&[&[0.5, 0.3], &[0.4, 0.2]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pr = params(2, 0.3, 6.0);
        for _ in 0..200 {
            let mu = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            if check_m(&mu, &pr, &b).unwrap().feasible() {
                assert!(check_n(&mu, &pr, &b).unwrap().feasible());
            }
        }
    }

    #[test]
    fn projection_fixed_point() {
        let b = bundle(&[&[0.5, 0.3], &[0.4, 0.2]]);
        let pr = params(1, 10.0, 5.0);
        let mu = vec![0.45, 0.5];
        assert_eq!(project_to_m(&mu, &pr, &b).unwrap(), mu);
    }

    #[test]
    fn projection_of_symmetric_point_matches_grid_oracle() {
        let b = bundle(&[&[0.5, 0.3], &[0.5, 0.3]]);
        let pr = params(1, 10.0, 4.5);
        let out = project_to_m(&[1.0, 1.0], &pr, &b).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-7 && (out[1] - 0.5).abs() < 1e-7, "{out:?}");

        // brute-force projection over a fine grid of M
        let n = 2000;
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for i in 1..n {
            for j in 1..n {
                let mu = [i as f64 / n as f64, j as f64 / n as f64];
                if check_m(&mu, &pr, &b).unwrap().feasible() {
                    let d = (mu[0] - 1.0).powi(2) + (mu[1] - 1.0).powi(2);
                    if d < best.0 {
                        best = (d, mu);
                    }
                }
            }
        }
        assert!((best.1[0] - out[0]).abs() <= 1.0 / n as f64);
        assert!((best.1[1] - out[1]).abs() <= 1.0 / n as f64);
    }

    #[test]
    fn projection_output_feasible_and_idempotent() {
        let b = bundle(&[&[0.5, 0.3, 0.1], &[0.45, 0.2, 0.15], &[0.6, 0.05, 0.01]]);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let pr = params(
                rng.random_range(1..=4),
                rng.random_range(0.05..0.6),
                rng.random_range(9.0..30.0),
            );
            let mu: Vec<f64> = (0..3).map(|_| rng.random_range(-0.5..1.5)).collect();
            match project_to_m(&mu, &pr, &b) {
                Ok(out) => {
                    assert!(check_m(&out, &pr, &b).unwrap().feasible());
                    let again = project_to_m(&out, &pr, &b).unwrap();
                    for (a, c) in out.iter().zip(&again) {
                        assert!((a - c).abs() <= 1e-8);
                    }
                }
                Err(Error::Infeasible(_)) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn projection_is_closest_among_sampled_feasible_points() {
        let b = bundle(&[&[0.5, 0.3, 0.1], &[0.45, 0.2, 0.15]]);
        let pr = params(2, 0.25, 8.0);
        let target = [0.9, 0.05];
        let out = project_to_m(&target, &pr, &b).unwrap();
        let d_out = (out[0] - target[0]).powi(2) + (out[1] - target[1]).powi(2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20000 {
            let mu = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            if check_m(&mu, &pr, &b).unwrap().feasible() {
                let d = (mu[0] - target[0]).powi(2) + (mu[1] - target[1]).powi(2);
                assert!(d >= d_out - 1e-9);
            }
        }
    }

    #[test]
    fn empty_m_is_reported() {
        let b = bundle(&[&[0.5, 0.3], &[0.4, 0.2]]);
        assert!(matches!(
            project_to_m(&[0.5, 0.5], &params(1, 1.0, 3.0), &b),
            Err(Error::Infeasible(_))
        ));
        // Ky-Fan budget too small for any mu with sum 1/mu <= nu
        assert!(matches!(
            project_to_m(&[0.5, 0.5], &params(1, 0.01, 4.1), &b),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn m_is_convex() {
        let b = bundle(&[&[0.5, 0.3, 0.1], &[0.45, 0.2, 0.15]]);
        let pr = params(2, 0.35, 9.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut feasible = Vec::new();
        while feasible.len() < 200 {
            let mu = vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            if check_m(&mu, &pr, &b).unwrap().feasible() {
                feasible.push(mu);
            }
        }
        for _ in 0..1000 {
            let a = &feasible[rng.random_range(0..feasible.len())];
            let c = &feasible[rng.random_range(0..feasible.len())];
            let t: f64 = rng.random_range(0.0..1.0);
            let mid: Vec<f64> = a.iter().zip(c).map(|(x, y)| t * x + (1.0 - t) * y).collect();
            let rep = check_m(&mid, &pr, &b).unwrap();
            assert!(rep.kyfan.slack >= -1e-10 && rep.l1.slack >= -1e-10 && rep.inv_sum.slack >= -1e-10);
        }
    }
}
