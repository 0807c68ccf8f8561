//! Alternating minimization over the separator `w`, the kernel weights `mu`
//! and the pair selection `xi`.
//!
//! Each round runs a `w` step (projected gradient in `z = w / sqrt(mu)`
//! coordinates, where the norm constraint is the unit ball), a `mu` step that
//! loosens that constraint without changing the scores, and a selection step.
//! Every step is accepted only if it does not increase the objective, so the
//! per-round objective is non-increasing.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::constraints::{check_m, project_to_m, region_problem, ConstraintParams, MU_FLOOR};
use crate::convex::Objective;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hypothesis::{FeatureSpace, Model, Selection};
use crate::kernels::{normalize_flagged, KernelSpec};
use crate::spectral::{kyfan_r, top_r_index_set, IndexSet, Pair, SpectralBundle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Hinge,
    Logistic,
}

impl Loss {
    pub fn value(self, h: f64, y: f64) -> f64 {
        let t = y * h;
        match self {
            Loss::Hinge => (1.0 - t).max(0.0),
            Loss::Logistic => {
                if t > 0.0 {
                    (-t).exp().ln_1p()
                } else {
                    -t + t.exp().ln_1p()
                }
            }
        }
    }

    /// A (sub)derivative with respect to `h`.
    pub fn derivative(self, h: f64, y: f64) -> f64 {
        let t = y * h;
        match self {
            Loss::Hinge => {
                if t < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            Loss::Logistic => -y / (1.0 + t.exp()),
        }
    }
}

impl std::str::FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinge" => Ok(Loss::Hinge),
            "logistic" => Ok(Loss::Logistic),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// The selection is always the top-r set of the current mixture.
    Coupled,
    /// Any r pairs, chosen greedily.
    DiscreteRelaxed,
    /// Fractional selection on the capped simplex.
    ContinuousRelaxed,
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coupled" => Ok(TrainMode::Coupled),
            "discrete" | "discrete-relaxed" => Ok(TrainMode::DiscreteRelaxed),
            "continuous" | "continuous-relaxed" => Ok(TrainMode::ContinuousRelaxed),
            other => Err(Error::Config(format!("unknown training mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: Loss,
    pub mode: TrainMode,
    pub max_rounds: usize,
    /// Iterations per w step and per continuous selection step.
    pub inner_iters: usize,
    /// Initial step size for the projected-gradient steps.
    pub step: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: Loss::Hinge,
            mode: TrainMode::Coupled,
            max_rounds: 50,
            inner_iters: 200,
            step: 1.0,
            tol: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config("train.tol must be positive".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::Config("train.max_rounds must be at least 1".into()));
        }
        if self.inner_iters == 0 {
            return Err(Error::Config("train.inner_iters must be at least 1".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config("train.step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRound {
    pub round: usize,
    pub objective: f64,
    pub kyfan: f64,
    pub l1: f64,
    pub inv_sum: f64,
    pub index_set: String,
    /// Accepted iterates of the w step.
    pub w_accepted: usize,
    pub mu_accepted: bool,
    pub selection_changed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub rounds: Vec<TrainRound>,
    pub stop_reason: String,
}

impl TrainTrace {
    pub fn final_objective(&self) -> f64 {
        self.rounds.last().map_or(f64::NAN, |r| r.objective)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,objective,kyfan,l1,inv_sum,index_set\n");
        for r in &self.rounds {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{}",
                r.round, r.objective, r.kyfan, r.l1, r.inv_sum, r.index_set
            );
        }
        out
    }
}

/// Training sample features and labels, with the pair layout of the bundle.
struct Problem<'a> {
    bundle: &'a SpectralBundle,
    params: ConstraintParams,
    cfg: TrainConfig,
    pairs: Vec<Pair>,
    /// `features[i][q]` = `c_q(x_i)`.
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

#[derive(Clone, Debug)]
struct State {
    mu: Vec<f64>,
    /// Selection weight per pair (0/1 for discrete selections).
    xi: Vec<f64>,
    w: Vec<f64>,
    objective: f64,
}

impl Problem<'_> {
    fn kernel_of(&self, q: usize) -> usize {
        self.pairs[q].kernel
    }

    fn scores(&self, xi: &[f64], w: &[f64]) -> Vec<f64> {
        self.features
            .iter()
            .map(|row| {
                row.iter()
                    .zip(xi)
                    .zip(w)
                    .filter(|((_, x), _)| **x != 0.0)
                    .map(|((c, x), w)| c * x * w)
                    .sum()
            })
            .collect()
    }

    fn objective(&self, xi: &[f64], w: &[f64]) -> f64 {
        let scores = self.scores(xi, w);
        let total: f64 = scores
            .iter()
            .zip(&self.labels)
            .map(|(h, y)| self.cfg.loss.value(*h, *y))
            .sum();
        total / self.labels.len() as f64
    }

    /// `d objective / d h_i`.
    fn loss_derivatives(&self, xi: &[f64], w: &[f64]) -> Vec<f64> {
        let m = self.labels.len() as f64;
        self.scores(xi, w)
            .iter()
            .zip(&self.labels)
            .map(|(h, y)| self.cfg.loss.derivative(*h, *y) / m)
            .collect()
    }

    /// `sum_i d_i c_q(x_i)` for every pair.
    fn feature_correlations(&self, d: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.pairs.len()];
        for (row, di) in self.features.iter().zip(d) {
            for (gq, c) in g.iter_mut().zip(row) {
                *gq += di * c;
            }
        }
        g
    }

    fn weight_norm(&self, mu: &[f64], w: &[f64]) -> f64 {
        w.iter().enumerate().map(|(q, v)| v * v / mu[self.kernel_of(q)]).sum()
    }

    /// Projected gradient on `w` for fixed (mu, xi); returns the number of accepted iterates.
    fn w_step(&self, st: &mut State) -> usize {
        let sq: Vec<f64> = (0..self.pairs.len()).map(|q| st.mu[self.kernel_of(q)].sqrt()).collect();
        let mut z: Vec<f64> = st.w.iter().zip(&sq).map(|(w, s)| w / s).collect();
        let to_w = |z: &[f64]| -> Vec<f64> { z.iter().zip(&sq).map(|(z, s)| z * s).collect() };
        let mut f = self.objective(&st.xi, &st.w);
        let mut eta = self.cfg.step;
        let mut accepted = 0;
        for _ in 0..self.cfg.inner_iters {
            let d = self.loss_derivatives(&st.xi, &to_w(&z));
            let corr = self.feature_correlations(&d);
            let g: Vec<f64> = (0..z.len()).map(|q| corr[q] * st.xi[q] * sq[q]).collect();
            if g.iter().all(|v| *v == 0.0) {
                break;
            }
            let mut improved = false;
            for _ in 0..40 {
                let mut cand: Vec<f64> = z.iter().zip(&g).map(|(z, g)| z - eta * g).collect();
                project_unit_ball(&mut cand);
                let cand_w = to_w(&cand);
                let fc = self.objective(&st.xi, &cand_w);
                if fc.is_finite() && fc < f {
                    let gain = f - fc;
                    z = cand;
                    f = fc;
                    improved = true;
                    accepted += 1;
                    eta *= 2.0;
                    if gain <= 1e-15 * f.abs().max(1e-300) {
                        improved = false;
                    }
                    break;
                }
                eta *= 0.5;
            }
            if !improved {
                break;
            }
        }
        st.w = to_w(&z);
        st.objective = f;
        accepted
    }

    /// Moves mu toward `argmin sum a_k / mu_k` while keeping the scores (and, in
    /// coupled mode, the top-r set) unchanged.
    fn mu_step(&self, st: &mut State, coupled: bool) -> Result<bool> {
        let p = self.bundle.num_kernels();
        let mut a = vec![0.0; p];
        for (q, w) in st.w.iter().enumerate() {
            a[self.kernel_of(q)] += w * w;
        }
        let total: f64 = a.iter().map(|v| v.sqrt()).sum();
        if total == 0.0 {
            return Ok(false);
        }
        let proposal: Vec<f64> = a.iter().map(|v| (v.sqrt() / total).max(MU_FLOOR)).collect();
        let target = project_to_m(&proposal, &self.params, self.bundle)?;
        let current_set = if coupled {
            Some(top_r_index_set(self.bundle, &st.mu, self.params.r)?.canonical())
        } else {
            None
        };
        let budget = self.weight_norm(&st.mu, &st.w).max(1.0);
        let mut theta = 1.0;
        for _ in 0..30 {
            let cand: Vec<f64> = st
                .mu
                .iter()
                .zip(&target)
                .map(|(m, t)| (1.0 - theta) * m + theta * t)
                .collect();
            if cand == st.mu {
                return Ok(false);
            }
            let norm_ok = self.weight_norm(&cand, &st.w) <= budget;
            let same_set = match &current_set {
                Some(set) => top_r_index_set(self.bundle, &cand, self.params.r)?.canonical() == *set,
                None => true,
            };
            if norm_ok && same_set && check_m(&cand, &self.params, self.bundle)?.feasible() {
                st.mu = cand;
                return Ok(true);
            }
            theta *= 0.5;
        }
        Ok(false)
    }

    fn selection_vector(&self, set: &IndexSet) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|p| if set.contains(*p) { 1.0 } else { 0.0 })
            .collect()
    }

    /// Tries each neighbouring composition of the top-r set (one pair moved from
    /// kernel `a` to kernel `b`) and keeps the best if it improves the objective.
    fn coupled_flip(&self, st: &mut State) -> Result<bool> {
        let p = self.bundle.num_kernels();
        let counts = top_r_index_set(self.bundle, &st.mu, self.params.r)?.composition(p);
        let lam_max = self.bundle.spectra.iter().map(|s| s.value(0)).fold(0.0, f64::max);
        let margin = 1e-9 * lam_max;
        let mut best: Option<State> = None;
        for from in 0..p {
            for to in 0..p {
                if from == to || counts[from] == 0 || counts[to] >= self.bundle.spectra[to].rank {
                    continue;
                }
                let mut next = counts.clone();
                next[from] -= 1;
                next[to] += 1;
                let region = region_problem(self.bundle, &self.params, &next, margin);
                let Some(start) = region.strictly_feasible_point(&st.mu) else {
                    continue;
                };
                let set = IndexSet::from_composition(&next);
                let xi = self.selection_vector(&set);
                let w: Vec<f64> =
                    st.w.iter()
                        .zip(&xi)
                        .map(|(w, x)| if *x == 0.0 { 0.0 } else { *w })
                        .collect();
                let mut a = vec![0.0; p];
                for (q, v) in w.iter().enumerate() {
                    a[self.kernel_of(q)] += v * v;
                }
                let mu = if a.iter().any(|v| *v > 0.0) {
                    region
                        .minimize(&start, Objective::InverseWeighted(&a), 1e-10)
                        .unwrap_or(start)
                } else {
                    start
                };
                if top_r_index_set(self.bundle, &mu, self.params.r)?.composition(p) != next
                    || !check_m(&mu, &self.params, self.bundle)?.feasible()
                {
                    continue;
                }
                let mut cand = State {
                    objective: 0.0,
                    w,
                    xi,
                    mu,
                };
                let norm = self.weight_norm(&cand.mu, &cand.w);
                if norm > 1.0 {
                    let s = norm.sqrt();
                    cand.w.iter_mut().for_each(|v| *v /= s);
                }
                cand.objective = self.objective(&cand.xi, &cand.w);
                self.w_step(&mut cand);
                if best.as_ref().is_none_or(|b| cand.objective < b.objective) {
                    best = Some(cand);
                }
            }
        }
        match best {
            Some(b) if b.objective < st.objective - self.cfg.tol => {
                *st = b;
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    /// Swaps the selected pair whose removal costs least for unselected pairs with
    /// the steepest first-order gain; keeps the first swap that improves.
    fn discrete_swap(&self, st: &mut State) -> Result<bool> {
        let d = self.loss_derivatives(&st.xi, &st.w);
        let corr = self.feature_correlations(&d);
        let selected: Vec<usize> = (0..self.pairs.len()).filter(|&q| st.xi[q] != 0.0).collect();
        let mut cheapest: Option<(f64, usize)> = None;
        for &q in &selected {
            let mut w = st.w.clone();
            w[q] = 0.0;
            let cost = self.objective(&st.xi, &w) - st.objective;
            if cheapest.is_none_or(|(c, _)| cost < c) {
                cheapest = Some((cost, q));
            }
        }
        let Some((_, drop)) = cheapest else {
            return Ok(false);
        };
        let mut gains: Vec<(f64, usize)> = (0..self.pairs.len())
            .filter(|&q| st.xi[q] == 0.0)
            .map(|q| (corr[q].abs() * st.mu[self.kernel_of(q)].sqrt(), q))
            .filter(|(g, _)| *g > 0.0)
            .collect();
        gains.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, add) in gains.iter().take(5) {
            let mut cand = st.clone();
            cand.xi[drop] = 0.0;
            cand.w[drop] = 0.0;
            cand.xi[add] = 1.0;
            cand.objective = self.objective(&cand.xi, &cand.w);
            self.w_step(&mut cand);
            if cand.objective < st.objective - self.cfg.tol {
                *st = cand;
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Projected gradient on the fractional selection for fixed (mu, w).
    fn continuous_xi_step(&self, st: &mut State) -> bool {
        let r = self.params.r as f64;
        let mut f = st.objective;
        let mut eta = self.cfg.step;
        let mut changed = false;
        for _ in 0..self.cfg.inner_iters {
            let d = self.loss_derivatives(&st.xi, &st.w);
            let corr = self.feature_correlations(&d);
            let g: Vec<f64> = corr.iter().zip(&st.w).map(|(c, w)| c * w).collect();
            if g.iter().all(|v| *v == 0.0) {
                break;
            }
            let mut improved = false;
            for _ in 0..40 {
                let y: Vec<f64> = st.xi.iter().zip(&g).map(|(x, g)| x - eta * g).collect();
                let cand = project_capped_simplex(&y, r);
                let fc = self.objective(&cand, &st.w);
                if fc < f {
                    let gain = f - fc;
                    st.xi = cand;
                    f = fc;
                    improved = gain > 1e-15 * f.abs().max(1e-300);
                    changed = true;
                    eta *= 2.0;
                    break;
                }
                eta *= 0.5;
            }
            if !improved {
                break;
            }
        }
        st.objective = f;
        changed
    }

    fn index_set(&self, st: &State) -> IndexSet {
        let mut weighted: Vec<(f64, Pair)> = st.xi.iter().zip(&self.pairs).map(|(x, p)| (*x, *p)).collect();
        weighted.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        IndexSet(weighted.into_iter().take(self.params.r).map(|(_, p)| p).collect())
    }

    fn record(
        &self,
        round: usize,
        st: &State,
        w_accepted: usize,
        mu_accepted: bool,
        changed: bool,
    ) -> Result<TrainRound> {
        let report = check_m(&st.mu, &self.params, self.bundle)?;
        Ok(TrainRound {
            round,
            objective: st.objective,
            kyfan: kyfan_r(self.bundle, &st.mu, self.params.r)?,
            l1: report.l1.value,
            inv_sum: report.inv_sum.value,
            index_set: self.index_set(st).to_token_string(),
            w_accepted,
            mu_accepted,
            selection_changed: changed,
        })
    }
}

/// Euclidean projection onto the unit ball.
fn project_unit_ball(z: &mut [f64]) {
    let n: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 1.0 {
        z.iter_mut().for_each(|v| *v /= n);
    }
}

/// Euclidean projection onto `{0 <= xi <= 1, sum xi = r}` by bisection on the shift.
pub fn project_capped_simplex(y: &[f64], r: f64) -> Vec<f64> {
    let clip = |tau: f64| -> Vec<f64> { y.iter().map(|v| (v - tau).clamp(0.0, 1.0)).collect() };
    let sum = |tau: f64| -> f64 { y.iter().map(|v| (v - tau).clamp(0.0, 1.0)).sum() };
    let mut lo = y.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sum(mid) > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut xi = clip(0.5 * (lo + hi));
    // Spread the remaining rounding error over the free coordinates.
    let free: Vec<usize> = (0..xi.len()).filter(|&q| xi[q] > 0.0 && xi[q] < 1.0).collect();
    if !free.is_empty() {
        let err = (r - xi.iter().sum::<f64>()) / free.len() as f64;
        for q in free {
            xi[q] = (xi[q] + err).clamp(0.0, 1.0);
        }
    }
    xi
}

/// Trains a model on `data`, anchoring the spectral features on the unlabeled sample.
///
/// Kernels flagged `normalize` are rescaled on S and U together first.
pub fn train(
    data: &Dataset,
    kernels: &[KernelSpec],
    params: &ConstraintParams,
    cfg: &TrainConfig,
    rank_tol: f64,
) -> Result<(Model, TrainTrace)> {
    cfg.validate()?;
    params.validate()?;
    let kernels = normalize_flagged(kernels, &data.all_points())?;
    let space = FeatureSpace::new(kernels, data.u_points.clone(), rank_tol)?;
    let bundle = &space.bundle;
    if bundle.spectra.iter().all(|s| s.rank < params.r) {
        return Err(Error::Config(format!(
            "no kernel has effective rank >= r = {}",
            params.r
        )));
    }
    let fm = space.features(&data.s_points)?;
    let problem = Problem {
        bundle,
        params: *params,
        cfg: *cfg,
        pairs: fm.pairs,
        features: fm.rows,
        labels: data.s_labels.iter().map(|y| f64::from(*y)).collect(),
    };
    let p = bundle.num_kernels();
    let mu = project_to_m(&vec![1.0 / p as f64; p], params, bundle)?;
    let total = problem.pairs.len();
    let xi = match cfg.mode {
        TrainMode::Coupled | TrainMode::DiscreteRelaxed => {
            problem.selection_vector(&top_r_index_set(bundle, &mu, params.r)?)
        }
        TrainMode::ContinuousRelaxed => vec![params.r as f64 / total as f64; total],
    };
    let w = vec![0.0; total];
    let mut st = State {
        objective: problem.objective(&xi, &w),
        mu,
        xi,
        w,
    };

    let mut rounds = vec![problem.record(0, &st, 0, false, false)?];
    let mut seen: HashSet<Vec<Pair>> = HashSet::new();
    seen.insert(problem.index_set(&st).canonical());
    let mut stalled = 0;
    let mut stop_reason = String::from("max_rounds");
    for round in 1..=cfg.max_rounds {
        let before = st.objective;
        let accepted = problem.w_step(&mut st);
        let mu_accepted = problem.mu_step(&mut st, cfg.mode == TrainMode::Coupled)?;
        let changed = match cfg.mode {
            TrainMode::Coupled => problem.coupled_flip(&mut st)?,
            TrainMode::DiscreteRelaxed => problem.discrete_swap(&mut st)?,
            TrainMode::ContinuousRelaxed => problem.continuous_xi_step(&mut st),
        };
        rounds.push(problem.record(round, &st, accepted, mu_accepted, changed)?);
        let improvement = before - st.objective;
        if changed && cfg.mode != TrainMode::ContinuousRelaxed {
            let set = problem.index_set(&st).canonical();
            if !seen.insert(set) && improvement <= cfg.tol {
                stop_reason = String::from("index_set_cycle");
                break;
            }
        }
        if improvement < cfg.tol {
            stalled += 1;
            if stalled >= 3 {
                stop_reason = String::from("converged");
                break;
            }
        } else {
            stalled = 0;
        }
    }

    let mut weights: Vec<Vec<f64>> = bundle.spectra.iter().map(|s| vec![0.0; s.rank]).collect();
    for (q, pair) in problem.pairs.iter().enumerate() {
        weights[pair.kernel][pair.index] = st.w[q];
    }
    let selection = match cfg.mode {
        TrainMode::Coupled | TrainMode::DiscreteRelaxed => Selection::Discrete {
            pairs: problem.index_set(&st),
        },
        TrainMode::ContinuousRelaxed => {
            let mut xi: Vec<Vec<f64>> = bundle.spectra.iter().map(|s| vec![0.0; s.rank]).collect();
            for (q, pair) in problem.pairs.iter().enumerate() {
                xi[pair.kernel][pair.index] = st.xi[q];
            }
            Selection::Continuous { xi }
        }
    };
    let model = Model {
        mu: st.mu.clone(),
        selection,
        weights,
        params: *params,
        space: space.clone(),
    };
    model.check_invariants()?;
    Ok((model, TrainTrace { rounds, stop_reason }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::training_error;
    use crate::spectral::DEFAULT_RANK_TOL;

    fn params(r: usize) -> ConstraintParams {
        ConstraintParams {
            r,
            lambda_r: 100.0,
            nu: 10.0,
            delta: 0.05,
        }
    }

    fn figure_one() -> Dataset {
        let pts = vec![vec![-2.0, 1.0], vec![2.0, 1.0], vec![-2.0, -1.0], vec![2.0, -1.0]];
        Dataset::same_sample(pts, vec![1, 1, -1, -1]).unwrap()
    }

    fn coordinate_kernels() -> Vec<KernelSpec> {
        let mut a = KernelSpec::coordinate_linear(vec![0]).unwrap();
        let mut b = KernelSpec::coordinate_linear(vec![1]).unwrap();
        a.normalize = true;
        b.normalize = true;
        vec![a, b]
    }

    #[test]
    fn losses() {
        assert_eq!(Loss::Hinge.value(0.5, 1.0), 0.5);
        assert_eq!(Loss::Hinge.value(2.0, 1.0), 0.0);
        assert_eq!(Loss::Hinge.derivative(0.5, -1.0), 1.0);
        assert!((Loss::Logistic.value(0.0, 1.0) - 2f64.ln()).abs() < 1e-15);
        assert!(Loss::Logistic.value(-800.0, 1.0).is_finite());
        let (h, y, e) = (0.3, -1.0, 1e-6);
        let fd = (Loss::Logistic.value(h + e, y) - Loss::Logistic.value(h - e, y)) / (2.0 * e);
        assert!((fd - Loss::Logistic.derivative(h, y)).abs() < 1e-8);
    }

    #[test]
    fn capped_simplex_projection() {
        let xi = project_capped_simplex(&[0.3, 0.3, 0.3, 0.3], 2.0);
        assert!(xi.iter().all(|v| (v - 0.5).abs() < 1e-12));
        let xi = project_capped_simplex(&[5.0, -3.0, 0.2], 1.0);
        assert!((xi[0] - 1.0).abs() < 1e-12 && xi[1] == 0.0 && xi[2].abs() < 1e-12);
        let xi = project_capped_simplex(&[0.9, 0.8, 0.1, 0.05], 2.0);
        assert!((xi.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(xi.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn separable_one_dimensional_data() {
        let pts: Vec<Vec<f64>> = [-1.0, -0.6, -0.3, 0.2, 0.5, 0.9].iter().map(|v| vec![*v]).collect();
        let labels = vec![-1, -1, -1, 1, 1, 1];
        let data = Dataset::same_sample(pts.clone(), labels.clone()).unwrap();
        let mut k = KernelSpec::linear();
        k.normalize = true;
        let (model, trace) = train(&data, &[k], &params(1), &TrainConfig::default(), DEFAULT_RANK_TOL).unwrap();
        let scores = model.evaluate_many(&pts).unwrap();
        assert_eq!(training_error(&scores, &labels), 0.0);
        // hinge margins stay below 1, so the optimum sits on the norm boundary
        assert!((model.weight_norm() - 1.0).abs() < 1e-9);
        assert!(trace.final_objective() <= trace.rounds[0].objective);
    }

    #[test]
    fn figure_one_coupled_reaches_zero_error() {
        let data = figure_one();
        let (model, trace) = train(
            &data,
            &coordinate_kernels(),
            &params(1),
            &TrainConfig::default(),
            DEFAULT_RANK_TOL,
        )
        .unwrap();
        let scores = model.evaluate_many(&data.s_points).unwrap();
        assert_eq!(training_error(&scores, &data.s_labels), 0.0, "{trace:?}");
        assert!(trace.rounds.iter().any(|r| r.selection_changed));
        assert_eq!(model.selection.dominant(1).pairs()[0], Pair::new(1, 0));
    }

    #[test]
    fn objective_is_monotone_and_runs_are_deterministic() {
        let data = figure_one();
        for mode in [
            TrainMode::Coupled,
            TrainMode::DiscreteRelaxed,
            TrainMode::ContinuousRelaxed,
        ] {
            for loss in [Loss::Hinge, Loss::Logistic] {
                let cfg = TrainConfig {
                    mode,
                    loss,
                    ..TrainConfig::default()
                };
                let (m1, t1) = train(&data, &coordinate_kernels(), &params(1), &cfg, DEFAULT_RANK_TOL).unwrap();
                let (m2, t2) = train(&data, &coordinate_kernels(), &params(1), &cfg, DEFAULT_RANK_TOL).unwrap();
                assert_eq!(t1.to_csv(), t2.to_csv());
                assert_eq!(m1.to_json().unwrap(), m2.to_json().unwrap());
                for w in t1.rounds.windows(2) {
                    assert!(w[1].objective <= w[0].objective + 1e-9, "{mode:?} {loss:?}");
                }
                assert!(m1.weight_norm() <= 1.0 + 1e-8);
            }
        }
    }

    #[test]
    fn all_labels_equal() {
        let pts = vec![vec![0.5, 0.1], vec![0.7, -0.2], vec![0.9, 0.3]];
        let data = Dataset::same_sample(pts.clone(), vec![1, 1, 1]).unwrap();
        let mut k = KernelSpec::linear();
        k.normalize = true;
        let (model, _) = train(&data, &[k], &params(1), &TrainConfig::default(), DEFAULT_RANK_TOL).unwrap();
        let scores = model.evaluate_many(&pts).unwrap();
        assert_eq!(training_error(&scores, &[1, 1, 1]), 0.0);
    }

    #[test]
    fn rank_requirement() {
        let data = figure_one();
        assert!(matches!(
            train(
                &data,
                &coordinate_kernels(),
                &params(2),
                &TrainConfig::default(),
                DEFAULT_RANK_TOL
            ),
            Err(Error::Config(_))
        ));
    }
}
