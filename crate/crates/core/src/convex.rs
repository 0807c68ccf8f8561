//! Small log-barrier interior-point solver over mixture weights.
//!
//! Feasible sets have the form
//! `{ mu > 0 : g_i . mu <= h_i for all i, sum_k 1/mu_k <= nu }`,
//! which covers M (with the Ky-Fan constraint expanded into halfspaces),
//! its intersections with index-set cones, and the relaxations used by the
//! trainer. Dimensions are tiny (one variable per base kernel), so every
//! Newton step is a dense Cholesky solve.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub(crate) struct Halfspace {
    pub g: Vec<f64>,
    pub h: f64,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Problem {
    pub n: usize,
    pub halfspaces: Vec<Halfspace>,
    /// `sum_k 1/mu_k <= nu` when present.
    pub inv_sum: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Objective<'a> {
    /// `0.5 * ||mu - anchor||^2`
    Distance(&'a [f64]),
    /// `c . mu`
    Linear(&'a [f64]),
    /// `sum_k a_k / mu_k` with `a_k >= 0`.
    InverseWeighted(&'a [f64]),
}

const MAX_NEWTON: usize = 200;
const MAX_OUTER: usize = 60;
const T_GROWTH: f64 = 10.0;

impl Problem {
    pub fn new(n: usize) -> Self {
        Problem {
            n,
            halfspaces: Vec::new(),
            inv_sum: None,
        }
    }

    pub fn push(&mut self, g: Vec<f64>, h: f64) {
        debug_assert_eq!(g.len(), self.n);
        self.halfspaces.push(Halfspace { g, h });
    }

    fn num_constraints(&self) -> usize {
        self.halfspaces.len() + self.n + usize::from(self.inv_sum.is_some())
    }

    /// Smallest slack over all constraints at `mu` (positive means strictly feasible).
    pub fn min_slack(&self, mu: &[f64]) -> f64 {
        let mut s = mu.iter().copied().fold(f64::INFINITY, f64::min);
        for hs in &self.halfspaces {
            s = s.min(hs.h - dot(&hs.g, mu));
        }
        if let Some(nu) = self.inv_sum {
            if mu.iter().all(|v| *v > 0.0) {
                s = s.min(nu - mu.iter().map(|v| 1.0 / v).sum::<f64>());
            }
        }
        s
    }

    /// Finds a strictly feasible point, maximizing the smallest constraint slack.
    ///
    /// Returns `None` when no point with positive slack exists.
    pub fn strictly_feasible_point(&self, start: &[f64]) -> Option<Vec<f64>> {
        if self.min_slack(start) > 0.0 {
            // Still center it a little so later solves have room to move.
            return Some(start.to_vec());
        }
        let n = self.n;
        let mut y: Vec<f64> = start.iter().map(|v| v.max(1e-6)).collect();
        let s0 = -self.phase1_slack(&y) + 1.0;
        y.push(s0);
        let total = self.halfspaces.len() + usize::from(self.inv_sum.is_some()) + n;
        let mut t = 1.0;
        for _ in 0..MAX_OUTER {
            y = newton(&y, |z| self.phase1_eval(z, t))?;
            let s = y[n];
            if s < 0.0 {
                let mu = y[..n].to_vec();
                return (self.min_slack(&mu) > 0.0).then_some(mu);
            }
            if (total as f64) / t < 1e-14 {
                break;
            }
            t *= T_GROWTH;
        }
        None
    }

    fn phase1_slack(&self, mu: &[f64]) -> f64 {
        let mut s = f64::INFINITY;
        for hs in &self.halfspaces {
            s = s.min(hs.h - dot(&hs.g, mu));
        }
        if let Some(nu) = self.inv_sum {
            s = s.min(nu - mu.iter().map(|v| 1.0 / v).sum::<f64>());
        }
        if s.is_infinite() {
            0.0
        } else {
            s
        }
    }

    /// Barrier for `min s` s.t. `g.mu - h <= s`, `sum 1/mu - nu <= s`, `mu > 0`.
    fn phase1_eval(&self, y: &[f64], t: f64) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let n = self.n;
        let (mu, s) = (&y[..n], y[n]);
        if mu.iter().any(|v| *v <= 0.0) {
            return None;
        }
        let dim = n + 1;
        let mut val = t * s;
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        grad[n] = t;
        for hs in &self.halfspaces {
            // slack q = s + h - g.mu > 0, gradient of q: (-g, 1)
            let q = s + hs.h - dot(&hs.g, mu);
            if q <= 0.0 {
                return None;
            }
            val -= q.ln();
            let mut dq = hs.g.iter().map(|v| -v).collect::<Vec<_>>();
            dq.push(1.0);
            add_log_term(&mut grad, &mut hess, q, &dq, None);
        }
        if let Some(nu) = self.inv_sum {
            let q = s + nu - mu.iter().map(|v| 1.0 / v).sum::<f64>();
            if q <= 0.0 {
                return None;
            }
            val -= q.ln();
            let mut dq: Vec<f64> = mu.iter().map(|v| 1.0 / (v * v)).collect();
            dq.push(1.0);
            let curv: Vec<f64> = mu.iter().map(|v| -2.0 / (v * v * v)).chain([0.0]).collect();
            add_log_term(&mut grad, &mut hess, q, &dq, Some(&curv));
        }
        for k in 0..n {
            val -= mu[k].ln();
            grad[k] -= 1.0 / mu[k];
            hess[(k, k)] += 1.0 / (mu[k] * mu[k]);
        }
        Some((val, grad, hess))
    }

    /// `t * f(mu) + barrier(mu)` with gradient and Hessian.
    fn eval(&self, mu: &[f64], t: f64, obj: Objective<'_>) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let n = self.n;
        if mu.iter().any(|v| *v <= 0.0) {
            return None;
        }
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let mut val;
        match obj {
            Objective::Distance(a) => {
                val = 0.5 * t * mu.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
                for k in 0..n {
                    grad[k] = t * (mu[k] - a[k]);
                    hess[(k, k)] = t;
                }
            }
            Objective::Linear(c) => {
                val = t * dot(c, mu);
                for k in 0..n {
                    grad[k] = t * c[k];
                }
            }
            Objective::InverseWeighted(a) => {
                val = t * mu.iter().zip(a).map(|(x, w)| w / x).sum::<f64>();
                for k in 0..n {
                    grad[k] = -t * a[k] / (mu[k] * mu[k]);
                    hess[(k, k)] = 2.0 * t * a[k] / (mu[k] * mu[k] * mu[k]);
                }
            }
        }
        for hs in &self.halfspaces {
            let q = hs.h - dot(&hs.g, mu);
            if q <= 0.0 {
                return None;
            }
            val -= q.ln();
            let dq: Vec<f64> = hs.g.iter().map(|v| -v).collect();
            add_log_term(&mut grad, &mut hess, q, &dq, None);
        }
        if let Some(nu) = self.inv_sum {
            let q = nu - mu.iter().map(|v| 1.0 / v).sum::<f64>();
            if q <= 0.0 {
                return None;
            }
            val -= q.ln();
            let dq: Vec<f64> = mu.iter().map(|v| 1.0 / (v * v)).collect();
            let curv: Vec<f64> = mu.iter().map(|v| -2.0 / (v * v * v)).collect();
            add_log_term(&mut grad, &mut hess, q, &dq, Some(&curv));
        }
        for k in 0..n {
            val -= mu[k].ln();
            grad[k] -= 1.0 / mu[k];
            hess[(k, k)] += 1.0 / (mu[k] * mu[k]);
        }
        Some((val, grad, hess))
    }

    /// Minimizes `obj` from a strictly feasible `start`.
    ///
    /// The result is strictly feasible and within `gap_tol * max(1, |f|)` of optimal.
    pub fn minimize(&self, start: &[f64], obj: Objective<'_>, gap_tol: f64) -> Option<Vec<f64>> {
        if self.min_slack(start) <= 0.0 {
            return None;
        }
        let total = self.num_constraints() as f64;
        let mut x = start.to_vec();
        let mut t = 1.0;
        for _ in 0..MAX_OUTER {
            x = newton(&x, |z| self.eval(z, t, obj))?;
            let f = objective_value(&x, obj);
            if total / t < gap_tol * f.abs().max(1.0) {
                return Some(x);
            }
            t *= T_GROWTH;
        }
        Some(x)
    }
}

pub(crate) fn objective_value(mu: &[f64], obj: Objective<'_>) -> f64 {
    match obj {
        Objective::Distance(a) => 0.5 * mu.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum::<f64>(),
        Objective::Linear(c) => dot(c, mu),
        Objective::InverseWeighted(a) => mu.iter().zip(a).map(|(x, w)| w / x).sum(),
    }
}

/// Accumulates the derivatives of `-ln q(x)` given `dq = grad q` and, for
/// separable curvature, `curv[i] = d^2 q / dx_i^2`.
fn add_log_term(grad: &mut DVector<f64>, hess: &mut DMatrix<f64>, q: f64, dq: &[f64], curv: Option<&[f64]>) {
    let dim = dq.len();
    for i in 0..dim {
        grad[i] -= dq[i] / q;
        for j in 0..dim {
            hess[(i, j)] += dq[i] * dq[j] / (q * q);
        }
        if let Some(c) = curv {
            hess[(i, i)] -= c[i] / q;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Damped Newton with backtracking; `f` returns `None` outside the domain.
fn newton<F>(start: &[f64], f: F) -> Option<Vec<f64>>
where
    F: Fn(&[f64]) -> Option<(f64, DVector<f64>, DMatrix<f64>)>,
{
    let mut x = start.to_vec();
    let (mut val, mut grad, mut hess) = f(&x)?;
    for _ in 0..MAX_NEWTON {
        let dim = x.len();
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&(-&grad)),
            None => {
                let reg = hess.clone() + DMatrix::identity(dim, dim) * (1e-12 * hess.diagonal().amax().max(1.0));
                reg.cholesky()?.solve(&(-&grad))
            }
        };
        let decrement = -grad.dot(&step);
        if !decrement.is_finite() {
            return None;
        }
        if decrement * 0.5 <= 1e-14 {
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-20 {
            let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
            if let Some((cv, cg, ch)) = f(&cand) {
                if cv <= val - 0.25 * alpha * decrement {
                    x = cand;
                    val = cv;
                    grad = cg;
                    hess = ch;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some(x)
}
