//! Compact limited-memory BFGS minimizer with an evaluation/time budget.
//!
//! Tailored to the direct-likelihood path: objectives return the value and
//! the full gradient together (one forward-backward sweep yields both), so
//! every call is counted as one evaluation against the budget.

use std::collections::VecDeque;
use std::time::Instant;

const MEMORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;

#[derive(Debug)]
pub(crate) struct Budget {
    pub evals_left: u64,
    pub deadline: Option<Instant>,
    pub time_bound_hit: bool,
    pub eval_bound_hit: bool,
}

impl Budget {
    pub fn new(maxeval: u64, deadline: Option<Instant>) -> Self {
        Budget { evals_left: maxeval, deadline, time_bound_hit: false, eval_bound_hit: false }
    }

    /// Reserve one evaluation; false when the budget is exhausted.
    pub fn take_eval(&mut self) -> bool {
        if self.evals_left == 0 {
            self.eval_bound_hit = true;
            return false;
        }
        self.evals_left -= 1;
        true
    }

    pub fn time_up(&mut self) -> bool {
        if let Some(deadline) = self.deadline {
            if Instant::now() >= deadline {
                self.time_bound_hit = true;
                return true;
            }
        }
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StopReason {
    Converged,
    EvalBudget,
    TimeBudget,
}

#[derive(Debug)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub reason: StopReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimize `f` from `x0` within the budget. `gradient_tolerance` is the
/// absolute infinity-norm stopping threshold.
pub(crate) fn minimize<F>(
    mut objective: F,
    x0: Vec<f64>,
    budget: &mut Budget,
    gradient_tolerance: f64,
    max_iterations: usize,
) -> Minimum
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    if x.is_empty() {
        // Nothing to optimize; still evaluate once so callers learn f(x).
        if !budget.take_eval() {
            return Minimum { x, f: f64::INFINITY, reason: StopReason::EvalBudget };
        }
        let (f, _) = objective(&x);
        return Minimum { x, f, reason: StopReason::Converged };
    }
    if !budget.take_eval() {
        return Minimum { x, f: f64::INFINITY, reason: StopReason::EvalBudget };
    }
    let (mut f, mut g) = objective(&x);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();

    for _ in 0..max_iterations {
        if inf_norm(&g) <= gradient_tolerance {
            return Minimum { x, f, reason: StopReason::Converged };
        }
        if budget.time_up() {
            return Minimum { x, f, reason: StopReason::TimeBudget };
        }

        // Two-loop recursion for the search direction.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let alpha = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= alpha * yi;
            }
            alphas.push(alpha);
        }
        if let Some((s, y, _)) = history.back() {
            let scale = dot(s, y) / dot(y, y);
            for di in &mut d {
                *di *= scale;
            }
        } else {
            let scale = 1.0 / inf_norm(&g).max(1.0);
            for di in &mut d {
                *di *= scale;
            }
        }
        for ((s, y, rho), alpha) in history.iter().zip(alphas.into_iter().rev()) {
            let beta = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (alpha - beta) * si;
            }
        }

        let slope = dot(&g, &d);
        if slope >= 0.0 {
            // Stale curvature made the direction non-descending; restart
            // from steepest descent.
            history.clear();
            let scale = 1.0 / inf_norm(&g).max(1.0);
            d = g.iter().map(|v| -v * scale).collect();
        }
        let slope = dot(&g, &d);

        let mut step = 1.0;
        let mut accepted = false;
        let mut f_new = f;
        let mut g_new = Vec::new();
        let mut x_new = Vec::new();
        for _ in 0..MAX_BACKTRACKS {
            if !budget.take_eval() {
                return Minimum { x, f, reason: StopReason::EvalBudget };
            }
            x_new = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (fv, gv) = objective(&x_new);
            if fv.is_finite() && fv <= f + ARMIJO_C1 * step * slope {
                f_new = fv;
                g_new = gv;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No step improved the objective; the current point is the
            // practical minimum along every tried scale.
            return Minimum { x, f, reason: StopReason::Converged };
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * inf_norm(&s).max(1e-300) * inf_norm(&y).max(1e-300) {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        f = f_new;
        g = g_new;
    }
    Minimum { x, f, reason: StopReason::Converged }
}
