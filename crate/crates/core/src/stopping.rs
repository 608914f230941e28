//! Optimal stopping of a driftless binomial walk, used as an independent
//! oracle for the concave envelope.
//!
//! On the log-symmetric grid `x_j = s0·u^j`, `j ∈ [−J, J]`, a martingale
//! step moves up by `u` with probability `p = (1 − d)/(u − d)` and down by
//! `d = 1/u`. Iterating `V ← max(g, p·V↑ + (1 − p)·V↓)` from `V = g`
//! increases monotonically to the smallest grid-concave majorant of `g`,
//! which approximates `ĝ(s0)`.

use crate::payoff::{PayoffAst, PiecewiseAffine};

/// Log-spot grid with its value vector and boundary rule.
#[derive(Clone, Debug)]
pub struct StoppingGrid {
    pub s0: f64,
    pub half_width: usize,
    pub log_step: f64,
    pub nodes: Vec<f64>,
    pub payoff: Vec<f64>,
    pub values: Vec<f64>,
    /// Tail slope used to extrapolate one node past the top.
    pub upper_slope: f64,
}

impl StoppingGrid {
    pub fn new(g: &PiecewiseAffine, s0: f64, half_width: usize, log_step: f64) -> Self {
        let nodes: Vec<f64> = (0..=2 * half_width)
            .map(|i| s0 * (log_step * (i as f64 - half_width as f64)).exp())
            .collect();
        let payoff: Vec<f64> = nodes.iter().map(|&x| g.eval(x)).collect();
        Self {
            s0,
            half_width,
            log_step,
            values: payoff.clone(),
            payoff,
            nodes,
            upper_slope: g.tail_slope(),
        }
    }

    /// Up-move probability of the martingale walk.
    pub fn up_probability(&self) -> f64 {
        let u = self.log_step.exp();
        let d = 1.0 / u;
        (1.0 - d) / (u - d)
    }

    fn above_top(&self) -> f64 {
        let last = self.nodes.len() - 1;
        let next = self.nodes[last] * self.log_step.exp();
        self.values[last] + self.upper_slope * (next - self.nodes[last])
    }

    /// One Gauss–Seidel sweep from the top down; returns the sup-norm change.
    pub fn sweep(&mut self) -> f64 {
        let p = self.up_probability();
        let last = self.nodes.len() - 1;
        let mut change: f64 = 0.0;
        for j in (1..=last).rev() {
            let up = if j == last {
                self.above_top()
            } else {
                self.values[j + 1]
            };
            let cont = p * up + (1.0 - p) * self.values[j - 1];
            let v = self.payoff[j].max(cont);
            change = change.max(v - self.values[j]);
            self.values[j] = v;
        }
        // bottom node absorbs at the payoff
        change
    }

    pub fn value_at_s0(&self) -> f64 {
        self.values[self.half_width]
    }
}

#[derive(Clone, Debug)]
pub struct StoppingResult {
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Grid nodes where the value equals the payoff.
    pub exercise_region: Vec<f64>,
    pub grid: StoppingGrid,
}

/// Value-iteration estimate of `ĝ(s0) = sup_τ E[g(S_τ)]` on the log grid.
///
/// Stops once a sweep changes no value by `tol` or more; a run that hits
/// `max_iter` is returned with `converged = false`.
pub fn bellman_envelope(
    ast: &PayoffAst,
    s0: f64,
    half_width: usize,
    log_step: f64,
    tol: f64,
    max_iter: usize,
) -> StoppingResult {
    bellman_piecewise(&ast.to_piecewise(), s0, half_width, log_step, tol, max_iter)
}

pub fn bellman_piecewise(
    g: &PiecewiseAffine,
    s0: f64,
    half_width: usize,
    log_step: f64,
    tol: f64,
    max_iter: usize,
) -> StoppingResult {
    assert!(s0 > 0.0 && log_step > 0.0 && tol > 0.0);
    let mut grid = StoppingGrid::new(g, s0, half_width, log_step);
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        residual = grid.sweep();
        if residual < tol {
            break;
        }
    }
    let exercise_region = grid
        .nodes
        .iter()
        .zip(grid.values.iter().zip(&grid.payoff))
        .filter(|(_, (v, g))| v <= g)
        .map(|(&x, _)| x)
        .collect();
    StoppingResult {
        value: grid.value_at_s0(),
        iterations,
        residual,
        converged: residual < tol,
        exercise_region,
        grid,
    }
}

/// Root value of an `n_steps` martingale binomial tree with per-step log
/// move `sigma·√(T/n_steps)`, stopping allowed at every node.
pub fn finite_horizon_value(ast: &PayoffAst, s0: f64, n_steps: usize, horizon: f64, sigma: f64) -> f64 {
    assert!(n_steps >= 1 && sigma > 0.0 && horizon >= 0.0);
    if horizon == 0.0 {
        return ast.eval(s0);
    }
    let g = ast.to_piecewise();
    let step = sigma * (horizon / n_steps as f64).sqrt();
    let u = step.exp();
    let d = 1.0 / u;
    let p = (1.0 - d) / (u - d);
    let node = |level: usize, ups: usize| s0 * (step * (2.0 * ups as f64 - level as f64)).exp();
    let mut values: Vec<f64> = (0..=n_steps).map(|k| g.eval(node(n_steps, k))).collect();
    for level in (0..n_steps).rev() {
        for k in 0..=level {
            let cont = p * values[k + 1] + (1.0 - p) * values[k];
            values[k] = g.eval(node(level, k)).max(cont);
        }
        values.truncate(level + 1);
    }
    values[0]
}
