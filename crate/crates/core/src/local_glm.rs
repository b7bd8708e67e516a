//! Node-conditional GLM fits.
//!
//! The response column `s` is modelled given the predictor columns with natural
//! parameter `eta = <theta, x>` and the rescaled negative log-likelihood
//!
//! ```text
//! l(theta) = (1/n) sum_i [ -x_is * eta_i + log x_is! + D(eta_i) ]
//! ```
//!
//! minimized by a damped Newton method with a box bound on every coordinate.
//! When an intercept is requested it occupies the last slot of `theta`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::count_model::{CountFamily, Evaluator};
use crate::error::{Error, Result};
use crate::matrix::CountMatrix;

/// A response/predictor selection over a count matrix.
#[derive(Debug, Clone, Copy)]
pub struct DesignView<'a> {
    pub data: &'a CountMatrix,
    pub response: usize,
    pub predictors: &'a [usize],
    pub family: CountFamily,
    pub include_intercept: bool,
}

impl<'a> DesignView<'a> {
    pub fn new(
        data: &'a CountMatrix,
        response: usize,
        predictors: &'a [usize],
        family: CountFamily,
        include_intercept: bool,
    ) -> Self {
        DesignView {
            data,
            response,
            predictors,
            family,
            include_intercept,
        }
    }

    /// Length of the coefficient vector.
    pub fn dim(&self) -> usize {
        self.predictors.len() + usize::from(self.include_intercept)
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        let p = self.data.ncols();
        if self.data.nrows() == 0 {
            return Err(Error::usage("design has no rows"));
        }
        if self.response >= p {
            return Err(Error::usage(format!(
                "response index {} out of range",
                self.response
            )));
        }
        for (k, &j) in self.predictors.iter().enumerate() {
            if j >= p {
                return Err(Error::usage(format!("predictor index {j} out of range")));
            }
            if j == self.response {
                return Err(Error::usage(format!(
                    "response {j} listed among its predictors"
                )));
            }
            if self.predictors[..k].contains(&j) {
                return Err(Error::usage(format!("predictor {j} listed twice")));
            }
        }
        if let Some(r) = self.family.max_count() {
            let col = self.data.column(self.response);
            if let Some(row) = col.iter().position(|&v| v > r) {
                return Err(Error::Data {
                    row,
                    col: self.response,
                    msg: format!("count {} exceeds truncation point R = {r}", col[row]),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Box bound `M`: every coefficient is kept in `[-M, M]`.
    pub box_bound: f64,
    /// Diagonal shift used only when the Newton system is singular.
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 100,
            grad_tol: 1e-8,
            box_bound: 30.0,
            ridge: 1e-10,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0;
        if !positive(self.grad_tol)
            || !positive(self.box_bound)
            || self.ridge.is_nan()
            || self.ridge < 0.0
        {
            return Err(Error::usage(
                "fit options need grad_tol > 0, box_bound > 0 and ridge >= 0",
            ));
        }
        Ok(())
    }
}

/// Fitted local model.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFit {
    /// Coefficients aligned with the predictors, intercept last when present.
    pub theta_hat: Vec<f64>,
    /// `(1/n) sum_i D''(eta_i) x_i x_i^T` at `theta_hat`.
    pub avg_hessian: DMatrix<f64>,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    pub boundary_hit: bool,
    pub grad_norm: f64,
    pub objective: f64,
    /// Coordinates whose Hessian diagonal vanishes (constant-zero predictor).
    pub degenerate_coords: Vec<usize>,
}

/// Dense copy of a design, row-major, ready for repeated evaluation.
struct Problem {
    n: usize,
    dim: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    mean_log_fact: f64,
    eval: Evaluator,
}

impl Problem {
    fn build(design: &DesignView<'_>) -> Result<Self> {
        design.validate()?;
        let data = design.data;
        let n = data.nrows();
        let dim = design.dim();
        let mut x = Vec::with_capacity(n * dim);
        for i in 0..n {
            for &j in design.predictors {
                x.push(f64::from(data.get(i, j)));
            }
            if design.include_intercept {
                x.push(1.0);
            }
        }
        let resp = data.column(design.response);
        let eval = Evaluator::new(design.family);
        let mean_log_fact = resp.iter().map(|&v| eval.log_factorial(v)).sum::<f64>() / n as f64;
        Ok(Problem {
            n,
            dim,
            x,
            y: resp.iter().map(|&v| f64::from(v)).collect(),
            mean_log_fact,
            eval,
        })
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::usage(format!(
                "theta has length {}, design needs {}",
                theta.len(),
                self.dim
            )));
        }
        Ok(())
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    fn eta(&self, i: usize, theta: &[f64]) -> f64 {
        self.row(i).iter().zip(theta).map(|(a, b)| a * b).sum()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let eta = self.eta(i, theta);
            acc += self.eval.d0(eta) - self.y[i] * eta;
        }
        acc / self.n as f64 + self.mean_log_fact
    }

    fn gradient(&self, theta: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        for i in 0..self.n {
            let eta = self.eta(i, theta);
            let resid = self.eval.moments(eta).d1 - self.y[i];
            for (gk, xk) in g.iter_mut().zip(self.row(i)) {
                *gk += resid * xk;
            }
        }
        g / self.n as f64
    }

    fn hessian(&self, theta: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.n {
            let w = self.eval.moments(self.eta(i, theta)).d2;
            accumulate_outer(&mut h, self.row(i), w);
        }
        symmetrize(&mut h);
        h / self.n as f64
    }

    /// Objective, gradient and Hessian in one pass.
    fn all(&self, theta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let mut f = 0.0;
        let mut g = DVector::zeros(self.dim);
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.n {
            let eta = self.eta(i, theta);
            let m = self.eval.moments(eta);
            f += m.d0 - self.y[i] * eta;
            let resid = m.d1 - self.y[i];
            let row = self.row(i);
            for (gk, xk) in g.iter_mut().zip(row) {
                *gk += resid * xk;
            }
            accumulate_outer(&mut h, row, m.d2);
        }
        symmetrize(&mut h);
        let n = self.n as f64;
        (f / n + self.mean_log_fact, g / n, h / n)
    }
}

// lower triangle only; `symmetrize` mirrors it
fn accumulate_outer(h: &mut DMatrix<f64>, row: &[f64], w: f64) {
    for a in 0..row.len() {
        let wa = w * row[a];
        if wa == 0.0 {
            continue;
        }
        for b in 0..=a {
            h[(a, b)] += wa * row[b];
        }
    }
}

fn symmetrize(h: &mut DMatrix<f64>) {
    for a in 0..h.nrows() {
        for b in 0..a {
            h[(b, a)] = h[(a, b)];
        }
    }
}

/// Rescaled negative node-conditional log-likelihood.
pub fn neg_loglik(theta: &[f64], design: &DesignView<'_>) -> Result<f64> {
    let prob = Problem::build(design)?;
    prob.check_theta(theta)?;
    Ok(prob.value(theta))
}

pub fn gradient(theta: &[f64], design: &DesignView<'_>) -> Result<Vec<f64>> {
    let prob = Problem::build(design)?;
    prob.check_theta(theta)?;
    Ok(prob.gradient(theta).iter().copied().collect())
}

pub fn hessian(theta: &[f64], design: &DesignView<'_>) -> Result<DMatrix<f64>> {
    let prob = Problem::build(design)?;
    prob.check_theta(theta)?;
    Ok(prob.hessian(theta))
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solve `h d = -g`, shifting the diagonal only if the plain system is singular.
fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>, ridge: f64) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        let d = ch.solve(&(-g));
        if d.iter().all(|v| v.is_finite()) {
            return Some(d);
        }
    }
    let scale = h
        .diagonal()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let mut shift = ridge.max(f64::EPSILON) * scale;
    for _ in 0..16 {
        let mut shifted = h.clone();
        for k in 0..shifted.nrows() {
            shifted[(k, k)] += shift;
        }
        if let Some(ch) = shifted.cholesky() {
            let d = ch.solve(&(-g));
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        shift *= 100.0;
    }
    None
}

const MAX_HALVINGS: usize = 30;
const FLAT_OBJECTIVE: f64 = 1e-11;

/// Minimize the local objective by damped Newton iterations from `theta = 0`.
pub fn fit(design: &DesignView<'_>, options: &FitOptions) -> Result<NodeFit> {
    options.validate()?;
    let prob = Problem::build(design)?;
    let dim = prob.dim;
    let bound = options.box_bound;

    if dim == 0 {
        return Ok(NodeFit {
            theta_hat: Vec::new(),
            avg_hessian: DMatrix::zeros(0, 0),
            n: prob.n,
            converged: true,
            iterations: 0,
            boundary_hit: false,
            grad_norm: 0.0,
            objective: prob.value(&[]),
            degenerate_coords: Vec::new(),
        });
    }

    let mut theta = vec![0.0; dim];
    let (mut f, mut g, mut h) = prob.all(&theta);
    let mut iterations = 0;
    let mut converged = false;

    loop {
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Optimization(format!(
                "non-finite objective or gradient at iteration {iterations}"
            )));
        }
        let gnorm = inf_norm(&g);
        if gnorm <= options.grad_tol {
            converged = true;
            break;
        }
        if iterations >= options.max_iter {
            break;
        }
        let Some(dir) = newton_direction(&h, &g, options.ridge) else {
            break;
        };

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = theta
                .iter()
                .zip(dir.iter())
                .map(|(t, d)| (t + step * d).clamp(-bound, bound))
                .collect();
            let f_trial = prob.value(&trial);
            if f_trial.is_finite() {
                if f_trial < f {
                    accepted = Some(trial);
                    break;
                }
                // Near the optimum the objective is flat to rounding noise
                // from the n-term sum; there, require a smaller gradient.
                if f_trial <= f + FLAT_OBJECTIVE * f.abs().max(1.0) {
                    let g_trial = prob.gradient(&trial);
                    if inf_norm(&g_trial) < gnorm {
                        accepted = Some(trial);
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        let Some(next) = accepted else {
            break;
        };
        if next == theta {
            break;
        }
        theta = next;
        iterations += 1;
        (f, g, h) = prob.all(&theta);
    }

    let boundary_hit = theta.iter().any(|t| t.abs() >= bound);
    let grad_norm = inf_norm(&g);
    let scale = h
        .diagonal()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let degenerate_coords = (0..dim).filter(|&k| h[(k, k)] <= 1e-12 * scale).collect();
    Ok(NodeFit {
        theta_hat: theta,
        avg_hessian: h,
        n: prob.n,
        converged: converged && !boundary_hit,
        iterations,
        boundary_hit,
        grad_norm,
        objective: f,
        degenerate_coords,
    })
}
