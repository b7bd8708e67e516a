//! Wald tests for a single coefficient of a node-conditional fit.
//!
//! `Z = sqrt(n) * theta_t / sqrt([H^{-1}]_tt)` with `H` the average Hessian of
//! the rescaled negative log-likelihood at the estimate. The literal variant
//! uses the observed information `n * H`, which multiplies `Z` by a further
//! `sqrt(n)`.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_glm::NodeFit;
pub use crate::normal::{normal_cdf, normal_quantile, normal_sf, two_sided_p};

/// Smallest admissible eigenvalue of the average Hessian.
pub const MIN_EIGENVALUE: f64 = 1e-12;

/// A significance level in `(0, 1)` with its two-sided critical value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha {
    level: f64,
    critical: f64,
}

impl Alpha {
    pub fn new(level: f64) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::usage(format!(
                "significance level must lie in (0, 1), got {level}"
            )));
        }
        let critical = normal_quantile(1.0 - level / 2.0)?;
        Ok(Alpha { level, critical })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// `Phi^{-1}(1 - alpha/2)`.
    pub fn critical(&self) -> f64 {
        self.critical
    }
}

/// Reject `H0: theta = 0` iff `|z| > Phi^{-1}(1 - alpha/2)`; ties do not reject.
pub fn decide(z: f64, alpha: Alpha) -> bool {
    z.abs() > alpha.critical
}

/// `alpha_n = 2 (1 - Phi(n^d))`, the level schedule under which the search is
/// consistent. Underflows to zero once `n^d` exceeds about 38.
pub fn alpha_schedule(n: usize, d: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::usage("sample size must be at least 1"));
    }
    if !(d > 0.0 && d < 0.5) {
        return Err(Error::usage(format!(
            "exponent d must lie in (0, 0.5), got {d}"
        )));
    }
    Ok(2.0 * normal_sf((n as f64).powf(d)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    NotConverged,
    BoundaryHit,
    SingularHessian,
    NonFinite,
    FitFailed,
}

impl std::fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Degeneracy::NotConverged => "local fit did not converge",
            Degeneracy::BoundaryHit => "coefficient clamped at the box bound",
            Degeneracy::SingularHessian => "average Hessian is singular",
            Degeneracy::NonFinite => "statistic is not finite",
            Degeneracy::FitFailed => "local fit failed",
        };
        f.write_str(s)
    }
}

/// Value of the statistic, or the reason it cannot be formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaldStatistic {
    Finite(f64),
    Degenerate(Degeneracy),
}

/// Wald statistic for coefficient `t_index` of `fit`.
pub fn wald_statistic(fit: &NodeFit, t_index: usize, literal: bool) -> Result<WaldStatistic> {
    let dim = fit.theta_hat.len();
    if t_index >= dim {
        return Err(Error::usage(format!(
            "coefficient index {t_index} out of range for {dim} coefficients"
        )));
    }
    if fit.boundary_hit {
        return Ok(WaldStatistic::Degenerate(Degeneracy::BoundaryHit));
    }
    if !fit.converged {
        return Ok(WaldStatistic::Degenerate(Degeneracy::NotConverged));
    }
    let h = &fit.avg_hessian;
    let eig = SymmetricEigen::new(h.clone());
    let min_eig = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if min_eig.is_nan() || min_eig <= MIN_EIGENVALUE {
        return Ok(WaldStatistic::Degenerate(Degeneracy::SingularHessian));
    }
    let Some(chol) = h.clone().cholesky() else {
        return Ok(WaldStatistic::Degenerate(Degeneracy::SingularHessian));
    };
    let inv = chol.inverse();
    let var = inv[(t_index, t_index)];
    let n = fit.n as f64;
    let mut z = n.sqrt() * fit.theta_hat[t_index] / var.sqrt();
    if literal {
        z *= n.sqrt();
    }
    if z.is_finite() {
        Ok(WaldStatistic::Finite(z))
    } else {
        Ok(WaldStatistic::Degenerate(Degeneracy::NonFinite))
    }
}

/// One conditional-independence test in the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub level: usize,
    /// Response node.
    pub s: usize,
    /// Node whose coefficient is tested.
    pub t: usize,
    pub cond_set: Vec<usize>,
    pub z: f64,
    pub p_value: f64,
    pub rejected: bool,
    pub degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl TestOutcome {
    /// Build an outcome from a statistic. Degenerate statistics never reject.
    pub fn from_statistic(
        level: usize,
        s: usize,
        t: usize,
        cond_set: Vec<usize>,
        stat: WaldStatistic,
        alpha: Alpha,
    ) -> Self {
        match stat {
            WaldStatistic::Finite(z) => TestOutcome {
                level,
                s,
                t,
                cond_set,
                z,
                p_value: two_sided_p(z),
                rejected: decide(z, alpha),
                degenerate: false,
                note: None,
            },
            WaldStatistic::Degenerate(reason) => TestOutcome {
                level,
                s,
                t,
                cond_set,
                z: 0.0,
                p_value: 1.0,
                rejected: false,
                degenerate: true,
                note: Some(reason.to_string()),
            },
        }
    }
}
