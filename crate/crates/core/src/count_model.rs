//! Exponential-family primitives for count responses.
//!
//! A node conditional law is `P(k) = exp{k·eta - log k! - D(eta)}` where the
//! log-normalizer `D` sums over `{0, ..., R}` for the truncated Poisson and
//! equals `exp(eta)` for the unrestricted Poisson. The derivatives of `D` are
//! the conditional mean, variance and third central moment of the count.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Law of a node conditional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CountFamily {
    /// Poisson restricted and renormalized to `{0, ..., r}`.
    TruncatedPoisson {
        r: u32,
    },
    Poisson,
}

impl CountFamily {
    pub fn truncated(r: u32) -> Result<Self> {
        if r == 0 {
            return Err(Error::usage("truncation point R must be at least 1"));
        }
        Ok(CountFamily::TruncatedPoisson { r })
    }

    /// Largest count in the support, `None` when unbounded.
    pub fn max_count(&self) -> Option<u32> {
        match *self {
            CountFamily::TruncatedPoisson { r } => Some(r),
            CountFamily::Poisson => None,
        }
    }

    pub fn in_support(&self, k: u32) -> bool {
        self.max_count().is_none_or(|r| k <= r)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CountFamily::TruncatedPoisson { r: 0 } => {
                Err(Error::usage("truncation point R must be at least 1"))
            }
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for CountFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CountFamily::TruncatedPoisson { r } => write!(f, "truncated-poisson(R={r})"),
            CountFamily::Poisson => write!(f, "poisson"),
        }
    }
}

/// Table of `log k!` built by summing logarithms.
#[derive(Debug, Clone)]
pub struct LogFactorials {
    table: Vec<f64>,
}

impl LogFactorials {
    pub fn up_to(max: u32) -> Self {
        let mut table = Vec::with_capacity(max as usize + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for k in 1..=max {
            acc += f64::from(k).ln();
            table.push(acc);
        }
        LogFactorials { table }
    }

    pub fn max(&self) -> u32 {
        (self.table.len() - 1) as u32
    }

    /// `log k!`; extends by summation past the table end.
    pub fn get(&self, k: u32) -> f64 {
        match self.table.get(k as usize) {
            Some(&v) => v,
            None => {
                let mut acc = *self.table.last().unwrap_or(&0.0);
                for j in self.table.len() as u32..=k {
                    acc += f64::from(j).ln();
                }
                acc
            }
        }
    }
}

/// `D` together with its first three derivatives at one natural parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// Precomputed evaluator for a fixed family. Used in the inner loops of the
/// local likelihood so that `log k!` is not recomputed per row.
#[derive(Debug, Clone)]
pub struct Evaluator {
    family: CountFamily,
    log_fact: LogFactorials,
}

impl Evaluator {
    pub fn new(family: CountFamily) -> Self {
        let max = family.max_count().unwrap_or(0);
        Evaluator {
            family,
            log_fact: LogFactorials::up_to(max),
        }
    }

    pub fn family(&self) -> CountFamily {
        self.family
    }

    /// `D(eta)` without the finiteness check.
    pub fn d0(&self, eta: f64) -> f64 {
        match self.family {
            CountFamily::Poisson => eta.exp(),
            CountFamily::TruncatedPoisson { r } => {
                let lf = &self.log_fact.table;
                let mut max = f64::NEG_INFINITY;
                for (k, l) in lf.iter().enumerate().take(r as usize + 1) {
                    max = max.max(k as f64 * eta - l);
                }
                let sum: f64 = lf
                    .iter()
                    .enumerate()
                    .take(r as usize + 1)
                    .map(|(k, l)| (k as f64 * eta - l - max).exp())
                    .sum();
                max + sum.ln()
            }
        }
    }

    /// `D` and derivatives without the finiteness check.
    pub fn moments(&self, eta: f64) -> Moments {
        match self.family {
            CountFamily::Poisson => {
                let e = eta.exp();
                Moments {
                    d0: e,
                    d1: e,
                    d2: e,
                    d3: e,
                }
            }
            CountFamily::TruncatedPoisson { r } => {
                let lf = &self.log_fact.table[..=r as usize];
                let mut max = f64::NEG_INFINITY;
                for (k, l) in lf.iter().enumerate() {
                    max = max.max(k as f64 * eta - l);
                }
                let mut z = 0.0;
                let mut s1 = 0.0;
                // weights are recomputed in the second pass; R is small
                for (k, l) in lf.iter().enumerate() {
                    let w = (k as f64 * eta - l - max).exp();
                    z += w;
                    s1 += w * k as f64;
                }
                let mean = s1 / z;
                let mut m2 = 0.0;
                let mut m3 = 0.0;
                for (k, l) in lf.iter().enumerate() {
                    let w = (k as f64 * eta - l - max).exp() / z;
                    let c = k as f64 - mean;
                    m2 += w * c * c;
                    m3 += w * c * c * c;
                }
                Moments {
                    d0: max + z.ln(),
                    d1: mean,
                    d2: m2,
                    d3: m3,
                }
            }
        }
    }

    pub fn log_factorial(&self, k: u32) -> f64 {
        self.log_fact.get(k)
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "natural parameter must be finite, got {eta}"
        )))
    }
}

/// Log-normalizer `D(eta)`.
pub fn log_normalizer(family: CountFamily, eta: f64) -> Result<f64> {
    family.validate()?;
    check_eta(eta)?;
    Ok(Evaluator::new(family).d0(eta))
}

/// `(D', D'', D''')` at `eta`: conditional mean, variance and third central moment.
pub fn log_normalizer_derivs(family: CountFamily, eta: f64) -> Result<(f64, f64, f64)> {
    family.validate()?;
    check_eta(eta)?;
    let m = Evaluator::new(family).moments(eta);
    Ok((m.d1, m.d2, m.d3))
}

pub fn pmf(family: CountFamily, eta: f64, k: u32) -> Result<f64> {
    family.validate()?;
    check_eta(eta)?;
    if !family.in_support(k) {
        return Err(Error::domain(format!(
            "count {k} outside the support of {family}"
        )));
    }
    let ev = Evaluator::new(family);
    let logp = k as f64 * eta - ev.log_factorial(k) - ev.d0(eta);
    Ok(logp.exp().clamp(0.0, 1.0))
}

/// Draw one count. Truncated draws use inversion of the cumulative pmf with a
/// single uniform; Poisson draws delegate to `rand_distr`.
pub fn sample<R: Rng + ?Sized>(family: CountFamily, eta: f64, rng: &mut R) -> Result<u32> {
    family.validate()?;
    check_eta(eta)?;
    match family {
        CountFamily::Poisson => {
            let lambda = eta.exp();
            let dist = Poisson::new(lambda)
                .map_err(|e| Error::domain(format!("cannot sample Poisson({lambda}): {e}")))?;
            Ok(dist.sample(rng) as u32)
        }
        CountFamily::TruncatedPoisson { r } => {
            let ev = Evaluator::new(family);
            let d = ev.d0(eta);
            let u: f64 = rng.random();
            let mut cdf = 0.0;
            for k in 0..r {
                cdf += (k as f64 * eta - ev.log_factorial(k) - d).exp();
                if u < cdf {
                    return Ok(k);
                }
            }
            Ok(r)
        }
    }
}
