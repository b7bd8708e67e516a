//! Preprocessing of raw sequencing counts into a learnable count matrix:
//! per-sample upper-quartile scaling, selection of the most variable columns
//! and a power transform `x^a` with `a` chosen to minimize the
//! Kolmogorov-Smirnov distance to a Poisson law.
//!
//! Rows are samples and columns are features (genes, miRNAs).

use std::io::BufRead;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::CountMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub chosen_alpha: f64,
    pub kept_columns: Vec<usize>,
    /// Multiplier applied to each row by the quantile matching step.
    pub scale_factors: Vec<f64>,
    pub ks_statistic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessOptions {
    /// Fraction of columns kept by variance.
    pub fraction: f64,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions { fraction: 0.25 }
    }
}

/// Linear-interpolation quantile of sorted data (R type 7).
fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// 75th percentile of the nonzero entries of each row.
pub fn upper_quartiles(raw: &DMatrix<f64>) -> Result<Vec<f64>> {
    (0..raw.nrows())
        .map(|i| {
            let mut nz: Vec<f64> = raw.row(i).iter().copied().filter(|&v| v > 0.0).collect();
            if nz.is_empty() {
                return Err(Error::InvalidData(format!(
                    "row {i} has no nonzero entries"
                )));
            }
            nz.sort_by(f64::total_cmp);
            Ok(quantile_sorted(&nz, 0.75))
        })
        .collect()
}

/// Rescale each row so its upper quartile of nonzero counts equals the median
/// upper quartile across rows. Returns the matrix and the row multipliers.
pub fn quantile_match_75(raw: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    check_nonnegative(raw)?;
    let q = upper_quartiles(raw)?;
    let target = median(&q);
    let factors: Vec<f64> = q.iter().map(|&qi| target / qi).collect();
    let mut out = raw.clone();
    for (i, &f) in factors.iter().enumerate() {
        if f != 1.0 {
            out.row_mut(i).scale_mut(f);
        }
    }
    Ok((out, factors))
}

fn column_variance(m: &DMatrix<f64>, j: usize) -> f64 {
    let n = m.nrows();
    if n < 2 {
        return 0.0;
    }
    let col = m.column(j);
    let mean = col.sum() / n as f64;
    col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Keep the `ceil(fraction * p)` columns of largest variance (ties to the lower
/// index). Kept indices are returned in ascending order.
pub fn filter_top_variable(m: &DMatrix<f64>, fraction: f64) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::usage(format!(
            "fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let p = m.ncols();
    let keep = ((fraction * p as f64) - 1e-9).ceil().max(0.0) as usize;
    let keep = keep.min(p);
    let var: Vec<f64> = (0..p).map(|j| column_variance(m, j)).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = order.into_iter().take(keep).collect();
    kept.sort_unstable();
    Ok((m.select_columns(kept.iter()), kept))
}

/// Poisson CDF values `F(0..=kmax)`.
fn poisson_cdf_table(mean: f64, kmax: usize) -> Vec<f64> {
    if mean <= 0.0 {
        return vec![1.0; kmax + 1];
    }
    let ln_mean = mean.ln();
    let mut logp = -mean;
    let mut acc = 0.0;
    let mut table = Vec::with_capacity(kmax + 1);
    for k in 0..=kmax {
        if k > 0 {
            logp += ln_mean - (k as f64).ln();
        }
        acc += logp.exp();
        table.push(acc.min(1.0));
    }
    table
}

/// Kolmogorov-Smirnov distance between the empirical law of `values` and a
/// Poisson law with the same mean. Both CDFs are step functions, so the
/// supremum is found among data points and integers, on both sides of each jump.
pub fn ks_poisson(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let vmax = *sorted.last().unwrap_or(&0.0);
    let kmax = vmax.ceil().max(0.0) as usize + 1;
    let cdf = poisson_cdf_table(mean, kmax);
    let pois_at = |x: f64| -> f64 {
        if x < 0.0 {
            0.0
        } else {
            cdf[(x.floor() as usize).min(kmax)]
        }
    };
    let pois_before = |x: f64| -> f64 {
        let k = x.ceil() - 1.0;
        if k < 0.0 {
            0.0
        } else {
            cdf[(k as usize).min(kmax)]
        }
    };
    let emp_at = |x: f64| sorted.partition_point(|&v| v <= x) as f64 / n;
    let emp_before = |x: f64| sorted.partition_point(|&v| v < x) as f64 / n;

    let mut best = 0.0f64;
    let mut check = |x: f64| {
        best = best
            .max((emp_at(x) - pois_at(x)).abs())
            .max((emp_before(x) - pois_before(x)).abs());
    };
    let mut prev = f64::NAN;
    for &v in &sorted {
        if v != prev {
            check(v);
            prev = v;
        }
    }
    for k in 0..=kmax {
        check(k as f64);
    }
    best
}

/// Grid-search `a` over `{0, 0.01, ..., 1}` minimizing the KS distance of the
/// pooled `x^a`, then round `x^a` to the nearest integer.
pub fn power_transform_ks(m: &DMatrix<f64>) -> Result<(DMatrix<u32>, f64, f64)> {
    check_nonnegative(m)?;
    let mut best = (f64::INFINITY, 0.0);
    let mut buf = Vec::with_capacity(m.len());
    for step in 0..=100 {
        let a = step as f64 / 100.0;
        buf.clear();
        buf.extend(m.iter().map(|&v| v.powf(a)));
        let ks = ks_poisson(&buf);
        if ks < best.0 {
            best = (ks, a);
        }
    }
    let (ks, a) = best;
    let out = m.map(|v| (v.powf(a) + 0.5).floor() as u32);
    Ok((out, a, ks))
}

fn check_nonnegative(m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Data {
                    row: i,
                    col: j,
                    msg: format!("value {v} is not a finite nonnegative number"),
                });
            }
        }
    }
    Ok(())
}

/// Full pipeline.
pub fn preprocess(
    names: &[String],
    raw: &DMatrix<f64>,
    options: &PreprocessOptions,
) -> Result<(CountMatrix, PreprocessReport)> {
    if names.len() != raw.ncols() {
        return Err(Error::usage("column names do not match the matrix width"));
    }
    let (matched, scale_factors) = quantile_match_75(raw)?;
    let (filtered, kept_columns) = filter_top_variable(&matched, options.fraction)?;
    let (counts, chosen_alpha, ks_statistic) = power_transform_ks(&filtered)?;
    let columns = (0..counts.ncols())
        .map(|j| counts.column(j).iter().copied().collect())
        .collect();
    let kept_names = kept_columns.iter().map(|&j| names[j].clone()).collect();
    let matrix = CountMatrix::from_columns(kept_names, columns)?;
    Ok((
        matrix,
        PreprocessReport {
            chosen_alpha,
            kept_columns,
            scale_factors,
            ks_statistic,
        },
    ))
}

/// Read a TSV of nonnegative reals with a header of column names.
pub fn read_real_tsv<R: BufRead>(reader: R) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(l) => l?,
        None => return Err(Error::format(1, "empty input, expected a header line")),
    };
    let names: Vec<String> = header.split('\t').map(|s| s.trim().to_string()).collect();
    let p = names.len();
    let mut values = Vec::new();
    let mut n = 0;
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != p {
            return Err(Error::format(
                lineno,
                format!("expected {p} fields, found {}", cells.len()),
            ));
        }
        for (j, c) in cells.iter().enumerate() {
            let v: f64 = c
                .trim()
                .parse()
                .map_err(|_| Error::format(lineno, format!("column {j}: '{c}' is not a number")))?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::format(
                    lineno,
                    format!("column {j}: {v} is negative or non-finite"),
                ));
            }
            values.push(v);
        }
        n += 1;
    }
    Ok((names, DMatrix::from_row_slice(n, p, &values)))
}
