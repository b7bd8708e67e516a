//! Edge-recovery scores and Monte Carlo summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `tp / (tp + fp)`; `None` when nothing was estimated.
    pub ppv: Option<f64>,
    /// `tp / (tp + fn)`; `None` when the truth has no edges.
    pub se: Option<f64>,
}

impl Confusion {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        Confusion {
            tp,
            fp,
            fn_,
            ppv: ratio(tp, tp + fp),
            se: ratio(tp, tp + fn_),
        }
    }
}

pub fn confusion(truth: &UndirectedGraph, estimate: &UndirectedGraph) -> Result<Confusion> {
    if truth.p() != estimate.p() {
        return Err(Error::usage(format!(
            "truth has {} vertices, estimate has {}",
            truth.p(),
            estimate.p()
        )));
    }
    let est = estimate.edges();
    let tp = est.iter().filter(|&&(u, v)| truth.has_edge(u, v)).count();
    let fp = est.len() - tp;
    let fn_ = truth.edge_count() - tp;
    Ok(Confusion::from_counts(tp, fp, fn_))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation (divisor `k - 1`); zero for one value.
    pub sd: f64,
    /// Values that contributed.
    pub count: usize,
}

impl MeanSd {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        let k = values.len();
        if k == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / k as f64;
        let sd = if k > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (k - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(MeanSd { mean, sd, count: k })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub replicates: usize,
    pub tp: MeanSd,
    pub fp: MeanSd,
    #[serde(rename = "fn")]
    pub fn_: MeanSd,
    pub ppv: Option<MeanSd>,
    pub se: Option<MeanSd>,
    /// Replicates whose ppv was undefined and left out of its mean.
    pub ppv_excluded: usize,
    pub se_excluded: usize,
}

pub fn aggregate(confusions: &[Confusion]) -> Result<BenchSummary> {
    if confusions.is_empty() {
        return Err(Error::usage("cannot aggregate zero replicates"));
    }
    let col = |f: fn(&Confusion) -> usize| -> Vec<f64> {
        confusions.iter().map(|c| f(c) as f64).collect()
    };
    let ppv: Vec<f64> = confusions.iter().filter_map(|c| c.ppv).collect();
    let se: Vec<f64> = confusions.iter().filter_map(|c| c.se).collect();
    let k = confusions.len();
    Ok(BenchSummary {
        replicates: k,
        tp: MeanSd::of(&col(|c| c.tp)).expect("nonempty"),
        fp: MeanSd::of(&col(|c| c.fp)).expect("nonempty"),
        fn_: MeanSd::of(&col(|c| c.fn_)).expect("nonempty"),
        ppv_excluded: k - ppv.len(),
        se_excluded: k - se.len(),
        ppv: MeanSd::of(&ppv),
        se: MeanSd::of(&se),
    })
}
