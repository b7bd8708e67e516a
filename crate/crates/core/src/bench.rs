//! Monte Carlo benchmark harness: scenario files, replicate execution and
//! summary tables.
//!
//! A scenario file holds one scenario per line as whitespace-separated
//! `key=value` pairs; `#` starts a comment. `n` may list several sizes
//! separated by commas, each expanding to its own scenario.
//!
//! ```text
//! topology=scale-free p=10 n=200,1000,2000 lambda_noise=0.5
//! topology=hub p=10 hubs=2 n=200 lambda_noise=5 alpha=0.01
//! ```

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::count_model::CountFamily;
use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::metrics::{aggregate, confusion, BenchSummary, Confusion};
use crate::rng::{label_hash, mix, stream_rng};
use crate::sim::{simulate_counts, Topology, TopologySpec};
use crate::skeleton::{learn_skeleton, SkeletonOptions};

const GRAPH_STREAM_TAG: u64 = 0x0067_7261_7068; // "graph"

/// Family selection for a scenario; `Truncated(None)` takes `R` from the
/// largest count of each replicate dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FamilyChoice {
    Poisson,
    Truncated(Option<u32>),
}

impl FamilyChoice {
    pub fn resolve(&self, max_count: u32) -> Result<CountFamily> {
        match *self {
            FamilyChoice::Poisson => Ok(CountFamily::Poisson),
            FamilyChoice::Truncated(Some(r)) => CountFamily::truncated(r),
            FamilyChoice::Truncated(None) => CountFamily::truncated(max_count.max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Line of the scenario file it came from (1-based, 0 if built in code).
    pub line: usize,
    pub topology: TopologySpec,
    pub n: usize,
    pub lambda_true: f64,
    pub lambda_noise: f64,
    pub family: FamilyChoice,
    /// Search options; `family` inside is overwritten per replicate.
    pub skeleton: SkeletonOptions,
}

impl Scenario {
    pub fn new(topology: TopologySpec, n: usize, lambda_noise: f64) -> Self {
        Scenario {
            line: 0,
            topology,
            n,
            lambda_true: 1.0,
            lambda_noise,
            family: FamilyChoice::Poisson,
            skeleton: SkeletonOptions::default(),
        }
    }

    /// The truth graph, shared by every scenario with the same topology and seed.
    pub fn truth(&self, seed: u64) -> Result<UndirectedGraph> {
        let mut rng = stream_rng(
            mix(seed, GRAPH_STREAM_TAG),
            label_hash(&self.topology.label()),
        );
        self.topology.generate(&mut rng)
    }
}

/// Parse a scenario file.
pub fn parse_scenarios(text: &str) -> Result<Vec<Scenario>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        out.extend(parse_line(line, content)?);
    }
    if out.is_empty() {
        return Err(Error::format(0, "scenario file defines no scenarios"));
    }
    Ok(out)
}

fn parse_line(line: usize, content: &str) -> Result<Vec<Scenario>> {
    let mut topology = None;
    let mut p = None;
    let mut ns: Vec<usize> = Vec::new();
    let mut hubs = None;
    let mut edge_prob = None;
    let mut power = 1.0;
    let mut lambda_true = 1.0;
    let mut lambda_noise = 0.5;
    let mut family = "poisson".to_string();
    let mut r = None;
    let mut opts = SkeletonOptions::default();

    fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
        v.parse()
            .map_err(|_| Error::format(line, format!("invalid value '{v}' for '{key}'")))
    }

    for token in content.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::format(line, format!("expected key=value, found '{token}'")))?;
        match key {
            "topology" => topology = Some(value.to_string()),
            "p" => p = Some(num::<usize>(line, key, value)?),
            "n" => {
                for part in value.split(',') {
                    ns.push(num(line, key, part)?);
                }
            }
            "hubs" => hubs = Some(num::<usize>(line, key, value)?),
            "edge_prob" => edge_prob = Some(num::<f64>(line, key, value)?),
            "power" => power = num(line, key, value)?,
            "lambda_true" => lambda_true = num(line, key, value)?,
            "lambda_noise" => lambda_noise = num(line, key, value)?,
            "alpha" => opts.alpha = num(line, key, value)?,
            "m" => opts.max_cond_size = Some(num(line, key, value)?),
            "family" => family = value.to_string(),
            "r" | "R" => r = Some(num::<u32>(line, key, value)?),
            "intercept" => opts.include_intercept = num(line, key, value)?,
            "wald_literal" => opts.wald_literal = num(line, key, value)?,
            other => return Err(Error::format(line, format!("unknown key '{other}'"))),
        }
    }

    let p = p.ok_or_else(|| Error::format(line, "missing 'p'"))?;
    let kind = match topology.as_deref() {
        Some("scale-free") => Topology::ScaleFree { power },
        Some("hub") => Topology::Hub {
            n_hubs: hubs.ok_or_else(|| Error::format(line, "hub topology needs 'hubs'"))?,
        },
        Some("random") => Topology::Random {
            edge_prob: edge_prob
                .ok_or_else(|| Error::format(line, "random topology needs 'edge_prob'"))?,
        },
        Some(other) => return Err(Error::format(line, format!("unknown topology '{other}'"))),
        None => return Err(Error::format(line, "missing 'topology'")),
    };
    let topology = TopologySpec { kind, p };
    topology
        .validate()
        .map_err(|e| Error::format(line, e.to_string()))?;
    if ns.is_empty() {
        return Err(Error::format(line, "missing 'n'"));
    }
    if ns.contains(&0) {
        return Err(Error::format(line, "sample sizes must be positive"));
    }
    if [lambda_true, lambda_noise]
        .iter()
        .any(|&v: &f64| v.is_nan() || v <= 0.0)
    {
        return Err(Error::format(line, "Poisson rates must be positive"));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::format(line, "alpha must lie in (0, 1)"));
    }
    let family = match family.as_str() {
        "poisson" => FamilyChoice::Poisson,
        "truncated" => {
            if r == Some(0) {
                return Err(Error::format(line, "R must be at least 1"));
            }
            FamilyChoice::Truncated(r)
        }
        other => return Err(Error::format(line, format!("unknown family '{other}'"))),
    };

    Ok(ns
        .into_iter()
        .map(|n| Scenario {
            line,
            topology,
            n,
            lambda_true,
            lambda_noise,
            family,
            skeleton: opts.clone(),
        })
        .collect())
}

/// Outcome of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub confusion: Confusion,
    pub hamming: usize,
    pub tests_performed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub truth_edges: Vec<(usize, usize)>,
    pub replicates: Vec<ReplicateResult>,
    pub summary: BenchSummary,
}

impl ScenarioResult {
    pub fn mean_hamming(&self) -> f64 {
        let k = self.replicates.len() as f64;
        self.replicates
            .iter()
            .map(|r| r.hamming as f64)
            .sum::<f64>()
            / k
    }
}

/// Simulate and learn replicate `r`; data come from stream `r` of `seed`.
pub fn run_replicate(
    scenario: &Scenario,
    truth: &UndirectedGraph,
    seed: u64,
    replicate: usize,
) -> Result<ReplicateResult> {
    let mut rng = stream_rng(seed, replicate as u64);
    let data = simulate_counts(
        truth,
        scenario.n,
        scenario.lambda_true,
        scenario.lambda_noise,
        &mut rng,
    )?;
    let mut options = scenario.skeleton.clone();
    options.family = scenario.family.resolve(data.max_value())?;
    let result = learn_skeleton(&data, &options)?;
    let c = confusion(truth, &result.graph)?;
    Ok(ReplicateResult {
        replicate,
        confusion: c,
        hamming: c.fp + c.fn_,
        tests_performed: result.tests_performed,
    })
}

/// Run `replicates` replicates, in parallel on the current rayon pool. The
/// result does not depend on the number of worker threads.
pub fn run_scenario(scenario: &Scenario, replicates: usize, seed: u64) -> Result<ScenarioResult> {
    if replicates == 0 {
        return Err(Error::usage("at least one replicate is required"));
    }
    let truth = scenario.truth(seed)?;
    let results: Vec<ReplicateResult> = (0..replicates)
        .into_par_iter()
        .map(|r| run_replicate(scenario, &truth, seed, r))
        .collect::<Result<_>>()?;
    let confusions: Vec<Confusion> = results.iter().map(|r| r.confusion).collect();
    Ok(ScenarioResult {
        scenario: scenario.clone(),
        truth_edges: truth.edges(),
        summary: aggregate(&confusions)?,
        replicates: results,
    })
}

pub const CSV_HEADER: &str = "topology,p,n,lambda_noise,replicates,tp_mean,tp_sd,fp_mean,fp_sd,\
fn_mean,fn_sd,ppv_mean,ppv_sd,ppv_excluded,se_mean,se_sd,se_excluded";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

/// One CSV row (no trailing newline).
pub fn csv_row(result: &ScenarioResult) -> String {
    let s = &result.summary;
    let sc = &result.scenario;
    format!(
        "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{},{},{}",
        sc.topology.name(),
        sc.topology.p,
        sc.n,
        sc.lambda_noise,
        s.replicates,
        s.tp.mean,
        s.tp.sd,
        s.fp.mean,
        s.fp.sd,
        s.fn_.mean,
        s.fn_.sd,
        fmt_opt(s.ppv.map(|m| m.mean)),
        fmt_opt(s.ppv.map(|m| m.sd)),
        s.ppv_excluded,
        fmt_opt(s.se.map(|m| m.mean)),
        fmt_opt(s.se.map(|m| m.sd)),
        s.se_excluded,
    )
}

pub fn write_csv<W: Write>(results: &[ScenarioResult], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in results {
        writeln!(w, "{}", csv_row(r))?;
    }
    Ok(())
}
