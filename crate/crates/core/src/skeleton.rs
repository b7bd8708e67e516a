//! Order-independent PC skeleton search driven by node-conditional Wald tests.
//!
//! Starting from the complete graph, level `l` freezes every node's adjacency
//! set, then visits ordered adjacent pairs `(s, t)` in ascending index order.
//! For each size-`l` subset `S` of the frozen `adj(s) \ {t}` the coefficient
//! of `t` in the model of `s` given `S ∪ {t}` is tested; the first
//! non-rejection deletes the edge from the live graph. Because candidate sets
//! come from the frozen snapshot, the final edge set does not depend on the
//! visiting order.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::count_model::CountFamily;
use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::local_glm::{fit, DesignView, FitOptions};
use crate::matrix::CountMatrix;
use crate::wald::{wald_statistic, Alpha, Degeneracy, TestOutcome, WaldStatistic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    #[default]
    Sequential,
    /// Evaluate every test of a level concurrently against the frozen
    /// snapshot, then replay the sequential deletion order.
    LevelParallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonOptions {
    pub alpha: f64,
    /// Largest conditioning-set size `m`; `None` means `p - 2`.
    pub max_cond_size: Option<usize>,
    pub family: CountFamily,
    pub include_intercept: bool,
    pub execution: Execution,
    pub wald_literal: bool,
    pub fit: FitOptions,
}

impl Default for SkeletonOptions {
    fn default() -> Self {
        SkeletonOptions {
            alpha: 0.01,
            max_cond_size: None,
            family: CountFamily::Poisson,
            include_intercept: true,
            execution: Execution::Sequential,
            wald_literal: false,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonResult {
    pub graph: UndirectedGraph,
    /// Tests in `(level, response, tested, S)` order.
    pub trace: Vec<TestOutcome>,
    pub tests_performed: usize,
    pub levels_completed: usize,
    pub warnings: Vec<String>,
}

/// Size-`l` subsets of `adj(s) \ {t}` from the snapshot, in lexicographic order.
pub fn enumerate_cond_sets(
    snapshot: &[BTreeSet<usize>],
    s: usize,
    t: usize,
    l: usize,
) -> Combinations {
    let pool: Vec<usize> = snapshot[s].iter().copied().filter(|&v| v != t).collect();
    Combinations::new(pool, l)
}

/// Lexicographic `k`-subsets of a sorted pool.
#[derive(Debug, Clone)]
pub struct Combinations {
    pool: Vec<usize>,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(pool: Vec<usize>, k: usize) -> Self {
        let done = k > pool.len();
        Combinations {
            idx: (0..k).collect(),
            pool,
            done,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.iter().map(|&i| self.pool[i]).collect();
        let k = self.idx.len();
        let n = self.pool.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

fn validate(data: &CountMatrix, options: &SkeletonOptions) -> Result<Alpha> {
    let alpha = Alpha::new(options.alpha)?;
    options.family.validate()?;
    options.fit.validate()?;
    if data.ncols() < 2 {
        return Err(Error::usage("the search needs at least two columns"));
    }
    if data.nrows() == 0 {
        return Err(Error::usage("the data has no rows"));
    }
    if let Some(r) = options.family.max_count() {
        for j in 0..data.ncols() {
            if let Some(i) = data.column(j).iter().position(|&v| v > r) {
                return Err(Error::Data {
                    row: i,
                    col: j,
                    msg: format!("count {} exceeds truncation point R = {r}", data.get(i, j)),
                });
            }
        }
    }
    Ok(alpha)
}

fn run_test(
    data: &CountMatrix,
    s: usize,
    t: usize,
    cond: &[usize],
    options: &SkeletonOptions,
    alpha: Alpha,
) -> Result<TestOutcome> {
    let mut predictors = Vec::with_capacity(cond.len() + 1);
    predictors.push(t);
    predictors.extend_from_slice(cond);
    let design = DesignView::new(
        data,
        s,
        &predictors,
        options.family,
        options.include_intercept,
    );
    let stat = match fit(&design, &options.fit) {
        Ok(f) => wald_statistic(&f, 0, options.wald_literal)?,
        Err(Error::Optimization(_)) => WaldStatistic::Degenerate(Degeneracy::FitFailed),
        Err(e) => return Err(e),
    };
    Ok(TestOutcome::from_statistic(
        cond.len(),
        s,
        t,
        cond.to_vec(),
        stat,
        alpha,
    ))
}

/// Test `H0`: the coefficient of `t` is zero in the model of `s` given `S ∪ {t}`.
pub fn test_ordered_pair(
    data: &CountMatrix,
    s: usize,
    t: usize,
    cond: &[usize],
    options: &SkeletonOptions,
) -> Result<TestOutcome> {
    let alpha = validate(data, options)?;
    let p = data.ncols();
    if s >= p || t >= p {
        return Err(Error::usage(format!("nodes ({s}, {t}) out of range")));
    }
    if s == t {
        return Err(Error::usage("response and tested node coincide"));
    }
    if cond.contains(&s) || cond.contains(&t) {
        return Err(Error::usage(
            "conditioning set contains an endpoint of the tested pair",
        ));
    }
    run_test(data, s, t, cond, options, alpha)
}

/// Ordered pairs eligible at level `l`, with their candidate pools.
fn level_pairs(
    graph: &UndirectedGraph,
    snapshot: &[BTreeSet<usize>],
    l: usize,
) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (s, ns) in snapshot.iter().enumerate() {
        for &t in ns {
            if graph.has_edge(s, t) && ns.len() > l {
                pairs.push((s, t));
            }
        }
    }
    pairs
}

/// Run the full search.
pub fn learn_skeleton(data: &CountMatrix, options: &SkeletonOptions) -> Result<SkeletonResult> {
    let alpha = validate(data, options)?;
    let p = data.ncols();
    let mut warnings = Vec::new();
    if data.nrows() < 3 * p {
        warnings.push(format!(
            "only {} observations for {p} variables; local fits may be unstable",
            data.nrows()
        ));
    }
    let max_level = options.max_cond_size.unwrap_or(p - 2);
    let mut graph = UndirectedGraph::complete(p);
    let mut trace = Vec::new();
    let mut levels_completed = 0;
    let mut l = 0;

    loop {
        let snapshot: Vec<BTreeSet<usize>> = (0..p).map(|s| graph.neighbors(s).clone()).collect();
        let pairs = level_pairs(&graph, &snapshot, l);
        if pairs.is_empty() {
            break;
        }
        match options.execution {
            Execution::Sequential => {
                for (s, t) in pairs {
                    if !graph.has_edge(s, t) {
                        continue;
                    }
                    for cond in enumerate_cond_sets(&snapshot, s, t, l) {
                        let outcome = run_test(data, s, t, &cond, options, alpha)?;
                        let keep = outcome.rejected;
                        trace.push(outcome);
                        if !keep {
                            graph.remove_edge(s, t);
                            break;
                        }
                    }
                }
            }
            Execution::LevelParallel => {
                let tasks: Vec<(usize, usize, Vec<usize>)> = pairs
                    .iter()
                    .flat_map(|&(s, t)| {
                        enumerate_cond_sets(&snapshot, s, t, l).map(move |c| (s, t, c))
                    })
                    .collect();
                let outcomes: Vec<TestOutcome> = tasks
                    .par_iter()
                    .map(|(s, t, c)| run_test(data, *s, *t, c, options, alpha))
                    .collect::<Result<_>>()?;
                // replay in canonical order so trace and deletions match the
                // sequential schedule exactly
                let mut cursor = 0;
                for (s, t) in pairs {
                    let count = outcomes[cursor..]
                        .iter()
                        .take_while(|o| o.s == s && o.t == t)
                        .count();
                    let group = &outcomes[cursor..cursor + count];
                    cursor += count;
                    if !graph.has_edge(s, t) {
                        continue;
                    }
                    for o in group {
                        trace.push(o.clone());
                        if !o.rejected {
                            graph.remove_edge(s, t);
                            break;
                        }
                    }
                }
            }
        }
        levels_completed += 1;
        if l >= max_level {
            break;
        }
        l += 1;
    }

    let degenerate = trace.iter().filter(|o| o.degenerate).count();
    if degenerate > 0 {
        warnings.push(format!(
            "{degenerate} degenerate tests treated as not rejected"
        ));
    }
    Ok(SkeletonResult {
        graph,
        tests_performed: trace.len(),
        trace,
        levels_completed,
        warnings,
    })
}
