//! Benchmark graphs and count data from the shared-latent Poisson model.
//!
//! Each node `j` and each edge `e` owns an independent `Pois(lambda_true)`
//! latent; `X_j` is the node latent plus the latents of the edges incident to
//! `j` plus `Pois(lambda_noise)` noise. Adjacent nodes share exactly one
//! latent, non-adjacent nodes share none.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::matrix::{default_names, CountMatrix};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Topology {
    /// Preferential attachment, one edge per arriving node, attachment weight
    /// `degree^power`.
    ScaleFree {
        power: f64,
    },
    Hub {
        n_hubs: usize,
    },
    Random {
        edge_prob: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    #[serde(flatten)]
    pub kind: Topology,
    pub p: usize,
}

impl TopologySpec {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::usage("a topology needs at least two vertices"));
        }
        match self.kind {
            Topology::ScaleFree { power } if !power.is_finite() || power < 0.0 => Err(
                Error::usage("scale-free power must be finite and nonnegative"),
            ),
            Topology::Hub { n_hubs } if n_hubs == 0 || n_hubs > self.p => Err(Error::usage(
                format!("hub count must lie in 1..={}", self.p),
            )),
            Topology::Random { edge_prob } if !(edge_prob > 0.0 && edge_prob <= 1.0) => {
                Err(Error::usage("edge probability must lie in (0, 1]"))
            }
            _ => Ok(()),
        }
    }

    /// Short stable label, e.g. `hub(p=10,hubs=2)`.
    pub fn label(&self) -> String {
        match self.kind {
            Topology::ScaleFree { power } => format!("scale-free(p={},power={power})", self.p),
            Topology::Hub { n_hubs } => format!("hub(p={},hubs={n_hubs})", self.p),
            Topology::Random { edge_prob } => format!("random(p={},prob={edge_prob})", self.p),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            Topology::ScaleFree { .. } => "scale-free",
            Topology::Hub { .. } => "hub",
            Topology::Random { .. } => "random",
        }
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<UndirectedGraph> {
        self.validate()?;
        Ok(match self.kind {
            Topology::ScaleFree { power } => gen_scale_free(self.p, power, rng),
            Topology::Hub { n_hubs } => gen_hub(self.p, n_hubs, rng),
            Topology::Random { edge_prob } => gen_random(self.p, edge_prob, rng),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub topology: TopologySpec,
    pub n: usize,
    pub lambda_true: f64,
    pub lambda_noise: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        if self.n == 0 {
            return Err(Error::usage("sample size must be at least 1"));
        }
        if !(self.lambda_true > 0.0 && self.lambda_true.is_finite())
            || !(self.lambda_noise > 0.0 && self.lambda_noise.is_finite())
        {
            return Err(Error::usage("Poisson rates must be positive and finite"));
        }
        Ok(())
    }
}

pub fn gen_scale_free<R: Rng + ?Sized>(p: usize, power: f64, rng: &mut R) -> UndirectedGraph {
    let mut g = UndirectedGraph::empty(p);
    if p < 2 {
        return g;
    }
    g.add_edge(0, 1).expect("valid edge");
    let mut weights = Vec::with_capacity(p);
    for new in 2..p {
        weights.clear();
        weights.extend((0..new).map(|j| (g.degree(j) as f64).powf(power)));
        let total: f64 = weights.iter().sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut target = new - 1;
        for (j, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                target = j;
                break;
            }
        }
        g.add_edge(new, target).expect("valid edge");
    }
    g
}

/// Every non-hub node is attached to one hub, round-robin over a random
/// permutation of the vertices.
pub fn gen_hub<R: Rng + ?Sized>(p: usize, n_hubs: usize, rng: &mut R) -> UndirectedGraph {
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let mut g = UndirectedGraph::empty(p);
    let (hubs, rest) = order.split_at(n_hubs.min(p));
    if hubs.is_empty() {
        return g;
    }
    for (k, &v) in rest.iter().enumerate() {
        g.add_edge(hubs[k % hubs.len()], v).expect("valid edge");
    }
    g
}

pub fn gen_random<R: Rng + ?Sized>(p: usize, edge_prob: f64, rng: &mut R) -> UndirectedGraph {
    let mut g = UndirectedGraph::empty(p);
    for u in 0..p {
        for v in u + 1..p {
            if rng.random::<f64>() < edge_prob {
                g.add_edge(u, v).expect("valid edge");
            }
        }
    }
    g
}

/// Draw `n` rows. Per row the draw order is: node latents `0..p`, edge latents
/// in canonical edge order, noise `0..p`.
pub fn simulate_counts<R: Rng + ?Sized>(
    graph: &UndirectedGraph,
    n: usize,
    lambda_true: f64,
    lambda_noise: f64,
    rng: &mut R,
) -> Result<CountMatrix> {
    let latent = Poisson::new(lambda_true)
        .map_err(|e| Error::usage(format!("bad lambda_true {lambda_true}: {e}")))?;
    let noise = Poisson::new(lambda_noise)
        .map_err(|e| Error::usage(format!("bad lambda_noise {lambda_noise}: {e}")))?;
    let p = graph.p();
    let edges = graph.edges();
    let mut columns = vec![Vec::with_capacity(n); p];
    let mut row = vec![0u32; p];
    for _ in 0..n {
        for v in row.iter_mut() {
            *v = latent.sample(rng) as u32;
        }
        for &(a, b) in &edges {
            let y = latent.sample(rng) as u32;
            row[a] += y;
            row[b] += y;
        }
        for (v, col) in row.iter_mut().zip(columns.iter_mut()) {
            *v += noise.sample(rng) as u32;
            col.push(*v);
        }
    }
    CountMatrix::from_columns(default_names(p), columns)
}

/// Truth graph from stream 0 and data from stream 1 of `config.seed`.
pub fn simulate(config: &SimConfig) -> Result<(UndirectedGraph, CountMatrix)> {
    config.validate()?;
    let graph = config.topology.generate(&mut stream_rng(config.seed, 0))?;
    let counts = simulate_counts(
        &graph,
        config.n,
        config.lambda_true,
        config.lambda_noise,
        &mut stream_rng(config.seed, 1),
    )?;
    Ok((graph, counts))
}
