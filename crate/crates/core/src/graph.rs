//! Undirected simple graphs on `{0, ..., p-1}` and the edge-list file format
//! (`u<TAB>v` per line, `u < v`, sorted).

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    p: usize,
    adj: Vec<BTreeSet<usize>>,
}

impl UndirectedGraph {
    pub fn empty(p: usize) -> Self {
        UndirectedGraph {
            p,
            adj: vec![BTreeSet::new(); p],
        }
    }

    pub fn complete(p: usize) -> Self {
        let adj = (0..p)
            .map(|s| (0..p).filter(|&t| t != s).collect())
            .collect();
        UndirectedGraph { p, adj }
    }

    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = UndirectedGraph::empty(p);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<()> {
        if u == v {
            return Err(Error::usage(format!("self-loop at vertex {u}")));
        }
        if u >= self.p || v >= self.p {
            return Err(Error::usage(format!(
                "edge ({u}, {v}) out of range for {} vertices",
                self.p
            )));
        }
        self.adj[u].insert(v);
        self.adj[v].insert(u);
        Ok(())
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        if u >= self.p || v >= self.p {
            return false;
        }
        let removed = self.adj[u].remove(&v);
        self.adj[v].remove(&u);
        removed
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.p && self.adj[u].contains(&v)
    }

    pub fn neighbors(&self, s: usize) -> &BTreeSet<usize> {
        &self.adj[s]
    }

    pub fn degree(&self, s: usize) -> usize {
        self.adj[s].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.range(u + 1..).map(move |&v| (u, v)))
            .collect()
    }

    /// Relabel vertex `k` as `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.p {
            return Err(Error::usage(
                "permutation length does not match vertex count",
            ));
        }
        let mut g = UndirectedGraph::empty(self.p);
        for (u, v) in self.edges() {
            g.add_edge(perm[u], perm[v])?;
        }
        Ok(g)
    }

    /// Number of unordered pairs on which the two graphs disagree.
    pub fn hamming(&self, other: &UndirectedGraph) -> Result<usize> {
        if self.p != other.p {
            return Err(Error::usage(format!(
                "graphs have {} and {} vertices",
                self.p, other.p
            )));
        }
        Ok(self
            .adj
            .iter()
            .zip(&other.adj)
            .map(|(a, b)| a.symmetric_difference(b).count())
            .sum::<usize>()
            / 2)
    }

    pub fn write_edges<W: Write>(&self, mut w: W) -> Result<()> {
        for (u, v) in self.edges() {
            writeln!(w, "{u}\t{v}")?;
        }
        Ok(())
    }
}

/// Parse an edge list. Lines may list either orientation; duplicates collapse.
pub fn read_edges<R: BufRead>(reader: R) -> Result<Vec<(usize, usize)>> {
    let mut out = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::format(
                lineno,
                "expected two tab-separated vertex indices",
            ));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::format(lineno, format!("'{s}' is not a vertex index")))
        };
        let (u, v) = (parse(fields[0])?, parse(fields[1])?);
        if u == v {
            return Err(Error::format(lineno, "self-loop"));
        }
        out.insert((u.min(v), u.max(v)));
    }
    Ok(out.into_iter().collect())
}
