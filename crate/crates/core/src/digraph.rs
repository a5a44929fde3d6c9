//! Directed communication graphs.
//!
//! An edge `(i, j)` means agent `i` can transmit to agent `j` (`i` is the
//! parent, `j` the child). Graphs serialize to a plain-text edge list: the
//! first line holds `n`, every following line holds one `i j` pair.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use rand::seq::index;

use crate::error::{invalid, Error, Result};
use crate::rng::{stream, Role};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Digraph {
    /// Graph on `n` nodes with no edges.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            edges: BTreeSet::new(),
        }
    }

    /// Builds a graph from an edge list, rejecting out-of-range indices and
    /// duplicate edges.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::new(n);
        for (i, j) in edges {
            if !g.insert_edge(i, j)? {
                return Err(invalid(format!("duplicate edge {i} -> {j}")));
            }
        }
        Ok(g)
    }

    /// Inserts `from -> to`; returns `false` if the edge was already present.
    pub fn insert_edge(&mut self, from: usize, to: usize) -> Result<bool> {
        if from >= self.n || to >= self.n {
            return Err(invalid(format!(
                "edge {from} -> {to} out of range for {} nodes",
                self.n
            )));
        }
        Ok(self.edges.insert((from, to)))
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn contains_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn out_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((i, 0)..(i + 1, 0)).map(|&(_, j)| j)
    }

    pub fn in_neighbors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |&&(_, t)| t == j)
            .map(|&(i, _)| i)
    }

    /// Number of other agents `i` transmits to. Self-loops are not
    /// transmissions.
    pub fn transmit_degree(&self, i: usize) -> usize {
        self.out_neighbors(i).filter(|&j| j != i).count()
    }

    pub fn reversed(&self) -> Self {
        Self {
            n: self.n,
            edges: self.edges.iter().map(|&(i, j)| (j, i)).collect(),
        }
    }

    pub fn with_self_loops(&self) -> Self {
        let mut g = self.clone();
        g.edges.extend((0..self.n).map(|i| (i, i)));
        g
    }

    /// `reach[j]` is true iff there is a directed path from `source` to `j`.
    /// A node always reaches itself.
    pub fn reachable_from(&self, source: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([source]);
        seen[source] = true;
        while let Some(i) = queue.pop_front() {
            for j in self.out_neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }

    pub fn is_strongly_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        kosaraju_scc(&self.to_petgraph()).len() == 1
    }

    /// Nodes with a directed path to every node, i.e. the roots of all
    /// spanning trees of the graph.
    pub fn root_set(&self) -> BTreeSet<usize> {
        (0..self.n)
            .filter(|&i| self.reachable_from(i).iter().all(|&r| r))
            .collect()
    }

    fn to_petgraph(&self) -> DiGraph<(), ()> {
        let mut g = DiGraph::with_capacity(self.n, self.edges.len());
        let nodes: Vec<_> = (0..self.n).map(|_| g.add_node(())).collect();
        for &(i, j) in &self.edges {
            g.add_edge(nodes[i], nodes[j], ());
        }
        g
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let n: usize = header
            .parse()
            .map_err(|_| Error::Parse(format!("line 1: expected node count, got {header:?}")))?;
        let mut g = Self::new(n);
        for (no, line) in lines {
            let mut parts = line.split_whitespace();
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("line {no}: expected `i j`, got {line:?}")));
            };
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("line {no}: bad node index {s:?}")))
            };
            let (i, j) = (parse(a)?, parse(b)?);
            if !g
                .insert_edge(i, j)
                .map_err(|e| Error::Parse(format!("line {no}: {e}")))?
            {
                return Err(Error::Parse(format!("line {no}: duplicate edge {i} -> {j}")));
            }
        }
        Ok(g)
    }
}

/// Directed ring `0 -> 1 -> ... -> n-1 -> 0` with all self-loops plus
/// `extra_edges` distinct random chords drawn from `seed`. Always strongly
/// connected.
pub fn make_ring(n: usize, extra_edges: usize, seed: u64) -> Result<Digraph> {
    if n == 0 {
        return Err(invalid("ring needs at least one node"));
    }
    let mut g = Digraph::new(n);
    for i in 0..n {
        g.insert_edge(i, i)?;
        g.insert_edge(i, (i + 1) % n)?;
    }
    // off-diagonal slots not already taken by the ring
    let free: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && !g.contains_edge(i, j))
        .collect();
    if extra_edges > free.len() {
        return Err(invalid(format!(
            "{extra_edges} extra edges requested but only {} slots are free for n = {n}",
            free.len()
        )));
    }
    let mut rng = stream(seed, 0, 0, Role::Topology);
    for idx in index::sample(&mut rng, free.len(), extra_edges) {
        let (i, j) = free[idx];
        g.insert_edge(i, j)?;
    }
    Ok(g)
}
