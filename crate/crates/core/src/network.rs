//! Communication graphs, mixing matrices and averaging consensus.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Attempts allowed for random families before giving up.
pub const MAX_GENERATION_ATTEMPTS: usize = 1000;

/// Eigenvalue magnitudes below this are reported as exactly zero.
const LAMBDA_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphFamily {
    Complete,
    KRegular {
        k: usize,
    },
    ErdosRenyi {
        p: f64,
    },
    /// Hand-built graphs (`Topology::from_edges`).
    Custom,
}

impl GraphFamily {
    /// Whether each instance draws a fresh graph.
    pub fn is_random(&self) -> bool {
        matches!(self, GraphFamily::KRegular { .. } | GraphFamily::ErdosRenyi { .. })
    }
}

/// Undirected connected graph. Self-loops are implicit and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    family: GraphFamily,
    /// Draws rejected before a valid graph was produced.
    rejected_draws: usize,
}

impl Topology {
    /// Builds a graph from an explicit edge list; rejects loops, duplicates
    /// and disconnected graphs.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let topo = Self::assemble(node_count, edges.iter().copied(), GraphFamily::Custom, 0)?;
        if !topo.is_connected() {
            return Err(Error::Generation("graph is not connected".into()));
        }
        Ok(topo)
    }

    /// The one-node network.
    pub fn single() -> Self {
        Topology { node_count: 1, edges: Vec::new(), neighbors: vec![Vec::new()], family: GraphFamily::Complete, rejected_draws: 0 }
    }

    fn assemble(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        family: GraphFamily,
        rejected_draws: usize,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Parameter(format!("self-edge at node {a}")));
            }
            if a >= node_count || b >= node_count {
                return Err(Error::Parameter(format!("edge ({a}, {b}) out of range for {node_count} nodes")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::Parameter(format!("duplicate edge ({a}, {b})")));
            }
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); node_count];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Topology { node_count, edges, neighbors, family, rejected_draws })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    pub fn family(&self) -> GraphFamily {
        self.family
    }

    pub fn rejected_draws(&self) -> usize {
        self.rejected_draws
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.node_count * (self.node_count - 1) / 2
    }

    pub fn is_connected(&self) -> bool {
        if self.node_count == 0 {
            return false;
        }
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &self.neighbors[v] {
                if !seen[u] {
                    seen[u] = true;
                    reached += 1;
                    queue.push_back(u);
                }
            }
        }
        reached == self.node_count
    }

    /// One `"i j"` pair per line.
    pub fn edge_list(&self) -> String {
        let mut out = String::new();
        for (a, b) in &self.edges {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }
}

/// Draws a connected graph of the requested family.
pub fn generate_topology(family: GraphFamily, m: usize, seed: u64) -> Result<Topology> {
    if m < 2 {
        return Err(Error::Parameter(format!("graphs need at least 2 nodes, got {m}")));
    }
    let mut rng = rng::rng_for(&[seed, rng::tags::TOPOLOGY]);
    match family {
        GraphFamily::Complete => {
            let edges = (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b)));
            Topology::assemble(m, edges, family, 0)
        }
        GraphFamily::KRegular { k } => {
            if k == 0 || k >= m || !(k * m).is_multiple_of(2) {
                return Err(Error::Parameter(format!("no {k}-regular graph on {m} nodes")));
            }
            for attempt in 0..MAX_GENERATION_ATTEMPTS {
                if let Some(edges) = pair_stubs(m, k, &mut rng) {
                    let topo = Topology::assemble(m, edges, family, attempt)?;
                    if topo.is_connected() {
                        return Ok(topo);
                    }
                }
            }
            Err(Error::Generation(format!("no connected {k}-regular graph on {m} nodes after {MAX_GENERATION_ATTEMPTS} attempts")))
        }
        GraphFamily::ErdosRenyi { p } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Parameter(format!("edge probability must be in (0, 1], got {p}")));
            }
            for attempt in 0..MAX_GENERATION_ATTEMPTS {
                let mut edges = Vec::new();
                for a in 0..m {
                    for b in a + 1..m {
                        if rng.random::<f64>() < p {
                            edges.push((a, b));
                        }
                    }
                }
                let topo = Topology::assemble(m, edges, family, attempt)?;
                if topo.is_connected() {
                    return Ok(topo);
                }
            }
            Err(Error::Generation(format!("no connected G({m}, {p}) sample after {MAX_GENERATION_ATTEMPTS} attempts")))
        }
        GraphFamily::Custom => Err(Error::Parameter("custom graphs are built with Topology::from_edges".into())),
    }
}

/// Pairing model with local rejection: stubs are matched one random pair at
/// a time, skipping pairs that would create loops or multi-edges. Returns
/// `None` when the remaining stubs cannot be completed.
fn pair_stubs<R: Rng>(m: usize, k: usize, rng: &mut R) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = (0..m).flat_map(|v| std::iter::repeat_n(v, k)).collect();
    stubs.shuffle(rng);
    let mut present = BTreeSet::new();
    let mut edges = Vec::with_capacity(m * k / 2);
    while !stubs.is_empty() {
        let mut placed = false;
        for _ in 0..(4 * stubs.len() * stubs.len()).max(16) {
            let i = rng.random_range(0..stubs.len());
            let j = rng.random_range(0..stubs.len());
            let (a, b) = (stubs[i], stubs[j]);
            if i == j || a == b || present.contains(&(a.min(b), a.max(b))) {
                continue;
            }
            present.insert((a.min(b), a.max(b)));
            edges.push((a, b));
            let (hi, lo) = (i.max(j), i.min(j));
            stubs.swap_remove(hi);
            stubs.swap_remove(lo);
            placed = true;
            break;
        }
        if !placed {
            return None;
        }
    }
    Some(edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingRule {
    /// `11^T / m`; complete graphs only.
    MeanForComplete,
    /// `w_ij = 1 / (1 + max(deg_i, deg_j))` on edges, diagonal fills rows.
    Metropolis,
}

/// Symmetric doubly-stochastic weights consistent with a topology.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    m: usize,
    dense: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    lambda2: f64,
    /// `W = 11^T / m`: every node receives the same average.
    uniform: bool,
}

impl MixingMatrix {
    pub fn build(topology: &Topology, rule: MixingRule) -> Result<Self> {
        let m = topology.node_count();
        if !topology.is_connected() {
            return Err(Error::Parameter("mixing matrix needs a connected topology".into()));
        }
        let mut dense = vec![0.0; m * m];
        match rule {
            MixingRule::MeanForComplete => {
                if !topology.is_complete() {
                    return Err(Error::RuleMismatch("mean mixing requires a complete graph".into()));
                }
                dense.iter_mut().for_each(|w| *w = 1.0 / m as f64);
            }
            MixingRule::Metropolis => {
                for &(a, b) in topology.edges() {
                    let w = 1.0 / (1.0 + topology.degree(a).max(topology.degree(b)) as f64);
                    dense[a * m + b] = w;
                    dense[b * m + a] = w;
                }
                for i in 0..m {
                    let off: f64 = topology.neighbors(i).iter().map(|&j| dense[i * m + j]).sum();
                    dense[i * m + i] = 1.0 - off;
                }
            }
        }
        let rows = (0..m).map(|i| (0..m).filter(|&j| dense[i * m + j] != 0.0).map(|j| (j, dense[i * m + j])).collect()).collect();
        let lambda2 = second_eigenvalue_magnitude(&dense, m);
        Ok(MixingMatrix { m, dense, rows, lambda2, uniform: rule == MixingRule::MeanForComplete })
    }

    /// `[[1]]` for the single-node network.
    pub fn trivial() -> Self {
        MixingMatrix { m: 1, dense: vec![1.0], rows: vec![vec![(0, 1.0)]], lambda2: 0.0, uniform: true }
    }

    pub fn node_count(&self) -> usize {
        self.m
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.dense[i * self.m + j]
    }

    /// Non-zero entries of row `i`, self weight included.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn dense(&self) -> &[f64] {
        &self.dense
    }

    /// Second-largest eigenvalue magnitude, i.e. the spectral radius of
    /// `W - 11^T/m`.
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn spectral_gap(&self) -> f64 {
        1.0 - self.lambda2
    }

    /// One averaging round: row `i` of the output is `sum_j w_ij values[j]`.
    pub fn consensus_round(&self, values: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = self.check_shape(values)?;
        let mut out = vec![vec![0.0; n]; self.m];
        self.mix_into(values, &mut out);
        Ok(out)
    }

    /// Unchecked mixing into a preallocated buffer, written as
    /// `v_i + sum_{j != i} w_ij (v_j - v_i)` so that agreeing rows stay
    /// bitwise fixed.
    pub(crate) fn mix_into(&self, values: &[Vec<f64>], out: &mut [Vec<f64>]) {
        if self.uniform {
            let w = 1.0 / self.m as f64;
            let (first, rest) = out.split_first_mut().expect("at least one node");
            first.copy_from_slice(&values[0]);
            for v in &values[1..] {
                for ((t, x), own) in first.iter_mut().zip(v).zip(&values[0]) {
                    *t += w * (x - own);
                }
            }
            rest.iter_mut().for_each(|r| r.copy_from_slice(first));
            return;
        }
        for (i, (row, target)) in self.rows.iter().zip(out.iter_mut()).enumerate() {
            target.copy_from_slice(&values[i]);
            for &(j, w) in row.iter().filter(|(j, _)| *j != i) {
                for ((t, v), own) in target.iter_mut().zip(&values[j]).zip(&values[i]) {
                    *t += w * (v - own);
                }
            }
        }
    }

    /// Applies `rounds` consensus rounds in place.
    pub(crate) fn mix_rounds(&self, values: &mut Vec<Vec<f64>>, scratch: &mut Vec<Vec<f64>>, rounds: usize) {
        for _ in 0..rounds {
            self.mix_into(values, scratch);
            std::mem::swap(values, scratch);
        }
    }

    /// Frobenius deviation from the node average before and after each of
    /// `rounds` consensus rounds (`rounds + 1` entries).
    pub fn consensus_error_decay(&self, values: &[Vec<f64>], rounds: usize) -> Result<Vec<f64>> {
        let n = self.check_shape(values)?;
        let mut current = values.to_vec();
        let mut scratch = vec![vec![0.0; n]; self.m];
        let mut out = Vec::with_capacity(rounds + 1);
        out.push(deviation_from_mean(&current));
        for _ in 0..rounds {
            self.mix_into(&current, &mut scratch);
            std::mem::swap(&mut current, &mut scratch);
            out.push(deviation_from_mean(&current));
        }
        Ok(out)
    }

    fn check_shape(&self, values: &[Vec<f64>]) -> Result<usize> {
        if values.len() != self.m {
            return Err(Error::Shape { expected: format!("{} rows", self.m), actual: format!("{} rows", values.len()) });
        }
        let n = values.first().map_or(0, Vec::len);
        if let Some(bad) = values.iter().find(|v| v.len() != n) {
            return Err(Error::Shape { expected: format!("rows of length {n}"), actual: format!("row of length {}", bad.len()) });
        }
        Ok(n)
    }
}

/// `|| V - 1 mean(V)^T ||_F`
pub fn deviation_from_mean(values: &[Vec<f64>]) -> f64 {
    let m = values.len();
    if m == 0 {
        return 0.0;
    }
    let n = values[0].len();
    let mut mean = vec![0.0; n];
    for row in values {
        for (a, v) in mean.iter_mut().zip(row) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|a| *a /= m as f64);
    values.iter().map(|row| row.iter().zip(&mean).map(|(v, a)| (v - a).powi(2)).sum::<f64>()).sum::<f64>().sqrt()
}

fn second_eigenvalue_magnitude(dense: &[f64], m: usize) -> f64 {
    let shifted = DMatrix::from_fn(m, m, |i, j| dense[i * m + j] - 1.0 / m as f64);
    let eig = SymmetricEigen::new(shifted);
    let radius = eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if radius < LAMBDA_SNAP {
        0.0
    } else {
        radius
    }
}
