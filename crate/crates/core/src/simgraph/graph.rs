use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected admission graph in CSR form. Every node carries a self-loop;
/// each undirected edge is stored in both directions; neighbor lists are
/// sorted and free of duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub(crate) offsets: Vec<usize>,
    pub(crate) indices: Vec<u32>,
    pub(crate) tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n_nodes: usize,
    /// Directed adjacency entries, self-loops included.
    pub edge_count: usize,
    /// `edge_count / n_nodes`.
    pub average_degree: f64,
}

impl SimilarityGraph {
    /// Builds a graph from undirected pairs; adds self-loops and the reverse
    /// direction of every pair, and drops duplicates.
    pub fn from_edges(n_nodes: usize, edges: &[(u32, u32)], tau: f64) -> Result<Self> {
        if n_nodes > u32::MAX as usize {
            return Err(Error::config("n_nodes", "graph too large for 32-bit node ids"));
        }
        let mut degree = vec![1usize; n_nodes];
        for &(i, j) in edges {
            let (i, j) = (i as usize, j as usize);
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::Integrity(format!(
                    "edge ({i}, {j}) out of range for {n_nodes} nodes"
                )));
            }
            if i != j {
                degree[i] += 1;
                degree[j] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(n_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor: Vec<usize> = offsets[..n_nodes].to_vec();
        let mut indices = vec![0u32; offsets[n_nodes]];
        for (i, c) in cursor.iter_mut().enumerate() {
            indices[*c] = i as u32;
            *c += 1;
        }
        for &(i, j) in edges {
            if i == j {
                continue;
            }
            indices[cursor[i as usize]] = j;
            cursor[i as usize] += 1;
            indices[cursor[j as usize]] = i;
            cursor[j as usize] += 1;
        }
        // sort and dedup every row, then compact
        let mut compact = Vec::with_capacity(indices.len());
        let mut new_offsets = Vec::with_capacity(n_nodes + 1);
        new_offsets.push(0);
        for i in 0..n_nodes {
            let row = &mut indices[offsets[i]..offsets[i + 1]];
            row.sort_unstable();
            let start = compact.len();
            for &v in row.iter() {
                if compact.len() == start || *compact.last().unwrap() != v {
                    compact.push(v);
                }
            }
            new_offsets.push(compact.len());
        }
        Ok(SimilarityGraph {
            offsets: new_offsets,
            indices: compact,
            tau,
        })
    }

    /// Graph with self-loops only.
    pub fn self_loops(n_nodes: usize) -> Self {
        SimilarityGraph {
            offsets: (0..=n_nodes).collect(),
            indices: (0..n_nodes as u32).collect(),
            tau: 1.0,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Directed adjacency entries including self-loops.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&(j as u32)).is_ok()
    }

    /// Undirected non-self pairs `(i, j)` with `i < j`, in order.
    pub fn edge_pairs(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for i in 0..self.n_nodes() {
            for &j in self.neighbors(i) {
                if (j as usize) > i {
                    out.push((i as u32, j));
                }
            }
        }
        out
    }

    /// Checks symmetry, self-loops, ordering and uniqueness.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n_nodes();
        if self.offsets.first() != Some(&0) || self.offsets.last() != Some(&self.indices.len()) {
            return Err(Error::Integrity("row offsets do not span the index array".into()));
        }
        for i in 0..n {
            if self.offsets[i] > self.offsets[i + 1] {
                return Err(Error::Integrity(format!("row offsets decrease at node {i}")));
            }
            let row = self.neighbors(i);
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Integrity(format!("row {i} not strictly sorted")));
            }
            if !self.has_edge(i, i) {
                return Err(Error::Integrity(format!("node {i} lacks a self-loop")));
            }
            for &j in row {
                if j as usize >= n || !self.has_edge(j as usize, i) {
                    return Err(Error::Integrity(format!("edge ({i}, {j}) is not symmetric")));
                }
            }
        }
        Ok(())
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<SimilarityGraph> {
        let edges: Vec<(u32, u32)> = self
            .edge_pairs()
            .into_iter()
            .map(|(i, j)| (perm[i as usize] as u32, perm[j as usize] as u32))
            .collect();
        SimilarityGraph::from_edges(self.n_nodes(), &edges, self.tau)
    }
}

pub fn graph_stats(g: &SimilarityGraph) -> GraphStats {
    let n = g.n_nodes();
    GraphStats {
        n_nodes: n,
        edge_count: g.nnz(),
        average_degree: if n == 0 { 0.0 } else { g.nnz() as f64 / n as f64 },
    }
}
