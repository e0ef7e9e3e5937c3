//! Cosine-threshold similarity graph in compressed sparse row form, plus
//! breadth-first distance queries.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingSet, Window};
use crate::error::{Error, Result};

const ROW_BLOCK: usize = 64;
const COL_TILE: usize = 512;

/// Undirected, unweighted graph. Neighbor lists are sorted, duplicate-free,
/// symmetric and never contain the node itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    windows: Vec<Window>,
    ids: Vec<String>,
}

impl SimilarityGraph {
    /// Builds a graph from an arbitrary undirected edge list. Duplicates and
    /// either orientation are accepted; self-loops are dropped.
    pub fn from_edges(
        edges: &[(usize, usize)],
        windows: Vec<Window>,
        ids: Vec<String>,
    ) -> Result<Self> {
        let n = windows.len();
        if ids.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: ids.len(),
            });
        }
        let mut upper: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(a, b) in edges {
            let node = a.max(b);
            if node >= n {
                return Err(Error::NodeOutOfRange { node, n });
            }
            if a != b {
                upper[a.min(b)].push(node as u32);
            }
        }
        for list in &mut upper {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self::from_upper(upper, windows, ids))
    }

    /// Graph with `n` nodes, all in `window`, ids "0".."n-1".
    pub fn unlabeled(n: usize, edges: &[(usize, usize)], window: Window) -> Result<Self> {
        Self::from_edges(
            edges,
            vec![window; n],
            (0..n).map(|i| i.to_string()).collect(),
        )
    }

    /// `upper[i]` holds the neighbors `j > i` of `i`, ascending.
    fn from_upper(upper: Vec<Vec<u32>>, windows: Vec<Window>, ids: Vec<String>) -> Self {
        let n = upper.len();
        let mut lower_count = vec![0usize; n];
        for list in &upper {
            for &j in list {
                lower_count[j as usize] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + lower_count[i] + upper[i].len());
        }
        let mut targets = vec![0u32; offsets[n]];
        let mut cursor: Vec<usize> = offsets[..n].to_vec();
        for (i, list) in upper.iter().enumerate() {
            for &j in list {
                let j = j as usize;
                targets[cursor[j]] = i as u32;
                cursor[j] += 1;
            }
            let start = offsets[i] + lower_count[i];
            targets[start..start + list.len()].copy_from_slice(list);
        }
        SimilarityGraph {
            offsets,
            targets,
            windows,
            ids,
        }
    }

    pub fn n(&self) -> usize {
        self.windows.len()
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn window(&self, i: usize) -> Window {
        self.windows[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    /// Each undirected edge once, as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n()).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .map(|&j| j as usize)
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// degree -> number of nodes with that degree.
    pub fn degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for i in 0..self.n() {
            *h.entry(self.degree(i)).or_insert(0) += 1;
        }
        h
    }

    pub fn dump(&self) -> GraphDump {
        GraphDump {
            n: self.n(),
            edges: self.edges().map(|(i, j)| [i, j]).collect(),
        }
    }
}

/// Debug dump; not a stable format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDump {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four lanes so the compiler can vectorise; the order is fixed, so the
    // result is reproducible
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let o = 4 * k;
        acc[0] += a[o] * b[o];
        acc[1] += a[o + 1] * b[o + 1];
        acc[2] += a[o + 2] * b[o + 2];
        acc[3] += a[o + 3] * b[o + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// `u . v / (|u| |v|)`, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Connects every pair with cosine similarity `>= alpha`.
///
/// Rows are normalised once; zero rows become isolated nodes. Work is split
/// into row blocks processed in parallel, each scanning column tiles of the
/// upper triangle.
pub fn build(set: &EmbeddingSet, alpha: f64) -> Result<SimilarityGraph> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let n = set.len();
    let d = set.dim();
    let mut unit = vec![0.0f64; n * d];
    let mut valid = vec![false; n];
    for i in 0..n {
        let row = set.row(i);
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            valid[i] = true;
            for (dst, x) in unit[i * d..(i + 1) * d].iter_mut().zip(row.iter()) {
                *dst = x / norm;
            }
        }
    }

    let blocks: Vec<Vec<Vec<u32>>> = (0..n.div_ceil(ROW_BLOCK))
        .into_par_iter()
        .map(|b| {
            let lo = b * ROW_BLOCK;
            let hi = (lo + ROW_BLOCK).min(n);
            let mut lists: Vec<Vec<u32>> = vec![Vec::new(); hi - lo];
            let mut tile = lo + 1;
            while tile < n {
                let tile_end = (tile + COL_TILE).min(n);
                for i in lo..hi {
                    if !valid[i] {
                        continue;
                    }
                    let ui = &unit[i * d..(i + 1) * d];
                    let out = &mut lists[i - lo];
                    for j in tile.max(i + 1)..tile_end {
                        if valid[j] && dot(ui, &unit[j * d..(j + 1) * d]).min(1.0) >= alpha {
                            out.push(j as u32);
                        }
                    }
                }
                tile = tile_end;
            }
            lists
        })
        .collect();
    let upper: Vec<Vec<u32>> = blocks.into_iter().flatten().collect();
    Ok(SimilarityGraph::from_upper(
        upper,
        set.windows().to_vec(),
        set.ids().to_vec(),
    ))
}

/// Reusable breadth-first search state. `run` never allocates once the
/// internal buffers have grown to the graph size.
#[derive(Debug, Clone)]
pub struct Bfs {
    mark: Vec<u32>,
    epoch: u32,
    dist: Vec<u32>,
    queue: Vec<u32>,
}

impl Bfs {
    pub fn new(n: usize) -> Self {
        Bfs {
            mark: vec![0; n],
            epoch: 0,
            dist: vec![0; n],
            queue: Vec::with_capacity(n),
        }
    }

    /// Multi-source BFS. Returns visited nodes in non-decreasing distance
    /// order, sources first.
    pub fn run(
        &mut self,
        g: &SimilarityGraph,
        sources: &[usize],
        max_depth: Option<u32>,
    ) -> &[u32] {
        let n = g.n();
        if self.mark.len() < n {
            self.mark.resize(n, 0);
            self.dist.resize(n, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        let epoch = self.epoch;
        self.queue.clear();
        for &s in sources {
            if self.mark[s] != epoch {
                self.mark[s] = epoch;
                self.dist[s] = 0;
                self.queue.push(s as u32);
            }
        }
        let limit = max_depth.unwrap_or(u32::MAX);
        let mut head = 0;
        while head < self.queue.len() {
            let u = self.queue[head] as usize;
            head += 1;
            let du = self.dist[u];
            if du >= limit {
                continue;
            }
            for &v in g.neighbors(u) {
                let v = v as usize;
                if self.mark[v] != epoch {
                    self.mark[v] = epoch;
                    self.dist[v] = du + 1;
                    self.queue.push(v as u32);
                }
            }
        }
        &self.queue
    }

    /// Distance from the last run's sources, if reached.
    pub fn distance(&self, node: usize) -> Option<u32> {
        (self.mark.get(node) == Some(&self.epoch)).then(|| self.dist[node])
    }

    /// Nodes reached by the last run, in visiting order.
    pub fn visited(&self) -> &[u32] {
        &self.queue
    }
}

/// Unweighted shortest-path distances from `source`, truncated at
/// `max_depth`; unreachable nodes are absent.
pub fn bfs_distances(
    g: &SimilarityGraph,
    source: usize,
    max_depth: Option<u32>,
) -> Result<BTreeMap<usize, u32>> {
    if source >= g.n() {
        return Err(Error::NodeOutOfRange {
            node: source,
            n: g.n(),
        });
    }
    let mut bfs = Bfs::new(g.n());
    bfs.run(g, &[source], max_depth);
    Ok(bfs
        .visited()
        .iter()
        .map(|&v| (v as usize, bfs.distance(v as usize).unwrap()))
        .collect())
}

pub fn edge_count(g: &SimilarityGraph) -> usize {
    g.edge_count()
}
