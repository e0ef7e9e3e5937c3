//! Decay centrality and its split by time window.
//!
//! For node `i`, every other node `j` at graph distance `d` contributes
//! `beta^(d-1) / n`. The matched part keeps contributions from nodes in the
//! same window as `i`, the mismatched part those from the other window.
//! Paths may cross windows freely; only the endpoint labels matter.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::simgraph::{Bfs, SimilarityGraph};

/// Largest graph the all-pairs oracle accepts.
pub const ORACLE_MAX_NODES: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct CentralityTable {
    pub c: Vec<f64>,
    pub c_plus: Vec<f64>,
    pub c_minus: Vec<f64>,
    pub beta: f64,
    pub max_depth: Option<u32>,
}

impl CentralityTable {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// CSV with header `id,window,c,c_plus,c_minus`.
    pub fn to_csv(&self, g: &SimilarityGraph) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io_err = |e: csv::Error| Error::io("<csv>", e.into());
        w.write_record(["id", "window", "c", "c_plus", "c_minus"])
            .map_err(io_err)?;
        for i in 0..self.len() {
            w.write_record([
                g.id(i),
                g.window(i).as_str(),
                &self.c[i].to_string(),
                &self.c_plus[i].to_string(),
                &self.c_minus[i].to_string(),
            ])
            .map_err(io_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::io("<csv>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::BadBeta(beta))
    }
}

/// Per-level sums of matched/mismatched contributions from one source.
fn node_sums(
    g: &SimilarityGraph,
    bfs: &mut Bfs,
    i: usize,
    beta: f64,
    max_depth: Option<u32>,
) -> (f64, f64) {
    let wi = g.window(i);
    bfs.run(g, &[i], max_depth);
    let mut plus = 0.0;
    let mut minus = 0.0;
    let mut level = 1u32;
    let (mut same, mut diff) = (0u64, 0u64);
    for &v in &bfs.visited()[1..] {
        let v = v as usize;
        let d = bfs.distance(v).expect("visited");
        if d != level {
            let w = beta.powi(level as i32 - 1);
            plus += same as f64 * w;
            minus += diff as f64 * w;
            same = 0;
            diff = 0;
            level = d;
        }
        if g.window(v) == wi {
            same += 1;
        } else {
            diff += 1;
        }
    }
    let w = beta.powi(level as i32 - 1);
    plus += same as f64 * w;
    minus += diff as f64 * w;
    (plus, minus)
}

fn all_sums(g: &SimilarityGraph, beta: f64, max_depth: Option<u32>) -> Vec<(f64, f64)> {
    let n = g.n();
    (0..n)
        .into_par_iter()
        .with_min_len(64)
        .map_init(
            || Bfs::new(n),
            |bfs, i| node_sums(g, bfs, i, beta, max_depth),
        )
        .collect()
}

/// Decay centrality of every node; unreachable pairs contribute nothing.
pub fn decay_centrality(
    g: &SimilarityGraph,
    beta: f64,
    max_depth: Option<u32>,
) -> Result<Vec<f64>> {
    check_beta(beta)?;
    let n = g.n() as f64;
    Ok(all_sums(g, beta, max_depth)
        .into_iter()
        .map(|(p, m)| (p + m) / n)
        .collect())
}

/// Decay centrality with its matched (`c_plus`) and mismatched (`c_minus`)
/// parts; `c` is their sum.
pub fn split_centrality(
    g: &SimilarityGraph,
    beta: f64,
    max_depth: Option<u32>,
) -> Result<CentralityTable> {
    check_beta(beta)?;
    let n = g.n() as f64;
    let sums = all_sums(g, beta, max_depth);
    let c_plus: Vec<f64> = sums.iter().map(|(p, _)| p / n).collect();
    let c_minus: Vec<f64> = sums.iter().map(|(_, m)| m / n).collect();
    let c = c_plus.iter().zip(&c_minus).map(|(p, m)| p + m).collect();
    Ok(CentralityTable {
        c,
        c_plus,
        c_minus,
        beta,
        max_depth,
    })
}

/// Reference implementation: Floyd-Warshall all-pairs distances, then the
/// defining sums term by term. O(n^3); test use only.
pub fn brute_force_split(g: &SimilarityGraph, beta: f64) -> Result<CentralityTable> {
    check_beta(beta)?;
    let n = g.n();
    if n > ORACLE_MAX_NODES {
        return Err(Error::GraphTooLarge(n));
    }
    const INF: u32 = u32::MAX;
    let mut dist = vec![INF; n * n];
    for i in 0..n {
        dist[i * n + i] = 0;
        for &j in g.neighbors(i) {
            dist[i * n + j as usize] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            let dik = dist[i * n + k];
            if dik == INF {
                continue;
            }
            for j in 0..n {
                let dkj = dist[k * n + j];
                if dkj != INF && dik + dkj < dist[i * n + j] {
                    dist[i * n + j] = dik + dkj;
                }
            }
        }
    }
    let size = n as f64;
    let mut c = vec![0.0; n];
    let mut c_plus = vec![0.0; n];
    let mut c_minus = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let d = dist[i * n + j];
            if j == i || d == INF {
                continue;
            }
            let term = beta.powi(d as i32 - 1) / size;
            c[i] += term;
            if g.window(i) == g.window(j) {
                c_plus[i] += term;
            } else {
                c_minus[i] += term;
            }
        }
    }
    Ok(CentralityTable {
        c,
        c_plus,
        c_minus,
        beta,
        max_depth: None,
    })
}
