//! Synthetic two-window embedding sets with known cluster membership, and
//! scoring of a report against that ground truth.
//!
//! Randomness comes from SplitMix64 (64-bit state). The master stream first
//! draws the cluster directions, then one child seed per cluster, one for the
//! noise points and one for the optional distortion, in that order.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingSet, Window};
use crate::error::{Error, Result};
use crate::radar::{RadarReport, ReportCluster};

/// Directions of distinct clusters must have cosine below this.
pub const MAX_DIRECTION_COSINE: f64 = 0.3;
/// Consecutive rejected draws before giving up on a direction.
pub const MAX_DIRECTION_TRIES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseCluster {
    pub size_previous: usize,
    pub size_current: usize,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmergingCluster {
    pub size_current: usize,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub d: usize,
    #[serde(default)]
    pub base_clusters: Vec<BaseCluster>,
    #[serde(default)]
    pub emerging_clusters: Vec<EmergingCluster>,
    /// Uniform-on-sphere points per window.
    #[serde(default)]
    pub noise_points: usize,
    #[serde(default)]
    pub seed: u64,
    /// Apply a random invertible linear map to every point afterwards.
    #[serde(default)]
    pub distort: bool,
}

impl SynthSpec {
    /// Ten stable topics, one emerging topic and background noise.
    pub fn standard(seed: u64) -> Self {
        SynthSpec {
            d: 16,
            base_clusters: vec![
                BaseCluster {
                    size_previous: 200,
                    size_current: 200,
                    spread: 0.05,
                };
                10
            ],
            emerging_clusters: vec![EmergingCluster {
                size_current: 150,
                spread: 0.05,
            }],
            noise_points: 100,
            seed,
            distort: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidConfig("d must be positive".into()));
        }
        if self.base_clusters.is_empty() && self.emerging_clusters.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one cluster is required".into(),
            ));
        }
        let spreads = self
            .base_clusters
            .iter()
            .map(|c| c.spread)
            .chain(self.emerging_clusters.iter().map(|c| c.spread));
        for s in spreads {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "spread must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn n_clusters(&self) -> usize {
        self.base_clusters.len() + self.emerging_clusters.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthKind {
    Stable,
    Emerging,
}

/// True cluster of every generated point, aligned with the set's row order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub ids: Vec<String>,
    /// `None` marks noise.
    pub assignments: Vec<Option<usize>>,
    pub kinds: Vec<TruthKind>,
    /// Current-window points per cluster.
    pub current_sizes: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Assignment {
    Cluster(usize),
    Noise(String),
}

#[derive(Serialize, Deserialize)]
struct TruthFile {
    assignments: BTreeMap<String, Assignment>,
    clusters: BTreeMap<String, TruthKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    current_sizes: Option<BTreeMap<String, usize>>,
}

impl GroundTruth {
    pub fn to_json(&self) -> String {
        let file = TruthFile {
            assignments: self
                .ids
                .iter()
                .zip(&self.assignments)
                .map(|(id, a)| {
                    let a = match a {
                        Some(c) => Assignment::Cluster(*c),
                        None => Assignment::Noise("noise".into()),
                    };
                    (id.clone(), a)
                })
                .collect(),
            clusters: self
                .kinds
                .iter()
                .enumerate()
                .map(|(c, k)| (c.to_string(), *k))
                .collect(),
            current_sizes: Some(
                self.current_sizes
                    .iter()
                    .enumerate()
                    .map(|(c, s)| (c.to_string(), *s))
                    .collect(),
            ),
        };
        serde_json::to_string_pretty(&file).expect("plain data")
    }

    /// Parses a truth sidecar. Without `current_sizes`, every assigned
    /// point counts toward its cluster's size.
    pub fn from_json(raw: &str) -> Result<Self> {
        let malformed = |reason: String| Error::MalformedRecord { line: 0, reason };
        let file: TruthFile = serde_json::from_str(raw).map_err(|e| malformed(e.to_string()))?;
        let mut kinds = Vec::with_capacity(file.clusters.len());
        let mut index = HashMap::new();
        let mut keys: Vec<(usize, TruthKind)> = file
            .clusters
            .iter()
            .map(|(k, v)| k.parse::<usize>().map(|k| (k, *v)))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| malformed(format!("cluster key: {e}")))?;
        keys.sort_by_key(|(k, _)| *k);
        for (pos, (k, kind)) in keys.into_iter().enumerate() {
            index.insert(k, pos);
            kinds.push(kind);
        }
        let mut ids = Vec::with_capacity(file.assignments.len());
        let mut assignments = Vec::with_capacity(file.assignments.len());
        let mut counts = vec![0usize; kinds.len()];
        for (id, a) in file.assignments {
            let a = match a {
                Assignment::Cluster(c) => {
                    let pos = *index.get(&c).ok_or_else(|| {
                        malformed(format!("{id} assigned to unknown cluster {c}"))
                    })?;
                    counts[pos] += 1;
                    Some(pos)
                }
                Assignment::Noise(s) if s == "noise" => None,
                Assignment::Noise(s) => return Err(malformed(format!("bad assignment {s:?}"))),
            };
            ids.push(id);
            assignments.push(a);
        }
        let current_sizes = match file.current_sizes {
            Some(sizes) => {
                let mut out = vec![0usize; kinds.len()];
                for (k, s) in sizes {
                    let k: usize = k.parse().map_err(|e| malformed(format!("size key: {e}")))?;
                    if let Some(&pos) = index.get(&k) {
                        out[pos] = s;
                    }
                }
                out
            }
            None => counts,
        };
        Ok(GroundTruth {
            ids,
            assignments,
            kinds,
            current_sizes,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GroundTruth::from_json(&raw)
    }

    fn lookup(&self) -> HashMap<&str, Option<usize>> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.assignments.iter().copied())
            .collect()
    }
}

fn gaussian(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn unit(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let mut v = gaussian(rng, d);
        if v.iter().any(|x| *x != 0.0) {
            normalize(&mut v);
            return v;
        }
    }
}

fn directions(rng: &mut SplitMix64, count: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    while out.len() < count {
        let mut placed = false;
        for _ in 0..MAX_DIRECTION_TRIES {
            let cand = unit(rng, d);
            let ok = out.iter().all(|o| {
                let c: f64 = o.iter().zip(&cand).map(|(a, b)| a * b).sum();
                c < MAX_DIRECTION_COSINE
            });
            if ok {
                out.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::RejectionExhausted(count));
        }
    }
    Ok(out)
}

fn cluster_point(rng: &mut SplitMix64, dir: &[f64], spread: f64) -> Vec<f64> {
    let mut p: Vec<f64> = dir
        .iter()
        .map(|x| x + spread * rng.sample::<f64, _>(StandardNormal))
        .collect();
    normalize(&mut p);
    p
}

/// Draws the set described by `spec`. Row order: every previous-window
/// point (stable clusters in order, then noise), then every current-window
/// point (stable clusters, emerging clusters, noise).
pub fn generate(spec: &SynthSpec) -> Result<(EmbeddingSet, GroundTruth)> {
    spec.validate()?;
    let d = spec.d;
    let k = spec.n_clusters();
    let mut master = SplitMix64::seed_from_u64(spec.seed);
    let dirs = directions(&mut master, k, d)?;
    let mut cluster_rngs: Vec<SplitMix64> = (0..k)
        .map(|_| SplitMix64::seed_from_u64(master.next_u64()))
        .collect();
    let mut noise_rng = SplitMix64::seed_from_u64(master.next_u64());
    let mut distort_rng = SplitMix64::seed_from_u64(master.next_u64());

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut windows = Vec::new();
    let mut assignments = Vec::new();
    let mut push = |p: Vec<f64>, w: Window, a: Option<usize>| {
        rows.push(p);
        windows.push(w);
        assignments.push(a);
    };

    for (c, bc) in spec.base_clusters.iter().enumerate() {
        for _ in 0..bc.size_previous {
            push(
                cluster_point(&mut cluster_rngs[c], &dirs[c], bc.spread),
                Window::Previous,
                Some(c),
            );
        }
    }
    for _ in 0..spec.noise_points {
        push(unit(&mut noise_rng, d), Window::Previous, None);
    }
    for (c, bc) in spec.base_clusters.iter().enumerate() {
        for _ in 0..bc.size_current {
            push(
                cluster_point(&mut cluster_rngs[c], &dirs[c], bc.spread),
                Window::Current,
                Some(c),
            );
        }
    }
    let offset = spec.base_clusters.len();
    for (e, ec) in spec.emerging_clusters.iter().enumerate() {
        let c = offset + e;
        for _ in 0..ec.size_current {
            push(
                cluster_point(&mut cluster_rngs[c], &dirs[c], ec.spread),
                Window::Current,
                Some(c),
            );
        }
    }
    for _ in 0..spec.noise_points {
        push(unit(&mut noise_rng, d), Window::Current, None);
    }

    let n = rows.len();
    if n == 0 {
        return Err(Error::EmptySet);
    }
    let mut matrix = Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect())
        .expect("every row has d components");
    if spec.distort {
        // I + G / sqrt(d) with G standard normal; invertible with
        // probability one and well conditioned in practice.
        let g = Array2::from_shape_fn((d, d), |(i, j)| {
            let x: f64 = distort_rng.sample(StandardNormal);
            x / (d as f64).sqrt() + if i == j { 1.0 } else { 0.0 }
        });
        matrix = matrix.dot(&g);
    }

    let ids: Vec<String> = (0..n).map(|i| format!("n{i:06}")).collect();
    let mut kinds = vec![TruthKind::Stable; spec.base_clusters.len()];
    kinds.extend(std::iter::repeat_n(
        TruthKind::Emerging,
        spec.emerging_clusters.len(),
    ));
    let current_sizes = spec
        .base_clusters
        .iter()
        .map(|c| c.size_current)
        .chain(spec.emerging_clusters.iter().map(|c| c.size_current))
        .collect();
    let set = EmbeddingSet::new(ids.clone(), windows, matrix, None)?;
    Ok((
        set,
        GroundTruth {
            ids,
            assignments,
            kinds,
            current_sizes,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberPurity {
    pub trending: Vec<f64>,
    pub emerging: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub top_k: usize,
    /// Emerging-only true clusters hit by a top-k emerging center.
    pub emerging_recall: f64,
    /// Top-k trending centers inside a cluster of maximal current-window size.
    pub trending_center_purity: f64,
    pub member_purity: MemberPurity,
}

/// Scores the top `top_k` clusters of each kind against `truth`.
pub fn evaluate(report: &RadarReport, truth: &GroundTruth, top_k: usize) -> Result<Metrics> {
    let lookup = truth.lookup();
    let cluster_of = |id: &str| -> Result<Option<usize>> {
        lookup
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(id.to_owned()))
    };
    let top = |cs: &[ReportCluster]| -> Vec<ReportCluster> {
        let mut v = cs.to_vec();
        v.sort_by_key(|c| c.rank);
        v.truncate(top_k);
        v
    };
    let trending = top(&report.trending);
    let emerging = top(&report.emerging);

    let emerging_truth: Vec<usize> = (0..truth.kinds.len())
        .filter(|&c| truth.kinds[c] == TruthKind::Emerging)
        .collect();
    let mut hit = vec![false; truth.kinds.len()];
    for c in &emerging {
        if let Some(t) = cluster_of(&c.center_id)? {
            hit[t] = true;
        }
    }
    let emerging_recall = if emerging_truth.is_empty() {
        0.0
    } else {
        emerging_truth.iter().filter(|&&c| hit[c]).count() as f64 / emerging_truth.len() as f64
    };

    let largest = truth.current_sizes.iter().copied().max().unwrap_or(0);
    let mut pure_centers = 0usize;
    for c in &trending {
        if let Some(t) = cluster_of(&c.center_id)? {
            if truth.current_sizes[t] == largest {
                pure_centers += 1;
            }
        }
    }
    let trending_center_purity = if trending.is_empty() {
        0.0
    } else {
        pure_centers as f64 / trending.len() as f64
    };

    let purity = |cs: &[ReportCluster]| -> Result<Vec<f64>> {
        cs.iter()
            .map(|c| {
                let center = cluster_of(&c.center_id)?;
                let mut same = 0usize;
                for m in &c.members {
                    if cluster_of(&m.id)? == center {
                        same += 1;
                    }
                }
                Ok(if c.members.is_empty() {
                    0.0
                } else {
                    same as f64 / c.members.len() as f64
                })
            })
            .collect()
    };

    Ok(Metrics {
        top_k,
        emerging_recall,
        trending_center_purity,
        member_purity: MemberPurity {
            trending: purity(&trending)?,
            emerging: purity(&emerging)?,
        },
    })
}
