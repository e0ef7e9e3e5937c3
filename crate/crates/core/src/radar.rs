//! Trending and emerging scores for current-window nodes, greedy cluster
//! extraction by graph distance, and the run report.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::centrality::{split_centrality, CentralityTable};
use crate::corpus::{EmbeddingSet, RunConfig, Window};
use crate::error::{Error, Result};
use crate::simgraph::{self, Bfs, SimilarityGraph};

/// Member texts included per reported cluster.
pub const MAX_SAMPLES: usize = 5;

/// `fraction * max(c_plus)` over every node of both windows.
pub fn gamma(table: &CentralityTable, fraction: f64) -> Result<f64> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    if !(fraction > 0.0 && fraction.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "gamma fraction must be positive, got {fraction}"
        )));
    }
    let max = table.c_plus.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::AllZeroCentrality);
    }
    Ok(fraction * max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRow {
    pub node: usize,
    /// Trending score: the node's matched centrality.
    pub s_t: f64,
    /// Emerging score in [-1, 1].
    pub s_e: f64,
    /// `tanh^2(c_plus / gamma)`.
    pub filter: f64,
}

/// Scores of current-window nodes, in node order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    /// CSV with header `id,window,s_t,s_e,filter`.
    pub fn to_csv(&self, g: &SimilarityGraph) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io_err = |e: csv::Error| Error::io("<csv>", e.into());
        w.write_record(["id", "window", "s_t", "s_e", "filter"])
            .map_err(io_err)?;
        for r in &self.rows {
            w.write_record([
                g.id(r.node),
                g.window(r.node).as_str(),
                &r.s_t.to_string(),
                &r.s_e.to_string(),
                &r.filter.to_string(),
            ])
            .map_err(io_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::io("<csv>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
    }
}

/// `s_t = c_plus`, `s_e = tanh^2(c_plus / gamma) (c_plus - c_minus) / c`,
/// with `s_e = 0` for isolated nodes.
pub fn scores(table: &CentralityTable, gamma: f64, windows: &[Window]) -> Result<ScoreTable> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::NonPositiveGamma(gamma));
    }
    if windows.len() != table.len() {
        return Err(Error::LengthMismatch {
            expected: table.len(),
            actual: windows.len(),
        });
    }
    let rows = (0..table.len())
        .filter(|&i| windows[i] == Window::Current)
        .map(|i| {
            let (cp, cm, c) = (table.c_plus[i], table.c_minus[i], table.c[i]);
            let t = (cp / gamma).tanh();
            let filter = t * t;
            let s_e = if c > 0.0 { filter * (cp - cm) / c } else { 0.0 };
            ScoreRow {
                node: i,
                s_t: cp,
                s_e,
                filter,
            }
        })
        .collect();
    Ok(ScoreTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterKind {
    Trending,
    Emerging,
}

impl ClusterKind {
    fn score(self, row: &ScoreRow) -> f64 {
        match self {
            ClusterKind::Trending => row.s_t,
            ClusterKind::Emerging => row.s_e,
        }
    }
}

impl fmt::Display for ClusterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClusterKind::Trending => "trending",
            ClusterKind::Emerging => "emerging",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Member {
    pub node: usize,
    pub distance: u32,
    pub window: Window,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub kind: ClusterKind,
    pub center: usize,
    pub score: f64,
    /// Sorted by distance, then node; the center comes first.
    pub members: Vec<Member>,
    /// 1-based.
    pub rank: usize,
}

/// Greedy extraction: take the best remaining current-window node as a
/// center, collect everything within `radius` as members, then bar every
/// node within `separation - 1` of any member from becoming a later center.
/// Stops after `k` clusters or when no candidate is left.
pub fn extract_clusters(
    scores: &ScoreTable,
    g: &SimilarityGraph,
    kind: ClusterKind,
    radius: u32,
    separation: u32,
    k: usize,
) -> Vec<Cluster> {
    debug_assert!(
        radius < separation,
        "radius must be smaller than separation"
    );
    let mut order: Vec<&ScoreRow> = scores.rows.iter().collect();
    order.sort_by(|a, b| {
        kind.score(b)
            .partial_cmp(&kind.score(a))
            .unwrap_or(Ordering::Equal)
            .then(a.node.cmp(&b.node))
    });

    let mut excluded = vec![false; g.n()];
    let mut bfs = Bfs::new(g.n());
    let mut clusters = Vec::new();
    for row in order {
        if clusters.len() >= k {
            break;
        }
        if excluded[row.node] {
            continue;
        }
        bfs.run(g, &[row.node], Some(radius));
        let mut members: Vec<Member> = bfs
            .visited()
            .iter()
            .map(|&v| Member {
                node: v as usize,
                distance: bfs.distance(v as usize).unwrap(),
                window: g.window(v as usize),
            })
            .collect();
        members.sort_by_key(|m| (m.distance, m.node));

        let member_nodes: Vec<usize> = members.iter().map(|m| m.node).collect();
        bfs.run(g, &member_nodes, Some(separation.saturating_sub(1)));
        for &v in bfs.visited() {
            excluded[v as usize] = true;
        }

        clusters.push(Cluster {
            kind,
            center: row.node,
            score: kind.score(row),
            members,
            rank: clusters.len() + 1,
        });
    }
    clusters
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMember {
    pub id: String,
    pub distance: u32,
    pub window: Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCluster {
    pub rank: usize,
    pub center_id: String,
    pub score: f64,
    pub members: Vec<ReportMember>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarReport {
    pub config: RunConfig,
    pub gamma: f64,
    pub n_previous: usize,
    pub n_current: usize,
    pub trending: Vec<ReportCluster>,
    pub emerging: Vec<ReportCluster>,
}

impl RadarReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are finite")
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        serde_json::from_str(raw).map_err(|e| Error::MalformedRecord {
            line: e.line(),
            reason: e.to_string(),
        })
    }
}

fn report_cluster(c: &Cluster, set: &EmbeddingSet) -> ReportCluster {
    ReportCluster {
        rank: c.rank,
        center_id: set.ids()[c.center].clone(),
        score: c.score,
        members: c
            .members
            .iter()
            .map(|m| ReportMember {
                id: set.ids()[m.node].clone(),
                distance: m.distance,
                window: m.window,
            })
            .collect(),
        samples: c
            .members
            .iter()
            .filter_map(|m| set.text(m.node))
            .take(MAX_SAMPLES)
            .map(str::to_owned)
            .collect(),
    }
}

fn sorted(clusters: &[Cluster], set: &EmbeddingSet) -> Vec<ReportCluster> {
    let mut out: Vec<ReportCluster> = clusters.iter().map(|c| report_cluster(c, set)).collect();
    out.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then(a.rank.cmp(&b.rank))
    });
    out
}

pub fn build_report(
    trending: &[Cluster],
    emerging: &[Cluster],
    set: &EmbeddingSet,
    cfg: &RunConfig,
    gamma: f64,
) -> RadarReport {
    RadarReport {
        config: cfg.clone(),
        gamma,
        n_previous: set.count_window(Window::Previous),
        n_current: set.count_window(Window::Current),
        trending: sorted(trending, set),
        emerging: sorted(emerging, set),
    }
}

/// Every intermediate product of a detection run.
#[derive(Debug, Clone)]
pub struct Detection {
    pub graph: SimilarityGraph,
    pub centrality: CentralityTable,
    pub gamma: f64,
    pub scores: ScoreTable,
    pub trending: Vec<Cluster>,
    pub emerging: Vec<Cluster>,
    pub report: RadarReport,
}

/// Graph, centralities, scores and clusters for an already-whitened set.
pub fn detect(set: &EmbeddingSet, cfg: &RunConfig) -> Result<Detection> {
    cfg.validate()?;
    let graph = simgraph::build(set, cfg.alpha)?;
    let centrality = split_centrality(&graph, cfg.beta, cfg.max_bfs_depth)?;
    let gamma = gamma(&centrality, cfg.gamma_fraction)?;
    let scores = scores(&centrality, gamma, graph.windows())?;
    let extract = |kind| {
        extract_clusters(
            &scores,
            &graph,
            kind,
            cfg.cluster_radius,
            cfg.cluster_separation,
            cfg.top_k,
        )
    };
    let trending = extract(ClusterKind::Trending);
    let emerging = extract(ClusterKind::Emerging);
    let report = build_report(&trending, &emerging, set, cfg, gamma);
    Ok(Detection {
        graph,
        centrality,
        gamma,
        scores,
        trending,
        emerging,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use Window::{Current as C, Previous as P};

    fn table(c_plus: Vec<f64>, c_minus: Vec<f64>) -> CentralityTable {
        let c = c_plus.iter().zip(&c_minus).map(|(a, b)| a + b).collect();
        CentralityTable {
            c,
            c_plus,
            c_minus,
            beta: 0.5,
            max_depth: None,
        }
    }

    fn graph(windows: Vec<Window>, edges: &[(usize, usize)]) -> SimilarityGraph {
        let n = windows.len();
        SimilarityGraph::from_edges(edges, windows, (0..n).map(|i| format!("n{i}")).collect())
            .unwrap()
    }

    #[test]
    fn gamma_cases() {
        assert_abs_diff_eq!(
            gamma(&table(vec![0.5, 0.2, 0.05], vec![0.0; 3]), 0.1).unwrap(),
            0.05,
            epsilon = 1e-17
        );
        assert!(matches!(
            gamma(&table(vec![0.0; 3], vec![0.1; 3]), 0.1),
            Err(Error::AllZeroCentrality)
        ));
        assert_abs_diff_eq!(
            gamma(&table(vec![0.3], vec![0.0]), 0.1).unwrap(),
            0.03,
            epsilon = 1e-17
        );
        assert!(matches!(
            gamma(&table(vec![], vec![]), 0.1),
            Err(Error::EmptyTable)
        ));
    }

    #[test]
    fn path_example_scores() {
        let t = table(vec![1.0 / 3.0], vec![1.0 / 6.0]);
        let s = scores(&t, 1.0 / 30.0, &[C]).unwrap();
        let r = s.rows[0];
        assert_abs_diff_eq!(r.s_t, 0.333333, epsilon = 1e-6);
        assert_abs_diff_eq!(r.filter, 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(r.s_e, 0.333333, epsilon = 1e-6);
    }

    #[test]
    fn isolated_and_unmatched_nodes() {
        let t = table(vec![0.0, 0.0], vec![0.0, 0.2]);
        let s = scores(&t, 0.1, &[C, C]).unwrap();
        assert_eq!((s.rows[0].s_t, s.rows[0].s_e), (0.0, 0.0));
        assert_eq!(s.rows[1].filter, 0.0);
        assert_eq!(s.rows[1].s_e, 0.0);
    }

    #[test]
    fn only_current_nodes_scored() {
        let t = table(vec![0.1, 0.2, 0.3], vec![0.0; 3]);
        let s = scores(&t, 0.1, &[P, C, P]).unwrap();
        assert_eq!(s.rows.len(), 1);
        assert_eq!(s.rows[0].node, 1);
        assert!(matches!(
            scores(&t, 0.0, &[P, C, P]),
            Err(Error::NonPositiveGamma(_))
        ));
    }

    fn rows(scores_by_node: &[(usize, f64)]) -> ScoreTable {
        ScoreTable {
            rows: scores_by_node
                .iter()
                .map(|&(node, s)| ScoreRow {
                    node,
                    s_t: s,
                    s_e: s,
                    filter: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn two_cliques() {
        let mut edges = Vec::new();
        for base in [0, 5] {
            for i in 0..5 {
                for j in i + 1..5 {
                    edges.push((base + i, base + j));
                }
            }
        }
        let g = graph(vec![C; 10], &edges);
        let s = rows(
            &(0..10)
                .map(|i| (i, if i < 5 { 1.0 + i as f64 } else { 0.5 }))
                .collect::<Vec<_>>(),
        );
        let cl = extract_clusters(&s, &g, ClusterKind::Trending, 3, 4, 5);
        assert_eq!(cl.len(), 2);
        assert_eq!(cl[0].center, 4);
        let mut m: Vec<_> = cl[0].members.iter().map(|m| m.node).collect();
        m.sort();
        assert_eq!(m, vec![0, 1, 2, 3, 4]);
        assert_eq!(cl[1].center, 5);
        assert_eq!(cl[1].rank, 2);
    }

    #[test]
    fn path_of_nine() {
        let edges: Vec<_> = (0..8).map(|i| (i, i + 1)).collect();
        let g = graph(vec![C; 9], &edges);
        let s = rows(&(0..9).map(|i| (i, 9.0 - i as f64)).collect::<Vec<_>>());
        let cl = extract_clusters(&s, &g, ClusterKind::Trending, 3, 4, 3);
        let m: Vec<_> = cl[0].members.iter().map(|m| (m.node, m.distance)).collect();
        assert_eq!(m, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
        assert_eq!(cl[1].center, 7);
        assert_eq!(cl.len(), 2);
    }

    #[test]
    fn previous_nodes_are_members_not_centers() {
        let g = graph(vec![P, C, C], &[(0, 1)]);
        let s = ScoreTable {
            rows: vec![
                ScoreRow {
                    node: 1,
                    s_t: 0.5,
                    s_e: -0.2,
                    filter: 1.0,
                },
                ScoreRow {
                    node: 2,
                    s_t: 0.1,
                    s_e: 0.0,
                    filter: 0.0,
                },
            ],
        };
        let cl = extract_clusters(&s, &g, ClusterKind::Emerging, 3, 4, 1);
        assert_eq!(cl[0].center, 2);
        let cl = extract_clusters(&s, &g, ClusterKind::Trending, 3, 4, 2);
        assert_eq!(cl[0].center, 1);
        assert_eq!(
            cl[0].members[1],
            Member {
                node: 0,
                distance: 1,
                window: P
            }
        );
        assert_eq!(cl[1].center, 2);
    }

    #[test]
    fn ties_break_to_smaller_index() {
        let g = graph(vec![C; 3], &[]);
        let s = rows(&[(2, 1.0), (0, 1.0), (1, 1.0)]);
        let cl = extract_clusters(&s, &g, ClusterKind::Trending, 1, 2, 3);
        assert_eq!(
            cl.iter().map(|c| c.center).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
    }

    fn small_set(texts: Option<Vec<Option<String>>>) -> EmbeddingSet {
        EmbeddingSet::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![P, C, C],
            array![[1.0, 0.0], [1.0, 0.1], [0.0, 1.0]],
            texts,
        )
        .unwrap()
    }

    fn cluster(kind: ClusterKind, center: usize, score: f64, rank: usize) -> Cluster {
        Cluster {
            kind,
            center,
            score,
            members: vec![Member {
                node: center,
                distance: 0,
                window: C,
            }],
            rank,
        }
    }

    #[test]
    fn report_without_texts_omits_samples() {
        let set = small_set(None);
        let r = build_report(
            &[cluster(ClusterKind::Trending, 1, 0.5, 1)],
            &[],
            &set,
            &RunConfig::default(),
            0.1,
        );
        assert!(r.trending[0].samples.is_empty());
        assert!(!r.to_json_pretty().contains("samples"));
        assert_eq!((r.n_previous, r.n_current), (1, 2));
    }

    #[test]
    fn report_sections_and_roundtrip() {
        let set = small_set(Some(vec![
            Some("x".into()),
            Some("refund late".into()),
            None,
        ]));
        let trending = [
            cluster(ClusterKind::Trending, 2, 0.2, 1),
            cluster(ClusterKind::Trending, 1, 0.4, 2),
        ];
        let emerging = [cluster(ClusterKind::Emerging, 1, 0.9, 1)];
        let r = build_report(&trending, &emerging, &set, &RunConfig::default(), 0.1);
        assert_eq!(r.trending.len(), 2);
        assert_eq!(r.emerging.len(), 1);
        assert!(r.trending[0].score >= r.trending[1].score);
        assert_eq!(r.emerging[0].samples, vec!["refund late".to_string()]);
        let back = RadarReport::from_json(&r.to_json_pretty()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn detect_on_tiny_set() {
        let set = EmbeddingSet::new(
            (0..6).map(|i| format!("q{i}")).collect(),
            vec![P, P, C, C, C, C],
            array![
                [1.0, 0.0],
                [0.99, 0.05],
                [1.0, 0.02],
                [0.0, 1.0],
                [0.05, 1.0],
                [0.02, 0.99]
            ],
            None,
        )
        .unwrap();
        let d = detect(&set, &RunConfig::default()).unwrap();
        assert_eq!(d.graph.edge_count(), 6);
        // nodes 3..5 exist only in the current window
        assert!(d.emerging[0].center >= 3);
        assert_abs_diff_eq!(d.emerging[0].score, 1.0, epsilon = 1e-6);
    }
}
