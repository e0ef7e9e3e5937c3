//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use issue_radar::attend::{attention, softmax, AttentionHead};
use issue_radar::radar::{gamma, scores};
use issue_radar::simgraph::build;
use issue_radar::synth::{BaseCluster, EmergingCluster, TruthKind};
use issue_radar::whiten::{fit, transform, DEFAULT_EPS_REL};
use issue_radar::{
    brute_force_split, decay_centrality, detect, generate, split_centrality, EmbeddingSet,
    GroundTruth, RunConfig, SimilarityGraph, SynthSpec, Window,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Random orthonormal basis by Gram-Schmidt on a Gaussian matrix.
fn random_rotation(d: usize, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    while basis.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for b in &basis {
                let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

fn whitening_contract() -> Outcome {
    let (n, d) = (2000, 16);
    let mut rng = SplitMix64::seed_from_u64(2024);
    let rot = random_rotation(d, &mut rng);
    // covariance eigenvalues log-spaced over three decades
    let stds: Vec<f64> = (0..d)
        .map(|k| 10f64.powf(3.0 * k as f64 / (d - 1) as f64).sqrt())
        .collect();
    let offset: Vec<f64> = (0..d).map(|k| 5.0 - k as f64).collect();
    let mut m = Array2::zeros((n, d));
    for i in 0..n {
        let g: Vec<f64> = (0..d)
            .map(|k| stds[k] * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for c in 0..d {
            m[[i, c]] = offset[c] + (0..d).map(|k| g[k] * rot[k][c]).sum::<f64>();
        }
    }
    let set = EmbeddingSet::new(
        (0..n).map(|i| format!("w{i}")).collect(),
        vec![Window::Current; n],
        m,
        None,
    )
    .map_err(|e| e.to_string())?;

    let start = Instant::now();
    let model = fit(&set, DEFAULT_EPS_REL).map_err(|e| e.to_string())?;
    let z = transform(&model, &set).map_err(|e| e.to_string())?;
    let took = start.elapsed();

    let z = z.matrix();
    let mean: Vec<f64> = (0..d)
        .map(|c| (0..n).map(|i| z[[i, c]]).sum::<f64>() / n as f64)
        .collect();
    let max_mean = mean.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut frob = 0.0;
    for a in 0..d {
        for b in 0..d {
            let cov = (0..n)
                .map(|i| (z[[i, a]] - mean[a]) * (z[[i, b]] - mean[b]))
                .sum::<f64>()
                / n as f64;
            let target = if a == b { 1.0 } else { 0.0 };
            frob += (cov - target).powi(2);
        }
    }
    let frob = frob.sqrt();
    let sv = model.singular_values();
    let cond = sv[0] / sv[d - 1];
    check(
        max_mean <= 1e-8 && frob <= 1e-6 && took < Duration::from_secs(1),
        format!(
            "sample condition {cond:.0}, max |mean| {max_mean:.2e}, ||cov - I||_F {frob:.2e}, {:.3}s",
            secs(took)
        ),
    )
}

fn random_graph(n: usize, p: f64, rng: &mut SplitMix64) -> SimilarityGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let windows = (0..n)
        .map(|_| {
            if rng.random::<bool>() {
                Window::Current
            } else {
                Window::Previous
            }
        })
        .collect();
    SimilarityGraph::from_edges(&edges, windows, (0..n).map(|i| i.to_string()).collect()).unwrap()
}

fn centrality_oracle() -> Outcome {
    let mut rng = SplitMix64::seed_from_u64(77);
    let densities = [0.02, 0.1, 0.5];
    let betas = [0.3, 0.5, 0.9];
    let (mut worst, mut worst_sum, mut nodes) = (0.0f64, 0.0f64, 0usize);
    for k in 0..100 {
        let n = rng.random_range(2..=128);
        let g = random_graph(n, densities[k % 3], &mut rng);
        let beta = betas[(k / 3) % 3];
        let fast = split_centrality(&g, beta, None).map_err(|e| e.to_string())?;
        let slow = brute_force_split(&g, beta).map_err(|e| e.to_string())?;
        for i in 0..n {
            worst = worst
                .max((fast.c[i] - slow.c[i]).abs())
                .max((fast.c_plus[i] - slow.c_plus[i]).abs())
                .max((fast.c_minus[i] - slow.c_minus[i]).abs());
            worst_sum = worst_sum.max((fast.c_plus[i] + fast.c_minus[i] - fast.c[i]).abs());
        }
        nodes += n;
    }
    check(
        worst <= 1e-12 && worst_sum <= 1e-12,
        format!("100 graphs, {nodes} nodes, max oracle gap {worst:.1e}, max additivity gap {worst_sum:.1e}"),
    )
}

fn closed_forms() -> Outcome {
    let run = |n: usize, edges: &[(usize, usize)]| {
        let g = SimilarityGraph::unlabeled(n, edges, Window::Current).unwrap();
        decay_centrality(&g, 0.5, None).unwrap()
    };
    let k4 = run(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    let path = run(3, &[(0, 1), (1, 2)]);
    let pair = run(3, &[(0, 1)]);
    let ok = k4 == vec![0.75; 4]
        && path == vec![0.5, 2.0 / 3.0, 0.5]
        && pair == vec![1.0 / 3.0, 1.0 / 3.0, 0.0];
    check(
        ok,
        format!("K4 {k4:?}, path {path:?}, edge+isolated {pair:?}"),
    )
}

fn score_spot_check() -> Outcome {
    let g = SimilarityGraph::from_edges(
        &[(0, 1), (1, 2)],
        vec![Window::Current, Window::Current, Window::Previous],
        vec!["a".into(), "b".into(), "c".into()],
    )
    .map_err(|e| e.to_string())?;
    let table = split_centrality(&g, 0.5, None).map_err(|e| e.to_string())?;
    let gm = gamma(&table, 0.1).map_err(|e| e.to_string())?;
    let s = scores(&table, gm, g.windows()).map_err(|e| e.to_string())?;
    let row = s
        .rows
        .iter()
        .find(|r| r.node == 0)
        .ok_or("node 0 not scored")?;
    let expect_se = 10f64.tanh().powi(2) / 3.0;
    check(
        (gm - 1.0 / 30.0).abs() <= 1e-15
            && (row.s_t - 0.333333).abs() <= 1e-6
            && (row.s_e - 0.333333).abs() <= 1e-6
            && (row.s_e - expect_se).abs() <= 1e-12,
        format!("gamma {gm:.6}, s_t {:.7}, s_e {:.7}", row.s_t, row.s_e),
    )
}

fn truth_cluster(truth: &GroundTruth, id: &str) -> Option<usize> {
    let i = truth.ids.iter().position(|x| x == id)?;
    truth.assignments[i]
}

fn end_to_end() -> Outcome {
    let cfg = RunConfig::default();
    let (mut emerging_hits, mut trending_hits) = (0, 0);
    let mut slowest = Duration::ZERO;
    for seed in 0..20u64 {
        let start = Instant::now();
        let (set, truth) = generate(&SynthSpec::standard(seed)).map_err(|e| e.to_string())?;
        let det = detect(&set, &cfg).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());

        let largest = truth.current_sizes.iter().copied().max().unwrap_or(0);
        if let Some(c) = det.report.emerging.first() {
            if truth_cluster(&truth, &c.center_id)
                .is_some_and(|t| truth.kinds[t] == TruthKind::Emerging)
            {
                emerging_hits += 1;
            }
        }
        if let Some(c) = det.report.trending.first() {
            if truth_cluster(&truth, &c.center_id).is_some_and(|t| {
                truth.kinds[t] == TruthKind::Stable && truth.current_sizes[t] == largest
            }) {
                trending_hits += 1;
            }
        }
    }
    check(
        emerging_hits >= 19 && trending_hits >= 19 && slowest < Duration::from_secs(30),
        format!(
            "emerging top-1 {emerging_hits}/20, trending top-1 {trending_hits}/20, slowest seed {:.2}s",
            secs(slowest)
        ),
    )
}

fn threshold_monotonicity() -> Outcome {
    let (set, _) = generate(&SynthSpec::standard(1)).map_err(|e| e.to_string())?;
    let mut counts = Vec::new();
    let mut bounded = true;
    for alpha in [0.6, 0.7, 0.8] {
        counts.push(build(&set, alpha).map_err(|e| e.to_string())?.edge_count());
        let cfg = RunConfig {
            alpha,
            ..RunConfig::default()
        };
        let det = detect(&set, &cfg).map_err(|e| e.to_string())?;
        bounded &= det
            .scores
            .rows
            .iter()
            .all(|r| (-1.0..=1.0).contains(&r.s_e));
    }
    check(
        counts[0] >= counts[1] && counts[1] >= counts[2] && bounded,
        format!("edges at 0.6/0.7/0.8: {counts:?}, s_e within [-1, 1]: {bounded}"),
    )
}

fn attention_invariants() -> Outcome {
    let mut rng = SplitMix64::seed_from_u64(31337);
    let (mut sum_gap, mut shift_gap, mut chi_gap, mut naive_gap) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(1..=64);
        let d = 2 * rng.random_range(1..=32);
        let scale = rng.random_range(0.1..3.0);
        let q =
            Array2::from_shape_simple_fn((n, d), || scale * rng.sample::<f64, _>(StandardNormal));
        let key: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let head = AttentionHead::new(key.clone()).map_err(|e| e.to_string())?;
        let r = attention(&q, &head, &q).map_err(|e| e.to_string())?;

        sum_gap = sum_gap.max((r.sigma.iter().sum::<f64>() - 1.0).abs());

        let raw: Vec<f64> = q
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(&key).map(|(a, b)| a * b).sum::<f64>() / (d as f64).sqrt())
            .collect();
        let c = rng.random_range(-50.0..50.0);
        let shifted: Vec<f64> = raw.iter().map(|s| s + c).collect();
        for (a, b) in softmax(&raw).iter().zip(softmax(&shifted)) {
            shift_gap = shift_gap.max((a - b).abs());
        }

        let total: f64 = raw.iter().map(|s| s.exp()).sum();
        for (s, x) in raw.iter().zip(&r.sigma) {
            naive_gap = naive_gap.max((s.exp() / total - x).abs());
        }

        for k in 0..d {
            let chi: f64 = (0..n).map(|i| r.sigma[i] * q[[i, k]]).sum();
            chi_gap = chi_gap.max((chi - r.chi[k]).abs());
        }
    }
    check(
        sum_gap <= 1e-9 && shift_gap <= 1e-12 && chi_gap <= 1e-12 && naive_gap <= 1e-12,
        format!(
            "1000 instances, sum gap {sum_gap:.1e}, shift gap {shift_gap:.1e}, chi gap {chi_gap:.1e}, direct softmax gap {naive_gap:.1e}"
        ),
    )
}

fn performance_smoke() -> Outcome {
    let spec = SynthSpec {
        d: 32,
        base_clusters: vec![
            BaseCluster {
                size_previous: 200,
                size_current: 200,
                spread: 0.05,
            };
            45
        ],
        emerging_clusters: vec![EmergingCluster {
            size_current: 1000,
            spread: 0.05,
        }],
        noise_points: 500,
        seed: 8,
        distort: false,
    };
    let (set, _) = generate(&spec).map_err(|e| e.to_string())?;
    let cfg = RunConfig::default();
    let mut reports = Vec::new();
    let mut times = Vec::new();
    for _ in 0..2 {
        let start = Instant::now();
        let det = detect(&set, &cfg).map_err(|e| e.to_string())?;
        times.push(start.elapsed());
        reports.push(det.report.to_json_pretty());
    }
    let slowest = times.iter().copied().max().unwrap_or_default();
    check(
        set.len() == 20_000 && slowest < Duration::from_secs(60) && reports[0] == reports[1],
        format!(
            "N={}, d={}, {} threads, runs {:.2}s / {:.2}s, identical reports: {}",
            set.len(),
            set.dim(),
            rayon::current_num_threads(),
            secs(times[0]),
            secs(times[1]),
            reports[0] == reports[1]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("whitening contract", whitening_contract),
        ("centrality oracle equivalence", centrality_oracle),
        ("closed-form centralities", closed_forms),
        ("score formula spot-check", score_spot_check),
        ("end-to-end emerging detection", end_to_end),
        ("threshold monotonicity", threshold_monotonicity),
        ("attention invariants", attention_invariants),
        ("performance smoke", performance_smoke),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {} {name}: {detail}", k + 1),
            Err(detail) => {
                println!("FAIL {} {name}: {detail}", k + 1);
                failed += 1;
            }
        }
    }
    if failed == 0 {
        println!("acceptance: 8/8 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed}/8 criteria failed");
        ExitCode::FAILURE
    }
}
