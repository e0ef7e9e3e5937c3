//! Shared fixtures for the criterion benches.

use issue_radar::synth::{BaseCluster, EmergingCluster};
use issue_radar::{EmbeddingSet, SynthSpec};

/// Synthetic set of roughly `n` points in `d` dimensions: stable clusters of
/// 200 + 200 points, one emerging cluster and 5% noise per window.
pub fn fixture(n: usize, d: usize, seed: u64) -> EmbeddingSet {
    let noise = n / 40;
    let emerging = n / 20;
    let stable = ((n - 2 * noise - emerging) / 400).max(1);
    let spec = SynthSpec {
        d,
        base_clusters: vec![
            BaseCluster {
                size_previous: 200,
                size_current: 200,
                spread: 0.05,
            };
            stable
        ],
        emerging_clusters: vec![EmergingCluster {
            size_current: emerging,
            spread: 0.05,
        }],
        noise_points: noise,
        seed,
        distort: false,
    };
    issue_radar::generate(&spec)
        .expect("fixture spec is feasible")
        .0
}
