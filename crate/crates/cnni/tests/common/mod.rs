//! Shared helpers for the integration suites: independent reference
//! implementations (kept deliberately naive) and random-instance
//! generators.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cnni::distance::DistanceMatrix;

/// Direct transcription of the per-sample silhouette formula with fresh
/// per-cluster loops; independent of the library's bucketed accumulation.
pub fn reference_silhouette(dist: &DistanceMatrix, labels: &[usize]) -> Option<f64> {
    let n = labels.len();
    let clusters: BTreeSet<usize> = labels.iter().copied().collect();
    if clusters.len() < 2 {
        return None;
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        let same: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == own).collect();
        let s = if same.is_empty() {
            0.0
        } else {
            let a = same.iter().map(|&j| dist.get(i, j)).sum::<f64>() / same.len() as f64;
            let mut b = f64::INFINITY;
            for &c in &clusters {
                if c == own {
                    continue;
                }
                let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                let mean = members.iter().map(|&j| dist.get(i, j)).sum::<f64>()
                    / members.len() as f64;
                if mean < b {
                    b = mean;
                }
            }
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        };
        total += s;
    }
    Some(total / n as f64)
}

/// Random points in [-5, 5]^dim.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect()
}

/// Random labels in 0..k, re-rolled until at least two are distinct.
pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    loop {
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let distinct: BTreeSet<usize> = labels.iter().copied().collect();
        if distinct.len() >= 2 {
            return labels;
        }
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn bits(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}
