//! Clustering objectives: silhouette coefficient (Euclidean or
//! min-max-jump), its soft-probability revision, and K-means-style losses
//! with minimax-distance medoids.
//!
//! Every objective is exposed through [`ObjectiveEval::score`] with a
//! higher-is-better orientation; losses are negated at that boundary and
//! degenerate labelings (fewer than two clusters) map to [`WORST`] so
//! optimizers uniformly reject collapse.

use std::fmt;
use std::str::FromStr;

use crate::distance::{euclidean, euclidean_matrix, mmj_matrix, DistanceMatrix};
use crate::error::{Error, Result};
use crate::network::argmax;

/// Sentinel for labelings no index is defined on. Any finite value
/// improves on it, and it compares equal to itself.
pub const WORST: f64 = f64::NEG_INFINITY;

/// Per-point cluster assignment: hard labels always, plus per-point
/// probability vectors when the network has a softmax head. `p_max[i]`
/// is the probability of point `i`'s hard-chosen cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    hard: Vec<usize>,
    soft: Option<Vec<Vec<f64>>>,
    p_max: Option<Vec<f64>>,
}

impl Assignment {
    pub fn from_hard(hard: Vec<usize>) -> Self {
        Assignment {
            hard,
            soft: None,
            p_max: None,
        }
    }

    /// Hard labels are the argmax of each probability vector (lowest
    /// index on ties), `p_max` its value.
    pub fn from_soft(soft: Vec<Vec<f64>>) -> Self {
        let hard: Vec<usize> = soft.iter().map(|p| argmax(p)).collect();
        let p_max = soft
            .iter()
            .zip(&hard)
            .map(|(p, &label)| p[label])
            .collect();
        Assignment {
            hard,
            soft: Some(soft),
            p_max: Some(p_max),
        }
    }

    pub fn len(&self) -> usize {
        self.hard.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hard.is_empty()
    }

    pub fn hard(&self) -> &[usize] {
        &self.hard
    }

    pub fn soft(&self) -> Option<&[Vec<f64>]> {
        self.soft.as_deref()
    }

    pub fn p_max(&self) -> Option<&[f64]> {
        self.p_max.as_deref()
    }
}

fn distinct_labels(labels: &[usize]) -> usize {
    let max = match labels.iter().max() {
        Some(&m) => m,
        None => return 0,
    };
    let mut seen = vec![false; max + 1];
    let mut count = 0;
    for &l in labels {
        if !seen[l] {
            seen[l] = true;
            count += 1;
        }
    }
    count
}

/// Per-sample silhouette values `s = (b - a) / max(a, b)`, where `a` is
/// the mean distance to the sample's own cluster (self excluded) and `b`
/// the smallest mean distance to any other cluster. Singleton-cluster
/// samples score 0, as do samples where both means vanish. Returns `None`
/// when fewer than two clusters are used.
pub fn silhouette_samples(dist: &DistanceMatrix, labels: &[usize]) -> Option<Vec<f64>> {
    let n = dist.n();
    assert_eq!(labels.len(), n, "one label per matrix row");
    if distinct_labels(labels) < 2 {
        return None;
    }
    let max_label = *labels.iter().max().expect("n >= 1");
    let mut counts = vec![0usize; max_label + 1];
    for &l in labels {
        counts[l] += 1;
    }

    let mut sums = vec![0.0; max_label + 1];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                sums[labels[j]] += dist.get(i, j);
            }
        }
        let own = labels[i];
        if counts[own] == 1 {
            out.push(0.0);
            continue;
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let mut b = f64::INFINITY;
        for (c, &count) in counts.iter().enumerate() {
            if c != own && count > 0 {
                let mean = sums[c] / count as f64;
                if mean < b {
                    b = mean;
                }
            }
        }
        let denom = a.max(b);
        out.push(if denom > 0.0 { (b - a) / denom } else { 0.0 });
    }
    Some(out)
}

/// Mean silhouette over all samples, in [-1, 1]; [`WORST`] when fewer
/// than two clusters are used.
pub fn silhouette(dist: &DistanceMatrix, labels: &[usize]) -> f64 {
    match silhouette_samples(dist, labels) {
        Some(samples) => samples.iter().sum::<f64>() / samples.len() as f64,
        None => WORST,
    }
}

/// Silhouette over min-max-jump distances computed under `context`.
pub fn mmj_silhouette(
    points: &[Vec<f64>],
    context: &[Vec<f64>],
    labels: &[usize],
) -> Result<f64> {
    let dist = mmj_matrix(points, context)?;
    Ok(silhouette(&dist, labels))
}

/// Soft revision of a per-sample index: the mean of `p_max[i] * samples[i]`.
/// Equals the plain mean when every probability is 1.
pub fn sci_v2(samples: &[f64], p_max: &[f64]) -> f64 {
    assert_eq!(samples.len(), p_max.len());
    let n = samples.len() as f64;
    samples.iter().zip(p_max).map(|(s, p)| p * s).sum::<f64>() / n
}

/// Cluster members minimizing the sum of distances (raised to `exponent`)
/// to the other members. Exact ties are all kept.
pub fn one_scom_pow(members: &[usize], dist: &DistanceMatrix, exponent: f64) -> Vec<usize> {
    assert!(!members.is_empty(), "one_scom of an empty cluster");
    let mut best = Vec::new();
    let mut best_sum = f64::INFINITY;
    for &i in members {
        let sum: f64 = members
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| {
                let d = dist.get(i, j);
                if exponent == 2.0 {
                    d * d
                } else {
                    d.powf(exponent)
                }
            })
            .sum();
        if sum < best_sum {
            best_sum = sum;
            best.clear();
            best.push(i);
        } else if sum == best_sum {
            best.push(i);
        }
    }
    best
}

/// Medoid set under squared min-max-jump distance.
pub fn one_scom(members: &[usize], dist: &DistanceMatrix) -> Vec<usize> {
    one_scom_pow(members, dist, 2.0)
}

/// Mean squared Euclidean distance of each point to its own cluster
/// centroid (the member mean).
pub fn kmeans_loss(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = points.len();
    assert_eq!(labels.len(), n, "one label per point");
    let dim = points[0].len();
    let max_label = *labels.iter().max().expect("n >= 1");
    let mut sums = vec![0.0; (max_label + 1) * dim];
    let mut counts = vec![0usize; max_label + 1];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (j, x) in p.iter().enumerate() {
            sums[l * dim + j] += x;
        }
    }
    let mut total = 0.0;
    for (p, &l) in points.iter().zip(labels) {
        let count = counts[l] as f64;
        let mut sq = 0.0;
        for (j, x) in p.iter().enumerate() {
            let diff = x - sums[l * dim + j] / count;
            sq += diff * diff;
        }
        total += sq;
    }
    total / n as f64
}

fn cluster_members(labels: &[usize]) -> Vec<(usize, Vec<usize>)> {
    let max_label = *labels.iter().max().expect("n >= 1");
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); max_label + 1];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .collect()
}

/// K-means-style loss over a precomputed min-max-jump matrix: the mean
/// squared distance of each point to the nearest medoid of its cluster.
/// When a cluster has several tied medoids, all of them count as centers.
pub fn mmj_kmeans_loss_matrix(dist: &DistanceMatrix, labels: &[usize]) -> f64 {
    weighted_mmj_kmeans_loss(dist, labels, None)
}

/// As [`mmj_kmeans_loss_matrix`] with each point's term scaled by
/// `2 - p_max[i]`. Equals the hard loss when every probability is 1.
pub fn mmj_kmeans_loss_soft_matrix(dist: &DistanceMatrix, labels: &[usize], p_max: &[f64]) -> f64 {
    weighted_mmj_kmeans_loss(dist, labels, Some(p_max))
}

fn weighted_mmj_kmeans_loss(
    dist: &DistanceMatrix,
    labels: &[usize],
    p_max: Option<&[f64]>,
) -> f64 {
    let n = dist.n();
    assert_eq!(labels.len(), n, "one label per matrix row");
    if let Some(p) = p_max {
        assert_eq!(p.len(), n, "one probability per point");
    }
    let clusters = cluster_members(labels);
    let mut centers: Vec<Vec<usize>> = Vec::new();
    let mut center_of_label = vec![usize::MAX; labels.iter().max().map_or(0, |&m| m + 1)];
    for (label, members) in &clusters {
        center_of_label[*label] = centers.len();
        centers.push(one_scom(members, dist));
    }
    let mut total = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        let scoms = &centers[center_of_label[l]];
        let nearest = scoms
            .iter()
            .map(|&c| dist.get(i, c))
            .fold(f64::INFINITY, f64::min);
        let mut term = nearest * nearest;
        if let Some(p) = p_max {
            term *= 2.0 - p[i];
        }
        total += term;
    }
    total / n as f64
}

/// Convenience wrapper computing the min-max-jump matrix of `points`
/// under `context` first.
pub fn mmj_kmeans_loss(
    points: &[Vec<f64>],
    context: &[Vec<f64>],
    labels: &[usize],
) -> Result<f64> {
    let dist = mmj_matrix(points, context)?;
    Ok(mmj_kmeans_loss_matrix(&dist, labels))
}

pub fn mmj_kmeans_loss_soft(
    points: &[Vec<f64>],
    context: &[Vec<f64>],
    labels: &[usize],
    p_max: &[f64],
) -> Result<f64> {
    let dist = mmj_matrix(points, context)?;
    Ok(mmj_kmeans_loss_soft_matrix(&dist, labels, p_max))
}

/// The selectable training objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Euclidean silhouette coefficient.
    Silhouette,
    /// Silhouette over min-max-jump distances.
    MmjSilhouette,
    /// Soft-probability revision of the min-max-jump silhouette.
    SciV2,
    /// Negated K-means loss.
    KMeans,
    /// Negated min-max-jump K-means loss (medoid centers).
    MmjKMeans,
    /// Negated soft min-max-jump K-means loss.
    MmjKMeansSoft,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 6] = [
        ObjectiveKind::Silhouette,
        ObjectiveKind::MmjSilhouette,
        ObjectiveKind::SciV2,
        ObjectiveKind::KMeans,
        ObjectiveKind::MmjKMeans,
        ObjectiveKind::MmjKMeansSoft,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ObjectiveKind::Silhouette => "sc",
            ObjectiveKind::MmjSilhouette => "mmj-sc",
            ObjectiveKind::SciV2 => "sci-v2",
            ObjectiveKind::KMeans => "kmeans",
            ObjectiveKind::MmjKMeans => "mmj-kmeans",
            ObjectiveKind::MmjKMeansSoft => "mmj-kmeans-soft",
        }
    }

    /// True for objectives that weight terms by softmax probabilities.
    pub fn requires_soft(self) -> bool {
        matches!(self, ObjectiveKind::SciV2 | ObjectiveKind::MmjKMeansSoft)
    }

    /// True for objectives evaluated over min-max-jump distances.
    pub fn uses_mmj(self) -> bool {
        matches!(
            self,
            ObjectiveKind::MmjSilhouette
                | ObjectiveKind::SciV2
                | ObjectiveKind::MmjKMeans
                | ObjectiveKind::MmjKMeansSoft
        )
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| {
                let ids: Vec<&str> = Self::ALL.iter().map(|k| k.id()).collect();
                Error::InvalidConfig(format!(
                    "unknown objective '{s}', expected one of: {}",
                    ids.join(", ")
                ))
            })
    }
}

/// An objective bound to a fixed point set, with its distance matrix
/// computed once. Scoring an [`Assignment`] is then a pure function of
/// the labels (and probabilities), which is what the training loops
/// evaluate millions of times.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    kind: ObjectiveKind,
    points: Vec<Vec<f64>>,
    dist: Option<DistanceMatrix>,
}

impl ObjectiveEval {
    /// Bind `kind` to `points`. Min-max-jump objectives route paths
    /// through `context` when given (the points must all occur in it);
    /// otherwise the points themselves are the context.
    pub fn new(
        kind: ObjectiveKind,
        points: Vec<Vec<f64>>,
        context: Option<&[Vec<f64>]>,
    ) -> Result<Self> {
        let dist = match kind {
            ObjectiveKind::Silhouette => Some(euclidean_matrix(&points)?),
            ObjectiveKind::KMeans => None,
            _ => Some(match context {
                Some(ctx) => mmj_matrix(&points, ctx)?,
                None => mmj_matrix(&points, &points)?,
            }),
        };
        Ok(ObjectiveEval { kind, points, dist })
    }

    /// Bind to an already-computed matrix; the caller guarantees it
    /// matches `points` and the metric `kind` expects.
    pub(crate) fn with_matrix(
        kind: ObjectiveKind,
        points: Vec<Vec<f64>>,
        dist: Option<DistanceMatrix>,
    ) -> Self {
        ObjectiveEval { kind, points, dist }
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Score with higher-is-better orientation. Labelings using fewer
    /// than two clusters score [`WORST`], as do soft objectives applied
    /// to assignments without probabilities.
    pub fn score(&self, assignment: &Assignment) -> f64 {
        assert_eq!(assignment.len(), self.points.len());
        let labels = assignment.hard();
        if distinct_labels(labels) < 2 {
            return WORST;
        }
        match self.kind {
            ObjectiveKind::Silhouette | ObjectiveKind::MmjSilhouette => {
                silhouette(self.dist.as_ref().expect("matrix present"), labels)
            }
            ObjectiveKind::SciV2 => {
                let Some(p_max) = assignment.p_max() else {
                    return WORST;
                };
                let dist = self.dist.as_ref().expect("matrix present");
                match silhouette_samples(dist, labels) {
                    Some(samples) => sci_v2(&samples, p_max),
                    None => WORST,
                }
            }
            ObjectiveKind::KMeans => -kmeans_loss(&self.points, labels),
            ObjectiveKind::MmjKMeans => {
                -mmj_kmeans_loss_matrix(self.dist.as_ref().expect("matrix present"), labels)
            }
            ObjectiveKind::MmjKMeansSoft => {
                let Some(p_max) = assignment.p_max() else {
                    return WORST;
                };
                let dist = self.dist.as_ref().expect("matrix present");
                -mmj_kmeans_loss_soft_matrix(dist, labels, p_max)
            }
        }
    }
}

/// Squared Euclidean residual sum used by the Lloyd's baseline; exposed
/// so the two loss routes stay comparable.
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    let d = euclidean(a, b);
    d * d
}
