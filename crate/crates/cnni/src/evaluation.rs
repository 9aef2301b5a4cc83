//! Downstream of training: label prediction, decision-boundary grids,
//! external validation (adjusted Rand index), the Lloyd's baseline, and
//! model selection over candidate architectures.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::DataSet;
use crate::distance::euclidean;
use crate::error::{Error, Result};
use crate::network::{argmax, Head, LayerSpec, Network, Scratch};
use crate::objectives::{kmeans_loss, Assignment, WORST};
use crate::optimizers::{train, OptimizerKind, TrainConfig};

/// Hard (and, under a softmax head, soft) labels for a point slice.
pub fn predict_points(net: &Network, points: &[Vec<f64>]) -> Result<Assignment> {
    let mut scratch = Scratch::default();
    predict_with_scratch(net, points, &mut scratch)
}

/// Buffer-reusing variant for the training hot loop.
pub fn predict_with_scratch(
    net: &Network,
    points: &[Vec<f64>],
    scratch: &mut Scratch,
) -> Result<Assignment> {
    match net.spec().head() {
        Head::Softmax => {
            let soft = points
                .iter()
                .map(|p| net.forward_into(p, scratch).map(<[f64]>::to_vec))
                .collect::<Result<Vec<_>>>()?;
            Ok(Assignment::from_soft(soft))
        }
        Head::Raw => {
            let hard = points
                .iter()
                .map(|p| net.forward_into(p, scratch).map(argmax))
                .collect::<Result<Vec<_>>>()?;
            Ok(Assignment::from_hard(hard))
        }
    }
}

pub fn predict(net: &Network, data: &DataSet) -> Result<Assignment> {
    predict_points(net, &data.points)
}

/// Predicted labels over a regular 2-D lattice spanning the data bounding
/// box plus a 10% margin per axis.
#[derive(Debug, Clone)]
pub struct BoundaryGrid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Cells per axis (x, y).
    pub resolution: (usize, usize),
    /// Row-major by y: `labels[iy * resolution.0 + ix]`.
    pub labels: Vec<usize>,
}

impl BoundaryGrid {
    pub fn cells(&self) -> usize {
        self.resolution.0 * self.resolution.1
    }

    /// Coordinates of the center of cell (ix, iy).
    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        let x = self.x_range.0
            + (ix as f64 + 0.5) * (self.x_range.1 - self.x_range.0) / self.resolution.0 as f64;
        let y = self.y_range.0
            + (iy as f64 + 0.5) * (self.y_range.1 - self.y_range.0) / self.resolution.1 as f64;
        (x, y)
    }

    pub fn label(&self, ix: usize, iy: usize) -> usize {
        self.labels[iy * self.resolution.0 + ix]
    }

    /// `x,y,label` rows, one per cell.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for iy in 0..self.resolution.1 {
            for ix in 0..self.resolution.0 {
                let (x, y) = self.cell_center(ix, iy);
                out.push_str(&format!("{x},{y},{}\n", self.label(ix, iy)));
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Colored-cell background with an optional labeled scatter overlay.
    /// Presentation only.
    pub fn write_svg(&self, path: &Path, overlay: Option<(&DataSet, &Assignment)>) -> Result<()> {
        const SIZE: f64 = 600.0;
        let (rx, ry) = self.resolution;
        let cell_w = SIZE / rx as f64;
        let cell_h = SIZE / ry as f64;
        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
        ));
        for iy in 0..ry {
            for ix in 0..rx {
                let color = palette(self.label(ix, iy));
                // SVG y grows downward; flip the row.
                let px = ix as f64 * cell_w;
                let py = (ry - 1 - iy) as f64 * cell_h;
                svg.push_str(&format!(
                    "<rect x=\"{px:.2}\" y=\"{py:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{color}\" fill-opacity=\"0.35\"/>\n",
                    cell_w + 0.5,
                    cell_h + 0.5,
                ));
            }
        }
        if let Some((data, assignment)) = overlay {
            let to_px = |x: f64| (x - self.x_range.0) / (self.x_range.1 - self.x_range.0) * SIZE;
            let to_py = |y: f64| SIZE - (y - self.y_range.0) / (self.y_range.1 - self.y_range.0) * SIZE;
            for (p, &label) in data.points.iter().zip(assignment.hard()) {
                svg.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\" stroke=\"black\" stroke-width=\"0.5\"/>\n",
                    to_px(p[0]),
                    to_py(p[1]),
                    palette(label),
                ));
            }
        }
        svg.push_str("</svg>\n");
        std::fs::write(path, svg).map_err(|e| Error::io(path, e))
    }
}

fn palette(label: usize) -> &'static str {
    const COLORS: [&str; 10] = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
        "#bcbd22", "#17becf",
    ];
    COLORS[label % COLORS.len()]
}

/// Label a `resolution x resolution` lattice of new points around the
/// data. Only 2-D data is supported.
pub fn decision_boundary(net: &Network, data: &DataSet, resolution: usize) -> Result<BoundaryGrid> {
    if data.dim() != 2 {
        return Err(Error::InvalidConfig(format!(
            "decision boundaries need 2-D data, got {}-D",
            data.dim()
        )));
    }
    if net.spec().input_dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: net.spec().input_dim(),
        });
    }
    if resolution == 0 {
        return Err(Error::InvalidConfig("resolution must be >= 1".to_string()));
    }

    let range = |axis: usize| {
        let lo = data.points.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let hi = data.points.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
        let margin = if hi > lo { 0.1 * (hi - lo) } else { 1.0 };
        (lo - margin, hi + margin)
    };
    let x_range = range(0);
    let y_range = range(1);

    let mut grid = BoundaryGrid {
        x_range,
        y_range,
        resolution: (resolution, resolution),
        labels: Vec::with_capacity(resolution * resolution),
    };
    let mut scratch = Scratch::default();
    for iy in 0..resolution {
        for ix in 0..resolution {
            let (x, y) = grid.cell_center(ix, iy);
            let out = net.forward_into(&[x, y], &mut scratch)?;
            grid.labels.push(argmax(out));
        }
    }
    Ok(grid)
}

/// Chance-corrected agreement between two labelings, from the
/// pair-counting contingency table. Symmetric, and invariant under
/// relabeling either side.
pub fn adjusted_rand_index(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::DimensionMismatch {
            expected: labels_a.len(),
            actual: labels_b.len(),
        });
    }
    if labels_a.is_empty() {
        return Err(Error::InvalidConfig("cannot compare empty labelings".to_string()));
    }
    let n = labels_a.len();
    if n == 1 {
        return Ok(1.0);
    }

    let comb2 = |count: usize| (count * count.saturating_sub(1)) as f64 / 2.0;

    let mut cells: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        *cells.entry((a, b)).or_insert(0) += 1;
        *rows.entry(a).or_insert(0) += 1;
        *cols.entry(b).or_insert(0) += 1;
    }
    let sum_cells: f64 = cells.values().map(|&c| comb2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| comb2(c)).sum();
    let total = comb2(n);

    let expected = sum_rows * sum_cols / total;
    let max_index = (sum_rows + sum_cols) / 2.0;
    if max_index == expected {
        // Both labelings are the same trivial partition.
        return Ok(1.0);
    }
    Ok((sum_cells - expected) / (max_index - expected))
}

/// Lloyd's iterations from random distinct-point initializations; the
/// restart with the smallest mean squared residual wins.
pub fn kmeans_baseline(data: &DataSet, k: usize, restarts: usize, seed: u64) -> Result<Assignment> {
    let n = data.n();
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!(
            "k must lie in 1..=n, got k={k} with n={n}"
        )));
    }
    if restarts == 0 {
        return Err(Error::InvalidConfig("restarts must be >= 1".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;

    for _ in 0..restarts {
        let init = rand::seq::index::sample(&mut rng, n, k).into_vec();
        let mut centroids: Vec<Vec<f64>> = init.iter().map(|&i| data.points[i].clone()).collect();
        let mut labels = vec![0usize; n];

        for iteration in 0..300 {
            let mut changed = false;
            for (i, point) in data.points.iter().enumerate() {
                let mut nearest = 0;
                let mut nearest_dist = f64::INFINITY;
                for (c, centroid) in centroids.iter().enumerate() {
                    let d = euclidean(point, centroid);
                    if d < nearest_dist {
                        nearest_dist = d;
                        nearest = c;
                    }
                }
                if labels[i] != nearest {
                    labels[i] = nearest;
                    changed = true;
                }
            }
            if !changed && iteration > 0 {
                break;
            }
            // Update step; clusters that lost all members keep their
            // previous centroid.
            let dim = data.dim();
            let mut sums = vec![0.0; k * dim];
            let mut counts = vec![0usize; k];
            for (point, &label) in data.points.iter().zip(&labels) {
                counts[label] += 1;
                for (j, x) in point.iter().enumerate() {
                    sums[label * dim + j] += x;
                }
            }
            for c in 0..k {
                if counts[c] > 0 {
                    for j in 0..dim {
                        centroids[c][j] = sums[c * dim + j] / counts[c] as f64;
                    }
                }
            }
        }

        let loss = kmeans_loss(&data.points, &labels);
        if best.as_ref().is_none_or(|(l, _)| loss < *l) {
            best = Some((loss, labels));
        }
    }
    Ok(Assignment::from_hard(best.expect("restarts >= 1").1))
}

/// Count and list of the labels actually used by an assignment.
pub fn active_labels(assignment: &Assignment) -> (usize, Vec<usize>) {
    let mut labels = assignment.hard().to_vec();
    labels.sort_unstable();
    labels.dedup();
    (labels.len(), labels)
}

/// One architecture/seed pair to try during model selection.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub spec: LayerSpec,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionRow {
    pub sizes: Vec<usize>,
    pub head: Head,
    pub seed: u64,
    pub best_value: f64,
    pub active_labels: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ari: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-candidate results sorted by best objective value, descending.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionReport {
    pub rows: Vec<SelectionRow>,
}

impl SelectionReport {
    pub fn best(&self) -> Option<&SelectionRow> {
        self.rows.first()
    }
}

/// Train every candidate on `data` and rank them by the best objective
/// value reached. A failing candidate keeps its row (with the error
/// message) and the remaining candidates still run.
pub fn model_select(
    data: &DataSet,
    candidates: &[Candidate],
    optimizer: OptimizerKind,
    config: &TrainConfig,
) -> Result<SelectionReport> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no candidates to select from".to_string()));
    }
    let mut rows = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let row = run_candidate(data, candidate, optimizer, config).unwrap_or_else(|e| {
            SelectionRow {
                sizes: candidate.spec.sizes().to_vec(),
                head: candidate.spec.head(),
                seed: candidate.seed,
                best_value: WORST,
                active_labels: 0,
                ari: None,
                error: Some(e.to_string()),
            }
        });
        rows.push(row);
    }
    rows.sort_by(|a, b| {
        b.best_value
            .partial_cmp(&a.best_value)
            .unwrap_or(Ordering::Equal)
    });
    Ok(SelectionReport { rows })
}

fn run_candidate(
    data: &DataSet,
    candidate: &Candidate,
    optimizer: OptimizerKind,
    config: &TrainConfig,
) -> Result<SelectionRow> {
    let mut config = config.clone();
    config.seed = candidate.seed;
    let net = Network::init_random(candidate.spec.clone(), candidate.seed);
    let outcome = train(net, data, optimizer, &config)?;
    let assignment = predict(&outcome.network, data)?;
    let (active, _) = active_labels(&assignment);
    let ari = match &data.truth {
        Some(truth) => Some(adjusted_rand_index(assignment.hard(), truth)?),
        None => None,
    };
    Ok(SelectionRow {
        sizes: candidate.spec.sizes().to_vec(),
        head: candidate.spec.head(),
        seed: candidate.seed,
        best_value: outcome.trace.best_value,
        active_labels: active,
        ari,
        error: None,
    })
}
