//! Euclidean and min-max-jump (minimax-path) distances.
//!
//! The min-max-jump distance between two points is the minimum, over all
//! paths routed through a *context* point set, of the maximum Euclidean
//! edge length on the path. It equals the maximum edge weight on the path
//! between the two points in a minimum spanning tree of the complete
//! Euclidean graph, which is how `mmj_matrix` computes it. `mmj_oracle`
//! is an independent cubic dynamic-programming route kept for testing.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Largest point count accepted by the cubic oracle.
pub const ORACLE_MAX_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Euclidean,
    Mmj,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Mmj => "mmj",
        }
    }
}

/// Symmetric pairwise-distance matrix with zero diagonal. `context_id`
/// records which point set served as the path context (for MMJ) or as
/// the point set itself (for Euclidean).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
    metric: Metric,
    context_id: u64,
}

impl DistanceMatrix {
    fn new(n: usize, values: Vec<f64>, metric: Metric, context_id: u64) -> Self {
        debug_assert_eq!(values.len(), n * n);
        DistanceMatrix {
            n,
            values,
            metric,
            context_id,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn context_id(&self) -> u64 {
        self.context_id
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Restriction to a subset of the rows/columns, keeping metric and
    /// context provenance.
    pub fn submatrix(&self, indices: &[usize]) -> DistanceMatrix {
        let m = indices.len();
        let mut values = Vec::with_capacity(m * m);
        for &i in indices {
            for &j in indices {
                values.push(self.get(i, j));
            }
        }
        DistanceMatrix::new(m, values, self.metric, self.context_id)
    }

    /// Debug dump: a header line `n,metric`, then the matrix row-major.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("{},{}\n", self.n, self.metric.name()));
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| self.get(i, j).to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Identifier of a point set, hashed from the exact coordinate bits.
pub fn context_id(points: &[Vec<f64>]) -> u64 {
    let mut hasher = DefaultHasher::new();
    points.len().hash(&mut hasher);
    for p in points {
        p.len().hash(&mut hasher);
        for x in p {
            x.to_bits().hash(&mut hasher);
        }
    }
    hasher.finish()
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn validate_points(points: &[Vec<f64>]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidConfig("empty point set".to_string()));
    }
    let dim = points[0].len();
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
    }
    Ok(())
}

/// Pairwise L2 distances.
pub fn euclidean_matrix(points: &[Vec<f64>]) -> Result<DistanceMatrix> {
    validate_points(points)?;
    let n = points.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&points[i], &points[j]);
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix::new(
        n,
        values,
        Metric::Euclidean,
        context_id(points),
    ))
}

/// Min-max-jump distances of `points` computed under the path context
/// `context`. Every requested point must occur in the context.
pub fn mmj_matrix(points: &[Vec<f64>], context: &[Vec<f64>]) -> Result<DistanceMatrix> {
    let ctx = MmjContext::new(context)?;
    ctx.submatrix_for(points)
}

/// Precomputed min-max-jump closure over one context. Training reuses a
/// single context across millions of objective evaluations: labels change,
/// distances do not.
#[derive(Debug, Clone)]
pub struct MmjContext {
    points: Vec<Vec<f64>>,
    matrix: DistanceMatrix,
}

impl MmjContext {
    pub fn new(context: &[Vec<f64>]) -> Result<Self> {
        validate_points(context)?;
        let n = context.len();
        if n < 2 {
            return Err(Error::InvalidConfig(
                "mmj context needs at least 2 points".to_string(),
            ));
        }

        // Prim's algorithm on the complete Euclidean graph. Scanning
        // vertices in index order with strict comparisons gives the
        // lowest-index tie-break on equal-weight edges.
        let mut in_tree = vec![false; n];
        let mut key = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut edge_weight = vec![0.0; n];
        key[0] = 0.0;
        for _ in 0..n {
            let mut u = usize::MAX;
            for v in 0..n {
                if !in_tree[v] && (u == usize::MAX || key[v] < key[u]) {
                    u = v;
                }
            }
            in_tree[u] = true;
            edge_weight[u] = key[u];
            for v in 0..n {
                if !in_tree[v] {
                    let w = euclidean(&context[u], &context[v]);
                    if w < key[v] {
                        key[v] = w;
                        parent[v] = u;
                    }
                }
            }
        }

        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for v in 1..n {
            let u = parent[v];
            adjacency[u].push((v, edge_weight[v]));
            adjacency[v].push((u, edge_weight[v]));
        }

        // Maximum edge weight on the unique tree path, one traversal per
        // source.
        let mut values: Vec<f64> = vec![0.0; n * n];
        let mut stack = Vec::with_capacity(n);
        let mut visited = vec![false; n];
        for s in 0..n {
            visited.iter_mut().for_each(|v| *v = false);
            visited[s] = true;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &(v, w) in &adjacency[u] {
                    if !visited[v] {
                        visited[v] = true;
                        values[s * n + v] = values[s * n + u].max(w);
                        stack.push(v);
                    }
                }
            }
        }

        let matrix = DistanceMatrix::new(n, values, Metric::Mmj, context_id(context));
        Ok(MmjContext {
            points: context.to_vec(),
            matrix,
        })
    }

    /// The full context-by-context matrix.
    pub fn matrix(&self) -> &DistanceMatrix {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Locate each point in the context by exact coordinate equality.
    pub fn locate(&self, points: &[Vec<f64>]) -> Result<Vec<usize>> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                self.points
                    .iter()
                    .position(|c| c == p)
                    .ok_or(Error::PointNotInContext(i))
            })
            .collect()
    }

    /// Matrix restricted to the given context indices.
    pub fn submatrix(&self, indices: &[usize]) -> DistanceMatrix {
        self.matrix.submatrix(indices)
    }

    /// Matrix restricted to the given points, located by equality.
    pub fn submatrix_for(&self, points: &[Vec<f64>]) -> Result<DistanceMatrix> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("empty point set".to_string()));
        }
        let indices = self.locate(points)?;
        Ok(self.submatrix(&indices))
    }
}

/// Cubic test oracle: the minimax closure
/// `d[i][j] <- min(d[i][j], max(d[i][k], d[k][j]))` iterated to a fixpoint
/// over the Euclidean base matrix. Must equal `mmj_matrix` exactly.
pub fn mmj_oracle(points: &[Vec<f64>]) -> Result<DistanceMatrix> {
    if points.len() > ORACLE_MAX_POINTS {
        return Err(Error::InvalidConfig(format!(
            "oracle limited to {ORACLE_MAX_POINTS} points, got {}",
            points.len()
        )));
    }
    let base = euclidean_matrix(points)?;
    let n = base.n;
    let mut values = base.values;
    loop {
        let mut changed = false;
        for k in 0..n {
            for i in 0..n {
                let dik = values[i * n + k];
                for j in 0..n {
                    let alt = dik.max(values[k * n + j]);
                    if alt < values[i * n + j] {
                        values[i * n + j] = alt;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(DistanceMatrix::new(n, values, Metric::Mmj, context_id(points)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts1d(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn euclidean_matrix_basics() {
        let m = euclidean_matrix(&pts1d(&[0.0, 3.0])).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
        assert_eq!(m.get(0, 0), 0.0);

        let same = euclidean_matrix(&pts1d(&[2.0, 2.0, 2.0])).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(same.get(i, j), 0.0);
            }
        }

        let tri = euclidean_matrix(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(tri.get(0, 1), 5.0);
    }

    #[test]
    fn non_finite_input_rejected() {
        let err = euclidean_matrix(&[vec![0.0], vec![f64::NAN]]);
        assert!(matches!(err, Err(Error::NonFinite(1))));
        assert!(mmj_matrix(&[vec![0.0]], &[vec![0.0], vec![f64::INFINITY]]).is_err());
    }

    #[test]
    fn mmj_chain_takes_bottleneck_edge() {
        let ctx = pts1d(&[0.0, 1.0, 2.0, 10.0]);
        let m = mmj_matrix(&ctx, &ctx).unwrap();
        // Verified against the cubic oracle below; the direct jump 0 -> 2
        // costs 2, but hopping through 1 costs 1.
        assert_eq!(m.get(0, 2), 1.0);
        // The 2 -> 10 gap is the bottleneck on every path to 10.
        assert_eq!(m.get(0, 3), 8.0);
        for i in 0..4 {
            assert_eq!(m.get(i, i), 0.0);
        }
        let oracle = mmj_oracle(&ctx).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.get(i, j), oracle.get(i, j));
            }
        }
    }

    #[test]
    fn mmj_subset_under_larger_context() {
        let ctx = pts1d(&[0.0, 1.0, 2.0, 10.0]);
        let sub = mmj_matrix(&pts1d(&[0.0, 10.0]), &ctx).unwrap();
        assert_eq!(sub.n(), 2);
        assert_eq!(sub.get(0, 1), 8.0);
        assert_eq!(sub.context_id(), context_id(&ctx));
    }

    #[test]
    fn point_missing_from_context_rejected() {
        let ctx = pts1d(&[0.0, 1.0]);
        let err = mmj_matrix(&pts1d(&[0.5]), &ctx);
        assert!(matches!(err, Err(Error::PointNotInContext(0))));
    }

    #[test]
    fn context_needs_two_points() {
        assert!(MmjContext::new(&pts1d(&[1.0])).is_err());
    }

    #[test]
    fn oracle_rejects_large_inputs() {
        let pts = pts1d(&vec![0.0; ORACLE_MAX_POINTS + 1]);
        assert!(mmj_oracle(&pts).is_err());
    }

    #[test]
    fn submatrix_preserves_provenance() {
        let pts = pts1d(&[0.0, 5.0, 6.0]);
        let m = euclidean_matrix(&pts).unwrap();
        let sub = m.submatrix(&[2, 0]);
        assert_eq!(sub.n(), 2);
        assert_eq!(sub.get(0, 1), 6.0);
        assert_eq!(sub.metric(), Metric::Euclidean);
        assert_eq!(sub.context_id(), m.context_id());
    }

    #[test]
    fn matrix_csv_dump_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = euclidean_matrix(&pts1d(&[0.0, 2.0])).unwrap();
        m.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("2,euclidean"));
        assert_eq!(lines.next(), Some("0,2"));
        assert_eq!(lines.next(), Some("2,0"));
    }
}
