//! Synthetic dataset generators and CSV ingestion.
//!
//! CSV schema: `x1,...,xd[,label]` per row, `#`-prefixed comment lines
//! ignored, header row optional. Coordinates are written with shortest
//! round-trip formatting, so save followed by load reproduces them
//! exactly.

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// N points in d dimensions with optional ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub points: Vec<Vec<f64>>,
    pub truth: Option<Vec<usize>>,
    pub name: String,
    pub seed: Option<u64>,
}

impl DataSet {
    pub fn new(points: Vec<Vec<f64>>, truth: Option<Vec<usize>>, name: &str) -> Result<Self> {
        let data = DataSet {
            points,
            truth,
            name: name.to_string(),
            seed: None,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidConfig("dataset has no points".to_string()));
        }
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::InvalidConfig("dataset has zero dimensions".to_string()));
        }
        for (i, p) in self.points.iter().enumerate() {
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
        if let Some(truth) = &self.truth {
            if truth.len() != self.points.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.points.len(),
                    actual: truth.len(),
                });
            }
        }
        Ok(())
    }
}

fn unit_normal() -> Normal<f64> {
    Normal::new(0.0, 1.0).expect("unit deviation is valid")
}

/// Isotropic Gaussian blobs. Labels are assigned round-robin, so the k
/// groups differ in size by at most one. When `centers` is `None`, k
/// centers are drawn uniformly from [-10, 10] per axis (2-D).
pub fn gen_blobs(
    n: usize,
    k: usize,
    centers: Option<&[Vec<f64>]>,
    spread: f64,
    seed: u64,
) -> Result<DataSet> {
    if k == 0 || n < k {
        return Err(Error::InvalidConfig(format!(
            "need n >= k >= 1, got n={n}, k={k}"
        )));
    }
    if !spread.is_finite() || spread < 0.0 {
        return Err(Error::InvalidConfig("spread must be finite and >= 0".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = match centers {
        Some(list) => {
            if list.len() != k {
                return Err(Error::InvalidConfig(format!(
                    "expected {k} centers, got {}",
                    list.len()
                )));
            }
            list.to_vec()
        }
        None => (0..k)
            .map(|_| {
                (0..2)
                    .map(|_| rng.random_range(-10.0..=10.0))
                    .collect()
            })
            .collect(),
    };
    let normal = unit_normal();
    let mut points = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % k;
        let point = centers[label]
            .iter()
            .map(|c| c + spread * normal.sample(&mut rng))
            .collect();
        points.push(point);
        truth.push(label);
    }
    let mut data = DataSet::new(points, Some(truth), "blobs")?;
    data.seed = Some(seed);
    Ok(data)
}

/// Two interleaving half-circles with Gaussian noise.
pub fn gen_moons(n: usize, noise: f64, seed: u64) -> Result<DataSet> {
    if n < 2 {
        return Err(Error::InvalidConfig("moons need n >= 2".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = unit_normal();
    let n_outer = n - n / 2;
    let n_inner = n / 2;
    let mut points = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n_outer {
        let t = std::f64::consts::PI * i as f64 / (n_outer.max(2) - 1) as f64;
        points.push(vec![t.cos(), t.sin()]);
        truth.push(0);
    }
    for i in 0..n_inner {
        let t = std::f64::consts::PI * i as f64 / (n_inner.max(2) - 1) as f64;
        points.push(vec![1.0 - t.cos(), 1.0 - t.sin() - 0.5]);
        truth.push(1);
    }
    add_noise(&mut points, noise, &normal, &mut rng);
    let mut data = DataSet::new(points, Some(truth), "moons")?;
    data.seed = Some(seed);
    Ok(data)
}

/// Two concentric circles; `gap` is the inner-to-outer radius ratio.
pub fn gen_circles(n: usize, noise: f64, gap: f64, seed: u64) -> Result<DataSet> {
    if n < 2 {
        return Err(Error::InvalidConfig("circles need n >= 2".to_string()));
    }
    if !(0.0..1.0).contains(&gap) || gap <= 0.0 {
        return Err(Error::InvalidConfig(
            "gap must lie strictly between 0 and 1".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = unit_normal();
    let n_outer = n - n / 2;
    let n_inner = n / 2;
    let mut points = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n_outer {
        let t = std::f64::consts::TAU * i as f64 / n_outer as f64;
        points.push(vec![t.cos(), t.sin()]);
        truth.push(0);
    }
    for i in 0..n_inner {
        let t = std::f64::consts::TAU * i as f64 / n_inner as f64;
        points.push(vec![gap * t.cos(), gap * t.sin()]);
        truth.push(1);
    }
    add_noise(&mut points, noise, &normal, &mut rng);
    let mut data = DataSet::new(points, Some(truth), "circles")?;
    data.seed = Some(seed);
    Ok(data)
}

/// Three Gaussian blobs sheared by a fixed linear map, giving elongated
/// anisotropic clusters.
pub fn gen_aniso(n: usize, seed: u64) -> Result<DataSet> {
    let blobs = gen_blobs(
        n,
        3,
        Some(&[vec![-6.0, -6.0], vec![0.0, 0.0], vec![6.0, 6.0]]),
        1.0,
        seed,
    )?;
    let shear = [[0.6, -0.6], [-0.4, 0.8]];
    let points = blobs
        .points
        .iter()
        .map(|p| {
            vec![
                shear[0][0] * p[0] + shear[0][1] * p[1],
                shear[1][0] * p[0] + shear[1][1] * p[1],
            ]
        })
        .collect();
    let mut data = DataSet::new(points, blobs.truth, "aniso")?;
    data.seed = Some(seed);
    Ok(data)
}

/// Two interleaved Archimedean spiral arms.
pub fn gen_spirals(n: usize, turns: f64, noise: f64, seed: u64) -> Result<DataSet> {
    if n < 2 {
        return Err(Error::InvalidConfig("spirals need n >= 2".to_string()));
    }
    if !turns.is_finite() || turns <= 0.0 {
        return Err(Error::InvalidConfig("turns must be positive".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = unit_normal();
    let n_first = n - n / 2;
    let n_second = n / 2;
    let t_start = std::f64::consts::FRAC_PI_2;
    let t_end = t_start + std::f64::consts::TAU * turns;
    let mut points = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for (arm, count) in [(0usize, n_first), (1usize, n_second)] {
        let sign = if arm == 0 { 1.0 } else { -1.0 };
        for i in 0..count {
            let t = t_start + (t_end - t_start) * i as f64 / (count.max(2) - 1) as f64;
            let r = t / t_end;
            points.push(vec![sign * r * t.cos(), sign * r * t.sin()]);
            truth.push(arm);
        }
    }
    add_noise(&mut points, noise, &normal, &mut rng);
    let mut data = DataSet::new(points, Some(truth), "spirals")?;
    data.seed = Some(seed);
    Ok(data)
}

fn add_noise(points: &mut [Vec<f64>], noise: f64, normal: &Normal<f64>, rng: &mut ChaCha8Rng) {
    if noise == 0.0 {
        return;
    }
    for p in points.iter_mut() {
        for x in p.iter_mut() {
            *x += noise * normal.sample(rng);
        }
    }
}

/// Load `x1,...,xd[,label]` rows. With `has_truth` the trailing column is
/// parsed as an integer label.
pub fn load_csv(path: &Path, has_truth: bool) -> Result<DataSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let mut points = Vec::new();
    let mut truth = if has_truth { Some(Vec::new()) } else { None };
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|cell| cell.is_empty()) {
            continue;
        }
        if first && record.get(0).map(|c| c.parse::<f64>().is_err()) == Some(true) {
            // Header row: first cell is not a number.
            first = false;
            continue;
        }
        first = false;
        let cells: Vec<&str> = record.iter().collect();
        let coord_count = cells.len() - usize::from(has_truth);
        if coord_count == 0 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line,
                message: "row has no coordinate columns".to_string(),
            });
        }
        if let Some(prev) = points.first().map(|p: &Vec<f64>| p.len()) {
            if coord_count != prev {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line,
                    message: format!("expected {prev} coordinates, found {coord_count}"),
                });
            }
        }
        let mut coords = Vec::with_capacity(coord_count);
        for (col, cell) in cells[..coord_count].iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line,
                message: format!("column {} is not a number: '{cell}'", col + 1),
            })?;
            coords.push(value);
        }
        if let Some(truth) = truth.as_mut() {
            let cell = cells[coord_count];
            let label: usize = cell.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line,
                message: format!("label column is not a non-negative integer: '{cell}'"),
            })?;
            truth.push(label);
        }
        points.push(coords);
    }
    if points.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: "no data rows".to_string(),
        });
    }
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().to_string());
    DataSet::new(points, truth, &name)
}

/// Write rows `x1,...,xd[,label]`, one per point.
pub fn save_csv(data: &DataSet, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for (i, p) in data.points.iter().enumerate() {
        let mut row: Vec<String> = p.iter().map(f64::to_string).collect();
        if let Some(truth) = &data.truth {
            row.push(truth[i].to_string());
        }
        writer.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = match e.position() {
        Some(pos) => pos.line(),
        None => 0,
    };
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: e.to_string(),
    }
}
