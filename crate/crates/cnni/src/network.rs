//! Feed-forward network with a flat, coordinate-addressable parameter vector.
//!
//! The network maps a d-dimensional point to `K_out` output values. Hard
//! labels come from the argmax of the outputs, soft labels from a softmax
//! head. Parameters live in one flat vector so derivative-free optimizers
//! can perturb a single coordinate at a time.

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-layer activation. Only tanh is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
}

/// Output-layer treatment: raw affine values or softmax probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    #[default]
    Raw,
    Softmax,
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Head::Raw => write!(f, "raw"),
            Head::Softmax => write!(f, "softmax"),
        }
    }
}

/// Layer sizes plus activation choices. `sizes[0]` is the input dimension,
/// `sizes[last]` the number of output neurons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    sizes: Vec<usize>,
    hidden_activation: Activation,
    head: Head,
}

impl LayerSpec {
    pub fn new(sizes: Vec<usize>, head: Head) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least input and output layers, got {} sizes",
                sizes.len()
            )));
        }
        if let Some(pos) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidSpec(format!("layer {pos} has zero neurons")));
        }
        Ok(LayerSpec {
            sizes,
            hidden_activation: Activation::Tanh,
            head,
        })
    }

    /// Stock shapes used by the experiment harness, from the smallest
    /// (a single affine map) to two moderately wide hidden layers.
    pub fn preset(name: char, input_dim: usize, outputs: usize) -> Result<Self> {
        let sizes = match name.to_ascii_lowercase() {
            'a' => vec![input_dim, outputs],
            'b' => vec![input_dim, 10, outputs],
            'c' => vec![input_dim, 20, 20, outputs],
            'd' => vec![input_dim, 40, 40, outputs],
            other => {
                return Err(Error::InvalidSpec(format!("unknown preset '{other}'")));
            }
        };
        LayerSpec::new(sizes, Head::Raw)
    }

    pub fn with_head(mut self, head: Head) -> Self {
        self.head = head;
        self
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("spec has at least two layers")
    }

    /// Total number of weights and biases:
    /// sum over layers of `sizes[i] * sizes[i+1] + sizes[i+1]`.
    pub fn parameter_count(&self) -> usize {
        self.sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// A network is a spec plus a flat parameter vector, ordered layer by
/// layer with each layer's weights (row-major by output neuron) followed
/// by its biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: LayerSpec,
    params: Vec<f64>,
}

/// Reusable activation buffers for `forward_into`. One instance per
/// training loop avoids an allocation per forward pass.
#[derive(Debug, Default)]
pub struct Scratch {
    cur: Vec<f64>,
    next: Vec<f64>,
}

impl Network {
    /// All parameters zero.
    pub fn zeroed(spec: LayerSpec) -> Self {
        let params = vec![0.0; spec.parameter_count()];
        Network { spec, params }
    }

    /// Every parameter drawn i.i.d. uniform on [-1, 1] from the seed.
    pub fn init_random(spec: LayerSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..spec.parameter_count())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        Network { spec, params }
    }

    pub fn with_params(spec: LayerSpec, params: Vec<f64>) -> Result<Self> {
        if params.len() != spec.parameter_count() {
            return Err(Error::InvalidSpec(format!(
                "expected {} parameters, got {}",
                spec.parameter_count(),
                params.len()
            )));
        }
        Ok(Network { spec, params })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn get_param(&self, index: usize) -> Result<f64> {
        self.params.get(index).copied().ok_or(Error::ParamIndex {
            index,
            count: self.params.len(),
        })
    }

    /// Write exactly one coordinate; every other parameter is untouched.
    pub fn set_param(&mut self, index: usize, value: f64) -> Result<()> {
        let count = self.params.len();
        match self.params.get_mut(index) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(Error::ParamIndex { index, count }),
        }
    }

    /// Forward pass: affine-then-tanh per hidden layer, affine for the
    /// last layer, then softmax iff the head is softmax.
    pub fn forward(&self, point: &[f64]) -> Result<Vec<f64>> {
        let mut scratch = Scratch::default();
        self.forward_into(point, &mut scratch)?;
        Ok(scratch.cur.clone())
    }

    /// Allocation-free forward pass; the output lives in the returned slice
    /// until the scratch is reused.
    pub fn forward_into<'s>(&self, point: &[f64], scratch: &'s mut Scratch) -> Result<&'s [f64]> {
        let sizes = self.spec.sizes();
        if point.len() != sizes[0] {
            return Err(Error::DimensionMismatch {
                expected: sizes[0],
                actual: point.len(),
            });
        }

        scratch.cur.clear();
        scratch.cur.extend_from_slice(point);

        let layers = sizes.len() - 1;
        let mut offset = 0;
        for layer in 0..layers {
            let (in_dim, out_dim) = (sizes[layer], sizes[layer + 1]);
            let weights = &self.params[offset..offset + in_dim * out_dim];
            let biases = &self.params[offset + in_dim * out_dim..offset + in_dim * out_dim + out_dim];
            offset += in_dim * out_dim + out_dim;

            scratch.next.clear();
            for o in 0..out_dim {
                let row = &weights[o * in_dim..(o + 1) * in_dim];
                let mut z = biases[o];
                for (w, x) in row.iter().zip(scratch.cur.iter()) {
                    z += w * x;
                }
                scratch.next.push(z);
            }
            let last = layer + 1 == layers;
            if !last {
                match self.spec.hidden_activation() {
                    Activation::Tanh => {
                        for z in scratch.next.iter_mut() {
                            *z = z.tanh();
                        }
                    }
                }
            } else if self.spec.head() == Head::Softmax {
                softmax_in_place(&mut scratch.next);
            }
            std::mem::swap(&mut scratch.cur, &mut scratch.next);
        }
        Ok(&scratch.cur)
    }

    /// Index of the maximum output; ties break to the lowest index.
    pub fn hard_label(&self, point: &[f64]) -> Result<usize> {
        let mut scratch = Scratch::default();
        let out = self.forward_into(point, &mut scratch)?;
        Ok(argmax(out))
    }

    /// The softmax output vector. Rejected when the head is raw.
    pub fn soft_label(&self, point: &[f64]) -> Result<Vec<f64>> {
        if self.spec.head() != Head::Softmax {
            return Err(Error::SoftHeadRequired);
        }
        self.forward(point)
    }

    /// Forward applied point-wise; the output vectors are the coordinates
    /// of the transformed points.
    pub fn transform(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut scratch = Scratch::default();
        points
            .iter()
            .map(|p| self.forward_into(p, &mut scratch).map(<[f64]>::to_vec))
            .collect()
    }
}

/// First index of the maximum value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

/// On-disk model document. Parameters are serialized as JSON numbers with
/// shortest round-trip formatting, so save/load is bit-exact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub head: Head,
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_metadata: Option<TrainingMetadata>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub optimizer: String,
    pub steps: u64,
    pub best_value: f64,
}

impl ModelFile {
    pub fn from_network(net: &Network) -> Self {
        ModelFile {
            sizes: net.spec().sizes().to_vec(),
            hidden_activation: net.spec().hidden_activation(),
            head: net.spec().head(),
            params: net.params().to_vec(),
            seed: None,
            objective: None,
            training_metadata: None,
        }
    }

    pub fn to_network(&self) -> Result<Network> {
        let spec = LayerSpec::new(self.sizes.clone(), self.head)?;
        Network::with_params(spec, self.params.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(sizes: &[usize], head: Head) -> LayerSpec {
        LayerSpec::new(sizes.to_vec(), head).unwrap()
    }

    #[test]
    fn parameter_count_matches_sum_formula() {
        assert_eq!(spec(&[2, 80, 80, 80, 10], Head::Softmax).parameter_count(), 14_010);
        assert_eq!(spec(&[2, 3], Head::Raw).parameter_count(), 9);
        // hand evaluation: (2*80+80) + (80*80+80) + (80*80+80) + (80*3+3)
        assert_eq!(spec(&[2, 80, 80, 80, 3], Head::Raw).parameter_count(), 13_443);
    }

    #[test]
    fn spec_validation_rejects_degenerate_shapes() {
        assert!(LayerSpec::new(vec![2], Head::Raw).is_err());
        assert!(LayerSpec::new(vec![2, 0, 3], Head::Raw).is_err());
    }

    #[test]
    fn zero_params_raw_head_outputs_zeros() {
        let net = Network::zeroed(spec(&[2, 4, 3], Head::Raw));
        let out = net.forward(&[0.3, -1.7]).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_params_softmax_head_is_uniform() {
        let net = Network::zeroed(spec(&[2, 4, 4], Head::Softmax));
        let out = net.forward(&[5.0, -2.0]).unwrap();
        for v in &out {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn single_layer_identity_affine() {
        // [1,1] net, w = 1, b = 0: no hidden layer, so no tanh anywhere.
        let net = Network::with_params(spec(&[1, 1], Head::Raw), vec![1.0, 0.0]).unwrap();
        assert_eq!(net.forward(&[0.5]).unwrap(), vec![0.5]);
    }

    #[test]
    fn softmax_of_hand_logits() {
        // Output logits (0, 0, ln 2) -> (0.25, 0.25, 0.5). A [1,3] net with
        // zero weights and biases as the logits produces them directly.
        let params = vec![0.0, 0.0, 0.0, 0.0, 0.0, 2.0f64.ln()];
        let net = Network::with_params(spec(&[1, 3], Head::Softmax), params).unwrap();
        let out = net.soft_label(&[0.0]).unwrap();
        assert!((out[0] - 0.25).abs() < 1e-15);
        assert!((out[1] - 0.25).abs() < 1e-15);
        assert!((out[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn soft_label_rejected_for_raw_head() {
        let net = Network::zeroed(spec(&[1, 2], Head::Raw));
        assert!(matches!(net.soft_label(&[0.0]), Err(Error::SoftHeadRequired)));
    }

    #[test]
    fn hard_label_breaks_ties_to_lowest_index() {
        assert_eq!(argmax(&[0.1, 0.9]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        let net = Network::zeroed(spec(&[2, 3], Head::Raw));
        for p in [[0.0, 0.0], [1.0, -3.0], [5.5, 2.0]] {
            assert_eq!(net.hard_label(&p).unwrap(), 0);
        }
    }

    #[test]
    fn set_param_touches_exactly_one_coordinate() {
        let mut net = Network::init_random(spec(&[2, 3, 2], Head::Raw), 7);
        let before = net.params().to_vec();
        let old = net.get_param(5).unwrap();
        net.set_param(5, 42.0).unwrap();
        assert_eq!(net.get_param(5).unwrap(), 42.0);
        for (i, (a, b)) in before.iter().zip(net.params()).enumerate() {
            if i != 5 {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        net.set_param(5, old).unwrap();
        assert_eq!(
            before.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            net.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn param_index_out_of_range_rejected() {
        let mut net = Network::zeroed(spec(&[1, 1], Head::Raw));
        assert!(net.get_param(2).is_err());
        assert!(net.set_param(2, 1.0).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let net = Network::zeroed(spec(&[2, 2], Head::Raw));
        assert!(matches!(
            net.forward(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn transform_maps_forward_pointwise() {
        let net = Network::init_random(spec(&[2, 4, 3], Head::Softmax), 3);
        let pts = vec![vec![0.1, 0.2], vec![-1.0, 2.0]];
        let outs = net.transform(&pts).unwrap();
        assert_eq!(outs.len(), 2);
        for (p, o) in pts.iter().zip(&outs) {
            assert_eq!(o, &net.forward(p).unwrap());
        }
    }

    #[test]
    fn init_is_deterministic_and_in_range() {
        let a = Network::init_random(spec(&[2, 5, 3], Head::Raw), 11);
        let b = Network::init_random(spec(&[2, 5, 3], Head::Raw), 11);
        assert_eq!(a.params(), b.params());
        assert!(a.params().iter().all(|p| (-1.0..=1.0).contains(p)));
        let c = Network::init_random(spec(&[2, 5, 3], Head::Raw), 12);
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn model_file_round_trip_is_bit_exact() {
        let net = Network::init_random(spec(&[2, 7, 4], Head::Softmax), 99);
        let mut file = ModelFile::from_network(&net);
        file.seed = Some(99);
        file.objective = Some("sc".to_string());
        let text = serde_json::to_string(&file).unwrap();
        let back: ModelFile = serde_json::from_str(&text).unwrap();
        let net2 = back.to_network().unwrap();
        assert_eq!(
            net.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            net2.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let point = [0.37, -2.11];
        assert_eq!(
            net.forward(&point).unwrap(),
            net2.forward(&point).unwrap()
        );
    }

    #[test]
    fn presets_have_expected_shapes() {
        assert_eq!(LayerSpec::preset('a', 2, 3).unwrap().sizes(), &[2, 3]);
        assert_eq!(LayerSpec::preset('b', 2, 3).unwrap().sizes(), &[2, 10, 3]);
        assert_eq!(LayerSpec::preset('c', 2, 4).unwrap().sizes(), &[2, 20, 20, 4]);
        assert_eq!(LayerSpec::preset('d', 3, 2).unwrap().sizes(), &[3, 40, 40, 2]);
        assert!(LayerSpec::preset('z', 2, 2).is_err());
    }
}
