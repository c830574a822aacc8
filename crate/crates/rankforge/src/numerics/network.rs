//! Feed-forward scorer with manual forward/backward passes.
//!
//! Architectures are five dense layers mapping `d -> 100 -> 100 -> 100 ->
//! 100 -> 1`.  Hidden affine outputs are batch-normalized before the
//! activation; the final layer never has batchnorm.  Four architecture
//! codes select the nonlinearity and the final layer's activation:
//!
//! | code    | hidden activation | final activation |
//! |---------|-------------------|------------------|
//! | `R5`    | ReLU              | ReLU             |
//! | `CE5`   | CELU              | CELU             |
//! | `R4.L`  | ReLU              | linear           |
//! | `CE4.L` | CELU              | linear           |
//!
//! Training mode normalizes over the current batch (one query group per
//! optimizer step) and updates running statistics; evaluation mode uses the
//! running statistics, so eval scores are batch-independent.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::matrix::{axpy, dot, DenseMatrix};
use crate::error::{Error, Result};

/// Width of every hidden layer.
pub const HIDDEN_WIDTH: usize = 100;

/// Number of dense layers in the standard architectures.
const DEPTH: usize = 5;

/// Batchnorm variance floor.
const BN_EPS: f64 = 1e-5;

/// Fraction of the current batch statistic blended into the running
/// statistic each training step: `running = 0.9*running + 0.1*batch`.
const BN_MOMENTUM: f64 = 0.1;

/// CELU shape parameter.
const CELU_ALPHA: f64 = 1.0;

/// Elementwise nonlinearity applied after each (possibly normalized)
/// affine transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Celu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Celu => {
                if z >= 0.0 {
                    z
                } else {
                    CELU_ALPHA * ((z / CELU_ALPHA).exp() - 1.0)
                }
            }
            Activation::Linear => z,
        }
    }

    /// Derivative with respect to the pre-activation input.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Celu => {
                if z >= 0.0 {
                    1.0
                } else {
                    (z / CELU_ALPHA).exp()
                }
            }
            Activation::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Celu => "celu",
            Activation::Linear => "linear",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "celu" => Ok(Activation::Celu),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

/// Named five-layer architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchCode {
    R5,
    Ce5,
    R4L,
    Ce4L,
}

impl ArchCode {
    /// Layer specifications for a given input feature count.
    pub fn layer_specs(self, input_dim: usize) -> Vec<LayerSpec> {
        assert!(input_dim >= 1, "input_dim must be at least 1");
        let (hidden_act, final_act) = match self {
            ArchCode::R5 => (Activation::Relu, Activation::Relu),
            ArchCode::Ce5 => (Activation::Celu, Activation::Celu),
            ArchCode::R4L => (Activation::Relu, Activation::Linear),
            ArchCode::Ce4L => (Activation::Celu, Activation::Linear),
        };
        let mut specs = Vec::with_capacity(DEPTH);
        let mut in_dim = input_dim;
        for layer in 0..DEPTH {
            let last = layer == DEPTH - 1;
            specs.push(LayerSpec {
                in_dim,
                out_dim: if last { 1 } else { HIDDEN_WIDTH },
                activation: if last { final_act } else { hidden_act },
                batchnorm: !last,
            });
            in_dim = HIDDEN_WIDTH;
        }
        specs
    }
}

impl fmt::Display for ArchCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ArchCode::R5 => "R5",
            ArchCode::Ce5 => "CE5",
            ArchCode::R4L => "R4.L",
            ArchCode::Ce4L => "CE4.L",
        };
        f.write_str(s)
    }
}

impl FromStr for ArchCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "R5" => Ok(ArchCode::R5),
            "CE5" => Ok(ArchCode::Ce5),
            "R4.L" => Ok(ArchCode::R4L),
            "CE4.L" => Ok(ArchCode::Ce4L),
            other => Err(Error::Config(format!(
                "unknown architecture `{other}` (expected R5, CE5, R4.L, or CE4.L)"
            ))),
        }
    }
}

/// Shape and behavior of one dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub batchnorm: bool,
}

/// One dense layer's parameters and (if normalized) running statistics.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    pub(crate) spec: LayerSpec,
    /// `out_dim x in_dim`, row per output unit.
    pub(crate) weight: DenseMatrix,
    pub(crate) bias: Vec<f64>,
    /// Batchnorm scale/shift and running statistics; empty when
    /// `spec.batchnorm` is false.
    pub(crate) gamma: Vec<f64>,
    pub(crate) beta: Vec<f64>,
    pub(crate) running_mean: Vec<f64>,
    pub(crate) running_var: Vec<f64>,
}

impl Layer {
    fn new(spec: LayerSpec, rng: &mut ChaCha8Rng) -> Self {
        assert!(spec.in_dim >= 1 && spec.out_dim >= 1, "degenerate layer shape");
        let limit = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
        let mut weight = DenseMatrix::zeros(spec.out_dim, spec.in_dim);
        for w in weight.as_mut_slice() {
            *w = rng.gen_range(-limit..limit);
        }
        let (gamma, beta, running_mean, running_var) = if spec.batchnorm {
            (
                vec![1.0; spec.out_dim],
                vec![0.0; spec.out_dim],
                vec![0.0; spec.out_dim],
                vec![1.0; spec.out_dim],
            )
        } else {
            (Vec::new(), Vec::new(), Vec::new(), Vec::new())
        };
        Layer {
            spec,
            weight,
            bias: vec![0.0; spec.out_dim],
            gamma,
            beta,
            running_mean,
            running_var,
        }
    }

    /// Mutable views of the trainable tensors, in a fixed order shared
    /// with [`LayerGrads::tensor_slices`].
    pub(crate) fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![self.weight.as_mut_slice(), &mut self.bias];
        if !self.gamma.is_empty() {
            v.push(&mut self.gamma);
            v.push(&mut self.beta);
        }
        v
    }

    /// `z = x W^T + b` for a batch of rows.
    fn affine(&self, x: &DenseMatrix) -> DenseMatrix {
        let m = x.rows();
        let mut z = DenseMatrix::zeros(m, self.spec.out_dim);
        for s in 0..m {
            let xs = x.row(s);
            let zs = z.row_mut(s);
            for (o, zo) in zs.iter_mut().enumerate() {
                *zo = dot(xs, self.weight.row(o)) + self.bias[o];
            }
        }
        z
    }
}

/// Per-layer values cached by a training-mode forward pass, consumed by
/// [`Network::backward`].
#[derive(Debug)]
pub struct ForwardCache {
    batch_rows: usize,
    layers: Vec<LayerCache>,
}

#[derive(Debug)]
struct LayerCache {
    /// Input rows fed to this layer (the previous layer's activations).
    input: DenseMatrix,
    /// Values fed to the activation function (post-batchnorm if present).
    pre_act: DenseMatrix,
    /// Normalized pre-scale values, present when the layer has batchnorm.
    xhat: Option<DenseMatrix>,
    /// Per-column `1 / sqrt(var + eps)`, present when the layer has
    /// batchnorm.
    inv_std: Option<Vec<f64>>,
}

/// Gradients for one layer, shapes mirroring [`Layer`].
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub d_weight: DenseMatrix,
    pub d_bias: Vec<f64>,
    pub d_gamma: Vec<f64>,
    pub d_beta: Vec<f64>,
}

impl LayerGrads {
    /// Tensor views in the same order as [`Layer::param_slices_mut`].
    pub(crate) fn tensor_slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![self.d_weight.as_slice(), &self.d_bias];
        if !self.d_gamma.is_empty() {
            v.push(&self.d_gamma);
            v.push(&self.d_beta);
        }
        v
    }
}

/// Gradients for every layer of a network.
#[derive(Debug, Clone)]
pub struct NetworkGrads {
    pub layers: Vec<LayerGrads>,
}

/// Five-layer feed-forward scorer (or an arbitrary stack built through
/// [`Network::from_specs`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub(crate) arch: Option<ArchCode>,
    pub(crate) layers: Vec<Layer>,
}

impl Network {
    /// Standard five-layer scorer for `input_dim` features, parameters
    /// drawn uniformly from `±sqrt(6 / (fan_in + fan_out))` with the given
    /// seed; biases start at zero.
    pub fn new(arch: ArchCode, input_dim: usize, seed: u64) -> Self {
        let mut net = Self::from_specs(&arch.layer_specs(input_dim), seed);
        net.arch = Some(arch);
        net
    }

    /// Arbitrary dense stack; consecutive layer dimensions must agree.
    pub fn from_specs(specs: &[LayerSpec], seed: u64) -> Self {
        assert!(!specs.is_empty(), "network needs at least one layer");
        for pair in specs.windows(2) {
            assert_eq!(
                pair[0].out_dim, pair[1].in_dim,
                "layer dimensions do not chain"
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs.iter().map(|&s| Layer::new(s, &mut rng)).collect();
        Network { arch: None, layers }
    }

    pub fn arch(&self) -> Option<ArchCode> {
        self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().spec.out_dim
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    /// Mutable views of every trainable tensor, one inner list per layer,
    /// ordered to match [`NetworkGrads`]: weight, bias, then the
    /// normalization scale and shift when the layer is normalized.
    /// Running statistics are not trainable and are excluded.
    pub fn trainable_tensors_mut(&mut self) -> Vec<Vec<&mut [f64]>> {
        self.layers.iter_mut().map(Layer::param_slices_mut).collect()
    }

    fn check_input(&self, x: &DenseMatrix) -> Result<()> {
        assert!(x.rows() >= 1, "empty batch");
        if x.cols() != self.input_dim() {
            return Err(Error::Data(format!(
                "input has {} features but the network expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Training-mode forward pass: batch statistics for normalization,
    /// running statistics updated in place, intermediate values cached for
    /// [`Network::backward`].
    pub fn forward_train(&mut self, x: &DenseMatrix) -> Result<(DenseMatrix, ForwardCache)> {
        self.check_input(x)?;
        let m = x.rows();
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (li, layer) in self.layers.iter_mut().enumerate() {
            let z = layer.affine(&cur);
            let (pre_act, xhat, inv_std) = if layer.spec.batchnorm {
                let out_dim = layer.spec.out_dim;
                let mf = m as f64;
                let mut mean = vec![0.0; out_dim];
                let mut var = vec![0.0; out_dim];
                for s in 0..m {
                    for (j, v) in z.row(s).iter().enumerate() {
                        mean[j] += v;
                    }
                }
                for mu in &mut mean {
                    *mu /= mf;
                }
                for s in 0..m {
                    for (j, v) in z.row(s).iter().enumerate() {
                        let d = v - mean[j];
                        var[j] += d * d;
                    }
                }
                for v in &mut var {
                    *v /= mf;
                }
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
                let mut xhat = DenseMatrix::zeros(m, out_dim);
                let mut pre = DenseMatrix::zeros(m, out_dim);
                for s in 0..m {
                    for j in 0..out_dim {
                        let h = (z.get(s, j) - mean[j]) * inv_std[j];
                        xhat.set(s, j, h);
                        pre.set(s, j, layer.gamma[j] * h + layer.beta[j]);
                    }
                }
                for j in 0..out_dim {
                    layer.running_mean[j] =
                        (1.0 - BN_MOMENTUM) * layer.running_mean[j] + BN_MOMENTUM * mean[j];
                    layer.running_var[j] =
                        (1.0 - BN_MOMENTUM) * layer.running_var[j] + BN_MOMENTUM * var[j];
                }
                (pre, Some(xhat), Some(inv_std))
            } else {
                (z, None, None)
            };
            if !pre_act.all_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite pre-activation in layer {li}"
                )));
            }
            let mut act = DenseMatrix::zeros(m, layer.spec.out_dim);
            for s in 0..m {
                for (j, v) in pre_act.row(s).iter().enumerate() {
                    act.set(s, j, layer.spec.activation.apply(*v));
                }
            }
            caches.push(LayerCache {
                input: cur,
                pre_act,
                xhat,
                inv_std,
            });
            cur = act;
        }
        Ok((
            cur,
            ForwardCache {
                batch_rows: m,
                layers: caches,
            },
        ))
    }

    /// Evaluation-mode forward pass: normalization uses running
    /// statistics, nothing is mutated, each row's score is independent of
    /// the rest of the batch.
    pub fn forward_eval(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_input(x)?;
        let m = x.rows();
        let mut cur = x.clone();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = layer.affine(&cur);
            if layer.spec.batchnorm {
                for s in 0..m {
                    let row = z.row_mut(s);
                    for (j, v) in row.iter_mut().enumerate() {
                        let inv = 1.0 / (layer.running_var[j] + BN_EPS).sqrt();
                        *v = layer.gamma[j] * ((*v - layer.running_mean[j]) * inv)
                            + layer.beta[j];
                    }
                }
            }
            if !z.all_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite pre-activation in layer {li}"
                )));
            }
            for s in 0..m {
                let row = z.row_mut(s);
                for v in row.iter_mut() {
                    *v = layer.spec.activation.apply(*v);
                }
            }
            cur = z;
        }
        Ok(cur)
    }

    /// Training-mode scores for a scorer network (final layer width 1).
    pub fn score_train(&mut self, x: &DenseMatrix) -> Result<(Vec<f64>, ForwardCache)> {
        assert_eq!(self.output_dim(), 1, "scorer networks end in a width-1 layer");
        let (out, cache) = self.forward_train(x)?;
        Ok((out.as_slice().to_vec(), cache))
    }

    /// Evaluation-mode scores for a scorer network.
    pub fn score_eval(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        assert_eq!(self.output_dim(), 1, "scorer networks end in a width-1 layer");
        Ok(self.forward_eval(x)?.as_slice().to_vec())
    }

    /// Backpropagate `d_output` (gradient of some scalar loss with respect
    /// to the network output) through the cached forward pass.
    ///
    /// The cache must come from the immediately matching
    /// [`Network::forward_train`] call on this network; a cache of the
    /// wrong shape panics.
    pub fn backward(&self, cache: &ForwardCache, d_output: &DenseMatrix) -> NetworkGrads {
        assert_eq!(
            cache.layers.len(),
            self.layers.len(),
            "forward cache does not match this network"
        );
        let m = cache.batch_rows;
        assert_eq!(d_output.rows(), m, "upstream gradient batch mismatch");
        assert_eq!(
            d_output.cols(),
            self.output_dim(),
            "upstream gradient width mismatch"
        );

        let mut grads: Vec<LayerGrads> = Vec::with_capacity(self.layers.len());
        let mut d_out = d_output.clone();
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            let out_dim = layer.spec.out_dim;
            assert_eq!(lc.pre_act.cols(), out_dim, "stale forward cache");
            // Through the activation.
            let mut d_pre = DenseMatrix::zeros(m, out_dim);
            for s in 0..m {
                for j in 0..out_dim {
                    d_pre.set(
                        s,
                        j,
                        d_out.get(s, j) * layer.spec.activation.derivative(lc.pre_act.get(s, j)),
                    );
                }
            }
            // Through batchnorm (if present), producing the gradient at the
            // affine output z.
            let (d_z, d_gamma, d_beta) = if layer.spec.batchnorm {
                let xhat = lc.xhat.as_ref().expect("batchnorm cache missing");
                let inv_std = lc.inv_std.as_ref().expect("batchnorm cache missing");
                let mf = m as f64;
                let mut d_gamma = vec![0.0; out_dim];
                let mut d_beta = vec![0.0; out_dim];
                let mut sum_dxhat = vec![0.0; out_dim];
                let mut sum_dxhat_xhat = vec![0.0; out_dim];
                for s in 0..m {
                    for j in 0..out_dim {
                        let g = d_pre.get(s, j);
                        let h = xhat.get(s, j);
                        d_gamma[j] += g * h;
                        d_beta[j] += g;
                        let dxh = g * layer.gamma[j];
                        sum_dxhat[j] += dxh;
                        sum_dxhat_xhat[j] += dxh * h;
                    }
                }
                let mut d_z = DenseMatrix::zeros(m, out_dim);
                for s in 0..m {
                    for j in 0..out_dim {
                        let dxh = d_pre.get(s, j) * layer.gamma[j];
                        let h = xhat.get(s, j);
                        d_z.set(
                            s,
                            j,
                            inv_std[j] / mf
                                * (mf * dxh - sum_dxhat[j] - h * sum_dxhat_xhat[j]),
                        );
                    }
                }
                (d_z, d_gamma, d_beta)
            } else {
                (d_pre, Vec::new(), Vec::new())
            };
            // Through the affine transform.
            let mut d_weight = DenseMatrix::zeros(out_dim, layer.spec.in_dim);
            let mut d_bias = vec![0.0; out_dim];
            for s in 0..m {
                let dz_row = d_z.row(s);
                let x_row = lc.input.row(s);
                for (o, &dz) in dz_row.iter().enumerate() {
                    d_bias[o] += dz;
                    if dz != 0.0 {
                        axpy(dz, x_row, d_weight.row_mut(o));
                    }
                }
            }
            let mut d_input = DenseMatrix::zeros(m, layer.spec.in_dim);
            for s in 0..m {
                let dz_row = d_z.row(s);
                let di_row = d_input.row_mut(s);
                for (o, &dz) in dz_row.iter().enumerate() {
                    if dz != 0.0 {
                        axpy(dz, layer.weight.row(o), di_row);
                    }
                }
            }
            grads.push(LayerGrads {
                d_weight,
                d_bias,
                d_gamma,
                d_beta,
            });
            d_out = d_input;
        }
        grads.reverse();
        NetworkGrads { layers: grads }
    }

    /// Backpropagate a per-document score gradient (scorer networks).
    pub fn backward_scores(&self, cache: &ForwardCache, d_scores: &[f64]) -> NetworkGrads {
        assert_eq!(self.output_dim(), 1, "scorer networks end in a width-1 layer");
        let d = DenseMatrix::from_vec(d_scores.len(), 1, d_scores.to_vec());
        self.backward(cache, &d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn relu_values() {
        let got: Vec<f64> = [-1.0, 0.0, 2.0]
            .iter()
            .map(|&z| Activation::Relu.apply(z))
            .collect();
        assert_eq!(got, vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn celu_values() {
        assert!(approx(Activation::Celu.apply(-1.0), (-1.0f64).exp() - 1.0, 1e-15));
        assert!(approx(Activation::Celu.apply(-1.0), -0.6321, 1e-4));
        assert_eq!(Activation::Celu.apply(2.0), 2.0);
        // Continuous first derivative at zero.
        assert!(approx(Activation::Celu.derivative(-1e-12), 1.0, 1e-9));
        assert_eq!(Activation::Celu.derivative(0.0), 1.0);
    }

    #[test]
    fn identity_linear_layer_preserves_input() {
        let spec = LayerSpec {
            in_dim: 2,
            out_dim: 2,
            activation: Activation::Linear,
            batchnorm: false,
        };
        let mut net = Network::from_specs(&[spec], 0);
        // Overwrite the random init with the identity.
        net.layers[0].weight = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        net.layers[0].bias = vec![0.0, 0.0];
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]);
        let out = net.forward_eval(&x).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn standard_arches_have_five_layers_and_scalar_output() {
        for (code, final_act) in [
            (ArchCode::R5, Activation::Relu),
            (ArchCode::Ce5, Activation::Celu),
            (ArchCode::R4L, Activation::Linear),
            (ArchCode::Ce4L, Activation::Linear),
        ] {
            let specs = code.layer_specs(7);
            assert_eq!(specs.len(), 5);
            assert_eq!(specs[0].in_dim, 7);
            assert_eq!(specs[4].out_dim, 1);
            assert_eq!(specs[4].activation, final_act);
            assert!(!specs[4].batchnorm, "final layer must not be normalized");
            for s in &specs[..4] {
                assert_eq!(s.out_dim, HIDDEN_WIDTH);
                assert!(s.batchnorm);
            }
        }
    }

    #[test]
    fn arch_codes_parse_round_trip() {
        for code in [ArchCode::R5, ArchCode::Ce5, ArchCode::R4L, ArchCode::Ce4L] {
            assert_eq!(code.to_string().parse::<ArchCode>().unwrap(), code);
        }
        assert!("R6".parse::<ArchCode>().is_err());
        assert_eq!("ce4.l".parse::<ArchCode>().unwrap(), ArchCode::Ce4L);
    }

    #[test]
    fn init_is_seeded_and_within_xavier_limits() {
        let a = Network::new(ArchCode::R4L, 10, 7);
        let b = Network::new(ArchCode::R4L, 10, 7);
        let c = Network::new(ArchCode::R4L, 10, 8);
        assert_eq!(a, b, "same seed must give identical parameters");
        assert_ne!(a, c, "different seeds should differ");
        let limit = (6.0 / (10 + HIDDEN_WIDTH) as f64).sqrt();
        for &w in a.layers[0].weight.as_slice() {
            assert!(w.abs() <= limit, "weight {w} outside xavier limit {limit}");
        }
        assert!(a.layers[0].bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_parameter_gradients() {
        let mut net = Network::new(ArchCode::Ce4L, 4, 3);
        let x = DenseMatrix::from_rows(&[
            vec![0.1, -0.2, 0.3, 0.4],
            vec![1.0, 0.0, -1.0, 0.5],
            vec![0.7, 0.7, 0.7, -0.7],
        ]);
        let (_, cache) = net.forward_train(&x).unwrap();
        let grads = net.backward_scores(&cache, &[0.0, 0.0, 0.0]);
        for lg in &grads.layers {
            assert!(lg.d_weight.as_slice().iter().all(|&g| g == 0.0));
            assert!(lg.d_bias.iter().all(|&g| g == 0.0));
            assert!(lg.d_gamma.iter().all(|&g| g == 0.0));
            assert!(lg.d_beta.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn single_linear_unit_weight_gradient_is_input() {
        // score = w*x + b, upstream gradient 1 at one sample: dL/dw = x.
        let spec = LayerSpec {
            in_dim: 3,
            out_dim: 1,
            activation: Activation::Linear,
            batchnorm: false,
        };
        let mut net = Network::from_specs(&[spec], 5);
        let x = DenseMatrix::from_rows(&[vec![2.0, -1.0, 0.5]]);
        let (_, cache) = net.forward_train(&x).unwrap();
        let grads = net.backward_scores(&cache, &[1.0]);
        assert_eq!(grads.layers[0].d_weight.row(0), &[2.0, -1.0, 0.5]);
        assert_eq!(grads.layers[0].d_bias, vec![1.0]);
    }

    #[test]
    fn batchnorm_train_output_is_normalized() {
        // One normalized layer; feed data with per-column variance around
        // 1e2 so the eps floor perturbs the normalized variance by ~1e-7.
        let spec = LayerSpec {
            in_dim: 2,
            out_dim: 2,
            activation: Activation::Linear,
            batchnorm: true,
        };
        let mut net = Network::from_specs(&[spec], 0);
        net.layers[0].weight = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        net.layers[0].bias = vec![0.0, 0.0];
        let m = 64;
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let t = i as f64;
                vec![10.0 * (t * 0.7).sin() + 3.0, 12.0 * (t * 1.3).cos() - 5.0]
            })
            .collect();
        let x = DenseMatrix::from_rows(&rows);
        let (out, _) = net.forward_train(&x).unwrap();
        for j in 0..2 {
            let mut mean = 0.0;
            for s in 0..m {
                mean += out.get(s, j);
            }
            mean /= m as f64;
            let mut var = 0.0;
            for s in 0..m {
                let d = out.get(s, j) - mean;
                var += d * d;
            }
            var /= m as f64;
            assert!(mean.abs() < 1e-6, "column {j} mean {mean}");
            assert!((var - 1.0).abs() < 1e-6, "column {j} variance {var}");
        }
    }

    #[test]
    fn eval_scores_are_batch_independent() {
        let mut net = Network::new(ArchCode::Ce4L, 3, 11);
        // Push some batches through so running stats move off their init.
        for b in 0..5 {
            let rows: Vec<Vec<f64>> = (0..8)
                .map(|i| {
                    let t = (b * 8 + i) as f64;
                    vec![(t * 0.3).sin(), (t * 0.9).cos(), t * 0.01]
                })
                .collect();
            net.forward_train(&DenseMatrix::from_rows(&rows)).unwrap();
        }
        let batch = DenseMatrix::from_rows(&[
            vec![0.3, -0.4, 0.5],
            vec![1.0, 1.0, -1.0],
            vec![0.0, 0.2, 0.9],
        ]);
        let together = net.score_eval(&batch).unwrap();
        for s in 0..3 {
            let alone = net
                .score_eval(&DenseMatrix::from_rows(&[batch.row(s).to_vec()]))
                .unwrap();
            assert_eq!(alone[0], together[s], "row {s} differs when scored alone");
        }
        // And eval is deterministic.
        assert_eq!(together, net.score_eval(&batch).unwrap());
    }

    #[test]
    fn input_dimension_mismatch_is_a_data_error() {
        let net = Network::new(ArchCode::R4L, 4, 0);
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]);
        match net.forward_eval(&x) {
            Err(crate::Error::Data(msg)) => assert!(msg.contains("expects 4"), "{msg}"),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_activations_are_numeric_failures() {
        let spec = LayerSpec {
            in_dim: 1,
            out_dim: 1,
            activation: Activation::Linear,
            batchnorm: false,
        };
        let mut net = Network::from_specs(&[spec], 0);
        net.layers[0].weight.set(0, 0, f64::MAX);
        let x = DenseMatrix::from_rows(&[vec![f64::MAX]]);
        match net.forward_eval(&x) {
            Err(crate::Error::Numeric(_)) => {}
            other => panic!("expected numeric failure, got {other:?}"),
        }
        let mut net2 = net.clone();
        match net2.forward_train(&x) {
            Err(crate::Error::Numeric(_)) => {}
            other => panic!("expected numeric failure, got {other:?}"),
        }
    }

    /// Central finite difference over every trainable parameter of a small
    /// normalized CELU network; the analytic backward pass must agree.
    #[test]
    fn backward_matches_finite_differences() {
        let specs = [
            LayerSpec {
                in_dim: 3,
                out_dim: 4,
                activation: Activation::Celu,
                batchnorm: true,
            },
            LayerSpec {
                in_dim: 4,
                out_dim: 3,
                activation: Activation::Celu,
                batchnorm: true,
            },
            LayerSpec {
                in_dim: 3,
                out_dim: 1,
                activation: Activation::Linear,
                batchnorm: false,
            },
        ];
        let net = Network::from_specs(&specs, 42);
        let x = DenseMatrix::from_rows(&[
            vec![0.4, -1.2, 0.9],
            vec![-0.3, 0.8, 0.1],
            vec![1.5, 0.2, -0.6],
            vec![-0.9, -0.4, 1.1],
            vec![0.05, 1.9, 0.35],
        ]);
        // Fixed linear functional of the scores so the loss is scalar.
        let coeff = [0.7, -1.1, 0.4, 0.9, -0.2];
        let loss = |net: &Network| -> f64 {
            let mut clone = net.clone();
            let (scores, _) = clone.score_train(&x).unwrap();
            scores.iter().zip(&coeff).map(|(s, c)| s * c).sum()
        };

        let mut probe = net.clone();
        let (_, cache) = probe.forward_train(&x).unwrap();
        let grads = probe.backward_scores(&cache, &coeff);

        let h = 1e-6;
        let mut checked = 0usize;
        let mut max_err = 0.0f64;
        for li in 0..net.layers.len() {
            let analytic = grads.layers[li].tensor_slices();
            for (ti, tensor) in analytic.iter().enumerate() {
                for k in 0..tensor.len() {
                    let mut plus = net.clone();
                    plus.layers[li].param_slices_mut()[ti][k] += h;
                    let mut minus = net.clone();
                    minus.layers[li].param_slices_mut()[ti][k] -= h;
                    let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                    let scale = fd.abs().max(tensor[k].abs()).max(1e-3);
                    max_err = max_err.max((fd - tensor[k]).abs() / scale);
                    checked += 1;
                }
            }
        }
        assert!(checked > 40, "too few parameters checked: {checked}");
        assert!(max_err < 1e-4, "max relative gradient error {max_err}");
    }
}
