//! Adam optimizer with coupled L2 weight decay.
//!
//! Decay is added straight into the gradient (`g += l2 * theta`) before
//! the moment updates, i.e. classic L2 regularization rather than the
//! decoupled variant.  It applies to every trainable tensor: weights,
//! biases, and batchnorm scale/shift.

use super::network::{Network, NetworkGrads};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// First/second moment estimates for every trainable tensor of a network.
#[derive(Debug, Clone)]
pub struct AdamState {
    step: u64,
    /// Per layer, per tensor (same order as the layer's parameter slices).
    m: Vec<Vec<Vec<f64>>>,
    v: Vec<Vec<Vec<f64>>>,
}

impl AdamState {
    /// Zero-initialized moments shaped after `net`'s parameters.
    pub fn new(net: &mut Network) -> Self {
        let mut m = Vec::with_capacity(net.layers.len());
        for layer in &mut net.layers {
            let shapes: Vec<usize> = layer.param_slices_mut().iter().map(|s| s.len()).collect();
            m.push(shapes.into_iter().map(|n| vec![0.0; n]).collect::<Vec<_>>());
        }
        AdamState {
            step: 0,
            v: m.clone(),
            m,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one Adam update in place.  `grads` must come from the same
    /// network (shape mismatches panic).
    pub fn apply(&mut self, net: &mut Network, grads: &NetworkGrads, lr: f64, l2: f64) {
        assert_eq!(
            grads.layers.len(),
            net.layers.len(),
            "gradient/network layer count mismatch"
        );
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - BETA1.powi(t);
        let bias2 = 1.0 - BETA2.powi(t);
        for (li, layer) in net.layers.iter_mut().enumerate() {
            let params = layer.param_slices_mut();
            let gslices = grads.layers[li].tensor_slices();
            assert_eq!(params.len(), gslices.len(), "tensor count mismatch");
            for (ti, (param, grad)) in params.into_iter().zip(gslices).enumerate() {
                assert_eq!(param.len(), grad.len(), "tensor shape mismatch");
                let m = &mut self.m[li][ti];
                let v = &mut self.v[li][ti];
                for k in 0..param.len() {
                    let g = grad[k] + l2 * param[k];
                    m[k] = BETA1 * m[k] + (1.0 - BETA1) * g;
                    v[k] = BETA2 * v[k] + (1.0 - BETA2) * g * g;
                    let m_hat = m[k] / bias1;
                    let v_hat = v[k] / bias2;
                    param[k] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Activation, DenseMatrix, LayerSpec, Network};

    fn tiny_net() -> Network {
        Network::from_specs(
            &[LayerSpec {
                in_dim: 1,
                out_dim: 1,
                activation: Activation::Linear,
                batchnorm: false,
            }],
            3,
        )
    }

    fn grad_of(net: &mut Network, x: f64, upstream: f64) -> NetworkGrads {
        let input = DenseMatrix::from_rows(&[vec![x]]);
        let (_, cache) = net.forward_train(&input).unwrap();
        net.backward_scores(&cache, &[upstream])
    }

    #[test]
    fn zero_gradient_zero_decay_leaves_parameters_unchanged() {
        let mut net = tiny_net();
        let before = net.clone();
        let grads = grad_of(&mut net, 1.0, 0.0);
        let mut state = AdamState::new(&mut net);
        state.apply(&mut net, &grads, 1e-3, 0.0);
        assert_eq!(net, before);
    }

    #[test]
    fn first_step_moves_by_roughly_lr_against_gradient_sign() {
        let mut net = tiny_net();
        let w0 = net.layers[0].weight.get(0, 0);
        let grads = grad_of(&mut net, 1.0, 1.0); // dL/dw = 1.0 (positive)
        let mut state = AdamState::new(&mut net);
        let lr = 1e-3;
        state.apply(&mut net, &grads, lr, 0.0);
        let w1 = net.layers[0].weight.get(0, 0);
        // With fresh moments, the first update is ~ -lr * sign(g).
        assert!((w1 - (w0 - lr)).abs() < 1e-8, "w0={w0} w1={w1}");
    }

    #[test]
    fn repeated_positive_gradients_keep_decreasing_the_parameter() {
        let mut net = tiny_net();
        let mut state = AdamState::new(&mut net);
        let mut prev = net.layers[0].weight.get(0, 0);
        for _ in 0..5 {
            let grads = grad_of(&mut net, 1.0, 1.0);
            state.apply(&mut net, &grads, 1e-3, 0.0);
            let cur = net.layers[0].weight.get(0, 0);
            assert!(cur < prev, "parameter should decrease monotonically");
            prev = cur;
        }
        assert_eq!(state.step_count(), 5);
    }

    #[test]
    fn weight_decay_shrinks_parameters_even_with_zero_gradient() {
        let mut net = tiny_net();
        net.layers[0].weight.set(0, 0, 2.0);
        let grads = grad_of(&mut net, 1.0, 0.0);
        let mut state = AdamState::new(&mut net);
        state.apply(&mut net, &grads, 1e-3, 1e-3);
        let w = net.layers[0].weight.get(0, 0);
        assert!(w < 2.0, "decay must pull the weight toward zero, got {w}");
    }
}
