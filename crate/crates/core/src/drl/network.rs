//! Fully connected Q-value network with hand-written backpropagation and an
//! Adam optimizer.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::{Error, Result};

/// Input width: the MDP state.
pub const STATE_DIM: usize = 8;
/// Output width: one value per action.
pub const ACTION_DIM: usize = 5;
pub const HIDDEN: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out × in`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { weights: DMatrix::zeros(output, input), bias: DVector::zeros(output) }
    }

    /// He-uniform weights, zero bias.
    fn random<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let limit = (6.0 / input as f64).sqrt();
        Self {
            weights: DMatrix::from_fn(output, input, |_, _| rng.random_range(-limit..limit)),
            bias: DVector::zeros(output),
        }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &self.weights * x;
        for mut col in z.column_iter_mut() {
            col += &self.bias;
        }
        z
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// `Q(ψ, ·; θ)`: ReLU hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub layers: Vec<Dense>,
}

/// Activations kept for the backward pass; column `b` is sample `b`.
struct Trace {
    /// Inputs to each layer (post-activation of the previous one).
    inputs: Vec<DMatrix<f64>>,
    output: DMatrix<f64>,
}

impl QNetwork {
    /// `8 → 128 → 128 → 5`.
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::with_sizes(&[STATE_DIM, HIDDEN, HIDDEN, ACTION_DIM], rng)
    }

    pub fn with_sizes<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "a network needs at least one layer");
        let layers = sizes.windows(2).map(|w| Dense::random(w[0], w[1], rng)).collect();
        Self { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Self { layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect() }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.weights.nrows()).unwrap_or(0)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.weights.nrows()));
        s
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Q-values for one state.
    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>> {
        if !self.is_finite() {
            return Err(Error::InvalidModel("network parameters are not finite".into()));
        }
        if state.len() != self.input_dim() {
            return Err(Error::InvalidDimension(format!(
                "state has {} features, network expects {}",
                state.len(),
                self.input_dim()
            )));
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("state is not finite".into()));
        }
        let x = DMatrix::from_column_slice(state.len(), 1, state);
        Ok(self.forward_batch(&x).column(0).iter().copied().collect())
    }

    /// Q-values for a batch, one state per column.
    pub fn forward_batch(&self, states: &DMatrix<f64>) -> DMatrix<f64> {
        self.trace(states).output
    }

    fn trace(&self, states: &DMatrix<f64>) -> Trace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut x = states.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(&x);
            if i < last {
                z.apply(|v| *v = v.max(0.0));
            }
            inputs.push(x);
            x = z;
        }
        Trace { inputs, output: x }
    }

    /// Gradient of `mean_b (Q(s_b, a_b) − target_b)²` with respect to every
    /// parameter, plus the loss itself.
    pub fn loss_gradient(
        &self,
        states: &DMatrix<f64>,
        actions: &[usize],
        targets: &[f64],
    ) -> (f64, Vec<Dense>) {
        let batch = states.ncols();
        let trace = self.trace(states);
        let mut delta = DMatrix::zeros(trace.output.nrows(), batch);
        let mut loss = 0.0;
        for b in 0..batch {
            let err = trace.output[(actions[b], b)] - targets[b];
            loss += err * err;
            delta[(actions[b], b)] = 2.0 * err / batch as f64;
        }
        loss /= batch as f64;

        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.inputs[i];
            let gw = &delta * input.transpose();
            let gb = delta.column_sum();
            grads.push(Dense { weights: gw, bias: gb });
            if i > 0 {
                let mut back = layer.weights.transpose() * &delta;
                // ReLU derivative from the stored post-activation
                back.zip_apply(input, |g, a| {
                    if a <= 0.0 {
                        *g = 0.0
                    }
                });
                delta = back;
            }
        }
        grads.reverse();
        (loss, grads)
    }

    /// Flattened parameters, layer by layer, weights (column-major) then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::InvalidDimension(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.as_mut_slice().copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.as_mut_slice().copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }
}

/// Adaptive moment estimation.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Dense>,
    v: Vec<Dense>,
}

impl Adam {
    pub fn new(net: &QNetwork) -> Self {
        let zeros = || net.layers.iter().map(|l| Dense::zeros(l.weights.ncols(), l.weights.nrows())).collect();
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros(), v: zeros() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn apply(&mut self, net: &mut QNetwork, grads: &[Dense], lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *p -= lr * mhat / (vhat.sqrt() + eps);
        };
        for (((layer, g), m), v) in net.layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((p, g), m), v) in layer
                .weights
                .iter_mut()
                .zip(g.weights.iter())
                .zip(m.weights.iter_mut())
                .zip(v.weights.iter_mut())
            {
                update(p, *g, m, v);
            }
            for (((p, g), m), v) in layer.bias.iter_mut().zip(g.bias.iter()).zip(m.bias.iter_mut()).zip(v.bias.iter_mut()) {
                update(p, *g, m, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::zeros(&[STATE_DIM, HIDDEN, HIDDEN, ACTION_DIM]);
        assert_eq!(net.forward(&[0.3; 8]).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn identity_slice_echoes_inputs() {
        let mut net = QNetwork::zeros(&[8, 5]);
        for i in 0..5 {
            net.layers[0].weights[(i, i)] = 1.0;
        }
        let s = [0.1, -0.2, 0.3, 0.4, -0.5, 9.0, 9.0, 9.0];
        assert_eq!(net.forward(&s).unwrap(), s[..5].to_vec());
    }

    #[test]
    fn rejects_non_finite_parameters() {
        let mut net = QNetwork::new(&mut seeded_rng(1));
        net.layers[1].bias[3] = f64::NAN;
        assert!(matches!(net.forward(&[0.0; 8]), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn params_round_trip() {
        let net = QNetwork::new(&mut seeded_rng(2));
        let mut other = QNetwork::zeros(&net.sizes());
        other.set_params(&net.params()).unwrap();
        assert_eq!(net, other);
        assert_eq!(net.num_params(), 8 * 128 + 128 + 128 * 128 + 128 + 128 * 5 + 5);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut net = QNetwork::new(&mut seeded_rng(3));
        let before = net.clone();
        let states = DMatrix::from_fn(8, 4, |r, c| (r + c) as f64 * 0.1);
        let (_, grads) = net.loss_gradient(&states, &[0, 1, 2, 3], &[1.0, 2.0, 3.0, 4.0]);
        let mut adam = Adam::new(&net);
        adam.apply(&mut net, &grads, 0.0);
        assert_eq!(net, before);
    }
}
