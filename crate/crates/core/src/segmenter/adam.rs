//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use super::network::{Gradients, SegmenterParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn for_network(lr: f64) -> Self {
        Self::new(SegmenterParams::parameter_count(), lr)
    }

    /// One update of `theta` in place.
    pub fn step_slice(&mut self, theta: &mut [f64], grad: &[f64]) {
        assert_eq!(theta.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Applies one Adam step to network weights (moments kept in f64).
pub fn adam_step(params: &SegmenterParams, grads: &Gradients, state: &mut AdamState) -> SegmenterParams {
    let mut theta: Vec<f64> = params.flatten().into_iter().map(f64::from).collect();
    state.step_slice(&mut theta, &grads.flatten());
    SegmenterParams::unflatten(&theta.into_iter().map(|v| v as f32).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut s = AdamState::new(3, 0.01);
        let mut theta = vec![1.0, -2.0, 0.5];
        s.step_slice(&mut theta, &[0.0; 3]);
        assert_eq!(theta, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_scalar() {
        let mut s = AdamState::new(1, 1e-3);
        let mut theta = vec![0.0];
        s.step_slice(&mut theta, &[1.0]);
        // m_hat = 1, v_hat = 1
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((theta[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn two_steps_differ_from_one_double_step() {
        let mut s = AdamState::new(1, 1e-3);
        let mut two = vec![0.0];
        s.step_slice(&mut two, &[1.0]);
        s.step_slice(&mut two, &[1.0]);
        let mut d = AdamState::new(1, 2e-3);
        let mut one = vec![0.0];
        d.step_slice(&mut one, &[1.0]);
        assert_ne!(two[0], one[0]);
    }

    #[test]
    fn network_step_keeps_shape() {
        let p = SegmenterParams::zeros();
        let mut g = Gradients::zeros();
        g.layers[0].weight[0] = 1.0;
        let mut s = AdamState::for_network(0.1);
        let q = adam_step(&p, &g, &mut s);
        assert!(q.layers[0].weight[0] < 0.0);
        assert_eq!(q.layers[0].weight[1], 0.0);
        assert_eq!(q.flatten().len(), p.flatten().len());
    }
}
