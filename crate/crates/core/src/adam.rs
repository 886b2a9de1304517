use crate::head::ProjectionHead;
use crate::loss::HeadGradient;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

/// First/second moment accumulators laid out like the head's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m_w: Vec<f64>,
    v_w: Vec<f64>,
    m_b: Vec<f64>,
    v_b: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(head: &ProjectionHead) -> Self {
        Self {
            m_w: vec![0.0; head.weights.len()],
            v_w: vec![0.0; head.weights.len()],
            m_b: vec![0.0; head.bias.len()],
            v_b: vec![0.0; head.bias.len()],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update of `head` along `grad`.
    pub fn step(&mut self, head: &mut ProjectionHead, grad: &HeadGradient, p: &AdamParams) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - p.beta1.powi(t);
        let c2 = 1.0 - p.beta2.powi(t);
        let update = |theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..theta.len() {
                m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g[i];
                v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                theta[i] -= p.learning_rate * m_hat / (v_hat.sqrt() + p.epsilon);
            }
        };
        update(&mut head.weights, &grad.weights, &mut self.m_w, &mut self.v_w);
        update(&mut head.bias, &grad.bias, &mut self.m_b, &mut self.v_b);
    }
}
