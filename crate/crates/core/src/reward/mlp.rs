//! One-hidden-layer ReLU network with a linear scalar output.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Differentiable, RewardError};
use crate::linalg::{self, Matrix};

/// Parameters of `w2 · relu(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self { w1: Matrix::zeros(hidden, input_dim), b1: vec![0.0; hidden], w2: vec![0.0; hidden], b2: 0.0 }
    }

    /// Uniform `±1/sqrt(fan_in)` weights, zero biases.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut crate::Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden);
        let a1 = 1.0 / libm::sqrt(input_dim.max(1) as f64);
        p.w1.data.iter_mut().for_each(|w| *w = rng.gen_range(-a1..=a1));
        let a2 = 1.0 / libm::sqrt(hidden.max(1) as f64);
        p.w2.iter_mut().for_each(|w| *w = rng.gen_range(-a2..=a2));
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows
    }

    /// Shapes agree and every entry is finite.
    pub fn is_valid(&self) -> bool {
        let h = self.w1.rows;
        h >= 1
            && self.w1.data.len() == h * self.w1.cols
            && self.b1.len() == h
            && self.w2.len() == h
            && linalg::all_finite(&self.w1.data)
            && linalg::all_finite(&self.b1)
            && linalg::all_finite(&self.w2)
            && self.b2.is_finite()
    }

    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.w1.matvec(x);
        z.iter_mut().zip(&self.b1).for_each(|(z, b)| *z += b);
        z
    }

    /// Output for an already-concatenated input.
    pub fn forward(&self, x: &[f64]) -> f64 {
        let z = self.hidden_pre(x);
        z.iter().zip(&self.w2).map(|(z, w)| z.max(0.0) * w).sum::<f64>() + self.b2
    }
}

/// `w2 · relu(W1·[doc; summary] + b1) + b2`.
pub fn mlp_forward(doc_emb: &[f64], sum_emb: &[f64], params: &MlpParams) -> Result<f64, RewardError> {
    let expected = params.input_dim();
    let found = doc_emb.len() + sum_emb.len();
    if found != expected {
        return Err(RewardError::DimensionMismatch { expected, found });
    }
    let mut x = Vec::with_capacity(found);
    x.extend_from_slice(doc_emb);
    x.extend_from_slice(sum_emb);
    Ok(params.forward(&x))
}

impl Differentiable for MlpParams {
    type Input = Vec<f64>;

    fn forward(&self, x: &Vec<f64>) -> f64 {
        MlpParams::forward(self, x)
    }

    fn backward(&self, x: &Vec<f64>, dout: f64, grad: &mut Self) {
        let z = self.hidden_pre(x);
        grad.b2 += dout;
        for (j, &zj) in z.iter().enumerate() {
            if zj <= 0.0 {
                continue;
            }
            grad.w2[j] += dout * zj;
            let dz = dout * self.w2[j];
            grad.b1[j] += dz;
            for (g, &xi) in grad.w1.row_mut(j).iter_mut().zip(x.iter()) {
                *g += dz * xi;
            }
        }
    }

    fn zeroed(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden_dim())
    }

    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.w1.data, &self.b1, &self.w2, core::slice::from_ref(&self.b2)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w1.data, &mut self.b1, &mut self.w2, core::slice::from_mut(&mut self.b2)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_network() {
        let mut p = MlpParams::zeros(4, 3);
        p.b2 = 0.3;
        assert_eq!(mlp_forward(&[1.0, 2.0], &[3.0, 4.0], &p).unwrap(), 0.3);
    }

    #[test]
    fn inactive_unit_gives_bias() {
        let mut p = MlpParams::zeros(4, 1);
        p.w1.data = vec![1.0, 0.0, 0.0, 0.0];
        p.b1 = vec![-5.0];
        p.w2 = vec![7.0];
        p.b2 = 0.25;
        assert_eq!(mlp_forward(&[2.0, 1.0], &[1.0, 1.0], &p).unwrap(), 0.25);
        p.b1 = vec![-1.0];
        assert_eq!(mlp_forward(&[2.0, 1.0], &[1.0, 1.0], &p).unwrap(), 7.25);
    }

    #[test]
    fn output_is_linear_in_w2() {
        let mut rng = crate::rng_from_seed(3);
        let mut p = MlpParams::init(6, 5, &mut rng);
        p.b2 = 0.4;
        let (d, s) = ([0.3, -0.2, 1.0], [0.5, 0.5, -1.5]);
        let base = mlp_forward(&d, &s, &p).unwrap() - p.b2;
        p.w2.iter_mut().for_each(|w| *w *= 2.0);
        let doubled = mlp_forward(&d, &s, &p).unwrap() - p.b2;
        assert!((doubled - 2.0 * base).abs() < 1e-12);
    }

    #[test]
    fn dimension_checked() {
        let p = MlpParams::zeros(4, 2);
        assert_eq!(mlp_forward(&[1.0], &[1.0], &p), Err(RewardError::DimensionMismatch { expected: 4, found: 2 }));
    }
}
