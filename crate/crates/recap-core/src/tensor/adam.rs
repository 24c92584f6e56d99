//! Adam with bias correction, operating in place on a parameter list.

use super::{Element, Tensor};
use crate::error::Error;
use crate::Result;

/// Optimizer state for one parameter list. Moment buffers are allocated on
/// the first step and stay aligned with the parameter order thereafter, so
/// the same state must always be fed the same parameter list.
#[derive(Debug, Clone)]
pub struct AdamState<F: Element> {
    pub learning_rate: F,
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
    pub step_count: u64,
    first_moment: Vec<Vec<F>>,
    second_moment: Vec<Vec<F>>,
}

impl<F: Element> AdamState<F> {
    /// Standard defaults: β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(learning_rate: F) -> Self {
        AdamState {
            learning_rate,
            beta1: F::from_f64(0.9),
            beta2: F::from_f64(0.999),
            epsilon: F::from_f64(1e-8),
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    /// One bias-corrected update. `grads[i]` must match `params[i]` in
    /// length; the gradient for every parameter must be supplied.
    pub fn step(&mut self, params: &mut [Tensor<F>], grads: &[Vec<F>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::InvalidInput(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| vec![F::ZERO; p.len()]).collect();
            self.second_moment = self.first_moment.clone();
        }
        if self.first_moment.len() != params.len() {
            return Err(Error::InvalidInput(format!(
                "optimizer state tracks {} parameters, given {}",
                self.first_moment.len(),
                params.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.len() != g.len() {
                return Err(Error::shape("adam_step", p.shape(), &[g.len()]));
            }
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = F::ONE - pow_int(self.beta1, t);
        let bc2 = F::ONE - pow_int(self.beta2, t);
        let one_minus_b1 = F::ONE - self.beta1;
        let one_minus_b2 = F::ONE - self.beta2;
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            let data = p.data_mut();
            for i in 0..data.len() {
                m[i] = self.beta1 * m[i] + one_minus_b1 * g[i];
                v[i] = self.beta2 * v[i] + one_minus_b2 * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] += -(self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon));
            }
        }
        Ok(())
    }
}

fn pow_int<F: Element>(base: F, exp: i32) -> F {
    let mut acc = F::ONE;
    for _ in 0..exp {
        acc = acc * base;
    }
    acc
}
