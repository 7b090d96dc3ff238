use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let m: Vec<Tensor> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            v: m.clone(),
            m,
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [&mut Tensor], grads: &[Tensor], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len() {
        return Err(Error::shape(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() || p.shape() != state.v[i].shape() {
            return Err(Error::shape(format!(
                "adam: parameter {i} has shape {:?} but gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let (m, v) = (state.m[i].data_mut(), state.v[i].data_mut());
        for (j, (pv, &g)) in p.data_mut().iter_mut().zip(grads[i].data()).enumerate() {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
            let mhat = m[j] / c1;
            let vhat = v[j] / c2;
            *pv -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::vector(vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar(1.5);
        let mut st = AdamState::new([&p]);
        st.m[0] = scalar(0.2);
        st.v[0] = scalar(0.4);
        let cfg = AdamConfig::default();
        adam_step(&mut [&mut p], &[scalar(0.0)], &mut st, &cfg).unwrap();
        // bias-corrected moment is non-zero here, so compare the moments only
        assert!((st.m[0].data()[0] - 0.18).abs() < 1e-15);
        assert!((st.v[0].data()[0] - 0.3996).abs() < 1e-15);
        let mut q = scalar(1.5);
        let mut fresh = AdamState::new([&q]);
        adam_step(&mut [&mut q], &[scalar(0.0)], &mut fresh, &cfg).unwrap();
        assert_eq!(q.data()[0], 1.5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [3.0, -0.5, 1e-3] {
            let mut p = scalar(0.0);
            let mut st = AdamState::new([&p]);
            let cfg = AdamConfig::default();
            adam_step(&mut [&mut p], &[scalar(g)], &mut st, &cfg).unwrap();
            let delta = p.data()[0];
            assert!((delta.abs() - cfg.learning_rate).abs() <= 0.01 * cfg.learning_rate);
            assert_eq!(delta.signum(), -g.signum());
        }
    }

    #[test]
    fn deterministic_given_state() {
        let cfg = AdamConfig::default();
        let run = || {
            let mut p = Tensor::vector(vec![0.3, -0.2]).unwrap();
            let mut st = AdamState::new([&p]);
            for _ in 0..3 {
                adam_step(&mut [&mut p], &[Tensor::vector(vec![0.1, 0.7]).unwrap()], &mut st, &cfg).unwrap();
            }
            (p, st)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn decreases_convex_quadratic() {
        // f(x) = (x - 3)^2
        for lr in [1e-2, 1e-3, 1e-4] {
            let cfg = AdamConfig {
                learning_rate: lr,
                ..AdamConfig::default()
            };
            for x0 in [-2.0, 0.0, 10.0] {
                let mut p = scalar(x0);
                let mut st = AdamState::new([&p]);
                let before = (x0 - 3.0f64).powi(2);
                let g = scalar(2.0 * (x0 - 3.0));
                adam_step(&mut [&mut p], &[g], &mut st, &cfg).unwrap();
                assert!((p.data()[0] - 3.0).powi(2) < before);
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = scalar(0.0);
        let mut st = AdamState::new([&p]);
        let g = Tensor::vector(vec![0.0, 1.0]).unwrap();
        assert!(adam_step(&mut [&mut p], &[g], &mut st, &AdamConfig::default()).is_err());
    }
}
