use serde::{Deserialize, Serialize};

use crate::autograd::nn::ParamSet;
use crate::autograd::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step_count: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update, returning the new parameter value.
pub fn adam_step(param: &Tensor, grad: &Tensor, state: &mut AdamState) -> Result<Tensor> {
    let mut out = param.clone();
    adam_step_in_place(&mut out, grad, state)?;
    Ok(out)
}

fn adam_step_in_place(param: &mut Tensor, grad: &Tensor, state: &mut AdamState) -> Result<()> {
    if param.shape() != grad.shape() || state.m.len() != param.len() {
        return Err(Error::Shape(format!(
            "adam: parameter {:?}, gradient {:?}, state of {}",
            param.shape(),
            grad.shape(),
            state.m.len()
        )));
    }
    if !grad.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let p = param.data_mut();
    for (((x, &g), m), v) in p
        .iter_mut()
        .zip(grad.data())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *x -= lr * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}

/// Adam over a whole [`ParamSet`].
#[derive(Clone, Debug)]
pub struct Adam {
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        Adam {
            states: params
                .tensors()
                .iter()
                .map(|t| AdamState::new(t.len(), config))
                .collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.states.first().map_or(0, |s| s.step_count)
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) -> Result<()> {
        if grads.len() != self.states.len() {
            return Err(Error::Shape(format!(
                "adam: {} gradients for {} parameters",
                grads.len(),
                self.states.len()
            )));
        }
        if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {}", params.names()[bad])));
        }
        for ((p, g), s) in params.tensors_mut().iter_mut().zip(grads).zip(&mut self.states) {
            adam_step_in_place(p, g, s)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_closed_form() {
        let p = Tensor::vector(vec![0.5]);
        let g = Tensor::vector(vec![1.0]);
        let mut s = AdamState::new(1, AdamConfig::default());
        let out = adam_step(&p, &g, &mut s).unwrap();
        // m_hat = v_hat = 1, so the step is lr / (1 + eps)
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((out.data()[0] - 0.5 - expected).abs() < 1e-15);
        assert!((expected - -0.000999999990).abs() < 1e-14);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let p = Tensor::vector(vec![0.25, -3.0]);
        let g = Tensor::zeros(&[2]);
        let mut s = AdamState::new(2, AdamConfig::default());
        let out = adam_step(&p, &g, &mut s).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn zero_lr_is_identity() {
        let p = Tensor::vector(vec![0.25, -3.0]);
        let g = Tensor::vector(vec![4.0, -2.0]);
        let mut s = AdamState::new(2, AdamConfig::with_lr(0.0));
        let out = adam_step(&p, &g, &mut s).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn deterministic() {
        let p = Tensor::vector(vec![0.1, 0.2, 0.3]);
        let g = Tensor::vector(vec![0.7, -0.4, 1e-3]);
        let mut s1 = AdamState::new(3, AdamConfig::default());
        let mut s2 = s1.clone();
        let a = adam_step(&p, &g, &mut s1).unwrap();
        let b = adam_step(&p, &g, &mut s2).unwrap();
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(s1, s2);
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let p = Tensor::vector(vec![0.1]);
        let g = Tensor::vector(vec![f64::NAN]);
        let mut s = AdamState::new(1, AdamConfig::default());
        assert!(matches!(adam_step(&p, &g, &mut s), Err(Error::NonFinite(_))));
        assert_eq!(s.step_count, 0);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let p = Tensor::vector(vec![0.1, 0.2]);
        let g = Tensor::vector(vec![1.0]);
        let mut s = AdamState::new(2, AdamConfig::default());
        assert!(adam_step(&p, &g, &mut s).is_err());
    }
}
