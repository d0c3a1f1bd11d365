//! Central-difference gradient checking.

use crate::autograd::tape::{Tape, Var};
use crate::autograd::tensor::Tensor;
use crate::error::{Error, Result};

/// Largest relative error between reverse-mode and central-difference
/// gradients of a scalar function of one tensor.
///
/// The per-coordinate error is `|g_ad - g_fd| / max(1, |g_ad|, |g_fd|)`.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Var,
{
    grad_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(x), eps)
}

/// [`grad_check`] over several inputs at once.
pub fn grad_check_many<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::InvalidArgument(format!("eps must be in (0, 1e-2], got {eps}")));
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let value = tape.value(out);
    if value.len() != 1 {
        return Err(Error::Shape(format!(
            "grad_check needs a scalar function, got shape {:?}",
            value.shape()
        )));
    }
    if !value.is_finite() {
        return Err(Error::NonFinite("f(x)".into()));
    }
    let grads = tape.backward(out)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .map(|&v| grads.get(v).cloned().expect("param leaf"))
        .collect();

    let eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars);
        let y = tape.value(out).item();
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFinite("f(x + eps)".into()))
        }
    };

    let mut worst: f64 = 0.0;
    let mut work = inputs.to_vec();
    for (k, g_ad) in analytic.iter().enumerate() {
        for i in 0..inputs[k].len() {
            let orig = inputs[k].data()[i];
            work[k].data_mut()[i] = orig + eps;
            let up = eval(&work)?;
            work[k].data_mut()[i] = orig - eps;
            let down = eval(&work)?;
            work[k].data_mut()[i] = orig;
            let g_fd = (up - down) / (2.0 * eps);
            let ga = g_ad.data()[i];
            let err = (ga - g_fd).abs() / 1f64.max(ga.abs()).max(g_fd.abs());
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
