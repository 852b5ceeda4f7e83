//! Central finite-difference gradient checking.

use super::dense::Tensor;
use super::tape::{Tape, Var};
use crate::error::Result;

pub const DEFAULT_STEP: f64 = 1e-5;

/// `||a - b|| / max(||a||, ||b||)`, zero when both are negligible.
pub fn relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    let diff = analytic.zip_map(numeric, |a, b| a - b).norm();
    let scale = analytic.norm().max(numeric.norm());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Evaluates `f` on fresh tapes and compares reverse-mode gradients of each
/// input against central differences. Returns one relative error per input.
pub fn check_gradients<F>(inputs: &[Tensor], step: f64, f: F) -> Result<Vec<f64>>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = f(&tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| v.grad().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    let eval = |xs: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        Ok(f(&tape, &vars)?.item())
    };

    let mut errors = Vec::with_capacity(inputs.len());
    let mut point = inputs.to_vec();
    for k in 0..inputs.len() {
        let mut numeric = Tensor::zeros(inputs[k].shape());
        for i in 0..inputs[k].numel() {
            let orig = point[k].data()[i];
            point[k].data_mut()[i] = orig + step;
            let plus = eval(&point)?;
            point[k].data_mut()[i] = orig - step;
            let minus = eval(&point)?;
            point[k].data_mut()[i] = orig;
            numeric.data_mut()[i] = (plus - minus) / (2.0 * step);
        }
        errors.push(relative_error(&analytic[k], &numeric));
    }
    Ok(errors)
}
