use super::Bound;
use crate::error::{Error, Result};
use crate::tensor::{concat_columns, Tensor, Var};

/// `sigmoid([z_i, z_g] w + b)` for every row `z_i` of `z`; returns `n x 1`.
pub fn discriminate<'t>(bound: &Bound<'_, 't>, z: Var<'t>, z_g: Var<'t>) -> Result<Var<'t>> {
    let n = z.shape()[0];
    let summary = z_g.gather_rows(&vec![0; n])?;
    let (w, b) = bound.layout.disc;
    concat_columns(&[z, summary])?
        .matmul(bound.p(w))?
        .add_row(bound.p(b))?
        .sigmoid()
}

/// Mean over nodes of `-ln D(z_i, z_g) - ln(1 - D(z~_i, z_g))`.
pub fn contrastive_loss<'t>(bound: &Bound<'_, 't>, z: Var<'t>, z_tilde: Var<'t>, z_g: Var<'t>) -> Result<Var<'t>> {
    if z.shape() != z_tilde.shape() {
        return Err(Error::shape("contrastive_loss", format!("{:?} vs {:?}", z.shape(), z_tilde.shape())));
    }
    let pos = discriminate(bound, z, z_g)?.ln()?.mean()?;
    let neg = discriminate(bound, z_tilde, z_g)?.scale(-1.0)?.add_scalar(1.0)?.ln()?.mean()?;
    pos.add(neg)?.scale(-1.0)
}

/// Scores `(peptide, disease)` pairs given as global node indices; returns `B x 1`.
pub fn predict_pairs<'t>(bound: &Bound<'_, 't>, z: Var<'t>, pairs: &[(usize, usize)]) -> Result<Var<'t>> {
    let n = z.shape()[0];
    if let Some(&(p, d)) = pairs.iter().find(|&&(p, d)| p >= n || d >= n) {
        return Err(Error::Index(format!("pair ({p}, {d}) outside {n} nodes")));
    }
    let ps: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let ds: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let h = concat_columns(&[z.gather_rows(&ps)?, z.gather_rows(&ds)?])?;
    let l = bound.layout;
    h.matmul(bound.p(l.pred1.0))?
        .add_row(bound.p(l.pred1.1))?
        .relu()?
        .matmul(bound.p(l.pred2.0))?
        .add_row(bound.p(l.pred2.1))?
        .sigmoid()
}

/// Binary cross-entropy averaged over pairs.
pub fn prediction_loss<'t>(y_hat: Var<'t>, labels: &[f64]) -> Result<Var<'t>> {
    let shape = y_hat.shape();
    let n: usize = shape.iter().product();
    if n != labels.len() {
        return Err(Error::shape("prediction_loss", format!("{n} scores vs {} labels", labels.len())));
    }
    if n == 0 {
        return Err(Error::shape("prediction_loss", "no pairs"));
    }
    let tape = y_hat.tape();
    let y = tape.constant(Tensor::new(shape.clone(), labels.to_vec())?);
    let not_y = tape.constant(Tensor::new(shape, labels.iter().map(|v| 1.0 - v).collect())?);
    let pos = y.mul(y_hat.ln()?)?;
    let neg = not_y.mul(y_hat.scale(-1.0)?.add_scalar(1.0)?.ln()?)?;
    pos.add(neg)?.mean()?.scale(-1.0)
}

pub fn total_loss<'t>(contrast: Var<'t>, pred: Var<'t>, lambda: f64) -> Result<Var<'t>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("lambda {lambda} must be finite and non-negative")));
    }
    contrast.add(pred.scale(lambda)?)
}
