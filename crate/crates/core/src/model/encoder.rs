use super::{Activation, Bound, LAYER_NORM_EPS};
use crate::error::{Error, Result};
use crate::tensor::{concat_columns, Tensor, Var};

/// `D^-1/2 (A + I) D^-1/2` with degrees taken from `A + I`.
pub fn normalized_adjacency(a: &Tensor) -> Result<Tensor> {
    let (n, c) = a.require_matrix("normalized_adjacency")?;
    if n != c {
        return Err(Error::shape("normalized_adjacency", format!("{n}x{c} is not square")));
    }
    let mut out = a.clone();
    for i in 0..n {
        out.set(i, i, a.get(i, i) + 1.0);
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = out.row(i).iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            let v = out.get(i, j) * inv_sqrt[i] * inv_sqrt[j];
            out.set(i, j, v);
        }
    }
    Ok(out)
}

pub fn gcn_encode<'t>(bound: &Bound<'_, 't>, a_hat: Var<'t>, x: Var<'t>) -> Result<Var<'t>> {
    let mut h = x;
    for &w in &bound.layout.gcn {
        let z = a_hat.matmul(h.matmul(bound.p(w))?)?;
        h = match bound.config.gcn_activation {
            Activation::Relu => z.relu()?,
            Activation::Identity => z,
        };
    }
    Ok(h)
}

pub struct TransformerOutput<'t> {
    pub output: Var<'t>,
    /// One `n x n` row-stochastic matrix per head.
    pub attention: Vec<Var<'t>>,
}

pub fn transformer_encode<'t>(bound: &Bound<'_, 't>, x: Var<'t>) -> Result<TransformerOutput<'t>> {
    let l = bound.layout;
    let scale = 1.0 / (bound.config.head_dim() as f64).sqrt();
    let h0 = x.matmul(bound.p(l.input_proj))?;
    let mut heads = Vec::with_capacity(l.query.len());
    let mut attention = Vec::with_capacity(l.query.len());
    for h in 0..l.query.len() {
        let q = h0.matmul(bound.p(l.query[h]))?;
        let k = h0.matmul(bound.p(l.key[h]))?;
        let v = h0.matmul(bound.p(l.value[h]))?;
        let att = q.matmul(k.transpose()?)?.scale(scale)?.softmax_rows()?;
        heads.push(att.matmul(v)?);
        attention.push(att);
    }
    let mixed = concat_columns(&heads)?.matmul(bound.p(l.attn_out))?;
    let h1 = affine_norm(bound, h0.add(mixed)?, l.ln1)?;
    let ff = h1
        .matmul(bound.p(l.ff1.0))?
        .add_row(bound.p(l.ff1.1))?
        .relu()?
        .matmul(bound.p(l.ff2.0))?
        .add_row(bound.p(l.ff2.1))?;
    let output = affine_norm(bound, h1.add(ff)?, l.ln2)?;
    Ok(TransformerOutput { output, attention })
}

fn affine_norm<'t>(bound: &Bound<'_, 't>, x: Var<'t>, (gain, bias): (usize, usize)) -> Result<Var<'t>> {
    x.layer_norm_rows(LAYER_NORM_EPS)?.mul_row(bound.p(gain))?.add_row(bound.p(bias))
}

pub struct Embeddings<'t> {
    /// `[z_gcn | z_trans]`, one row per node.
    pub z: Var<'t>,
    pub z_gcn: Var<'t>,
    pub z_trans: Var<'t>,
    /// Column mean of `z`, shape `1 x 2e`.
    pub z_g: Var<'t>,
}

/// Runs both encoders; a disabled encoder contributes zeros.
pub fn encode<'t>(bound: &Bound<'_, 't>, a_hat: Var<'t>, x: Var<'t>) -> Result<Embeddings<'t>> {
    let n = x.shape()[0];
    let e = bound.config.embed_dim;
    let tape = x.tape();
    let z_gcn = if bound.config.use_gcn {
        gcn_encode(bound, a_hat, x)?
    } else {
        tape.constant(Tensor::zeros(&[n, e]))
    };
    let z_trans = if bound.config.use_transformer {
        transformer_encode(bound, x)?.output
    } else {
        tape.constant(Tensor::zeros(&[n, e]))
    };
    let z = concat_columns(&[z_gcn, z_trans])?;
    let z_g = z.row_mean()?;
    Ok(Embeddings { z, z_gcn, z_trans, z_g })
}
