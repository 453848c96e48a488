//! Full-sequence forward pass with activation cache, and its backward pass.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, RngCore};

use super::{targets, ModelParams};
use crate::corpus::FeatureSequence;
use crate::error::Result;

pub(crate) const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

pub(crate) struct LnCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

struct LayerCache {
    ln1: LnCache,
    ln1_out: Array2<f64>,
    qkv: Array2<f64>,
    /// Attention weights per head, `[T, T]`, zero above the diagonal.
    attn: Vec<Array2<f64>>,
    heads_out: Array2<f64>,
    attn_mask: Option<Array2<f64>>,
    ln2: LnCache,
    ln2_out: Array2<f64>,
    ff_pre: Array2<f64>,
    ff_act: Array2<f64>,
    ff_mask: Option<Array2<f64>>,
}

/// Activations kept for backpropagation. `probs` is the model output.
pub struct ForwardCache {
    pub probs: Array2<f64>,
    embed_mask: Option<Array2<f64>>,
    layers: Vec<LayerCache>,
    final_ln: LnCache,
    final_out: Array2<f64>,
}

pub(crate) fn layer_norm(x: &Array2<f64>, gain: &Array1<f64>, bias: &Array1<f64>) -> (Array2<f64>, LnCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut rstd = Array1::zeros(x.nrows());
    for (i, mut row) in xhat.rows_mut().into_iter().enumerate() {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.dot(&row) / d;
        let r = 1.0 / (var + LN_EPS).sqrt();
        row.mapv_inplace(|v| v * r);
        rstd[i] = r;
    }
    let y = &xhat * gain + bias;
    (y, LnCache { xhat, rstd })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    gain: &Array1<f64>,
    dgain: &mut Array1<f64>,
    dbias: &mut Array1<f64>,
) -> Array2<f64> {
    *dgain += &(dy * &cache.xhat).sum_axis(Axis(0));
    *dbias += &dy.sum_axis(Axis(0));
    let d = dy.ncols() as f64;
    let mut dx = dy * gain;
    for (i, mut row) in dx.rows_mut().into_iter().enumerate() {
        let xh = cache.xhat.row(i);
        let m1 = row.sum() / d;
        let m2 = row.dot(&xh) / d;
        let r = cache.rstd[i];
        Zip::from(&mut row)
            .and(&xh)
            .for_each(|g, &x| *g = r * (*g - m1 - x * m2));
    }
    dx
}

pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

fn dropout_mask(shape: (usize, usize), p: f64, rng: &mut dyn RngCore) -> Array2<f64> {
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_simple_fn(shape, || if rng.gen::<f64>() < p { 0.0 } else { keep })
}

fn add_bias(mut m: Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    m += b;
    m
}

impl ModelParams {
    /// Summed input embeddings, `[T, d]`.
    pub(crate) fn embed(&self, seq: &FeatureSequence) -> Array2<f64> {
        let d = self.config.hidden_size;
        let mut x = Array2::zeros((seq.len(), d));
        for (i, mut row) in x.rows_mut().into_iter().enumerate() {
            row.assign(&self.word_emb.row(seq.tokens[i] as usize));
            row += &self.abs_pos_emb.row(i);
            row += &self.vowel_emb.row(seq.vowels[i].index());
            row += &self.intra_pos_emb.row(seq.intra_pos[i]);
            row += &self.sentence_emb.row(seq.sent_idx[i]);
        }
        x
    }

    pub(crate) fn output_weights(&self) -> ArrayView2<'_, f64> {
        match &self.lm_head {
            Some(h) => h.view(),
            None => self.word_emb.t(),
        }
    }

    /// Inference forward pass (no dropout).
    pub fn forward(&self, seq: &FeatureSequence) -> Result<ForwardCache> {
        self.run(seq, None)
    }

    /// Training forward pass with dropout rate `p` on the embedding sum and
    /// both residual branches.
    pub fn forward_train(&self, seq: &FeatureSequence, p: f64, rng: &mut dyn RngCore) -> Result<ForwardCache> {
        if p > 0.0 {
            self.run(seq, Some((p, rng)))
        } else {
            self.run(seq, None)
        }
    }

    fn run(&self, seq: &FeatureSequence, mut dropout: Option<(f64, &mut dyn RngCore)>) -> Result<ForwardCache> {
        let cfg = &self.config;
        cfg.check_sequence(seq)?;
        let t = seq.len();
        let d = cfg.hidden_size;
        let dh = cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();

        let mask = |dropout: &mut Option<(f64, &mut dyn RngCore)>, shape| {
            dropout.as_mut().map(|(p, rng)| dropout_mask(shape, *p, &mut **rng))
        };

        let mut x = self.embed(seq);
        let embed_mask = mask(&mut dropout, (t, d));
        if let Some(m) = &embed_mask {
            x *= m;
        }

        let mut layers = Vec::with_capacity(cfg.n_layers);
        for l in &self.layers {
            let (ln1_out, ln1) = layer_norm(&x, &l.ln1_gain, &l.ln1_bias);
            let qkv = add_bias(ln1_out.dot(&l.qkv), &l.qkv_bias);
            let mut heads_out = Array2::zeros((t, d));
            let mut attn = Vec::with_capacity(cfg.n_heads);
            for h in 0..cfg.n_heads {
                let q = qkv.slice(s![.., h * dh..(h + 1) * dh]);
                let k = qkv.slice(s![.., d + h * dh..d + (h + 1) * dh]);
                let v = qkv.slice(s![.., 2 * d + h * dh..2 * d + (h + 1) * dh]);
                let mut w = q.dot(&k.t());
                for (i, mut row) in w.rows_mut().into_iter().enumerate() {
                    let row = row.as_slice_mut().expect("contiguous row");
                    for x in row[..=i].iter_mut() {
                        *x *= scale;
                    }
                    softmax_in_place(&mut row[..=i]);
                    row[i + 1..].fill(0.0);
                }
                heads_out
                    .slice_mut(s![.., h * dh..(h + 1) * dh])
                    .assign(&w.dot(&v));
                attn.push(w);
            }
            let mut branch = add_bias(heads_out.dot(&l.attn_proj), &l.attn_proj_bias);
            let attn_mask = mask(&mut dropout, (t, d));
            if let Some(m) = &attn_mask {
                branch *= m;
            }
            x += &branch;

            let (ln2_out, ln2) = layer_norm(&x, &l.ln2_gain, &l.ln2_bias);
            let ff_pre = add_bias(ln2_out.dot(&l.ff_in), &l.ff_in_bias);
            let ff_act = ff_pre.mapv(gelu);
            let mut branch = add_bias(ff_act.dot(&l.ff_out), &l.ff_out_bias);
            let ff_mask = mask(&mut dropout, (t, d));
            if let Some(m) = &ff_mask {
                branch *= m;
            }
            x += &branch;

            layers.push(LayerCache {
                ln1,
                ln1_out,
                qkv,
                attn,
                heads_out,
                attn_mask,
                ln2,
                ln2_out,
                ff_pre,
                ff_act,
                ff_mask,
            });
        }

        let (final_out, final_ln) = layer_norm(&x, &self.final_ln_gain, &self.final_ln_bias);
        let mut probs = add_bias(final_out.dot(&self.output_weights()), &self.lm_head_bias);
        for mut row in probs.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("contiguous row"));
        }
        Ok(ForwardCache {
            probs,
            embed_mask,
            layers,
            final_ln,
            final_out,
        })
    }

    /// Backpropagates `scale * NLL(seq)` into `grads` and returns the
    /// unscaled summed NLL.
    pub fn backward(&self, seq: &FeatureSequence, cache: &ForwardCache, scale: f64, grads: &mut ModelParams) -> f64 {
        let cfg = &self.config;
        let d = cfg.hidden_size;
        let dh = cfg.head_dim();
        let att_scale = 1.0 / (dh as f64).sqrt();

        let mut nll = 0.0;
        let mut dlogits = Array2::zeros(cache.probs.raw_dim());
        for (i, target) in targets(seq) {
            let p = cache.probs.row(i);
            nll -= p[target as usize].ln();
            let mut row = dlogits.row_mut(i);
            row.assign(&p);
            row[target as usize] -= 1.0;
            row *= scale;
        }

        grads.lm_head_bias += &dlogits.sum_axis(Axis(0));
        let dfinal = match (&self.lm_head, &mut grads.lm_head) {
            (Some(w), Some(gw)) => {
                *gw += &cache.final_out.t().dot(&dlogits);
                dlogits.dot(&w.t())
            }
            _ => {
                grads.word_emb += &dlogits.t().dot(&cache.final_out);
                dlogits.dot(&self.word_emb)
            }
        };
        let mut dx = layer_norm_backward(
            &dfinal,
            &cache.final_ln,
            &self.final_ln_gain,
            &mut grads.final_ln_gain,
            &mut grads.final_ln_bias,
        );

        for ((l, c), g) in self
            .layers
            .iter()
            .zip(&cache.layers)
            .zip(grads.layers.iter_mut())
            .rev()
        {
            // MLP branch
            let mut dbranch = dx.clone();
            if let Some(m) = &c.ff_mask {
                dbranch *= m;
            }
            g.ff_out += &c.ff_act.t().dot(&dbranch);
            g.ff_out_bias += &dbranch.sum_axis(Axis(0));
            let mut dpre = dbranch.dot(&l.ff_out.t());
            Zip::from(&mut dpre)
                .and(&c.ff_pre)
                .for_each(|g, &x| *g *= gelu_grad(x));
            g.ff_in += &c.ln2_out.t().dot(&dpre);
            g.ff_in_bias += &dpre.sum_axis(Axis(0));
            let dln2 = dpre.dot(&l.ff_in.t());
            dx += &layer_norm_backward(&dln2, &c.ln2, &l.ln2_gain, &mut g.ln2_gain, &mut g.ln2_bias);

            // attention branch
            let mut dbranch = dx.clone();
            if let Some(m) = &c.attn_mask {
                dbranch *= m;
            }
            g.attn_proj += &c.heads_out.t().dot(&dbranch);
            g.attn_proj_bias += &dbranch.sum_axis(Axis(0));
            let dheads = dbranch.dot(&l.attn_proj.t());
            let mut dqkv = Array2::zeros(c.qkv.raw_dim());
            for h in 0..cfg.n_heads {
                let cols = h * dh..(h + 1) * dh;
                let q = c.qkv.slice(s![.., cols.clone()]);
                let k = c.qkv.slice(s![.., d + cols.start..d + cols.end]);
                let v = c.qkv.slice(s![.., 2 * d + cols.start..2 * d + cols.end]);
                let w = &c.attn[h];
                let dout = dheads.slice(s![.., cols.clone()]);
                let dv = w.t().dot(&dout);
                let mut dw = dout.dot(&v.t());
                for (i, mut row) in dw.rows_mut().into_iter().enumerate() {
                    let wi = w.row(i);
                    let dot = row.dot(&wi);
                    Zip::from(&mut row)
                        .and(&wi)
                        .for_each(|g, &p| *g = p * (*g - dot) * att_scale);
                }
                let dq = dw.dot(&k);
                let dk = dw.t().dot(&q);
                dqkv.slice_mut(s![.., cols.clone()]).assign(&dq);
                dqkv.slice_mut(s![.., d + cols.start..d + cols.end]).assign(&dk);
                dqkv.slice_mut(s![.., 2 * d + cols.start..2 * d + cols.end])
                    .assign(&dv);
            }
            g.qkv += &c.ln1_out.t().dot(&dqkv);
            g.qkv_bias += &dqkv.sum_axis(Axis(0));
            let dln1 = dqkv.dot(&l.qkv.t());
            dx += &layer_norm_backward(&dln1, &c.ln1, &l.ln1_gain, &mut g.ln1_gain, &mut g.ln1_bias);
        }

        if let Some(m) = &cache.embed_mask {
            dx *= m;
        }
        for (i, row) in dx.rows().into_iter().enumerate() {
            grads.word_emb.row_mut(seq.tokens[i] as usize).scaled_add(1.0, &row);
            grads.abs_pos_emb.row_mut(i).scaled_add(1.0, &row);
            grads.vowel_emb.row_mut(seq.vowels[i].index()).scaled_add(1.0, &row);
            grads.intra_pos_emb.row_mut(seq.intra_pos[i]).scaled_add(1.0, &row);
            grads.sentence_emb.row_mut(seq.sent_idx[i]).scaled_add(1.0, &row);
        }
        nll
    }

    /// Summed NLL of `seq` and its gradient (dropout off).
    pub fn loss_and_grad(&self, seq: &FeatureSequence) -> Result<(f64, ModelParams)> {
        let cache = self.forward(seq)?;
        let mut grads = self.zeros_like();
        let nll = self.backward(seq, &cache, 1.0, &mut grads);
        Ok((nll, grads))
    }
}
