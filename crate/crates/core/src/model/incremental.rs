use ndarray::{s, Array1};

use super::transformer::{gelu, softmax_in_place, LN_EPS};
use super::ModelParams;
use crate::corpus::TokenId;
use crate::error::{Error, Result};
use crate::vowel::VowelId;

fn layer_norm(x: &Array1<f64>, gain: &Array1<f64>, bias: &Array1<f64>) -> Array1<f64> {
    let d = x.len() as f64;
    let mean = x.sum() / d;
    let centered = x.mapv(|v| v - mean);
    let var = centered.dot(&centered) / d;
    let r = 1.0 / (var + LN_EPS).sqrt();
    centered * r * gain + bias
}

/// Key/value-cached decoder for generation: one position per call, same
/// numbers as [`ModelParams::forward`] without recomputing the prefix.
#[derive(Debug, Clone)]
pub struct IncrementalDecoder<'a> {
    params: &'a ModelParams,
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    len: usize,
}

impl<'a> IncrementalDecoder<'a> {
    pub fn new(params: &'a ModelParams) -> Self {
        let n = params.config.n_layers;
        Self {
            params,
            keys: vec![Vec::new(); n],
            values: vec![Vec::new(); n],
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Appends one position and returns the distribution of the next token.
    pub fn step(&mut self, token: TokenId, vowel: VowelId, intra: usize, sent: usize) -> Result<Vec<f64>> {
        let p = self.params;
        let cfg = &p.config;
        let pos = self.len;
        if token as usize >= cfg.vocab_size
            || vowel.index() >= cfg.n_vowels
            || intra >= cfg.max_intra_pos
            || sent >= cfg.max_sentences
        {
            return Err(Error::invalid(format!("feature out of range at position {pos}")));
        }
        if pos >= cfg.max_abs_pos {
            return Err(Error::invalid(format!("context full at {pos} positions")));
        }
        let d = cfg.hidden_size;
        let dh = cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();

        let mut x = p.word_emb.row(token as usize).to_owned();
        x += &p.abs_pos_emb.row(pos);
        x += &p.vowel_emb.row(vowel.index());
        x += &p.intra_pos_emb.row(intra);
        x += &p.sentence_emb.row(sent);

        let n_ctx = pos + 1;
        for (li, l) in p.layers.iter().enumerate() {
            let a = layer_norm(&x, &l.ln1_gain, &l.ln1_bias);
            let qkv = a.dot(&l.qkv) + &l.qkv_bias;
            self.keys[li].extend(qkv.slice(s![d..2 * d]).iter());
            self.values[li].extend(qkv.slice(s![2 * d..]).iter());
            let keys = &self.keys[li];
            let values = &self.values[li];

            let mut heads = Array1::zeros(d);
            let mut w = vec![0.0; n_ctx];
            for h in 0..cfg.n_heads {
                let q = &qkv.as_slice().expect("contiguous")[h * dh..(h + 1) * dh];
                for (j, wj) in w.iter_mut().enumerate() {
                    let k = &keys[j * d + h * dh..j * d + (h + 1) * dh];
                    *wj = q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() * scale;
                }
                softmax_in_place(&mut w);
                for (j, &wj) in w.iter().enumerate() {
                    let v = &values[j * d + h * dh..j * d + (h + 1) * dh];
                    for (o, &vv) in heads.slice_mut(s![h * dh..(h + 1) * dh]).iter_mut().zip(v) {
                        *o += wj * vv;
                    }
                }
            }
            x += &(heads.dot(&l.attn_proj) + &l.attn_proj_bias);

            let b = layer_norm(&x, &l.ln2_gain, &l.ln2_bias);
            let hid = (b.dot(&l.ff_in) + &l.ff_in_bias).mapv(gelu);
            x += &(hid.dot(&l.ff_out) + &l.ff_out_bias);
        }
        self.len += 1;

        let f = layer_norm(&x, &p.final_ln_gain, &p.final_ln_bias);
        let logits = f.dot(&p.output_weights()) + &p.lm_head_bias;
        let mut probs = logits.to_vec();
        softmax_in_place(&mut probs);
        Ok(probs)
    }
}
