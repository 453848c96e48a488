use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ModelConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_gain: Array1<f64>,
    pub ln1_bias: Array1<f64>,
    /// `[d, 3d]`, columns are Q | K | V.
    pub qkv: Array2<f64>,
    pub qkv_bias: Array1<f64>,
    pub attn_proj: Array2<f64>,
    pub attn_proj_bias: Array1<f64>,
    pub ln2_gain: Array1<f64>,
    pub ln2_bias: Array1<f64>,
    pub ff_in: Array2<f64>,
    pub ff_in_bias: Array1<f64>,
    pub ff_out: Array2<f64>,
    pub ff_out_bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub word_emb: Array2<f64>,
    pub abs_pos_emb: Array2<f64>,
    pub vowel_emb: Array2<f64>,
    pub intra_pos_emb: Array2<f64>,
    pub sentence_emb: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub final_ln_gain: Array1<f64>,
    pub final_ln_bias: Array1<f64>,
    /// `[d, V]`; `None` when tied to `word_emb`.
    pub lm_head: Option<Array2<f64>>,
    pub lm_head_bias: Array1<f64>,
}

impl ModelParams {
    /// Normal(0, init_std) matrices and embedding tables, unit LayerNorm
    /// gains, zero biases. Deterministic in `seed`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, config.init_std).expect("validated std");
        let mut mat = |rows: usize, cols: usize| {
            Array2::from_shape_simple_fn((rows, cols), || normal.sample(&mut rng))
        };
        let d = config.hidden_size;
        let f = config.ffn_size();
        let word_emb = mat(config.vocab_size, d);
        let abs_pos_emb = mat(config.max_abs_pos, d);
        let vowel_emb = mat(config.n_vowels, d);
        let intra_pos_emb = mat(config.max_intra_pos, d);
        let sentence_emb = mat(config.max_sentences, d);
        let layers = (0..config.n_layers)
            .map(|_| LayerParams {
                ln1_gain: Array1::ones(d),
                ln1_bias: Array1::zeros(d),
                qkv: mat(d, 3 * d),
                qkv_bias: Array1::zeros(3 * d),
                attn_proj: mat(d, d),
                attn_proj_bias: Array1::zeros(d),
                ln2_gain: Array1::ones(d),
                ln2_bias: Array1::zeros(d),
                ff_in: mat(d, f),
                ff_in_bias: Array1::zeros(f),
                ff_out: mat(f, d),
                ff_out_bias: Array1::zeros(d),
            })
            .collect();
        let lm_head = (!config.tie_embeddings).then(|| mat(d, config.vocab_size));
        Ok(Self {
            config: *config,
            word_emb,
            abs_pos_emb,
            vowel_emb,
            intra_pos_emb,
            sentence_emb,
            layers,
            final_ln_gain: Array1::ones(d),
            final_ln_bias: Array1::zeros(d),
            lm_head,
            lm_head_bias: Array1::zeros(config.vocab_size),
        })
    }

    /// Same shapes, all zeros. Used for gradients and optimizer moments.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_tensor_mut(|_, t| t.fill(0.0));
        z
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    /// `(name, shape, data)` in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        fn m(name: String, a: &Array2<f64>) -> (String, Vec<usize>, &[f64]) {
            (name, a.shape().to_vec(), a.as_slice().expect("standard layout"))
        }
        fn v(name: String, a: &Array1<f64>) -> (String, Vec<usize>, &[f64]) {
            (name, a.shape().to_vec(), a.as_slice().expect("standard layout"))
        }
        let mut out = vec![
            m("word_emb".into(), &self.word_emb),
            m("abs_pos_emb".into(), &self.abs_pos_emb),
            m("vowel_emb".into(), &self.vowel_emb),
            m("intra_pos_emb".into(), &self.intra_pos_emb),
            m("sentence_emb".into(), &self.sentence_emb),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            out.extend([
                v(format!("layers.{i}.ln1_gain"), &l.ln1_gain),
                v(format!("layers.{i}.ln1_bias"), &l.ln1_bias),
                m(format!("layers.{i}.qkv"), &l.qkv),
                v(format!("layers.{i}.qkv_bias"), &l.qkv_bias),
                m(format!("layers.{i}.attn_proj"), &l.attn_proj),
                v(format!("layers.{i}.attn_proj_bias"), &l.attn_proj_bias),
                v(format!("layers.{i}.ln2_gain"), &l.ln2_gain),
                v(format!("layers.{i}.ln2_bias"), &l.ln2_bias),
                m(format!("layers.{i}.ff_in"), &l.ff_in),
                v(format!("layers.{i}.ff_in_bias"), &l.ff_in_bias),
                m(format!("layers.{i}.ff_out"), &l.ff_out),
                v(format!("layers.{i}.ff_out_bias"), &l.ff_out_bias),
            ]);
        }
        out.push(v("final_ln_gain".into(), &self.final_ln_gain));
        out.push(v("final_ln_bias".into(), &self.final_ln_bias));
        if let Some(h) = &self.lm_head {
            out.push(m("lm_head".into(), h));
        }
        out.push(v("lm_head_bias".into(), &self.lm_head_bias));
        out
    }

    /// Mutable view of every tensor, same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        fn s<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
            a.as_slice_mut().expect("standard layout")
        }
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("word_emb".into(), s(&mut self.word_emb)),
            ("abs_pos_emb".into(), s(&mut self.abs_pos_emb)),
            ("vowel_emb".into(), s(&mut self.vowel_emb)),
            ("intra_pos_emb".into(), s(&mut self.intra_pos_emb)),
            ("sentence_emb".into(), s(&mut self.sentence_emb)),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("layers.{i}.ln1_gain"), s(&mut l.ln1_gain)));
            out.push((format!("layers.{i}.ln1_bias"), s(&mut l.ln1_bias)));
            out.push((format!("layers.{i}.qkv"), s(&mut l.qkv)));
            out.push((format!("layers.{i}.qkv_bias"), s(&mut l.qkv_bias)));
            out.push((format!("layers.{i}.attn_proj"), s(&mut l.attn_proj)));
            out.push((format!("layers.{i}.attn_proj_bias"), s(&mut l.attn_proj_bias)));
            out.push((format!("layers.{i}.ln2_gain"), s(&mut l.ln2_gain)));
            out.push((format!("layers.{i}.ln2_bias"), s(&mut l.ln2_bias)));
            out.push((format!("layers.{i}.ff_in"), s(&mut l.ff_in)));
            out.push((format!("layers.{i}.ff_in_bias"), s(&mut l.ff_in_bias)));
            out.push((format!("layers.{i}.ff_out"), s(&mut l.ff_out)));
            out.push((format!("layers.{i}.ff_out_bias"), s(&mut l.ff_out_bias)));
        }
        out.push(("final_ln_gain".into(), s(&mut self.final_ln_gain)));
        out.push(("final_ln_bias".into(), s(&mut self.final_ln_bias)));
        if let Some(h) = &mut self.lm_head {
            out.push(("lm_head".into(), s(h)));
        }
        out.push(("lm_head_bias".into(), s(&mut self.lm_head_bias)));
        out
    }

    pub fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&str, &mut [f64])) {
        for (name, t) in self.tensors_mut() {
            f(&name, t);
        }
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn add_scaled(&mut self, alpha: f64, other: &ModelParams) {
        let src = other.tensors();
        for ((_, dst), (_, _, src)) in self.tensors_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, _, t)| t.iter().all(|x| x.is_finite()))
    }
}
