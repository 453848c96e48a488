//! Autoregressive Transformer decoder over [`FeatureSequence`]s.
//!
//! The input at each position is the sum of five embeddings: word, absolute
//! position, vowel, intra-sentence position and sentence index. The decoder
//! stack is pre-norm (LayerNorm → attention / MLP → residual) with causal
//! self-attention and a tanh-GELU MLP. All arithmetic is `f64`.

mod checkpoint;
mod incremental;
mod params;
mod train;
mod transformer;

use ndarray::Array2;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use incremental::IncrementalDecoder;
pub use params::{LayerParams, ModelParams};
pub use train::{train, train_with, Adam, Phase, TrainConfig, TrainReport};
pub use transformer::ForwardCache;

use crate::corpus::{FeatureSequence, PAD};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    /// Size of the vowel table, including the null slot.
    pub n_vowels: usize,
    pub hidden_size: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    /// MLP width as a multiple of `hidden_size`.
    pub ffn_mult: usize,
    pub max_abs_pos: usize,
    pub max_intra_pos: usize,
    pub max_sentences: usize,
    /// Share the word embedding with the output projection.
    pub tie_embeddings: bool,
    pub init_std: f64,
}

impl ModelConfig {
    /// Laptop-sized preset: hidden 128, 4 heads, 2 layers.
    pub fn desk(vocab_size: usize, n_vowels: usize) -> Self {
        Self {
            vocab_size,
            n_vowels,
            hidden_size: 128,
            n_heads: 4,
            n_layers: 2,
            ffn_mult: 4,
            max_abs_pos: 1024,
            max_intra_pos: 32,
            max_sentences: 128,
            tie_embeddings: false,
            init_std: 0.02,
        }
    }

    /// GPT-2-small sized: hidden 768, 12 heads, 12 layers.
    pub fn large(vocab_size: usize, n_vowels: usize) -> Self {
        Self {
            hidden_size: 768,
            n_heads: 12,
            n_layers: 12,
            ..Self::desk(vocab_size, n_vowels)
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.n_heads
    }

    pub fn ffn_size(&self) -> usize {
        self.hidden_size * self.ffn_mult
    }

    pub fn validate(&self) -> Result<()> {
        let caps = [
            ("vocab_size", self.vocab_size),
            ("n_vowels", self.n_vowels),
            ("hidden_size", self.hidden_size),
            ("n_heads", self.n_heads),
            ("n_layers", self.n_layers),
            ("ffn_mult", self.ffn_mult),
            ("max_abs_pos", self.max_abs_pos),
            ("max_intra_pos", self.max_intra_pos),
            ("max_sentences", self.max_sentences),
        ];
        if let Some((name, _)) = caps.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if self.hidden_size % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "hidden_size {} is not divisible by n_heads {}",
                self.hidden_size, self.n_heads
            )));
        }
        if !(self.init_std.is_finite() && self.init_std >= 0.0) {
            return Err(Error::Config("init_std must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Parameter count implied by the shapes.
    pub fn param_count(&self) -> usize {
        let d = self.hidden_size;
        let f = self.ffn_size();
        let v = self.vocab_size;
        let embeddings =
            (v + self.max_abs_pos + self.n_vowels + self.max_intra_pos + self.max_sentences) * d;
        let layer = 2 * d + (d * 3 * d + 3 * d) + (d * d + d) + 2 * d + (d * f + f) + (f * d + d);
        let head = 2 * d + if self.tie_embeddings { 0 } else { d * v } + v;
        embeddings + self.n_layers * layer + head
    }

    /// Checks every feature index of `seq` against the table sizes.
    pub fn check_sequence(&self, seq: &FeatureSequence) -> Result<()> {
        if seq.is_empty() {
            return Err(Error::invalid("empty sequence"));
        }
        if seq.len() > self.max_abs_pos {
            return Err(Error::invalid(format!(
                "sequence length {} exceeds max_abs_pos {}",
                seq.len(),
                self.max_abs_pos
            )));
        }
        for i in 0..seq.len() {
            let bad = if seq.tokens[i] as usize >= self.vocab_size {
                Some("token")
            } else if seq.vowels[i].index() >= self.n_vowels {
                Some("vowel")
            } else if seq.intra_pos[i] >= self.max_intra_pos {
                Some("intra-sentence position")
            } else if seq.sent_idx[i] >= self.max_sentences {
                Some("sentence index")
            } else {
                None
            };
            if let Some(what) = bad {
                return Err(Error::invalid(format!("{what} out of range at position {i}")));
            }
        }
        Ok(())
    }
}

/// Anything that yields next-token distributions under teacher forcing.
pub trait NextTokenModel {
    fn vocab_size(&self) -> usize;

    /// Row `i` is the distribution of token `i + 1` given tokens `0..=i`.
    fn next_token_probs(&self, seq: &FeatureSequence) -> Result<Array2<f64>>;
}

impl NextTokenModel for ModelParams {
    fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn next_token_probs(&self, seq: &FeatureSequence) -> Result<Array2<f64>> {
        Ok(self.forward(seq)?.probs)
    }
}

/// Teacher-forced targets: `(row, target_token)` for every non-pad successor.
pub fn targets(seq: &FeatureSequence) -> impl Iterator<Item = (usize, u32)> + '_ {
    seq.tokens
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] != PAD && w[0] != PAD)
        .map(|(i, w)| (i, w[1]))
}

/// Summed negative log-likelihood and number of predicted tokens.
pub fn corpus_nll<M: NextTokenModel + ?Sized>(
    model: &M,
    corpus: &[FeatureSequence],
) -> Result<(f64, usize)> {
    let mut nll = 0.0;
    let mut count = 0usize;
    for seq in corpus {
        let probs = model.next_token_probs(seq)?;
        for (i, t) in targets(seq) {
            nll -= probs[[i, t as usize]].ln();
            count += 1;
        }
    }
    Ok((nll, count))
}

/// `exp(mean NLL)` over every predicted token, control tokens included.
pub fn perplexity<M: NextTokenModel + ?Sized>(model: &M, corpus: &[FeatureSequence]) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::invalid("perplexity of an empty corpus"));
    }
    let (nll, count) = corpus_nll(model, corpus)?;
    if count == 0 {
        return Err(Error::invalid("corpus has no predictable tokens"));
    }
    Ok((nll / count as f64).exp())
}
