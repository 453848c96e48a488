//! Generation with the N-gram rhyme constraint.
//!
//! Songs are generated the way they are trained: `[START]`, an optional
//! frequency token, the seed sentence, and then new sentences, each written
//! right to left. While the first words of the new sentence keep matching
//! the vowels of the previous sentence, the next-word distribution is blended
//! with a rhyme indicator:
//!
//! ```text
//! q(w) ∝ α·p(w) + (1 − α)·π(w),   π(w) = 1 iff vowel(w) is the target vowel
//! ```
//!
//! and the next token is drawn from `q`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::FreqLabel;
use crate::corpus::{
    decode_sequence, freq_token, push_sentence, push_token, EncodeConfig, FeatureSequence, PositionTracker, Sentence,
    Song, TokenId, Vocab, BEAT, NUM_SPECIAL, SEP, START,
};
use crate::error::{Error, Result};
use crate::model::{IncrementalDecoder, ModelParams};
use crate::vowel::VowelId;

/// Rhyme bookkeeping for the sentence being generated.
#[derive(Debug, Clone, PartialEq)]
pub struct RhymeState {
    /// Vowels of the previous sentence's words, by intra-sentence position.
    pub prev_sentence_vowels: Vec<VowelId>,
    /// Vowels of the current sentence so far.
    pub current_vowels: Vec<VowelId>,
    /// Leading positions of the current sentence that rhyme with the previous one.
    pub current_matched: usize,
    pub n_max: usize,
    pub alpha: f64,
}

impl RhymeState {
    pub fn new(n_max: usize, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!("alpha must be in [0, 1], got {alpha}")));
        }
        Ok(Self {
            prev_sentence_vowels: Vec::new(),
            current_vowels: Vec::new(),
            current_matched: 0,
            n_max,
            alpha,
        })
    }

    /// Starts a sentence that must rhyme with `prev`.
    pub fn with_previous(mut self, prev: Vec<VowelId>) -> Self {
        self.prev_sentence_vowels = prev;
        self.current_vowels.clear();
        self.current_matched = 0;
        self
    }

    /// Whether the word at position `i` must be pushed towards a rhyme: the
    /// chain so far is unbroken, `i` is below the cap, and the previous
    /// sentence has a (known) vowel there.
    pub fn constraint_active(&self, i: usize) -> bool {
        i < self.n_max
            && self.current_matched == i
            && self.prev_sentence_vowels.get(i).is_some_and(|v| !v.is_null())
    }

    /// The vowel the word at position `i` should carry, if constrained.
    pub fn target(&self, i: usize) -> Option<VowelId> {
        self.constraint_active(i).then(|| self.prev_sentence_vowels[i])
    }

    /// Records an emitted word; extends the matched prefix if it continues the chain.
    pub fn observe_word(&mut self, vowel: VowelId) {
        let i = self.current_vowels.len();
        if self.constraint_active(i) && self.prev_sentence_vowels[i] == vowel {
            self.current_matched += 1;
        }
        self.current_vowels.push(vowel);
    }

    /// `[SEP]`: the finished sentence becomes the rhyme target of the next one.
    pub fn end_sentence(&mut self) {
        self.prev_sentence_vowels = std::mem::take(&mut self.current_vowels);
        self.current_matched = 0;
    }
}

/// Blends `p` with the rhyme indicator for `target` and renormalizes.
///
/// `token_vowels[t]` is the vowel of token `t`; control tokens never count
/// as rhyming. At `alpha == 1` the input is returned unchanged. If no token
/// carries the target vowel and `alpha == 0`, nothing is left to renormalize
/// and `p` is returned as well.
pub fn adjusted_distribution(p: &[f64], target: VowelId, token_vowels: &[VowelId], alpha: f64) -> Result<Vec<f64>> {
    if target.is_null() {
        return Err(Error::invalid("rhyme target is the null vowel"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must be in [0, 1], got {alpha}")));
    }
    if p.len() != token_vowels.len() {
        return Err(Error::invalid(format!(
            "distribution has {} entries but the vocabulary has {}",
            p.len(),
            token_vowels.len()
        )));
    }
    if alpha == 1.0 {
        return Ok(p.to_vec());
    }
    let mut q: Vec<f64> = p
        .iter()
        .zip(token_vowels)
        .enumerate()
        .map(|(t, (&pt, &v))| {
            let rhymes = t >= NUM_SPECIAL && v == target;
            alpha * pt + if rhymes { 1.0 - alpha } else { 0.0 }
        })
        .collect();
    let total: f64 = q.iter().sum();
    if total <= 0.0 {
        return Ok(p.to_vec());
    }
    for v in &mut q {
        *v /= total;
    }
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingMode {
    /// Highest `q`; ties go to the higher model probability, then the lower id.
    Argmax,
    /// Sample from `q^(1/T)`.
    Temperature(f64),
    /// Sample from the `k` most likely tokens of `q^(1/T)`.
    TopK { k: usize, temperature: f64 },
}

impl Default for SamplingMode {
    fn default() -> Self {
        SamplingMode::Temperature(1.0)
    }
}

impl SamplingMode {
    pub fn validate(&self) -> Result<()> {
        let t = match *self {
            SamplingMode::Argmax => return Ok(()),
            SamplingMode::Temperature(t) => t,
            SamplingMode::TopK { k, temperature } => {
                if k == 0 {
                    return Err(Error::Config("top-k needs k ≥ 1".into()));
                }
                temperature
            }
        };
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Config(format!("temperature must be positive, got {t}")));
        }
        Ok(())
    }
}

/// Index of the largest `q`, ties broken by `p` and then by the lower index.
pub fn argmax(q: &[f64], p: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..q.len() {
        if q[i] > q[best] || (q[i] == q[best] && p[i] > p[best]) {
            best = i;
        }
    }
    best
}

/// Draws an index with probability proportional to `weights`.
pub fn sample_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        if u < w {
            return i;
        }
        u -= w;
        last = i;
    }
    last
}

fn choose(q: &[f64], p: &[f64], mode: SamplingMode, rng: &mut impl Rng) -> usize {
    let tempered = |t: f64| -> Vec<f64> {
        if t == 1.0 {
            q.to_vec()
        } else {
            q.iter().map(|&x| if x > 0.0 { x.powf(1.0 / t) } else { 0.0 }).collect()
        }
    };
    match mode {
        SamplingMode::Argmax => argmax(q, p),
        SamplingMode::Temperature(t) => sample_index(&tempered(t), rng),
        SamplingMode::TopK { k, temperature } => {
            let mut w = tempered(temperature);
            let mut order: Vec<usize> = (0..q.len()).collect();
            order.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(p[b].total_cmp(&p[a])).then(a.cmp(&b)));
            for &i in order.iter().skip(k) {
                w[i] = 0.0;
            }
            sample_index(&w, rng)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenControls {
    /// First sentence of the song, in reading order.
    pub seed_sentence: Sentence,
    pub freq: Option<FreqLabel>,
    /// Hard cap on the whole token stream, prefix included.
    pub max_tokens: usize,
    /// New sentences to write after the seed.
    pub max_sentences: usize,
    pub mode: SamplingMode,
    pub alpha: f64,
    pub ngram_max: usize,
    pub rng_seed: u64,
    /// Steps on which the model may put most of its mass on structurally
    /// impossible tokens before generation is abandoned.
    pub repair_budget: usize,
}

impl GenControls {
    pub fn new(seed_sentence: Sentence) -> Self {
        Self {
            seed_sentence,
            freq: None,
            max_tokens: 512,
            max_sentences: 8,
            mode: SamplingMode::default(),
            alpha: 0.95,
            ngram_max: 3,
            rng_seed: 0,
            repair_budget: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    /// Reading-order song; its first sentence is the seed.
    pub song: Song,
    /// Every emitted token, prefix included, in generation order.
    pub transcript: String,
    pub sequence: FeatureSequence,
    /// Complete sentences written after the seed.
    pub new_sentences: usize,
}

fn allowed(token: usize, last: TokenId) -> bool {
    match token as TokenId {
        BEAT => last != BEAT,
        SEP => Vocab::is_word(last) && last != BEAT,
        _ => token >= NUM_SPECIAL,
    }
}

/// Writes a song continuing `controls.seed_sentence`.
pub fn generate(params: &ModelParams, vocab: &Vocab, controls: &GenControls) -> Result<Generation> {
    let cfg = &params.config;
    if vocab.len() != cfg.vocab_size {
        return Err(Error::invalid(format!(
            "vocabulary has {} tokens but the model expects {}",
            vocab.len(),
            cfg.vocab_size
        )));
    }
    if controls.max_tokens > cfg.max_abs_pos {
        return Err(Error::Config(format!(
            "max_tokens {} exceeds the model context of {}",
            controls.max_tokens, cfg.max_abs_pos
        )));
    }
    controls.mode.validate()?;
    if controls.seed_sentence.is_empty() {
        return Err(Error::invalid("seed sentence is empty"));
    }
    if let Some(w) = controls.seed_sentence.words.iter().find(|w| vocab.id(&w.text).is_none()) {
        return Err(Error::UnknownWord(w.text.clone()));
    }
    if vocab.vowels().iter().any(|v| v.index() >= cfg.n_vowels) {
        return Err(Error::invalid("vocabulary vowel ids exceed the model's vowel table"));
    }

    let enc = EncodeConfig {
        max_len: cfg.max_abs_pos,
        intra_cap: cfg.max_intra_pos,
        sent_cap: cfg.max_sentences,
        pad: false,
    };
    let mut seq = FeatureSequence::default();
    let mut tracker = PositionTracker::default();
    push_token(&mut seq, &mut tracker, START, vocab, &enc);
    if let Some(label) = controls.freq {
        push_token(&mut seq, &mut tracker, freq_token(label), vocab, &enc);
    }
    push_sentence(&mut seq, &mut tracker, &controls.seed_sentence, vocab, &enc);
    if seq.len() >= controls.max_tokens {
        return Err(Error::Config(format!(
            "max_tokens {} leaves no room after the {}-token prefix",
            controls.max_tokens,
            seq.len()
        )));
    }

    let mut state = RhymeState::new(controls.ngram_max, controls.alpha)?.with_previous(
        controls
            .seed_sentence
            .reversed()
            .map(|w| vocab.vowel(vocab.id(&w.text).expect("checked above")))
            .collect(),
    );
    let mut decoder = IncrementalDecoder::new(params);
    let mut probs = Vec::new();
    for i in 0..seq.len() {
        probs = decoder.step(seq.tokens[i], seq.vowels[i], seq.intra_pos[i], seq.sent_idx[i])?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(controls.rng_seed);
    let mut last = SEP;
    let mut new_sentences = 0;
    let mut repairs = 0;
    while new_sentences < controls.max_sentences && seq.len() < controls.max_tokens {
        let mut masked: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(t, &pt)| if allowed(t, last) { pt } else { 0.0 })
            .collect();
        let mass: f64 = masked.iter().sum();
        if mass < 0.5 {
            repairs += 1;
            if repairs > controls.repair_budget {
                return Err(Error::Generation {
                    message: format!("model kept proposing invalid tokens ({repairs} repairs)"),
                    partial: seq.transcript(vocab),
                });
            }
        }
        if mass > 0.0 {
            masked.iter_mut().for_each(|v| *v /= mass);
        } else {
            let n = (0..masked.len()).filter(|&t| allowed(t, last)).count() as f64;
            for (t, v) in masked.iter_mut().enumerate() {
                *v = if allowed(t, last) { 1.0 / n } else { 0.0 };
            }
        }

        let intra = state.current_vowels.len();
        let q = match state.target(intra) {
            Some(target) => adjusted_distribution(&masked, target, vocab.vowels(), state.alpha)?,
            None => masked.clone(),
        };
        let token = choose(&q, &masked, controls.mode, &mut rng) as TokenId;
        push_token(&mut seq, &mut tracker, token, vocab, &enc);
        match token {
            SEP => {
                state.end_sentence();
                new_sentences += 1;
            }
            BEAT => {}
            w => state.observe_word(vocab.vowel(w)),
        }
        last = token;
        if new_sentences < controls.max_sentences && seq.len() < controls.max_tokens {
            let i = seq.len() - 1;
            probs = decoder.step(token, seq.vowels[i], seq.intra_pos[i], seq.sent_idx[i])?;
        }
    }

    let transcript = seq.transcript(vocab);
    if last != SEP {
        // token budget ran out mid-sentence
        seq.truncated = true;
    }
    let mut song = decode_sequence(&seq, vocab).map_err(|e| Error::Generation {
        message: e.to_string(),
        partial: transcript.clone(),
    })?;
    song.id = "generated".into();
    Ok(Generation {
        song,
        transcript,
        sequence: seq,
        new_sentences,
    })
}
