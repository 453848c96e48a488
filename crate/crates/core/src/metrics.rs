//! Objective metrics for corpora and models.
//!
//! Corpus metrics (rhyme density, Combo-N, beat-interval distributions,
//! rhyme repetition) only need a way to look up vowels. Model metrics
//! (perplexity, rhyme accuracy, beat accuracy) run the model under teacher
//! forcing on encoded songs.
//!
//! Rhymes are always read right to left: position 0 is the last word of a
//! sentence. Two sentences share a k-gram rhyme when their first k reversed
//! words have equal, known vowels.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Array2;

use crate::corpus::{encode_training_sequence, EncodeConfig, FeatureSequence, Sentence, Song, Vocab, BEAT, NUM_SPECIAL, SEP, START};
use crate::error::{Error, Result};
use crate::model::{corpus_nll, targets, NextTokenModel};
use crate::vowel::{VowelDictionary, VowelId, NULL_VOWEL};

/// Word → vowel lookup. Unknown words map to `NULL_VOWEL`, which rhymes with nothing.
pub trait RhymeLookup {
    fn vowel(&self, word: &str) -> VowelId;
}

impl RhymeLookup for VowelDictionary {
    fn vowel(&self, word: &str) -> VowelId {
        self.vowel_of(word).unwrap_or(NULL_VOWEL)
    }
}

impl RhymeLookup for Vocab {
    fn vowel(&self, word: &str) -> VowelId {
        self.id(word).map_or(NULL_VOWEL, |id| Vocab::vowel(self, id))
    }
}

fn reversed_vowels(s: &Sentence, lookup: &dyn RhymeLookup) -> Vec<VowelId> {
    s.reversed().map(|w| lookup.vowel(&w.text)).collect()
}

/// Length of the shared rhyme of two reversed vowel sequences.
pub fn rhyme_length(a: &[VowelId], b: &[VowelId]) -> usize {
    a.iter()
        .zip(b)
        .take_while(|(x, y)| !x.is_null() && x == y)
        .count()
}

/// Rhyme lengths of each consecutive sentence pair of a song.
pub fn pair_rhyme_lengths(song: &Song, lookup: &dyn RhymeLookup) -> Vec<usize> {
    let vowels: Vec<Vec<VowelId>> = song.sentences.iter().map(|s| reversed_vowels(s, lookup)).collect();
    vowels.windows(2).map(|w| rhyme_length(&w[0], &w[1])).collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Longest rhyme between any two consecutive sentences of the song.
pub fn song_rhyme_density(song: &Song, lookup: &dyn RhymeLookup) -> usize {
    pair_rhyme_lengths(song, lookup).into_iter().max().unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RdVariant {
    /// Longest rhyme of each song, averaged over songs.
    #[default]
    LongestRhyme,
    /// Per-word average of the longest vowel match with a word in the
    /// preceding 15-word window (the density used in earlier rap work).
    PerWord,
}

/// Mean over songs of [`song_rhyme_density`]; 0 for an empty corpus.
pub fn rhyme_density(songs: &[Song], lookup: &dyn RhymeLookup) -> f64 {
    mean(songs.iter().map(|s| song_rhyme_density(s, lookup) as f64))
}

/// Per-word rhyme density. For every word, the longest run of equal vowels
/// ending at it and at one of the 15 words before it, without the two runs
/// overlapping; averaged over the words of the corpus.
pub fn per_word_rhyme_density(songs: &[Song], lookup: &dyn RhymeLookup) -> f64 {
    const WINDOW: usize = 15;
    let mut total = 0usize;
    let mut words = 0usize;
    for song in songs {
        let v: Vec<VowelId> = song.words().map(|w| lookup.vowel(&w.text)).collect();
        for i in 0..v.len() {
            let mut best = 0;
            for j in i.saturating_sub(WINDOW)..i {
                let mut k = 0;
                while k < i - j && k <= j && !v[i - k].is_null() && v[i - k] == v[j - k] {
                    k += 1;
                }
                best = best.max(k);
            }
            total += best;
            words += 1;
        }
    }
    if words == 0 {
        0.0
    } else {
        total as f64 / words as f64
    }
}

/// Longest run of consecutive sentences in which every neighbouring pair
/// shares an `n`-gram rhyme. A lone sentence is a run of 1; an empty song 0.
pub fn song_combo_n(song: &Song, lookup: &dyn RhymeLookup, n: usize) -> usize {
    if song.sentences.is_empty() {
        return 0;
    }
    let mut best = 1;
    let mut run = 1;
    for len in pair_rhyme_lengths(song, lookup) {
        run = if len >= n { run + 1 } else { 1 };
        best = best.max(run);
    }
    best
}

pub fn combo_n(songs: &[Song], lookup: &dyn RhymeLookup, n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::invalid("Combo-N needs N ≥ 1"));
    }
    Ok(mean(songs.iter().map(|s| song_combo_n(s, lookup, n) as f64)))
}

/// Share (percent) of rhyming word occurrences that repeat the word at the
/// same position of the previous sentence. A word at reversed position `t`
/// of sentence `s` is a rhyming occurrence when sentences `s − 1` and `s`
/// share a rhyme longer than `t`. 0 when the corpus has no rhymes.
pub fn rhyme_repetition_rate(songs: &[Song], lookup: &dyn RhymeLookup) -> f64 {
    let (mut occurrences, mut repeats) = (0usize, 0usize);
    for song in songs {
        for (pair, len) in song.sentences.windows(2).zip(pair_rhyme_lengths(song, lookup)) {
            let prev: Vec<&str> = pair[0].reversed().map(|w| w.text.as_str()).collect();
            for (t, w) in pair[1].reversed().take(len).enumerate() {
                occurrences += 1;
                if w.text == prev[t] {
                    repeats += 1;
                }
            }
        }
    }
    if occurrences == 0 {
        0.0
    } else {
        100.0 * repeats as f64 / occurrences as f64
    }
}

/// Normalized histogram over integer values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalDistribution {
    masses: BTreeMap<i64, f64>,
}

impl IntervalDistribution {
    pub fn from_values(values: &[i64]) -> Self {
        let mut counts = BTreeMap::new();
        for &v in values {
            *counts.entry(v).or_insert(0usize) += 1;
        }
        Self::from_counts(&counts)
    }

    pub fn from_counts(counts: &BTreeMap<i64, usize>) -> Self {
        let total: usize = counts.values().sum();
        let masses = counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(&k, &c)| (k, c as f64 / total as f64))
            .collect();
        Self { masses }
    }

    /// From explicit masses; they must be non-negative and sum to 1.
    pub fn from_masses(masses: impl IntoIterator<Item = (i64, f64)>) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (k, m) in masses {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::invalid(format!("bad mass {m} at {k}")));
            }
            if m > 0.0 {
                *out.entry(k).or_insert(0.0) += m;
            }
        }
        let total: f64 = out.values().sum();
        if !out.is_empty() && (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { masses: out })
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn mass(&self, value: i64) -> f64 {
        self.masses.get(&value).copied().unwrap_or(0.0)
    }

    /// `(value, mass)` in increasing value order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.masses.iter().map(|(&k, &m)| (k, m))
    }

    pub fn min(&self) -> Option<i64> {
        self.masses.keys().next().copied()
    }

    pub fn max(&self) -> Option<i64> {
        self.masses.keys().next_back().copied()
    }
}

/// Word indices (reading order, whole song) of the beat words.
fn beat_positions(song: &Song) -> Vec<i64> {
    song.words()
        .enumerate()
        .filter(|(_, w)| w.beat)
        .map(|(i, _)| i as i64)
        .collect()
}

/// Words strictly between consecutive beats of a song.
pub fn beat_intervals(song: &Song) -> Vec<i64> {
    beat_positions(song).windows(2).map(|w| w[1] - w[0] - 1).collect()
}

/// Pooled first-order (intervals) and second-order (next interval minus
/// current) distributions. Songs with fewer than two beats add nothing to
/// the first, fewer than three nothing to the second.
pub fn beat_interval_distributions(songs: &[Song]) -> (IntervalDistribution, IntervalDistribution) {
    let mut first = Vec::new();
    let mut second = Vec::new();
    for song in songs {
        let iv = beat_intervals(song);
        second.extend(iv.windows(2).map(|w| w[1] - w[0]));
        first.extend(iv);
    }
    (IntervalDistribution::from_values(&first), IntervalDistribution::from_values(&second))
}

/// 1-Wasserstein distance between two integer distributions, normalized to
/// [0, 1]. For non-negative supports (beat intervals) the divisor is the
/// longest value observed in either; signed supports (interval differences)
/// divide by the extent of the combined support widened to include zero.
pub fn wasserstein_1d(a: &IntervalDistribution, b: &IntervalDistribution) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Wasserstein distance of an empty distribution"));
    }
    let lo = a.min().unwrap().min(b.min().unwrap());
    let hi = a.max().unwrap().max(b.max().unwrap());
    let scale = hi.max(0) - lo.min(0);
    if lo == hi || scale == 0 {
        return Ok(0.0);
    }
    let (mut ca, mut cb, mut w) = (0.0, 0.0, 0.0);
    for x in lo..hi {
        ca += a.mass(x);
        cb += b.mass(x);
        w += (ca - cb).abs();
    }
    Ok(w / scale as f64)
}

/// Words per beat. A song without beats counts as one beat spread over all
/// its words.
pub fn beat_frequency_ratio(song: &Song) -> f64 {
    song.word_count() as f64 / song.beat_count().max(1) as f64
}

fn word_argmax(row: ndarray::ArrayView1<'_, f64>) -> usize {
    let mut best = NUM_SPECIAL;
    for t in NUM_SPECIAL..row.len() {
        if row[t] > row[best] {
            best = t;
        }
    }
    best
}

fn full_argmax(row: ndarray::ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for t in 1..row.len() {
        if row[t] > row[best] {
            best = t;
        }
    }
    best
}

/// `(correct, eligible)` rhyme predictions of one song.
fn ra_counts(probs: &Array2<f64>, seq: &FeatureSequence, vocab: &Vocab) -> (usize, usize) {
    let (mut correct, mut eligible) = (0, 0);
    let mut prev_first: Option<VowelId> = None;
    let mut current_first: Option<VowelId> = None;
    for i in 1..seq.unpadded_len() {
        let t = seq.tokens[i];
        if t == SEP {
            prev_first = current_first.take();
            continue;
        }
        if Vocab::is_word(t) && current_first.is_none() {
            current_first = Some(seq.vowels[i]);
            if let Some(target) = prev_first.filter(|v| !v.is_null()) {
                eligible += 1;
                let predicted = word_argmax(probs.row(i - 1)) as u32;
                if vocab.vowel(predicted) == target {
                    correct += 1;
                }
            }
        }
    }
    (correct, eligible)
}

/// `(agreeing, total)` beat/no-beat decisions of one song.
fn ba_counts(probs: &Array2<f64>, seq: &FeatureSequence) -> (usize, usize) {
    let (mut agree, mut total) = (0, 0);
    for (i, target) in targets(seq) {
        total += 1;
        if (full_argmax(probs.row(i)) as u32 == BEAT) == (target == BEAT) {
            agree += 1;
        }
    }
    (agree, total)
}

/// Teacher-forced rhyme accuracy (percent). At the first word of every
/// sentence after the first, the model's most likely word must carry the
/// vowel of the previous sentence's first (reversed) word. Sentences whose
/// predecessor starts with an unknown vowel are skipped. `None` when no
/// sentence is eligible.
pub fn rhyme_accuracy<M: NextTokenModel + ?Sized>(
    model: &M,
    seqs: &[FeatureSequence],
    vocab: &Vocab,
) -> Result<Option<f64>> {
    let (mut c, mut e) = (0, 0);
    for seq in seqs {
        let (ci, ei) = ra_counts(&model.next_token_probs(seq)?, seq, vocab);
        c += ci;
        e += ei;
    }
    Ok((e > 0).then(|| 100.0 * c as f64 / e as f64))
}

/// Teacher-forced beat accuracy (percent): at every step, whether the most
/// likely token is `[BEAT]` must agree with whether the true next token is.
pub fn beat_accuracy<M: NextTokenModel + ?Sized>(model: &M, seqs: &[FeatureSequence]) -> Result<Option<f64>> {
    let (mut a, mut t) = (0, 0);
    for seq in seqs {
        let (ai, ti) = ba_counts(&model.next_token_probs(seq)?, seq);
        a += ai;
        t += ti;
    }
    Ok((t > 0).then(|| 100.0 * a as f64 / t as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsOptions {
    pub rd_variant: RdVariant,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub songs: usize,
    pub sentences: usize,
    pub ppl: Option<f64>,
    pub ra: Option<f64>,
    pub rd: f64,
    pub combo1: f64,
    pub combo2: f64,
    pub combo3: f64,
    pub ba: Option<f64>,
    /// Beat-interval distributions of the evaluated corpus.
    pub fod_dist: IntervalDistribution,
    pub sod_dist: IntervalDistribution,
    /// Normalized distances to a reference corpus.
    pub fod: Option<f64>,
    pub sod: Option<f64>,
    pub rhyme_repetition: f64,
    pub beat_frequency: f64,
}

impl MetricsReport {
    /// Corpus-only metrics.
    pub fn for_corpus(songs: &[Song], lookup: &dyn RhymeLookup, opts: &MetricsOptions) -> Self {
        let (fod_dist, sod_dist) = beat_interval_distributions(songs);
        Self {
            songs: songs.len(),
            sentences: songs.iter().map(|s| s.sentences.len()).sum(),
            rd: match opts.rd_variant {
                RdVariant::LongestRhyme => rhyme_density(songs, lookup),
                RdVariant::PerWord => per_word_rhyme_density(songs, lookup),
            },
            combo1: mean(songs.iter().map(|s| song_combo_n(s, lookup, 1) as f64)),
            combo2: mean(songs.iter().map(|s| song_combo_n(s, lookup, 2) as f64)),
            combo3: mean(songs.iter().map(|s| song_combo_n(s, lookup, 3) as f64)),
            fod_dist,
            sod_dist,
            rhyme_repetition: rhyme_repetition_rate(songs, lookup),
            beat_frequency: mean(songs.iter().map(beat_frequency_ratio)),
            ..Self::default()
        }
    }

    /// Adds perplexity, rhyme accuracy and beat accuracy of `model` on `songs`.
    pub fn add_model<M: NextTokenModel + ?Sized>(
        &mut self,
        model: &M,
        vocab: &Vocab,
        songs: &[Song],
        cfg: &EncodeConfig,
    ) -> Result<()> {
        let (mut nll, mut count) = (0.0, 0usize);
        let (mut rc, mut re, mut ba, mut bt) = (0, 0, 0, 0);
        for song in songs {
            let seq = encode_training_sequence(song, vocab, cfg);
            if seq.tokens.first() != Some(&START) {
                return Err(Error::invalid("encoded song does not start with [START]"));
            }
            let probs = model.next_token_probs(&seq)?;
            for (i, t) in targets(&seq) {
                nll -= probs[[i, t as usize]].ln();
                count += 1;
            }
            let (c, e) = ra_counts(&probs, &seq, vocab);
            let (a, t) = ba_counts(&probs, &seq);
            rc += c;
            re += e;
            ba += a;
            bt += t;
        }
        if count == 0 {
            return Err(Error::invalid("corpus has no predictable tokens"));
        }
        self.ppl = Some((nll / count as f64).exp());
        self.ra = (re > 0).then(|| 100.0 * rc as f64 / re as f64);
        self.ba = (bt > 0).then(|| 100.0 * ba as f64 / bt as f64);
        Ok(())
    }

    /// Adds FOD/SOD distances to a reference corpus. A distance stays
    /// `None` when either side has no intervals of that order.
    pub fn add_reference(&mut self, reference: &[Song]) -> Result<()> {
        let (rf, rs) = beat_interval_distributions(reference);
        let distance = |a: &IntervalDistribution, b: &IntervalDistribution| {
            if a.is_empty() || b.is_empty() {
                Ok(None)
            } else {
                wasserstein_1d(a, b).map(Some)
            }
        };
        self.fod = distance(&self.fod_dist, &rf)?;
        self.sod = distance(&self.sod_dist, &rs)?;
        Ok(())
    }

    /// `(name, value)` pairs; absent metrics are left out.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("songs".to_string(), self.songs as f64),
            ("sentences".to_string(), self.sentences as f64),
        ];
        let optional = [("ppl", self.ppl), ("ra", self.ra)];
        out.extend(optional.iter().filter_map(|(n, v)| v.map(|v| (n.to_string(), v))));
        out.push(("rd".into(), self.rd));
        out.push(("combo1".into(), self.combo1));
        out.push(("combo2".into(), self.combo2));
        out.push(("combo3".into(), self.combo3));
        if let Some(v) = self.ba {
            out.push(("ba".into(), v));
        }
        if let Some(v) = self.fod {
            out.push(("fod".into(), v));
        }
        if let Some(v) = self.sod {
            out.push(("sod".into(), v));
        }
        out.push(("rhyme_repetition".into(), self.rhyme_repetition));
        out.push(("beat_frequency".into(), self.beat_frequency));
        out.extend(self.fod_dist.iter().map(|(k, m)| (format!("fod[{k}]"), m)));
        out.extend(self.sod_dist.iter().map(|(k, m)| (format!("sod[{k}]"), m)));
        out
    }

    /// One `name<TAB>value` line per metric.
    pub fn to_tsv(&self) -> String {
        self.entries().iter().fold(String::new(), |mut s, (n, v)| {
            let _ = writeln!(s, "{n}\t{v}");
            s
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}%"));
        let real = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(s, "songs             {}", self.songs);
        let _ = writeln!(s, "sentences         {}", self.sentences);
        let _ = writeln!(s, "perplexity        {}", real(self.ppl));
        let _ = writeln!(s, "rhyme accuracy    {}", pct(self.ra));
        let _ = writeln!(s, "rhyme density     {:.4}", self.rd);
        let _ = writeln!(s, "Combo-1/2/3       {:.3} / {:.3} / {:.3}", self.combo1, self.combo2, self.combo3);
        let _ = writeln!(s, "beat accuracy     {}", pct(self.ba));
        let _ = writeln!(s, "FOD distance      {}", real(self.fod));
        let _ = writeln!(s, "SOD distance      {}", real(self.sod));
        let _ = writeln!(s, "rhyme repetition  {:.2}%", self.rhyme_repetition);
        let _ = writeln!(s, "words per beat    {:.4}", self.beat_frequency);
        s
    }
}

/// Perplexity over a set of songs, for callers that only need that.
pub fn perplexity_of_songs<M: NextTokenModel + ?Sized>(
    model: &M,
    vocab: &Vocab,
    songs: &[Song],
    cfg: &EncodeConfig,
) -> Result<f64> {
    let seqs: Vec<FeatureSequence> = songs.iter().map(|s| encode_training_sequence(s, vocab, cfg)).collect();
    let (nll, count) = corpus_nll(model, &seqs)?;
    if count == 0 {
        return Err(Error::invalid("corpus has no predictable tokens"));
    }
    Ok((nll / count as f64).exp())
}
