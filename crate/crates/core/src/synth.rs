//! Synthetic corpora with known rhyme and beat structure.
//!
//! Words are ASCII syllables: a consonant onset plus a rime. Each word is
//! assigned round-robin to one of up to 16 rime classes, and the synthetic
//! dictionary maps it to that rime. Songs are split into rhyme chains: inside
//! a chain, every sentence shares exactly an N-gram rhyme with its
//! predecessor (the last N words match in vowel, the word before them does
//! not); the first sentence of a new chain breaks the rhyme at its last word.
//! Beats follow a repeating interval pattern over the words of the whole
//! song. All expected metric values are tallied while the corpus is built.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::{FreqLabel, FreqThresholds};
use crate::corpus::{Sentence, Song, Word};
use crate::error::{Error, Result};
use crate::metrics::IntervalDistribution;
use crate::vowel::{Equivalence, VowelDictionary};

/// Rimes without a medial glide, so every equivalence keeps them apart.
pub const RIMES: [&str; 16] = [
    "a", "o", "e", "i", "u", "ai", "ei", "ao", "ou", "an", "en", "ang", "eng", "ong", "er", "in",
];

const ONSETS: [&str; 20] = [
    "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "z", "c", "s", "r", "j", "q", "x", "w", "y",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_songs: usize,
    pub sentences_per_song: usize,
    /// Inclusive range of words per sentence.
    pub sentence_len: (usize, usize),
    pub vocab_size: usize,
    pub n_vowel_classes: usize,
    /// Rhyme length shared by consecutive sentences of a chain.
    pub ngram: usize,
    /// Sentences per rhyme chain; the last chain of a song may be shorter.
    pub chain_len: usize,
    /// Words between consecutive beats, repeated in full cycles. Empty: no beats.
    pub beat_pattern: Vec<usize>,
    /// Attach the beat-frequency label of each song.
    pub label_freq: bool,
    pub seed: u64,
    pub id_prefix: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_songs: 10,
            sentences_per_song: 6,
            sentence_len: (4, 7),
            vocab_size: 64,
            n_vowel_classes: 8,
            ngram: 2,
            chain_len: 3,
            beat_pattern: vec![2, 2, 4],
            label_freq: false,
            seed: 0,
            id_prefix: "synth".into(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let (lo, hi) = self.sentence_len;
        if self.n_songs == 0 || self.sentences_per_song == 0 || self.chain_len == 0 || self.ngram == 0 {
            return bad("song, sentence, chain and n-gram counts must be at least 1".into());
        }
        if lo == 0 || lo > hi {
            return bad(format!("bad sentence length range {lo}..={hi}"));
        }
        if self.ngram > lo {
            return bad(format!("{}-gram rhymes do not fit in {lo}-word sentences", self.ngram));
        }
        if !(2..=RIMES.len()).contains(&self.n_vowel_classes) {
            return bad(format!("n_vowel_classes must be in 2..={}", RIMES.len()));
        }
        let max_words = self.n_vowel_classes * ONSETS.len() * (ONSETS.len() + 1);
        if self.vocab_size < self.n_vowel_classes || self.vocab_size > max_words {
            return bad(format!(
                "vocab_size must be between {} and {max_words}",
                self.n_vowel_classes
            ));
        }
        let cycle: usize = self.beat_pattern.iter().map(|p| p + 1).sum();
        if !self.beat_pattern.is_empty() && 1 + cycle > lo * self.sentences_per_song {
            return bad(format!(
                "a {}-word song cannot hold one cycle of the beat pattern",
                lo * self.sentences_per_song
            ));
        }
        Ok(())
    }
}

fn onset(i: usize) -> String {
    if i < ONSETS.len() {
        ONSETS[i].to_string()
    } else {
        let j = i - ONSETS.len();
        format!("{}{}", ONSETS[j / ONSETS.len()], ONSETS[j % ONSETS.len()])
    }
}

/// `(word, rime)` for word index `j`: rime class `j mod classes`.
pub fn synthetic_word(j: usize, n_classes: usize) -> (String, &'static str) {
    let rime = RIMES[j % n_classes];
    (format!("{}{rime}", onset(j / n_classes)), rime)
}

/// Expected metric values, tallied during generation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub songs: usize,
    pub sentences: usize,
    pub rd: f64,
    pub combo1: f64,
    pub combo2: f64,
    pub combo3: f64,
    pub rhyme_repetition: f64,
    pub beat_frequency: f64,
    pub fod: IntervalDistribution,
    pub sod: IntervalDistribution,
    /// Teacher-forced steps whose target is `[BEAT]`, and all steps.
    pub beat_steps: usize,
    pub total_steps: usize,
}

impl GroundTruth {
    /// Scalar entries shared with the metrics report, plus the step counts.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = vec![
            ("songs".into(), self.songs as f64),
            ("sentences".into(), self.sentences as f64),
            ("rd".into(), self.rd),
            ("combo1".into(), self.combo1),
            ("combo2".into(), self.combo2),
            ("combo3".into(), self.combo3),
            ("rhyme_repetition".into(), self.rhyme_repetition),
            ("beat_frequency".into(), self.beat_frequency),
            ("beat_steps".into(), self.beat_steps as f64),
            ("total_steps".into(), self.total_steps as f64),
        ];
        out.extend(self.fod.iter().map(|(k, m)| (format!("fod[{k}]"), m)));
        out.extend(self.sod.iter().map(|(k, m)| (format!("sod[{k}]"), m)));
        out
    }

    /// `name<TAB>value` lines.
    pub fn to_tsv(&self) -> String {
        self.entries().iter().fold(String::new(), |mut s, (n, v)| {
            let _ = writeln!(s, "{n}\t{v}");
            s
        })
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut gt = GroundTruth::default();
        let mut fod = Vec::new();
        let mut sod = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: &str| Error::Parse {
                line: i + 1,
                message: m.to_string(),
            };
            let (name, value) = line.split_once('\t').ok_or_else(|| err("expected name<TAB>value"))?;
            let v: f64 = value.trim().parse().map_err(|_| err("value is not a number"))?;
            let count = || -> Result<usize> {
                if v >= 0.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(err("expected a count"))
                }
            };
            let bucket = |prefix: &str| -> Option<Result<i64>> {
                name.strip_prefix(prefix)
                    .and_then(|r| r.strip_suffix(']'))
                    .map(|k| k.parse().map_err(|_| err("bad histogram key")))
            };
            if let Some(k) = bucket("fod[") {
                fod.push((k?, v));
                continue;
            }
            if let Some(k) = bucket("sod[") {
                sod.push((k?, v));
                continue;
            }
            match name {
                "songs" => gt.songs = count()?,
                "sentences" => gt.sentences = count()?,
                "rd" => gt.rd = v,
                "combo1" => gt.combo1 = v,
                "combo2" => gt.combo2 = v,
                "combo3" => gt.combo3 = v,
                "rhyme_repetition" => gt.rhyme_repetition = v,
                "beat_frequency" => gt.beat_frequency = v,
                "beat_steps" => gt.beat_steps = count()?,
                "total_steps" => gt.total_steps = count()?,
                _ => return Err(err(&format!("unknown entry {name:?}"))),
            }
        }
        gt.fod = IntervalDistribution::from_masses(fod)?;
        gt.sod = IntervalDistribution::from_masses(sod)?;
        Ok(gt)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text)
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub songs: Vec<Song>,
    /// Every synthetic word with its rime, in word-index order.
    pub lexicon: Vec<(String, String)>,
    pub dictionary: VowelDictionary,
    pub ground_truth: GroundTruth,
}

impl SynthCorpus {
    /// `word<TAB>final` lines, loadable as a vowel dictionary.
    pub fn dictionary_tsv(&self) -> String {
        self.lexicon.iter().fold(String::new(), |mut s, (w, f)| {
            let _ = writeln!(s, "{w}\t{f}");
            s
        })
    }
}

fn other_class(rng: &mut ChaCha8Rng, n: usize, not: usize) -> usize {
    let c = rng.gen_range(0..n - 1);
    if c >= not {
        c + 1
    } else {
        c
    }
}

pub fn generate_synthetic_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_classes = spec.n_vowel_classes;
    let lexicon: Vec<(String, String)> = (0..spec.vocab_size)
        .map(|j| {
            let (w, r) = synthetic_word(j, n_classes);
            (w, r.to_string())
        })
        .collect();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for j in 0..spec.vocab_size {
        by_class[j % n_classes].push(j);
    }
    let dictionary = VowelDictionary::from_pairs(lexicon.iter().cloned(), Equivalence::Identity)?;
    let thresholds = FreqThresholds::default();

    let mut songs = Vec::with_capacity(spec.n_songs);
    let mut gt = GroundTruth::default();
    let (mut rd_sum, mut combo_sums, mut ratio_sum) = (0usize, [0usize; 3], 0.0);
    let (mut rhyme_occurrences, mut rhyme_repeats) = (0usize, 0usize);
    let mut fod_counts: BTreeMap<i64, usize> = BTreeMap::new();
    let mut sod_counts: BTreeMap<i64, usize> = BTreeMap::new();

    for song_idx in 0..spec.n_songs {
        // reversed-order (class, word) per sentence
        let mut sentences: Vec<Vec<usize>> = Vec::with_capacity(spec.sentences_per_song);
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut longest_chain = 1;
        for s in 0..spec.sentences_per_song {
            let len = rng.gen_range(spec.sentence_len.0..=spec.sentence_len.1);
            let continues = s % spec.chain_len != 0;
            if continues {
                longest_chain = longest_chain.max(s % spec.chain_len + 1);
            }
            let mut cls = Vec::with_capacity(len);
            let mut words = Vec::with_capacity(len);
            for t in 0..len {
                let c = match classes.last() {
                    None => rng.gen_range(0..n_classes),
                    Some(prev) if !continues && t == 0 => other_class(&mut rng, n_classes, prev[0]),
                    Some(prev) if continues && t < spec.ngram => prev[t],
                    Some(prev) if continues && t == spec.ngram && t < prev.len() => {
                        other_class(&mut rng, n_classes, prev[t])
                    }
                    Some(_) => rng.gen_range(0..n_classes),
                };
                let w = *by_class[c].choose(&mut rng).expect("every class has a word");
                if continues && t < spec.ngram {
                    rhyme_occurrences += 1;
                    if sentences.last().expect("chain has a predecessor")[t] == w {
                        rhyme_repeats += 1;
                    }
                }
                cls.push(c);
                words.push(w);
            }
            classes.push(cls);
            sentences.push(words);
        }

        // beats over the reading-order words of the whole song
        let n_words: usize = sentences.iter().map(Vec::len).sum();
        let mut beat_at = vec![false; n_words];
        let mut n_beats = 0;
        if !spec.beat_pattern.is_empty() {
            let cycle: usize = spec.beat_pattern.iter().map(|p| p + 1).sum();
            let cycles = (n_words - 1) / cycle;
            let intervals: Vec<i64> = (0..cycles)
                .flat_map(|_| spec.beat_pattern.iter().map(|&p| p as i64))
                .collect();
            let mut pos = 0;
            beat_at[0] = true;
            for &iv in &intervals {
                pos += iv as usize + 1;
                beat_at[pos] = true;
            }
            n_beats = intervals.len() + 1;
            for &iv in &intervals {
                *fod_counts.entry(iv).or_default() += 1;
            }
            for w in intervals.windows(2) {
                *sod_counts.entry(w[1] - w[0]).or_default() += 1;
            }
        }

        let mut flat = 0;
        let mut song_sentences = Vec::with_capacity(sentences.len());
        for words in &sentences {
            let mut out: Vec<Word> = Vec::with_capacity(words.len());
            for &w in words.iter().rev() {
                out.push(Word::new(lexicon[w].0.clone(), beat_at[flat]));
                flat += 1;
            }
            song_sentences.push(Sentence { words: out });
        }
        let ratio = n_words as f64 / n_beats.max(1) as f64;
        let freq = (spec.label_freq && n_beats > 0).then(|| thresholds.label(ratio));
        songs.push(Song {
            id: format!("{}-{song_idx:04}", spec.id_prefix),
            sentences: song_sentences,
            freq,
        });

        let has_rhyme = longest_chain >= 2;
        rd_sum += if has_rhyme { spec.ngram } else { 0 };
        for (k, sum) in combo_sums.iter_mut().enumerate() {
            *sum += if k + 1 <= spec.ngram { longest_chain } else { 1 };
        }
        ratio_sum += ratio;
        gt.sentences += sentences.len();
        gt.beat_steps += n_beats;
        // [START], optional label, words, beats, one [SEP] per sentence; minus the first
        gt.total_steps += usize::from(freq.is_some()) + n_words + n_beats + sentences.len();
    }

    let n = spec.n_songs as f64;
    gt.songs = spec.n_songs;
    gt.rd = rd_sum as f64 / n;
    gt.combo1 = combo_sums[0] as f64 / n;
    gt.combo2 = combo_sums[1] as f64 / n;
    gt.combo3 = combo_sums[2] as f64 / n;
    gt.beat_frequency = ratio_sum / n;
    gt.rhyme_repetition = if rhyme_occurrences == 0 {
        0.0
    } else {
        100.0 * rhyme_repeats as f64 / rhyme_occurrences as f64
    };
    gt.fod = IntervalDistribution::from_counts(&fod_counts);
    gt.sod = IntervalDistribution::from_counts(&sod_counts);

    Ok(SynthCorpus {
        songs,
        lexicon,
        dictionary,
        ground_truth: gt,
    })
}

/// Frequency label a song would get, for callers building mixed corpora.
pub fn label_of(song: &Song) -> Option<FreqLabel> {
    let beats = song.beat_count();
    (beats > 0).then(|| FreqThresholds::default().label(song.word_count() as f64 / beats as f64))
}
