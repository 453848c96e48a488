mod common;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rhymebeat::align::{align_beats_with, AlignOptions};
use rhymebeat::corpus::{encode_corpus, parse_song, EncodeConfig, FeatureSequence, Vocab};
use rhymebeat::metrics::{
    beat_accuracy, combo_n, rhyme_accuracy, rhyme_density, song_combo_n, song_rhyme_density, wasserstein_1d,
    IntervalDistribution, MetricsOptions, MetricsReport,
};
use rhymebeat::model::{ModelConfig, ModelParams, NextTokenModel};
use rhymebeat::synth::{generate_synthetic_corpus, SynthSpec};
use rhymebeat::{Equivalence, TimedBeat, TimedWord, VowelDictionary};

#[test]
fn three_gram_chains_of_four() {
    let c = generate_synthetic_corpus(&SynthSpec {
        n_songs: 5,
        sentences_per_song: 8,
        sentence_len: (3, 6),
        ngram: 3,
        chain_len: 4,
        ..SynthSpec::default()
    })
    .unwrap();
    assert_eq!(combo_n(&c.songs, &c.dictionary, 3).unwrap(), 4.0);
    assert_eq!(rhyme_density(&c.songs, &c.dictionary), 3.0);
}

#[test]
fn model_metrics_match_independent_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for i in 0..20 {
        let spec = common::random_spec(&mut rng, 300 + i);
        let c = generate_synthetic_corpus(&spec).unwrap();
        let vocab = Vocab::build(&c.songs, &c.dictionary);
        let seqs = encode_corpus(&c.songs, &vocab, &EncodeConfig::default());
        let cfg = ModelConfig {
            hidden_size: 16,
            n_heads: 2,
            n_layers: 1,
            init_std: 1.0,
            ..ModelConfig::desk(vocab.len(), vocab.vowel_table_size())
        };
        let model = ModelParams::init(&cfg, i).unwrap();
        let probs: Vec<_> = seqs.iter().map(|s| model.next_token_probs(s).unwrap()).collect();
        assert_eq!(
            rhyme_accuracy(&model, &seqs, &vocab).unwrap(),
            common::recount_rhyme_accuracy(&probs, &seqs, &vocab)
        );
        assert_eq!(beat_accuracy(&model, &seqs).unwrap(), common::recount_beat_accuracy(&probs, &seqs));
    }
}

#[test]
fn rhyme_accuracy_extremes() {
    // one long chain per song: every sentence rhymes with its predecessor
    let c = generate_synthetic_corpus(&SynthSpec {
        chain_len: 6,
        sentences_per_song: 6,
        ..SynthSpec::default()
    })
    .unwrap();
    let vocab = Vocab::build(&c.songs, &c.dictionary);
    let seqs = encode_corpus(&c.songs, &vocab, &EncodeConfig::default());
    let oracle = common::TeacherOracle { vocab_size: vocab.len() };
    assert_eq!(rhyme_accuracy(&oracle, &seqs, &vocab).unwrap(), Some(100.0));
    assert_eq!(beat_accuracy(&oracle, &seqs).unwrap(), Some(100.0));

    // a model that always prefers a word whose vowel never starts a sentence
    let song = parse_song("ba da\nka ma\nla pa\n").unwrap();
    let dict = VowelDictionary::from_pairs(
        [("ba", "o"), ("da", "a"), ("ka", "o"), ("ma", "a"), ("la", "o"), ("pa", "a"), ("zi", "i")],
        Equivalence::Identity,
    )
    .unwrap();
    let mut vocab = Vocab::build([&song], &dict);
    let words: Vec<(String, _)> = vocab.words().map(|(w, v)| (w.to_string(), v)).chain([("zi".to_string(), dict.vowel_of("zi").unwrap())]).collect();
    vocab = Vocab::from_words(words).unwrap();
    let zi = vocab.id("zi").unwrap() as usize;
    struct Fixed(usize, usize);
    impl NextTokenModel for Fixed {
        fn vocab_size(&self) -> usize {
            self.1
        }
        fn next_token_probs(&self, seq: &FeatureSequence) -> rhymebeat::Result<ndarray::Array2<f64>> {
            let mut p = ndarray::Array2::from_elem((seq.len(), self.1), 0.0);
            p.column_mut(self.0).fill(1.0);
            Ok(p)
        }
    }
    let seqs = encode_corpus(&[song], &vocab, &EncodeConfig::default());
    assert_eq!(rhyme_accuracy(&Fixed(zi, vocab.len()), &seqs, &vocab).unwrap(), Some(0.0));
}

#[test]
fn corpus_metric_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..30 {
        let c = generate_synthetic_corpus(&common::random_spec(&mut rng, 500 + i)).unwrap();
        let d = &c.dictionary;
        let (c1, c2, c3) = (
            combo_n(&c.songs, d, 1).unwrap(),
            combo_n(&c.songs, d, 2).unwrap(),
            combo_n(&c.songs, d, 3).unwrap(),
        );
        assert!(c1 >= c2 && c2 >= c3 && c3 >= 1.0);
        for s in &c.songs {
            assert_eq!(song_rhyme_density(s, d) >= 1, song_combo_n(s, d, 1) >= 2);
        }
        let report = MetricsReport::for_corpus(&c.songs, d, &MetricsOptions::default());
        let mut shuffled = c.songs.clone();
        shuffled.shuffle(&mut rng);
        let again = MetricsReport::for_corpus(&shuffled, d, &MetricsOptions::default());
        for ((n, a), (_, b)) in report.entries().iter().zip(again.entries()) {
            assert!((a - b).abs() < 1e-12, "{n}: {a} vs {b}");
        }
    }
}

#[test]
fn wasserstein_is_a_metric_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draw = |rng: &mut ChaCha8Rng| {
        let values: Vec<i64> = (0..rng.gen_range(1..12)).map(|_| rng.gen_range(-4..8)).collect();
        IntervalDistribution::from_values(&values)
    };
    for _ in 0..300 {
        let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let ab = wasserstein_1d(&a, &b).unwrap();
        assert_eq!(ab, wasserstein_1d(&b, &a).unwrap());
        assert_eq!(wasserstein_1d(&a, &a).unwrap(), 0.0);
        if a != b {
            assert!(ab > 0.0);
        }
        assert!((0.0..=1.0).contains(&ab));
        // normalization depends on the pair's support, so check the triangle
        // inequality on the unnormalized transport cost
        let raw = |x: &IntervalDistribution, y: &IntervalDistribution| {
            let pts = |d: &IntervalDistribution| d.iter().collect::<Vec<_>>();
            common::transport_cost(&pts(x), &pts(y))
        };
        assert!(raw(&a, &c) <= raw(&a, &b) + raw(&b, &c) + 1e-12);
    }
}

#[test]
fn injective_alignment_matches_greedy_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let mut words: Vec<TimedWord> =
            (0..rng.gen_range(1..15)).map(|i| TimedWord::new(format!("w{i}"), rng.gen_range(0..60) as f64 * 0.5)).collect();
        words.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut beats: Vec<TimedBeat> = (0..rng.gen_range(0..15)).map(|_| TimedBeat { t: rng.gen_range(0..70) as f64 * 0.5 }).collect();
        beats.sort_by(|a, b| a.t.total_cmp(&b.t));
        let r = rng.gen_range(0.5..4.0);
        let got = align_beats_with(&words, &beats, r, AlignOptions { injective: true }).pairs;

        // brute force: repeatedly take the globally closest free (beat, word) pair
        let mut free_b = vec![true; beats.len()];
        let mut free_w = vec![true; words.len()];
        let mut want = Vec::new();
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for (j, b) in beats.iter().enumerate().filter(|(j, _)| free_b[*j]) {
                for (i, w) in words.iter().enumerate().filter(|(i, _)| free_w[*i]) {
                    let d = (b.t - w.t).abs();
                    if d <= r / 2.0 && best.map_or(true, |(bd, bj, bi)| (d, j, i) < (bd, bj, bi)) {
                        best = Some((d, j, i));
                    }
                }
            }
            let Some((_, j, i)) = best else { break };
            free_b[j] = false;
            free_w[i] = false;
            want.push((j, i));
        }
        want.sort_unstable();
        assert_eq!(got, want);
        let mut used: Vec<usize> = got.iter().map(|p| p.1).collect();
        used.dedup();
        assert_eq!(used.len(), got.len());
    }
}
