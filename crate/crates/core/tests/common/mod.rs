//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rhymebeat::corpus::{FeatureSequence, Vocab, BEAT, NUM_SPECIAL, PAD, SEP};
use rhymebeat::model::{ModelParams, NextTokenModel};
use rhymebeat::synth::SynthSpec;
use rhymebeat::{Result, TimedBeat, TimedWord};

/// Exhaustive alignment: every beat against every word.
pub fn brute_force_align(words: &[TimedWord], beats: &[TimedBeat], r: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (j, b) in beats.iter().enumerate() {
        let mut best: Option<(f64, usize)> = None;
        for (i, w) in words.iter().enumerate() {
            let d = (w.t - b.t).abs();
            match best {
                Some((bd, _)) if d >= bd => {}
                _ => best = Some((d, i)),
            }
        }
        if let Some((d, i)) = best {
            if d <= r / 2.0 {
                pairs.push((j, i));
            }
        }
    }
    pairs
}

/// Optimal transport cost between two discrete distributions on integer
/// points, by successive shortest paths on the bipartite flow network.
pub fn transport_cost(a: &[(i64, f64)], b: &[(i64, f64)]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let nodes = n + m + 2;
    let (src, sink) = (n + m, n + m + 1);
    // edge list: (to, cap, cost, rev)
    let mut g: Vec<Vec<(usize, f64, f64, usize)>> = vec![Vec::new(); nodes];
    let add = |g: &mut Vec<Vec<(usize, f64, f64, usize)>>, u: usize, v: usize, cap: f64, cost: f64| {
        let ru = g[v].len();
        let rv = g[u].len();
        g[u].push((v, cap, cost, ru));
        g[v].push((u, 0.0, -cost, rv));
    };
    for (i, &(_, m_a)) in a.iter().enumerate() {
        add(&mut g, src, i, m_a, 0.0);
    }
    for (j, &(_, m_b)) in b.iter().enumerate() {
        add(&mut g, n + j, sink, m_b, 0.0);
    }
    for (i, &(x, _)) in a.iter().enumerate() {
        for (j, &(y, _)) in b.iter().enumerate() {
            add(&mut g, i, n + j, f64::INFINITY, (x - y).abs() as f64);
        }
    }
    let eps = 1e-15;
    let mut total = 0.0;
    loop {
        // Bellman-Ford from the source over edges with residual capacity
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; nodes];
        dist[src] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u].is_infinite() {
                    continue;
                }
                for (k, &(v, cap, cost, _)) in g[u].iter().enumerate() {
                    if cap > eps && dist[u] + cost < dist[v] - 1e-12 {
                        dist[v] = dist[u] + cost;
                        prev[v] = Some((u, k));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink].is_infinite() {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while let Some((u, k)) = prev[v] {
            push = push.min(g[u][k].1);
            v = u;
        }
        let mut v = sink;
        while let Some((u, k)) = prev[v] {
            g[u][k].1 -= push;
            let (to, rev) = (g[u][k].0, g[u][k].3);
            g[to][rev].1 += push;
            v = u;
        }
        total += push * dist[sink];
    }
    total
}

/// Transport cost divided by the extent of both supports together with zero.
pub fn normalized_transport(a: &[(i64, f64)], b: &[(i64, f64)]) -> f64 {
    let values = || a.iter().chain(b).map(|p| p.0);
    let scale = values().max().unwrap().max(0) - values().min().unwrap().min(0);
    if scale == 0 {
        0.0
    } else {
        transport_cost(a, b) / scale as f64
    }
}

/// Puts all mass on the true next token of whatever sequence it is shown.
pub struct TeacherOracle {
    pub vocab_size: usize,
}

impl NextTokenModel for TeacherOracle {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_token_probs(&self, seq: &FeatureSequence) -> Result<Array2<f64>> {
        let mut out = Array2::from_elem((seq.len(), self.vocab_size), 0.0);
        for i in 0..seq.len() {
            match seq.tokens.get(i + 1) {
                Some(&t) if t != PAD => out[[i, t as usize]] = 1.0,
                _ => out.row_mut(i).fill(1.0 / self.vocab_size as f64),
            }
        }
        Ok(out)
    }
}

/// Always most confident in `[SEP]`, never in `[BEAT]`.
pub struct NeverBeat {
    pub vocab_size: usize,
}

impl NextTokenModel for NeverBeat {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_token_probs(&self, seq: &FeatureSequence) -> Result<Array2<f64>> {
        let v = self.vocab_size;
        let mut out = Array2::from_elem((seq.len(), v), 0.5 / (v - 1) as f64);
        out.column_mut(SEP as usize).fill(0.5);
        Ok(out)
    }
}

/// Rhyme accuracy recounted from scratch: walk sentences explicitly.
pub fn recount_rhyme_accuracy(probs_per_seq: &[Array2<f64>], seqs: &[FeatureSequence], vocab: &Vocab) -> Option<f64> {
    let mut correct = 0usize;
    let mut eligible = 0usize;
    for (probs, seq) in probs_per_seq.iter().zip(seqs) {
        // split into sentences of (position, token)
        let mut sentences: Vec<Vec<(usize, u32)>> = vec![Vec::new()];
        for (pos, &t) in seq.tokens.iter().enumerate().skip(1) {
            if t == PAD {
                break;
            }
            if t == SEP {
                sentences.push(Vec::new());
            } else if t as usize >= NUM_SPECIAL || t == rhymebeat::corpus::UNK {
                sentences.last_mut().unwrap().push((pos, t));
            }
        }
        for k in 1..sentences.len() {
            let (Some(prev), Some(cur)) = (sentences[k - 1].first(), sentences[k].first()) else {
                continue;
            };
            let target = vocab.vowel(prev.1);
            if target.is_null() {
                continue;
            }
            let row = probs.row(cur.0 - 1);
            let mut best = NUM_SPECIAL;
            let mut best_p = f64::NEG_INFINITY;
            for t in NUM_SPECIAL..row.len() {
                if row[t] > best_p {
                    best_p = row[t];
                    best = t;
                }
            }
            eligible += 1;
            if vocab.vowel(best as u32) == target {
                correct += 1;
            }
        }
    }
    (eligible > 0).then(|| 100.0 * correct as f64 / eligible as f64)
}

/// Beat accuracy recounted from scratch.
pub fn recount_beat_accuracy(probs_per_seq: &[Array2<f64>], seqs: &[FeatureSequence]) -> Option<f64> {
    let mut agree = 0usize;
    let mut total = 0usize;
    for (probs, seq) in probs_per_seq.iter().zip(seqs) {
        for i in 0..seq.len() - 1 {
            let (cur, next) = (seq.tokens[i], seq.tokens[i + 1]);
            if cur == PAD || next == PAD {
                continue;
            }
            let row = probs.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let first_max = row.iter().position(|&p| p == max).unwrap();
            total += 1;
            if (first_max == BEAT as usize) == (next == BEAT) {
                agree += 1;
            }
        }
    }
    (total > 0).then(|| 100.0 * agree as f64 / total as f64)
}

const NOISE_FLOOR: f64 = 1e-8;

pub struct GradCheck {
    pub worst: f64,
    pub worst_at: String,
    pub checked: usize,
    /// Entries whose analytic and numeric values were both below the noise floor.
    pub near_zero: usize,
}

/// Central-difference check on sampled entries of every tensor.
pub fn gradient_check(params: &ModelParams, seq: &FeatureSequence, per_tensor: usize, seed: u64) -> GradCheck {
    let (_, grads) = params.loss_and_grad(seq).unwrap();
    let analytic = grads.tensors();
    let nll = |p: &ModelParams| {
        let probs = p.next_token_probs(seq).unwrap();
        let mut s = 0.0;
        for i in 0..seq.len() - 1 {
            s -= probs[[i, seq.tokens[i + 1] as usize]].ln();
        }
        s
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut checked = 0;
    let mut near_zero = 0;
    for (ti, (name, _, g)) in analytic.iter().enumerate() {
        let nonzero: Vec<usize> = (0..g.len()).filter(|&k| g[k] != 0.0).collect();
        let mut picks: Vec<usize> = (0..per_tensor / 2).map(|_| rng.gen_range(0..g.len())).collect();
        if !nonzero.is_empty() {
            picks.extend((0..per_tensor - per_tensor / 2).map(|_| nonzero[rng.gen_range(0..nonzero.len())]));
            let largest = *nonzero.iter().max_by(|&&a, &&b| g[a].abs().total_cmp(&g[b].abs())).unwrap();
            picks.push(largest);
        }
        for k in picks {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].1[k] += h;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].1[k] -= h;
            let numeric = (nll(&plus) - nll(&minus)) / (2.0 * h);
            let denom = g[k].abs().max(numeric.abs());
            // Below the finite-difference noise floor (~eps·|loss|/h) a ratio
            // is meaningless; such entries must agree in absolute terms.
            let rel = if denom < NOISE_FLOOR {
                near_zero += 1;
                if (g[k] - numeric).abs() <= NOISE_FLOOR {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (g[k] - numeric).abs() / denom
            };
            checked += 1;
            if rel > worst {
                worst = rel;
                worst_at = format!("{name}[{k}] analytic {:e} numeric {numeric:e}", g[k]);
            }
        }
    }
    GradCheck {
        worst,
        worst_at,
        checked,
        near_zero,
    }
}

/// A random but valid synthesis spec.
pub fn random_spec(rng: &mut ChaCha8Rng, seed: u64) -> SynthSpec {
    let lo = rng.gen_range(2..6);
    let hi = lo + rng.gen_range(0..4);
    let classes = rng.gen_range(2..=16);
    let pattern_len = rng.gen_range(0..4);
    let mut spec = SynthSpec {
        n_songs: rng.gen_range(1..6),
        sentences_per_song: rng.gen_range(3..9),
        sentence_len: (lo, hi),
        vocab_size: classes * rng.gen_range(1..6),
        n_vowel_classes: classes,
        ngram: rng.gen_range(1..=lo),
        chain_len: rng.gen_range(1..6),
        beat_pattern: (0..pattern_len).map(|_| rng.gen_range(0..4)).collect(),
        label_freq: rng.gen_bool(0.5),
        seed,
        id_prefix: format!("r{seed}"),
    };
    if spec.validate().is_err() {
        spec.beat_pattern.clear();
    }
    spec
}
