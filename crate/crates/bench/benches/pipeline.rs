use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use rhymebeat::align::align_beats;
use rhymebeat::corpus::encode_corpus;
use rhymebeat::decode::generate;
use rhymebeat::metrics::MetricsOptions;
use rhymebeat::model::train;
use rhymebeat::synth::generate_synthetic_corpus;
use rhymebeat::{
    EncodeConfig, GenControls, MetricsReport, ModelConfig, ModelParams, NextTokenModel, SamplingMode, SynthSpec,
    TimedBeat, TimedWord, TrainConfig, Vocab,
};

fn alignment(c: &mut Criterion) {
    let words: Vec<TimedWord> = (0..2000).map(|i| TimedWord::new(format!("w{i}"), i as f64 * 0.3)).collect();
    let beats: Vec<TimedBeat> = (0..700).map(|i| TimedBeat { t: i as f64 * 0.85 + 0.05 }).collect();
    c.bench_function("align 2000 words / 700 beats", |b| {
        b.iter(|| align_beats(black_box(&words), black_box(&beats), 0.3))
    });
}

fn model_and_decoding(c: &mut Criterion) {
    let corpus = generate_synthetic_corpus(&SynthSpec {
        n_songs: 8,
        ..SynthSpec::default()
    })
    .unwrap();
    let vocab = Vocab::build(&corpus.songs, &corpus.dictionary);
    let seqs = encode_corpus(&corpus.songs, &vocab, &EncodeConfig::default());
    let cfg = ModelConfig::desk(vocab.len(), vocab.vowel_table_size());
    let params = ModelParams::init(&cfg, 0).unwrap();
    let seq = &seqs[0];

    c.bench_function(&format!("desk forward, {} tokens", seq.len()), |b| {
        b.iter(|| params.next_token_probs(black_box(seq)).unwrap())
    });
    c.bench_function(&format!("desk loss+grad, {} tokens", seq.len()), |b| {
        b.iter(|| params.loss_and_grad(black_box(seq)).unwrap())
    });
    let tcfg = TrainConfig {
        max_steps: 1,
        batch_size: 8,
        ..TrainConfig::default()
    };
    c.bench_function("desk train step, batch 8", |b| {
        b.iter_batched(
            || params.clone(),
            |mut p| train(&mut p, &seqs, &tcfg).unwrap(),
            BatchSize::LargeInput,
        )
    });

    let mut controls = GenControls::new(corpus.songs[0].sentences[0].clone());
    controls.max_sentences = 4;
    controls.mode = SamplingMode::Argmax;
    c.bench_function("constrained generation, 4 sentences", |b| {
        b.iter(|| generate(&params, &vocab, black_box(&controls)).unwrap())
    });
}

fn corpus_metrics(c: &mut Criterion) {
    let corpus = generate_synthetic_corpus(&SynthSpec {
        n_songs: 200,
        sentences_per_song: 16,
        ..SynthSpec::default()
    })
    .unwrap();
    c.bench_function("corpus metrics, 200 songs", |b| {
        b.iter(|| {
            let mut r = MetricsReport::for_corpus(black_box(&corpus.songs), &corpus.dictionary, &MetricsOptions::default());
            r.add_reference(&corpus.songs).unwrap();
            r
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = alignment, model_and_decoding, corpus_metrics
}
criterion_main!(benches);
