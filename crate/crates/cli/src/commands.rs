use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use log::{info, warn};

use rhymebeat::align::{beat_frequency, parse_timestamps, AlignOptions};
use rhymebeat::corpus::{encode_corpus, parse_corpus, render_corpus, tokenize_line, NUM_SPECIAL};
use rhymebeat::decode::generate as generate_song;
use rhymebeat::metrics::RdVariant;
use rhymebeat::model::{read_checkpoint, train_with, write_checkpoint, Phase};
use rhymebeat::synth::generate_synthetic_corpus;
use rhymebeat::{
    EncodeConfig, Equivalence, FreqLabel, FreqThresholds, GenControls, GroundTruth, MetricsReport, ModelConfig,
    ModelParams, SamplingMode, Sentence, Song, SynthSpec, TrainConfig, Vocab, VowelDictionary,
};

use crate::manifest::{sha256_hex, RunManifest};
use crate::{DataError, Product, UsageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EquivalenceArg {
    /// Drop the medial glide (iang → ang).
    StripMedial,
    /// Every final is its own class.
    Identity,
}

impl From<EquivalenceArg> for Equivalence {
    fn from(e: EquivalenceArg) -> Self {
        match e {
            EquivalenceArg::StripMedial => Equivalence::StripMedial,
            EquivalenceArg::Identity => Equivalence::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FreqArg {
    S,
    M,
    F,
}

impl From<FreqArg> for FreqLabel {
    fn from(f: FreqArg) -> Self {
        match f {
            FreqArg::S => FreqLabel::Slow,
            FreqArg::M => FreqLabel::Medium,
            FreqArg::F => FreqLabel::Fast,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Temperature sampling.
    Sample,
    Argmax,
    /// Sampling restricted to the k most likely tokens.
    TopK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Desk,
    /// GPT-2-small sized.
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RdArg {
    /// Longest rhyme per song, averaged over songs.
    Longest,
    /// Rhymed words per word within a sliding window.
    PerWord,
}

/// Shared dictionary options.
#[derive(Args, Debug)]
pub struct DictArgs {
    /// `word<TAB>final` file; its entries extend and override the built-in table.
    #[arg(long, value_name = "FILE")]
    pub dict: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "strip-medial")]
    pub equivalence: EquivalenceArg,
}

/// Beat-frequency bucket options.
#[derive(Args, Debug)]
pub struct FreqArgs {
    /// Words per beat at the centre of the medium bucket.
    #[arg(long, default_value_t = 3.0)]
    pub medium_center: f64,
    /// Half-width of the medium bucket.
    #[arg(long, default_value_t = 0.25)]
    pub medium_tolerance: f64,
}

impl FreqArgs {
    fn thresholds(&self) -> Result<FreqThresholds> {
        if !(self.medium_center > 0.0 && self.medium_tolerance >= 0.0) {
            bail!(UsageError("medium-center must be positive and medium-tolerance non-negative".into()));
        }
        Ok(FreqThresholds {
            medium_center: self.medium_center,
            medium_tolerance: self.medium_tolerance,
        })
    }
}

#[derive(Args, Debug)]
pub struct AlignArgs {
    /// Timestamp file (`#SONG`, `WORD w start end`, `BEAT t`, `SEP`, `DURATION s`).
    #[arg(long, value_name = "FILE")]
    pub timestamps: PathBuf,
    /// At most one beat per word.
    #[arg(long)]
    pub injective: bool,
    /// Attach a beat-frequency label to every song that has beats.
    #[arg(long)]
    pub label: bool,
    #[command(flatten)]
    pub freq: FreqArgs,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub dict: DictArgs,
    /// Recompute beat-frequency labels from the `*` annotations.
    #[arg(long)]
    pub relabel: bool,
    #[command(flatten)]
    pub freq: FreqArgs,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub songs: usize,
    #[arg(long, default_value_t = 6)]
    pub sentences: usize,
    #[arg(long, default_value_t = 4)]
    pub min_len: usize,
    #[arg(long, default_value_t = 7)]
    pub max_len: usize,
    #[arg(long, default_value_t = 64)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 8)]
    pub vowel_classes: usize,
    /// Rhyme length shared within a chain.
    #[arg(long, default_value_t = 2)]
    pub ngram: usize,
    /// Sentences per rhyme chain.
    #[arg(long, default_value_t = 3)]
    pub chain_len: usize,
    /// Words between beats, e.g. `2,2,4`; `none` for no beats.
    #[arg(long, default_value = "2,2,4")]
    pub beat_pattern: String,
    /// Label each song's beat frequency.
    #[arg(long)]
    pub label_freq: bool,
    #[arg(long, default_value = "synth")]
    pub id_prefix: String,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Fine-tuning corpus.
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Optional pre-training corpus, trained on first.
    #[arg(long, value_name = "FILE")]
    pub pretrain_corpus: Option<PathBuf>,
    #[command(flatten)]
    pub dict: DictArgs,
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: PresetArg,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Maximum tokens per song.
    #[arg(long)]
    pub context: Option<usize>,
    #[arg(long)]
    pub tie_embeddings: bool,
    /// Fine-tuning steps.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Pre-training steps (with --pretrain-corpus).
    #[arg(long, default_value_t = 1000)]
    pub pretrain_steps: usize,
    #[arg(long, default_value_t = 1.5e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
    /// Seeds initialization and batch order.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Log the loss every this many steps.
    #[arg(long, default_value_t = 50)]
    pub log_every: usize,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// First sentence, `*` before beat words.
    #[arg(long)]
    pub seed_sentence: String,
    #[arg(long, value_enum)]
    pub freq: Option<FreqArg>,
    /// Weight of the model distribution against the rhyme prior.
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,
    /// Longest rhyme the constraint pursues.
    #[arg(long, default_value_t = 3)]
    pub ngram_max: usize,
    #[arg(long, value_enum, default_value = "sample")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 8)]
    pub top_k: usize,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Songs to write; song i uses rng seed `rng-seed + i`.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 8)]
    pub max_sentences: usize,
    /// Token budget per song (default: min(512, model context)).
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long, default_value_t = 32)]
    pub repair_budget: usize,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub dict: DictArgs,
    /// Adds perplexity, rhyme accuracy and beat accuracy.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Corpus to measure FOD/SOD distances against.
    #[arg(long, value_name = "FILE")]
    pub reference: Option<PathBuf>,
    /// `name<TAB>value` sidecar to check the report against.
    #[arg(long, value_name = "FILE")]
    pub ground_truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "longest")]
    pub rd_variant: RdArg,
    /// Largest accepted |report − ground truth|.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

fn read_input(m: &mut RunManifest, role: &str, path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {role} {}", path.display()))?;
    m.inputs.push((role.to_string(), path.to_path_buf(), sha256_hex(&bytes)));
    Ok(bytes)
}

fn read_text(m: &mut RunManifest, role: &str, path: &Path) -> Result<String> {
    let bytes = read_input(m, role, path)?;
    String::from_utf8(bytes).map_err(|_| DataError(format!("{role} {} is not UTF-8", path.display())).into())
}

fn read_corpus(m: &mut RunManifest, role: &str, path: &Path) -> Result<Vec<Song>> {
    let text = read_text(m, role, path)?;
    let songs = parse_corpus(&text).with_context(|| format!("parsing {role} {}", path.display()))?;
    if songs.is_empty() {
        bail!(DataError(format!("{role} {} has no songs", path.display())));
    }
    Ok(songs)
}

fn load_dict(m: &mut RunManifest, args: &DictArgs) -> Result<VowelDictionary> {
    let eq = Equivalence::from(args.equivalence);
    let builtin = VowelDictionary::builtin_with(eq);
    match &args.dict {
        Some(p) => {
            let text = read_text(m, "dict", p)?;
            let extra = VowelDictionary::parse(&text, eq).with_context(|| format!("parsing dict {}", p.display()))?;
            Ok(builtin.overridden_by(&extra))
        }
        None => Ok(builtin),
    }
}

fn read_model(m: &mut RunManifest, path: &Path) -> Result<(ModelParams, Vocab)> {
    let bytes = read_input(m, "checkpoint", path)?;
    read_checkpoint(&bytes).with_context(|| format!("loading checkpoint {}", path.display()))
}

/// Feature caps matching a model's embedding tables.
fn encode_config(cfg: &ModelConfig) -> EncodeConfig {
    EncodeConfig {
        max_len: cfg.max_abs_pos,
        intra_cap: cfg.max_intra_pos,
        sent_cap: cfg.max_sentences,
        pad: false,
    }
}

fn tsv<'a>(rows: impl IntoIterator<Item = &'a (String, f64)>) -> String {
    rows.into_iter().fold(String::new(), |mut s, (n, v)| {
        let _ = writeln!(s, "{n}\t{v}");
        s
    })
}

pub fn align(a: &AlignArgs, m: &mut RunManifest) -> Result<Product> {
    let thresholds = a.freq.thresholds()?;
    let text = read_text(m, "timestamps", &a.timestamps)?;
    let timed = parse_timestamps(&text).with_context(|| format!("parsing {}", a.timestamps.display()))?;
    if timed.is_empty() {
        bail!(DataError(format!("{} has no songs", a.timestamps.display())));
    }
    let opts = AlignOptions { injective: a.injective };
    let mut songs = Vec::new();
    let mut pairs = String::from("song\tbeat\tword_index\tword\n");
    for t in &timed {
        let (mut song, result) = t.align(opts).with_context(|| format!("aligning song {:?}", t.id))?;
        let words = t.words();
        for &(b, w) in &result.pairs {
            let _ = writeln!(pairs, "{}\t{}\t{w}\t{}", t.id, t.beats[b].t, words[w].word);
        }
        if a.label {
            match beat_frequency(&song, &thresholds) {
                Ok((_, label)) => song.freq = Some(label),
                Err(e) => warn!("{e}; left unlabeled"),
            }
        }
        songs.push(song);
    }
    info!("aligned {} songs", songs.len());
    let mut p = Product::new();
    p.add("corpus.txt", render_corpus(&songs));
    p.add("alignment.tsv", pairs);
    Ok(p)
}

pub fn ingest(a: &IngestArgs, m: &mut RunManifest) -> Result<Product> {
    let thresholds = a.freq.thresholds()?;
    let dict = load_dict(m, &a.dict)?;
    let mut songs = read_corpus(m, "corpus", &a.corpus)?;
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    for song in &mut songs {
        if a.relabel {
            song.freq = match beat_frequency(song, &thresholds) {
                Ok((_, label)) => Some(label),
                Err(e) => {
                    warn!("{e}; left unlabeled");
                    None
                }
            };
        }
        let key = song.freq.map_or("none".to_string(), |f| f.to_string());
        *labels.entry(key).or_default() += 1;
    }
    let vocab = Vocab::build(&songs, &dict);
    let mut vocab_tsv = String::from("id\ttoken\trhyme_class\n");
    for id in 0..vocab.len() as u32 {
        let class = dict.class_name(vocab.vowel(id)).unwrap_or("");
        let _ = writeln!(vocab_tsv, "{id}\t{}\t{class}", vocab.token(id));
    }
    let words: usize = songs.iter().map(Song::word_count).sum();
    let no_vowel: Vec<&str> = vocab.words().filter(|(_, v)| v.is_null()).map(|(w, _)| w).collect();
    if !no_vowel.is_empty() {
        warn!("{} word types have no dictionary entry", no_vowel.len());
    }
    let mut stats = vec![
        ("songs".to_string(), songs.len() as f64),
        ("sentences".to_string(), songs.iter().map(|s| s.sentences.len()).sum::<usize>() as f64),
        ("words".to_string(), words as f64),
        ("beats".to_string(), songs.iter().map(Song::beat_count).sum::<usize>() as f64),
        ("word_types".to_string(), (vocab.len() - NUM_SPECIAL) as f64),
        ("word_types_without_vowel".to_string(), no_vowel.len() as f64),
    ];
    stats.extend(labels.iter().map(|(k, v)| (format!("freq[{k}]"), *v as f64)));
    let mut p = Product::new();
    p.add("corpus.txt", render_corpus(&songs));
    p.add("vocab.tsv", vocab_tsv);
    p.add("stats.tsv", tsv(&stats));
    Ok(p)
}

fn parse_pattern(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    if s.is_empty() || s == "none" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| UsageError(format!("beat pattern entry {x:?} is not a count")).into())
        })
        .collect()
}

pub fn synth(a: &SynthArgs, m: &mut RunManifest) -> Result<Product> {
    let spec = SynthSpec {
        n_songs: a.songs,
        sentences_per_song: a.sentences,
        sentence_len: (a.min_len, a.max_len),
        vocab_size: a.vocab_size,
        n_vowel_classes: a.vowel_classes,
        ngram: a.ngram,
        chain_len: a.chain_len,
        beat_pattern: parse_pattern(&a.beat_pattern)?,
        label_freq: a.label_freq,
        seed: a.seed,
        id_prefix: a.id_prefix.clone(),
    };
    m.seeds.push(("synth".into(), a.seed));
    let c = generate_synthetic_corpus(&spec)?;
    let mut p = Product::new();
    p.add("corpus.txt", render_corpus(&c.songs));
    p.add("dict.tsv", c.dictionary_tsv());
    p.add("ground_truth.tsv", c.ground_truth.to_tsv());
    Ok(p)
}

pub fn train(a: &TrainArgs, m: &mut RunManifest) -> Result<Product> {
    let dict = load_dict(m, &a.dict)?;
    let songs = read_corpus(m, "corpus", &a.corpus)?;
    let pre = match &a.pretrain_corpus {
        Some(p) => Some(read_corpus(m, "pretrain_corpus", p)?),
        None => None,
    };
    let vocab = Vocab::build(pre.iter().flatten().chain(&songs), &dict);
    let base = match a.preset {
        PresetArg::Desk => ModelConfig::desk(vocab.len(), vocab.vowel_table_size()),
        PresetArg::Large => ModelConfig::large(vocab.len(), vocab.vowel_table_size()),
    };
    let cfg = ModelConfig {
        hidden_size: a.hidden.unwrap_or(base.hidden_size),
        n_heads: a.heads.unwrap_or(base.n_heads),
        n_layers: a.layers.unwrap_or(base.n_layers),
        max_abs_pos: a.context.unwrap_or(base.max_abs_pos),
        tie_embeddings: a.tie_embeddings,
        ..base
    };
    cfg.validate()?;
    let tcfg = |steps: usize, phase: Phase| TrainConfig {
        lr: a.lr,
        batch_size: a.batch_size,
        dropout: a.dropout,
        max_steps: steps,
        seed: a.seed,
        phase,
        ..TrainConfig::default()
    };
    let fine_cfg = tcfg(a.steps, Phase::Finetune);
    fine_cfg.validate()?;
    if a.log_every == 0 {
        bail!(UsageError("log-every must be at least 1".into()));
    }
    m.seeds.push(("init".into(), a.seed));
    m.seeds.push(("batches".into(), a.seed));

    let enc = encode_config(&cfg);
    let mut params = ModelParams::init(&cfg, a.seed)?;
    info!("model: {} parameters, vocabulary {}", params.param_count(), vocab.len());
    let mut log = String::from("phase\tstep\tloss\n");
    let mut run_phase = |params: &mut ModelParams, songs: &[Song], tc: TrainConfig| -> Result<()> {
        let seqs = encode_corpus(songs, &vocab, &enc);
        let every = a.log_every;
        let report = train_with(params, &seqs, &tc, |step, loss, _| {
            if (step + 1) % every == 0 {
                info!("{} step {}/{}: loss {loss:.4}", tc.phase, step + 1, tc.max_steps);
            }
            true
        })?;
        for (i, l) in report.losses.iter().enumerate() {
            let _ = writeln!(log, "{}\t{}\t{l}", tc.phase, i + 1);
        }
        Ok(())
    };
    if let Some(pre) = &pre {
        run_phase(&mut params, pre, tcfg(a.pretrain_steps, Phase::Pretrain))?;
    }
    run_phase(&mut params, &songs, fine_cfg)?;
    let ckpt = write_checkpoint(&params, &vocab)?;
    let mut p = Product::new();
    p.add("model.ckpt", ckpt);
    p.add("train_log.tsv", log);
    Ok(p)
}

pub fn generate(a: &GenerateArgs, m: &mut RunManifest) -> Result<Product> {
    let words = tokenize_line(&a.seed_sentence).map_err(|e| UsageError(format!("seed sentence: {e}")))?;
    if words.is_empty() {
        bail!(UsageError("seed sentence has no words".into()));
    }
    if a.count == 0 {
        bail!(UsageError("count must be at least 1".into()));
    }
    let mode = match a.mode {
        ModeArg::Sample => SamplingMode::Temperature(a.temperature),
        ModeArg::Argmax => SamplingMode::Argmax,
        ModeArg::TopK => SamplingMode::TopK {
            k: a.top_k,
            temperature: a.temperature,
        },
    };
    mode.validate()?;
    let (params, vocab) = read_model(m, &a.checkpoint)?;
    let mut controls = GenControls::new(Sentence { words });
    controls.freq = a.freq.map(FreqLabel::from);
    controls.alpha = a.alpha;
    controls.ngram_max = a.ngram_max;
    controls.mode = mode;
    controls.max_sentences = a.max_sentences;
    controls.max_tokens = a.max_tokens.unwrap_or(512.min(params.config.max_abs_pos));
    controls.repair_budget = a.repair_budget;

    let mut songs = Vec::with_capacity(a.count);
    let mut transcripts = String::new();
    for i in 0..a.count {
        controls.rng_seed = a.rng_seed.wrapping_add(i as u64);
        m.seeds.push((format!("song{i}"), controls.rng_seed));
        let g = generate_song(&params, &vocab, &controls)?;
        let mut song = g.song;
        song.id = format!("generated-{i:04}");
        info!("{}: {} new sentences", song.id, g.new_sentences);
        let _ = writeln!(transcripts, "#SONG {}\n{}", song.id, g.transcript);
        songs.push(song);
    }
    let mut p = Product::new();
    p.add("generated.txt", render_corpus(&songs));
    p.add("transcripts.txt", transcripts);
    Ok(p)
}

/// Compares every ground-truth entry with the report. Step counts describe
/// teacher-forced streams rather than corpus metrics and are not compared.
fn check_ground_truth(report: &[(String, f64)], gt: &GroundTruth, tol: f64) -> (String, Vec<String>) {
    let got: BTreeMap<&str, f64> = report.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    let mut want: BTreeMap<String, f64> = gt
        .entries()
        .into_iter()
        .filter(|(n, _)| n != "beat_steps" && n != "total_steps")
        .collect();
    // histogram buckets the report has but the sidecar lacks must be empty
    for (n, _) in report {
        if (n.starts_with("fod[") || n.starts_with("sod[")) && !want.contains_key(n) {
            want.insert(n.clone(), 0.0);
        }
    }
    let mut table = String::from("name\texpected\tactual\tok\n");
    let mut bad = Vec::new();
    for (name, expected) in &want {
        let actual = got.get(name.as_str()).copied();
        let ok = actual.is_some_and(|a| (a - expected).abs() <= tol);
        let shown = actual.map_or("missing".to_string(), |a| a.to_string());
        let _ = writeln!(table, "{name}\t{expected}\t{shown}\t{ok}");
        if !ok {
            bad.push(format!("{name}: expected {expected}, got {shown}"));
        }
    }
    (table, bad)
}

pub fn evaluate(a: &EvaluateArgs, m: &mut RunManifest) -> Result<Product> {
    if !(a.tolerance >= 0.0) {
        bail!(UsageError("tolerance must be non-negative".into()));
    }
    let dict = load_dict(m, &a.dict)?;
    let songs = read_corpus(m, "corpus", &a.corpus)?;
    let reference = match &a.reference {
        Some(p) => Some(read_corpus(m, "reference", p)?),
        None => None,
    };
    let gt = match &a.ground_truth {
        Some(p) => {
            let text = read_text(m, "ground_truth", p)?;
            Some(GroundTruth::parse_tsv(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => None,
    };
    let model = match &a.checkpoint {
        Some(p) => Some(read_model(m, p)?),
        None => None,
    };

    let opts = rhymebeat::metrics::MetricsOptions {
        rd_variant: match a.rd_variant {
            RdArg::Longest => RdVariant::LongestRhyme,
            RdArg::PerWord => RdVariant::PerWord,
        },
    };
    let mut report = MetricsReport::for_corpus(&songs, &dict, &opts);
    if let Some((params, vocab)) = &model {
        report.add_model(params, vocab, &songs, &encode_config(&params.config))?;
    }
    if let Some(r) = &reference {
        report.add_reference(r)?;
    }
    let mut p = Product::new();
    p.add("report.txt", report.to_text());
    p.add("report.tsv", report.to_tsv());
    if let Some(gt) = &gt {
        let (table, bad) = check_ground_truth(&report.entries(), gt, a.tolerance);
        p.add("ground_truth_check.tsv", table);
        if !bad.is_empty() {
            p.check_failure = Some(format!("report differs from ground truth: {}", bad.join("; ")));
        } else {
            info!("report matches ground truth");
        }
    }
    Ok(p)
}
