//! Checkpoint container.
//!
//! ```text
//! RHYMEBEAT-CHECKPOINT
//! version=1
//! [config]
//! hidden_size=128
//! ...
//! [vocab]
//! <vowel id>\t<token>          one line per token id
//! [tensors]
//! <name>\t<dim>,<dim>          in storage order
//! [data]
//! <raw little-endian f64 values of every tensor, concatenated>
//! ```

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use super::{ModelConfig, ModelParams};
use crate::corpus::{Vocab, NUM_SPECIAL};
use crate::error::{Error, Result};
use crate::vowel::VowelId;

const MAGIC: &str = "RHYMEBEAT-CHECKPOINT";
pub const CHECKPOINT_VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn config_lines(c: &ModelConfig) -> Vec<(&'static str, String)> {
    vec![
        ("vocab_size", c.vocab_size.to_string()),
        ("n_vowels", c.n_vowels.to_string()),
        ("hidden_size", c.hidden_size.to_string()),
        ("n_heads", c.n_heads.to_string()),
        ("n_layers", c.n_layers.to_string()),
        ("ffn_mult", c.ffn_mult.to_string()),
        ("max_abs_pos", c.max_abs_pos.to_string()),
        ("max_intra_pos", c.max_intra_pos.to_string()),
        ("max_sentences", c.max_sentences.to_string()),
        ("tie_embeddings", c.tie_embeddings.to_string()),
        ("init_std", format!("{:e}", c.init_std)),
    ]
}

pub fn write_checkpoint(params: &ModelParams, vocab: &Vocab) -> Result<Vec<u8>> {
    if vocab.len() != params.config.vocab_size {
        return Err(bad(format!(
            "vocabulary has {} tokens but the model expects {}",
            vocab.len(),
            params.config.vocab_size
        )));
    }
    let mut header = String::new();
    let _ = writeln!(header, "{MAGIC}\nversion={CHECKPOINT_VERSION}\n[config]");
    for (k, v) in config_lines(&params.config) {
        let _ = writeln!(header, "{k}={v}");
    }
    header.push_str("[vocab]\n");
    for id in 0..vocab.len() as u32 {
        let _ = writeln!(header, "{}\t{}", vocab.vowel(id).0, vocab.token(id));
    }
    header.push_str("[tensors]\n");
    let tensors = params.tensors();
    for (name, shape, _) in &tensors {
        let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
        let _ = writeln!(header, "{name}\t{}", dims.join(","));
    }
    header.push_str("[data]\n");

    let mut out = header.into_bytes();
    out.reserve(params.param_count() * 8);
    for (_, _, data) in &tensors {
        for v in *data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &ModelParams, vocab: &Vocab) -> Result<()> {
    let path = path.as_ref();
    let bytes = write_checkpoint(params, vocab)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams, Vocab)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<(ModelParams, Vocab)> {
    let marker = b"[data]\n";
    let split = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| bad("missing [data] section"))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| bad("header is not UTF-8"))?;
    let data = &bytes[split + marker.len()..];

    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("not a checkpoint file"));
    }
    let version: u32 = lines
        .next()
        .and_then(|l| l.strip_prefix("version="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("missing version"))?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }

    let mut section = "";
    let mut kv = std::collections::HashMap::new();
    let mut vocab_lines: Vec<(u16, String)> = Vec::new();
    let mut shapes: Vec<(String, Vec<usize>)> = Vec::new();
    for line in lines {
        if line.starts_with('[') {
            section = line;
            continue;
        }
        match section {
            "[config]" => {
                let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("bad config line {line:?}")))?;
                kv.insert(k.to_string(), v.to_string());
            }
            "[vocab]" => {
                let (v, t) = line.split_once('\t').ok_or_else(|| bad(format!("bad vocab line {line:?}")))?;
                let v = v.parse().map_err(|_| bad(format!("bad vowel id {v:?}")))?;
                vocab_lines.push((v, t.to_string()));
            }
            "[tensors]" => {
                let (name, dims) = line.split_once('\t').ok_or_else(|| bad(format!("bad tensor line {line:?}")))?;
                let dims = dims
                    .split(',')
                    .map(|d| d.parse().map_err(|_| bad(format!("bad dims {dims:?}"))))
                    .collect::<Result<Vec<usize>>>()?;
                shapes.push((name.to_string(), dims));
            }
            other => return Err(bad(format!("unexpected section {other:?}"))),
        }
    }

    fn get<T: std::str::FromStr>(kv: &std::collections::HashMap<String, String>, key: &str) -> Result<T> {
        kv.get(key)
            .ok_or_else(|| bad(format!("config is missing {key}")))?
            .parse()
            .map_err(|_| bad(format!("bad value for {key}")))
    }
    let config = ModelConfig {
        vocab_size: get(&kv, "vocab_size")?,
        n_vowels: get(&kv, "n_vowels")?,
        hidden_size: get(&kv, "hidden_size")?,
        n_heads: get(&kv, "n_heads")?,
        n_layers: get(&kv, "n_layers")?,
        ffn_mult: get(&kv, "ffn_mult")?,
        max_abs_pos: get(&kv, "max_abs_pos")?,
        max_intra_pos: get(&kv, "max_intra_pos")?,
        max_sentences: get(&kv, "max_sentences")?,
        tie_embeddings: get(&kv, "tie_embeddings")?,
        init_std: get(&kv, "init_std")?,
    };
    config.validate()?;

    if vocab_lines.len() != config.vocab_size || vocab_lines.len() < NUM_SPECIAL {
        return Err(bad("vocabulary size does not match the config"));
    }
    let vocab = Vocab::from_words(
        vocab_lines
            .into_iter()
            .skip(NUM_SPECIAL)
            .map(|(v, t)| (t, VowelId(v)))
            .collect(),
    )?;

    let mut params = ModelParams::init(&ModelConfig { init_std: 0.0, ..config }, 0)?;
    params.config = config;
    let expected: Vec<(String, Vec<usize>)> = params
        .tensors()
        .into_iter()
        .map(|(n, s, _)| (n, s))
        .collect();
    if expected != shapes {
        return Err(bad("tensor layout does not match the config"));
    }
    let total: usize = shapes.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    if data.len() != total * 8 {
        return Err(bad(format!("expected {} data bytes, found {}", total * 8, data.len())));
    }
    let mut chunks = data.chunks_exact(8);
    params.for_each_tensor_mut(|_, t| {
        for (v, c) in t.iter_mut().zip(&mut chunks) {
            *v = f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
        }
    });
    if !params.all_finite() {
        return Err(bad("non-finite parameter values"));
    }
    Ok((params, vocab))
}
