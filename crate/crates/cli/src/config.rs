//! Flat `key=value` configuration files.
//!
//! A key names a long flag of a subcommand (`steps=400` → `--steps 400`).
//! `train.steps=400` applies to `train` only; an unprefixed key applies to
//! every subcommand that has that flag. Values from the file are spliced in
//! before the user's own arguments, and since every flag overrides itself,
//! the command line wins.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Command};

use crate::UsageError;

pub const CONFIG_ENV: &str = "RHYMEBEAT_CONFIG";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    pub section: Option<String>,
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse_config(text: &str) -> Result<Vec<ConfigEntry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!(UsageError(format!("config line {}: expected key=value", i + 1)));
        };
        let k = k.trim().replace('_', "-");
        let (section, key) = match k.split_once('.') {
            Some((s, k)) => (Some(s.to_string()), k.to_string()),
            None => (None, k),
        };
        if key.is_empty() {
            bail!(UsageError(format!("config line {}: empty key", i + 1)));
        }
        out.push(ConfigEntry {
            section,
            key,
            value: v.trim().to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

/// The config path from `--config`, else from the environment.
pub fn config_path(argv: &[String]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Index of the subcommand name in `argv`.
fn subcommand_index(argv: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if a == "--config" {
            i += 2;
            continue;
        }
        if !a.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// Splices config entries into `argv` just after the subcommand name.
pub fn apply_config(argv: &[String], cmd: &Command, path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let entries = parse_config(&text)?;
    let Some(at) = subcommand_index(argv) else {
        return Ok(argv.to_vec());
    };
    let Some(sub) = cmd.find_subcommand(&argv[at]) else {
        // let clap report the unknown subcommand
        return Ok(argv.to_vec());
    };
    let known_anywhere = |key: &str| {
        cmd.get_subcommands()
            .any(|s| s.get_arguments().any(|a| a.get_long() == Some(key)))
    };
    let mut injected = Vec::new();
    for e in &entries {
        if let Some(s) = &e.section {
            if cmd.find_subcommand(s).is_none() {
                bail!(UsageError(format!("config line {}: unknown command {s:?}", e.line)));
            }
            if s != sub.get_name() {
                continue;
            }
        }
        if e.key == "config" {
            bail!(UsageError(format!("config line {}: config files cannot nest", e.line)));
        }
        match sub.get_arguments().find(|a| a.get_long() == Some(e.key.as_str())) {
            Some(arg) => match arg.get_action() {
                ArgAction::SetTrue => match e.value.as_str() {
                    "true" | "1" | "yes" => injected.push(format!("--{}", e.key)),
                    "false" | "0" | "no" => {}
                    other => bail!(UsageError(format!(
                        "config line {}: {} expects true/false, got {other:?}",
                        e.line, e.key
                    ))),
                },
                _ => injected.push(format!("--{}={}", e.key, e.value)),
            },
            None if e.section.is_some() || !known_anywhere(&e.key) => {
                bail!(UsageError(format!("config line {}: unknown option {:?}", e.line, e.key)))
            }
            None => {}
        }
    }
    let mut out = argv[..=at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[at + 1..]);
    Ok(out)
}
