//! `rhymebeat` command-line front end.
//!
//! Exit codes: 0 success, 1 ground-truth check failed, 2 usage error,
//! 3 data error (missing or malformed input), 4 runtime error.

mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};
use log::error;

use commands::{AlignArgs, EvaluateArgs, GenerateArgs, IngestArgs, SynthArgs, TrainArgs};
use manifest::RunManifest;

pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

/// Bad flags or configuration.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Missing or malformed input that is not a library error.
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

#[derive(Parser, Debug)]
#[command(name = "rhymebeat", version, about = "Rhyme- and rhythm-aware lyric generation")]
struct Cli {
    /// Flat key=value file of option defaults (default: $RHYMEBEAT_CONFIG).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Attach beats to words from a timestamp file; writes a `*`-annotated corpus.
    Align(AlignArgs),
    /// Normalize a corpus, label beat frequency and report vocabulary coverage.
    Ingest(IngestArgs),
    /// Write a synthetic corpus with its dictionary and ground truth.
    Synth(SynthArgs),
    /// Train a model (optional pre-training, then fine-tuning).
    Train(TrainArgs),
    /// Generate songs from a checkpoint under the rhyme constraint.
    Generate(GenerateArgs),
    /// Score a corpus, optionally a model, a reference and a ground truth.
    Evaluate(EvaluateArgs),
}

/// Everything a command produced, written only after it fully succeeded.
pub struct Product {
    pub files: Vec<(String, Vec<u8>)>,
    /// Set when a requested check failed; outputs are still written.
    pub check_failure: Option<String>,
}

impl Product {
    pub fn new() -> Self {
        Product {
            files: Vec::new(),
            check_failure: None,
        }
    }

    pub fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<clap::Error>() {
            return EXIT_USAGE;
        }
        if cause.is::<DataError>() || cause.is::<std::io::Error>() {
            return EXIT_DATA;
        }
        if let Some(e) = cause.downcast_ref::<rhymebeat::Error>() {
            use rhymebeat::Error as E;
            return match e {
                E::Config(_) => EXIT_USAGE,
                E::NonFiniteLoss { .. } | E::Generation { .. } => EXIT_RUNTIME,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_RUNTIME
}

fn option_snapshot(cmd: &clap::Command, m: &ArgMatches) -> Vec<(String, String)> {
    // ids also include argument groups; keep real arguments only
    let args: Vec<&str> = cmd.get_arguments().map(|a| a.get_id().as_str()).collect();
    let mut out: Vec<(String, String)> = m
        .ids()
        .filter(|id| id.as_str() != "config" && args.contains(&id.as_str()))
        .filter_map(|id| {
            let raw = m.get_raw(id.as_str())?;
            let v: Vec<String> = raw.map(|s| s.to_string_lossy().into_owned()).collect();
            Some((id.to_string(), v.join(",")))
        })
        .collect();
    out.sort();
    out
}

fn write_outputs(out: &std::path::Path, product: &Product, manifest: &mut RunManifest) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (name, bytes) in &product.files {
        let path = out.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        manifest.outputs.push((name.clone(), manifest::sha256_hex(bytes)));
    }
    manifest.finished = manifest::now();
    let path = out.join("manifest.txt");
    std::fs::write(&path, manifest.render()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Outputs go under `--out` only and must never replace a file that was read.
fn refuse_overwriting_inputs(out: &std::path::Path, product: &Product, manifest: &RunManifest) -> Result<()> {
    if out.exists() && !out.is_dir() {
        return Err(UsageError(format!("--out {} is not a directory", out.display())).into());
    }
    let inputs: Vec<PathBuf> = manifest.inputs.iter().filter_map(|(_, p, _)| p.canonicalize().ok()).collect();
    for (name, _) in &product.files {
        let target = out.join(name);
        if target.canonicalize().is_ok_and(|t| inputs.contains(&t)) {
            return Err(UsageError(format!("{} is an input; choose another --out", target.display())).into());
        }
    }
    Ok(())
}

fn run(argv: Vec<String>) -> Result<u8> {
    let mut cmd = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    let config_file = config::config_path(&argv);
    let argv_eff = match &config_file {
        Some(p) => config::apply_config(&argv, &cmd, p)?,
        None => argv.clone(),
    };
    let matches = match cmd.try_get_matches_from_mut(argv_eff.iter().map(OsString::from)) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return Ok(code);
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| UsageError(e.to_string()))?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");

    let mut manifest = RunManifest {
        command: name.to_string(),
        argv: argv[1..].to_vec(),
        config_file: config_file.clone(),
        options: option_snapshot(cmd.find_subcommand(name).expect("parsed subcommand exists"), sub),
        started: manifest::now(),
        ..RunManifest::default()
    };
    if let Some(p) = &config_file {
        let hash = manifest::sha256_file(p)?;
        manifest.inputs.push(("config".into(), p.clone(), hash));
    }
    let (out, product) = match &cli.command {
        Command::Align(a) => (&a.out, commands::align(a, &mut manifest)?),
        Command::Ingest(a) => (&a.out, commands::ingest(a, &mut manifest)?),
        Command::Synth(a) => (&a.out, commands::synth(a, &mut manifest)?),
        Command::Train(a) => (&a.out, commands::train(a, &mut manifest)?),
        Command::Generate(a) => (&a.out, commands::generate(a, &mut manifest)?),
        Command::Evaluate(a) => (&a.out, commands::evaluate(a, &mut manifest)?),
    };
    refuse_overwriting_inputs(out, &product, &manifest)?;
    write_outputs(out, &product, &mut manifest)?;
    if let Some(msg) = product.check_failure {
        error!("{msg}");
        return Ok(EXIT_CHECK_FAILED);
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let argv: Vec<String> = std::env::args().collect();
    match run(argv) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_errors_map_to_exit_codes() {
        let code = |e: rhymebeat::Error| exit_code(&anyhow::Error::new(e).context("outer"));
        assert_eq!(code(rhymebeat::Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(code(rhymebeat::Error::UnknownWord("x".into())), EXIT_DATA);
        assert_eq!(code(rhymebeat::Error::NonFiniteLoss { step: 1, loss: f64::NAN }), EXIT_RUNTIME);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(exit_code(&anyhow::Error::new(io)), EXIT_DATA);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), EXIT_RUNTIME);
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
