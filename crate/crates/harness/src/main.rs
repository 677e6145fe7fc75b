//! `tokmark`: keygen / generate / attack / detect / experiment / suite.
//!
//! Exit codes: 0 success, 1 failed verdicts, 2 usage or configuration error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tokmark_harness::config::{parse_config, ExperimentConfig, KeyCfg, ModelCfg};
use tokmark_harness::{experiments, presets, HarnessError};

use tokmark_core::model::generate_plain;
use tokmark_core::serial;
use tokmark_core::watermark::{wm_detect, wm_generate, DetectMode};

#[derive(Parser)]
#[command(name = "tokmark", version, about = "Token-level watermarking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a watermark key and write it to a binary key file.
    Keygen(KeygenArgs),
    /// Generate a (watermarked or plain) token sequence.
    Generate(GenerateArgs),
    /// Run a token-level attack channel over a token sequence.
    Attack(AttackArgs),
    /// Scan a token sequence for the watermark.
    Detect(DetectArgs),
    /// Run one experiment from a config file or a named preset.
    Experiment(ExperimentArgs),
    /// Run the bundled experiment suite and write all reports.
    Suite(SuiteArgs),
    /// List the built-in experiment presets.
    Presets,
}

#[derive(Args)]
struct KeygenArgs {
    /// Model config (TOML with a [model] table) the key must match.
    #[arg(long)]
    model: PathBuf,
    /// Key config (TOML with a [key] table).
    #[arg(long)]
    key_config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    key: PathBuf,
    /// Model config (TOML with a [model] table).
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "default")]
    prompt: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Skip embedding: draw from the plain model.
    #[arg(long)]
    plain: bool,
    /// Also write the per-step transcript as JSON lines.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    input: PathBuf,
    /// Channel config (TOML with [[channel.stages]] entries). White-box
    /// hash-flip stages need the key.
    #[arg(long)]
    channel: PathBuf,
    #[arg(long)]
    key: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    key: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "fast")]
    mode: String,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config file; mutually exclusive with --preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset name (see `tokmark presets`).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = "reports")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long, default_value = "reports")]
    out_dir: PathBuf,
    /// Run the reduced CI-sized suite.
    #[arg(long)]
    ci: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Keygen(a) => keygen(a),
        Command::Generate(a) => generate(a),
        Command::Attack(a) => attack(a),
        Command::Detect(a) => detect(a),
        Command::Experiment(a) => experiment(a),
        Command::Suite(a) => suite(a),
        Command::Presets => {
            for name in presets::PRESET_NAMES {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

#[derive(serde::Deserialize)]
struct ModelFile {
    model: ModelCfg,
}

#[derive(serde::Deserialize)]
struct KeyFile {
    key: KeyCfg,
}

#[derive(serde::Deserialize)]
struct ChannelFile {
    channel: tokmark_harness::config::ChannelCfg,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| HarnessError::Toml(format!("{}: {e}", path.display())))
}

fn keygen(a: KeygenArgs) -> Result<ExitCode, HarnessError> {
    let model: ModelFile = read_toml(&a.model)?;
    let key_cfg: KeyFile = read_toml(&a.key_config)?;
    let key = key_cfg.key.build(&model.model, a.seed)?;
    let mut out = BufWriter::new(File::create(&a.out)?);
    serial::write_key(&mut out, &key)?;
    out.flush()?;
    println!("wrote key: {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn generate(a: GenerateArgs) -> Result<ExitCode, HarnessError> {
    let key = serial::read_key(&mut BufReader::new(File::open(&a.key)?))?;
    let model_file: ModelFile = read_toml(&a.model)?;
    let model = model_file.model.build()?;
    let (tokens, transcript) = if a.plain {
        generate_plain(&model, &a.prompt, a.seed)?
    } else {
        wm_generate(&key, &model, &a.prompt, a.seed)?
    };
    let mut out = BufWriter::new(File::create(&a.out)?);
    serial::write_tokens(
        &mut out,
        &tokens,
        key.params.vocab_size,
        key.params.max_len,
        key.params.block_len,
    )?;
    out.flush()?;
    if let Some(path) = a.transcript {
        let mut tw = BufWriter::new(File::create(path)?);
        for step in &transcript.steps {
            serde_json::to_writer(&mut tw, step)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            writeln!(tw)?;
        }
        tw.flush()?;
    }
    println!("wrote {} tokens: {}", tokens.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn attack(a: AttackArgs) -> Result<ExitCode, HarnessError> {
    let (tokens, header) =
        serial::read_tokens(&mut BufReader::new(File::open(&a.input)?))?;
    let channel: ChannelFile = read_toml(&a.channel)?;
    let stages = channel.channel.resolve(header.0)?;
    let needs_key = stages
        .iter()
        .any(|s| matches!(s, tokmark_harness::config::ResolvedStage::HashFlipPerBlock { .. }));
    let attacked = if needs_key {
        let key_path = a.key.ok_or_else(|| {
            HarnessError::Config("hash_flip stages need --key (white-box channel)".into())
        })?;
        let key = serial::read_key(&mut BufReader::new(File::open(key_path)?))?;
        experiments::apply_resolved_stages(&stages, &tokens, &key, a.seed)?
    } else {
        let core_stages: Vec<tokmark_core::channel::ChannelStage> = stages
            .into_iter()
            .map(|s| match s {
                tokmark_harness::config::ResolvedStage::Core(st) => st,
                tokmark_harness::config::ResolvedStage::HashFlipPerBlock { .. } => unreachable!(),
            })
            .collect();
        tokmark_core::channel::ChannelSpec {
            stages: core_stages,
        }
        .apply(&tokens, header.0, a.seed)?
    };
    let mut out = BufWriter::new(File::create(&a.out)?);
    serial::write_tokens(&mut out, &attacked, header.0, header.1, header.2)?;
    out.flush()?;
    println!(
        "wrote {} tokens (from {}): {}",
        attacked.len(),
        tokens.len(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn detect(a: DetectArgs) -> Result<ExitCode, HarnessError> {
    let key = serial::read_key(&mut BufReader::new(File::open(&a.key)?))?;
    let (tokens, _) = serial::read_tokens(&mut BufReader::new(File::open(&a.input)?))?;
    let mode = match a.mode.as_str() {
        "fast" => DetectMode::Fast,
        "exhaustive" => DetectMode::Exhaustive,
        other => {
            return Err(HarnessError::Config(format!(
                "unknown detect mode `{other}` (fast|exhaustive)"
            )))
        }
    };
    let report = wm_detect(&key, &tokens, mode)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| HarnessError::Config(e.to_string()))?
    );
    Ok(ExitCode::SUCCESS)
}

fn experiment(a: ExperimentArgs) -> Result<ExitCode, HarnessError> {
    let cfg: ExperimentConfig = match (&a.config, &a.preset) {
        (Some(path), None) => parse_config(&std::fs::read_to_string(path)?)?,
        (None, Some(name)) => presets::preset(name)
            .ok_or_else(|| HarnessError::Config(format!("unknown preset `{name}`")))?,
        _ => {
            return Err(HarnessError::Config(
                "pass exactly one of --config or --preset".into(),
            ))
        }
    };
    let report = experiments::run(&cfg)?;
    let path = report.write_files(&a.out_dir)?;
    println!("report: {}", path.display());
    for v in &report.verdicts {
        println!(
            "  [{}] {} (observed {:.6})",
            if v.pass { "pass" } else { "FAIL" },
            v.expr,
            v.observed
        );
    }
    if report.all_pass() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn suite(a: SuiteArgs) -> Result<ExitCode, HarnessError> {
    let names = if a.ci {
        presets::SUITE_CI
    } else {
        presets::SUITE
    };
    let mut all_pass = true;
    for name in names {
        let cfg = presets::preset(name).expect("suite preset exists");
        let started = std::time::Instant::now();
        let report = experiments::run(&cfg)?;
        let ok = report.all_pass();
        all_pass &= ok;
        report.write_files(&a.out_dir.join(name))?;
        println!(
            "{name}: {} ({:.1}s)",
            if ok { "pass" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
    if all_pass {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}
