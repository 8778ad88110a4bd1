use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use engage_rank::ahp::{self, AhpPreset, AhpResult, PairwiseMatrix};
use engage_rank::pipeline::{self, PipelineConfig, PipelineError};
use engage_rank::survey::{self, SynthSpec, Target};

/// Engagement ranking pipeline: boosted trees, feature importance and AHP.
#[derive(Debug, Parser)]
#[command(name = "engage-rank", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON pipeline configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed from which every stage seed is derived.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Survey CSV to analyze instead of synthetic data.
    #[arg(long, global = true, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Directory that receives output files.
    #[arg(long, global = true, value_name = "PATH")]
    out_dir: Option<PathBuf>,
    /// Engagement target for single-target commands.
    #[arg(long, global = true, value_enum)]
    target: Option<TargetArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TargetArg {
    Be,
    Ce,
    Ee,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Target {
        match t {
            TargetArg::Be => Target::Be,
            TargetArg::Ce => Target::Ce,
            TargetArg::Ee => Target::Ee,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Be,
    CeEe,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print descriptive statistics of the survey columns.
    Stats,
    /// Write a synthetic survey CSV.
    Synth {
        /// Number of respondents (defaults to the configured value).
        #[arg(long)]
        rows: Option<usize>,
        /// Output file; standard output when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Fit one target and emit its per-stage deviance curve.
    Train {
        /// Also write the fitted ensemble as JSON.
        #[arg(long, value_name = "PATH")]
        save_model: Option<PathBuf>,
    },
    /// Fit one target and emit its combined importance ranking.
    Importance,
    /// Weight a ranked feature list with a tiered pairwise matrix.
    Ahp {
        /// One feature per line, most important first; `#` starts a comment.
        ranking: PathBuf,
        /// Tier layout; defaults to the configured preset of --target, else be.
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
    },
    /// Run the full pipeline and write every report file.
    Run,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Inconsistent(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Inconsistent(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Inconsistent(m) => m,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("engage-rank: {}", e.message());
        return ExitCode::from(e.code());
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("engage-rank: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("ENGAGE_RANK_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "ENGAGE_RANK_THREADS={value} is not a positive integer"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn load_config(global: &GlobalArgs) -> Result<PipelineConfig, CliError> {
    let mut config = match &global.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let mut config = PipelineConfig::from_json(&text)?;
            // relative input paths resolve against the config file
            if let (Some(input), Some(dir)) = (&config.input, path.parent()) {
                if input.is_relative() {
                    config.input = Some(dir.join(input));
                }
            }
            config
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(input) = &global.input {
        config.input = Some(input.clone());
        config.synth = None;
    }
    if let Some(dir) = &global.out_dir {
        config.out_dir = Some(dir.clone());
    }
    config.validate()?;
    Ok(config)
}

fn require_target(global: &GlobalArgs, command: &str) -> Result<Target, CliError> {
    global
        .target
        .map(Target::from)
        .ok_or_else(|| CliError::Usage(format!("`{command}` requires --target {{be|ce|ee}}")))
}

/// Writes `contents` to `out_dir/name` when an output directory is set,
/// otherwise to standard output.
fn deliver(config: &PipelineConfig, name: &str, contents: &str) -> Result<(), CliError> {
    match &config.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => print_stdout(contents),
    }
}

fn print_stdout(contents: &str) -> Result<(), CliError> {
    io::stdout()
        .lock()
        .write_all(contents.as_bytes())
        .map_err(|e| CliError::Data(format!("stdout: {e}")))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let global = &cli.global;
    match cli.command {
        Command::Stats => {
            let config = load_config(global)?;
            let table = pipeline::load_table(&config)?;
            let stats =
                survey::descriptive_stats(&table).map_err(|e| CliError::Data(e.to_string()))?;
            deliver(&config, "stats.csv", &stats.to_csv())
        }
        Command::Synth { rows, output } => {
            let config = load_config(global)?;
            let mut spec = config.synth.clone().unwrap_or_else(SynthSpec::default);
            if let Some(rows) = rows {
                spec.n_rows = rows;
            }
            if let Some(seed) = global.seed {
                spec.seed = seed;
            }
            let table = survey::synthesize(&spec).map_err(|e| CliError::Data(e.to_string()))?;
            let mut buffer = Vec::new();
            survey::write_survey_csv(&table, &mut buffer)
                .map_err(|e| CliError::Data(e.to_string()))?;
            match output {
                Some(path) => fs::write(&path, buffer).map_err(|e| io_error(&path, e)),
                None => print_stdout(&String::from_utf8_lossy(&buffer)),
            }
        }
        Command::Train { save_model } => {
            let target = require_target(global, "train")?;
            let config = load_config(global)?;
            let prepared = pipeline::prepare(&config)?;
            let trained = pipeline::train_target(&config, &prepared, target)?;
            if let Some(path) = save_model {
                let json = serde_json::to_string_pretty(&trained.ensemble.to_json())
                    .map_err(|e| CliError::Data(e.to_string()))?;
                fs::write(&path, json + "\n").map_err(|e| io_error(&path, e))?;
            }
            deliver(
                &config,
                &format!("deviance_{}.csv", target.key()),
                &trained.curve.to_csv(),
            )
        }
        Command::Importance => {
            let target = require_target(global, "importance")?;
            let config = load_config(global)?;
            let prepared = pipeline::prepare(&config)?;
            let trained = pipeline::train_target(&config, &prepared, target)?;
            let stage = pipeline::importance_stage(&config, &trained)?;
            deliver(
                &config,
                &format!("importance_{}.csv", target.key()),
                &stage.ranking.to_csv(),
            )
        }
        Command::Ahp { ranking, preset } => {
            let preset = match (preset, global.target) {
                (Some(PresetArg::Be), _) => AhpPreset::BeStyle,
                (Some(PresetArg::CeEe), _) => AhpPreset::CeEeStyle,
                (None, Some(target)) => load_config(global)?
                    .presets
                    .for_target(target.into())
                    .clone(),
                (None, None) => AhpPreset::BeStyle,
            };
            let text = fs::read_to_string(&ranking).map_err(|e| io_error(&ranking, e))?;
            let features = parse_ranking(&text);
            let tiers =
                ahp::assign_tiers(&features, &preset).map_err(|e| CliError::Data(e.to_string()))?;
            let matrix = ahp::build_pairwise(&tiers).map_err(|e| CliError::Data(e.to_string()))?;
            let result = ahp::assess(&matrix).map_err(|e| CliError::Data(e.to_string()))?;
            print_stdout(&render_ahp(&matrix, &result))?;
            if result.consistent {
                Ok(())
            } else {
                Err(CliError::Inconsistent(format!(
                    "pairwise matrix is inconsistent (CR = {:.4} >= {})",
                    result.cr,
                    ahp::CR_THRESHOLD
                )))
            }
        }
        Command::Run => {
            let config = load_config(global)?;
            let out_dir = config.out_dir.clone().ok_or_else(|| {
                CliError::Usage("`run` requires --out-dir or `out_dir` in the config".into())
            })?;
            let report = pipeline::run_pipeline(&config)?;
            let written = pipeline::emit_report(&report, &out_dir)?;
            eprintln!("wrote {} files to {}", written.len(), out_dir.display());
            let inconsistent = report.inconsistent_targets();
            if inconsistent.is_empty() {
                Ok(())
            } else {
                let names: Vec<&str> = inconsistent.iter().map(|t| t.label()).collect();
                Err(CliError::Inconsistent(format!(
                    "inconsistent pairwise matrix for {}",
                    names.join(", ")
                )))
            }
        }
    }
}

fn parse_ranking(text: &str) -> Vec<String> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|line| !line.is_empty())
        .map(str::to_string)
        .collect()
}

fn render_ahp(matrix: &PairwiseMatrix, result: &AhpResult) -> String {
    let mut out = matrix.to_csv();
    out.push('\n');
    out.push_str("feature,weight_score,percentage\n");
    for ((label, w), p) in result
        .labels
        .iter()
        .zip(&result.weight_scores)
        .zip(&result.percentages)
    {
        let _ = writeln!(out, "{label},{w:.3},{p:.3}");
    }
    out.push('\n');
    let _ = writeln!(out, "lambda_max,{:.4}", result.lambda_max);
    let _ = writeln!(out, "ci,{:.4}", result.ci);
    let _ = writeln!(out, "cr,{:.4}", result.cr);
    let _ = writeln!(out, "consistent,{}", result.consistent);
    out
}
