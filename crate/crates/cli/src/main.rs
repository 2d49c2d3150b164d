use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use unnest_core::engine::EngineConfig;
use unnest_core::harness::generator::{generate, GenerateSpec};
use unnest_core::harness::report::CorpusReport;
use unnest_core::harness::stats::StatsReport;
use unnest_core::harness::verify::{verify_records, VerifyRecord, VerifySummary};
use unnest_core::harness::{read_corpus, records_from_jsonl, records_to_jsonl, refactor_corpus};
use unnest_core::par::Execution;
use unnest_core::patterns::{Mode, PatternId, PatternSet};

/// Refactor nested-IF spreadsheet formulas and check the rewrites.
#[derive(Parser, Debug)]
#[command(name = "unnest", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// IFS handling of an omitted final else: paper or strict.
    #[arg(long, global = true, default_value = "paper")]
    mode: Mode,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Sampled environments per formula for verification.
    #[arg(long, global = true, default_value_t = 200)]
    envs: usize,
    /// Comma-separated patterns to enable (default: all).
    #[arg(long, global = true)]
    patterns: Option<PatternSet>,
    #[arg(long = "max-iter", global = true, default_value_t = 20)]
    max_iter: usize,
    /// Skip the per-formula differential check.
    #[arg(long = "no-verify", global = true)]
    no_verify: bool,
    /// Run redundancy removal only before the first rewrite.
    #[arg(long = "no-redundancy-rerun", global = true)]
    no_redundancy_rerun: bool,
    /// Process lines one at a time on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Input file (default: stdin).
    #[arg(long = "in", global = true)]
    input: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long = "out", global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Refactor a corpus into one JSON record per line.
    Refactor,
    /// Re-check refactoring records on sampled environments.
    Verify,
    /// If-depth distribution and clustering of a corpus.
    Stats,
    /// Refactor a corpus and print aggregate coverage and depth figures.
    Report {
        /// Read refactoring records instead of a corpus.
        #[arg(long)]
        records: bool,
    },
    /// Write a synthetic corpus.
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Formulas per pattern template.
    #[arg(long, default_value_t = 125)]
    count: usize,
    /// Per-pattern counts such as AND=5,OR=3; overrides --count.
    #[arg(long)]
    counts: Option<String>,
    #[arg(long = "min-depth", default_value_t = 2)]
    min_depth: usize,
    #[arg(long = "max-depth", default_value_t = 12)]
    max_depth: usize,
    /// Fraction of template formulas with an injected dead IF.
    #[arg(long, default_value_t = 0.3)]
    redundancy: f64,
    /// Negative controls appended after the templates.
    #[arg(long, default_value_t = 0)]
    controls: usize,
    /// Also write the spec and the kind of every line as JSON.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

enum Failure {
    Io(String),
    Config(String),
}

impl Failure {
    fn io(path: Option<&Path>, e: io::Error) -> Self {
        match path {
            Some(p) => Failure::Io(format!("{}: {e}", p.display())),
            None => Failure::Io(e.to_string()),
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct WithConfig<'a, T> {
    config: &'a EngineConfig,
    #[serde(flatten)]
    report: T,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SummaryLine<'a> {
    summary: &'a VerifySummary,
    passed: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Manifest<'a> {
    spec: &'a GenerateSpec,
    lines: Vec<ManifestLine<'a>>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ManifestLine<'a> {
    line: usize,
    #[serde(flatten)]
    formula: &'a unnest_core::harness::generator::GeneratedFormula,
}

impl Common {
    fn config(&self) -> Result<EngineConfig, Failure> {
        if self.envs == 0 {
            return Err(Failure::Config("--envs must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Failure::Config("--max-iter must be at least 1".into()));
        }
        Ok(EngineConfig {
            mode: self.mode,
            max_iterations: self.max_iter,
            enabled_patterns: self.patterns.unwrap_or_default(),
            verify: !self.no_verify,
            verify_env_count: self.envs,
            seed: self.seed,
            rerun_redundancy: !self.no_redundancy_rerun,
        })
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }

    fn read_input(&self) -> Result<String, Failure> {
        match &self.input {
            Some(p) => fs::read_to_string(p).map_err(|e| Failure::io(Some(p), e)),
            None => {
                let mut s = String::new();
                io::stdin().read_to_string(&mut s).map_err(|e| Failure::io(None, e))?;
                Ok(s)
            }
        }
    }

    fn write_output(&self, text: &str) -> Result<(), Failure> {
        write_to(self.output.as_deref(), text)
    }
}

fn write_to(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::io(Some(p), e)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::io(None, e)),
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn parse_counts(spec: &str) -> Result<BTreeMap<PatternId, usize>, Failure> {
    spec.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|item| {
            let (name, n) = item
                .split_once('=')
                .ok_or_else(|| Failure::Config(format!("expected NAME=COUNT, got {item:?}")))?;
            let p = name.parse::<PatternId>().map_err(|e| Failure::Config(e.to_string()))?;
            let n = n
                .trim()
                .parse::<usize>()
                .map_err(|e| Failure::Config(format!("{item:?}: {e}")))?;
            Ok((p, n))
        })
        .collect()
}

fn generate_cmd(common: &Common, args: &GenerateArgs) -> Result<(), Failure> {
    let per_pattern = match &args.counts {
        Some(c) => parse_counts(c)?,
        None => GenerateSpec::uniform(args.count).per_pattern,
    };
    let spec = GenerateSpec {
        per_pattern,
        min_depth: args.min_depth,
        max_depth: args.max_depth,
        redundancy_fraction: args.redundancy,
        controls: args.controls,
        seed: common.seed,
    };
    let formulas = generate(&spec).map_err(|e| Failure::Config(e.to_string()))?;
    let text: String = formulas.iter().map(|g| format!("{}\n", g.formula)).collect();
    common.write_output(&text)?;
    if let Some(path) = &args.manifest {
        let lines = formulas
            .iter()
            .enumerate()
            .map(|(i, formula)| ManifestLine { line: i + 1, formula })
            .collect();
        write_to(Some(path), &pretty(&Manifest { spec: &spec, lines }))?;
    }
    Ok(())
}

fn verify_cmd(common: &Common) -> Result<(), Failure> {
    if common.envs == 0 {
        return Err(Failure::Config("--envs must be at least 1".into()));
    }
    let records = records_from_jsonl(&common.read_input()?)
        .map_err(|e| Failure::Config(format!("input is not a refactoring record file: {e}")))?;
    let (out, summary) = verify_records(&records, common.envs, common.seed, common.execution())
        .map_err(|e| Failure::Config(e.to_string()))?;
    let mut text = String::new();
    for v in &out {
        text.push_str(&serde_json::to_string::<VerifyRecord>(v).expect("records serialize"));
        text.push('\n');
    }
    text.push_str(
        &serde_json::to_string(&SummaryLine {
            summary: &summary,
            passed: summary.passed(),
        })
        .expect("summary"),
    );
    text.push('\n');
    common.write_output(&text)?;
    eprintln!(
        "verified {} changed records: {} strictly equal, {} equal in-domain, {} errors",
        summary.checked, summary.strict_equal, summary.in_domain_equal, summary.errors
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let common = &cli.common;
    match &cli.command {
        Command::Refactor => {
            let cfg = common.config()?;
            let lines = read_corpus(&common.read_input()?);
            let records = refactor_corpus(&lines, &cfg, common.execution());
            common.write_output(&records_to_jsonl(&records))
        }
        Command::Verify => verify_cmd(common),
        Command::Stats => {
            let cfg = common.config()?;
            let stats = StatsReport::from_lines(&read_corpus(&common.read_input()?));
            common.write_output(&pretty(&WithConfig {
                config: &cfg,
                report: stats,
            }))
        }
        Command::Report { records } => {
            let cfg = common.config()?;
            let input = common.read_input()?;
            let recs = if *records {
                records_from_jsonl(&input).map_err(|e| Failure::Config(format!("input is not a record file: {e}")))?
            } else {
                refactor_corpus(&read_corpus(&input), &cfg, common.execution())
            };
            // records from a file carry no trace of the settings that made them
            let config = (!*records).then_some(cfg);
            common.write_output(&pretty(&CorpusReport::from_records(&recs, config)))
        }
        Command::Generate(args) => generate_cmd(common, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(msg)) => {
            eprintln!("unnest: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("unnest: {msg}");
            ExitCode::from(2)
        }
    }
}
