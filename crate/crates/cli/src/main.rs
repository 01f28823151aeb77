//! `lfsd` — generate low-fidelity synthetic data and run the pre-release
//! checks.
//!
//! Exit status: 0 when every check passes, 1 on usage, I/O or
//! configuration errors, 2 when one or more checks fail.

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lfsd_core::affix::AffixRule;
use lfsd_core::checks::{CheckOutcome, Severity, Verdict};
use lfsd_core::config::{PipelineConfig, ReportFormat};
use lfsd_core::dataset::{read_csv_path, CsvOptions};
use lfsd_core::pipeline::{self, FullReport, PipelineError};
use lfsd_core::risk::KeySpec;
use lfsd_core::schema::infer_schema;
use lfsd_core::synthesis::Method;

const EXIT_ERROR: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 2;
const MAX_SHOWN_PER_CODE: usize = 5;

#[derive(Parser, Debug)]
#[command(name = "lfsd", version, about = "Low-fidelity synthetic data generation and release checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Infer a schema file from a CSV.
    Infer {
        #[arg(long)]
        data: PathBuf,
        /// Schema file to write; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        missing_token: Option<String>,
    },
    /// Generate synthetic data and its schema (no mitigation or checks).
    Synth(RunArgs),
    /// Classify risky records in an existing synthetic file.
    Risk(RunArgs),
    /// Run the four checks on existing synthetic artifacts.
    Check(RunArgs),
    /// Synthesize, mitigate and run the four checks.
    Pipeline(RunArgs),
    /// Compare each released column's distribution with the original.
    Fidelity(RunArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Metadata,
    Margins,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Metadata => Method::FromMetadata,
            MethodArg::Margins => Method::FromMargins,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Structured,
    Human,
    Both,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> ReportFormat {
        match f {
            FormatArg::Structured => ReportFormat::Structured,
            FormatArg::Human => ReportFormat::Human,
            FormatArg::Both => ReportFormat::Both,
        }
    }
}

/// Flags shared by the config-driven subcommands; each overrides the
/// corresponding config entry.
#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Original data CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Original metadata (schema file).
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Key columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    keys: Option<Vec<String>>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Number of synthetic rows.
    #[arg(long)]
    n: Option<usize>,
    /// Column affix: "synth_" (prefix) or "_synth" (suffix).
    #[arg(long)]
    affix: Option<String>,
    #[arg(long)]
    missing_token: Option<String>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

impl RunArgs {
    fn into_config(self, needs_rows: bool) -> Result<PipelineConfig, PipelineError> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path).map_err(PipelineError::Config)?,
            None => {
                let method = self.method.map(Method::from).unwrap_or(if self.data.is_some() {
                    Method::FromMargins
                } else {
                    Method::FromMetadata
                });
                // Row count is irrelevant when only checking existing files.
                let n = self.n.unwrap_or(if needs_rows { 0 } else { 1 });
                PipelineConfig::empty(method, n)
            }
        };
        let cwd = std::env::current_dir().unwrap_or_default();
        let abs = |p: PathBuf| if p.is_relative() { cwd.join(p) } else { p };
        if let Some(p) = self.data {
            config.paths.original_data = Some(abs(p));
        }
        if let Some(p) = self.metadata {
            config.paths.original_metadata = Some(abs(p));
        }
        if let Some(p) = self.out {
            config.paths.output_dir = abs(p);
        }
        if let Some(seed) = self.seed {
            config.synthesis.seed = seed;
        }
        if let Some(keys) = self.keys {
            let keys: Vec<String> = keys.into_iter().map(|k| k.trim().to_string()).filter(|k| !k.is_empty()).collect();
            config.keys = KeySpec::new(&keys);
        }
        if let Some(m) = self.method {
            config.synthesis.method = m.into();
        }
        if let Some(n) = self.n {
            config.synthesis.n_synth = n;
        }
        if let Some(a) = self.affix {
            let rule = AffixRule::parse_shorthand(&a);
            config.synthesis.affix = rule.clone();
            config.policy.required_affix = rule;
        }
        if let Some(t) = self.missing_token {
            config.missing_token = Some(t);
        }
        if let Some(f) = self.format {
            config.report.format = f.into();
        }
        if self.config.is_none() && config.paths.output_dir.is_relative() {
            config.paths.output_dir = abs(config.paths.output_dir.clone());
        }
        Ok(config)
    }
}

struct Style {
    color: bool,
}

impl Style {
    fn detect() -> Style {
        Style {
            color: std::env::var_os("LFSD_NO_COLOR").is_none() && std::io::stdout().is_terminal(),
        }
    }

    fn verdict(&self, v: Verdict) -> String {
        match (self.color, v) {
            (true, Verdict::Pass) => format!("\x1b[32m{v}\x1b[0m"),
            (true, Verdict::Fail) => format!("\x1b[1;31m{v}\x1b[0m"),
            (false, _) => v.to_string(),
        }
    }

    fn severity(&self, s: Severity) -> String {
        match (self.color, s) {
            (true, Severity::Fail) => format!("\x1b[31m{s}\x1b[0m"),
            (true, Severity::Warn) => format!("\x1b[33m{s}\x1b[0m"),
            _ => s.to_string(),
        }
    }
}

fn print_outcome(style: &Style, outcome: &CheckOutcome) {
    println!("{:<14} {}", outcome.check_id.to_string(), style.verdict(outcome.verdict));
    // The report file lists every finding; the terminal shows a few per code.
    let mut shown: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for f in outcome.findings.iter().filter(|f| f.severity != Severity::Info) {
        let n = shown.entry(f.code.as_str()).or_insert(0);
        *n += 1;
        if *n <= MAX_SHOWN_PER_CODE {
            let at = f.location.as_deref().map(|l| format!(" [{l}]")).unwrap_or_default();
            println!("    {} {}: {}{at}", style.severity(f.severity), f.code, f.message);
        }
    }
    for (code, n) in shown {
        if n > MAX_SHOWN_PER_CODE {
            println!("    ... {} more {code} finding(s) in the report", n - MAX_SHOWN_PER_CODE);
        }
    }
}

fn print_report(report: &FullReport, format: ReportFormat, files: &pipeline::OutputFiles) -> Result<()> {
    if format == ReportFormat::Structured {
        print!("{}", report.to_toml()?);
        return Ok(());
    }
    let style = Style::detect();
    for outcome in report.outcomes() {
        print_outcome(&style, outcome);
    }
    println!("overall        {}", style.verdict(report.overall));
    let dir = files.report.parent().map(|p| p.display().to_string()).unwrap_or_default();
    for name in report.outputs.values() {
        println!("wrote {dir}/{name}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Infer {
            data,
            out,
            missing_token,
        } => {
            let options = CsvOptions { missing_token };
            let dataset = read_csv_path(&data, &options, None).with_context(|| data.display().to_string())?;
            let schema = infer_schema(&dataset).with_context(|| data.display().to_string())?;
            let text = schema.to_text()?;
            match out {
                Some(path) => {
                    pipeline::write_atomic(&path, text.as_bytes())?;
                    println!("wrote {}", path.display());
                }
                None => print!("{text}"),
            }
            Ok(0)
        }
        Command::Synth(args) => {
            let config = args.into_config(true)?;
            let (data, _, files) = pipeline::run_synth(&config)?;
            println!("wrote {} ({} rows)", files.data.display(), data.n_rows());
            println!("wrote {}", files.schema.display());
            Ok(0)
        }
        Command::Risk(args) => {
            let config = args.into_config(false)?;
            let (report, path) = pipeline::run_risk(&config)?;
            println!(
                "synthetic uniques: {}  unique in original: {} ({:.4})  replicated uniques: {} ({:.4})  of {} rows",
                report.n_synth_unique,
                report.n_unique_in_original,
                report.proportion_unique_in_original,
                report.n_replicated_unique,
                report.proportion_replicated_unique,
                report.n_synth
            );
            println!("wrote {}", path.display());
            Ok(if config.policy.within_bounds(&report) { 0 } else { EXIT_CHECK_FAILED })
        }
        Command::Check(args) => {
            let config = args.into_config(false)?;
            let result = pipeline::run_check(&config)?;
            print_report(&result.report, config.report.format, &result.files)?;
            Ok(if result.report.passed() { 0 } else { EXIT_CHECK_FAILED })
        }
        Command::Pipeline(args) => {
            let config = args.into_config(true)?;
            let result = pipeline::run_all(&config)?;
            print_report(&result.report, config.report.format, &result.files)?;
            Ok(if result.report.passed() { 0 } else { EXIT_CHECK_FAILED })
        }
        Command::Fidelity(args) => {
            let config = args.into_config(false)?;
            let (report, path) = pipeline::run_fidelity(&config)?;
            for m in &report.margins {
                println!("{:<24} TVD {:.4}", m.column, m.value);
            }
            println!("wrote {}", path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
