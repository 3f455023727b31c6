use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use straightness::analysis::{self, AnalysisOptions, MethodChoice, ReportFormat};
use straightness::oracle::OracleConfig;
use straightness::parser::{parse_corpus, parse_expr, CorpusEntry, CorpusError, Expectation, OdeSystem, ParamDecl};

#[derive(Parser)]
#[command(name = "straightness", version, about = "Decide whether second-order ODE systems are straight")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the systems in a corpus file, or one system given inline.
    Analyze(AnalyzeArgs),
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    /// Corpus file to analyze.
    #[arg(required_unless_present = "rhs", conflicts_with = "rhs")]
    file: Option<PathBuf>,
    /// Right-hand side fᴵ of an inline system; repeat once per equation.
    #[arg(long)]
    rhs: Vec<String>,
    /// Inline parameter: `a` or `a=generic`, `a=generic-nonzero`, `a=<value>`.
    #[arg(long)]
    param: Vec<String>,
    /// Expected classification of the inline system.
    #[arg(long, value_parser = ["straight", "not-straight"])]
    expect: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    samples: usize,
    /// Relative tolerance of the zero oracle.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Emit a JSON array instead of a table.
    #[arg(long)]
    json: bool,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "auto", value_parser = ["auto", "tresse", "fels", "quartic"])]
    method: String,
    /// Swap every straight/not-straight expectation.
    #[arg(long, hide = true)]
    expect_invert: bool,
}

fn inline_entry(args: &AnalyzeArgs) -> Result<CorpusEntry, String> {
    let rhs = args
        .rhs
        .iter()
        .enumerate()
        .map(|(i, s)| parse_expr(s).map_err(|e| format!("--rhs #{}: {e}", i + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut params = Vec::new();
    for p in &args.param {
        let (name, policy) = p.split_once('=').unwrap_or((p, "generic"));
        let decl = match policy {
            "generic" => ParamDecl::generic(name),
            "generic-nonzero" => ParamDecl::generic_nonzero(name),
            value => {
                let e = parse_expr(value).map_err(|e| format!("--param {name}: {e}"))?;
                let c = e.as_const().ok_or_else(|| format!("--param {name}: `{value}` is not a constant"))?;
                ParamDecl::fixed(name, c.clone())
            }
        };
        params.push(decl);
    }
    let system = OdeSystem::new("inline", rhs, params).map_err(|e| e.to_string())?;
    let expect = match args.expect.as_deref() {
        Some("straight") => Expectation::Straight,
        Some(_) => Expectation::NotStraight,
        None => Expectation::Unspecified,
    };
    Ok(CorpusEntry { system, expect, conserved: vec![], notes: vec![] })
}

fn analyze(args: AnalyzeArgs) -> ExitCode {
    let entries = match &args.file {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{}: {e}", path.display());
                    return ExitCode::from(2);
                }
            };
            match parse_corpus(&text) {
                Ok(es) => es,
                Err(CorpusError::Parse(e)) => {
                    eprintln!("{}:{e}", path.display());
                    return ExitCode::from(2);
                }
                Err(CorpusError::Validation(e)) => {
                    eprintln!("{}:{e}", path.display());
                    return ExitCode::from(2);
                }
            }
        }
        None => match inline_entry(&args) {
            Ok(e) => vec![e],
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(2);
            }
        },
    };
    let opts = AnalysisOptions {
        oracle: OracleConfig { seed: args.seed, samples: args.samples, rel_tol: args.tol, ..OracleConfig::default() },
        method: args.method.parse::<MethodChoice>().expect("validated by clap"),
        expect_invert: args.expect_invert,
    };
    let records = match analysis::analyze_all(&entries, &opts, args.jobs) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let format = if args.json { ReportFormat::Json } else { ReportFormat::Text };
    println!("{}", analysis::report(&records, format).trim_end());
    ExitCode::from(analysis::exit_code(&records) as u8)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Analyze(args) => analyze(args),
    }
}
