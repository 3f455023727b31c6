//! Batch classification of corpus entries and report serialization.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::oracle::{OracleConfig, Outcome, Verdict};
use crate::parser::{parse_corpus, CorpusEntry, CorpusError, Expectation};
use crate::torsion::{self, TorsionError, TorsionReport};

/// Which invariant to compute. `Auto` picks the scalar invariant for one
/// equation and the matrix invariant otherwise.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MethodChoice {
    #[default]
    Auto,
    Tresse,
    Fels,
    Quartic,
}

impl FromStr for MethodChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(MethodChoice::Auto),
            "tresse" => Ok(MethodChoice::Tresse),
            "fels" => Ok(MethodChoice::Fels),
            "quartic" => Ok(MethodChoice::Quartic),
            other => Err(format!("unknown method `{other}`, expected auto, tresse, fels or quartic")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AnalysisOptions {
    pub oracle: OracleConfig,
    pub method: MethodChoice,
    /// Swap `straight` and `not-straight` expectations. Used to exercise the
    /// mismatch path.
    pub expect_invert: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Straight,
    NotStraight,
    Inconclusive,
}

impl Classification {
    pub fn of(v: &Verdict) -> Self {
        match v.outcome {
            Outcome::Zero { .. } => Classification::Straight,
            Outcome::NonZero { .. } => Classification::NotStraight,
            Outcome::Inconclusive { .. } => Classification::Inconclusive,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Straight => "straight",
            Classification::NotStraight => "not-straight",
            Classification::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservedRecord {
    pub quantity: String,
    /// `zero` when the quantity is conserved.
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisRecord {
    pub name: String,
    pub n: usize,
    pub method: String,
    pub classification: Classification,
    pub expected: Option<Expectation>,
    #[serde(rename = "match")]
    pub matches: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<BTreeMap<String, [f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_entry: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub seed: u64,
    pub samples: usize,
    pub wall_ms: f64,
    pub expr_size: usize,
    pub branch_limited: bool,
    pub quartic: Classification,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub conserved: Vec<ConservedRecord>,
    /// Whether a mismatch on this entry fails the run.
    pub gating: bool,
}

impl AnalysisRecord {
    /// A gating entry that disagrees with its expectation.
    pub fn is_failure(&self) -> bool {
        self.gating && self.matches == Some(false)
    }
}

fn run_method(entry: &CorpusEntry, opts: &AnalysisOptions) -> Result<TorsionReport, TorsionError> {
    let sys = &entry.system;
    match opts.method {
        MethodChoice::Auto => torsion::is_straight(sys, &opts.oracle),
        MethodChoice::Tresse => torsion::tresse_torsion(sys, &opts.oracle),
        MethodChoice::Fels => torsion::fels_torsion(sys, &opts.oracle),
        MethodChoice::Quartic => torsion::quartic_test(sys, &opts.oracle),
    }
}

/// Classifies one entry, runs the quartic test and every conserved-quantity
/// check, and compares against the entry's expectation.
pub fn analyze(entry: &CorpusEntry, opts: &AnalysisOptions) -> Result<AnalysisRecord, TorsionError> {
    let start = Instant::now();
    let report = run_method(entry, opts)?;
    let quartic = match opts.method {
        MethodChoice::Quartic => Classification::of(&report.verdict),
        _ => Classification::of(&torsion::quartic_test(&entry.system, &opts.oracle)?.verdict),
    };
    let mut conserved = Vec::with_capacity(entry.conserved.len());
    let mut all_conserved = true;
    for g in &entry.conserved {
        let v = torsion::check_conserved(&entry.system, g, &opts.oracle)?;
        all_conserved &= v.is_zero();
        let verdict = match v.outcome {
            Outcome::Zero { .. } => "zero",
            Outcome::NonZero { .. } => "nonzero",
            Outcome::Inconclusive { .. } => "inconclusive",
        };
        conserved.push(ConservedRecord { quantity: g.to_string(), verdict: verdict.into() });
    }

    let classification = Classification::of(&report.verdict);
    let expected = match (entry.expect, opts.expect_invert) {
        (Expectation::Unspecified, _) => None,
        (e, false) => Some(e),
        (Expectation::Straight, true) => Some(Expectation::NotStraight),
        (Expectation::NotStraight, true) => Some(Expectation::Straight),
    };
    let matches = match expected {
        Some(e) => {
            let want = match e {
                Expectation::Straight => Classification::Straight,
                _ => Classification::NotStraight,
            };
            Some(want == classification && all_conserved)
        }
        None if !entry.conserved.is_empty() => Some(all_conserved),
        None => None,
    };
    let (witness, witness_entry) = match report.verdict.witness() {
        Some(w) => {
            let point = w.point.iter().map(|(k, v)| (k.to_string(), [v.re, v.im])).collect();
            (Some(point), w.entry.clone())
        }
        None => (None, None),
    };
    let reason = match &report.verdict.outcome {
        Outcome::Inconclusive { reason } => Some(reason.clone()),
        _ => None,
    };
    Ok(AnalysisRecord {
        name: entry.system.name.clone(),
        n: entry.system.dim(),
        method: report.method.to_string(),
        classification,
        expected,
        matches,
        witness,
        witness_entry,
        reason,
        seed: report.verdict.seed,
        samples: report.verdict.samples_requested,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        expr_size: report.telemetry.expr_size,
        branch_limited: report.verdict.branch_limited,
        quartic,
        conserved,
        gating: entry.is_gating(),
    })
}

/// Analyzes entries in parallel on `jobs` threads (all cores when `None`).
/// Results come back in input order.
pub fn analyze_all(
    entries: &[CorpusEntry],
    opts: &AnalysisOptions,
    jobs: Option<usize>,
) -> Result<Vec<AnalysisRecord>, TorsionError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| TorsionError::Input(e.to_string()))?;
    pool.install(|| entries.par_iter().map(|e| analyze(e, opts)).collect())
}

/// Parses and analyzes a whole corpus file.
pub fn analyze_corpus(text: &str, opts: &AnalysisOptions, jobs: Option<usize>) -> Result<Vec<AnalysisRecord>, AnalyzeError> {
    let entries = parse_corpus(text)?;
    Ok(analyze_all(&entries, opts, jobs)?)
}

#[derive(Debug, thiserror::Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Torsion(#[from] TorsionError),
}

/// `0` when no gating entry mismatches, `1` otherwise.
pub fn exit_code(records: &[AnalysisRecord]) -> i32 {
    if records.iter().any(AnalysisRecord::is_failure) {
        1
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

pub fn report(records: &[AnalysisRecord], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(records).expect("records serialize"),
        ReportFormat::Text => text_report(records),
    }
}

fn text_report(records: &[AnalysisRecord]) -> String {
    let header = ["name", "n", "method", "classification", "expected", "match", "quartic", "ms"];
    let rows: Vec<[String; 8]> = records
        .iter()
        .map(|r| {
            let mut class = r.classification.to_string();
            if r.branch_limited {
                class.push('*');
            }
            let m = match (r.matches, r.gating) {
                (None, _) => "-".to_string(),
                (Some(true), _) => "ok".to_string(),
                (Some(false), true) => "MISMATCH".to_string(),
                (Some(false), false) => "mismatch (soft)".to_string(),
            };
            [
                r.name.clone(),
                r.n.to_string(),
                r.method.clone(),
                class,
                r.expected.map_or("-".to_string(), |e| e.to_string()),
                m,
                r.quartic.to_string(),
                format!("{:.1}", r.wall_ms),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(&format!("{cell:<w$}"));
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for row in &rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}
