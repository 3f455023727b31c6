//! Randomized identity testing for expressions.
//!
//! Polynomials with rational coefficients are evaluated exactly at random
//! rational points, so a `Zero` verdict can only be wrong if every sample hit
//! a root (Schwartz–Zippel). Everything else is evaluated in complex floating
//! point at points drawn from an annulus `r_min ≤ |z| ≤ r_max`, and a value is
//! called zero when it is small relative to the magnitudes that were combined
//! to produce it (the cancellation scale from [`EvalTelemetry`]).
//!
//! [`EvalTelemetry`]: crate::expr::EvalTelemetry

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;

use num::complex::Complex64;
use num::{BigInt, BigRational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{eval, eval_exact, EvalContext, EvalError, Expr, Number, VarRef};
use crate::parser::{ParamDecl, ParamPolicy};

/// Largest numerator and denominator of exact sample points.
const EXACT_RANGE: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub samples: usize,
    pub seed: u64,
    pub r_min: f64,
    pub r_max: f64,
    pub rel_tol: f64,
    pub noise_floor: f64,
    pub max_retries: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { samples: 32, seed: 0, r_min: 0.3, r_max: 2.0, rel_tol: 1e-9, noise_floor: 1e-13, max_retries: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid oracle configuration: {0}")]
pub struct ConfigError(String);

impl OracleConfig {
    pub fn with_seed(seed: u64) -> Self {
        OracleConfig { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.samples == 0 {
            return Err(ConfigError("samples must be positive".into()));
        }
        if !(0.0 < self.r_min && self.r_min < self.r_max && self.r_max.is_finite()) {
            return Err(ConfigError(format!("need 0 < r_min < r_max, got {} and {}", self.r_min, self.r_max)));
        }
        if !(0.0 < self.noise_floor && self.noise_floor < self.rel_tol && self.rel_tol < 1.0) {
            return Err(ConfigError(format!(
                "need 0 < noise_floor < rel_tol < 1, got {} and {}",
                self.noise_floor, self.rel_tol
            )));
        }
        Ok(())
    }
}

/// Which evaluation strategy produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OraclePath {
    /// Decided without sampling (the expression was a constant).
    Structural,
    Exact,
    Numeric,
}

/// A point where an expression was observed to be nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub point: BTreeMap<VarRef, Complex64>,
    /// The exact rational point, when found on the exact path.
    pub exact_point: Option<BTreeMap<VarRef, Number>>,
    pub value: Complex64,
    pub scale: f64,
    /// 1-based position of the offending entry in a matrix or list.
    pub entry: Option<Vec<usize>>,
}

impl Witness {
    /// Re-evaluates `e` at the witness point, independently of the run that
    /// produced it.
    pub fn verify(&self, e: &Expr, rel_tol: f64) -> bool {
        if let Some(exact) = &self.exact_point {
            let assignment: HashMap<VarRef, Number> = exact.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
            return eval_exact(e, &assignment).is_ok_and(|v| !v.is_zero());
        }
        let mut ctx: EvalContext = self.point.iter().map(|(k, v)| (k.clone(), *v)).collect();
        match eval(e, &mut ctx) {
            Ok(v) => v.norm() > rel_tol * ctx.telemetry.cancellation_scale,
            Err(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Zero { samples_passed: usize },
    NonZero { witness: Box<Witness> },
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub seed: u64,
    pub samples_requested: usize,
    pub samples_valid: usize,
    /// Samples that fell between the noise floor and the tolerance.
    pub gray_samples: usize,
    pub path: OraclePath,
    /// Set on `Zero` verdicts for expressions containing `sqrt` or `log`: the
    /// claim is only established on the principal branch.
    pub branch_limited: bool,
}

impl Verdict {
    pub fn is_zero(&self) -> bool {
        matches!(self.outcome, Outcome::Zero { .. })
    }

    pub fn is_nonzero(&self) -> bool {
        matches!(self.outcome, Outcome::NonZero { .. })
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self.outcome, Outcome::Inconclusive { .. })
    }

    pub fn witness(&self) -> Option<&Witness> {
        match &self.outcome {
            Outcome::NonZero { witness } => Some(witness),
            _ => None,
        }
    }

    fn new(outcome: Outcome, cfg: &OracleConfig, path: OraclePath) -> Self {
        Verdict {
            outcome,
            seed: cfg.seed,
            samples_requested: cfg.samples,
            samples_valid: 0,
            gray_samples: 0,
            path,
            branch_limited: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Source {
    Free,
    Fixed,
}

fn policy_of<'a>(v: &VarRef, params: &'a [ParamDecl]) -> Option<&'a ParamPolicy> {
    match v {
        VarRef::Param(name) => params.iter().find(|p| p.name == **name).map(|p| &p.policy),
        _ => None,
    }
}

pub(crate) fn sample_annulus(rng: &mut ChaCha8Rng, cfg: &OracleConfig) -> Complex64 {
    let (a, b) = (cfg.r_min * cfg.r_min, cfg.r_max * cfg.r_max);
    let r = (a + rng.random::<f64>() * (b - a)).sqrt();
    Complex64::from_polar(r, rng.random::<f64>() * TAU)
}

fn sample_rational(rng: &mut ChaCha8Rng) -> Number {
    let p = rng.random_range(1..=EXACT_RANGE);
    let q = rng.random_range(1..=EXACT_RANGE);
    Number::from_rational(BigRational::new(BigInt::from(p), BigInt::from(q)))
}

/// Decides whether `e` vanishes identically, treating parameters according
/// to their declared policies. Undeclared parameters are treated as generic.
pub fn is_zero(e: &Expr, params: &[ParamDecl], cfg: &OracleConfig) -> Verdict {
    if let Some(c) = e.as_const() {
        let outcome = if c.is_zero() {
            Outcome::Zero { samples_passed: 0 }
        } else {
            Outcome::NonZero {
                witness: Box::new(Witness {
                    point: BTreeMap::new(),
                    exact_point: Some(BTreeMap::new()),
                    value: c.to_complex64(),
                    scale: c.to_complex64().norm(),
                    entry: None,
                }),
            }
        };
        return Verdict::new(outcome, cfg, OraclePath::Structural);
    }
    let vars: Vec<(VarRef, Source)> = e
        .variables()
        .into_iter()
        .map(|v| {
            let src = match policy_of(&v, params) {
                Some(ParamPolicy::Fixed(_)) => Source::Fixed,
                _ => Source::Free,
            };
            (v, src)
        })
        .collect();
    let exact_ok = e.is_polynomial()
        && vars.iter().all(|(v, _)| match policy_of(v, params) {
            Some(ParamPolicy::Fixed(c)) => c.is_real(),
            _ => true,
        });
    if exact_ok {
        if let Some(v) = exact_path(e, &vars, params, cfg) {
            return v;
        }
    }
    let mut verdict = numeric_path(e, &vars, params, cfg);
    if verdict.is_zero() && e.contains_multivalued() {
        verdict.branch_limited = true;
    }
    verdict
}

fn fixed_value(v: &VarRef, params: &[ParamDecl]) -> Number {
    match policy_of(v, params) {
        Some(ParamPolicy::Fixed(c)) => c.clone(),
        _ => unreachable!("only called for fixed parameters"),
    }
}

/// `None` if the exact path hit a literal division by zero.
fn exact_path(e: &Expr, vars: &[(VarRef, Source)], params: &[ParamDecl], cfg: &OracleConfig) -> Option<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for s in 0..cfg.samples {
        let point: HashMap<VarRef, Number> = vars
            .iter()
            .map(|(v, src)| {
                let value = match src {
                    Source::Fixed => fixed_value(v, params),
                    Source::Free => sample_rational(&mut rng),
                };
                (v.clone(), value)
            })
            .collect();
        let value = eval_exact(e, &point).ok()?;
        if !value.is_zero() {
            let witness = Witness {
                point: point.iter().map(|(k, v)| (k.clone(), v.to_complex64())).collect(),
                exact_point: Some(point.into_iter().collect()),
                value: value.to_complex64(),
                scale: value.to_complex64().norm(),
                entry: None,
            };
            let mut v = Verdict::new(Outcome::NonZero { witness: Box::new(witness) }, cfg, OraclePath::Exact);
            v.samples_valid = s + 1;
            return Some(v);
        }
    }
    let mut v = Verdict::new(Outcome::Zero { samples_passed: cfg.samples }, cfg, OraclePath::Exact);
    v.samples_valid = cfg.samples;
    Some(v)
}

fn numeric_path(e: &Expr, vars: &[(VarRef, Source)], params: &[ParamDecl], cfg: &OracleConfig) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fixed: Vec<Option<Complex64>> = vars
        .iter()
        .map(|(v, src)| match src {
            Source::Fixed => Some(fixed_value(v, params).to_complex64()),
            Source::Free => None,
        })
        .collect();
    let (mut valid, mut clean, mut gray) = (0usize, 0usize, 0usize);
    let mut last_error: Option<EvalError> = None;
    for _ in 0..cfg.samples {
        for _attempt in 0..=cfg.max_retries {
            let mut ctx: EvalContext = vars
                .iter()
                .zip(&fixed)
                .map(|((v, _), f)| (v.clone(), f.unwrap_or_else(|| sample_annulus(&mut rng, cfg))))
                .collect();
            let value = match eval(e, &mut ctx) {
                Ok(v) => v,
                Err(err) => {
                    last_error = Some(err);
                    continue;
                }
            };
            valid += 1;
            let scale = ctx.telemetry.cancellation_scale;
            let mag = value.norm();
            if mag > cfg.rel_tol * scale {
                let witness = Witness {
                    point: ctx.assignment().clone(),
                    exact_point: None,
                    value,
                    scale,
                    entry: None,
                };
                let mut v = Verdict::new(Outcome::NonZero { witness: Box::new(witness) }, cfg, OraclePath::Numeric);
                v.samples_valid = valid;
                v.gray_samples = gray;
                return v;
            }
            if mag <= cfg.noise_floor * scale {
                clean += 1;
            } else {
                gray += 1;
            }
            break;
        }
    }
    let outcome = if valid * 2 < cfg.samples {
        let why = last_error.map(|e| e.to_string()).unwrap_or_default();
        Outcome::Inconclusive { reason: format!("only {valid} of {} samples were valid; last failure: {why}", cfg.samples) }
    } else if gray == 0 || clean > gray {
        Outcome::Zero { samples_passed: valid }
    } else {
        Outcome::Inconclusive {
            reason: format!("{gray} of {valid} samples fell between the noise floor and the tolerance"),
        }
    };
    let mut v = Verdict::new(outcome, cfg, OraclePath::Numeric);
    v.samples_valid = valid;
    v.gray_samples = gray;
    v
}

/// Combines per-entry verdicts: the first `NonZero` entry wins (and checking
/// stops there), otherwise any `Inconclusive` entry makes the whole result
/// inconclusive.
pub fn is_zero_indexed<'a>(
    entries: impl IntoIterator<Item = (Vec<usize>, &'a Expr)>,
    params: &[ParamDecl],
    cfg: &OracleConfig,
) -> Verdict {
    let mut inconclusive: Option<Verdict> = None;
    let mut passed = usize::MAX;
    let mut valid = usize::MAX;
    let mut gray = 0;
    let mut path = OraclePath::Structural;
    let mut branch_limited = false;
    for (index, e) in entries {
        let mut v = is_zero(e, params, cfg);
        match &mut v.outcome {
            Outcome::NonZero { witness } => {
                witness.entry = Some(index);
                return v;
            }
            Outcome::Inconclusive { reason } => {
                if inconclusive.is_none() {
                    *reason = format!("entry {index:?}: {reason}");
                    inconclusive = Some(v);
                }
            }
            Outcome::Zero { samples_passed } => {
                passed = passed.min(*samples_passed);
                valid = valid.min(v.samples_valid);
                gray += v.gray_samples;
                branch_limited |= v.branch_limited;
                path = match (path, v.path) {
                    (OraclePath::Numeric, _) | (_, OraclePath::Numeric) => OraclePath::Numeric,
                    (OraclePath::Exact, _) | (_, OraclePath::Exact) => OraclePath::Exact,
                    _ => OraclePath::Structural,
                };
            }
        }
    }
    if let Some(v) = inconclusive {
        return v;
    }
    let mut v = Verdict::new(Outcome::Zero { samples_passed: if passed == usize::MAX { 0 } else { passed } }, cfg, path);
    v.samples_valid = if valid == usize::MAX { 0 } else { valid };
    v.gray_samples = gray;
    v.branch_limited = branch_limited;
    v
}

/// [`is_zero_indexed`] over a square matrix, with `(row, column)` indices.
pub fn is_zero_matrix(entries: &[Vec<Expr>], params: &[ParamDecl], cfg: &OracleConfig) -> Verdict {
    let iter = entries
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, e)| (vec![i + 1, j + 1], e)));
    is_zero_indexed(iter, params, cfg)
}
