//! Torsion invariants of second-order systems and the classifiers built on
//! them.
//!
//! For `n ≥ 2` equations the relevant invariant is the trace-free matrix
//!
//! ```text
//! φᴵⱼ = ½ d/dx(∂fᴵ/∂ẏʲ) − ∂fᴵ/∂yʲ − ¼ (∂fᴵ/∂ẏᴷ)(∂fᴷ/∂ẏʲ)
//! Φᴵⱼ = φᴵⱼ − (1/n) φᴷₖ δᴵⱼ
//! ```
//!
//! which vanishes identically for a single equation. For `n = 1` the scalar
//!
//! ```text
//! d²/dx² f_ẏẏ − 4 d/dx f_yẏ + f_ẏ (4 f_yẏ − d/dx f_ẏẏ) − 3 f_y f_ẏẏ + 6 f_yy
//! ```
//!
//! takes its place. A system is straight exactly when the applicable
//! invariant vanishes.

use std::fmt;
use std::time::{Duration, Instant};

use num::complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::calculus::{nth_partial, partial, total_derivative};
use crate::expr::{eval, EvalContext, Expr, Number, VarRef};
use crate::oracle::{is_zero, sample_annulus, is_zero_indexed, is_zero_matrix, ConfigError, OracleConfig, Verdict};
use crate::parser::{OdeSystem, ParamDecl, ParamPolicy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TorsionError {
    #[error("the scalar invariant needs a single equation, got n = {0}")]
    Dimension(usize),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Tresse,
    Fels,
    Quartic,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Tresse => "tresse",
            Method::Fels => "fels",
            Method::Quartic => "quartic",
        })
    }
}

/// One fourth `ẏ`-derivative `∂⁴fᴵ/∂ẏʲ∂ẏᴷ∂ẏᴸ∂ẏᴹ` (indices sorted).
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticEntry {
    pub equation: usize,
    pub indices: [usize; 4],
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Invariant {
    Scalar(Expr),
    Matrix(Vec<Vec<Expr>>),
    List(Vec<QuarticEntry>),
}

impl Invariant {
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            Invariant::Scalar(e) => vec![e],
            Invariant::Matrix(m) => m.iter().flatten().collect(),
            Invariant::List(l) => l.iter().map(|q| &q.expr).collect(),
        }
    }
}

/// How the printed autonomous condition compared against the general
/// invariant at sample points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DisplayedCheck {
    pub agree: usize,
    pub disagree: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportTelemetry {
    /// Sum over entries of the expression DAG size.
    pub expr_size: usize,
    pub build_time: Duration,
    pub oracle_time: Duration,
    pub displayed_condition: Option<DisplayedCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorsionReport {
    pub method: Method,
    pub invariant: Invariant,
    pub verdict: Verdict,
    pub telemetry: ReportTelemetry,
}

impl TorsionReport {
    fn assemble(method: Method, invariant: Invariant, build_time: Duration, params: &[ParamDecl], cfg: &OracleConfig) -> Self {
        let start = Instant::now();
        let verdict = match &invariant {
            Invariant::Scalar(e) => is_zero(e, params, cfg),
            Invariant::Matrix(m) => is_zero_matrix(m, params, cfg),
            Invariant::List(l) => is_zero_indexed(
                l.iter().map(|q| {
                    let mut idx = vec![q.equation];
                    idx.extend(q.indices);
                    (idx, &q.expr)
                }),
                params,
                cfg,
            ),
        };
        let telemetry = ReportTelemetry {
            expr_size: invariant.exprs().iter().map(|e| e.dag_size()).sum(),
            build_time,
            oracle_time: start.elapsed(),
            displayed_condition: None,
        };
        TorsionReport { method, invariant, verdict, telemetry }
    }

    /// Straight iff the invariant was found to vanish.
    pub fn is_straight(&self) -> bool {
        self.verdict.is_zero()
    }
}

/// The matrix `φᴵⱼ` with the `K`-sum expanded.
pub fn phi_matrix(sys: &OdeSystem) -> Vec<Vec<Expr>> {
    let n = sys.dim();
    let fv: Vec<Vec<Expr>> =
        (1..=n).map(|i| (1..=n).map(|k| partial(sys.rhs(i), &VarRef::YDot(k))).collect()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut terms = vec![
                        Expr::ratio(1, 2) * total_derivative(&fv[i][j], sys),
                        -partial(sys.rhs(i + 1), &VarRef::Y(j + 1)),
                    ];
                    for k in 0..n {
                        terms.push(Expr::ratio(-1, 4) * &fv[i][k] * &fv[k][j]);
                    }
                    Expr::sum(terms)
                })
                .collect()
        })
        .collect()
}

/// Trace-free part `Φ` of [`phi_matrix`].
pub fn fels_matrix(sys: &OdeSystem) -> Vec<Vec<Expr>> {
    let phi = phi_matrix(sys);
    let n = phi.len();
    let trace = Expr::sum((0..n).map(|k| phi[k][k].clone()).collect());
    let shift = trace.scaled(&Number::from_ratio(1, n as i64));
    phi.into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter().enumerate().map(|(j, e)| if i == j { &e - &shift } else { e }).collect()
        })
        .collect()
}

pub fn fels_torsion(sys: &OdeSystem, cfg: &OracleConfig) -> Result<TorsionReport, TorsionError> {
    cfg.validate()?;
    let sys = sys.specialize_fixed();
    let start = Instant::now();
    let m = fels_matrix(&sys);
    Ok(TorsionReport::assemble(Method::Fels, Invariant::Matrix(m), start.elapsed(), &sys.params, cfg))
}

/// The scalar invariant of a single equation, built term by term with the
/// second total derivative taken as two applications of `d/dx`.
pub fn tresse_invariant(sys: &OdeSystem) -> Result<Expr, TorsionError> {
    if sys.dim() != 1 {
        return Err(TorsionError::Dimension(sys.dim()));
    }
    let f = sys.rhs(1);
    let (y, v) = (VarRef::Y(1), VarRef::YDot(1));
    let fy = partial(f, &y);
    let fv = partial(f, &v);
    let fyy = partial(&fy, &y);
    let fyv = partial(&fy, &v);
    let fvv = partial(&fv, &v);
    let d_fvv = total_derivative(&fvv, sys);
    let dd_fvv = total_derivative(&d_fvv, sys);
    let d_fyv = total_derivative(&fyv, sys);
    Ok(Expr::sum(vec![
        dd_fvv,
        Expr::int(-4) * d_fyv,
        &fv * (Expr::int(4) * &fyv - &d_fvv),
        Expr::int(-3) * &fy * &fvv,
        Expr::int(6) * fyy,
    ]))
}

pub fn tresse_torsion(sys: &OdeSystem, cfg: &OracleConfig) -> Result<TorsionReport, TorsionError> {
    cfg.validate()?;
    let sys = sys.specialize_fixed();
    let start = Instant::now();
    let t = tresse_invariant(&sys)?;
    Ok(TorsionReport::assemble(Method::Tresse, Invariant::Scalar(t), start.elapsed(), &sys.params, cfg))
}

/// All distinct fourth `ẏ`-partials of every right-hand side.
pub fn quartic_entries(sys: &OdeSystem) -> Vec<QuarticEntry> {
    let n = sys.dim();
    let mut out = Vec::new();
    for i in 1..=n {
        let f = sys.rhs(i);
        for j in 1..=n {
            let dj = partial(f, &VarRef::YDot(j));
            for k in j..=n {
                let dk = partial(&dj, &VarRef::YDot(k));
                for l in k..=n {
                    let dl = partial(&dk, &VarRef::YDot(l));
                    for m in l..=n {
                        out.push(QuarticEntry {
                            equation: i,
                            indices: [j, k, l, m],
                            expr: partial(&dl, &VarRef::YDot(m)),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Whether every right-hand side is at most cubic in `ẏ`.
pub fn quartic_test(sys: &OdeSystem, cfg: &OracleConfig) -> Result<TorsionReport, TorsionError> {
    cfg.validate()?;
    let sys = sys.specialize_fixed();
    let start = Instant::now();
    let list = quartic_entries(&sys);
    Ok(TorsionReport::assemble(Method::Quartic, Invariant::List(list), start.elapsed(), &sys.params, cfg))
}

/// Scalar invariant for one equation, trace-free matrix otherwise.
pub fn is_straight(sys: &OdeSystem, cfg: &OracleConfig) -> Result<TorsionReport, TorsionError> {
    if sys.dim() == 1 {
        tresse_torsion(sys, cfg)
    } else {
        fels_torsion(sys, cfg)
    }
}

/// `y'' = A ẏ + B y` with constant matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstSystem {
    a: Vec<Vec<Number>>,
    b: Vec<Vec<Number>>,
}

impl LinearConstSystem {
    pub fn new(a: Vec<Vec<Number>>, b: Vec<Vec<Number>>) -> Result<Self, TorsionError> {
        let n = a.len();
        let square = |m: &Vec<Vec<Number>>| m.len() == n && m.iter().all(|r| r.len() == n);
        if n == 0 || !square(&a) || !square(&b) {
            return Err(TorsionError::Input("A and B must be square matrices of the same size".into()));
        }
        Ok(LinearConstSystem { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[Vec<Number>] {
        &self.a
    }

    pub fn b(&self) -> &[Vec<Number>] {
        &self.b
    }

    pub fn to_system(&self, name: &str) -> OdeSystem {
        let n = self.dim();
        let rhs = (0..n)
            .map(|i| {
                let mut terms = Vec::with_capacity(2 * n);
                for j in 0..n {
                    terms.push(Expr::ydot(j + 1).scaled(&self.a[i][j]));
                    terms.push(Expr::y(j + 1).scaled(&self.b[i][j]));
                }
                Expr::sum(terms)
            })
            .collect();
        OdeSystem::new(name, rhs, Vec::new()).expect("linear system only uses its own variables")
    }
}

/// Straight iff `B + A²/4` is a scalar multiple of the identity. Exact.
pub fn classify_linear_const(ls: &LinearConstSystem) -> bool {
    let n = ls.dim();
    let quarter = Number::from_ratio(1, 4);
    let m = |i: usize, j: usize| {
        let mut a2 = Number::zero();
        for k in 0..n {
            a2 = a2.add(&ls.a[i][k].mul(&ls.a[k][j]));
        }
        ls.b[i][j].add(&a2.mul(&quarter))
    };
    let diag = m(0, 0);
    (0..n).all(|i| (0..n).all(|j| if i == j { m(i, j) == diag } else { m(i, j).is_zero() }))
}

/// Floating-point version of [`classify_linear_const`], comparing entries to
/// within `1e-10` relative to the largest magnitude involved.
pub fn classify_linear_const_approx(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> bool {
    let n = a.len();
    let mut m = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    let mut scale: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut a2 = Complex64::new(0.0, 0.0);
            for k in 0..n {
                a2 += a[i][k] * a[k][j];
                scale = scale.max((a[i][k] * a[k][j]).norm() / 4.0);
            }
            m[i][j] = b[i][j] + a2 / 4.0;
            scale = scale.max(b[i][j].norm());
        }
    }
    let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
    (0..n).all(|i| (0..n).all(|j| if i == j { (m[i][j] - m[0][0]).norm() <= tol } else { m[i][j].norm() <= tol }))
}

/// `Zero` iff `g` is constant along every solution of `sys`.
pub fn check_conserved(sys: &OdeSystem, g: &Expr, cfg: &OracleConfig) -> Result<Verdict, TorsionError> {
    cfg.validate()?;
    let fixed: std::collections::HashMap<VarRef, Expr> = sys
        .params
        .iter()
        .filter_map(|p| match &p.policy {
            ParamPolicy::Fixed(v) => Some((p.var(), Expr::constant(v.clone()))),
            _ => None,
        })
        .collect();
    let sys = sys.specialize_fixed();
    let dg = total_derivative(&g.substitute(&fixed), &sys);
    Ok(is_zero(&dg, &sys.params, cfg))
}

/// The printed fourth-order condition for `y'' = f(y, ẏ)`, transcribed term
/// for term. It does not match the general invariant; see
/// [`tresse_autonomous`].
pub fn displayed_autonomous_condition(f: &Expr) -> Expr {
    let (y, v) = (VarRef::Y(1), VarRef::YDot(1));
    let d = |vars: &[&VarRef]| nth_partial(f, &vars.iter().map(|v| (*v).clone()).collect::<Vec<_>>());
    let dot = Expr::ydot(1);
    Expr::sum(vec![
        dot.powi(2) * d(&[&y, &y, &v, &v]),
        Expr::int(2) * &dot * f * d(&[&y, &v, &v, &v]),
        f.powi(2) * d(&[&v, &v, &v, &v]),
        &dot * d(&[&v, &v, &v]) * d(&[&y]),
        Expr::int(-3) * d(&[&y, &v, &v]),
        Expr::int(-4) * &dot * d(&[&y, &y, &v]),
        Expr::int(4) * d(&[&v]) * d(&[&y, &v]),
        -(&dot * d(&[&v]) * d(&[&y, &v, &v])),
        Expr::int(-3) * d(&[&y]) * d(&[&y, &v]),
        Expr::int(6) * d(&[&y, &y]),
    ])
}

/// The scalar invariant of `y'' = f(y, ẏ)`.
///
/// The verdict comes from the general construction. The printed autonomous
/// condition is evaluated alongside at `cfg.samples` random points and the
/// number of agreeing and disagreeing points is recorded in
/// `telemetry.displayed_condition`; it never affects the verdict.
pub fn tresse_autonomous(f: &Expr, params: &[ParamDecl], cfg: &OracleConfig) -> Result<TorsionReport, TorsionError> {
    if f.contains_var(&VarRef::X) {
        return Err(TorsionError::Input(format!("`{f}` depends on x")));
    }
    let sys = OdeSystem::new("autonomous", vec![f.clone()], params.to_vec())
        .map_err(|e| TorsionError::Input(e.message))?;
    let mut report = tresse_torsion(&sys, cfg)?;
    let specialized = sys.specialize_fixed();
    let shown = displayed_autonomous_condition(specialized.rhs(1));
    let Invariant::Scalar(general) = &report.invariant else { unreachable!() };
    report.telemetry.displayed_condition = Some(compare_at_samples(general, &shown, &specialized.params, cfg));
    Ok(report)
}

fn compare_at_samples(a: &Expr, b: &Expr, params: &[ParamDecl], cfg: &OracleConfig) -> DisplayedCheck {
    let mut vars = a.variables();
    vars.extend(b.variables());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_d15c_1a7e_u64);
    let mut check = DisplayedCheck::default();
    for _ in 0..cfg.samples {
        let mut ctx: EvalContext = vars
            .iter()
            .map(|v| {
                let fixed = match v {
                    VarRef::Param(name) => params.iter().find(|p| p.name == **name).and_then(|p| match &p.policy {
                        ParamPolicy::Fixed(c) => Some(c.to_complex64()),
                        _ => None,
                    }),
                    _ => None,
                };
                let z = sample_annulus(&mut rng, cfg);
                (v.clone(), fixed.unwrap_or(z))
            })
            .collect();
        let Ok(va) = eval(a, &mut ctx) else {
            check.skipped += 1;
            continue;
        };
        let sa = ctx.telemetry.cancellation_scale;
        let Ok(vb) = eval(b, &mut ctx) else {
            check.skipped += 1;
            continue;
        };
        let sb = ctx.telemetry.cancellation_scale;
        if (va - vb).norm() <= cfg.rel_tol * (sa + sb) {
            check.agree += 1;
        } else {
            check.disagree += 1;
        }
    }
    check
}
