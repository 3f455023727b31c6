use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num::complex::Complex64;
use thiserror::Error;

use super::{Expr, Func, Node, Number, VarRef};

#[derive(Debug, Clone, Error)]
pub enum EvalError {
    #[error("singular evaluation ({kind}) at subexpression `{subexpr}`")]
    Singular { kind: SingularKind, subexpr: Expr },
    #[error("no value assigned to `{0}`")]
    Unassigned(VarRef),
    #[error("non-finite value at subexpression `{0}`")]
    NonFinite(Expr),
    #[error("`{0}` cannot be evaluated exactly")]
    NotExact(Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularKind {
    DivisionByZero,
    LogOfZero,
}

impl fmt::Display for SingularKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SingularKind::DivisionByZero => "division by zero",
            SingularKind::LogOfZero => "log(0)",
        })
    }
}

/// Conditioning information gathered during one [`eval`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalTelemetry {
    /// Largest `|v|` over every intermediate value.
    pub max_intermediate: f64,
    /// For a top-level sum, `Σ |termᵢ|`; otherwise `|value|`.
    pub term_scale: f64,
    /// First-order bound on the magnitudes that were combined to produce the
    /// value. Rounding error in the result is a small multiple of machine
    /// epsilon times this number. It is at least `term_scale`.
    pub cancellation_scale: f64,
}

/// Values for every variable of an expression, plus telemetry from the most
/// recent evaluation.
#[derive(Debug, Clone, Default)]
pub struct EvalContext {
    assignment: BTreeMap<VarRef, Complex64>,
    pub telemetry: EvalTelemetry,
}

impl EvalContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: VarRef, value: impl Into<Complex64>) -> Self {
        self.set(var, value);
        self
    }

    pub fn set(&mut self, var: VarRef, value: impl Into<Complex64>) {
        self.assignment.insert(var, value.into());
    }

    pub fn get(&self, var: &VarRef) -> Option<Complex64> {
        self.assignment.get(var).copied()
    }

    pub fn assignment(&self) -> &BTreeMap<VarRef, Complex64> {
        &self.assignment
    }
}

impl FromIterator<(VarRef, Complex64)> for EvalContext {
    fn from_iter<T: IntoIterator<Item = (VarRef, Complex64)>>(iter: T) -> Self {
        EvalContext { assignment: iter.into_iter().collect(), telemetry: EvalTelemetry::default() }
    }
}

/// Evaluates `e` in complex floating point. `sqrt` and `log` use the
/// principal branch.
pub fn eval(e: &Expr, ctx: &mut EvalContext) -> Result<Complex64, EvalError> {
    let mut ev = FloatEval { ctx, memo: HashMap::new(), max_intermediate: 0.0 };
    let (value, bound) = ev.run(e)?;
    let term_scale = match e.node() {
        Node::Sum(ts) => ts.iter().map(|t| ev.memo[&t.id()].0.norm()).sum(),
        _ => value.norm(),
    };
    let max_intermediate = ev.max_intermediate;
    ctx.telemetry = EvalTelemetry { max_intermediate, term_scale, cancellation_scale: bound.max(term_scale) };
    Ok(value)
}

struct FloatEval<'a> {
    ctx: &'a EvalContext,
    memo: HashMap<usize, (Complex64, f64)>,
    max_intermediate: f64,
}

impl FloatEval<'_> {
    /// Returns the value and a magnitude bound `M` such that the accumulated
    /// rounding error is `O(ε·M)`.
    fn run(&mut self, e: &Expr) -> Result<(Complex64, f64), EvalError> {
        if let Some(&hit) = self.memo.get(&e.id()) {
            return Ok(hit);
        }
        let (v, m) = match e.node() {
            Node::Const(c) => {
                let v = c.to_complex64();
                (v, v.norm())
            }
            Node::Var(var) => {
                let v = self.ctx.get(var).ok_or_else(|| EvalError::Unassigned(var.clone()))?;
                (v, v.norm())
            }
            Node::Sum(ts) => {
                let mut v = Complex64::new(0.0, 0.0);
                let mut m = 0.0;
                for t in ts {
                    let (tv, tm) = self.run(t)?;
                    v += tv;
                    m += tm;
                }
                (v, m)
            }
            Node::Product(ts) => {
                let mut v = Complex64::new(1.0, 0.0);
                let mut m = 1.0;
                for t in ts {
                    let (tv, tm) = self.run(t)?;
                    v *= tv;
                    m *= tm;
                }
                (v, m)
            }
            Node::Negate(a) => {
                let (av, am) = self.run(a)?;
                (-av, am)
            }
            Node::Power(b, k) => {
                let (bv, bm) = self.run(b)?;
                if *k < 0 && bv == Complex64::new(0.0, 0.0) {
                    return Err(EvalError::Singular { kind: SingularKind::DivisionByZero, subexpr: e.clone() });
                }
                let k = *k;
                let v = bv.powi(k as i32);
                let m = if k > 0 {
                    bm.powi(k as i32)
                } else {
                    v.norm() * (1.0 + (k.unsigned_abs() as f64) * bm / bv.norm())
                };
                (v, m)
            }
            Node::Quotient(n, d) => {
                let (nv, nm) = self.run(n)?;
                let (dv, dm) = self.run(d)?;
                if dv == Complex64::new(0.0, 0.0) {
                    return Err(EvalError::Singular { kind: SingularKind::DivisionByZero, subexpr: e.clone() });
                }
                let v = nv / dv;
                let dn = dv.norm();
                (v, nm / dn + v.norm() * dm / dn)
            }
            Node::Apply(f, a) => {
                let (av, am) = self.run(a)?;
                match f {
                    Func::Exp => {
                        let v = av.exp();
                        (v, v.norm() * (1.0 + am))
                    }
                    Func::Log => {
                        if av == Complex64::new(0.0, 0.0) {
                            return Err(EvalError::Singular { kind: SingularKind::LogOfZero, subexpr: e.clone() });
                        }
                        let v = av.ln();
                        (v, v.norm() + am / av.norm())
                    }
                    Func::Sin => {
                        let v = av.sin();
                        (v, v.norm() + av.cos().norm() * am)
                    }
                    Func::Cos => {
                        let v = av.cos();
                        (v, v.norm() + av.sin().norm() * am)
                    }
                    Func::Sqrt => {
                        let v = av.sqrt();
                        let extra = if v.norm() > 0.0 { am / (2.0 * v.norm()) } else { am };
                        (v, v.norm() + extra)
                    }
                }
            }
        };
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(EvalError::NonFinite(e.clone()));
        }
        self.max_intermediate = self.max_intermediate.max(v.norm());
        self.memo.insert(e.id(), (v, m));
        Ok((v, m))
    }
}

/// Evaluates `e` exactly over the Gaussian rationals. Function applications
/// are rejected with [`EvalError::NotExact`].
pub fn eval_exact(e: &Expr, assignment: &HashMap<VarRef, Number>) -> Result<Number, EvalError> {
    let mut memo = HashMap::new();
    exact_rec(e, assignment, &mut memo)
}

fn exact_rec(
    e: &Expr,
    assignment: &HashMap<VarRef, Number>,
    memo: &mut HashMap<usize, Number>,
) -> Result<Number, EvalError> {
    if let Some(hit) = memo.get(&e.id()) {
        return Ok(hit.clone());
    }
    let singular = || EvalError::Singular { kind: SingularKind::DivisionByZero, subexpr: e.clone() };
    let v = match e.node() {
        Node::Const(c) => c.clone(),
        Node::Var(var) => assignment.get(var).cloned().ok_or_else(|| EvalError::Unassigned(var.clone()))?,
        Node::Sum(ts) => {
            let mut acc = Number::zero();
            for t in ts {
                acc = acc.add(&exact_rec(t, assignment, memo)?);
            }
            acc
        }
        Node::Product(ts) => {
            let mut acc = Number::one();
            for t in ts {
                acc = acc.mul(&exact_rec(t, assignment, memo)?);
            }
            acc
        }
        Node::Negate(a) => exact_rec(a, assignment, memo)?.neg(),
        Node::Power(b, k) => exact_rec(b, assignment, memo)?.powi(*k).ok_or_else(singular)?,
        Node::Quotient(n, d) => {
            let nv = exact_rec(n, assignment, memo)?;
            let dv = exact_rec(d, assignment, memo)?;
            nv.div(&dv).ok_or_else(singular)?
        }
        Node::Apply(..) => return Err(EvalError::NotExact(e.clone())),
    };
    memo.insert(e.id(), v.clone());
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_examples() {
        let x = Expr::x();
        let mut ctx = EvalContext::new().with(VarRef::X, Complex64::new(3.0, 0.0));
        assert_eq!(eval(&x.powi(2), &mut ctx).unwrap(), Complex64::new(9.0, 0.0));

        let mut ctx = EvalContext::new().with(VarRef::X, Complex64::new(0.0, 0.0));
        let err = eval(&(Expr::one() / &x), &mut ctx).unwrap_err();
        assert!(matches!(err, EvalError::Singular { kind: SingularKind::DivisionByZero, .. }));
        assert!(err.to_string().contains("1/x"));

        let mut ctx = EvalContext::new().with(VarRef::X, Complex64::new(-1.0, 0.0));
        let v = eval(&Expr::apply(Func::Sqrt, &x), &mut ctx).unwrap();
        assert!((v - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn log_of_zero_is_singular() {
        let mut ctx = EvalContext::new().with(VarRef::X, Complex64::new(0.0, 0.0));
        let err = eval(&Expr::apply(Func::Log, &Expr::x()), &mut ctx).unwrap_err();
        assert!(matches!(err, EvalError::Singular { kind: SingularKind::LogOfZero, .. }));
    }

    #[test]
    fn missing_variable_is_reported() {
        let mut ctx = EvalContext::new();
        assert!(matches!(eval(&Expr::y(2), &mut ctx), Err(EvalError::Unassigned(VarRef::Y(2)))));
    }

    #[test]
    fn telemetry_tracks_cancellation() {
        // 1e8·x − 1e8·x + y evaluates to y but subtracted 2e8 worth of terms.
        let x = Expr::x();
        let y = Expr::y(1);
        let big = Expr::int(100_000_000) * &x;
        let e = Expr::from_node(Node::Sum(vec![y.clone(), big.clone(), Expr::neg(&big)]));
        let mut ctx = EvalContext::new().with(VarRef::X, Complex64::new(1.0, 0.0)).with(VarRef::Y(1), Complex64::new(0.5, 0.0));
        let v = eval(&e, &mut ctx).unwrap();
        assert!((v.re - 0.5).abs() < 1e-6);
        assert!((ctx.telemetry.term_scale - 200_000_000.5).abs() < 1e-3);
        assert!(ctx.telemetry.cancellation_scale >= ctx.telemetry.term_scale);
        assert!(ctx.telemetry.max_intermediate >= 1e8);
    }

    #[test]
    fn exact_evaluation() {
        let x = Expr::x();
        let e = (&x + Expr::one()).powi(2) - x.powi(2);
        let a = HashMap::from([(VarRef::X, Number::from_ratio(1, 3))]);
        assert_eq!(eval_exact(&e, &a).unwrap(), Number::from_ratio(5, 3));
        let s = Expr::apply(Func::Sin, &x);
        assert!(matches!(eval_exact(&s, &a), Err(EvalError::NotExact(_))));
    }
}
