#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use num::complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use straightness::expr::{build, Expr, Func, Number, RawExpr, VarRef};
use straightness::parser::{parse_corpus, CorpusEntry};

pub fn corpus(name: &str) -> Vec<CorpusEntry> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_corpus(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn entry(file: &str, name: &str) -> CorpusEntry {
    corpus(file).into_iter().find(|e| e.system.name == name).unwrap_or_else(|| panic!("no entry {name} in {file}"))
}

pub fn vars(n: usize) -> Vec<VarRef> {
    let mut v = vec![VarRef::X];
    for k in 1..=n {
        v.push(VarRef::Y(k));
        v.push(VarRef::YDot(k));
    }
    v
}

/// `p/q` with `|p| ≤ 9`, `1 ≤ q ≤ 5`.
pub fn small_rational(rng: &mut ChaCha8Rng) -> Number {
    Number::from_ratio(rng.random_range(-9..=9), rng.random_range(1..=5))
}

pub fn nonzero_rational(rng: &mut ChaCha8Rng) -> Number {
    loop {
        let r = small_rational(rng);
        if !r.is_zero() {
            return r;
        }
    }
}

/// A random polynomial: `terms` monomials of total degree at most `max_deg`.
pub fn random_poly(rng: &mut ChaCha8Rng, vars: &[VarRef], max_deg: u32, terms: usize) -> Expr {
    let mut out = Vec::with_capacity(terms);
    for _ in 0..terms {
        let deg = rng.random_range(0..=max_deg);
        let mut factors = vec![Expr::constant(nonzero_rational(rng))];
        for _ in 0..deg {
            factors.push(Expr::var(vars[rng.random_range(0..vars.len())].clone()));
        }
        out.push(Expr::product(factors));
    }
    Expr::sum(out)
}

/// A random analytic expression of bounded depth, possibly with quotients and
/// entire functions but no branch cuts.
pub fn random_expr(rng: &mut ChaCha8Rng, vars: &[VarRef], depth: u32) -> Expr {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.7) {
            Expr::var(vars[rng.random_range(0..vars.len())].clone())
        } else {
            Expr::constant(nonzero_rational(rng))
        };
    }
    let d = depth - 1;
    match rng.random_range(0..7) {
        0 | 1 => Expr::sum(vec![random_expr(rng, vars, d), random_expr(rng, vars, d)]),
        2 | 3 => Expr::product(vec![random_expr(rng, vars, d), random_expr(rng, vars, d)]),
        4 => {
            let k = rng.random_range(2..=3);
            random_expr(rng, vars, d).powi(k)
        }
        5 => {
            let num = random_expr(rng, vars, d);
            let den = Expr::sum(vec![Expr::int(3), random_expr(rng, vars, d).powi(2)]);
            Expr::quotient(&num, &den)
        }
        _ => {
            let f = [Func::Exp, Func::Sin, Func::Cos][rng.random_range(0..3)];
            Expr::apply(f, &random_expr(rng, vars, d))
        }
    }
}

pub fn random_point(rng: &mut ChaCha8Rng, vars: impl IntoIterator<Item = VarRef>) -> BTreeMap<VarRef, Complex64> {
    vars.into_iter()
        .map(|v| {
            let re = rng.random_range(-1.5..1.5);
            let im = rng.random_range(-1.5..1.5);
            (v, Complex64::new(re, im))
        })
        .collect()
}

/// Direct evaluation of an uncanonicalized tree. Independent of `build` and
/// of the library's evaluator.
pub fn eval_raw(t: &RawExpr, at: &BTreeMap<VarRef, Complex64>) -> Option<Complex64> {
    let v = match t {
        RawExpr::Const(c) => c.to_complex64(),
        RawExpr::Var(v) => *at.get(v)?,
        RawExpr::Sum(ts) => ts.iter().map(|t| eval_raw(t, at)).sum::<Option<Complex64>>()?,
        RawExpr::Product(ts) => ts.iter().map(|t| eval_raw(t, at)).product::<Option<Complex64>>()?,
        RawExpr::Power(b, k) => {
            let b = eval_raw(b, at)?;
            if *k < 0 && b.norm() == 0.0 {
                return None;
            }
            b.powi(*k as i32)
        }
        RawExpr::Quotient(n, d) => {
            let d = eval_raw(d, at)?;
            if d.norm() == 0.0 {
                return None;
            }
            eval_raw(n, at)? / d
        }
        RawExpr::Negate(a) => -eval_raw(a, at)?,
        RawExpr::Apply(f, a) => {
            let a = eval_raw(a, at)?;
            match f {
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Sqrt => a.sqrt(),
            }
        }
    };
    v.is_finite().then_some(v)
}

/// Largest magnitude of any subterm, used to scale tolerances.
pub fn raw_magnitude(t: &RawExpr, at: &BTreeMap<VarRef, Complex64>) -> f64 {
    let own = eval_raw(t, at).map_or(0.0, |v| v.norm());
    let kids: f64 = match t {
        RawExpr::Sum(ts) | RawExpr::Product(ts) => ts.iter().map(|t| raw_magnitude(t, at)).fold(0.0, f64::max),
        RawExpr::Power(b, _) | RawExpr::Apply(_, b) | RawExpr::Negate(b) => raw_magnitude(b, at),
        RawExpr::Quotient(n, d) => raw_magnitude(n, at).max(raw_magnitude(d, at)),
        _ => 0.0,
    };
    own.max(kids)
}

pub fn arb_var(n: usize) -> impl Strategy<Value = VarRef> {
    proptest::sample::select(vars(n))
}

pub fn arb_const() -> impl Strategy<Value = Number> {
    prop_oneof![
        (-6i64..=6).prop_map(Number::from_integer),
        (-9i64..=9, 1i64..=6).prop_map(|(p, q)| Number::from_ratio(p, q)),
        (-3i64..=3, -3i64..=3).prop_map(|(a, b)| Number::from_integer(a).add(&Number::from_integer(b).mul(&Number::i()))),
    ]
}

/// Raw trees over `x, y1, dy1` without branch cuts.
pub fn arb_raw() -> impl Strategy<Value = RawExpr> {
    let leaf = prop_oneof![arb_const().prop_map(RawExpr::Const), arb_var(1).prop_map(RawExpr::Var)];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 2..4).prop_map(RawExpr::Sum),
            proptest::collection::vec(inner.clone(), 2..4).prop_map(RawExpr::Product),
            (inner.clone(), -2i64..=3).prop_map(|(b, k)| RawExpr::Power(Box::new(b), k)),
            (inner.clone(), inner.clone()).prop_map(|(n, d)| RawExpr::Quotient(Box::new(n), Box::new(d))),
            inner.clone().prop_map(|a| RawExpr::Negate(Box::new(a))),
            (proptest::sample::select(vec![Func::Exp, Func::Sin, Func::Cos]), inner)
                .prop_map(|(f, a)| RawExpr::Apply(f, Box::new(a))),
        ]
    })
}

pub fn arb_expr() -> impl Strategy<Value = Expr> {
    arb_raw().prop_map(|t| build(&t))
}

pub fn arb_point() -> impl Strategy<Value = BTreeMap<VarRef, Complex64>> {
    proptest::collection::vec((-1.5f64..1.5, -1.5f64..1.5), 3).prop_map(|cs| {
        vars(1).into_iter().zip(cs).map(|(v, (re, im))| (v, Complex64::new(re, im))).collect()
    })
}
