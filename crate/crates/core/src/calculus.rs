//! Symbolic partial derivatives and the total derivative along a system.

use std::collections::HashMap;

use crate::expr::{Expr, Func, Node, VarRef};
use crate::parser::OdeSystem;

/// `∂e/∂v`. Parameters are constants, so differentiating with respect to
/// one only sees its explicit occurrences.
pub fn partial(e: &Expr, v: &VarRef) -> Expr {
    let mut memo = HashMap::new();
    diff(e, v, &mut memo)
}

fn diff(e: &Expr, v: &VarRef, memo: &mut HashMap<usize, Expr>) -> Expr {
    if let Some(d) = memo.get(&e.id()) {
        return d.clone();
    }
    let d = match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Var(w) => {
            if w == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Sum(ts) => Expr::sum(ts.iter().map(|t| diff(t, v, memo)).collect()),
        Node::Negate(a) => Expr::neg(&diff(a, v, memo)),
        Node::Product(fs) => {
            let mut terms = Vec::with_capacity(fs.len());
            for (i, f) in fs.iter().enumerate() {
                let df = diff(f, v, memo);
                if df.is_zero() {
                    continue;
                }
                let mut factors: Vec<Expr> = fs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, g)| g.clone()).collect();
                factors.push(df);
                terms.push(Expr::product(factors));
            }
            Expr::sum(terms)
        }
        Node::Power(b, k) => {
            let db = diff(b, v, memo);
            if db.is_zero() {
                Expr::zero()
            } else {
                Expr::product(vec![Expr::int(*k), b.powi(k - 1), db])
            }
        }
        Node::Quotient(n, d) => {
            let dn = diff(n, v, memo);
            let dd = diff(d, v, memo);
            match (dn.is_zero(), dd.is_zero()) {
                (true, true) => Expr::zero(),
                (false, true) => Expr::quotient(&dn, d),
                _ => {
                    let num = &dn * d - n * &dd;
                    Expr::quotient(&num, &d.powi(2))
                }
            }
        }
        Node::Apply(f, a) => {
            let da = diff(a, v, memo);
            if da.is_zero() {
                Expr::zero()
            } else {
                let outer = match f {
                    Func::Exp => e.clone(),
                    Func::Log => Expr::one() / a,
                    Func::Sin => Expr::apply(Func::Cos, a),
                    Func::Cos => -Expr::apply(Func::Sin, a),
                    Func::Sqrt => Expr::one() / (Expr::int(2) * e),
                };
                outer * da
            }
        }
    };
    memo.insert(e.id(), d.clone());
    d
}

/// Left fold of [`partial`] over `vars`.
pub fn nth_partial(e: &Expr, vars: &[VarRef]) -> Expr {
    vars.iter().fold(e.clone(), |acc, v| partial(&acc, v))
}

/// `dg/dx = ∂g/∂x + ẏᴵ ∂g/∂yᴵ + fᴵ ∂g/∂ẏᴵ`, summed over `I = 1..n`.
pub fn total_derivative(g: &Expr, sys: &OdeSystem) -> Expr {
    let mut terms = vec![partial(g, &VarRef::X)];
    for i in 1..=sys.dim() {
        let gy = partial(g, &VarRef::Y(i));
        if !gy.is_zero() {
            terms.push(gy * Expr::ydot(i));
        }
        let gv = partial(g, &VarRef::YDot(i));
        if !gv.is_zero() {
            terms.push(gv * sys.rhs(i));
        }
    }
    Expr::sum(terms)
}
