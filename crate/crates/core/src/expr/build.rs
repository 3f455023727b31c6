//! Smart constructors. Each returns a canonical [`Expr`] given canonical
//! children.

use std::collections::HashMap;

use super::{Expr, Func, Node, Number, RawExpr};

/// Canonicalizes a raw tree. Constant subexpressions over the rationals are
/// folded exactly.
pub fn build(raw: &RawExpr) -> Expr {
    match raw {
        RawExpr::Const(c) => Expr::constant(c.clone()),
        RawExpr::Var(v) => Expr::var(v.clone()),
        RawExpr::Sum(ts) => Expr::sum(ts.iter().map(build).collect()),
        RawExpr::Product(ts) => Expr::product(ts.iter().map(build).collect()),
        RawExpr::Power(b, k) => Expr::pow(&build(b), *k),
        RawExpr::Quotient(n, d) => Expr::quotient(&build(n), &build(d)),
        RawExpr::Apply(f, a) => Expr::apply(*f, &build(a)),
        RawExpr::Negate(a) => Expr::neg(&build(a)),
    }
}

/// Splits `e` into `coefficient · rest` where `rest` carries no rational
/// coefficient. `scale` is the inverse.
///
/// A sum is normalized so that its leading non-constant term has coefficient
/// one, which lets `A/B` and `-A/B` collect as like terms.
pub(crate) fn split_coeff(e: &Expr) -> (Number, Expr) {
    match e.node() {
        Node::Const(c) => (c.clone(), Expr::one()),
        Node::Negate(t) => {
            let (c, r) = split_coeff(t);
            (c.neg(), r)
        }
        Node::Product(fs) => match fs[0].as_const() {
            Some(c) => {
                let rest = if fs.len() == 2 {
                    fs[1].clone()
                } else {
                    Expr::from_node(Node::Product(fs[1..].to_vec()))
                };
                (c.clone(), rest)
            }
            None => (Number::one(), e.clone()),
        },
        Node::Quotient(n, d) => {
            let (c, r) = split_coeff(n);
            if c.is_one() {
                (c, e.clone())
            } else {
                (c, Expr::from_node(Node::Quotient(r, d.clone())))
            }
        }
        Node::Sum(ts) => {
            let lead = ts
                .iter()
                .map(split_coeff)
                .filter(|(_, r)| !r.is_one())
                .min_by(|a, b| a.1.cmp(&b.1))
                .unwrap_or((Number::one(), Expr::one()));
            if lead.0.is_one() {
                return (lead.0, e.clone());
            }
            let inv = lead.0.recip().expect("coefficients of sum terms are nonzero");
            (lead.0, Expr::sum(ts.iter().map(|t| t.scaled(&inv)).collect()))
        }
        _ => (Number::one(), e.clone()),
    }
}

/// `c · rest` for a coefficient-free `rest`. Coefficients are distributed over
/// sums, including the numerator of a quotient.
pub(crate) fn scale(c: &Number, rest: &Expr) -> Expr {
    if c.is_zero() {
        return Expr::zero();
    }
    if let Some(k) = rest.as_const() {
        return Expr::constant(c.mul(k));
    }
    if c.is_one() {
        return rest.clone();
    }
    match rest.node() {
        Node::Sum(ts) => Expr::sum(ts.iter().map(|t| t.scaled(c)).collect()),
        Node::Quotient(n, d) => Expr::from_node(Node::Quotient(scale(c, n), d.clone())),
        _ if c.is_minus_one() => Expr::from_node(Node::Negate(rest.clone())),
        Node::Product(fs) => {
            let mut v = Vec::with_capacity(fs.len() + 1);
            v.push(Expr::constant(c.clone()));
            v.extend(fs.iter().cloned());
            Expr::from_node(Node::Product(v))
        }
        _ => Expr::from_node(Node::Product(vec![Expr::constant(c.clone()), rest.clone()])),
    }
}

/// Accumulates a product as `coefficient · Π baseᵏ`.
struct Factors {
    coeff: Number,
    bases: Vec<(Expr, i64)>,
    index: HashMap<Expr, usize>,
    /// Set when a literal zero landed in a denominator.
    singular: bool,
}

impl Factors {
    fn new() -> Self {
        Factors { coeff: Number::one(), bases: Vec::new(), index: HashMap::new(), singular: false }
    }

    fn add_base(&mut self, base: &Expr, exp: i64) {
        match self.index.get(base) {
            Some(&i) => self.bases[i].1 += exp,
            None => {
                self.index.insert(base.clone(), self.bases.len());
                self.bases.push((base.clone(), exp));
            }
        }
    }

    fn collect(&mut self, e: &Expr, mult: i64) {
        match e.node() {
            Node::Const(c) => match c.powi(mult) {
                Some(p) => self.coeff = self.coeff.mul(&p),
                None => self.singular = true,
            },
            Node::Product(fs) => {
                for f in fs {
                    self.collect(f, mult);
                }
            }
            Node::Negate(t) => {
                if mult % 2 != 0 {
                    self.coeff = self.coeff.neg();
                }
                self.collect(t, mult);
            }
            Node::Quotient(n, d) => {
                self.collect(n, mult);
                self.collect(d, -mult);
            }
            Node::Power(b, k) => self.collect(b, k * mult),
            Node::Sum(_) => {
                let (c, r) = split_coeff(e);
                match c.powi(mult) {
                    Some(p) => self.coeff = self.coeff.mul(&p),
                    None => self.singular = true,
                }
                self.add_base(&r, mult);
            }
            _ => self.add_base(e, mult),
        }
    }

    fn finish(self) -> Expr {
        let mut num = Vec::new();
        let mut den = Vec::new();
        for (b, k) in self.bases {
            if k > 0 {
                num.push(power_node(b, k));
            } else if k < 0 {
                den.push(power_node(b, -k));
            }
        }
        num.sort();
        den.sort();
        let num_core = product_node(num);
        if self.singular {
            let n = scale(&self.coeff, &num_core);
            return Expr::from_node(Node::Quotient(n, Expr::zero()));
        }
        if self.coeff.is_zero() {
            return Expr::zero();
        }
        if den.is_empty() {
            return scale(&self.coeff, &num_core);
        }
        let q = Expr::from_node(Node::Quotient(num_core, product_node(den)));
        scale(&self.coeff, &q)
    }
}

fn power_node(base: Expr, k: i64) -> Expr {
    if k == 1 {
        base
    } else {
        Expr::from_node(Node::Power(base, k))
    }
}

/// Coefficient-free product of already sorted factors.
fn product_node(mut fs: Vec<Expr>) -> Expr {
    match fs.len() {
        0 => Expr::one(),
        1 => fs.pop().unwrap(),
        _ => Expr::from_node(Node::Product(fs)),
    }
}

impl Expr {
    pub fn sum(terms: Vec<Expr>) -> Expr {
        let mut constant = Number::zero();
        let mut parts: Vec<(Expr, Number)> = Vec::new();
        let mut index: HashMap<Expr, usize> = HashMap::new();
        let mut stack: Vec<(Expr, bool)> = terms.into_iter().rev().map(|t| (t, false)).collect();
        while let Some((t, negated)) = stack.pop() {
            match t.node() {
                Node::Sum(ts) => stack.extend(ts.iter().rev().map(|s| (s.clone(), negated))),
                Node::Negate(inner) if matches!(inner.node(), Node::Sum(_)) => {
                    stack.push((inner.clone(), !negated));
                }
                _ => {
                    let (mut c, rest) = split_coeff(&t);
                    if negated {
                        c = c.neg();
                    }
                    if rest.is_one() {
                        constant = constant.add(&c);
                        continue;
                    }
                    match index.get(&rest) {
                        Some(&i) => parts[i].1 = parts[i].1.add(&c),
                        None => {
                            index.insert(rest.clone(), parts.len());
                            parts.push((rest, c));
                        }
                    }
                }
            }
        }
        let mut out: Vec<Expr> = parts
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(r, c)| scale(&c, &r))
            .collect();
        if !constant.is_zero() {
            out.push(Expr::constant(constant));
        }
        out.sort();
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::from_node(Node::Sum(out)),
        }
    }

    pub fn product(factors: Vec<Expr>) -> Expr {
        let mut acc = Factors::new();
        for f in &factors {
            acc.collect(f, 1);
        }
        acc.finish()
    }

    pub fn quotient(num: &Expr, den: &Expr) -> Expr {
        if den.is_zero() {
            return Expr::from_node(Node::Quotient(num.clone(), den.clone()));
        }
        let mut acc = Factors::new();
        acc.collect(num, 1);
        acc.collect(den, -1);
        acc.finish()
    }

    pub fn pow(base: &Expr, k: i64) -> Expr {
        match k {
            0 => return Expr::one(),
            1 => return base.clone(),
            _ => {}
        }
        if let Some(c) = base.as_const() {
            return match c.powi(k) {
                Some(p) => Expr::constant(p),
                None => Expr::from_node(Node::Quotient(Expr::one(), Expr::zero())),
            };
        }
        match base.node() {
            Node::Var(_) | Node::Apply(..) if k > 1 => Expr::from_node(Node::Power(base.clone(), k)),
            _ => {
                let mut acc = Factors::new();
                acc.collect(base, k);
                acc.finish()
            }
        }
    }

    pub fn powi(&self, k: i64) -> Expr {
        Expr::pow(self, k)
    }

    pub fn neg(e: &Expr) -> Expr {
        let (c, r) = split_coeff(e);
        scale(&c.neg(), &r)
    }

    pub fn scaled(&self, c: &Number) -> Expr {
        let (k, r) = split_coeff(self);
        scale(&k.mul(c), &r)
    }

    pub fn apply(f: Func, arg: &Expr) -> Expr {
        if let Some(c) = arg.as_const() {
            let folded = match f {
                Func::Exp | Func::Cos if c.is_zero() => Some(Number::one()),
                Func::Sin | Func::Sqrt if c.is_zero() => Some(Number::zero()),
                Func::Log | Func::Sqrt if c.is_one() => Some(if f == Func::Log { Number::zero() } else { Number::one() }),
                _ => None,
            };
            if let Some(v) = folded {
                return Expr::constant(v);
            }
        }
        Expr::from_node(Node::Apply(f, arg.clone()))
    }
}
