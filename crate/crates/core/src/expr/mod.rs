//! Immutable expression trees over `x`, `yᴵ`, `ẏᴵ` and named parameters.
//!
//! Every [`Expr`] is canonical: the smart constructors ([`Expr::sum`],
//! [`Expr::product`], [`Expr::pow`], [`Expr::quotient`], ...) flatten nested
//! sums and products, fold constants exactly, collect like terms and like
//! bases, and drop identities. The canonical form is deliberately shallow.
//! Deciding whether an expression vanishes identically is the job of
//! [`crate::oracle`], not of this module.
//!
//! Canonical shape, in brief:
//!
//! * `Sum` and `Product` have at least two children and never directly
//!   contain a child of their own variant.
//! * A `Sum` holds at most one constant term, a `Product` at most one constant
//!   factor (always first), and neither holds a zero.
//! * A product with coefficient `-1` is written `Negate(..)`.
//! * `Power` exponents are integers `≥ 2`; negative powers become quotients.
//! * A `Product` never holds a `Quotient`; the quotient is hoisted outward.

mod build;
mod eval;
mod number;

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

pub use build::build;
pub use eval::{eval, eval_exact, EvalContext, EvalError, EvalTelemetry};
pub use number::Number;

/// A variable slot. `Y` and `YDot` indices are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    X,
    Y(usize),
    YDot(usize),
    Param(Arc<str>),
}

impl VarRef {
    pub fn param(name: &str) -> Self {
        VarRef::Param(Arc::from(name))
    }

    pub fn is_param(&self) -> bool {
        matches!(self, VarRef::Param(_))
    }
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarRef::X => write!(f, "x"),
            VarRef::Y(k) => write!(f, "y{k}"),
            VarRef::YDot(k) => write!(f, "dy{k}"),
            VarRef::Param(name) => write!(f, "{name}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Exp, Func::Log, Func::Sin, Func::Cos, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Functions with a branch cut; zero claims involving them only hold on
    /// the principal branch.
    pub fn is_multivalued(self) -> bool {
        matches!(self, Func::Log | Func::Sqrt)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Const(Number),
    Var(VarRef),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Power(Expr, i64),
    Quotient(Expr, Expr),
    Apply(Func, Expr),
    Negate(Expr),
}

impl Node {
    fn rank(&self) -> u8 {
        match self {
            Node::Const(_) => 0,
            Node::Var(_) => 1,
            Node::Power(..) => 2,
            Node::Product(_) => 3,
            Node::Quotient(..) => 4,
            Node::Apply(..) => 5,
            Node::Sum(_) => 6,
            Node::Negate(_) => 7,
        }
    }
}

#[derive(Debug)]
struct Inner {
    node: Node,
    hash: u64,
}

/// A shared, immutable, canonical expression.
///
/// Cloning is cheap. Equality and hashing are structural; the hash is cached
/// at construction.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

impl Expr {
    /// Wraps a node without canonicalizing it. Callers must already hold a
    /// canonical node.
    pub(crate) fn from_node(node: Node) -> Expr {
        let mut h = DefaultHasher::new();
        h.write_u8(node.rank());
        match &node {
            Node::Const(c) => c.hash(&mut h),
            Node::Var(v) => v.hash(&mut h),
            Node::Sum(ts) | Node::Product(ts) => {
                h.write_usize(ts.len());
                for t in ts {
                    h.write_u64(t.0.hash);
                }
            }
            Node::Power(b, k) => {
                h.write_u64(b.0.hash);
                h.write_i64(*k);
            }
            Node::Quotient(n, d) => {
                h.write_u64(n.0.hash);
                h.write_u64(d.0.hash);
            }
            Node::Apply(f, a) => {
                f.hash(&mut h);
                h.write_u64(a.0.hash);
            }
            Node::Negate(a) => h.write_u64(a.0.hash),
        }
        let hash = h.finish();
        Expr(Arc::new(Inner { node, hash }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub(crate) fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn constant(c: Number) -> Expr {
        Expr::from_node(Node::Const(c))
    }

    pub fn int(n: i64) -> Expr {
        Expr::constant(Number::from_integer(n))
    }

    pub fn ratio(num: i64, den: i64) -> Expr {
        Expr::constant(Number::from_ratio(num, den))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn var(v: VarRef) -> Expr {
        Expr::from_node(Node::Var(v))
    }

    pub fn x() -> Expr {
        Expr::var(VarRef::X)
    }

    pub fn y(k: usize) -> Expr {
        Expr::var(VarRef::Y(k))
    }

    pub fn ydot(k: usize) -> Expr {
        Expr::var(VarRef::YDot(k))
    }

    pub fn param(name: &str) -> Expr {
        Expr::var(VarRef::param(name))
    }

    pub fn as_const(&self) -> Option<&Number> {
        match self.node() {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(Number::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(Number::is_one)
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Const(_) | Node::Var(_) => Vec::new(),
            Node::Sum(ts) | Node::Product(ts) => ts.iter().collect(),
            Node::Power(b, _) => vec![b],
            Node::Quotient(n, d) => vec![n, d],
            Node::Apply(_, a) | Node::Negate(a) => vec![a],
        }
    }

    /// Visits every distinct subexpression once (shared nodes are not
    /// revisited).
    fn for_each_unique(&self, mut visit: impl FnMut(&Expr)) {
        let mut seen = HashSet::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            visit(e);
            stack.extend(e.children());
        }
    }

    /// Number of distinct nodes in the expression DAG.
    pub fn dag_size(&self) -> usize {
        let mut n = 0;
        self.for_each_unique(|_| n += 1);
        n
    }

    /// All variables and parameters occurring in the expression.
    pub fn variables(&self) -> BTreeSet<VarRef> {
        let mut out = BTreeSet::new();
        self.for_each_unique(|e| {
            if let Node::Var(v) = e.node() {
                out.insert(v.clone());
            }
        });
        out
    }

    pub fn contains_var(&self, v: &VarRef) -> bool {
        let mut found = false;
        self.for_each_unique(|e| {
            if matches!(e.node(), Node::Var(w) if w == v) {
                found = true;
            }
        });
        found
    }

    pub fn has_variables(&self) -> bool {
        let mut found = false;
        self.for_each_unique(|e| found |= matches!(e.node(), Node::Var(_)));
        found
    }

    pub fn contains_multivalued(&self) -> bool {
        let mut found = false;
        self.for_each_unique(|e| {
            if let Node::Apply(f, _) = e.node() {
                found |= f.is_multivalued();
            }
        });
        found
    }

    /// True iff the expression has no function applications, no division by
    /// anything containing a variable, and only real rational constants.
    pub fn is_polynomial(&self) -> bool {
        let mut ok = true;
        self.for_each_unique(|e| match e.node() {
            Node::Apply(..) => ok = false,
            Node::Quotient(_, d) if d.has_variables() => ok = false,
            Node::Power(b, k) if *k < 0 && b.has_variables() => ok = false,
            Node::Const(c) if !c.is_real() => ok = false,
            _ => {}
        });
        ok
    }

    /// Simultaneous substitution of variables, re-canonicalized.
    pub fn substitute(&self, map: &HashMap<VarRef, Expr>) -> Expr {
        if map.is_empty() {
            return self.clone();
        }
        let mut memo = HashMap::new();
        substitute_rec(self, map, &mut memo)
    }

    /// Rebuilds this node with new children through the smart constructors.
    pub(crate) fn rebuild_with(&self, kids: Vec<Expr>) -> Expr {
        match self.node() {
            Node::Const(_) | Node::Var(_) => self.clone(),
            Node::Sum(_) => Expr::sum(kids),
            Node::Product(_) => Expr::product(kids),
            Node::Power(_, k) => Expr::pow(&kids[0], *k),
            Node::Quotient(..) => Expr::quotient(&kids[0], &kids[1]),
            Node::Apply(f, _) => Expr::apply(*f, &kids[0]),
            Node::Negate(_) => Expr::neg(&kids[0]),
        }
    }

    pub fn to_raw(&self) -> RawExpr {
        match self.node() {
            Node::Const(c) => RawExpr::Const(c.clone()),
            Node::Var(v) => RawExpr::Var(v.clone()),
            Node::Sum(ts) => RawExpr::Sum(ts.iter().map(Expr::to_raw).collect()),
            Node::Product(ts) => RawExpr::Product(ts.iter().map(Expr::to_raw).collect()),
            Node::Power(b, k) => RawExpr::Power(Box::new(b.to_raw()), *k),
            Node::Quotient(n, d) => RawExpr::Quotient(Box::new(n.to_raw()), Box::new(d.to_raw())),
            Node::Apply(f, a) => RawExpr::Apply(*f, Box::new(a.to_raw())),
            Node::Negate(a) => RawExpr::Negate(Box::new(a.to_raw())),
        }
    }
}

fn substitute_rec(e: &Expr, map: &HashMap<VarRef, Expr>, memo: &mut HashMap<usize, Expr>) -> Expr {
    if let Some(done) = memo.get(&e.id()) {
        return done.clone();
    }
    let out = match e.node() {
        Node::Var(v) => map.get(v).cloned().unwrap_or_else(|| e.clone()),
        Node::Const(_) => e.clone(),
        _ => {
            let kids = e.children().into_iter().map(|c| substitute_rec(c, map, memo)).collect();
            e.rebuild_with(kids)
        }
    };
    memo.insert(e.id(), out.clone());
    out
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.ptr_eq(other) || (self.0.hash == other.0.hash && self.0.node == other.0.node)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.ptr_eq(other) {
            return Ordering::Equal;
        }
        let (a, b) = (self.node(), other.node());
        a.rank().cmp(&b.rank()).then_with(|| match (a, b) {
            (Node::Const(x), Node::Const(y)) => x.cmp(y),
            (Node::Var(x), Node::Var(y)) => x.cmp(y),
            (Node::Sum(x), Node::Sum(y)) | (Node::Product(x), Node::Product(y)) => x.cmp(y),
            (Node::Power(x, j), Node::Power(y, k)) => x.cmp(y).then(j.cmp(k)),
            (Node::Quotient(n1, d1), Node::Quotient(n2, d2)) => d1.cmp(d2).then_with(|| n1.cmp(n2)),
            (Node::Apply(f, x), Node::Apply(g, y)) => f.cmp(g).then_with(|| x.cmp(y)),
            (Node::Negate(x), Node::Negate(y)) => x.cmp(y),
            _ => unreachable!("ranks differ"),
        })
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

/// Binding strength used when printing, lowest first.
fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Sum(_) => 1,
        Node::Product(_) | Node::Quotient(..) => 2,
        Node::Negate(_) => 3,
        Node::Const(c) if !c.is_integer() || c.re() < &num::BigRational::from_integer(0.into()) => 1,
        Node::Power(..) => 4,
        _ => 5,
    }
}

fn fmt_at(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Prints in the input grammar, so the output reparses to an equal
/// expression.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(v) => write!(f, "{v}"),
            Node::Sum(ts) => {
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    fmt_at(t, 2, f)?;
                }
                Ok(())
            }
            Node::Product(ts) => {
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    fmt_at(t, 3, f)?;
                }
                Ok(())
            }
            Node::Power(b, k) => {
                fmt_at(b, 5, f)?;
                write!(f, "^{k}")
            }
            Node::Quotient(n, d) => {
                fmt_at(n, 3, f)?;
                write!(f, "/")?;
                fmt_at(d, 4, f)
            }
            Node::Apply(func, a) => write!(f, "{}({a})", func.name()),
            Node::Negate(a) => {
                write!(f, "-")?;
                fmt_at(a, 4, f)
            }
        }
    }
}

/// A non-canonical expression tree, as produced by a parser or written by
/// hand. [`build`] turns it into a canonical [`Expr`].
#[derive(Clone, Debug, PartialEq)]
pub enum RawExpr {
    Const(Number),
    Var(VarRef),
    Sum(Vec<RawExpr>),
    Product(Vec<RawExpr>),
    Power(Box<RawExpr>, i64),
    Quotient(Box<RawExpr>, Box<RawExpr>),
    Apply(Func, Box<RawExpr>),
    Negate(Box<RawExpr>),
}

macro_rules! binop {
    ($tr:ident, $method:ident, $ctor:expr) => {
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                $ctor(self, rhs)
            }
        }
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                $ctor(&self, &rhs)
            }
        }
        impl std::ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                $ctor(&self, rhs)
            }
        }
        impl std::ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                $ctor(self, &rhs)
            }
        }
    };
}

binop!(Add, add, |a: &Expr, b: &Expr| Expr::sum(vec![a.clone(), b.clone()]));
binop!(Sub, sub, |a: &Expr, b: &Expr| Expr::sum(vec![a.clone(), Expr::neg(b)]));
binop!(Mul, mul, |a: &Expr, b: &Expr| Expr::product(vec![a.clone(), b.clone()]));
binop!(Div, div, Expr::quotient);

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}
