//! Expression grammar and the line-oriented corpus format.
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := "-" factor | atom ("^" integer)*
//! atom   := number | "i" | ident | fn "(" expr ")" | "(" expr ")"
//! fn     := "exp" | "log" | "sin" | "cos" | "sqrt"
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`, and chains of
//! exponents associate to the right.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{build, Expr, Func, Number, RawExpr, VarRef};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: expected ", self.line, self.column)?;
        match self.expected.as_slice() {
            [] => write!(f, "nothing")?,
            [one] => write!(f, "{one}")?,
            many => write!(f, "one of {}", many.join(", "))?,
        }
        write!(f, ", found {}", self.found)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}: system `{system}`: {message}")]
pub struct ValidationError {
    pub system: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("validation error at {0}")]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamPolicy {
    Generic,
    GenericNonzero,
    Fixed(Number),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamDecl {
    pub name: String,
    pub policy: ParamPolicy,
}

impl ParamDecl {
    pub fn generic(name: &str) -> Self {
        ParamDecl { name: name.to_string(), policy: ParamPolicy::Generic }
    }

    pub fn generic_nonzero(name: &str) -> Self {
        ParamDecl { name: name.to_string(), policy: ParamPolicy::GenericNonzero }
    }

    pub fn fixed(name: &str, value: Number) -> Self {
        ParamDecl { name: name.to_string(), policy: ParamPolicy::Fixed(value) }
    }

    pub fn var(&self) -> VarRef {
        VarRef::param(&self.name)
    }
}

/// `d²yᴵ/dx² = fᴵ(x, y, ẏ)` for `I = 1..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSystem {
    pub name: String,
    pub rhs: Vec<Expr>,
    pub params: Vec<ParamDecl>,
}

impl OdeSystem {
    /// Builds a system, checking that every right-hand side uses only `x`,
    /// `y1..yn`, `dy1..dyn` and declared parameters.
    pub fn new(name: &str, rhs: Vec<Expr>, params: Vec<ParamDecl>) -> Result<Self, ValidationError> {
        let sys = OdeSystem { name: name.to_string(), rhs, params };
        sys.validate(0)?;
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn rhs(&self, i: usize) -> &Expr {
        &self.rhs[i - 1]
    }

    fn invalid(&self, line: usize, message: String) -> ValidationError {
        ValidationError { system: self.name.clone(), line, message }
    }

    fn validate(&self, line: usize) -> Result<(), ValidationError> {
        if self.rhs.is_empty() {
            return Err(self.invalid(line, "a system needs n ≥ 1 equations".into()));
        }
        let mut names = BTreeSet::new();
        for p in &self.params {
            if is_reserved(&p.name) || !is_identifier(&p.name) {
                return Err(self.invalid(line, format!("`{}` is not a valid parameter name", p.name)));
            }
            if !names.insert(p.name.as_str()) {
                return Err(self.invalid(line, format!("parameter `{}` declared twice", p.name)));
            }
        }
        for (i, f) in self.rhs.iter().enumerate() {
            self.check_expr(f, line).map_err(|e| self.invalid(line, format!("f{}: {}", i + 1, e.message)))?;
        }
        Ok(())
    }

    /// Checks that `e` only mentions this system's variables and parameters.
    pub fn check_expr(&self, e: &Expr, line: usize) -> Result<(), ValidationError> {
        let n = self.dim();
        for v in e.variables() {
            let ok = match &v {
                VarRef::X => true,
                VarRef::Y(k) | VarRef::YDot(k) => (1..=n).contains(k),
                VarRef::Param(name) => self.params.iter().any(|p| p.name == **name),
            };
            if !ok {
                let what = if v.is_param() { "undeclared parameter" } else { "index out of range for" };
                let msg = if v.is_param() { format!("{what} `{v}`") } else { format!("{what} n = {n}: `{v}`") };
                return Err(self.invalid(line, msg));
            }
        }
        Ok(())
    }

    /// Replaces every `Fixed` parameter by its value.
    pub fn specialize_fixed(&self) -> OdeSystem {
        let map: std::collections::HashMap<VarRef, Expr> = self
            .params
            .iter()
            .filter_map(|p| match &p.policy {
                ParamPolicy::Fixed(v) => Some((p.var(), Expr::constant(v.clone()))),
                _ => None,
            })
            .collect();
        OdeSystem {
            name: self.name.clone(),
            rhs: self.rhs.iter().map(|f| f.substitute(&map)).collect(),
            params: self.params.iter().filter(|p| !matches!(p.policy, ParamPolicy::Fixed(_))).cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Straight,
    NotStraight,
    Unspecified,
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Expectation::Straight => "straight",
            Expectation::NotStraight => "not-straight",
            Expectation::Unspecified => "unspecified",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub system: OdeSystem,
    pub expect: Expectation,
    pub conserved: Vec<Expr>,
    pub notes: Vec<String>,
}

impl CorpusEntry {
    fn has_flag(&self, flag: &str) -> bool {
        self.notes
            .iter()
            .any(|n| n.split_whitespace().next().map(|w| w.trim_end_matches([',', ':', ';'])) == Some(flag))
    }

    /// Entries flagged `note soft` are reported but do not gate.
    pub fn is_soft(&self) -> bool {
        self.has_flag("soft")
    }

    pub fn transcription_uncertain(&self) -> bool {
        self.has_flag("transcription-uncertain")
    }

    /// Whether a mismatch on this entry should fail a run.
    pub fn is_gating(&self) -> bool {
        !self.is_soft() && !self.transcription_uncertain()
    }
}

fn is_identifier(s: &str) -> bool {
    let mut cs = s.chars();
    cs.next().is_some_and(|c| c.is_ascii_alphabetic()) && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn indexed(s: &str, prefix: &str) -> Option<usize> {
    let digits = s.strip_prefix(prefix)?;
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Names that cannot be used as parameters.
pub fn is_reserved(name: &str) -> bool {
    matches!(name, "x" | "y" | "dy" | "i")
        || Func::from_name(name).is_some()
        || indexed(name, "y").is_some()
        || indexed(name, "dy").is_some()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Sym(char),
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(s) => write!(f, "number `{s}`"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Sym(c) => write!(f, "`{c}`"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

fn lex(text: &str, line: usize, col0: usize) -> Result<Lexer, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            toks.push((Tok::Num(chars[start..i].iter().collect()), start));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else if "+-*/^()".contains(c) {
            toks.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err(ParseError {
                line,
                column: col0 + i + 1,
                expected: vec!["expression".into()],
                found: format!("character `{c}`"),
            });
        }
    }
    toks.push((Tok::End, chars.len()));
    Ok(Lexer { toks })
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    col0: usize,
    used_bare_alias: bool,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let (tok, col) = &self.toks[self.pos];
        ParseError {
            line: self.line,
            column: self.col0 + col + 1,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: tok.to_string(),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<RawExpr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat('+') {
                terms.push(self.term()?);
            } else if self.eat('-') {
                terms.push(RawExpr::Negate(Box::new(self.term()?)));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { RawExpr::Sum(terms) })
    }

    fn term(&mut self) -> Result<RawExpr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat('*') {
                acc = RawExpr::Product(vec![acc, self.factor()?]);
            } else if self.eat('/') {
                acc = RawExpr::Quotient(Box::new(acc), Box::new(self.factor()?));
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<RawExpr, ParseError> {
        if self.eat('-') {
            return Ok(RawExpr::Negate(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        let mut exps = Vec::new();
        while self.eat('^') {
            exps.push(self.integer()?);
        }
        let Some(mut k) = exps.pop() else { return Ok(base) };
        while let Some(e) = exps.pop() {
            k = u32::try_from(k)
                .ok()
                .and_then(|k| e.checked_pow(k))
                .ok_or_else(|| self.error(&["a small non-negative integer exponent"]))?;
        }
        Ok(RawExpr::Power(Box::new(base), k))
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        let neg = self.eat('-');
        match self.peek().clone() {
            Tok::Num(s) if s.chars().all(|c| c.is_ascii_digit()) => {
                let v: i64 = s.parse().map_err(|_| self.error(&["integer exponent"]))?;
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.error(&["integer exponent"])),
        }
    }

    fn atom(&mut self) -> Result<RawExpr, ParseError> {
        match self.peek().clone() {
            Tok::Num(s) => {
                let n = Number::parse_decimal(&s).ok_or_else(|| self.error(&["number"]))?;
                self.bump();
                Ok(RawExpr::Const(n))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error(&["`)`", "operator"]));
                }
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(f) = Func::from_name(&name) {
                    self.bump();
                    if !self.eat('(') {
                        return Err(self.error(&["`(`"]));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.error(&["`)`", "operator"]));
                    }
                    return Ok(RawExpr::Apply(f, Box::new(arg)));
                }
                let var = match name.as_str() {
                    "i" => {
                        self.bump();
                        return Ok(RawExpr::Const(Number::i()));
                    }
                    "x" => VarRef::X,
                    "y" => {
                        self.used_bare_alias = true;
                        VarRef::Y(1)
                    }
                    "dy" => {
                        self.used_bare_alias = true;
                        VarRef::YDot(1)
                    }
                    _ => {
                        if let Some(k) = indexed(&name, "dy") {
                            if k == 0 {
                                return Err(self.error(&["index ≥ 1"]));
                            }
                            VarRef::YDot(k)
                        } else if let Some(k) = indexed(&name, "y") {
                            if k == 0 {
                                return Err(self.error(&["index ≥ 1"]));
                            }
                            VarRef::Y(k)
                        } else {
                            VarRef::param(&name)
                        }
                    }
                };
                self.bump();
                Ok(RawExpr::Var(var))
            }
            _ => Err(self.error(&["number", "identifier", "`(`", "`-`"])),
        }
    }
}

fn parse_raw(text: &str, line: usize, col0: usize) -> Result<(RawExpr, bool), ParseError> {
    let lexer = lex(text, line, col0)?;
    let mut p = Parser { toks: lexer.toks, pos: 0, line, col0, used_bare_alias: false };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error(&["operator", "end of input"]));
    }
    Ok((e, p.used_bare_alias))
}

/// Parses one expression. `y` and `dy` stand for `y1` and `dy1`.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    parse_raw(text, 1, 0).map(|(raw, _)| build(&raw))
}

#[derive(Default)]
struct Block {
    name: String,
    start: usize,
    n: Option<(usize, usize)>,
    params: Vec<ParamDecl>,
    rhs: Vec<(usize, Expr, usize, bool)>,
    conserved: Vec<(Expr, usize, bool)>,
    expect: Option<Expectation>,
    notes: Vec<String>,
}

impl Block {
    fn invalid(&self, line: usize, message: impl Into<String>) -> CorpusError {
        ValidationError { system: self.name.clone(), line, message: message.into() }.into()
    }

    fn finish(self, end_line: usize) -> Result<CorpusEntry, CorpusError> {
        let Some((n, n_line)) = self.n else {
            return Err(self.invalid(end_line, "missing `n` line"));
        };
        if n == 0 {
            return Err(self.invalid(n_line, "n must be positive"));
        }
        let mut slots: Vec<Option<Expr>> = vec![None; n];
        for (k, e, line, bare) in &self.rhs {
            if *k == 0 || *k > n {
                return Err(self.invalid(*line, format!("f{k} given but n = {n}")));
            }
            if *bare && n != 1 {
                return Err(self.invalid(*line, "`y`/`dy` shorthands need n = 1"));
            }
            if slots[k - 1].replace(e.clone()).is_some() {
                return Err(self.invalid(*line, format!("f{k} given twice")));
            }
        }
        let rhs: Vec<Expr> = match slots.into_iter().enumerate().map(|(i, s)| s.ok_or(i + 1)).collect() {
            Ok(v) => v,
            Err(k) => return Err(self.invalid(end_line, format!("missing f{k}"))),
        };
        let Some(expect) = self.expect else {
            return Err(self.invalid(end_line, "missing `expect` line"));
        };
        let system = OdeSystem { name: self.name.clone(), rhs, params: self.params.clone() };
        for (k, _, line, _) in &self.rhs {
            system.check_expr(system.rhs(*k), *line).map_err(|e| ValidationError { message: format!("f{k}: {}", e.message), ..e })?;
        }
        system.validate(self.start)?;
        for (g, line, bare) in &self.conserved {
            if *bare && n != 1 {
                return Err(self.invalid(*line, "`y`/`dy` shorthands need n = 1"));
            }
            system.check_expr(g, *line)?;
        }
        Ok(CorpusEntry {
            system,
            expect,
            conserved: self.conserved.into_iter().map(|(g, _, _)| g).collect(),
            notes: self.notes,
        })
    }
}

fn keyword_error(line: usize, column: usize, expected: &[&str], found: &str) -> CorpusError {
    ParseError {
        line,
        column,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found: if found.is_empty() { "end of line".into() } else { format!("`{found}`") },
    }
    .into()
}

/// Parses a corpus file into validated entries.
///
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_corpus(text: &str) -> Result<Vec<CorpusEntry>, CorpusError> {
    let mut out = Vec::new();
    let mut block: Option<Block> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let indent = raw_line.len() - raw_line.trim_start().len();
        let body = raw_line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let (kw, rest) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
        let rest_trim = rest.trim_start();
        let rest_col = indent + body.len() - rest_trim.len();
        let Some(b) = block.as_mut() else {
            if kw != "system" {
                return Err(keyword_error(line, indent + 1, &["`system`"], kw));
            }
            let name = rest_trim.trim();
            if !is_identifier(&name.replace('-', "_")) {
                return Err(keyword_error(line, rest_col + 1, &["system name"], name));
            }
            block = Some(Block { name: name.to_string(), start: line, ..Block::default() });
            continue;
        };
        match kw {
            "n" => {
                let n = rest_trim
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| keyword_error(line, rest_col + 1, &["positive integer"], rest_trim.trim()))?;
                if b.n.replace((n, line)).is_some() {
                    return Err(b.invalid(line, "`n` given twice"));
                }
            }
            "param" => {
                let (name, policy) = rest_trim.split_once(char::is_whitespace).unwrap_or((rest_trim, ""));
                let policy = policy.trim();
                let policy = match policy {
                    "generic" => ParamPolicy::Generic,
                    "generic-nonzero" => ParamPolicy::GenericNonzero,
                    p if p.starts_with('=') => {
                        let lit = &p[1..];
                        let col = rest_col + name.len() + (rest_trim.len() - name.len() - policy.len()) + 1;
                        let (raw, _) = parse_raw(lit, line, col)?;
                        let e = build(&raw);
                        match e.as_const() {
                            Some(c) => ParamPolicy::Fixed(c.clone()),
                            None => return Err(b.invalid(line, format!("value of `{name}` is not a constant"))),
                        }
                    }
                    other => {
                        return Err(keyword_error(
                            line,
                            rest_col + name.len() + 2,
                            &["`generic`", "`generic-nonzero`", "`= <value>`"],
                            other,
                        ))
                    }
                };
                b.params.push(ParamDecl { name: name.to_string(), policy });
            }
            "conserved" => {
                let (raw, bare) = parse_raw(rest_trim, line, rest_col)?;
                b.conserved.push((build(&raw), line, bare));
            }
            "expect" => {
                let e = match rest_trim.trim() {
                    "straight" => Expectation::Straight,
                    "not-straight" => Expectation::NotStraight,
                    "unspecified" => Expectation::Unspecified,
                    other => {
                        return Err(keyword_error(
                            line,
                            rest_col + 1,
                            &["`straight`", "`not-straight`", "`unspecified`"],
                            other,
                        ))
                    }
                };
                if b.expect.replace(e).is_some() {
                    return Err(b.invalid(line, "`expect` given twice"));
                }
            }
            "note" => b.notes.push(rest_trim.to_string()),
            "end" => {
                let done = block.take().unwrap();
                out.push(done.finish(line)?);
            }
            _ => {
                if let Some(k) = indexed(kw, "f") {
                    let Some(expr_text) = rest_trim.strip_prefix('=') else {
                        return Err(keyword_error(line, rest_col + 1, &["`=`"], rest_trim));
                    };
                    let col = rest_col + 1;
                    let (raw, bare) = parse_raw(expr_text, line, col)?;
                    b.rhs.push((k, build(&raw), line, bare));
                } else {
                    return Err(keyword_error(
                        line,
                        indent + 1,
                        &["`n`", "`param`", "`f<K> =`", "`conserved`", "`expect`", "`note`", "`end`"],
                        kw,
                    ));
                }
            }
        }
    }
    if let Some(b) = block {
        let last = text.lines().count();
        return Err(keyword_error(last + 1, 1, &["`end`"], &format!("end of file in system {}", b.name)));
    }
    Ok(out)
}

/// Writes entries back in corpus format.
pub fn format_corpus(entries: &[CorpusEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        s.push_str(&format!("system {}\n  n {}\n", e.system.name, e.system.dim()));
        for p in &e.system.params {
            match &p.policy {
                ParamPolicy::Generic => s.push_str(&format!("  param {} generic\n", p.name)),
                ParamPolicy::GenericNonzero => s.push_str(&format!("  param {} generic-nonzero\n", p.name)),
                ParamPolicy::Fixed(v) => s.push_str(&format!("  param {} = {}\n", p.name, v)),
            }
        }
        for (i, f) in e.system.rhs.iter().enumerate() {
            s.push_str(&format!("  f{} = {}\n", i + 1, f));
        }
        for g in &e.conserved {
            s.push_str(&format!("  conserved {g}\n"));
        }
        s.push_str(&format!("  expect {}\n", e.expect));
        for n in &e.notes {
            s.push_str(&format!("  note {n}\n"));
        }
        s.push_str("end\n");
    }
    s
}
