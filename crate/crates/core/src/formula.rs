//! Constraint formulas: AST, concrete syntax, substitution, and the
//! normalization into negation/disjunctive normal form used by the solver.
//!
//! Concrete syntax (explicit quantifiers only):
//!
//! ```text
//! forall <section-title> title="{<title-txt> t}\n{<underline> u}" in start:
//!   (>= (str.len u) (str.len t))
//! exists int n: ((>= (str.to_int n) 3) and count(start, "<field>", n))
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::FormulaError;
use crate::grammar::{escape_terminal, Grammar};
use crate::matching::MatchExpr;
use crate::predicates::{ArgKind, PredicateKind, Registry};
use crate::smt::{SExpr, SmtOp, SmtTerm};
use crate::tree::NodeId;

/// Upper bound on the number of disjuncts produced by [`establish_inv`].
pub const MAX_DNF_BRANCHES: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarType {
    Nonterminal(Arc<str>),
    /// Numeric constants; values are decimal strings.
    Num,
}

impl fmt::Display for VarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarType::Nonterminal(n) => write!(f, "{n}"),
            VarType::Num => write!(f, "NUM"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub name: Arc<str>,
    pub ty: VarType,
}

impl Var {
    pub fn new(name: &str, ty: VarType) -> Self {
        Var {
            name: Arc::from(name),
            ty,
        }
    }

    pub fn tree(name: &str, nonterminal: &str) -> Self {
        Var::new(name, VarType::Nonterminal(Arc::from(nonterminal)))
    }

    pub fn nonterminal(&self) -> Option<&str> {
        match &self.ty {
            VarType::Nonterminal(n) => Some(n),
            VarType::Num => None,
        }
    }
}

/// A reference in argument or scope position.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Var),
    Node(NodeId),
    Str(Arc<str>),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{}", v.name),
            Term::Node(n) => write!(f, "{n}"),
            Term::Str(s) => write!(f, "\"{}\"", escape_terminal(s)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Quantified {
    pub var: Var,
    pub mexpr: Option<MatchExpr>,
    pub scope: Term,
    pub body: Box<Formula>,
}

impl Quantified {
    /// The nonterminal type of the bound variable.
    pub fn ty(&self) -> &str {
        self.var.nonterminal().expect("tree quantifier over nonterminal")
    }

    /// Names bound in the body: the variable and all match binders.
    pub fn bound_names(&self) -> Vec<Arc<str>> {
        let mut out = vec![self.var.name.clone()];
        if let Some(m) = &self.mexpr {
            out.extend(m.binders().iter().map(|v| v.name.clone()));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredAtom {
    pub name: Arc<str>,
    pub args: Vec<Term>,
    pub semantic: bool,
    /// Only structural atoms may be negated.
    pub negated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Forall(Quantified),
    Exists(Quantified),
    ExistsInt(Var, Box<Formula>),
    Pred(PredAtom),
    Smt(SmtTerm),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
}

impl Formula {
    pub fn and(fs: Vec<Formula>) -> Formula {
        Formula::And(fs)
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    /// True for formulas the solver may hold in a constraint set: no
    /// top-level connective or constant, and no negation anywhere except
    /// inside atoms.
    pub fn is_invariant_form(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::And(_) | Formula::Or(_) | Formula::Not(_) => false,
            _ => self.negation_free(),
        }
    }

    fn negation_free(&self) -> bool {
        match self {
            Formula::Not(_) => false,
            Formula::Forall(q) | Formula::Exists(q) => q.body.negation_free(),
            Formula::ExistsInt(_, b) => b.negation_free(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().all(|f| f.negation_free()),
            _ => true,
        }
    }

    /// Free variables and node references, in first-occurrence order.
    pub fn references(&self) -> Vec<Term> {
        let mut out = Vec::new();
        self.collect_refs(&mut Vec::new(), &mut out);
        out
    }

    fn collect_refs(&self, bound: &mut Vec<Arc<str>>, out: &mut Vec<Term>) {
        let mut push = |t: Term, bound: &Vec<Arc<str>>| {
            if let Term::Var(v) = &t {
                if bound.contains(&v.name) {
                    return;
                }
            }
            if matches!(t, Term::Str(_)) {
                return;
            }
            if !out.contains(&t) {
                out.push(t);
            }
        };
        match self {
            Formula::True | Formula::False => {}
            Formula::Forall(q) | Formula::Exists(q) => {
                push(q.scope.clone(), bound);
                let names = q.bound_names();
                let n = names.len();
                bound.extend(names);
                q.body.collect_refs(bound, out);
                bound.truncate(bound.len() - n);
            }
            Formula::ExistsInt(v, b) => {
                bound.push(v.name.clone());
                b.collect_refs(bound, out);
                bound.pop();
            }
            Formula::Pred(p) => {
                for a in &p.args {
                    push(a.clone(), bound);
                }
            }
            Formula::Smt(t) => {
                let mut refs = Vec::new();
                t.references(&mut refs);
                for r in refs {
                    push(r, bound);
                }
            }
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_refs(bound, out)),
            Formula::Not(f) => f.collect_refs(bound, out),
        }
    }

    pub fn free_vars(&self) -> Vec<Var> {
        self.references()
            .into_iter()
            .filter_map(|t| match t {
                Term::Var(v) => Some(v),
                _ => None,
            })
            .collect()
    }

    pub fn node_refs(&self) -> Vec<NodeId> {
        self.references()
            .into_iter()
            .filter_map(|t| match t {
                Term::Node(n) => Some(n),
                _ => None,
            })
            .collect()
    }

    /// Number of existential (tree and numeric) quantifiers.
    pub fn existential_count(&self) -> usize {
        match self {
            Formula::Exists(q) => 1 + q.body.existential_count(),
            Formula::Forall(q) => q.body.existential_count(),
            Formula::ExistsInt(_, b) => 1 + b.existential_count(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().map(|f| f.existential_count()).sum(),
            Formula::Not(f) => f.existential_count(),
            _ => 0,
        }
    }

    /// Maximal quantifier nesting depth.
    pub fn quantifier_depth(&self) -> usize {
        match self {
            Formula::Exists(q) | Formula::Forall(q) => 1 + q.body.quantifier_depth(),
            Formula::ExistsInt(_, b) => 1 + b.quantifier_depth(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().map(|f| f.quantifier_depth()).max().unwrap_or(0),
            Formula::Not(f) => f.quantifier_depth(),
            _ => 0,
        }
    }

    pub fn is_semantic_atom(&self) -> bool {
        matches!(self, Formula::Pred(p) if p.semantic)
    }

    /// Substitutes free variables (by name). Bound occurrences are left
    /// alone. Replacing a variable by another variable that a quantifier
    /// would capture is an error.
    pub fn substitute(&self, map: &BTreeMap<Arc<str>, Term>) -> Result<Formula, FormulaError> {
        if map.is_empty() {
            return Ok(self.clone());
        }
        Ok(match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Forall(q) | Formula::Exists(q) => {
                let scope = subst_term(&q.scope, map);
                let names = q.bound_names();
                let inner = restrict(map, &names)?;
                let body = q.body.substitute(&inner)?;
                let q = Quantified {
                    var: q.var.clone(),
                    mexpr: q.mexpr.clone(),
                    scope,
                    body: Box::new(body),
                };
                if matches!(self, Formula::Forall(_)) {
                    Formula::Forall(q)
                } else {
                    Formula::Exists(q)
                }
            }
            Formula::ExistsInt(v, b) => {
                let inner = restrict(map, std::slice::from_ref(&v.name))?;
                Formula::ExistsInt(v.clone(), Box::new(b.substitute(&inner)?))
            }
            Formula::Pred(p) => Formula::Pred(PredAtom {
                args: p.args.iter().map(|a| subst_term(a, map)).collect(),
                ..p.clone()
            }),
            Formula::Smt(t) => Formula::Smt(t.substitute(map)),
            Formula::And(fs) => Formula::And(fs.iter().map(|f| f.substitute(map)).collect::<Result<_, _>>()?),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|f| f.substitute(map)).collect::<Result<_, _>>()?),
            Formula::Not(f) => Formula::Not(Box::new(f.substitute(map)?)),
        })
    }

    /// Substitutes node references by string literals inside SMT atoms.
    pub fn substitute_node_values(&self, map: &BTreeMap<NodeId, String>) -> Formula {
        match self {
            Formula::Smt(t) => Formula::Smt(t.substitute_nodes(map)),
            _ => self.clone(),
        }
    }
}

fn subst_term(t: &Term, map: &BTreeMap<Arc<str>, Term>) -> Term {
    match t {
        Term::Var(v) => map.get(&v.name).cloned().unwrap_or_else(|| t.clone()),
        _ => t.clone(),
    }
}

fn restrict(map: &BTreeMap<Arc<str>, Term>, bound: &[Arc<str>]) -> Result<BTreeMap<Arc<str>, Term>, FormulaError> {
    let mut inner = map.clone();
    for b in bound {
        inner.remove(b);
    }
    for t in inner.values() {
        if let Term::Var(v) = t {
            if bound.contains(&v.name) {
                return Err(FormulaError::BoundSubstitution(v.name.to_string()));
            }
        }
    }
    Ok(inner)
}

/// Capture-avoiding substitution of free variables.
pub fn substitute_vars(f: &Formula, map: &BTreeMap<Arc<str>, Term>) -> Result<Formula, FormulaError> {
    f.substitute(map)
}

// ---------------------------------------------------------------------------
// Normalization

/// Negation normal form. Negations are pushed into quantifiers, folded
/// into SMT atoms, and recorded on structural predicate atoms.
pub fn nnf(f: &Formula) -> Result<Formula, FormulaError> {
    to_nnf(f, false)
}

fn to_nnf(f: &Formula, neg: bool) -> Result<Formula, FormulaError> {
    Ok(match f {
        Formula::True => {
            if neg {
                Formula::False
            } else {
                Formula::True
            }
        }
        Formula::False => {
            if neg {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::Not(g) => to_nnf(g, !neg)?,
        Formula::And(fs) | Formula::Or(fs) => {
            let parts = fs.iter().map(|g| to_nnf(g, neg)).collect::<Result<Vec<_>, _>>()?;
            let is_and = matches!(f, Formula::And(_)) != neg;
            if is_and {
                Formula::And(parts)
            } else {
                Formula::Or(parts)
            }
        }
        Formula::Forall(q) | Formula::Exists(q) => {
            let body = to_nnf(&q.body, neg)?;
            let q = Quantified {
                body: Box::new(body),
                ..q.clone()
            };
            let universal = matches!(f, Formula::Forall(_)) != neg;
            if universal {
                Formula::Forall(q)
            } else {
                Formula::Exists(q)
            }
        }
        Formula::ExistsInt(v, b) => {
            if neg {
                return Err(FormulaError::NegatedNumeric(v.name.to_string()));
            }
            Formula::ExistsInt(v.clone(), Box::new(to_nnf(b, false)?))
        }
        Formula::Pred(p) => {
            if neg && p.semantic {
                return Err(FormulaError::NegatedSemantic(p.name.to_string()));
            }
            Formula::Pred(PredAtom {
                negated: p.negated != neg,
                ..p.clone()
            })
        }
        Formula::Smt(t) => {
            if neg {
                Formula::Smt(t.clone().negate())
            } else {
                Formula::Smt(t.clone())
            }
        }
    })
}

fn dnf(f: &Formula) -> Result<Vec<Vec<Formula>>, FormulaError> {
    let out = match f {
        Formula::True => vec![Vec::new()],
        Formula::False => Vec::new(),
        Formula::Or(fs) => {
            let mut out = Vec::new();
            for g in fs {
                out.extend(dnf(g)?);
                if out.len() > MAX_DNF_BRANCHES {
                    return Err(FormulaError::DnfBlowup(MAX_DNF_BRANCHES));
                }
            }
            out
        }
        Formula::And(fs) => {
            let mut acc: Vec<Vec<Formula>> = vec![Vec::new()];
            for g in fs {
                let parts = dnf(g)?;
                let mut next = Vec::new();
                for a in &acc {
                    for p in &parts {
                        let mut c = a.clone();
                        for x in p {
                            if !c.contains(x) {
                                c.push(x.clone());
                            }
                        }
                        next.push(c);
                        if next.len() > MAX_DNF_BRANCHES {
                            return Err(FormulaError::DnfBlowup(MAX_DNF_BRANCHES));
                        }
                    }
                }
                acc = next;
            }
            acc
        }
        other => vec![vec![other.clone()]],
    };
    Ok(out)
}

/// Converts `f` into a disjunction of conjunct sets. Each conjunct is in
/// invariant form; the disjunction of the conjunctions is equivalent to
/// `f`. An empty result means `f` is unsatisfiable; an empty branch means
/// the branch is trivially true.
pub fn establish_inv(f: &Formula) -> Result<Vec<Vec<Formula>>, FormulaError> {
    let n = nnf(f)?;
    let mut branches = dnf(&n)?;
    let mut seen = Vec::new();
    branches.retain(|b| {
        if seen.contains(b) {
            false
        } else {
            seen.push(b.clone());
            true
        }
    });
    Ok(branches)
}

// ---------------------------------------------------------------------------
// Display

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Forall(q) | Formula::Exists(q) => {
                let kw = if matches!(self, Formula::Forall(_)) { "forall" } else { "exists" };
                write!(f, "{kw} {} {}", q.ty(), q.var.name)?;
                if let Some(m) = &q.mexpr {
                    write!(f, "=\"{}\"", escape_terminal(m.raw()))?;
                }
                write!(f, " in {}: ({})", q.scope, q.body)
            }
            Formula::ExistsInt(v, b) => write!(f, "exists int {}: ({b})", v.name),
            Formula::Pred(p) => {
                if p.negated {
                    write!(f, "not ")?;
                }
                write!(f, "{}(", p.name)?;
                for (i, a) in p.args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Formula::Smt(t) => write!(f, "{t}"),
            Formula::And(fs) | Formula::Or(fs) => {
                let op = if matches!(self, Formula::And(_)) { " and " } else { " or " };
                if fs.is_empty() {
                    return write!(f, "{}", if matches!(self, Formula::And(_)) { "true" } else { "false" });
                }
                write!(f, "(")?;
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{op}")?;
                    }
                    write!(f, "{g}")?;
                }
                write!(f, ")")
            }
            Formula::Not(g) => write!(f, "not ({g})"),
        }
    }
}

// ---------------------------------------------------------------------------
// Concrete syntax

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Colon,
    Comma,
    Assign,
    Str(String),
    Nonterminal(String),
    Ident(String),
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-' | '+' | '*')
}

fn is_op_char(c: char) -> bool {
    matches!(c, '=' | '<' | '>' | '+' | '-' | '*' | '/' | '!')
}

fn is_nonterminal_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '<' | '>' | '(' | ')' | '"' | '=')
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, FormulaError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, m: &str| FormulaError::Syntax {
        position: pos,
        message: m.to_string(),
    };
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' && i + 1 < chars.len() && !chars[i + 1].is_ascii_digit() {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        match c {
            '(' => {
                out.push((start, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((start, Tok::RParen));
                i += 1;
            }
            ':' => {
                out.push((start, Tok::Colon));
                i += 1;
            }
            ',' => {
                out.push((start, Tok::Comma));
                i += 1;
            }
            '"' => {
                i += 1;
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None => return Err(err(start, "unterminated string")),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            let e = chars.get(i + 1).copied();
                            s.push(match e {
                                Some('n') => '\n',
                                Some('t') => '\t',
                                Some('"') => '"',
                                Some('\\') => '\\',
                                _ => return Err(err(i, "invalid escape")),
                            });
                            i += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push((start, Tok::Str(s)));
            }
            '<' if chars.get(i + 1).is_some_and(|&c| is_nonterminal_char(c)) => {
                let mut j = i + 1;
                while j < chars.len() && is_nonterminal_char(chars[j]) {
                    j += 1;
                }
                if chars.get(j) == Some(&'>') {
                    out.push((start, Tok::Nonterminal(chars[i..=j].iter().collect())));
                    i = j + 1;
                } else {
                    let mut j = i;
                    while j < chars.len() && is_op_char(chars[j]) {
                        j += 1;
                    }
                    out.push((start, Tok::Ident(chars[i..j].iter().collect())));
                    i = j;
                }
            }
            '-' if chars.get(i + 1).is_some_and(|c| c.is_ascii_digit()) => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                out.push((start, Tok::Ident(chars[i..j].iter().collect())));
                i = j;
            }
            '#' => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                out.push((start, Tok::Ident(chars[i..j].iter().collect())));
                i = j;
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                out.push((start, Tok::Ident(chars[i..j].iter().collect())));
                i = j;
            }
            c if is_name_start(c) => {
                let mut j = i;
                while j < chars.len() && is_name_char(chars[j]) {
                    j += 1;
                }
                out.push((start, Tok::Ident(chars[i..j].iter().collect())));
                i = j;
            }
            '=' if !chars.get(i + 1).is_some_and(|&c| is_op_char(c)) && matches!(out.last(), Some((_, Tok::Ident(_)))) && is_binder_position(&out) => {
                out.push((start, Tok::Assign));
                i += 1;
            }
            c if is_op_char(c) => {
                let mut j = i;
                while j < chars.len() && is_op_char(chars[j]) {
                    j += 1;
                }
                out.push((start, Tok::Ident(chars[i..j].iter().collect())));
                i = j;
            }
            _ => return Err(err(start, &format!("unexpected character '{c}'"))),
        }
    }
    Ok(out)
}

/// `=` directly after `<T> name` in a quantifier introduces a match
/// expression rather than an SMT equality.
fn is_binder_position(out: &[(usize, Tok)]) -> bool {
    out.len() >= 2 && matches!(out[out.len() - 2].1, Tok::Nonterminal(_))
}

/// Reads a single s-expression from text. Exposed for tests and tools.
pub fn read_sexpr(src: &str) -> Result<SExpr, FormulaError> {
    let toks = lex(src)?;
    let mut pos = 0;
    let e = sexpr(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(FormulaError::Syntax {
            position: toks[pos].0,
            message: "trailing input".into(),
        });
    }
    Ok(e)
}

fn sexpr(toks: &[(usize, Tok)], pos: &mut usize) -> Result<SExpr, FormulaError> {
    let Some((at, t)) = toks.get(*pos) else {
        return Err(FormulaError::Syntax {
            position: toks.last().map_or(0, |t| t.0),
            message: "unexpected end of input".into(),
        });
    };
    *pos += 1;
    match t {
        Tok::Str(s) => Ok(SExpr::Str(s.clone())),
        Tok::Ident(s) => Ok(SExpr::Atom(s.clone())),
        Tok::LParen => {
            let mut items = Vec::new();
            loop {
                match toks.get(*pos) {
                    Some((_, Tok::RParen)) => {
                        *pos += 1;
                        return Ok(SExpr::List(items));
                    }
                    Some(_) => items.push(sexpr(toks, pos)?),
                    None => {
                        return Err(FormulaError::Syntax {
                            position: *at,
                            message: "unbalanced parenthesis".into(),
                        })
                    }
                }
            }
        }
        _ => Err(FormulaError::Syntax {
            position: *at,
            message: format!("unexpected token {t:?} in SMT expression"),
        }),
    }
}

struct FormulaParser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    g: &'a Grammar,
    registry: &'a Registry,
    scope: Vec<Var>,
    end: usize,
}

impl<'a> FormulaParser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.1)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn err<T>(&self, m: impl Into<String>) -> Result<T, FormulaError> {
        Err(FormulaError::Syntax {
            position: self.here(),
            message: m.into(),
        })
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn expect(&mut self, t: Tok) -> Result<(), FormulaError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {t:?}"))
        }
    }

    fn ident(&mut self) -> Result<String, FormulaError> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) if s.chars().next().is_some_and(is_name_start) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn lookup(&self, name: &str) -> Option<Var> {
        self.scope.iter().rev().find(|v| &*v.name == name).cloned()
    }

    fn formula(&mut self) -> Result<Formula, FormulaError> {
        let mut parts = vec![self.conjunction()?];
        while self.is_kw("or") {
            self.pos += 1;
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::Or(parts) })
    }

    fn conjunction(&mut self) -> Result<Formula, FormulaError> {
        let mut parts = vec![self.unary()?];
        while self.is_kw("and") {
            self.pos += 1;
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::And(parts) })
    }

    fn unary(&mut self) -> Result<Formula, FormulaError> {
        if self.is_kw("not") {
            self.pos += 1;
            return Ok(Formula::not(self.unary()?));
        }
        if self.is_kw("forall") || self.is_kw("exists") {
            return self.quantifier();
        }
        if self.is_kw("true") {
            self.pos += 1;
            return Ok(Formula::True);
        }
        if self.is_kw("false") {
            self.pos += 1;
            return Ok(Formula::False);
        }
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                let smt_head = matches!(self.peek_at(1), Some(Tok::Ident(h)) if SmtOp::from_name(h).is_some());
                if smt_head {
                    let save = self.pos;
                    match self.smt_atom() {
                        Ok(f) => return Ok(f),
                        Err(e) => {
                            self.pos = save + 1;
                            match self.formula().and_then(|f| self.expect(Tok::RParen).map(|_| f)) {
                                Ok(f) => return Ok(f),
                                Err(_) => return Err(e),
                            }
                        }
                    }
                }
                self.pos += 1;
                let f = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Some(Tok::Ident(name)) if matches!(self.peek_at(1), Some(Tok::LParen)) => self.predicate(&name),
            _ => self.err("expected formula"),
        }
    }

    fn smt_atom(&mut self) -> Result<Formula, FormulaError> {
        let e = sexpr(&self.toks, &mut self.pos)?;
        let term = SmtTerm::from_sexpr(&e, &|n| self.lookup(n))?;
        Ok(Formula::Smt(term))
    }

    fn quantifier(&mut self) -> Result<Formula, FormulaError> {
        let universal = self.is_kw("forall");
        self.pos += 1;
        if self.is_kw("int") {
            self.pos += 1;
            if universal {
                return self.err("universal numeric quantifiers are not supported");
            }
            let name = self.ident()?;
            self.expect(Tok::Colon)?;
            let var = Var::new(&name, VarType::Num);
            self.scope.push(var.clone());
            let body = self.formula();
            self.scope.pop();
            return Ok(Formula::ExistsInt(var, Box::new(body?)));
        }
        let ty = match self.peek().cloned() {
            Some(Tok::Nonterminal(n)) => {
                self.pos += 1;
                n
            }
            _ => return self.err("expected nonterminal type"),
        };
        let ty = self.g.intern(&ty).ok_or(FormulaError::UnknownType(ty))?;
        let name = self.ident()?;
        let var = Var::new(&name, VarType::Nonterminal(ty.clone()));
        let mexpr = if self.peek() == Some(&Tok::Assign) {
            self.pos += 1;
            match self.peek().cloned() {
                Some(Tok::Str(raw)) => {
                    self.pos += 1;
                    Some(MatchExpr::parse(&raw, &ty, self.g)?)
                }
                _ => return self.err("expected match expression string"),
            }
        } else {
            None
        };
        let scope = if self.is_kw("in") {
            self.pos += 1;
            let s = self.ident()?;
            let v = self.lookup(&s).ok_or(FormulaError::UnknownVariable(s))?;
            if v.ty == VarType::Num {
                return Err(FormulaError::Sort(format!("{} is numeric and cannot scope a quantifier", v.name)));
            }
            Term::Var(v)
        } else {
            Term::Var(self.lookup("start").ok_or(FormulaError::UnknownVariable("start".into()))?)
        };
        self.expect(Tok::Colon)?;
        let mut bound = vec![var.clone()];
        if let Some(m) = &mexpr {
            bound.extend(m.binders().iter().cloned());
        }
        let n = bound.len();
        self.scope.extend(bound);
        let body = self.formula();
        self.scope.truncate(self.scope.len() - n);
        let q = Quantified {
            var,
            mexpr,
            scope,
            body: Box::new(body?),
        };
        Ok(if universal { Formula::Forall(q) } else { Formula::Exists(q) })
    }

    fn predicate(&mut self, name: &str) -> Result<Formula, FormulaError> {
        let sig = self
            .registry
            .signature(name)
            .ok_or_else(|| FormulaError::UnknownPredicate(name.to_string()))?
            .clone();
        self.pos += 2;
        let mut args = Vec::new();
        if self.peek() != Some(&Tok::RParen) {
            loop {
                let arg = match self.peek().cloned() {
                    Some(Tok::Str(s)) => {
                        self.pos += 1;
                        Term::Str(Arc::from(s.as_str()))
                    }
                    Some(Tok::Ident(s)) if s.chars().all(|c| c.is_ascii_digit()) => {
                        self.pos += 1;
                        Term::Str(Arc::from(s.as_str()))
                    }
                    Some(Tok::Ident(s)) => {
                        self.pos += 1;
                        Term::Var(self.lookup(&s).ok_or(FormulaError::UnknownVariable(s))?)
                    }
                    _ => return self.err("expected predicate argument"),
                };
                args.push(arg);
                if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        if args.len() != sig.args.len() {
            return Err(FormulaError::Arity {
                name: name.to_string(),
                expected: sig.args.len(),
                found: args.len(),
            });
        }
        for (a, k) in args.iter().zip(&sig.args) {
            let ok = match (k, a) {
                (ArgKind::Node, Term::Var(v)) => v.ty != VarType::Num,
                (ArgKind::Str, Term::Str(_)) => true,
                (ArgKind::Num, Term::Str(s)) => s.chars().all(|c| c.is_ascii_digit()) && !s.is_empty(),
                (ArgKind::Num, Term::Var(v)) => v.ty == VarType::Num,
                _ => false,
            };
            if !ok {
                return Err(FormulaError::Sort(format!("argument {a} of {name} should be {k:?}")));
            }
        }
        Ok(Formula::Pred(PredAtom {
            name: Arc::from(name),
            args,
            semantic: sig.kind == PredicateKind::Semantic,
            negated: false,
        }))
    }
}

/// Parses a constraint. The free variable `start` denotes the whole input
/// and has the grammar's start symbol as type. Negated semantic atoms and
/// negated numeric quantifiers are rejected.
pub fn parse_formula(text: &str, g: &Grammar, registry: &Registry) -> Result<Formula, FormulaError> {
    let toks = lex(text)?;
    let mut p = FormulaParser {
        end: text.len(),
        toks,
        pos: 0,
        g,
        registry,
        scope: vec![Var::tree("start", g.start())],
    };
    let f = p.formula()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    nnf(&f)?;
    Ok(f)
}
