//! The restricted SMT-LIB atom language: terms over strings and integers,
//! ground evaluation, and a bounded model enumerator.

pub mod regex;
mod solve;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

pub use solve::{solve, SmtModel, SmtQuery, SmtValue, SmtVar, SolveOutcome};

use crate::error::{EvalError, FormulaError};
use crate::formula::{Term, Var};
use crate::grammar::escape_terminal;
use crate::tree::NodeId;
use regex::{Nfa, Regex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SmtOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
    Not,
    And,
    Or,
    Add,
    Sub,
    Len,
    ToInt,
    Concat,
    Contains,
    PrefixOf,
    SuffixOf,
    InRe,
    ToRe,
    ReRange,
    ReConcat,
    ReUnion,
    ReStar,
    RePlus,
    ReOpt,
}

impl SmtOp {
    pub fn from_name(name: &str) -> Option<SmtOp> {
        use SmtOp::*;
        Some(match name {
            "=" => Eq,
            "<" => Lt,
            "<=" => Le,
            ">" => Gt,
            ">=" => Ge,
            "not" => Not,
            "and" => And,
            "or" => Or,
            "+" => Add,
            "-" => Sub,
            "str.len" => Len,
            "str.to_int" | "str.to.int" => ToInt,
            "str.++" => Concat,
            "str.contains" => Contains,
            "str.prefixof" => PrefixOf,
            "str.suffixof" => SuffixOf,
            "str.in_re" | "str.in.re" => InRe,
            "str.to_re" | "str.to.re" => ToRe,
            "re.range" => ReRange,
            "re.++" => ReConcat,
            "re.union" => ReUnion,
            "re.*" => ReStar,
            "re.+" => RePlus,
            "re.opt" => ReOpt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        use SmtOp::*;
        match self {
            Eq => "=",
            Lt => "<",
            Le => "<=",
            Gt => ">",
            Ge => ">=",
            Not => "not",
            And => "and",
            Or => "or",
            Add => "+",
            Sub => "-",
            Len => "str.len",
            ToInt => "str.to_int",
            Concat => "str.++",
            Contains => "str.contains",
            PrefixOf => "str.prefixof",
            SuffixOf => "str.suffixof",
            InRe => "str.in_re",
            ToRe => "str.to_re",
            ReRange => "re.range",
            ReConcat => "re.++",
            ReUnion => "re.union",
            ReStar => "re.*",
            RePlus => "re.+",
            ReOpt => "re.opt",
        }
    }

    /// Operators whose result sort is Bool.
    pub fn is_predicate(self) -> bool {
        use SmtOp::*;
        matches!(self, Eq | Lt | Le | Gt | Ge | Not | And | Or | Contains | PrefixOf | SuffixOf | InRe)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sort {
    Bool,
    Int,
    Str,
    Re,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SmtTerm {
    Bool(bool),
    Int(i64),
    Str(Arc<str>),
    Var(Var),
    Node(NodeId),
    AllChar,
    App(SmtOp, Vec<SmtTerm>),
}

/// Parenthesized prefix syntax as read by the constraint parser.
#[derive(Clone, Debug, PartialEq)]
pub enum SExpr {
    Atom(String),
    Str(String),
    List(Vec<SExpr>),
}

impl SmtTerm {
    pub fn app(op: SmtOp, args: Vec<SmtTerm>) -> SmtTerm {
        SmtTerm::App(op, args)
    }

    pub fn str(s: &str) -> SmtTerm {
        SmtTerm::Str(Arc::from(s))
    }

    /// Converts an s-expression; `lookup` resolves identifiers to variables.
    pub fn from_sexpr(e: &SExpr, lookup: &dyn Fn(&str) -> Option<Var>) -> Result<SmtTerm, FormulaError> {
        let t = Self::convert(e, lookup)?;
        match t.sort()? {
            Sort::Bool => Ok(t),
            _ => Err(FormulaError::Sort(format!("atom {t} is not boolean"))),
        }
    }

    fn convert(e: &SExpr, lookup: &dyn Fn(&str) -> Option<Var>) -> Result<SmtTerm, FormulaError> {
        match e {
            SExpr::Str(s) => Ok(SmtTerm::str(s)),
            SExpr::Atom(a) => {
                if let Ok(i) = a.parse::<i64>() {
                    return Ok(SmtTerm::Int(i));
                }
                match a.as_str() {
                    "true" => Ok(SmtTerm::Bool(true)),
                    "false" => Ok(SmtTerm::Bool(false)),
                    "re.allchar" => Ok(SmtTerm::AllChar),
                    _ => lookup(a)
                        .map(SmtTerm::Var)
                        .ok_or_else(|| FormulaError::UnknownVariable(a.clone())),
                }
            }
            SExpr::List(items) => {
                let (head, rest) = items
                    .split_first()
                    .ok_or_else(|| FormulaError::Sort("empty application".into()))?;
                let SExpr::Atom(name) = head else {
                    return Err(FormulaError::Sort("application head must be a symbol".into()));
                };
                let op = SmtOp::from_name(name)
                    .ok_or_else(|| FormulaError::Sort(format!("unknown SMT function {name}")))?;
                let args = rest
                    .iter()
                    .map(|a| Self::convert(a, lookup))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(SmtTerm::App(op, args))
            }
        }
    }

    /// Sort inference; rejects ill-sorted terms.
    pub fn sort(&self) -> Result<Sort, FormulaError> {
        use SmtOp::*;
        let bad = |msg: String| Err(FormulaError::Sort(msg));
        match self {
            SmtTerm::Bool(_) => Ok(Sort::Bool),
            SmtTerm::Int(_) => Ok(Sort::Int),
            SmtTerm::Str(_) | SmtTerm::Var(_) | SmtTerm::Node(_) => Ok(Sort::Str),
            SmtTerm::AllChar => Ok(Sort::Re),
            SmtTerm::App(op, args) => {
                let sorts = args.iter().map(|a| a.sort()).collect::<Result<Vec<_>, _>>()?;
                let all = |s: Sort| sorts.iter().all(|x| *x == s);
                let arity = |n: usize| sorts.len() == n;
                let ok = match op {
                    Eq => sorts.len() >= 2 && sorts.iter().all(|s| *s == sorts[0]),
                    Lt | Le | Gt | Ge => arity(2) && all(Sort::Int),
                    Not => arity(1) && all(Sort::Bool),
                    And | Or => !sorts.is_empty() && all(Sort::Bool),
                    Add | Sub => sorts.len() >= 2 && all(Sort::Int),
                    Len | ToInt => arity(1) && all(Sort::Str),
                    Concat => sorts.len() >= 2 && all(Sort::Str),
                    Contains | PrefixOf | SuffixOf => arity(2) && all(Sort::Str),
                    InRe => arity(2) && sorts[0] == Sort::Str && sorts[1] == Sort::Re,
                    ToRe => arity(1) && all(Sort::Str),
                    ReRange => {
                        arity(2)
                            && args
                                .iter()
                                .all(|a| matches!(a, SmtTerm::Str(s) if s.chars().count() == 1))
                    }
                    ReConcat | ReUnion => !sorts.is_empty() && all(Sort::Re),
                    ReStar | RePlus | ReOpt => arity(1) && all(Sort::Re),
                };
                if !ok {
                    return bad(format!("ill-sorted application {self}"));
                }
                Ok(match op {
                    Add | Sub | Len | ToInt => Sort::Int,
                    Concat => Sort::Str,
                    ToRe | ReRange | ReConcat | ReUnion | ReStar | RePlus | ReOpt => Sort::Re,
                    _ => Sort::Bool,
                })
            }
        }
    }

    /// Free variables and node references, in first-occurrence order.
    pub fn references(&self, out: &mut Vec<Term>) {
        match self {
            SmtTerm::Var(v) => {
                let t = Term::Var(v.clone());
                if !out.contains(&t) {
                    out.push(t);
                }
            }
            SmtTerm::Node(n) => {
                let t = Term::Node(*n);
                if !out.contains(&t) {
                    out.push(t);
                }
            }
            SmtTerm::App(_, args) => args.iter().for_each(|a| a.references(out)),
            _ => {}
        }
    }

    /// Replaces variables (by name) with node references or literals.
    pub fn substitute(&self, map: &BTreeMap<Arc<str>, Term>) -> SmtTerm {
        match self {
            SmtTerm::Var(v) => match map.get(&v.name) {
                Some(Term::Node(n)) => SmtTerm::Node(*n),
                Some(Term::Str(s)) => SmtTerm::Str(s.clone()),
                Some(Term::Var(w)) => SmtTerm::Var(w.clone()),
                None => self.clone(),
            },
            SmtTerm::App(op, args) => SmtTerm::App(*op, args.iter().map(|a| a.substitute(map)).collect()),
            _ => self.clone(),
        }
    }

    /// Replaces node references by string literals.
    pub fn substitute_nodes(&self, map: &BTreeMap<NodeId, String>) -> SmtTerm {
        match self {
            SmtTerm::Node(n) => match map.get(n) {
                Some(s) => SmtTerm::str(s),
                None => self.clone(),
            },
            SmtTerm::App(op, args) => SmtTerm::App(*op, args.iter().map(|a| a.substitute_nodes(map)).collect()),
            _ => self.clone(),
        }
    }

    pub fn negate(self) -> SmtTerm {
        match self {
            SmtTerm::App(SmtOp::Not, mut args) if args.len() == 1 => args.pop().unwrap(),
            SmtTerm::Bool(b) => SmtTerm::Bool(!b),
            t => SmtTerm::App(SmtOp::Not, vec![t]),
        }
    }

    /// String and integer literals occurring in the term.
    pub fn literals(&self, strings: &mut BTreeSet<String>, ints: &mut BTreeSet<i64>) {
        match self {
            SmtTerm::Str(s) => {
                strings.insert(s.to_string());
            }
            SmtTerm::Int(i) => {
                ints.insert(*i);
            }
            SmtTerm::App(_, args) => args.iter().for_each(|a| a.literals(strings, ints)),
            _ => {}
        }
    }
}

impl fmt::Display for SmtTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmtTerm::Bool(b) => write!(f, "{b}"),
            SmtTerm::Int(i) => write!(f, "{i}"),
            SmtTerm::Str(s) => write!(f, "\"{}\"", escape_terminal(s)),
            SmtTerm::Var(v) => write!(f, "{}", v.name),
            SmtTerm::Node(n) => write!(f, "{n}"),
            SmtTerm::AllChar => write!(f, "re.allchar"),
            SmtTerm::App(op, args) => {
                write!(f, "({}", op.name())?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Supplies string values for variables and node references.
pub trait Resolver {
    fn var(&self, v: &Var) -> Option<String>;
    fn node(&self, id: NodeId) -> Option<String>;
}

impl<F, G> Resolver for (F, G)
where
    F: Fn(&Var) -> Option<String>,
    G: Fn(NodeId) -> Option<String>,
{
    fn var(&self, v: &Var) -> Option<String> {
        (self.0)(v)
    }

    fn node(&self, id: NodeId) -> Option<String> {
        (self.1)(id)
    }
}

/// Resolver over a plain name/node map.
#[derive(Default, Debug, Clone)]
pub struct MapResolver {
    pub vars: BTreeMap<Arc<str>, String>,
    pub nodes: BTreeMap<NodeId, String>,
}

impl Resolver for MapResolver {
    fn var(&self, v: &Var) -> Option<String> {
        self.vars.get(&v.name).cloned()
    }

    fn node(&self, id: NodeId) -> Option<String> {
        self.nodes.get(&id).cloned()
    }
}

#[derive(Clone, Debug)]
enum Value {
    Bool(bool),
    /// `None` is the value of `str.to_int` on a non-numeric string; any
    /// comparison involving it is false.
    Int(Option<i64>),
    Str(String),
    Re(Regex),
}

/// Evaluates a ground boolean term.
pub fn eval_ground(term: &SmtTerm, r: &dyn Resolver) -> Result<bool, EvalError> {
    match eval(term, r)? {
        Value::Bool(b) => Ok(b),
        _ => Err(EvalError::Sort(format!("{term} is not boolean"))),
    }
}

/// Evaluates a ground integer term; `None` if it is not ground, not an
/// integer, or has no value.
pub fn eval_int(term: &SmtTerm, r: &dyn Resolver) -> Option<i64> {
    match eval(term, r).ok()? {
        Value::Int(i) => i,
        _ => None,
    }
}

fn eval(term: &SmtTerm, r: &dyn Resolver) -> Result<Value, EvalError> {
    use SmtOp::*;
    Ok(match term {
        SmtTerm::Bool(b) => Value::Bool(*b),
        SmtTerm::Int(i) => Value::Int(Some(*i)),
        SmtTerm::Str(s) => Value::Str(s.to_string()),
        SmtTerm::Var(v) => Value::Str(r.var(v).ok_or_else(|| EvalError::Unresolved(v.name.to_string()))?),
        SmtTerm::Node(n) => Value::Str(r.node(*n).ok_or_else(|| EvalError::Unresolved(n.to_string()))?),
        SmtTerm::AllChar => Value::Re(Regex::AnyChar),
        SmtTerm::App(op, args) => {
            let vals = args.iter().map(|a| eval(a, r)).collect::<Result<Vec<_>, _>>()?;
            let sort_err = || EvalError::Sort(format!("ill-sorted {term}"));
            let int = |v: &Value| match v {
                Value::Int(i) => Ok(*i),
                _ => Err(sort_err()),
            };
            let string = |v: &Value| match v {
                Value::Str(s) => Ok(s.clone()),
                _ => Err(sort_err()),
            };
            let boolean = |v: &Value| match v {
                Value::Bool(b) => Ok(*b),
                _ => Err(sort_err()),
            };
            let re = |v: &Value| match v {
                Value::Re(x) => Ok(x.clone()),
                _ => Err(sort_err()),
            };
            let cmp = |f: fn(i64, i64) -> bool| -> Result<Value, EvalError> {
                let (a, b) = (int(&vals[0])?, int(&vals[1])?);
                Ok(Value::Bool(matches!((a, b), (Some(a), Some(b)) if f(a, b))))
            };
            match op {
                Eq => {
                    let mut all = true;
                    for w in vals.windows(2) {
                        all &= match (&w[0], &w[1]) {
                            (Value::Int(Some(a)), Value::Int(Some(b))) => a == b,
                            (Value::Int(_), Value::Int(_)) => false,
                            (Value::Str(a), Value::Str(b)) => a == b,
                            (Value::Bool(a), Value::Bool(b)) => a == b,
                            _ => return Err(sort_err()),
                        };
                    }
                    Value::Bool(all)
                }
                Lt => cmp(|a, b| a < b)?,
                Le => cmp(|a, b| a <= b)?,
                Gt => cmp(|a, b| a > b)?,
                Ge => cmp(|a, b| a >= b)?,
                Not => Value::Bool(!boolean(&vals[0])?),
                And => Value::Bool(vals.iter().map(boolean).collect::<Result<Vec<_>, _>>()?.into_iter().all(|b| b)),
                Or => Value::Bool(vals.iter().map(boolean).collect::<Result<Vec<_>, _>>()?.into_iter().any(|b| b)),
                Add | Sub => {
                    let mut acc = int(&vals[0])?;
                    for v in &vals[1..] {
                        let x = int(v)?;
                        acc = match (acc, x) {
                            (Some(a), Some(b)) if *op == Add => a.checked_add(b),
                            (Some(a), Some(b)) => a.checked_sub(b),
                            _ => None,
                        };
                    }
                    Value::Int(acc)
                }
                Len => Value::Int(Some(string(&vals[0])?.chars().count() as i64)),
                ToInt => Value::Int(to_int(&string(&vals[0])?)),
                Concat => Value::Str(vals.iter().map(string).collect::<Result<Vec<_>, _>>()?.concat()),
                Contains => Value::Bool(string(&vals[0])?.contains(&string(&vals[1])?)),
                PrefixOf => Value::Bool(string(&vals[1])?.starts_with(&string(&vals[0])?)),
                SuffixOf => Value::Bool(string(&vals[1])?.ends_with(&string(&vals[0])?)),
                InRe => Value::Bool(Nfa::compile(&re(&vals[1])?).matches(&string(&vals[0])?)),
                ToRe => Value::Re(Regex::Literal(string(&vals[0])?)),
                ReRange => {
                    let a = string(&vals[0])?.chars().next().ok_or_else(sort_err)?;
                    let b = string(&vals[1])?.chars().next().ok_or_else(sort_err)?;
                    Value::Re(Regex::Range(a, b))
                }
                ReConcat => Value::Re(Regex::Concat(vals.iter().map(re).collect::<Result<_, _>>()?)),
                ReUnion => Value::Re(Regex::Union(vals.iter().map(re).collect::<Result<_, _>>()?)),
                ReStar => Value::Re(Regex::Star(Box::new(re(&vals[0])?))),
                RePlus => Value::Re(Regex::Plus(Box::new(re(&vals[0])?))),
                ReOpt => Value::Re(Regex::Opt(Box::new(re(&vals[0])?))),
            }
        }
    })
}

/// Decimal value of a string of ASCII digits; `None` otherwise.
pub fn to_int(s: &str) -> Option<i64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}
