//! Validity of formulas on closed derivation trees.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::error::{EvalError, PredicateError, TreeError};
use crate::formula::{Formula, PredAtom, Quantified, Term, Var, VarType};
use crate::grammar::Grammar;
use crate::predicates::{ArgKind, PArg, Registry, SemPredResult};
use crate::smt::{eval_ground, Resolver, SmtOp, SmtTerm};
use crate::tree::{enumerate_closures, DerivationTree, NodeId};

/// Largest numeric witness tried for `exists int`.
pub const MAX_WITNESS: i64 = 999_999;
/// Domains up to this size are searched exhaustively.
const FULL_SEARCH: i64 = 2_000;
const PARTIAL_SEARCH: i64 = 200;

/// Values for free variables: tree variables name nodes of the evaluated
/// tree, numeric variables carry decimal strings.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment {
    pub trees: BTreeMap<Arc<str>, NodeId>,
    pub nums: BTreeMap<Arc<str>, String>,
}

impl Assignment {
    /// Binds `start` to the root of `t`.
    pub fn start(t: &DerivationTree) -> Self {
        let mut a = Assignment::default();
        a.trees.insert(Arc::from("start"), t.id());
        a
    }
}

pub struct Evaluator<'a> {
    pub g: &'a Grammar,
    pub registry: &'a Registry,
    pub tree: &'a DerivationTree,
}

struct Env<'e> {
    tree: &'e DerivationTree,
    a: &'e Assignment,
}

impl Resolver for Env<'_> {
    fn var(&self, v: &Var) -> Option<String> {
        match v.ty {
            VarType::Num => self.a.nums.get(&v.name).cloned(),
            VarType::Nonterminal(_) => {
                let id = self.a.trees.get(&v.name)?;
                self.tree.find(*id)?.yield_str().ok()
            }
        }
    }

    fn node(&self, id: NodeId) -> Option<String> {
        self.tree.find(id)?.yield_str().ok()
    }
}

/// Decides `f` on the closed tree `t` under `a`.
pub fn evaluate(f: &Formula, t: &DerivationTree, a: &Assignment, g: &Grammar, registry: &Registry) -> Result<bool, EvalError> {
    if t.is_open() {
        return Err(TreeError::OpenTree.into());
    }
    Evaluator { g, registry, tree: t }.eval(f, a)
}

/// Decides `f` on `t` with `start` bound to the root.
pub fn check(f: &Formula, t: &DerivationTree, g: &Grammar, registry: &Registry) -> Result<bool, EvalError> {
    evaluate(f, t, &Assignment::start(t), g, registry)
}

/// Bounded membership in the semantics of a conditioned tree: some
/// closure of `t_open` (leaf completions of height at most `depth`)
/// yields `s` and satisfies every formula in `phi`.
pub fn evaluate_cdt_membership(
    phi: &[Formula],
    t_open: &DerivationTree,
    s: &str,
    g: &Grammar,
    registry: &Registry,
    depth: usize,
) -> bool {
    enumerate_closures(g, t_open, depth).iter().any(|c| {
        c.yield_str().ok().as_deref() == Some(s)
            && phi
                .iter()
                .all(|f| evaluate(f, c, &Assignment::start(c), g, registry).unwrap_or(false))
    })
}

impl<'a> Evaluator<'a> {
    fn resolve_node(&self, t: &Term, a: &Assignment) -> Result<NodeId, EvalError> {
        match t {
            Term::Node(n) => {
                self.tree.find(*n).ok_or(TreeError::UnknownNode(*n))?;
                Ok(*n)
            }
            Term::Var(v) => a.trees.get(&v.name).copied().ok_or_else(|| EvalError::Unresolved(v.name.to_string())),
            Term::Str(s) => Err(EvalError::Sort(format!("\"{s}\" is not a tree"))),
        }
    }

    pub fn eval(&self, f: &Formula, a: &Assignment) -> Result<bool, EvalError> {
        match f {
            Formula::True => Ok(true),
            Formula::False => Ok(false),
            Formula::Not(g) => Ok(!self.eval(g, a)?),
            Formula::And(fs) => {
                for g in fs {
                    if !self.eval(g, a)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Or(fs) => {
                for g in fs {
                    if self.eval(g, a)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Forall(q) => {
                for inst in self.instances(q, a)? {
                    if !self.eval(&q.body, &inst)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Exists(q) => {
                for inst in self.instances(q, a)? {
                    if self.eval(&q.body, &inst)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::ExistsInt(v, body) => self.exists_int(v, body, a),
            Formula::Pred(p) => self.pred(p, a),
            Formula::Smt(t) => eval_ground(t, &Env { tree: self.tree, a }),
        }
    }

    /// Assignments extending `a` for every subtree of the quantifier's
    /// scope that has the right label and matches its match expression.
    pub fn instances(&self, q: &Quantified, a: &Assignment) -> Result<Vec<Assignment>, EvalError> {
        let scope = self.resolve_node(&q.scope, a)?;
        let scope = self.tree.find(scope).ok_or(TreeError::UnknownNode(scope))?;
        let mut out = Vec::new();
        for n in scope.preorder() {
            if n.is_terminal() || n.label() != q.ty() {
                continue;
            }
            let mut base = a.clone();
            base.trees.insert(q.var.name.clone(), n.id());
            match &q.mexpr {
                None => out.push(base),
                Some(m) => {
                    for b in m.match_tree(n) {
                        let mut inst = base.clone();
                        for (name, sub) in b {
                            inst.trees.insert(name, sub.id());
                        }
                        out.push(inst);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn pred_args(&self, p: &PredAtom, a: &Assignment) -> Result<Vec<PArg>, EvalError> {
        let sig = self
            .registry
            .signature(&p.name)
            .ok_or_else(|| PredicateError::Unknown(p.name.to_string()))?;
        p.args
            .iter()
            .zip(&sig.args)
            .map(|(t, k)| {
                Ok(match (k, t) {
                    (ArgKind::Node, t) => PArg::Node(self.resolve_node(t, a)?),
                    (ArgKind::Str, Term::Str(s)) => PArg::Str(s.to_string()),
                    (ArgKind::Num, Term::Str(s)) => PArg::Num(s.to_string()),
                    (ArgKind::Num, Term::Var(v)) => match a.nums.get(&v.name) {
                        Some(s) => PArg::Num(s.clone()),
                        None => return Err(EvalError::Unresolved(v.name.to_string())),
                    },
                    (_, t) => return Err(EvalError::Sort(format!("bad argument {t} for {}", p.name))),
                })
            })
            .collect()
    }

    fn pred(&self, p: &PredAtom, a: &Assignment) -> Result<bool, EvalError> {
        let args = self.pred_args(p, a)?;
        if p.semantic {
            match self.registry.eval_semantic(&p.name, self.g, self.tree, &args)? {
                SemPredResult::True => Ok(true),
                SemPredResult::False | SemPredResult::Models(_) => Ok(false),
                SemPredResult::NotReady => Err(PredicateError::NotReadyOnClosed(p.name.to_string()).into()),
            }
        } else {
            Ok(self.registry.eval_structural(&p.name, self.tree, &args)? != p.negated)
        }
    }

    fn exists_int(&self, v: &Var, body: &Formula, a: &Assignment) -> Result<bool, EvalError> {
        let (lo, hi) = self.int_domain(v, body, a);
        let lo = lo.max(0);
        if lo > hi {
            return Ok(false);
        }
        let bounded = hi <= MAX_WITNESS;
        let hi = hi.min(MAX_WITNESS);
        if lo > hi {
            return Err(EvalError::Unknown(v.name.to_string()));
        }
        let mut tried = BTreeSet::new();
        let attempt = |n: String, tried: &mut BTreeSet<String>| -> Result<bool, EvalError> {
            if !tried.insert(n.clone()) {
                return Ok(false);
            }
            let mut inst = a.clone();
            inst.nums.insert(v.name.clone(), n);
            self.eval(body, &inst)
        };
        for h in self.int_hints(v, body, a) {
            if (lo..=hi).contains(&h) && attempt(h.to_string(), &mut tried)? {
                return Ok(true);
            }
        }
        let full = bounded && hi - lo < FULL_SEARCH;
        let end = if full { hi } else { lo + PARTIAL_SEARCH };
        for n in lo..=end {
            if attempt(n.to_string(), &mut tried)? {
                return Ok(true);
            }
        }
        if full {
            Ok(false)
        } else {
            Err(EvalError::Unknown(v.name.to_string()))
        }
    }

    /// Bounds on `(str.to_int v)` from top-level conjuncts of `body`.
    fn int_domain(&self, v: &Var, body: &Formula, a: &Assignment) -> (i64, i64) {
        let mut lo = i64::MIN / 4;
        let mut hi = i64::MAX / 4;
        let env = Env { tree: self.tree, a };
        let conjuncts: Vec<&Formula> = match body {
            Formula::And(fs) => fs.iter().collect(),
            f => vec![f],
        };
        for c in conjuncts {
            let Formula::Smt(t) = c else { continue };
            let mut atoms = vec![t];
            while let Some(SmtTerm::App(op, args)) = atoms.pop() {
                if *op == SmtOp::And {
                    atoms.extend(args.iter());
                    continue;
                }
                if args.len() != 2 {
                    continue;
                }
                for (side, flipped) in [(0usize, false), (1, true)] {
                    let SmtTerm::App(SmtOp::ToInt, inner) = &args[side] else { continue };
                    if !matches!(&inner[..], [SmtTerm::Var(x)] if x.name == v.name) {
                        continue;
                    }
                    let Some(k) = ground_int(&args[1 - side], &env) else { continue };
                    let op = if flipped { flip(*op) } else { *op };
                    match op {
                        SmtOp::Lt => hi = hi.min(k - 1),
                        SmtOp::Le => hi = hi.min(k),
                        SmtOp::Gt => lo = lo.max(k + 1),
                        SmtOp::Ge => lo = lo.max(k),
                        SmtOp::Eq => {
                            lo = lo.max(k);
                            hi = hi.min(k);
                        }
                        _ => {}
                    }
                }
            }
        }
        (lo, hi)
    }

    /// Candidate witnesses: numeric literals of the body and the values
    /// `count` atoms over `v` would report.
    fn int_hints(&self, v: &Var, body: &Formula, a: &Assignment) -> Vec<i64> {
        let mut out = BTreeSet::new();
        let mut stack = vec![body];
        while let Some(f) = stack.pop() {
            match f {
                Formula::Smt(t) => {
                    let mut strs = BTreeSet::new();
                    let mut ints = BTreeSet::new();
                    t.literals(&mut strs, &mut ints);
                    out.extend(ints);
                    out.extend(strs.iter().filter_map(|s| crate::smt::to_int(s)));
                }
                Formula::Pred(p) if p.semantic => {
                    let uses_v = p.args.iter().any(|t| matches!(t, Term::Var(x) if x.name == v.name));
                    if !uses_v {
                        continue;
                    }
                    let Ok(sig) = self.registry.signature(&p.name).ok_or(()) else { continue };
                    let args: Option<Vec<PArg>> = p
                        .args
                        .iter()
                        .zip(&sig.args)
                        .map(|(t, k)| match (k, t) {
                            (ArgKind::Num, Term::Var(x)) if x.name == v.name => Some(PArg::UnsetNum(x.name.clone())),
                            (ArgKind::Node, t) => self.resolve_node(t, a).ok().map(PArg::Node),
                            (ArgKind::Str, Term::Str(s)) => Some(PArg::Str(s.to_string())),
                            (ArgKind::Num, Term::Str(s)) => Some(PArg::Num(s.to_string())),
                            (ArgKind::Num, Term::Var(x)) => a.nums.get(&x.name).cloned().map(PArg::Num),
                            _ => None,
                        })
                        .collect();
                    if let Some(args) = args {
                        if let Ok(SemPredResult::Models(ms)) = self.registry.eval_semantic(&p.name, self.g, self.tree, &args) {
                            for m in ms {
                                out.extend(m.nums.get(&v.name).and_then(|s| crate::smt::to_int(s)));
                            }
                        }
                    }
                }
                Formula::And(fs) | Formula::Or(fs) => stack.extend(fs.iter()),
                Formula::Not(g) => stack.push(g),
                _ => {}
            }
        }
        out.into_iter().collect()
    }

    /// Why `f` is false: a chain of failing sub-formulas with the node ids
    /// they were evaluated at. Empty if `f` holds.
    pub fn explain(&self, f: &Formula, a: &Assignment) -> Result<Vec<String>, EvalError> {
        if self.eval(f, a)? {
            return Ok(Vec::new());
        }
        let here = |f: &Formula, a: &Assignment| -> String {
            let binds: Vec<String> = a
                .trees
                .iter()
                .map(|(k, id)| {
                    let y = self.tree.find(*id).and_then(|n| n.yield_str().ok()).unwrap_or_default();
                    format!("{k}={id} {y:?}")
                })
                .chain(a.nums.iter().map(|(k, v)| format!("{k}={v}")))
                .collect();
            format!("{f}  [{}]", binds.join(", "))
        };
        let mut out = vec![here(f, a)];
        match f {
            Formula::And(fs) => {
                for g in fs {
                    if !self.eval(g, a)? {
                        out.extend(self.explain(g, a)?);
                        break;
                    }
                }
            }
            Formula::Forall(q) => {
                for inst in self.instances(q, a)? {
                    if !self.eval(&q.body, &inst)? {
                        out.extend(self.explain(&q.body, &inst)?);
                        break;
                    }
                }
            }
            Formula::ExistsInt(v, body) => {
                // Explain under the most plausible witness.
                let (lo, hi) = self.int_domain(v, body, a);
                let pick = self
                    .int_hints(v, body, a)
                    .into_iter()
                    .find(|h| (lo.max(0)..=hi).contains(h))
                    .or((lo.max(0) <= hi).then_some(lo.max(0)));
                if let Some(n) = pick {
                    let mut inst = a.clone();
                    inst.nums.insert(v.name.clone(), n.to_string());
                    out.extend(self.explain(body, &inst)?);
                }
            }
            _ => {}
        }
        Ok(out)
    }
}

fn flip(op: SmtOp) -> SmtOp {
    match op {
        SmtOp::Lt => SmtOp::Gt,
        SmtOp::Gt => SmtOp::Lt,
        SmtOp::Le => SmtOp::Ge,
        SmtOp::Ge => SmtOp::Le,
        o => o,
    }
}

fn ground_int(t: &SmtTerm, env: &Env) -> Option<i64> {
    match t {
        SmtTerm::Int(i) => Some(*i),
        _ => crate::smt::eval_int(t, env),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::grammar::parse_grammar;
    use crate::parser::parse_input;

    fn rest() -> Grammar {
        parse_grammar(
            "<start> ::= <section-title>\n\
             <section-title> ::= <title-txt> \"\\n\" <underline>\n\
             <title-txt> ::= <letter> | <letter> <title-txt>\n\
             <letter> ::= \"H\" | \"e\" | \"l\" | \"o\"\n\
             <underline> ::= \"=\" | \"=\" <underline>\n",
        )
        .unwrap()
    }

    const REST: &str = "forall <section-title> title=\"{<title-txt> titletxt}\\n{<underline> underline}\" in start: (>= (str.len underline) (str.len titletxt))";

    #[test]
    fn rest_length() {
        let g = rest();
        let r = Registry::standard();
        let f = parse_formula(REST, &g, &r).unwrap();
        assert!(check(&f, &parse_input(&g, "Hello\n=====").unwrap(), &g, &r).unwrap());
        assert!(!check(&f, &parse_input(&g, "Hello\n==").unwrap(), &g, &r).unwrap());
    }

    #[test]
    fn vacuous_universal() {
        let g = parse_grammar("<s> ::= \"a\" | <b>\n<b> ::= \"b\"").unwrap();
        let r = Registry::standard();
        let f = parse_formula("forall <b> x in start: false", &g, &r).unwrap();
        assert!(check(&f, &parse_input(&g, "a").unwrap(), &g, &r).unwrap());
        assert!(!check(&f, &parse_input(&g, "b").unwrap(), &g, &r).unwrap());
    }

    #[test]
    fn open_tree_rejected() {
        let g = rest();
        let r = Registry::standard();
        let f = Formula::True;
        let t = DerivationTree::open_leaf(NodeId(1), "<start>");
        assert_eq!(check(&f, &t, &g, &r), Err(EvalError::Tree(TreeError::OpenTree)));
    }

    #[test]
    fn numeric_witnesses() {
        let g = parse_grammar("<l> ::= <f> | <f> \";\" <l>\n<f> ::= \"x\"").unwrap();
        let r = Registry::standard();
        let f = parse_formula(
            "exists int n: ((>= (str.to_int n) 3) and (<= (str.to_int n) 5) and count(start, \"<f>\", n))",
            &g,
            &r,
        )
        .unwrap();
        assert!(check(&f, &parse_input(&g, "x;x;x;x").unwrap(), &g, &r).unwrap());
        assert!(!check(&f, &parse_input(&g, "x;x").unwrap(), &g, &r).unwrap());
        let open = parse_formula("exists int n: count(start, \"<f>\", n)", &g, &r).unwrap();
        assert!(check(&open, &parse_input(&g, "x;x").unwrap(), &g, &r).unwrap());
        let unknown = parse_formula("exists int n: (= (str.to_int n) 5000000)", &g, &r).unwrap();
        assert!(matches!(check(&unknown, &parse_input(&g, "x").unwrap(), &g, &r), Err(EvalError::Unknown(_))));
        let none = parse_formula("exists int n: ((< (str.to_int n) 3) and (> (str.to_int n) 5))", &g, &r).unwrap();
        assert!(!check(&none, &parse_input(&g, "x").unwrap(), &g, &r).unwrap());
        let big = parse_formula("exists int n: (= (str.len n) 9)", &g, &r).unwrap();
        assert!(matches!(check(&big, &parse_input(&g, "x").unwrap(), &g, &r), Err(EvalError::Unknown(_))));
    }

    #[test]
    fn explanation_names_failing_instance() {
        let g = rest();
        let r = Registry::standard();
        let f = parse_formula(REST, &g, &r).unwrap();
        let t = parse_input(&g, "Hello\n==").unwrap();
        let e = Evaluator { g: &g, registry: &r, tree: &t };
        let lines = e.explain(&f, &Assignment::start(&t)).unwrap();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].contains("underline="), "{lines:?}");
    }

    #[test]
    fn membership_of_root() {
        let g = parse_grammar("<s> ::= \"a\" | \"b\" <s>").unwrap();
        let r = Registry::standard();
        let root = crate::tree::root_tree(&g);
        for s in g.enumerate_strings(3) {
            assert!(evaluate_cdt_membership(&[], &root, &s, &g, &r, 3));
        }
        assert!(!evaluate_cdt_membership(&[Formula::False], &root, "a", &g, &r, 3));
    }
}
