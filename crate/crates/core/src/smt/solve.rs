//! Model search for conjunctions of SMT atoms whose unknowns are open
//! derivation trees or numeric constants.
//!
//! Candidates for each unknown come from literal and equality hints
//! (parsed and grafted into the open subtree), from exhaustive closure
//! enumeration when the closure space is small, and otherwise from
//! length-directed random completion guided by `str.len` bounds. Every
//! model is checked with [`eval_ground`] before it is returned.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{eval, eval_ground, MapResolver, SmtOp, SmtTerm, Sort, Value};
use crate::error::FormulaError;
use crate::formula::{Term, Var};
use crate::grammar::Grammar;
use crate::parser::parse_as;
use crate::sample::{closure_lengths, complete_with_length};
use crate::tree::{enumerate_closures, refine, DerivationTree};

/// Bound on NUM values.
pub const INT_BOUND: i64 = 1_000_000;

const SAMPLES_PER_LENGTH: usize = 4;
const MAX_LENGTHS: usize = 12;
const MAX_CANDIDATES: usize = 80;
const EXHAUSTIVE_LIMIT: usize = 256;

#[derive(Clone, Debug)]
pub enum SmtVar {
    /// A node reference or tree variable with its current, possibly open,
    /// subtree.
    Tree { key: Term, current: DerivationTree },
    Num(Var),
}

impl SmtVar {
    pub fn key(&self) -> Term {
        match self {
            SmtVar::Tree { key, .. } => key.clone(),
            SmtVar::Num(v) => Term::Var(v.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SmtValue {
    Tree(DerivationTree),
    Num(String),
}

impl SmtValue {
    pub fn text(&self) -> String {
        match self {
            SmtValue::Tree(t) => t.yield_str().unwrap_or_default(),
            SmtValue::Num(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SmtModel {
    pub values: BTreeMap<Term, SmtValue>,
}

impl SmtModel {
    fn texts(&self) -> BTreeMap<Term, String> {
        self.values.iter().map(|(k, v)| (k.clone(), v.text())).collect()
    }
}

pub struct SmtQuery<'a> {
    pub g: &'a Grammar,
    pub atoms: Vec<SmtTerm>,
    pub vars: Vec<SmtVar>,
    /// Values of already determined variables and nodes.
    pub fixed: MapResolver,
    pub blocked: Vec<SmtModel>,
    /// Maximal number of models to return.
    pub budget: usize,
    /// Height bound for exhaustive closure enumeration.
    pub max_depth: usize,
    pub seed: u64,
    /// Maximal number of candidate assignments examined.
    pub effort: usize,
    /// Enumerate every closure up to `max_depth` instead of sampling.
    pub exhaustive: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveOutcome {
    Unsat,
    Models(Vec<SmtModel>),
}

struct Search<'q, 'a> {
    q: &'q SmtQuery<'a>,
    keys: Vec<Term>,
    /// Atoms to check once the unknown at this level is assigned.
    checks: Vec<Vec<usize>>,
    rng: ChaCha8Rng,
    work: usize,
    assigned: Vec<SmtValue>,
    models: Vec<SmtModel>,
    blocked: BTreeSet<BTreeMap<Term, String>>,
}

fn atom_keys(atom: &SmtTerm) -> Vec<Term> {
    let mut refs = Vec::new();
    atom.references(&mut refs);
    refs
}

/// Searches for up to `budget` models of the conjunction. Sort errors are
/// reported; an exhausted or cut-off search without models is `Unsat`.
pub fn solve(q: &SmtQuery) -> Result<SolveOutcome, FormulaError> {
    for a in &q.atoms {
        if a.sort()? != Sort::Bool {
            return Err(FormulaError::Sort(format!("atom {a} is not boolean")));
        }
    }
    let keys: Vec<Term> = q.vars.iter().map(|v| v.key()).collect();
    let mut checks = vec![Vec::new(); keys.len()];
    for (i, a) in q.atoms.iter().enumerate() {
        let level = atom_keys(a).iter().filter_map(|k| keys.iter().position(|x| x == k)).max();
        match level {
            Some(l) => checks[l].push(i),
            None => {
                let ok = eval_ground(a, &q.fixed).unwrap_or(false);
                if !ok {
                    return Ok(SolveOutcome::Unsat);
                }
            }
        }
    }
    let mut s = Search {
        q,
        keys,
        checks,
        rng: ChaCha8Rng::seed_from_u64(q.seed),
        work: 0,
        assigned: Vec::new(),
        models: Vec::new(),
        blocked: q.blocked.iter().map(|m| m.texts()).collect(),
    };
    s.descend();
    Ok(if s.models.is_empty() {
        SolveOutcome::Unsat
    } else {
        SolveOutcome::Models(s.models)
    })
}

impl<'q, 'a> Search<'q, 'a> {
    fn resolver(&self) -> MapResolver {
        let mut r = self.q.fixed.clone();
        for (k, v) in self.keys.iter().zip(&self.assigned) {
            match k {
                Term::Var(var) => {
                    r.vars.insert(var.name.clone(), v.text());
                }
                Term::Node(n) => {
                    r.nodes.insert(*n, v.text());
                }
                Term::Str(_) => {}
            }
        }
        r
    }

    fn done(&self) -> bool {
        self.models.len() >= self.q.budget || self.work >= self.q.effort
    }

    fn descend(&mut self) {
        if self.done() {
            return;
        }
        let level = self.assigned.len();
        if level == self.keys.len() {
            let model = SmtModel {
                values: self.keys.iter().cloned().zip(self.assigned.iter().cloned()).collect(),
            };
            let texts = model.texts();
            if self.blocked.insert(texts) {
                self.models.push(model);
            }
            return;
        }
        for cand in self.candidates(level) {
            if self.done() {
                return;
            }
            self.work += 1;
            self.assigned.push(cand);
            let r = self.resolver();
            let ok = self.checks[level]
                .iter()
                .all(|&i| eval_ground(&self.q.atoms[i], &r).unwrap_or(false));
            if ok {
                self.descend();
            }
            self.assigned.pop();
        }
    }

    /// Atoms mentioning the unknown at `level`.
    fn related(&self, level: usize) -> Vec<&SmtTerm> {
        let key = &self.keys[level];
        self.q.atoms.iter().filter(|a| atom_keys(a).contains(key)).collect()
    }

    fn candidates(&mut self, level: usize) -> Vec<SmtValue> {
        let r = self.resolver();
        let key = self.keys[level].clone();
        let related: Vec<SmtTerm> = self.related(level).into_iter().cloned().collect();
        let mut len = Interval::full();
        let mut num = Interval::full();
        let mut hints: BTreeSet<String> = BTreeSet::new();
        for a in &related {
            bounds(a, &key, &r, false, &mut len, &mut num);
            let mut ints = BTreeSet::new();
            a.literals(&mut hints, &mut ints);
            hints.extend(ints.iter().map(|i| i.to_string()));
            let mut refs = Vec::new();
            a.references(&mut refs);
            for other in refs {
                if other == key {
                    continue;
                }
                let v = match &other {
                    Term::Var(v) => r.vars.get(&v.name).cloned(),
                    Term::Node(n) => r.nodes.get(n).cloned(),
                    Term::Str(_) => None,
                };
                hints.extend(v);
            }
        }
        if num.lo > num.hi || len.lo > len.hi {
            return Vec::new();
        }
        if num.lo.max(0) <= num.hi.min(INT_BOUND) && (num.hi - num.lo.max(0)) <= 64 {
            hints.extend((num.lo.max(0)..=num.hi.min(INT_BOUND)).map(|i| i.to_string()));
        }
        match self.q.vars[level].clone() {
            SmtVar::Num(_) => self.num_candidates(num, &hints),
            SmtVar::Tree { current, .. } => self.tree_candidates(&current, len, &hints),
        }
    }

    fn num_candidates(&mut self, num: Interval, hints: &BTreeSet<String>) -> Vec<SmtValue> {
        let lo = num.lo.max(0);
        let hi = num.hi.min(INT_BOUND);
        let mut out: Vec<i64> = Vec::new();
        for h in hints {
            if let Some(i) = super::to_int(h) {
                if (lo..=hi).contains(&i) && !out.contains(&i) {
                    out.push(i);
                }
            }
        }
        let span = hi.saturating_sub(lo);
        if span <= MAX_CANDIDATES as i64 {
            let rest: Vec<i64> = (lo..=hi).filter(|i| !out.contains(i)).collect();
            out.extend(rest);
            out.shuffle(&mut self.rng);
        } else {
            for i in lo..(lo + 16).min(hi + 1) {
                if !out.contains(&i) {
                    out.push(i);
                }
            }
            for _ in 0..16 {
                let i = self.rng.gen_range(lo..=hi);
                if !out.contains(&i) {
                    out.push(i);
                }
            }
        }
        out.into_iter().map(|i| SmtValue::Num(i.to_string())).collect()
    }

    fn tree_candidates(&mut self, current: &DerivationTree, len: Interval, hints: &BTreeSet<String>) -> Vec<SmtValue> {
        if current.is_closed() {
            return vec![SmtValue::Tree(current.clone())];
        }
        let g = self.q.g;
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut out = Vec::new();
        let mut next = current.max_id().0 + 1;
        let push = |t: DerivationTree, seen: &mut BTreeSet<String>, out: &mut Vec<SmtValue>| {
            if let Ok(y) = t.yield_str() {
                let l = y.chars().count() as i64;
                if l >= len.lo && l <= len.hi && seen.insert(y) {
                    out.push(SmtValue::Tree(t));
                }
            }
        };
        for h in hints {
            if let Ok(parsed) = parse_as(g, current.label(), h) {
                if let Some(t) = refine(current, &parsed, &mut next) {
                    push(t, &mut seen, &mut out);
                }
            }
        }
        let from_hints = out.len();
        let closures = bounded_closures(g, current, self.q.max_depth, self.q.exhaustive);
        if let Some(all) = closures {
            for t in all {
                push(t, &mut seen, &mut out);
            }
            if !self.q.exhaustive {
                out[from_hints..].shuffle(&mut self.rng);
            }
            return out;
        }
        let lengths: Vec<usize> = closure_lengths(g, current)
            .into_iter()
            .filter(|&l| (l as i64) >= len.lo && (l as i64) <= len.hi)
            .take(MAX_LENGTHS)
            .collect();
        for l in lengths {
            for _ in 0..SAMPLES_PER_LENGTH {
                if out.len() >= MAX_CANDIDATES {
                    break;
                }
                if let Some(t) = complete_with_length(g, current, l, &mut self.rng) {
                    push(t, &mut seen, &mut out);
                }
            }
        }
        out[from_hints..].shuffle(&mut self.rng);
        out
    }
}

/// All closures of `t` when the closure space is finite and small, or all
/// closures up to `depth` in exhaustive mode.
fn bounded_closures(g: &Grammar, t: &DerivationTree, depth: usize, exhaustive: bool) -> Option<Vec<DerivationTree>> {
    if exhaustive {
        return Some(enumerate_closures(g, t, depth));
    }
    let leaves = t.open_leaves();
    if leaves.len() > 4 || leaves.iter().any(|l| finite_height(g, l.label()).is_none()) {
        return None;
    }
    let height = leaves.iter().filter_map(|l| finite_height(g, l.label())).max().unwrap_or(1);
    let mut estimate: usize = 1;
    for l in &leaves {
        let n = crate::tree::closed_trees(g, l.label(), height).len();
        estimate = estimate.saturating_mul(n.max(1));
        if estimate > EXHAUSTIVE_LIMIT {
            return None;
        }
    }
    Some(enumerate_closures(g, t, height))
}

/// Height of the tallest closed tree of `nt`, if its language is finite.
fn finite_height(g: &Grammar, nt: &str) -> Option<usize> {
    if g.is_recursive(nt) || g.nonterminals().any(|n| g.reaches_or_is(nt, n) && g.is_recursive(n)) {
        return None;
    }
    Some(g.nonterminals().filter(|n| g.reaches_or_is(nt, n)).count() + 1)
}

#[derive(Clone, Copy, Debug)]
struct Interval {
    lo: i64,
    hi: i64,
}

impl Interval {
    fn full() -> Self {
        Interval {
            lo: i64::MIN / 4,
            hi: i64::MAX / 4,
        }
    }

    fn apply(&mut self, op: SmtOp, k: i64, flipped: bool, negated: bool) {
        use SmtOp::*;
        let mut op = op;
        if flipped {
            op = match op {
                Lt => Gt,
                Gt => Lt,
                Le => Ge,
                Ge => Le,
                o => o,
            };
        }
        if negated {
            op = match op {
                Lt => Ge,
                Ge => Lt,
                Gt => Le,
                Le => Gt,
                _ => return,
            };
        }
        match op {
            Lt => self.hi = self.hi.min(k - 1),
            Le => self.hi = self.hi.min(k),
            Gt => self.lo = self.lo.max(k + 1),
            Ge => self.lo = self.lo.max(k),
            Eq => {
                self.lo = self.lo.max(k);
                self.hi = self.hi.min(k);
            }
            _ => {}
        }
    }
}

/// Narrows the length and integer intervals of `key` from comparisons
/// against terms that are already ground under `r`.
fn bounds(t: &SmtTerm, key: &Term, r: &MapResolver, negated: bool, len: &mut Interval, num: &mut Interval) {
    let SmtTerm::App(op, args) = t else { return };
    match op {
        SmtOp::And if !negated => args.iter().for_each(|a| bounds(a, key, r, false, len, num)),
        SmtOp::Or if negated => args.iter().for_each(|a| bounds(a, key, r, true, len, num)),
        SmtOp::Not => bounds(&args[0], key, r, !negated, len, num),
        SmtOp::Lt | SmtOp::Le | SmtOp::Gt | SmtOp::Ge | SmtOp::Eq if args.len() == 2 => {
            for (side, flipped) in [(0usize, false), (1, true)] {
                let (mine, other) = (&args[side], &args[1 - side]);
                let Some(k) = ground_int(other, r) else { continue };
                if let SmtTerm::App(f, inner) = mine {
                    if inner.len() == 1 && is_key(&inner[0], key) {
                        match f {
                            SmtOp::Len => len.apply(*op, k, flipped, negated),
                            SmtOp::ToInt => num.apply(*op, k, flipped, negated),
                            _ => {}
                        }
                    }
                }
            }
        }
        _ => {}
    }
}

fn is_key(t: &SmtTerm, key: &Term) -> bool {
    match (t, key) {
        (SmtTerm::Var(v), Term::Var(k)) => v.name == k.name,
        (SmtTerm::Node(n), Term::Node(k)) => n == k,
        _ => false,
    }
}

fn ground_int(t: &SmtTerm, r: &MapResolver) -> Option<i64> {
    match eval(t, r) {
        Ok(Value::Int(i)) => i,
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{read_sexpr, VarType};
    use crate::grammar::parse_grammar;
    use crate::tree::NodeId;

    fn id_grammar() -> Grammar {
        parse_grammar("<id> ::= <c> | <c> <id>\n<c> ::= \"a\" | \"b\" | \"c\"").unwrap()
    }

    fn atom(src: &str, vars: &[Var]) -> SmtTerm {
        let e = read_sexpr(src).unwrap();
        SmtTerm::from_sexpr(&e, &|n| vars.iter().find(|v| &*v.name == n).cloned()).unwrap()
    }

    fn query<'a>(g: &'a Grammar, atoms: Vec<SmtTerm>, vars: Vec<SmtVar>, budget: usize) -> SmtQuery<'a> {
        SmtQuery {
            g,
            atoms,
            vars,
            fixed: MapResolver::default(),
            blocked: Vec::new(),
            budget,
            max_depth: 4,
            seed: 3,
            effort: 10_000,
            exhaustive: false,
        }
    }

    #[test]
    fn length_three_ids() {
        let g = id_grammar();
        let v = Var::tree("v", "<id>");
        let vars = vec![SmtVar::Tree {
            key: Term::Var(v.clone()),
            current: DerivationTree::open_leaf(NodeId(1), "<id>"),
        }];
        let q = query(&g, vec![atom("(= (str.len v) 3)", &[v.clone()])], vars, 5);
        let SolveOutcome::Models(ms) = solve(&q).unwrap() else { panic!() };
        assert!(!ms.is_empty());
        let all: BTreeSet<String> = g.enumerate_strings_from("<id>", 5).into_iter().filter(|s| s.len() == 3).collect();
        for m in &ms {
            let y = m.values[&Term::Var(v.clone())].text();
            assert!(all.contains(&y), "{y}");
        }
    }

    #[test]
    fn unsat_is_false() {
        let g = id_grammar();
        let n = Var::new("x", VarType::Num);
        let q = query(&g, vec![atom("(< (str.to_int x) (str.to_int x))", &[n.clone()])], vec![SmtVar::Num(n)], 1);
        assert_eq!(solve(&q).unwrap(), SolveOutcome::Unsat);
    }

    #[test]
    fn blocking_yields_new_models() {
        let g = id_grammar();
        let v = Var::tree("v", "<id>");
        let vars = vec![SmtVar::Tree {
            key: Term::Var(v.clone()),
            current: DerivationTree::open_leaf(NodeId(1), "<id>"),
        }];
        let a = vec![atom("(= (str.len v) 2)", &[v.clone()])];
        let mut q = query(&g, a, vars, 1);
        let SolveOutcome::Models(first) = solve(&q).unwrap() else { panic!() };
        q.blocked = first.clone();
        let SolveOutcome::Models(second) = solve(&q).unwrap() else { panic!() };
        assert_ne!(first[0].texts(), second[0].texts());
    }

    #[test]
    fn equality_between_open_trees() {
        let g = id_grammar();
        let (a, b) = (Var::tree("a", "<id>"), Var::tree("b", "<id>"));
        let vars = vec![
            SmtVar::Tree {
                key: Term::Var(a.clone()),
                current: DerivationTree::open_leaf(NodeId(1), "<id>"),
            },
            SmtVar::Tree {
                key: Term::Var(b.clone()),
                current: DerivationTree::open_leaf(NodeId(2), "<id>"),
            },
        ];
        let atoms = vec![atom("(= a b)", &[a.clone(), b.clone()]), atom("(= (str.len a) 17)", &[a.clone()])];
        let SolveOutcome::Models(ms) = solve(&query(&g, atoms, vars, 2)).unwrap() else { panic!() };
        for m in ms {
            let (x, y) = (m.values[&Term::Var(a.clone())].text(), m.values[&Term::Var(b.clone())].text());
            assert_eq!(x, y);
            assert_eq!(x.len(), 17);
        }
    }

    #[test]
    fn numeric_interval() {
        let g = id_grammar();
        let n = Var::new("n", VarType::Num);
        let atoms = vec![atom("(and (>= (str.to_int n) 3) (<= (str.to_int n) 5))", &[n.clone()])];
        let SolveOutcome::Models(ms) = solve(&query(&g, atoms, vec![SmtVar::Num(n.clone())], 10)).unwrap() else {
            panic!()
        };
        let got: BTreeSet<String> = ms.iter().map(|m| m.values[&Term::Var(n.clone())].text()).collect();
        assert_eq!(got, ["3", "4", "5"].iter().map(|s| s.to_string()).collect());
    }
}
