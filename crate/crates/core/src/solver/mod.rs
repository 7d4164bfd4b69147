//! Conditioned derivation trees, their transition rules, and a best-first
//! search producing solutions.

mod insert;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use insert::{insert_tree, make_tree, MadeTree};

use crate::cost::{aggregate, constraint_cost, kpath_penalty, ClosingCosts, CostVector, GlobalCoverage, DEFAULT_K};
use crate::error::{FormulaError, SolveError};
use crate::evaluator::check;
use crate::formula::{establish_inv, Formula, PredAtom, Quantified, Term, Var, VarType};
use crate::grammar::{Grammar, Symbol};
use crate::matching::{Bindings, MElem};
use crate::predicates::{ArgKind, Model, PArg, Registry, SemPredResult};
use crate::sample::sample_with_length;
use crate::smt::{self, MapResolver, SmtQuery, SmtTerm, SmtValue, SmtVar, SolveOutcome};
use crate::tree::{closed_trees, refine, DerivationTree, NodeId};

const EXPANSION_VARIANTS: usize = 10;
const INSERTION_CEILING: usize = 3;
const INSERTION_RESULTS: usize = 4;
const SMT_MODELS: usize = 3;
const SMT_EFFORT: usize = 4_000;
const FINISH_CANDIDATES: usize = 6;
const FINISH_OUTPUTS: usize = 2;
/// How often the same state may be finished again for more outputs.
const FINISH_ROUNDS: u32 = 32;
const CLOSER_SPREAD: usize = 4;
/// Structural predicates whose value cannot change when open leaves are
/// expanded.
const STABLE_STRUCTURAL: [&str; 6] = ["before", "after", "inside", "same_position", "different_position", "direct_child"];

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub max_outputs: usize,
    /// Height bound for trees in the search.
    pub max_depth: usize,
    pub weights: CostVector,
    pub seed: u64,
    pub timeout: Option<Duration>,
    /// Re-check every output with the evaluator before emitting it.
    pub validate: bool,
    /// Explore every transition without budget pruning.
    pub exhaustive: bool,
    /// Record the transition graph.
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_outputs: 10,
            max_depth: 40,
            weights: CostVector::default(),
            seed: 1,
            timeout: None,
            validate: true,
            exhaustive: false,
            trace: false,
        }
    }
}

/// An indexed conditioned derivation tree.
#[derive(Clone, Debug)]
pub struct Cdt {
    pub constraints: Vec<Formula>,
    /// Universal formulas and the nodes they were already instantiated for.
    pub index: BTreeSet<(Formula, NodeId)>,
    pub tree: DerivationTree,
    pub steps: usize,
    next_id: u64,
    next_num: u64,
    insertions: BTreeMap<String, usize>,
    finished: u32,
}

impl Cdt {
    pub fn new(constraints: Vec<Formula>, tree: DerivationTree) -> Self {
        let next_id = tree.max_id().0 + 1;
        Cdt {
            constraints,
            index: BTreeSet::new(),
            tree,
            steps: 0,
            next_id,
            next_num: 0,
            insertions: BTreeMap::new(),
            finished: 0,
        }
    }

    pub fn is_final(&self) -> bool {
        self.constraints.is_empty() && self.tree.is_closed()
    }

    fn fresh(&self) -> u64 {
        self.next_id.max(self.tree.max_id().0 + 1)
    }

    fn successor(&self) -> Cdt {
        let mut c = self.clone();
        c.steps += 1;
        c.next_id = c.fresh();
        c
    }

    fn set_tree(&mut self, t: DerivationTree) {
        self.next_id = self.next_id.max(t.max_id().0 + 1);
        self.tree = t;
    }

    fn push_constraint(&mut self, f: Formula) {
        if !self.constraints.contains(&f) {
            self.constraints.push(f);
        }
    }

    fn references_resolve(&self) -> bool {
        self.constraints.iter().all(|f| f.node_refs().iter().all(|n| self.tree.contains(*n)))
    }
}

impl fmt::Display for Cdt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cs: Vec<String> = self.constraints.iter().map(|c| c.to_string()).collect();
        write!(f, "{{{}}} {}", cs.join(", "), self.tree.render())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Normalize,
    ElimStructural,
    NumIntro,
    ElimForall,
    MatchForall,
    Expand,
    ElimSmt,
    ElimSemantic,
    MatchExists,
    InsertExists,
    Finish,
}

impl Rule {
    /// Rule number; paired rules report the first of the pair.
    pub fn number(self) -> u8 {
        match self {
            Rule::Normalize => 1,
            Rule::ElimStructural => 2,
            Rule::NumIntro => 3,
            Rule::ElimForall => 4,
            Rule::MatchForall => 6,
            Rule::Expand => 8,
            Rule::ElimSmt => 9,
            Rule::ElimSemantic => 10,
            Rule::MatchExists => 11,
            Rule::InsertExists => 13,
            Rule::Finish => 15,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.number())
    }
}

#[derive(Clone, Debug)]
pub struct Transition {
    pub rule: Rule,
    pub outputs: Vec<Cdt>,
    pub note: String,
}

impl Transition {
    fn new(rule: Rule, outputs: Vec<Cdt>, note: impl Into<String>) -> Self {
        Transition { rule, outputs, note: note.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub text: String,
    pub tree: DerivationTree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Running,
    Done,
    Exhausted,
    TimedOut,
}

struct Entry {
    cost: f64,
    seq: u64,
    cdt: Cdt,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    /// Reversed so that the heap pops the cheapest, oldest entry.
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then(other.seq.cmp(&self.seq))
    }
}

pub struct Solver<'a> {
    g: &'a Grammar,
    registry: &'a Registry,
    original: Formula,
    config: SolverConfig,
    rng: ChaCha8Rng,
    closing: ClosingCosts,
    coverage: GlobalCoverage,
    queue: BinaryHeap<Entry>,
    seq: u64,
    emitted: HashSet<String>,
    count: usize,
    started: Instant,
    status: Status,
    rejected: usize,
    diagnostics: Vec<String>,
    trace: Vec<String>,
}

impl<'a> Solver<'a> {
    /// A solver for `formula`, whose free variable `start` denotes the
    /// root of the generated tree.
    pub fn new(g: &'a Grammar, registry: &'a Registry, formula: Formula, config: SolverConfig) -> Result<Self, SolveError> {
        for v in formula.free_vars() {
            if &*v.name != "start" {
                return Err(FormulaError::UnknownVariable(v.name.to_string()).into());
            }
        }
        let root = crate::tree::root_tree(g);
        let mut s = Solver {
            g,
            registry,
            original: formula,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            closing: ClosingCosts::new(g, config.seed),
            coverage: GlobalCoverage::new(g, DEFAULT_K),
            config,
            queue: BinaryHeap::new(),
            seq: 0,
            emitted: HashSet::new(),
            count: 0,
            started: Instant::now(),
            status: Status::Running,
            rejected: 0,
            diagnostics: Vec::new(),
            trace: Vec::new(),
        };
        let phi = s.original_for(root.id())?;
        let cdt = Cdt::new(vec![phi], root);
        s.push(cdt, None, None);
        Ok(s)
    }

    fn original_for(&self, root: NodeId) -> Result<Formula, SolveError> {
        let map = BTreeMap::from([(Arc::from("start"), Term::Node(root))]);
        Ok(self.original.substitute(&map)?)
    }

    pub fn status(&self) -> Status {
        self.status
    }

    /// Outputs dropped by the final validity check.
    pub fn rejected(&self) -> usize {
        self.rejected
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    /// The explored transition graph in DOT syntax.
    pub fn trace_dot(&self) -> String {
        let mut out = String::from("digraph cdtts {\n");
        for l in &self.trace {
            out.push_str("  ");
            out.push_str(l);
            out.push('\n');
        }
        out.push_str("}\n");
        out
    }

    fn cost(&self, cdt: &Cdt) -> f64 {
        let cfs = [
            self.closing.cost(&cdt.tree),
            constraint_cost(&cdt.constraints),
            (cdt.steps + (1usize << cdt.finished.min(20)) - 1) as f64,
            kpath_penalty(self.g, &cdt.tree, DEFAULT_K),
            self.coverage.penalty(self.g, &cdt.tree),
        ];
        aggregate(&cfs, &self.config.weights)
    }

    fn push(&mut self, cdt: Cdt, parent: Option<u64>, rule: Option<Rule>) {
        if self.too_deep(&cdt.tree) {
            return;
        }
        self.seq += 1;
        if self.config.trace {
            let label = cdt.to_string().replace('\\', "\\\\").replace('"', "\\\"");
            self.trace.push(format!("n{} [label=\"{}\"];", self.seq, label));
            if let (Some(p), Some(r)) = (parent, rule) {
                self.trace.push(format!("n{p} -> n{} [label=\"{r}\"];", self.seq));
            }
        }
        let cost = self.cost(&cdt);
        self.queue.push(Entry { cost, seq: self.seq, cdt });
    }

    /// Whether every completion of `t` exceeds the height bound.
    fn too_deep(&self, t: &DerivationTree) -> bool {
        if t.height() > self.config.max_depth {
            return true;
        }
        t.paths().iter().any(|(p, n)| {
            !n.is_terminal() && n.children().is_none() && p.len() + self.g.min_height(n.label()) > self.config.max_depth
        })
    }

    fn out_of_time(&self) -> bool {
        self.config.timeout.is_some_and(|t| self.started.elapsed() >= t)
    }

    /// The next solution, or `None` once the output limit, the timeout, or
    /// the end of the search space is reached.
    pub fn next_solution(&mut self) -> Option<Solution> {
        loop {
            if self.count >= self.config.max_outputs {
                self.status = Status::Done;
                return None;
            }
            if self.out_of_time() {
                self.status = Status::TimedOut;
                return None;
            }
            let Some(Entry { seq, cdt, .. }) = self.queue.pop() else {
                self.status = Status::Exhausted;
                return None;
            };
            if cdt.is_final() {
                if let Some(s) = self.emit(cdt) {
                    return Some(s);
                }
                continue;
            }
            match self.step(&cdt) {
                Ok(ts) => {
                    for t in ts {
                        for o in t.outputs {
                            self.push(o, Some(seq), Some(t.rule));
                        }
                    }
                }
                Err(e) => self.diagnostics.push(format!("{e}: {cdt}")),
            }
        }
    }

    fn emit(&mut self, cdt: Cdt) -> Option<Solution> {
        let text = cdt.tree.yield_str().ok()?;
        if self.emitted.contains(&text) {
            return None;
        }
        if self.config.validate {
            let ok = check(&self.original, &cdt.tree, self.g, self.registry);
            if ok != Ok(true) {
                self.rejected += 1;
                self.diagnostics.push(format!("rejected output {text:?}: {ok:?}"));
                return None;
            }
        }
        self.emitted.insert(text.clone());
        self.coverage.record(self.g, &cdt.tree);
        self.count += 1;
        Some(Solution { text, tree: cdt.tree })
    }

    /// Applies the first applicable rule. Existential matching and tree
    /// insertion may both apply and are then reported together.
    pub fn step(&mut self, cdt: &Cdt) -> Result<Vec<Transition>, SolveError> {
        if let Some(t) = self.normalize(cdt)? {
            return Ok(vec![t]);
        }
        if let Some(t) = self.elim_structural(cdt)? {
            return Ok(vec![t]);
        }
        if let Some(t) = self.num_intro(cdt)? {
            return Ok(vec![t]);
        }
        if let Some(t) = self.elim_forall(cdt) {
            return Ok(vec![t]);
        }
        if let Some(t) = self.match_forall(cdt)? {
            return Ok(vec![t]);
        }
        if let Some(t) = self.elim_smt(cdt)? {
            return Ok(vec![t]);
        }
        if let Some(t) = self.elim_semantic(cdt)? {
            return Ok(vec![t]);
        }
        if let Some(t) = self.expand(cdt) {
            return Ok(vec![t]);
        }
        let ts = self.existential(cdt)?;
        if !ts.is_empty() {
            return Ok(ts);
        }
        if let Some(t) = self.finish(cdt) {
            return Ok(vec![t]);
        }
        Err(SolveError::Stuck(cdt.to_string()))
    }

    fn normalize(&self, cdt: &Cdt) -> Result<Option<Transition>, SolveError> {
        let Some(i) = cdt.constraints.iter().position(|f| !f.is_invariant_form()) else {
            return Ok(None);
        };
        let mut outs = Vec::new();
        for branch in establish_inv(&cdt.constraints[i])? {
            let mut c = cdt.successor();
            c.constraints = cdt.constraints[..i].to_vec();
            for f in branch.into_iter().chain(cdt.constraints[i + 1..].iter().cloned()) {
                c.push_constraint(f);
            }
            outs.push(c);
        }
        Ok(Some(Transition::new(Rule::Normalize, outs, format!("normalize {}", cdt.constraints[i]))))
    }

    fn resolve_args(&self, p: &PredAtom, tree: &DerivationTree) -> Option<Vec<PArg>> {
        let sig = self.registry.signature(&p.name)?;
        p.args
            .iter()
            .zip(&sig.args)
            .map(|(t, k)| match (k, t) {
                (ArgKind::Node, Term::Node(n)) if tree.contains(*n) => Some(PArg::Node(*n)),
                (ArgKind::Str, Term::Str(s)) => Some(PArg::Str(s.to_string())),
                (ArgKind::Num, Term::Str(s)) => Some(PArg::Num(s.to_string())),
                (ArgKind::Num, Term::Var(v)) => Some(PArg::UnsetNum(v.name.clone())),
                _ => None,
            })
            .collect()
    }

    /// Structural atoms that can be decided now.
    fn decidable_structural(&self, p: &PredAtom, tree: &DerivationTree) -> Option<Vec<PArg>> {
        if p.semantic {
            return None;
        }
        let args = self.resolve_args(p, tree)?;
        if args.iter().any(|a| matches!(a, PArg::UnsetNum(_))) {
            return None;
        }
        (tree.is_closed() || STABLE_STRUCTURAL.contains(&&*p.name)).then_some(args)
    }

    fn elim_structural(&self, cdt: &Cdt) -> Result<Option<Transition>, SolveError> {
        for (i, f) in cdt.constraints.iter().enumerate() {
            let Formula::Pred(p) = f else { continue };
            let Some(args) = self.decidable_structural(p, &cdt.tree) else { continue };
            let holds = self
                .registry
                .eval_structural(&p.name, &cdt.tree, &args)
                .map_err(crate::error::EvalError::from)?
                != p.negated;
            if !holds {
                return Ok(Some(Transition::new(Rule::ElimStructural, Vec::new(), format!("{f} is false"))));
            }
            let mut c = cdt.successor();
            c.constraints.remove(i);
            return Ok(Some(Transition::new(Rule::ElimStructural, vec![c], format!("{f} holds"))));
        }
        Ok(None)
    }

    fn num_intro(&self, cdt: &Cdt) -> Result<Option<Transition>, SolveError> {
        for (i, f) in cdt.constraints.iter().enumerate() {
            let Formula::ExistsInt(v, body) = f else { continue };
            let mut c = cdt.successor();
            let fresh = Var::new(&format!("{}'{}", v.name, c.next_num), VarType::Num);
            c.next_num += 1;
            let map = BTreeMap::from([(v.name.clone(), Term::Var(fresh.clone()))]);
            c.constraints[i] = body.substitute(&map)?;
            return Ok(Some(Transition::new(Rule::NumIntro, vec![c], format!("fresh {}", fresh.name))));
        }
        Ok(None)
    }

    fn scope<'t>(&self, q: &Quantified, tree: &'t DerivationTree) -> Option<&'t DerivationTree> {
        match &q.scope {
            Term::Node(n) => tree.find(*n),
            _ => None,
        }
    }

    fn elim_forall(&self, cdt: &Cdt) -> Option<Transition> {
        for (i, f) in cdt.constraints.iter().enumerate() {
            let Formula::Forall(q) = f else { continue };
            let Some(scope) = self.scope(q, &cdt.tree) else { continue };
            let ty = q.ty();
            let growing = scope.open_leaves().iter().any(|l| self.g.reaches_or_is(l.label(), ty));
            if growing {
                continue;
            }
            let settled = scope.preorder().iter().all(|n| {
                n.is_terminal()
                    || n.label() != ty
                    || cdt.index.contains(&(f.clone(), n.id()))
                    || q.mexpr.as_ref().is_some_and(|m| m.match_tree(n).is_empty() && !m.could_match(n))
            });
            if settled {
                let mut c = cdt.successor();
                c.constraints.remove(i);
                return Some(Transition::new(Rule::ElimForall, vec![c], format!("drop {f}")));
            }
        }
        None
    }

    /// Nodes of the quantifier's type in its scope, with their matches.
    fn matches(&self, q: &Quantified, tree: &DerivationTree) -> Vec<(NodeId, Vec<Bindings>)> {
        let Some(scope) = self.scope(q, tree) else { return Vec::new() };
        scope
            .preorder()
            .into_iter()
            .filter(|n| !n.is_terminal() && n.label() == q.ty())
            .map(|n| {
                let bs = match &q.mexpr {
                    None => vec![Bindings::new()],
                    Some(m) => m.match_tree(n),
                };
                (n.id(), bs)
            })
            .filter(|(_, bs)| !bs.is_empty())
            .collect()
    }

    fn instance(q: &Quantified, node: NodeId, b: &Bindings) -> Result<Formula, FormulaError> {
        let mut map = BTreeMap::from([(q.var.name.clone(), Term::Node(node))]);
        for (k, t) in b {
            map.insert(k.clone(), Term::Node(t.id()));
        }
        q.body.substitute(&map)
    }

    fn match_forall(&self, cdt: &Cdt) -> Result<Option<Transition>, SolveError> {
        for f in &cdt.constraints {
            let Formula::Forall(q) = f else { continue };
            let fresh: Vec<(NodeId, Vec<Bindings>)> = self
                .matches(q, &cdt.tree)
                .into_iter()
                .filter(|(n, _)| !cdt.index.contains(&(f.clone(), *n)))
                .collect();
            if fresh.is_empty() {
                continue;
            }
            let mut c = cdt.successor();
            for (n, bs) in &fresh {
                for b in bs {
                    c.push_constraint(Self::instance(q, *n, b)?);
                }
                c.index.insert((f.clone(), *n));
            }
            let note = format!("match {f} at {} nodes", fresh.len());
            return Ok(Some(Transition::new(Rule::MatchForall, vec![c], note)));
        }
        Ok(None)
    }

    /// Replaces the subtree at `at` by `value`, keeping the ids of nodes
    /// `value` refines and numbering the rest freshly.
    fn graft(c: &mut Cdt, at: NodeId, value: &DerivationTree) -> bool {
        let Some(old) = c.tree.find(at) else { return false };
        let mut next = c.fresh().max(value.max_id().0 + 1);
        let new = match refine(old, value, &mut next) {
            Some(t) => t,
            None => {
                let t = value.renumber(&mut next);
                DerivationTree::new(at, t.symbol().clone(), t.children().map(|cs| cs.to_vec()))
            }
        };
        c.next_id = next;
        match c.tree.replace(at, &new) {
            Ok(t) => {
                c.set_tree(t);
                true
            }
            Err(_) => false,
        }
    }

    fn assign_nums(c: &mut Cdt, nums: &BTreeMap<Arc<str>, String>) -> Result<(), FormulaError> {
        if nums.is_empty() {
            return Ok(());
        }
        let map: BTreeMap<Arc<str>, Term> = nums.iter().map(|(k, v)| (k.clone(), Term::Str(Arc::from(v.as_str())))).collect();
        let cs = std::mem::take(&mut c.constraints);
        for f in cs {
            c.push_constraint(f.substitute(&map)?);
        }
        Ok(())
    }

    fn elim_smt(&mut self, cdt: &Cdt) -> Result<Option<Transition>, SolveError> {
        let atoms: Vec<SmtTerm> = cdt
            .constraints
            .iter()
            .filter_map(|f| match f {
                Formula::Smt(t) => Some(t.clone()),
                _ => None,
            })
            .collect();
        if atoms.is_empty() {
            return Ok(None);
        }
        let mut vars = Vec::new();
        let mut fixed = MapResolver::default();
        let mut seen = BTreeSet::new();
        for a in &atoms {
            let mut refs = Vec::new();
            a.references(&mut refs);
            for r in refs {
                if !seen.insert(r.clone()) {
                    continue;
                }
                match &r {
                    Term::Node(n) => {
                        let Some(sub) = cdt.tree.find(*n) else {
                            return Ok(Some(Transition::new(Rule::ElimSmt, Vec::new(), format!("dangling {n}"))));
                        };
                        if sub.is_closed() {
                            fixed.nodes.insert(*n, sub.yield_str()?);
                        } else {
                            vars.push(SmtVar::Tree { key: r.clone(), current: sub.clone() });
                        }
                    }
                    Term::Var(v) if v.ty == VarType::Num => vars.push(SmtVar::Num(v.clone())),
                    _ => {}
                }
            }
        }
        let exhaustive = self.config.exhaustive;
        let q = SmtQuery {
            g: self.g,
            atoms,
            vars,
            fixed,
            blocked: Vec::new(),
            budget: if exhaustive { usize::MAX } else { SMT_MODELS },
            max_depth: self.config.max_depth,
            seed: self.rng.gen(),
            effort: if exhaustive { usize::MAX } else { SMT_EFFORT },
            exhaustive,
        };
        let models = match smt::solve(&q)? {
            SolveOutcome::Unsat => Vec::new(),
            SolveOutcome::Models(ms) => ms,
        };
        let mut outs = Vec::new();
        'models: for m in &models {
            let mut c = cdt.successor();
            c.constraints.retain(|f| !matches!(f, Formula::Smt(_)));
            let mut nums = BTreeMap::new();
            for (k, v) in &m.values {
                match (k, v) {
                    (Term::Node(n), SmtValue::Tree(t)) => {
                        if !Self::graft(&mut c, *n, t) {
                            continue 'models;
                        }
                    }
                    (Term::Var(v), SmtValue::Num(s)) => {
                        nums.insert(v.name.clone(), s.clone());
                    }
                    _ => {}
                }
            }
            Self::assign_nums(&mut c, &nums)?;
            if c.references_resolve() {
                outs.push(c);
            }
        }
        let note = format!("{} models", outs.len());
        Ok(Some(Transition::new(Rule::ElimSmt, outs, note)))
    }

    fn apply_model(cdt: &Cdt, drop: usize, m: &Model) -> Result<Option<Cdt>, SolveError> {
        let mut c = cdt.successor();
        c.constraints.remove(drop);
        for (n, t) in &m.trees {
            if !Self::graft(&mut c, *n, t) {
                return Ok(None);
            }
        }
        Self::assign_nums(&mut c, &m.nums)?;
        Ok(c.references_resolve().then_some(c))
    }

    fn elim_semantic(&self, cdt: &Cdt) -> Result<Option<Transition>, SolveError> {
        for (i, f) in cdt.constraints.iter().enumerate() {
            let Formula::Pred(p) = f else { continue };
            if !p.semantic {
                continue;
            }
            let Some(args) = self.resolve_args(p, &cdt.tree) else { continue };
            let r = self
                .registry
                .eval_semantic(&p.name, self.g, &cdt.tree, &args)
                .map_err(crate::error::EvalError::from)?;
            let outs = match r {
                SemPredResult::NotReady => continue,
                SemPredResult::False => Vec::new(),
                SemPredResult::True => {
                    let mut c = cdt.successor();
                    c.constraints.remove(i);
                    vec![c]
                }
                SemPredResult::Models(ms) => {
                    let mut outs = Vec::new();
                    for m in &ms {
                        outs.extend(Self::apply_model(cdt, i, m)?);
                    }
                    outs
                }
            };
            return Ok(Some(Transition::new(Rule::ElimSemantic, outs, format!("{f}"))));
        }
        Ok(None)
    }

    /// Nonterminals a universal quantifier may bind.
    fn bound_types(q: &Quantified) -> Vec<Arc<str>> {
        let mut out = vec![Arc::from(q.ty())];
        if let Some(m) = &q.mexpr {
            let mut stack: Vec<&MElem> = m.elements().iter().collect();
            while let Some(e) = stack.pop() {
                match e {
                    MElem::Placeholder(n) | MElem::Binder(n, _) => out.push(n.clone()),
                    MElem::Optional(es) => stack.extend(es.iter()),
                    MElem::Text(_) => {}
                }
            }
        }
        out
    }

    /// Open leaves that a universal quantifier could still bind.
    fn bound_leaves(&self, cdt: &Cdt) -> Vec<NodeId> {
        let mut bound = BTreeSet::new();
        for f in &cdt.constraints {
            let Formula::Forall(q) = f else { continue };
            let Some(scope) = self.scope(q, &cdt.tree) else { continue };
            let types = Self::bound_types(q);
            for l in scope.open_leaves() {
                if types.iter().any(|t| self.g.reaches_or_is(l.label(), t)) {
                    bound.insert(l.id());
                }
            }
            if let Some(m) = &q.mexpr {
                for n in scope.preorder() {
                    if n.is_terminal()
                        || n.label() != q.ty()
                        || n.is_closed()
                        || cdt.index.contains(&(f.clone(), n.id()))
                        || !m.could_match(n)
                    {
                        continue;
                    }
                    bound.extend(n.open_leaves().iter().map(|l| l.id()));
                }
            }
        }
        let order: Vec<NodeId> = cdt.tree.open_leaves().iter().map(|l| l.id()).collect();
        order.into_iter().filter(|id| bound.contains(id)).collect()
    }

    fn expand(&mut self, cdt: &Cdt) -> Option<Transition> {
        let leaves = self.bound_leaves(cdt);
        if leaves.is_empty() {
            return None;
        }
        let limit = if self.config.exhaustive { usize::MAX } else { EXPANSION_VARIANTS };
        // Beam over leaves: (score, chosen production per leaf).
        let mut beam: Vec<(f64, Vec<usize>)> = vec![(0.0, Vec::new())];
        for id in &leaves {
            let leaf = cdt.tree.find(*id)?;
            let mut next = Vec::new();
            for (score, chosen) in &beam {
                for &p in self.g.alternatives(leaf.label()) {
                    let est: f64 = self
                        .g
                        .production(p)
                        .rhs
                        .iter()
                        .map(|s| match s {
                            Symbol::Nonterminal(n) => self.closing.of(n),
                            Symbol::Terminal(_) => 0.0,
                        })
                        .sum();
                    let jitter = if self.config.exhaustive { 0.0 } else { self.rng.gen::<f64>() };
                    let mut ch = chosen.clone();
                    ch.push(p);
                    next.push((score + est + jitter, ch));
                }
            }
            next.sort_by(|a, b| a.0.total_cmp(&b.0));
            next.truncate(limit);
            beam = next;
        }
        let mut outs = Vec::new();
        for (_, chosen) in beam {
            let mut c = cdt.successor();
            let mut next = c.fresh();
            let mut repl = BTreeMap::new();
            for (id, p) in leaves.iter().zip(chosen) {
                let leaf = cdt.tree.find(*id)?;
                let cs = self
                    .g
                    .production(p)
                    .rhs
                    .iter()
                    .map(|s| {
                        let nid = NodeId(next);
                        next += 1;
                        match s {
                            Symbol::Terminal(_) => DerivationTree::new(nid, s.clone(), None),
                            Symbol::Nonterminal(n) => DerivationTree::open_leaf(nid, n),
                        }
                    })
                    .collect();
                repl.insert(*id, DerivationTree::new(*id, leaf.symbol().clone(), Some(cs)));
            }
            c.next_id = next;
            c.set_tree(cdt.tree.replace_many(&repl));
            outs.push(c);
        }
        let note = format!("expand {} leaves", leaves.len());
        Some(Transition::new(Rule::Expand, outs, note))
    }

    fn existential(&mut self, cdt: &Cdt) -> Result<Vec<Transition>, SolveError> {
        for (i, f) in cdt.constraints.iter().enumerate() {
            let Formula::Exists(q) = f else { continue };
            let mut matched = Vec::new();
            for (n, bs) in self.matches(q, &cdt.tree) {
                for b in &bs {
                    let mut c = cdt.successor();
                    c.constraints.remove(i);
                    let inst = Self::instance(q, n, b)?;
                    c.constraints.insert(i, inst);
                    matched.push(c);
                }
            }
            let mut inserted = Vec::new();
            let key = format!("{}:{}", q.var.name, q.ty());
            let done = cdt.insertions.get(&key).copied().unwrap_or(0);
            if done < INSERTION_CEILING {
                if let Some(scope) = self.scope(q, &cdt.tree) {
                    let mut next = cdt.fresh();
                    let made = make_tree(&q.var, q.mexpr.as_ref(), &mut next).map_err(FormulaError::from)?;
                    let results = insert_tree(scope, &made.tree, self.g, &mut next);
                    let limit = if self.config.exhaustive { usize::MAX } else { INSERTION_RESULTS };
                    for (nid, sub) in results.into_iter().take(limit) {
                        let Ok(tree) = cdt.tree.replace(scope.id(), &sub) else { continue };
                        let mut c = cdt.successor();
                        c.next_id = c.next_id.max(next);
                        c.set_tree(tree);
                        c.insertions.insert(key.clone(), done + 1);
                        let b: Bindings = made
                            .binders
                            .iter()
                            .filter_map(|(v, id)| c.tree.find(*id).map(|t| (v.name.clone(), t.clone())))
                            .collect();
                        c.constraints.remove(i);
                        c.constraints.insert(i, Self::instance(q, nid, &b)?);
                        let orig = self.original_for(c.tree.id())?;
                        c.push_constraint(orig);
                        inserted.push(c);
                    }
                }
            } else {
                self.diagnostics.push(format!("insertion ceiling reached for {key}"));
            }
            let mut ts = Vec::new();
            if !matched.is_empty() {
                ts.push(Transition::new(Rule::MatchExists, matched, format!("match {f}")));
            }
            if !inserted.is_empty() {
                ts.push(Transition::new(Rule::InsertExists, inserted, format!("insert for {f}")));
            }
            if ts.is_empty() {
                ts.push(Transition::new(Rule::MatchExists, Vec::new(), format!("no witness for {f}")));
            }
            return Ok(ts);
        }
        Ok(Vec::new())
    }

    /// Constraints that wait for the tree to be closed.
    fn deferred(&self, f: &Formula, tree: &DerivationTree) -> bool {
        match f {
            Formula::Pred(p) if p.semantic => true,
            Formula::Pred(p) => self.decidable_structural(p, tree).is_none(),
            _ => false,
        }
    }

    fn finish(&mut self, cdt: &Cdt) -> Option<Transition> {
        if cdt.tree.is_closed() || !cdt.constraints.iter().all(|f| self.deferred(f, &cdt.tree)) {
            return None;
        }
        let closures = if self.config.exhaustive {
            self.all_closures(&cdt.tree)
        } else {
            self.sampled_closures(&cdt.tree, CLOSER_SPREAD + cdt.finished as usize)
        };
        let mut outs: Vec<Cdt> = closures
            .into_iter()
            .map(|t| {
                let mut c = cdt.successor();
                c.set_tree(t);
                c
            })
            .collect();
        if !self.config.exhaustive && cdt.finished < FINISH_ROUNDS && !outs.is_empty() {
            let mut again = cdt.successor();
            again.finished += 1;
            outs.push(again);
        }
        Some(Transition::new(Rule::Finish, outs, "close open leaves"))
    }

    /// Closes every open leaf independently with a random tree drawn from
    /// the leaf's shortest feasible lengths; keeps the candidates that add
    /// the most k-paths not yet covered by earlier outputs.
    fn sampled_closures(&mut self, t: &DerivationTree, spread: usize) -> Vec<DerivationTree> {
        let table = self.g.length_table();
        let mut candidates: Vec<(usize, DerivationTree)> = Vec::new();
        let mut texts = BTreeSet::new();
        for _ in 0..FINISH_CANDIDATES {
            let mut next = t.max_id().0 + 1;
            let mut repl = BTreeMap::new();
            let mut ok = true;
            for l in t.open_leaves() {
                let lens: Vec<usize> = table.lengths(l.label()).into_iter().take(spread).collect();
                let sub = lens
                    .choose(&mut self.rng)
                    .and_then(|&len| sample_with_length(self.g, l.label(), len, &mut self.rng, &mut next));
                let Some(sub) = sub else {
                    ok = false;
                    break;
                };
                repl.insert(l.id(), DerivationTree::new(l.id(), l.symbol().clone(), sub.children().map(|c| c.to_vec())));
            }
            if !ok {
                continue;
            }
            let closed = t.replace_many(&repl);
            let Ok(text) = closed.yield_str() else { continue };
            if !texts.insert(text) {
                continue;
            }
            let fresh = closed.kpaths(self.g, DEFAULT_K).len() as f64 * (1.0 - self.coverage.penalty(self.g, &closed));
            candidates.push(((fresh * 1000.0) as usize, closed));
        }
        candidates.sort_by(|a, b| b.0.cmp(&a.0));
        candidates.into_iter().take(FINISH_OUTPUTS).map(|(_, t)| t).collect()
    }

    /// Every closure of `t` within the height bound.
    fn all_closures(&self, t: &DerivationTree) -> Vec<DerivationTree> {
        let leaves: Vec<(usize, &DerivationTree)> = t
            .paths()
            .into_iter()
            .filter(|(_, n)| !n.is_terminal() && n.children().is_none())
            .map(|(p, n)| (p.len(), n))
            .collect();
        let options: Vec<Vec<DerivationTree>> = leaves
            .iter()
            .map(|(d, l)| closed_trees(self.g, l.label(), self.config.max_depth.saturating_sub(*d)))
            .collect();
        if options.iter().any(|o| o.is_empty()) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut choice = vec![0usize; leaves.len()];
        loop {
            let mut next = t.max_id().0 + 1;
            let mut repl = BTreeMap::new();
            for (i, (_, l)) in leaves.iter().enumerate() {
                let fresh = options[i][choice[i]].renumber(&mut next);
                repl.insert(l.id(), DerivationTree::new(l.id(), l.symbol().clone(), fresh.children().map(|c| c.to_vec())));
            }
            out.push(t.replace_many(&repl));
            let mut i = 0;
            loop {
                if i == choice.len() {
                    return out;
                }
                choice[i] += 1;
                if choice[i] < options[i].len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
        }
    }
}

impl Iterator for Solver<'_> {
    type Item = Solution;

    fn next(&mut self) -> Option<Solution> {
        self.next_solution()
    }
}

/// Runs a solver to completion and collects the output strings.
pub fn solve_all(g: &Grammar, registry: &Registry, formula: &Formula, config: SolverConfig) -> Result<Vec<String>, SolveError> {
    Ok(Solver::new(g, registry, formula.clone(), config)?.map(|s| s.text).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::grammar::parse_grammar;

    fn run(grammar: &str, constraint: &str, n: usize) -> (Grammar, Formula, Vec<String>) {
        let g = parse_grammar(grammar).unwrap();
        let r = Registry::standard();
        let f = parse_formula(constraint, &g, &r).unwrap();
        let cfg = SolverConfig { max_outputs: n, timeout: Some(Duration::from_secs(20)), ..Default::default() };
        let out = solve_all(&g, &r, &f, cfg).unwrap();
        (g, f, out)
    }

    #[test]
    fn trivial_constraint() {
        let (g, _, out) = run("<s> ::= \"a\" | \"b\" <s>", "true", 5);
        assert_eq!(out.len(), 5);
        let all = g.enumerate_strings(8);
        assert!(out.iter().all(|s| all.contains(s)));
    }

    #[test]
    fn identifier_lengths() {
        let (_, _, out) = run(
            "<s> ::= <id> | <id> \",\" <s>\n<id> ::= <cs>\n<cs> ::= <c> | <c> <cs>\n<c> ::= \"a\" | \"b\"",
            "forall <id> id in start: (= (str.len id) 5)",
            10,
        );
        assert_eq!(out.len(), 10);
        for s in out {
            assert!(s.split(',').all(|id| id.len() == 5), "{s}");
        }
    }

    #[test]
    fn existential_insertion() {
        let (g, f, out) = run(
            "<s> ::= <d> | <d> <s>\n<d> ::= \"0\" | \"1\"",
            "exists <d> d in start: (= d \"1\")",
            6,
        );
        assert_eq!(out.len(), 6);
        let r = Registry::standard();
        for s in out {
            let t = crate::parser::parse_input(&g, &s).unwrap();
            assert!(check(&f, &t, &g, &r).unwrap(), "{s}");
        }
    }

    #[test]
    fn unsatisfiable_exhausts() {
        let g = parse_grammar("<s> ::= \"a\" | \"b\"").unwrap();
        let r = Registry::standard();
        let f = parse_formula("(= start \"c\")", &g, &r).unwrap();
        let mut s = Solver::new(&g, &r, f, SolverConfig::default()).unwrap();
        assert!(s.next().is_none());
        assert_eq!(s.status(), Status::Exhausted);
    }
}
