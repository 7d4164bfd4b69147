//! Memoized recursive-descent parsing over a grammar, used for concrete
//! inputs and for match expressions.
//!
//! Every `(nonterminal, position)` pair maps to the set of reachable end
//! positions, each with up to `cap` distinct trees. Alternatives are tried
//! in file order, so the first tree recorded for an end position is the
//! leftmost-preferred parse. Direct left recursion is handled by growing a
//! seed until the end-position set stops changing.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;
use std::sync::Arc;

use indexmap::IndexMap;

use crate::error::TreeError;
use crate::grammar::{Grammar, Symbol};
use crate::tree::{DerivationTree, NodeId};

/// Input token. `Hole` stands for an already abstracted nonterminal, as
/// produced by `<A>` placeholders and `{<A> var}` binders in match
/// expressions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Char(char),
    Hole { nonterminal: Arc<str>, var: Option<String> },
}

#[derive(Debug)]
enum PTree {
    Term(Arc<str>),
    Hole(Arc<str>, Option<String>),
    Node(Arc<str>, Vec<Rc<PTree>>),
}

type Results = IndexMap<usize, Vec<Rc<PTree>>>;

const LR_ITERATIONS: usize = 64;

struct Parser<'a> {
    g: &'a Grammar,
    toks: &'a [Tok],
    cap: usize,
    memo: HashMap<(usize, usize), Rc<Results>>,
    seeds: HashMap<(usize, usize), Rc<Results>>,
    in_progress: HashSet<(usize, usize)>,
    left_recursive: HashSet<(usize, usize)>,
    furthest: usize,
}

impl<'a> Parser<'a> {
    fn parse_nt(&mut self, nt: &Arc<str>, pos: usize) -> Rc<Results> {
        let idx = self.g.nonterminal_index(nt).expect("known nonterminal");
        let key = (idx, pos);
        if let Some(r) = self.memo.get(&key) {
            return r.clone();
        }
        if self.in_progress.contains(&key) {
            self.left_recursive.insert(key);
            return self.seeds.get(&key).cloned().unwrap_or_default();
        }
        self.in_progress.insert(key);
        let mut result = Rc::new(self.alternatives(nt, pos));
        let mut rounds = 0;
        while self.left_recursive.contains(&key) && rounds < LR_ITERATIONS {
            rounds += 1;
            self.seeds.insert(key, result.clone());
            let next = Rc::new(self.alternatives(nt, pos));
            let grew = next.len() > result.len()
                || next
                    .iter()
                    .any(|(e, ts)| result.get(e).map_or(true, |old| ts.len() > old.len()));
            if !grew {
                break;
            }
            result = next;
        }
        self.seeds.remove(&key);
        self.in_progress.remove(&key);
        self.memo.insert(key, result.clone());
        result
    }

    fn alternatives(&mut self, nt: &Arc<str>, pos: usize) -> Results {
        let mut out: Results = IndexMap::new();
        if let Some(Tok::Hole { nonterminal, var }) = self.toks.get(pos) {
            if nonterminal == nt {
                out.entry(pos + 1)
                    .or_default()
                    .push(Rc::new(PTree::Hole(nt.clone(), var.clone())));
                self.furthest = self.furthest.max(pos + 1);
            }
        }
        let g = self.g;
        for &p in g.alternatives(nt) {
            let rhs = &g.production(p).rhs;
            for (end, kids) in self.sequence(rhs, pos) {
                let slot = out.entry(end).or_default();
                for k in kids {
                    if slot.len() >= self.cap {
                        break;
                    }
                    slot.push(Rc::new(PTree::Node(nt.clone(), k)));
                }
            }
        }
        out
    }

    fn sequence(&mut self, rhs: &[Symbol], pos: usize) -> IndexMap<usize, Vec<Vec<Rc<PTree>>>> {
        let mut states: IndexMap<usize, Vec<Vec<Rc<PTree>>>> = IndexMap::new();
        states.insert(pos, vec![Vec::new()]);
        for sym in rhs {
            let mut next: IndexMap<usize, Vec<Vec<Rc<PTree>>>> = IndexMap::new();
            for (at, lists) in &states {
                match sym {
                    Symbol::Terminal(t) => {
                        if let Some(end) = self.match_terminal(t, *at) {
                            let slot = next.entry(end).or_default();
                            for l in lists {
                                if slot.len() >= self.cap {
                                    break;
                                }
                                let mut l = l.clone();
                                l.push(Rc::new(PTree::Term(t.clone())));
                                slot.push(l);
                            }
                        }
                    }
                    Symbol::Nonterminal(n) => {
                        let res = self.parse_nt(n, *at);
                        for (end, trees) in res.iter() {
                            let slot = next.entry(*end).or_default();
                            'outer: for l in lists {
                                for t in trees {
                                    if slot.len() >= self.cap {
                                        break 'outer;
                                    }
                                    let mut l = l.clone();
                                    l.push(t.clone());
                                    slot.push(l);
                                }
                            }
                        }
                    }
                }
            }
            states = next;
            if states.is_empty() {
                break;
            }
        }
        states
    }

    fn match_terminal(&mut self, t: &str, pos: usize) -> Option<usize> {
        let mut at = pos;
        for c in t.chars() {
            match self.toks.get(at) {
                Some(Tok::Char(d)) if *d == c => at += 1,
                _ => {
                    self.furthest = self.furthest.max(at);
                    return None;
                }
            }
        }
        self.furthest = self.furthest.max(at);
        Some(at)
    }
}

/// A parse result: the tree and, for every binder hole, the 0-based path
/// of its node.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub tree: DerivationTree,
    pub binders: Vec<(String, Vec<usize>)>,
}

fn convert(p: &PTree, next: &mut u64, path: &mut Vec<usize>, binders: &mut Vec<(String, Vec<usize>)>) -> DerivationTree {
    let id = NodeId(*next);
    *next += 1;
    match p {
        PTree::Term(t) => DerivationTree::new(id, Symbol::Terminal(t.clone()), None),
        PTree::Hole(n, var) => {
            if let Some(v) = var {
                binders.push((v.clone(), path.clone()));
            }
            DerivationTree::new(id, Symbol::Nonterminal(n.clone()), None)
        }
        PTree::Node(n, kids) => {
            let mut cs = Vec::with_capacity(kids.len());
            for (i, k) in kids.iter().enumerate() {
                path.push(i);
                cs.push(convert(k, next, path, binders));
                path.pop();
            }
            DerivationTree::new(id, Symbol::Nonterminal(n.clone()), Some(cs))
        }
    }
}

const BIG_INPUT: usize = 400;

fn run<T: Send>(len: usize, f: impl FnOnce() -> T + Send) -> T {
    if len <= BIG_INPUT {
        return f();
    }
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(256 << 20)
            .spawn_scoped(s, f)
            .expect("spawn parser thread")
            .join()
            .expect("parser thread panicked")
    })
}

/// All parses (at most `cap`) of the full token sequence as `nt`, in
/// preference order. Node ids are assigned in preorder from 1.
pub fn parse_tokens(g: &Grammar, nt: &str, toks: &[Tok], cap: usize) -> Result<Vec<Parsed>, TreeError> {
    let nt = g
        .intern(nt)
        .ok_or_else(|| TreeError::ParseFailure { symbol: nt.to_string(), position: 0 })?;
    run(toks.len(), || {
        let mut p = Parser {
            g,
            toks,
            cap: cap.max(1),
            memo: HashMap::new(),
            seeds: HashMap::new(),
            in_progress: HashSet::new(),
            left_recursive: HashSet::new(),
            furthest: 0,
        };
        let res = p.parse_nt(&nt, 0);
        match res.get(&toks.len()) {
            Some(trees) => Ok(trees
                .iter()
                .take(cap.max(1))
                .map(|t| {
                    let mut next = 1;
                    let mut binders = Vec::new();
                    let tree = convert(t, &mut next, &mut Vec::new(), &mut binders);
                    Parsed { tree, binders }
                })
                .collect()),
            None => Err(TreeError::ParseFailure {
                symbol: nt.to_string(),
                position: p.furthest,
            }),
        }
    })
}

/// Parses `text` as the nonterminal `nt`, returning the first parse.
pub fn parse_as(g: &Grammar, nt: &str, text: &str) -> Result<DerivationTree, TreeError> {
    let toks: Vec<Tok> = text.chars().map(Tok::Char).collect();
    let mut v = parse_tokens(g, nt, &toks, 1)?;
    Ok(v.remove(0).tree)
}

/// Parses a complete input from the grammar's start symbol.
pub fn parse_input(g: &Grammar, text: &str) -> Result<DerivationTree, TreeError> {
    parse_as(g, g.start(), text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;

    #[test]
    fn trivial_parse() {
        let g = parse_grammar("<start> ::= \"a\"").unwrap();
        let t = parse_input(&g, "a").unwrap();
        assert_eq!(t.size(), 2);
    }

    #[test]
    fn failure_reports_longest_match() {
        let g = parse_grammar("<s> ::= \"ab\" \"cd\"").unwrap();
        match parse_input(&g, "abce") {
            Err(TreeError::ParseFailure { position, .. }) => assert_eq!(position, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn left_recursion_grows() {
        let g = parse_grammar("<e> ::= <e> \"+\" <n> | <n>\n<n> ::= \"1\" | \"2\"").unwrap();
        let t = parse_input(&g, "1+2+1").unwrap();
        assert_eq!(t.yield_str().unwrap(), "1+2+1");
        t.validate(&g).unwrap();
    }

    #[test]
    fn epsilon_terminal() {
        let g = parse_grammar("<s> ::= \"a\" <s> | \"\"").unwrap();
        let t = parse_input(&g, "aaa").unwrap();
        assert_eq!(t.yield_str().unwrap(), "aaa");
        assert!(parse_input(&g, "").is_ok());
    }

    #[test]
    fn leftmost_alternative_wins() {
        let g = parse_grammar("<s> ::= <a> | <b>\n<a> ::= \"x\"\n<b> ::= \"x\"").unwrap();
        let t = parse_input(&g, "x").unwrap();
        assert_eq!(t.children().unwrap()[0].label(), "<a>");
        let all = parse_tokens(&g, "<s>", &[Tok::Char('x')], 8).unwrap();
        assert_eq!(all.len(), 2);
    }

    #[test]
    fn long_inputs_parse() {
        let g = parse_grammar("<s> ::= \"a\" <s> | \"a\"").unwrap();
        let text = "a".repeat(800);
        assert_eq!(parse_input(&g, &text).unwrap().yield_str().unwrap(), text);
    }
}
