use std::collections::{BTreeSet, HashSet};

use isla_forge::corpus::{load_spec, spec_names};
use isla_forge::grammar::{parse_grammar, Grammar, KPath, Symbol};
use isla_forge::matching::MatchExpr;
use isla_forge::parser::parse_input;
use isla_forge::sample::sample_with_length;
use isla_forge::tree::{enumerate_closures, root_tree, DerivationTree, NodeId};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grammars() -> Vec<(String, Grammar)> {
    let mut out: Vec<(String, Grammar)> = spec_names()
        .into_iter()
        .map(|n| (n.to_string(), load_spec(n).unwrap().grammar))
        .collect();
    for (i, text) in [
        "<start> ::= <e>\n<e> ::= <t> | <t> \"+\" <e>\n<t> ::= \"1\" | \"(\" <e> \")\"\n",
        "<start> ::= <l>\n<l> ::= \"\" | \"a\" <l> | \"b\" <l>\n",
    ]
    .iter()
    .enumerate()
    {
        out.push((format!("tiny{i}"), parse_grammar(text).unwrap()));
    }
    out
}

/// Yields of all closed trees of height at most `d` rooted at `nt`.
fn yields(g: &Grammar, nt: &str, d: usize) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    if d < 2 {
        return out;
    }
    for &p in g.alternatives(nt) {
        let mut acc = BTreeSet::from([String::new()]);
        for s in &g.production(p).rhs {
            let opts = match s {
                Symbol::Terminal(t) => BTreeSet::from([t.to_string()]),
                Symbol::Nonterminal(n) => yields(g, n, d - 1),
            };
            acc = acc.iter().flat_map(|a| opts.iter().map(move |o| format!("{a}{o}"))).collect();
        }
        out.extend(acc);
    }
    out
}

fn open_yields(g: &Grammar, t: &DerivationTree, d: usize) -> BTreeSet<String> {
    if t.is_terminal() {
        return BTreeSet::from([t.label().to_string()]);
    }
    let Some(cs) = t.children() else { return yields(g, t.label(), d) };
    let mut acc = BTreeSet::from([String::new()]);
    for c in cs {
        let opts = open_yields(g, c, d);
        acc = acc.iter().flat_map(|a| opts.iter().map(move |o| format!("{a}{o}"))).collect();
    }
    acc
}

#[test]
fn enumeration_is_monotone_and_reparses() {
    for (name, g) in grammars() {
        let mut prev = BTreeSet::new();
        for d in 1..=5 {
            let cur = g.enumerate_strings(d);
            assert!(prev.is_subset(&cur), "{name} at depth {d}");
            assert_eq!(cur, yields(&g, g.start(), d), "{name} at depth {d}");
            for s in &cur {
                let t = parse_input(&g, s).unwrap_or_else(|e| panic!("{name}: {s:?}: {e}"));
                assert!(t.is_closed());
                assert_eq!(t.yield_str().unwrap(), *s);
                t.validate(&g).unwrap();
            }
            prev = cur;
        }
    }
}

/// Walks of the grammar graph built by repeated extension over the
/// production list.
fn kpath_oracle(g: &Grammar, k: usize) -> HashSet<KPath> {
    let mut reachable: BTreeSet<String> = BTreeSet::from([g.start().to_string()]);
    loop {
        let before = reachable.len();
        for p in g.productions() {
            if reachable.contains(&*p.lhs) {
                for s in &p.rhs {
                    if let Symbol::Nonterminal(n) = s {
                        reachable.insert(n.to_string());
                    }
                }
            }
        }
        if reachable.len() == before {
            break;
        }
    }
    let idx = |n: &str| g.nonterminal_index(n).unwrap() as u32;
    let mut walks: Vec<(KPath, String)> = reachable.iter().map(|n| (vec![idx(n)], n.clone())).collect();
    for _ in 1..k {
        let mut next = Vec::new();
        for (walk, last) in &walks {
            for (pi, p) in g.productions().iter().enumerate() {
                if &*p.lhs != last {
                    continue;
                }
                let mut seen = BTreeSet::new();
                for s in &p.rhs {
                    if let Symbol::Nonterminal(n) = s {
                        if seen.insert(n.clone()) {
                            let mut w = walk.clone();
                            w.extend([pi as u32, idx(n)]);
                            next.push((w, n.to_string()));
                        }
                    }
                }
            }
        }
        walks = next;
    }
    walks.into_iter().map(|(w, _)| w).collect()
}

#[test]
fn kpaths_match_walk_enumeration() {
    for (name, g) in grammars() {
        for k in 1..=4 {
            assert_eq!(*g.kpaths(k), kpath_oracle(&g, k), "{name}, k = {k}");
        }
    }
}

#[test]
fn closures_match_recursive_yields() {
    for (name, g) in grammars() {
        let root = root_tree(&g);
        let mut trees = vec![root.clone()];
        let mut next = 2;
        for &p in g.alternatives(g.start()) {
            let cs = g
                .production(p)
                .rhs
                .iter()
                .map(|s| {
                    next += 1;
                    match s {
                        Symbol::Terminal(_) => DerivationTree::new(NodeId(next), s.clone(), None),
                        Symbol::Nonterminal(n) => DerivationTree::open_leaf(NodeId(next), n),
                    }
                })
                .collect();
            trees.push(DerivationTree::new(root.id(), root.symbol().clone(), Some(cs)));
        }
        for t in trees {
            for d in 1..=4 {
                let closures = enumerate_closures(&g, &t, d);
                for c in &closures {
                    assert!(c.is_closed());
                    assert!(t.ids().is_subset(&c.ids()), "{name}");
                    c.validate(&g).unwrap();
                }
                let got: BTreeSet<String> = closures.iter().map(|c| c.yield_str().unwrap()).collect();
                assert_eq!(got, open_yields(&g, &t, d), "{name} at depth {d}");
            }
        }
    }
}

const XML: &str = "<start> ::= <tree>\n\
<tree> ::= \"x\" | <open> <tree> <close> | <tree> <tree>\n\
<open> ::= \"<\" <id> \">\" | \"<\" <id> \" \" <attr> \">\"\n\
<close> ::= \"</\" <id> \">\"\n\
<attr> ::= <id> \"=1\"\n\
<id> ::= \"a\" | \"b\" | \"a\" <id>\n";

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_are_sound_and_deterministic(seed in any::<u64>(), len in 1usize..24) {
        let g = parse_grammar(XML).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut next = 1;
        let Some(t) = sample_with_length(&g, "<start>", len, &mut rng, &mut next) else { return Ok(()) };
        let t = parse_input(&g, &t.yield_str().unwrap()).unwrap();
        for raw in ["<{<id> o}><tree></{<id> c}>", "<{<id> o}[ <attr>]><tree></{<id> c}>", "{<tree> l}{<tree> r}"] {
            let m = MatchExpr::parse(raw, "<tree>", &g).unwrap();
            for n in t.preorder() {
                if n.label() != "<tree>" {
                    continue;
                }
                let first = m.match_tree(n);
                prop_assert_eq!(&first, &m.match_tree(n));
                for b in &first {
                    for v in m.binders() {
                        let sub = &b[&v.name];
                        prop_assert_eq!(Some(sub.label()), v.nonterminal());
                        prop_assert!(n.find(sub.id()).is_some_and(|s| s.ptr_eq(sub) || s == sub));
                    }
                }
            }
        }
    }

    #[test]
    fn sampled_trees_round_trip(seed in any::<u64>(), len in 1usize..30) {
        let g = parse_grammar(XML).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut next = 1;
        if let Some(t) = sample_with_length(&g, "<start>", len, &mut rng, &mut next) {
            t.validate(&g).unwrap();
            let s = t.yield_str().unwrap();
            prop_assert_eq!(s.chars().count(), len);
            prop_assert_eq!(parse_input(&g, &s).unwrap().yield_str().unwrap(), s);
        }
    }
}
