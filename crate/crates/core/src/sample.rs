//! Seeded random derivation: trees with an exact yield length and random
//! closures of open trees.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::grammar::{Grammar, Symbol};
use crate::tree::{DerivationTree, NodeId};

const DEEP: usize = 40;
const TOO_DEEP: usize = 120;

/// A random closed tree for `nt` whose yield has exactly `len` characters.
pub fn sample_with_length<R: Rng>(g: &Grammar, nt: &str, len: usize, rng: &mut R, next: &mut u64) -> Option<DerivationTree> {
    sample(g, nt, len, rng, next, 0)
}

fn sample<R: Rng>(g: &Grammar, nt: &str, len: usize, rng: &mut R, next: &mut u64, depth: usize) -> Option<DerivationTree> {
    let table = g.length_table();
    if depth > TOO_DEEP || !table.feasible(nt, len) {
        return None;
    }
    let mut options: Vec<usize> = g
        .alternatives(nt)
        .iter()
        .copied()
        .filter(|&p| table.sequence(&g.production(p).rhs)[len])
        .collect();
    if depth > DEEP {
        let best = options.iter().map(|&p| g.production_min_height(p)).min()?;
        options.retain(|&p| g.production_min_height(p) == best);
    }
    options.shuffle(rng);
    for p in options {
        let id = NodeId(*next);
        *next += 1;
        let rhs = &g.production(p).rhs;
        if let Some(children) = fill_sequence(g, rhs, len, rng, next, depth + 1) {
            return Some(DerivationTree::new(id, Symbol::Nonterminal(g.intern(nt)?), Some(children)));
        }
    }
    None
}

fn fill_sequence<R: Rng>(
    g: &Grammar,
    rhs: &[Symbol],
    len: usize,
    rng: &mut R,
    next: &mut u64,
    depth: usize,
) -> Option<Vec<DerivationTree>> {
    let table = g.length_table();
    let mut out = Vec::with_capacity(rhs.len());
    let mut rest = len;
    for (i, s) in rhs.iter().enumerate() {
        let tail = table.sequence(&rhs[i + 1..]);
        let choices: Vec<usize> = (0..=rest).filter(|&l| table.symbol_feasible(s, l) && tail[rest - l]).collect();
        let l = *choices.choose(rng)?;
        match s {
            Symbol::Terminal(_) => {
                out.push(DerivationTree::new(NodeId(*next), s.clone(), None));
                *next += 1;
            }
            Symbol::Nonterminal(n) => out.push(sample(g, n, l, rng, next, depth)?),
        }
        rest -= l;
    }
    Some(out)
}

/// Fixed characters contributed by the closed parts of `t`.
pub fn fixed_length(t: &DerivationTree) -> usize {
    if t.is_terminal() {
        return t.label().chars().count();
    }
    t.children().map_or(0, |cs| cs.iter().map(fixed_length).sum())
}

/// Closes the open leaves of `t` so that its yield has exactly `len`
/// characters. Ids of existing nodes are kept.
pub fn complete_with_length<R: Rng>(g: &Grammar, t: &DerivationTree, len: usize, rng: &mut R) -> Option<DerivationTree> {
    let fixed = fixed_length(t);
    if len < fixed {
        return None;
    }
    let leaves: Vec<Symbol> = t.open_leaves().iter().map(|l| l.symbol().clone()).collect();
    if leaves.is_empty() {
        return (len == fixed).then(|| t.clone());
    }
    let mut next = t.max_id().0 + 1;
    let filled = fill_sequence(g, &leaves, len - fixed, rng, &mut next, 0)?;
    let repl: BTreeMap<NodeId, DerivationTree> = t
        .open_leaves()
        .iter()
        .zip(filled)
        .map(|(l, f)| (l.id(), DerivationTree::new(l.id(), l.symbol().clone(), f.children().map(|c| c.to_vec()))))
        .collect();
    Some(t.replace_many(&repl))
}

/// Feasible total yield lengths for closures of `t`.
pub fn closure_lengths(g: &Grammar, t: &DerivationTree) -> Vec<usize> {
    let leaves: Vec<Symbol> = t.open_leaves().iter().map(|l| l.symbol().clone()).collect();
    let fixed = fixed_length(t);
    let table = g.length_table();
    table
        .sequence(&leaves)
        .iter()
        .enumerate()
        .filter(|(l, ok)| **ok && l + fixed <= crate::grammar::MAX_YIELD_LEN)
        .map(|(l, _)| l + fixed)
        .collect()
}

/// A random closure of `t`, biased toward short yields: a target length
/// is drawn from the shortest `spread` feasible lengths.
pub fn random_closure<R: Rng>(g: &Grammar, t: &DerivationTree, spread: usize, rng: &mut R) -> Option<DerivationTree> {
    if t.is_closed() {
        return Some(t.clone());
    }
    let lens = closure_lengths(g, t);
    let window = &lens[..lens.len().min(spread.max(1))];
    let mut order: Vec<usize> = window.to_vec();
    order.shuffle(rng);
    order.extend(lens.iter().skip(window.len()).take(8));
    order.into_iter().find_map(|l| complete_with_length(g, t, l, rng))
}
