//! Building and inserting trees for existential quantifiers.

use crate::error::MatchError;
use crate::formula::Var;
use crate::grammar::{Grammar, Symbol};
use crate::matching::MatchExpr;
use crate::tree::{DerivationTree, NodeId};

/// Maximal number of productions on a connecting path.
const MAX_CONNECT: usize = 4;
const CONNECT_LIMIT: usize = 6;

#[derive(Clone, Debug)]
pub struct MadeTree {
    pub tree: DerivationTree,
    pub binders: Vec<(Var, NodeId)>,
}

/// A minimal open tree for `var`: a single open node, or the smallest
/// abstract tree of `mexpr`. Ids are drawn from `next`.
pub fn make_tree(var: &Var, mexpr: Option<&MatchExpr>, next: &mut u64) -> Result<MadeTree, MatchError> {
    let ty = var.nonterminal().unwrap_or("");
    match mexpr {
        None => {
            let tree = DerivationTree::open_leaf(NodeId(*next), ty);
            *next += 1;
            Ok(MadeTree { tree, binders: Vec::new() })
        }
        Some(m) => {
            if m.ty() != ty {
                return Err(MatchError::TypeMismatch {
                    expected: ty.to_string(),
                    found: m.ty().to_string(),
                });
            }
            let idx = (0..m.abstract_trees().len())
                .min_by_key(|&i| m.abstract_trees()[i].tree.size())
                .ok_or_else(|| MatchError::Unparseable(m.raw().to_string()))?;
            let (tree, binders) = m.instantiate(idx, next);
            Ok(MadeTree { tree, binders })
        }
    }
}

fn with_root_id(t: &DerivationTree, id: NodeId) -> DerivationTree {
    DerivationTree::new(id, t.symbol().clone(), t.children().map(|c| c.to_vec()))
}

fn fresh_node(s: &Symbol, next: &mut u64) -> DerivationTree {
    let id = NodeId(*next);
    *next += 1;
    match s {
        Symbol::Terminal(_) => DerivationTree::new(id, s.clone(), None),
        Symbol::Nonterminal(n) => DerivationTree::open_leaf(id, n),
    }
}

/// Trees rooted at `from` that contain `target` as a subtree; the other
/// new leaves are open. Smallest first.
fn connect(g: &Grammar, from: &str, target: &DerivationTree, depth: usize, next: &mut u64) -> Vec<DerivationTree> {
    if from == target.label() {
        return vec![target.clone()];
    }
    if depth == 0 {
        return Vec::new();
    }
    let Some(sym) = g.intern(from) else { return Vec::new() };
    let mut out = Vec::new();
    for &p in g.alternatives(from) {
        let rhs = &g.production(p).rhs;
        for (i, s) in rhs.iter().enumerate() {
            let Symbol::Nonterminal(y) = s else { continue };
            if !g.reaches_or_is(y, target.label()) {
                continue;
            }
            for sub in connect(g, y, target, depth - 1, next) {
                let id = NodeId(*next);
                *next += 1;
                let cs = rhs
                    .iter()
                    .enumerate()
                    .map(|(k, s)| if k == i { sub.clone() } else { fresh_node(s, next) })
                    .collect();
                out.push(DerivationTree::new(id, Symbol::Nonterminal(sym.clone()), Some(cs)));
            }
        }
    }
    out.sort_by_key(|t| t.size());
    out.truncate(CONNECT_LIMIT);
    out
}

/// Ways to insert `new` into `host`. Each result contains every node of
/// `host` and all of `new`, and comes with the id under which `new`'s root
/// appears. Open leaves that can derive `new` are grafted first; otherwise
/// recursive nonterminals are expanded so that both the existing subtree
/// and `new` fit below them. Results are ordered by size.
pub fn insert_tree(host: &DerivationTree, new: &DerivationTree, g: &Grammar, next: &mut u64) -> Vec<(NodeId, DerivationTree)> {
    let mut out: Vec<(NodeId, DerivationTree)> = Vec::new();
    for leaf in host.open_leaves() {
        if !g.reaches_or_is(leaf.label(), new.label()) {
            continue;
        }
        for c in connect(g, leaf.label(), new, MAX_CONNECT, next) {
            let nid = if c.id() == new.id() { leaf.id() } else { new.id() };
            let c = with_root_id(&c, leaf.id());
            if let Ok(t) = host.replace(leaf.id(), &c) {
                out.push((nid, t));
            }
        }
    }
    for n in host.preorder() {
        if n.is_terminal() || n.children().is_none() || !g.is_recursive(n.label()) {
            continue;
        }
        let Some(sym) = g.intern(n.label()) else { continue };
        for &p in g.alternatives(n.label()) {
            let rhs = &g.production(p).rhs;
            for (i, old_slot) in rhs.iter().enumerate() {
                let Symbol::Nonterminal(y) = old_slot else { continue };
                if !g.reaches_or_is(y, n.label()) {
                    continue;
                }
                for (j, new_slot) in rhs.iter().enumerate() {
                    let Symbol::Nonterminal(z) = new_slot else { continue };
                    if i == j || !g.reaches_or_is(z, new.label()) {
                        continue;
                    }
                    let olds = connect(g, y, n, MAX_CONNECT - 1, next);
                    let news = connect(g, z, new, MAX_CONNECT - 1, next);
                    for o in olds.iter().take(2) {
                        for w in news.iter().take(3) {
                            let id = NodeId(*next);
                            *next += 1;
                            let cs = rhs
                                .iter()
                                .enumerate()
                                .map(|(k, s)| match k {
                                    k if k == i => o.clone(),
                                    k if k == j => w.clone(),
                                    _ => fresh_node(s, next),
                                })
                                .collect();
                            let top = DerivationTree::new(id, Symbol::Nonterminal(sym.clone()), Some(cs));
                            if let Ok(t) = host.replace(n.id(), &top) {
                                out.push((new.id(), t));
                            }
                        }
                    }
                }
            }
        }
    }
    out.sort_by_key(|(_, t)| t.size());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;
    use crate::parser::parse_input;
    use crate::tree::Shape;

    fn xml() -> Grammar {
        parse_grammar(
            "<xml-tree> ::= <text> | <xml-open-tag> <xml-tree> <xml-close-tag>\n\
             <xml-open-tag> ::= \"<\" <id> \">\"\n\
             <xml-close-tag> ::= \"</\" <id> \">\"\n\
             <id> ::= \"a\" | \"b\"\n\
             <text> ::= \"x\"\n",
        )
        .unwrap()
    }

    #[test]
    fn single_node_and_pattern() {
        let g = xml();
        let mut next = 10;
        let v = Var::tree("v", "<id>");
        let t = make_tree(&v, None, &mut next).unwrap();
        assert!(t.tree.is_open_leaf());
        let m = MatchExpr::parse("<{<id> x}>", "<xml-open-tag>", &g).unwrap();
        let tag = Var::tree("optag", "<xml-open-tag>");
        let t = make_tree(&tag, Some(&m), &mut next).unwrap();
        assert_eq!(t.tree.num_children(), 3);
        assert_eq!(m.match_tree(&t.tree).len(), 1);
        assert!(make_tree(&v, Some(&m), &mut next).is_err());
    }

    #[test]
    fn graft_into_open_leaf() {
        let g = xml();
        let host = Shape::Node("<xml-tree>", vec![
            Shape::Node("<xml-open-tag>", vec![Shape::Term("<"), Shape::Open("<id>"), Shape::Term(">")]),
            Shape::Open("<xml-tree>"),
            Shape::Open("<xml-close-tag>"),
        ])
        .build();
        let mut next = host.max_id().0 + 1;
        let new = DerivationTree::open_leaf(NodeId(next), "<xml-tree>");
        next += 1;
        let res = insert_tree(&host, &new, &g, &mut next);
        let (nid, t) = &res[0];
        assert_eq!(t.size(), host.size());
        assert!(host.ids().is_subset(&t.ids()));
        assert!(t.contains(*nid));
    }

    #[test]
    fn self_embedding_into_closed_tree() {
        let g = xml();
        let host = parse_input(&g, "x").unwrap();
        let mut next = host.max_id().0 + 1;
        let m = MatchExpr::parse("<{<id> x}>", "<xml-open-tag>", &g).unwrap();
        let made = make_tree(&Var::tree("o", "<xml-open-tag>"), Some(&m), &mut next).unwrap();
        let res = insert_tree(&host, &made.tree, &g, &mut next);
        assert!(!res.is_empty());
        for (nid, t) in &res {
            assert!(host.ids().is_subset(&t.ids()));
            assert!(made.tree.ids().is_subset(&t.ids()));
            assert_eq!(t.find(*nid).unwrap().label(), "<xml-open-tag>");
            t.validate(&g).unwrap();
        }
    }

    #[test]
    fn impossible_insertion() {
        let g = parse_grammar("<s> ::= <a> \"-\"\n<a> ::= \"a\"\n<b> ::= \"b\"").unwrap();
        let host = parse_input(&g, "a-").unwrap();
        let mut next = 100;
        let new = DerivationTree::open_leaf(NodeId(99), "<b>");
        assert!(insert_tree(&host, &new, &g, &mut next).is_empty());
    }
}
