//! Derivation trees with stable numeric node identifiers.
//!
//! Trees are immutable and share structure through `Arc`; every edit
//! rebuilds only the spine from the root to the edited node. Ids of nodes
//! that an edit does not touch are preserved, which lets constraints refer
//! to tree positions by id.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::TreeError;
use crate::grammar::{Grammar, KPath, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

struct Node {
    id: NodeId,
    symbol: Symbol,
    children: Option<Vec<DerivationTree>>,
    max_id: NodeId,
    open: bool,
    size: usize,
    height: usize,
}

#[derive(Clone)]
pub struct DerivationTree(Arc<Node>);

impl DerivationTree {
    /// A node with the given children. `None` children on a nonterminal
    /// make an open leaf; terminals always get an empty child list.
    pub fn new(id: NodeId, symbol: Symbol, children: Option<Vec<DerivationTree>>) -> Self {
        let children = match symbol {
            Symbol::Terminal(_) => Some(Vec::new()),
            Symbol::Nonterminal(_) => children,
        };
        let (max_id, open, size, height) = match &children {
            None => (id, true, 1, 1),
            Some(cs) => cs.iter().fold((id, false, 1, 1), |(m, o, s, h), c| {
                (m.max(c.max_id()), o || c.is_open(), s + c.size(), h.max(c.height() + 1))
            }),
        };
        DerivationTree(Arc::new(Node {
            id,
            symbol,
            children,
            max_id,
            open,
            size,
            height,
        }))
    }

    pub fn open_leaf(id: NodeId, nonterminal: &str) -> Self {
        Self::new(id, Symbol::nonterminal(nonterminal), None)
    }

    pub fn id(&self) -> NodeId {
        self.0.id
    }

    pub fn symbol(&self) -> &Symbol {
        &self.0.symbol
    }

    pub fn label(&self) -> &str {
        self.0.symbol.name()
    }

    pub fn is_terminal(&self) -> bool {
        !self.0.symbol.is_nonterminal()
    }

    /// `None` for an unexpanded nonterminal leaf.
    pub fn children(&self) -> Option<&[DerivationTree]> {
        self.0.children.as_deref()
    }

    pub fn num_children(&self) -> usize {
        self.0.children.as_ref().map_or(0, |c| c.len())
    }

    pub fn is_open(&self) -> bool {
        self.0.open
    }

    pub fn is_closed(&self) -> bool {
        !self.0.open
    }

    /// Unexpanded nonterminal leaf.
    pub fn is_open_leaf(&self) -> bool {
        self.0.children.is_none()
    }

    pub fn max_id(&self) -> NodeId {
        self.0.max_id
    }

    pub fn size(&self) -> usize {
        self.0.size
    }

    /// Height with a single node at height 1.
    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn ptr_eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Concatenated terminal leaves. Fails on open trees.
    pub fn yield_str(&self) -> Result<String, TreeError> {
        if self.is_open() {
            return Err(TreeError::OpenTree);
        }
        let mut out = String::new();
        self.write_yield(&mut out, false);
        Ok(out)
    }

    /// Like [`DerivationTree::yield_str`], but renders open leaves by their
    /// nonterminal name.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write_yield(&mut out, true);
        out
    }

    fn write_yield(&self, out: &mut String, show_open: bool) {
        match (&self.0.symbol, &self.0.children) {
            (Symbol::Terminal(t), _) => out.push_str(t),
            (Symbol::Nonterminal(n), None) => {
                if show_open {
                    out.push_str(n)
                }
            }
            (_, Some(cs)) => {
                for c in cs {
                    c.write_yield(out, show_open);
                }
            }
        }
    }

    /// Preorder traversal.
    pub fn preorder(&self) -> Vec<&DerivationTree> {
        let mut out = Vec::with_capacity(self.size());
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            out.push(t);
            if let Some(cs) = t.children() {
                stack.extend(cs.iter().rev());
            }
        }
        out
    }

    /// Preorder traversal with 0-based child-index paths.
    pub fn paths(&self) -> Vec<(Vec<usize>, &DerivationTree)> {
        let mut out = Vec::with_capacity(self.size());
        let mut stack = vec![(Vec::new(), self)];
        while let Some((p, t)) = stack.pop() {
            if let Some(cs) = t.children() {
                for (i, c) in cs.iter().enumerate().rev() {
                    let mut q = p.clone();
                    q.push(i);
                    stack.push((q, c));
                }
            }
            out.push((p, t));
        }
        out
    }

    pub fn open_leaves(&self) -> Vec<&DerivationTree> {
        if self.is_closed() {
            return Vec::new();
        }
        self.preorder()
            .into_iter()
            .filter(|t| t.is_open_leaf())
            .collect()
    }

    pub fn find(&self, id: NodeId) -> Option<&DerivationTree> {
        self.path_to(id).map(|p| self.get(&p).unwrap())
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.path_to(id).is_some()
    }

    /// 0-based child-index path from the root to `id`.
    pub fn path_to(&self, id: NodeId) -> Option<Vec<usize>> {
        fn go(t: &DerivationTree, id: NodeId, path: &mut Vec<usize>) -> bool {
            if t.id() == id {
                return true;
            }
            if id > t.max_id() {
                return false;
            }
            if let Some(cs) = t.children() {
                for (i, c) in cs.iter().enumerate() {
                    path.push(i);
                    if go(c, id, path) {
                        return true;
                    }
                    path.pop();
                }
            }
            false
        }
        let mut path = Vec::new();
        go(self, id, &mut path).then_some(path)
    }

    pub fn get(&self, path: &[usize]) -> Option<&DerivationTree> {
        let mut t = self;
        for &i in path {
            t = t.children()?.get(i)?;
        }
        Some(t)
    }

    /// Ids of all ancestors of `id`, nearest first.
    pub fn ancestors(&self, id: NodeId) -> Option<Vec<&DerivationTree>> {
        let path = self.path_to(id)?;
        let mut out = Vec::with_capacity(path.len());
        let mut t = self;
        for &i in &path {
            out.push(t);
            t = &t.children().unwrap()[i];
        }
        out.reverse();
        Some(out)
    }

    pub fn ids(&self) -> BTreeSet<NodeId> {
        self.preorder().into_iter().map(|t| t.id()).collect()
    }

    /// Replaces the node at `at` by `replacement`, keeping the ids of
    /// `replacement` as they are. The caller guarantees uniqueness.
    pub fn replace(&self, at: NodeId, replacement: &DerivationTree) -> Result<DerivationTree, TreeError> {
        let path = self.path_to(at).ok_or(TreeError::UnknownNode(at))?;
        Ok(self.replace_path(&path, replacement))
    }

    pub fn replace_path(&self, path: &[usize], replacement: &DerivationTree) -> DerivationTree {
        match path.split_first() {
            None => replacement.clone(),
            Some((&i, rest)) => {
                let mut cs = self.children().expect("path into leaf").to_vec();
                cs[i] = cs[i].replace_path(rest, replacement);
                DerivationTree::new(self.id(), self.symbol().clone(), Some(cs))
            }
        }
    }

    /// Replaces several nodes at once; ids of replacements are kept.
    pub fn replace_many(&self, repl: &BTreeMap<NodeId, DerivationTree>) -> DerivationTree {
        if repl.is_empty() {
            return self.clone();
        }
        if let Some(r) = repl.get(&self.id()) {
            return r.clone();
        }
        match self.children() {
            None => self.clone(),
            Some(cs) => {
                let mut changed = false;
                let new: Vec<DerivationTree> = cs
                    .iter()
                    .map(|c| {
                        let n = c.replace_many(repl);
                        changed |= !n.ptr_eq(c);
                        n
                    })
                    .collect();
                if changed {
                    DerivationTree::new(self.id(), self.symbol().clone(), Some(new))
                } else {
                    self.clone()
                }
            }
        }
    }

    /// Substitutes the subtree at `at` by `replacement`, renumbering the
    /// replacement so that all ids stay unique. Ids outside the replaced
    /// subtree are preserved.
    pub fn substitute(&self, at: NodeId, replacement: &DerivationTree) -> Result<DerivationTree, TreeError> {
        let path = self.path_to(at).ok_or(TreeError::UnknownNode(at))?;
        let target = self.get(&path).unwrap();
        if target.symbol() != replacement.symbol() {
            return Err(TreeError::LabelMismatch {
                expected: target.label().to_string(),
                found: replacement.label().to_string(),
            });
        }
        let mut next = self.max_id().0 + 1;
        let fresh = replacement.renumber(&mut next);
        Ok(self.replace_path(&path, &fresh))
    }

    /// Copies the tree with ids assigned in preorder from `*next`.
    pub fn renumber(&self, next: &mut u64) -> DerivationTree {
        let id = NodeId(*next);
        *next += 1;
        let children = self
            .children()
            .map(|cs| cs.iter().map(|c| c.renumber(next)).collect());
        DerivationTree::new(id, self.symbol().clone(), children)
    }

    /// Copies the tree, renumbering only nodes whose id is in `clash`.
    pub fn renumber_clashing(&self, clash: &HashSet<NodeId>, next: &mut u64) -> DerivationTree {
        let id = if clash.contains(&self.id()) {
            let id = NodeId(*next);
            *next += 1;
            id
        } else {
            self.id()
        };
        let children = self
            .children()
            .map(|cs| cs.iter().map(|c| c.renumber_clashing(clash, next)).collect());
        DerivationTree::new(id, self.symbol().clone(), children)
    }

    /// Checks that every inner node follows a grammar production and that
    /// ids are unique.
    pub fn validate(&self, g: &Grammar) -> Result<(), TreeError> {
        let mut seen = HashSet::new();
        for t in self.preorder() {
            if !seen.insert(t.id()) {
                return Err(TreeError::NotADerivation(t.id()));
            }
            if let (Symbol::Nonterminal(n), Some(cs)) = (t.symbol(), t.children()) {
                let rhs: Vec<Symbol> = cs.iter().map(|c| c.symbol().clone()).collect();
                if g.find_production(n, &rhs).is_none() {
                    return Err(TreeError::NotADerivation(t.id()));
                }
            }
            if let Symbol::Nonterminal(n) = t.symbol() {
                if !g.is_nonterminal(n) {
                    return Err(TreeError::NotADerivation(t.id()));
                }
            }
        }
        Ok(())
    }

    /// Production index used at this node, if expanded.
    pub fn production(&self, g: &Grammar) -> Option<usize> {
        let cs = self.children()?;
        if self.is_terminal() {
            return None;
        }
        let rhs: Vec<Symbol> = cs.iter().map(|c| c.symbol().clone()).collect();
        g.find_production(self.label(), &rhs)
    }

    /// k-paths of the grammar graph exercised by this tree. The last node
    /// of a path may be an open leaf; all earlier nodes are expanded.
    pub fn kpaths(&self, g: &Grammar, k: usize) -> HashSet<KPath> {
        let mut out = HashSet::new();
        for t in self.preorder() {
            if t.is_terminal() {
                continue;
            }
            let Some(idx) = g.nonterminal_index(t.label()) else {
                continue;
            };
            let mut path = vec![idx as u32];
            collect_kpaths(t, g, k - 1, &mut path, &mut out);
        }
        out
    }

    /// Fraction of the grammar's k-paths covered by this tree.
    pub fn kpath_coverage(&self, g: &Grammar, k: usize) -> f64 {
        let all = g.kpaths(k);
        if all.is_empty() {
            return 1.0;
        }
        let mine = self.kpaths(g, k);
        mine.iter().filter(|p| all.contains(*p)).count() as f64 / all.len() as f64
    }

    /// Indented dump: one node per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (path, t) in self.paths() {
            let indent = "  ".repeat(path.len());
            let open = if t.is_open_leaf() { " (open)" } else { "" };
            out.push_str(&format!("{indent}{} {}{open}\n", t.id(), t.symbol()));
        }
        out
    }
}

fn collect_kpaths(t: &DerivationTree, g: &Grammar, remaining: usize, path: &mut KPath, out: &mut HashSet<KPath>) {
    if remaining == 0 {
        out.insert(path.clone());
        return;
    }
    let (Some(cs), Some(prod)) = (t.children(), t.production(g)) else {
        return;
    };
    for c in cs {
        if c.is_terminal() {
            continue;
        }
        let ci = g.nonterminal_index(c.label()).unwrap() as u32;
        path.push(prod as u32);
        path.push(ci);
        collect_kpaths(c, g, remaining - 1, path, out);
        path.pop();
        path.pop();
    }
}

impl PartialEq for DerivationTree {
    fn eq(&self, other: &Self) -> bool {
        if self.ptr_eq(other) {
            return true;
        }
        self.id() == other.id()
            && self.symbol() == other.symbol()
            && self.size() == other.size()
            && self.0.children == other.0.children
    }
}

impl Eq for DerivationTree {}

impl Hash for DerivationTree {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id().hash(state);
        self.symbol().hash(state);
        if let Some(cs) = self.children() {
            cs.len().hash(state);
            for c in cs {
                c.hash(state);
            }
        }
    }
}

impl fmt::Debug for DerivationTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DerivationTree({} {:?})", self.id(), self.render())
    }
}

impl fmt::Display for DerivationTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Structural equality ignoring ids.
pub fn same_shape(a: &DerivationTree, b: &DerivationTree) -> bool {
    if a.symbol() != b.symbol() {
        return false;
    }
    match (a.children(), b.children()) {
        (None, None) => true,
        (Some(x), Some(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| same_shape(p, q)),
        _ => false,
    }
}

/// If `closed` is a completion of `open` (same structure wherever `open`
/// is expanded), returns that completion carrying `open`'s ids; nodes that
/// only exist in `closed` are renumbered from `*next`.
pub fn refine(open: &DerivationTree, closed: &DerivationTree, next: &mut u64) -> Option<DerivationTree> {
    if open.symbol() != closed.symbol() {
        return None;
    }
    match (open.children(), closed.children()) {
        (None, _) => {
            let fresh = closed.renumber(next);
            let cs = fresh.children().map(|c| c.to_vec());
            Some(DerivationTree::new(open.id(), open.symbol().clone(), cs))
        }
        (Some(a), Some(b)) if a.len() == b.len() => {
            let cs = a
                .iter()
                .zip(b)
                .map(|(x, y)| refine(x, y, next))
                .collect::<Option<Vec<_>>>()?;
            Some(DerivationTree::new(open.id(), open.symbol().clone(), Some(cs)))
        }
        _ => None,
    }
}

/// All closed trees of height at most `max_depth` rooted at `nt`.
pub fn closed_trees(g: &Grammar, nt: &str, max_depth: usize) -> Vec<DerivationTree> {
    let mut memo = BTreeMap::new();
    let shapes = closed_shapes(g, nt, max_depth, &mut memo);
    shapes
        .iter()
        .map(|s| {
            let mut next = 1;
            s.renumber(&mut next)
        })
        .collect()
}

fn closed_shapes(
    g: &Grammar,
    nt: &str,
    depth: usize,
    memo: &mut BTreeMap<(String, usize), Vec<DerivationTree>>,
) -> Vec<DerivationTree> {
    if depth < 2 || g.min_height(nt) > depth {
        return Vec::new();
    }
    if let Some(hit) = memo.get(&(nt.to_string(), depth)) {
        return hit.clone();
    }
    let mut out = Vec::new();
    for &p in g.alternatives(nt) {
        if g.production_min_height(p) > depth {
            continue;
        }
        let mut partial: Vec<Vec<DerivationTree>> = vec![Vec::new()];
        for s in &g.production(p).rhs {
            let options = match s {
                Symbol::Terminal(_) => vec![DerivationTree::new(NodeId(0), s.clone(), None)],
                Symbol::Nonterminal(n) => closed_shapes(g, n, depth - 1, memo),
            };
            let mut next = Vec::with_capacity(partial.len() * options.len());
            for pre in &partial {
                for o in &options {
                    let mut v = pre.clone();
                    v.push(o.clone());
                    next.push(v);
                }
            }
            partial = next;
        }
        let sym = Symbol::Nonterminal(g.intern(nt).unwrap());
        out.extend(
            partial
                .into_iter()
                .map(|cs| DerivationTree::new(NodeId(0), sym.clone(), Some(cs))),
        );
    }
    memo.insert((nt.to_string(), depth), out.clone());
    out
}

/// All closed trees obtained by substituting every open leaf of `t` with a
/// closed tree of height at most `max_depth` rooted at that leaf's
/// nonterminal. Ids of `t`'s nodes are preserved.
pub fn enumerate_closures(g: &Grammar, t: &DerivationTree, max_depth: usize) -> Vec<DerivationTree> {
    if t.is_closed() {
        return vec![t.clone()];
    }
    let leaves: Vec<&DerivationTree> = t.open_leaves();
    let mut memo = BTreeMap::new();
    let options: Vec<Vec<DerivationTree>> = leaves
        .iter()
        .map(|l| closed_shapes(g, l.label(), max_depth, &mut memo))
        .collect();
    if options.iter().any(|o| o.is_empty()) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut choice = vec![0usize; leaves.len()];
    loop {
        let mut next = t.max_id().0 + 1;
        let mut repl = BTreeMap::new();
        for (i, l) in leaves.iter().enumerate() {
            let shape = &options[i][choice[i]];
            let fresh = shape.renumber(&mut next);
            let cs = fresh.children().map(|c| c.to_vec());
            repl.insert(l.id(), DerivationTree::new(l.id(), l.symbol().clone(), cs));
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

/// Convenience wrapper: the grammar's start symbol as a single open node.
pub fn root_tree(g: &Grammar) -> DerivationTree {
    DerivationTree::open_leaf(NodeId(1), g.start())
}

/// Builds a tree from nested `(label, children)` data; ids in preorder
/// from 1. Labels in angle brackets are nonterminals.
#[derive(Debug, Clone)]
pub enum Shape {
    Open(&'static str),
    Term(&'static str),
    Node(&'static str, Vec<Shape>),
}

impl Shape {
    pub fn build(&self) -> DerivationTree {
        let mut next = 1;
        self.build_from(&mut next)
    }

    fn build_from(&self, next: &mut u64) -> DerivationTree {
        let id = NodeId(*next);
        *next += 1;
        match self {
            Shape::Open(n) => DerivationTree::open_leaf(id, n),
            Shape::Term(t) => DerivationTree::new(id, Symbol::terminal(t), None),
            Shape::Node(n, cs) => {
                let cs = cs.iter().map(|c| c.build_from(next)).collect();
                DerivationTree::new(id, Symbol::nonterminal(n), Some(cs))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;

    fn digits() -> Grammar {
        parse_grammar("<pair> ::= <digit> <digit>\n<digit> ::= \"0\" | \"1\"").unwrap()
    }

    #[test]
    fn yield_of_single_terminal() {
        let t = Shape::Node("<start>", vec![Shape::Term("q")]).build();
        assert_eq!(t.yield_str().unwrap(), "q");
        assert_eq!(t.size(), 2);
    }

    #[test]
    fn open_tree_has_no_yield() {
        let t = Shape::Node("<pair>", vec![Shape::Open("<digit>"), Shape::Open("<digit>")]).build();
        assert_eq!(t.yield_str(), Err(TreeError::OpenTree));
        assert_eq!(t.render(), "<digit><digit>");
    }

    #[test]
    fn closures_cartesian_product() {
        let g = digits();
        let t = Shape::Node("<pair>", vec![Shape::Open("<digit>"), Shape::Open("<digit>")]).build();
        let cl = enumerate_closures(&g, &t, 2);
        assert_eq!(cl.len(), 4);
        let ys: BTreeSet<String> = cl.iter().map(|c| c.yield_str().unwrap()).collect();
        assert_eq!(ys.len(), 4);
        for c in &cl {
            c.validate(&g).unwrap();
            assert!(c.contains(NodeId(2)) && c.contains(NodeId(3)));
        }
    }

    #[test]
    fn closed_tree_closure_is_itself() {
        let g = digits();
        let t = closed_trees(&g, "<pair>", 3).remove(0);
        assert_eq!(enumerate_closures(&g, &t, 3), vec![t]);
    }

    #[test]
    fn substitute_renumbers_replacement() {
        let t = Shape::Node("<pair>", vec![Shape::Open("<digit>"), Shape::Open("<digit>")]).build();
        let r = Shape::Node("<digit>", vec![Shape::Term("1")]).build();
        let s = t.substitute(NodeId(2), &r).unwrap();
        assert_eq!(s.render(), "1<digit>");
        assert!(s.contains(NodeId(3)));
        assert!(!s.contains(NodeId(2)));
        assert_eq!(s.ids().len(), s.size());
        assert!(matches!(t.substitute(NodeId(9), &r), Err(TreeError::UnknownNode(_))));
        assert!(matches!(t.substitute(NodeId(1), &r), Err(TreeError::LabelMismatch { .. })));
    }

    #[test]
    fn substitute_at_root_is_identity_up_to_ids() {
        let g = digits();
        let t = closed_trees(&g, "<pair>", 3).remove(1);
        let s = t.substitute(t.id(), &t).unwrap();
        assert!(same_shape(&s, &t));
    }

    #[test]
    fn refine_keeps_open_ids() {
        let g = digits();
        let open = Shape::Node("<pair>", vec![Shape::Open("<digit>"), Shape::Node("<digit>", vec![Shape::Term("0")])]).build();
        let closed = closed_trees(&g, "<pair>", 3);
        let mut next = 100;
        let hits: Vec<_> = closed.iter().filter_map(|c| refine(&open, c, &mut next)).collect();
        assert_eq!(hits.len(), 2);
        for h in hits {
            assert!(h.contains(NodeId(2)));
            assert!(h.render().ends_with('0'));
        }
    }

    #[test]
    fn root_only_covers_root_one_path() {
        let g = digits();
        let t = root_tree(&g);
        let paths = t.kpaths(&g, 1);
        assert_eq!(paths.len(), 1);
        assert!((t.kpath_coverage(&g, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn closed_tree_covers_all_one_paths() {
        let g = digits();
        let t = closed_trees(&g, "<pair>", 3).remove(0);
        assert_eq!(t.kpath_coverage(&g, 1), 1.0);
    }
}
