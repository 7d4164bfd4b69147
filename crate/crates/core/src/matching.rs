//! Match expressions: concrete syntax with placeholders and binders,
//! compiled to abstract derivation trees that are matched structurally.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::MatchError;
use crate::formula::Var;
use crate::grammar::Grammar;
use crate::parser::{parse_tokens, Tok};
use crate::tree::{DerivationTree, NodeId};

const MAX_OPTIONALS: usize = 6;
const PARSES_PER_FLATTENING: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MElem {
    Text(String),
    Placeholder(Arc<str>),
    Binder(Arc<str>, String),
    Optional(Vec<MElem>),
}

/// One parse of one flattening of a match expression. Binders point at
/// open leaves of `tree`.
#[derive(Clone, Debug)]
pub struct AbstractTree {
    pub tree: DerivationTree,
    pub binders: Vec<(Var, NodeId)>,
}

pub type Bindings = BTreeMap<Arc<str>, DerivationTree>;

#[derive(Clone, Debug)]
pub struct MatchExpr {
    raw: Arc<str>,
    ty: Arc<str>,
    elems: Arc<Vec<MElem>>,
    binders: Arc<Vec<Var>>,
    abstracts: Arc<Vec<AbstractTree>>,
}

impl PartialEq for MatchExpr {
    fn eq(&self, other: &Self) -> bool {
        self.ty == other.ty && self.raw == other.raw
    }
}

impl Eq for MatchExpr {}

impl Hash for MatchExpr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.ty.hash(state);
        self.raw.hash(state);
    }
}

impl PartialOrd for MatchExpr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MatchExpr {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.ty, &self.raw).cmp(&(&other.ty, &other.raw))
    }
}

fn malformed(m: impl Into<String>) -> MatchError {
    MatchError::Malformed(m.into())
}

fn parse_elems(raw: &str, g: &Grammar) -> Result<Vec<MElem>, MatchError> {
    let chars: Vec<char> = raw.chars().collect();
    let mut top: Vec<MElem> = Vec::new();
    let mut opt: Option<Vec<MElem>> = None;
    let mut i = 0;
    fn push_char(out: &mut Vec<MElem>, c: char) {
        if let Some(MElem::Text(s)) = out.last_mut() {
            s.push(c);
        } else {
            out.push(MElem::Text(c.to_string()));
        }
    }
    while i < chars.len() {
        let out = opt.as_mut().unwrap_or(&mut top);
        let c = chars[i];
        match c {
            '\\' if i + 1 < chars.len() => {
                push_char(out, chars[i + 1]);
                i += 2;
            }
            '[' => {
                if opt.is_some() {
                    return Err(malformed("nested optional"));
                }
                opt = Some(Vec::new());
                i += 1;
            }
            ']' => {
                let body = opt.take().ok_or_else(|| malformed("unbalanced ']'"))?;
                top.push(MElem::Optional(body));
                i += 1;
            }
            '{' => {
                let close = chars[i..]
                    .iter()
                    .position(|&c| c == '}')
                    .ok_or_else(|| malformed("unterminated binder"))?;
                let inner: String = chars[i + 1..i + close].iter().collect();
                let inner = inner.trim();
                let gt = inner.find('>').ok_or_else(|| malformed(format!("binder '{inner}' lacks a type")))?;
                let ty = &inner[..=gt];
                let name = inner[gt + 1..].trim();
                if !ty.starts_with('<') {
                    return Err(malformed(format!("binder '{inner}' lacks a type")));
                }
                let ty = g.intern(ty).ok_or_else(|| malformed(format!("unknown nonterminal {ty}")))?;
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(malformed(format!("bad binder name '{name}'")));
                }
                out.push(MElem::Binder(ty, name.to_string()));
                i += close + 1;
            }
            '<' => {
                let close = chars[i..].iter().position(|&c| c == '>');
                let candidate: Option<String> = close.map(|e| chars[i..=i + e].iter().collect());
                match candidate.as_deref().and_then(|n| g.intern(n)) {
                    Some(nt) => {
                        out.push(MElem::Placeholder(nt));
                        i += close.unwrap() + 1;
                    }
                    None => {
                        push_char(out, c);
                        i += 1;
                    }
                }
            }
            _ => {
                push_char(out, c);
                i += 1;
            }
        }
    }
    if opt.is_some() {
        return Err(malformed("unbalanced '['"));
    }
    Ok(top)
}

fn flatten(elems: &[MElem], mask: u32, toks: &mut Vec<Tok>) {
    let mut k = 0;
    for e in elems {
        match e {
            MElem::Optional(inner) => {
                if mask & (1 << k) != 0 {
                    flatten(inner, 0, toks);
                }
                k += 1;
            }
            MElem::Text(s) => toks.extend(s.chars().map(Tok::Char)),
            MElem::Placeholder(n) => toks.push(Tok::Hole {
                nonterminal: n.clone(),
                var: None,
            }),
            MElem::Binder(n, v) => toks.push(Tok::Hole {
                nonterminal: n.clone(),
                var: Some(v.clone()),
            }),
        }
    }
}

impl MatchExpr {
    /// Parses a match expression for type `ty` and computes its abstract
    /// trees: every flattening of the optional parts, parsed with holes.
    pub fn parse(raw: &str, ty: &str, g: &Grammar) -> Result<MatchExpr, MatchError> {
        let ty = g.intern(ty).ok_or_else(|| malformed(format!("unknown nonterminal {ty}")))?;
        let elems = parse_elems(raw, g)?;
        let mut binders: Vec<Var> = Vec::new();
        fn collect(elems: &[MElem], out: &mut Vec<Var>) -> Result<(), MatchError> {
            for e in elems {
                match e {
                    MElem::Binder(t, n) => {
                        if out.iter().any(|v| &*v.name == n) {
                            return Err(malformed(format!("duplicate binder {n}")));
                        }
                        out.push(Var::tree(n, t));
                    }
                    MElem::Optional(inner) => collect(inner, out)?,
                    _ => {}
                }
            }
            Ok(())
        }
        collect(&elems, &mut binders)?;
        let optionals = elems.iter().filter(|e| matches!(e, MElem::Optional(_))).count();
        if optionals > MAX_OPTIONALS {
            return Err(malformed("too many optional parts"));
        }
        let mut abstracts = Vec::new();
        for mask in (0..1u32 << optionals).rev() {
            let mut toks = Vec::new();
            flatten(&elems, mask, &mut toks);
            let Ok(parses) = parse_tokens(g, &ty, &toks, PARSES_PER_FLATTENING) else {
                continue;
            };
            for p in parses {
                let bs = p
                    .binders
                    .iter()
                    .map(|(name, path)| {
                        let var = binders.iter().find(|v| &*v.name == name).expect("binder declared").clone();
                        (var, p.tree.get(path).expect("binder path").id())
                    })
                    .collect();
                abstracts.push(AbstractTree { tree: p.tree, binders: bs });
            }
        }
        if abstracts.is_empty() {
            return Err(MatchError::Unparseable(ty.to_string()));
        }
        Ok(MatchExpr {
            raw: Arc::from(raw),
            ty,
            elems: Arc::new(elems),
            binders: Arc::new(binders),
            abstracts: Arc::new(abstracts),
        })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn ty(&self) -> &str {
        &self.ty
    }

    pub fn elements(&self) -> &[MElem] {
        &self.elems
    }

    pub fn binders(&self) -> &[Var] {
        &self.binders
    }

    pub fn abstract_trees(&self) -> &[AbstractTree] {
        &self.abstracts
    }

    /// All ways `t` matches, one binding map per matching abstract tree.
    pub fn match_tree(&self, t: &DerivationTree) -> Vec<Bindings> {
        let mut out: Vec<Bindings> = Vec::new();
        for a in self.abstracts.iter() {
            let mut b = Bindings::new();
            if match_trees(&a.tree, t, &a.binders, &mut b) && !out.contains(&b) {
                out.push(b);
            }
        }
        out
    }

    /// Whether some expansion of the open tree `t` might still match.
    pub fn could_match(&self, t: &DerivationTree) -> bool {
        self.abstracts.iter().any(|a| could_match(&a.tree, t))
    }

    /// A fresh copy of an abstract tree, renumbered from `next`, with the
    /// new ids of its binder leaves.
    pub fn instantiate(&self, idx: usize, next: &mut u64) -> (DerivationTree, Vec<(Var, NodeId)>) {
        let a = &self.abstracts[idx];
        let paths: Vec<(Var, Vec<usize>)> = a
            .binders
            .iter()
            .map(|(v, id)| (v.clone(), a.tree.path_to(*id).expect("binder in tree")))
            .collect();
        let tree = a.tree.renumber(next);
        let binders = paths
            .into_iter()
            .map(|(v, p)| (v, tree.get(&p).expect("binder path").id()))
            .collect();
        (tree, binders)
    }
}

/// Structural matching of an abstract tree against a concrete tree. Open
/// leaves of the abstract tree match any subtree with the same label and
/// bind it if they carry a binder.
pub fn match_trees(a: &DerivationTree, t: &DerivationTree, binders: &[(Var, NodeId)], out: &mut Bindings) -> bool {
    if a.label() != t.label() || a.is_terminal() != t.is_terminal() {
        return false;
    }
    let Some(ak) = a.children() else {
        if let Some((v, _)) = binders.iter().find(|(_, id)| *id == a.id()) {
            out.insert(v.name.clone(), t.clone());
        }
        return true;
    };
    let Some(tk) = t.children() else {
        return a.is_terminal();
    };
    ak.len() == tk.len() && ak.iter().zip(tk).all(|(x, y)| match_trees(x, y, binders, out))
}

fn could_match(a: &DerivationTree, t: &DerivationTree) -> bool {
    if a.label() != t.label() || a.is_terminal() != t.is_terminal() {
        return false;
    }
    match (a.children(), t.children()) {
        (None, _) | (_, None) => true,
        (Some(ak), Some(tk)) => ak.len() == tk.len() && ak.iter().zip(tk).all(|(x, y)| could_match(x, y)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;
    use crate::parser::parse_input;

    fn xml() -> Grammar {
        parse_grammar(
            "<xml-tree> ::= <text> | <xml-open-tag> <xml-tree> <xml-close-tag>\n\
             <xml-open-tag> ::= \"<\" <id> \">\" | \"<\" <id> \" \" <xml-attribute> \">\"\n\
             <xml-close-tag> ::= \"</\" <id> \">\"\n\
             <xml-attribute> ::= <id> \"=\" <id>\n\
             <id> ::= \"a\" | \"b\"\n\
             <text> ::= \"x\" | \"y\"\n",
        )
        .unwrap()
    }

    #[test]
    fn binders_and_optionals() {
        let g = xml();
        let m = MatchExpr::parse("<{<id> op}[ <xml-attribute>]><xml-tree></{<id> cl}>", "<xml-tree>", &g).unwrap();
        assert_eq!(m.binders().len(), 2);
        assert_eq!(m.abstract_trees().len(), 2);
        let t = parse_input(&g, "<a>x</b>").unwrap();
        let ms = m.match_tree(&t);
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0]["op"].yield_str().unwrap(), "a");
        assert_eq!(ms[0]["cl"].yield_str().unwrap(), "b");
        let t = parse_input(&g, "<a b=a>y</a>").unwrap();
        assert_eq!(m.match_tree(&t).len(), 1);
        assert!(m.match_tree(&parse_input(&g, "x").unwrap()).is_empty());
    }

    #[test]
    fn malformed_expressions() {
        let g = xml();
        for bad in ["[[x]]", "x]", "{<id> a}{<id> a}", "{<nope> a}", "[x"] {
            assert!(matches!(MatchExpr::parse(bad, "<xml-tree>", &g), Err(MatchError::Malformed(_))), "{bad}");
        }
        assert!(matches!(MatchExpr::parse("zzz", "<xml-tree>", &g), Err(MatchError::Unparseable(_))));
    }

    #[test]
    fn open_trees_may_match() {
        let g = xml();
        let m = MatchExpr::parse("<{<id> op}><xml-tree></{<id> cl}>", "<xml-tree>", &g).unwrap();
        let open = DerivationTree::open_leaf(NodeId(1), "<xml-tree>");
        assert!(m.could_match(&open));
        assert!(m.match_tree(&open).is_empty());
        assert!(!m.could_match(&parse_input(&g, "x").unwrap()));
    }

    #[test]
    fn instantiate_renumbers() {
        let g = xml();
        let m = MatchExpr::parse("<{<id> op}>x</{<id> cl}>", "<xml-tree>", &g).unwrap();
        let mut next = 100;
        let (t, bs) = m.instantiate(0, &mut next);
        assert_eq!(t.id(), NodeId(100));
        assert!(bs.iter().all(|(_, id)| t.find(*id).unwrap().is_open_leaf()));
    }
}
