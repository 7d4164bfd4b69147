//! Context-free grammars: the textual BNF format, structural queries and
//! the grammar graph used for k-path coverage.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use indexmap::IndexMap;

use crate::error::GrammarError;

/// A grammar symbol. Nonterminal names keep their angle brackets (`<id>`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Nonterminal(Arc<str>),
    Terminal(Arc<str>),
}

impl Symbol {
    pub fn nonterminal(name: &str) -> Self {
        Symbol::Nonterminal(Arc::from(name))
    }

    pub fn terminal(text: &str) -> Self {
        Symbol::Terminal(Arc::from(text))
    }

    pub fn is_nonterminal(&self) -> bool {
        matches!(self, Symbol::Nonterminal(_))
    }

    pub fn name(&self) -> &str {
        match self {
            Symbol::Nonterminal(n) | Symbol::Terminal(n) => n,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Nonterminal(n) => write!(f, "{n}"),
            Symbol::Terminal(t) => write!(f, "\"{}\"", escape_terminal(t)),
        }
    }
}

pub(crate) fn escape_terminal(t: &str) -> String {
    let mut out = String::with_capacity(t.len());
    for c in t.chars() {
        match c {
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out
}

/// A k-path through the grammar graph, encoded as alternating nonterminal
/// indices and production indices: `[nt, prod, nt, prod, ..., nt]`.
pub type KPath = Vec<u32>;

/// Longest yield length tracked by [`LengthTable`].
pub const MAX_YIELD_LEN: usize = 96;

/// Feasible yield lengths per nonterminal, bounded by [`MAX_YIELD_LEN`].
#[derive(Debug)]
pub struct LengthTable {
    feasible: HashMap<Arc<str>, Vec<bool>>,
}

impl LengthTable {
    fn new(g: &Grammar) -> Self {
        let mut feasible: HashMap<Arc<str>, Vec<bool>> =
            g.nonterminals().map(|n| (n.clone(), vec![false; MAX_YIELD_LEN + 1])).collect();
        loop {
            let mut changed = false;
            for p in g.productions() {
                let reach = sequence_lengths(&feasible, &p.rhs);
                let slot = feasible.get_mut(&p.lhs).unwrap();
                for (l, ok) in reach.into_iter().enumerate() {
                    if ok && !slot[l] {
                        slot[l] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        LengthTable { feasible }
    }

    pub fn feasible(&self, nt: &str, len: usize) -> bool {
        len <= MAX_YIELD_LEN && self.feasible.get(nt).is_some_and(|v| v[len])
    }

    /// Feasible lengths of a symbol sequence.
    pub fn sequence(&self, rhs: &[Symbol]) -> Vec<bool> {
        sequence_lengths(&self.feasible, rhs)
    }

    pub fn symbol_feasible(&self, s: &Symbol, len: usize) -> bool {
        match s {
            Symbol::Terminal(t) => t.chars().count() == len,
            Symbol::Nonterminal(n) => self.feasible(n, len),
        }
    }

    pub fn lengths(&self, nt: &str) -> Vec<usize> {
        (0..=MAX_YIELD_LEN).filter(|&l| self.feasible(nt, l)).collect()
    }
}

fn sequence_lengths(feasible: &HashMap<Arc<str>, Vec<bool>>, rhs: &[Symbol]) -> Vec<bool> {
    let mut cur = vec![false; MAX_YIELD_LEN + 1];
    cur[0] = true;
    for s in rhs {
        let mut next = vec![false; MAX_YIELD_LEN + 1];
        match s {
            Symbol::Terminal(t) => {
                let n = t.chars().count();
                for l in 0..=MAX_YIELD_LEN {
                    if cur[l] && l + n <= MAX_YIELD_LEN {
                        next[l + n] = true;
                    }
                }
            }
            Symbol::Nonterminal(nt) => {
                let f = &feasible[nt];
                for a in (0..=MAX_YIELD_LEN).filter(|&a| cur[a]) {
                    for b in (0..=MAX_YIELD_LEN - a).filter(|&b| f[b]) {
                        next[a + b] = true;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

#[derive(Debug, Clone)]
pub struct Production {
    pub lhs: Arc<str>,
    pub rhs: Vec<Symbol>,
}

/// A context-free grammar. Immutable after construction.
pub struct Grammar {
    start: Arc<str>,
    rules: IndexMap<Arc<str>, Vec<usize>>,
    productions: Vec<Production>,
    terminals: BTreeSet<Arc<str>>,
    /// Strict reachability: `b ∈ reach[a]` iff `a ⇒+ ...b...`.
    reach: HashMap<Arc<str>, BTreeSet<Arc<str>>>,
    min_height: HashMap<Arc<str>, usize>,
    prod_min_height: Vec<usize>,
    kpath_cache: Mutex<HashMap<usize, Arc<HashSet<KPath>>>>,
    lengths: OnceLock<Arc<LengthTable>>,
}

impl fmt::Debug for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grammar")
            .field("start", &self.start)
            .field("nonterminals", &self.rules.len())
            .field("productions", &self.productions.len())
            .finish()
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (lhs, prods) in &self.rules {
            let alts: Vec<String> = prods
                .iter()
                .map(|&p| {
                    self.productions[p]
                        .rhs
                        .iter()
                        .map(|s| s.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            writeln!(f, "{lhs} ::= {}", alts.join(" | "))?;
        }
        Ok(())
    }
}

impl Grammar {
    /// Builds a grammar from `(lhs, alternatives)` pairs. The first rule's
    /// left-hand side is the start symbol.
    pub fn new(rules: Vec<(String, Vec<Vec<Symbol>>)>) -> Result<Self, GrammarError> {
        let mut map: IndexMap<Arc<str>, Vec<usize>> = IndexMap::new();
        let mut productions = Vec::new();
        let mut terminals = BTreeSet::new();
        for (lhs, alts) in rules {
            let lhs: Arc<str> = Arc::from(lhs.as_str());
            let entry = map.entry(lhs.clone()).or_default();
            for rhs in alts {
                if rhs.is_empty() {
                    return Err(GrammarError::EmptyAlternative(lhs.to_string()));
                }
                for s in &rhs {
                    if let Symbol::Terminal(t) = s {
                        terminals.insert(t.clone());
                    }
                }
                entry.push(productions.len());
                productions.push(Production {
                    lhs: lhs.clone(),
                    rhs,
                });
            }
        }
        let start = map
            .keys()
            .next()
            .cloned()
            .ok_or(GrammarError::Empty)?;
        for p in &productions {
            for s in &p.rhs {
                if let Symbol::Nonterminal(n) = s {
                    if !map.contains_key(n) {
                        return Err(GrammarError::UndefinedNonterminal(n.to_string()));
                    }
                }
            }
        }

        let mut g = Grammar {
            start,
            rules: map,
            productions,
            terminals,
            reach: HashMap::new(),
            min_height: HashMap::new(),
            prod_min_height: Vec::new(),
            kpath_cache: Mutex::new(HashMap::new()),
            lengths: OnceLock::new(),
        };
        g.compute_reachability();
        g.compute_min_heights()?;
        Ok(g)
    }

    fn compute_reachability(&mut self) {
        let mut reach: HashMap<Arc<str>, BTreeSet<Arc<str>>> = HashMap::new();
        for (lhs, prods) in &self.rules {
            let direct = reach.entry(lhs.clone()).or_default();
            for &p in prods {
                for s in &self.productions[p].rhs {
                    if let Symbol::Nonterminal(n) = s {
                        direct.insert(n.clone());
                    }
                }
            }
        }
        loop {
            let mut changed = false;
            let keys: Vec<Arc<str>> = self.rules.keys().cloned().collect();
            for a in &keys {
                let succ: Vec<Arc<str>> = reach[a].iter().cloned().collect();
                let mut add = Vec::new();
                for b in succ {
                    for c in &reach[&b] {
                        if !reach[a].contains(c) {
                            add.push(c.clone());
                        }
                    }
                }
                if !add.is_empty() {
                    changed = true;
                    reach.get_mut(a).unwrap().extend(add);
                }
            }
            if !changed {
                break;
            }
        }
        self.reach = reach;
    }

    fn compute_min_heights(&mut self) -> Result<(), GrammarError> {
        const INF: usize = usize::MAX;
        let mut height: HashMap<Arc<str>, usize> =
            self.rules.keys().map(|k| (k.clone(), INF)).collect();
        let mut prod_h = vec![INF; self.productions.len()];
        loop {
            let mut changed = false;
            for (i, p) in self.productions.iter().enumerate() {
                let mut h = 1usize;
                let mut finite = true;
                for s in &p.rhs {
                    match s {
                        Symbol::Terminal(_) => h = h.max(1),
                        Symbol::Nonterminal(n) => {
                            let c = height[n];
                            if c == INF {
                                finite = false;
                                break;
                            }
                            h = h.max(c);
                        }
                    }
                }
                if finite {
                    let h = h + 1;
                    if h < prod_h[i] {
                        prod_h[i] = h;
                        changed = true;
                    }
                    if h < height[&p.lhs] {
                        height.insert(p.lhs.clone(), h);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if let Some((n, _)) = self
            .rules
            .keys()
            .map(|k| (k, height[k]))
            .find(|(_, h)| *h == INF)
        {
            return Err(GrammarError::Unproductive(n.to_string()));
        }
        self.min_height = height;
        self.prod_min_height = prod_h;
        Ok(())
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn start_symbol(&self) -> Arc<str> {
        self.start.clone()
    }

    pub fn nonterminals(&self) -> impl Iterator<Item = &Arc<str>> {
        self.rules.keys()
    }

    pub fn terminals(&self) -> &BTreeSet<Arc<str>> {
        &self.terminals
    }

    pub fn is_nonterminal(&self, name: &str) -> bool {
        self.rules.contains_key(name)
    }

    /// Interned handle for a nonterminal name.
    pub fn intern(&self, name: &str) -> Option<Arc<str>> {
        self.rules.get_key_value(name).map(|(k, _)| k.clone())
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    /// Production indices of `nt`, in file order.
    pub fn alternatives(&self, nt: &str) -> &[usize] {
        self.rules.get(nt).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn production(&self, idx: usize) -> &Production {
        &self.productions[idx]
    }

    /// Index of the production `lhs -> rhs`, if present.
    pub fn find_production(&self, lhs: &str, rhs: &[Symbol]) -> Option<usize> {
        self.alternatives(lhs)
            .iter()
            .copied()
            .find(|&p| self.productions[p].rhs == rhs)
    }

    pub fn nonterminal_index(&self, nt: &str) -> Option<usize> {
        self.rules.get_index_of(nt)
    }

    /// True iff some sentential form derivable in one or more steps from
    /// `from` contains `to`.
    pub fn reachable(&self, from: &str, to: &str) -> Result<bool, GrammarError> {
        for s in [from, to] {
            if !self.is_nonterminal(s) {
                return Err(GrammarError::UnknownSymbol(s.to_string()));
            }
        }
        Ok(self.reaches(from, to))
    }

    /// Infallible variant of [`Grammar::reachable`]; unknown symbols are
    /// unreachable.
    pub fn reaches(&self, from: &str, to: &str) -> bool {
        self.reach.get(from).is_some_and(|s| s.contains(to))
    }

    /// `from == to` or `from` reaches `to`.
    pub fn reaches_or_is(&self, from: &str, to: &str) -> bool {
        from == to || self.reaches(from, to)
    }

    pub fn is_recursive(&self, nt: &str) -> bool {
        self.reaches(nt, nt)
    }

    /// Minimal height of a closed tree rooted at `nt` (root = 1).
    pub fn min_height(&self, nt: &str) -> usize {
        self.min_height.get(nt).copied().unwrap_or(usize::MAX)
    }

    pub fn production_min_height(&self, prod: usize) -> usize {
        self.prod_min_height[prod]
    }

    /// Nonterminals reachable from the start symbol, including the start.
    pub fn reachable_from_start(&self) -> BTreeSet<Arc<str>> {
        let mut out: BTreeSet<Arc<str>> = self.reach[&self.start].clone();
        out.insert(self.start.clone());
        out
    }

    /// Yields of all closed trees of height at most `max_depth`, rooted at
    /// the start symbol.
    pub fn enumerate_strings(&self, max_depth: usize) -> BTreeSet<String> {
        self.enumerate_strings_from(&self.start, max_depth)
    }

    pub fn enumerate_strings_from(&self, nt: &str, max_depth: usize) -> BTreeSet<String> {
        let mut memo = HashMap::new();
        self.yields(nt, max_depth, &mut memo)
    }

    fn yields(
        &self,
        nt: &str,
        depth: usize,
        memo: &mut HashMap<(Arc<str>, usize), BTreeSet<String>>,
    ) -> BTreeSet<String> {
        if depth < 2 {
            return BTreeSet::new();
        }
        let key_nt = match self.intern(nt) {
            Some(k) => k,
            None => return BTreeSet::new(),
        };
        if let Some(r) = memo.get(&(key_nt.clone(), depth)) {
            return r.clone();
        }
        let mut out = BTreeSet::new();
        for &p in self.alternatives(nt) {
            let mut partial: BTreeSet<String> = BTreeSet::from([String::new()]);
            for s in &self.productions[p].rhs {
                let parts = match s {
                    Symbol::Terminal(t) => BTreeSet::from([t.to_string()]),
                    Symbol::Nonterminal(n) => self.yields(n, depth - 1, memo),
                };
                let mut next = BTreeSet::new();
                for a in &partial {
                    for b in &parts {
                        next.insert(format!("{a}{b}"));
                    }
                }
                partial = next;
                if partial.is_empty() {
                    break;
                }
            }
            out.extend(partial);
        }
        memo.insert((key_nt, depth), out.clone());
        out
    }

    /// Which yield lengths (in characters, up to [`MAX_YIELD_LEN`]) each
    /// nonterminal can produce.
    pub fn length_table(&self) -> Arc<LengthTable> {
        self.lengths.get_or_init(|| Arc::new(LengthTable::new(self))).clone()
    }

    /// All k-paths of the grammar graph starting at any nonterminal
    /// reachable from the start symbol.
    pub fn kpaths(&self, k: usize) -> Arc<HashSet<KPath>> {
        assert!(k >= 1, "k must be at least 1");
        if let Some(hit) = self.kpath_cache.lock().unwrap().get(&k) {
            return hit.clone();
        }
        let mut out = HashSet::new();
        for nt in self.reachable_from_start() {
            let idx = self.nonterminal_index(&nt).unwrap() as u32;
            let mut path = vec![idx];
            self.extend_kpaths(&nt, k - 1, &mut path, &mut out);
        }
        let out = Arc::new(out);
        self.kpath_cache.lock().unwrap().insert(k, out.clone());
        out
    }

    fn extend_kpaths(&self, nt: &str, remaining: usize, path: &mut KPath, out: &mut HashSet<KPath>) {
        if remaining == 0 {
            out.insert(path.clone());
            return;
        }
        for &p in self.alternatives(nt) {
            let mut seen = BTreeSet::new();
            for s in &self.productions[p].rhs {
                if let Symbol::Nonterminal(child) = s {
                    if !seen.insert(child.clone()) {
                        continue;
                    }
                    let ci = self.nonterminal_index(child).unwrap() as u32;
                    path.push(p as u32);
                    path.push(ci);
                    self.extend_kpaths(child, remaining - 1, path, out);
                    path.pop();
                    path.pop();
                }
            }
        }
    }

    /// Adjacency of the grammar graph: nonterminal to the nonterminals that
    /// occur in one of its expansions.
    pub fn adjacency(&self) -> BTreeMap<Arc<str>, BTreeSet<Arc<str>>> {
        self.rules
            .iter()
            .map(|(lhs, prods)| {
                let succ = prods
                    .iter()
                    .flat_map(|&p| self.productions[p].rhs.iter())
                    .filter_map(|s| match s {
                        Symbol::Nonterminal(n) => Some(n.clone()),
                        _ => None,
                    })
                    .collect();
                (lhs.clone(), succ)
            })
            .collect()
    }
}

/// Parses the line-oriented BNF format:
///
/// ```text
/// # comment
/// <start> ::= <a> "," <a> | "x"
/// ```
///
/// Several lines may define the same nonterminal; their alternatives are
/// appended in order.
pub fn parse_grammar(text: &str) -> Result<Grammar, GrammarError> {
    let mut rules: Vec<(String, Vec<Vec<Symbol>>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut lx = LineLexer::new(line, line_no);
        lx.skip_ws();
        let lhs = lx.nonterminal()?;
        lx.skip_ws();
        lx.expect("::=")?;
        let mut alts = vec![Vec::new()];
        loop {
            lx.skip_ws();
            match lx.peek() {
                None => break,
                Some('#') => break,
                Some('|') => {
                    lx.bump();
                    alts.push(Vec::new());
                }
                Some('<') => {
                    let n = lx.nonterminal()?;
                    alts.last_mut().unwrap().push(Symbol::Nonterminal(Arc::from(n.as_str())));
                }
                Some('"') => {
                    let t = lx.terminal()?;
                    alts.last_mut().unwrap().push(Symbol::Terminal(Arc::from(t.as_str())));
                }
                Some(c) => return Err(lx.error(format!("unexpected character '{c}'"))),
            }
        }
        if alts.iter().any(|a| a.is_empty()) {
            return Err(lx.error("empty alternative (use \"\" for epsilon)".into()));
        }
        match index.get(&lhs) {
            Some(&i) => rules[i].1.extend(alts),
            None => {
                index.insert(lhs.clone(), rules.len());
                rules.push((lhs, alts));
            }
        }
    }
    Grammar::new(rules)
}

struct LineLexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

impl<'a> LineLexer<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        LineLexer {
            chars: src.chars().collect(),
            pos: 0,
            line,
            _src: src,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        self.pos += 1;
        c
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn error(&self, message: String) -> GrammarError {
        GrammarError::Syntax {
            line: self.line,
            column: self.pos + 1,
            message,
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), GrammarError> {
        for expected in s.chars() {
            if self.peek() != Some(expected) {
                return Err(self.error(format!("expected '{s}'")));
            }
            self.pos += 1;
        }
        Ok(())
    }

    fn nonterminal(&mut self) -> Result<String, GrammarError> {
        if self.peek() != Some('<') {
            return Err(self.error("expected nonterminal".into()));
        }
        let mut name = String::from("<");
        self.pos += 1;
        loop {
            match self.bump() {
                Some('>') if name.len() > 1 => {
                    name.push('>');
                    return Ok(name);
                }
                Some(c) if !c.is_whitespace() && c != '<' && c != '>' => name.push(c),
                _ => {
                    self.pos -= 1;
                    return Err(self.error("malformed nonterminal".into()));
                }
            }
        }
    }

    fn terminal(&mut self) -> Result<String, GrammarError> {
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated string".into())),
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    _ => return Err(self.error("invalid escape".into())),
                },
                Some(c) => out.push(c),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const XMLISH: &str = r#"
<xml-tree> ::= <text> | <xml-open-tag> <xml-tree> <xml-close-tag>
<xml-open-tag> ::= "<" <id> ">"
<xml-close-tag> ::= "</" <id> ">"
<id> ::= "a" | "b"
<text> ::= "x"
"#;

    #[test]
    fn minimal_grammar() {
        let g = parse_grammar("<start> ::= <a>\n<a> ::= \"x\"").unwrap();
        assert_eq!(g.nonterminals().count(), 2);
        assert_eq!(g.start(), "<start>");
    }

    #[test]
    fn undefined_nonterminal_is_named() {
        let err = parse_grammar("<a> ::= <b>").unwrap_err();
        assert!(matches!(err, GrammarError::UndefinedNonterminal(ref n) if n == "<b>"));
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_grammar("<a> ::= \"x\"\n<b> = \"y\"").unwrap_err();
        match err {
            GrammarError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn escapes_and_comments() {
        let g = parse_grammar("# hi\n<a> ::= \"\\n\\t\\\"\\\\\" # trailing\n").unwrap();
        let p = g.production(0);
        assert_eq!(p.rhs, vec![Symbol::terminal("\n\t\"\\")]);
    }

    #[test]
    fn reachability_fixpoint() {
        let g = parse_grammar(XMLISH).unwrap();
        assert!(g.reachable("<xml-tree>", "<id>").unwrap());
        assert!(!g.reachable("<id>", "<xml-tree>").unwrap());
        assert!(g.reachable("<xml-tree>", "<xml-tree>").unwrap());
        assert!(g.reachable("<nope>", "<id>").is_err());
        let g = parse_grammar("<a> ::= \"x\"").unwrap();
        assert!(!g.reachable("<a>", "<a>").unwrap());
    }

    #[test]
    fn enumerate_small() {
        let g = parse_grammar("<start> ::= \"a\" | \"b\"").unwrap();
        let s: Vec<_> = g.enumerate_strings(2).into_iter().collect();
        assert_eq!(s, vec!["a", "b"]);
        let g = parse_grammar("<s> ::= \"x\" | \"x\" <s>").unwrap();
        let s: Vec<_> = g.enumerate_strings(3).into_iter().collect();
        assert_eq!(s, vec!["x", "xx"]);
        let g = parse_grammar("<s> ::= <a>\n<a> ::= \"q\"").unwrap();
        assert!(g.enumerate_strings(1).is_empty());
        assert!(g.enumerate_strings(2).is_empty());
        assert_eq!(g.enumerate_strings(3).len(), 1);
    }

    #[test]
    fn unproductive_rejected() {
        assert!(matches!(
            parse_grammar("<a> ::= <a> \"x\""),
            Err(GrammarError::Unproductive(_))
        ));
    }

    #[test]
    fn min_heights() {
        let g = parse_grammar(XMLISH).unwrap();
        assert_eq!(g.min_height("<id>"), 2);
        assert_eq!(g.min_height("<xml-tree>"), 3);
    }

    #[test]
    fn kpaths_one_are_reachable_nonterminals() {
        let g = parse_grammar(XMLISH).unwrap();
        assert_eq!(g.kpaths(1).len(), 5);
    }
}
