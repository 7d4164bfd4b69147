//! Regular expressions for `str.in_re`, compiled to a Thompson NFA.

use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regex {
    Nothing,
    Literal(String),
    Range(char, char),
    AnyChar,
    Concat(Vec<Regex>),
    Union(Vec<Regex>),
    Star(Box<Regex>),
    Plus(Box<Regex>),
    Opt(Box<Regex>),
}

impl fmt::Display for Regex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(f: &mut fmt::Formatter<'_>, op: &str, xs: &[Regex]) -> fmt::Result {
            write!(f, "({op}")?;
            for x in xs {
                write!(f, " {x}")?;
            }
            write!(f, ")")
        }
        match self {
            Regex::Nothing => write!(f, "re.none"),
            Regex::Literal(s) => write!(f, "(str.to_re \"{}\")", crate::grammar::escape_terminal(s)),
            Regex::Range(a, b) => write!(f, "(re.range \"{a}\" \"{b}\")"),
            Regex::AnyChar => write!(f, "re.allchar"),
            Regex::Concat(xs) => list(f, "re.++", xs),
            Regex::Union(xs) => list(f, "re.union", xs),
            Regex::Star(x) => write!(f, "(re.* {x})"),
            Regex::Plus(x) => write!(f, "(re.+ {x})"),
            Regex::Opt(x) => write!(f, "(re.opt {x})"),
        }
    }
}

#[derive(Debug, Clone)]
enum Edge {
    Eps(usize),
    Char(char, char, usize),
}

/// Thompson NFA with a single start and accept state.
#[derive(Debug, Clone)]
pub struct Nfa {
    edges: Vec<Vec<Edge>>,
    start: usize,
    accept: usize,
}

impl Nfa {
    pub fn compile(re: &Regex) -> Nfa {
        let mut nfa = Nfa {
            edges: Vec::new(),
            start: 0,
            accept: 0,
        };
        let (s, a) = nfa.build(re);
        nfa.start = s;
        nfa.accept = a;
        nfa
    }

    fn state(&mut self) -> usize {
        self.edges.push(Vec::new());
        self.edges.len() - 1
    }

    fn build(&mut self, re: &Regex) -> (usize, usize) {
        let s = self.state();
        let a = self.state();
        match re {
            Regex::Nothing => {}
            Regex::Literal(text) => {
                let mut cur = s;
                for c in text.chars() {
                    let n = self.state();
                    self.edges[cur].push(Edge::Char(c, c, n));
                    cur = n;
                }
                self.edges[cur].push(Edge::Eps(a));
            }
            Regex::Range(lo, hi) => self.edges[s].push(Edge::Char(*lo, *hi, a)),
            Regex::AnyChar => self.edges[s].push(Edge::Char('\0', char::MAX, a)),
            Regex::Concat(xs) => {
                let mut cur = s;
                for x in xs {
                    let (xs_, xa) = self.build(x);
                    self.edges[cur].push(Edge::Eps(xs_));
                    cur = xa;
                }
                self.edges[cur].push(Edge::Eps(a));
            }
            Regex::Union(xs) => {
                for x in xs {
                    let (xs_, xa) = self.build(x);
                    self.edges[s].push(Edge::Eps(xs_));
                    self.edges[xa].push(Edge::Eps(a));
                }
            }
            Regex::Star(x) | Regex::Plus(x) | Regex::Opt(x) => {
                let (xs_, xa) = self.build(x);
                self.edges[s].push(Edge::Eps(xs_));
                self.edges[xa].push(Edge::Eps(a));
                if !matches!(re, Regex::Plus(_)) {
                    self.edges[s].push(Edge::Eps(a));
                }
                if !matches!(re, Regex::Opt(_)) {
                    self.edges[xa].push(Edge::Eps(xs_));
                }
            }
        }
        (s, a)
    }

    fn closure(&self, set: &mut BTreeSet<usize>) {
        let mut stack: Vec<usize> = set.iter().copied().collect();
        while let Some(q) = stack.pop() {
            for e in &self.edges[q] {
                if let Edge::Eps(n) = e {
                    if set.insert(*n) {
                        stack.push(*n);
                    }
                }
            }
        }
    }

    pub fn matches(&self, input: &str) -> bool {
        let mut cur = BTreeSet::from([self.start]);
        self.closure(&mut cur);
        for c in input.chars() {
            let mut next = BTreeSet::new();
            for &q in &cur {
                for e in &self.edges[q] {
                    if let Edge::Char(lo, hi, n) = e {
                        if *lo <= c && c <= *hi {
                            next.insert(*n);
                        }
                    }
                }
            }
            if next.is_empty() {
                return false;
            }
            self.closure(&mut next);
            cur = next;
        }
        cur.contains(&self.accept)
    }
}
