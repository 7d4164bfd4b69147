//! Cost factors and their weighted geometric mean.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::CostError;
use crate::formula::Formula;
use crate::grammar::{Grammar, KPath};
use crate::sample::sample_with_length;
use crate::tree::DerivationTree;

pub const DEFAULT_WEIGHTS: [f64; 5] = [11.0, 3.0, 5.0, 20.0, 10.0];
pub const DEFAULT_K: usize = 3;
const CLOSING_SAMPLES: usize = 10;

/// Weights for (closing cost, constraint cost, depth, k-path coverage,
/// global k-path coverage).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostVector {
    weights: [f64; 5],
}

impl CostVector {
    pub fn new(weights: [f64; 5]) -> Result<Self, CostError> {
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(CostError::BadWeight(w.to_string()));
        }
        if weights.iter().all(|w| *w == 0.0) {
            return Err(CostError::AllZero);
        }
        Ok(CostVector { weights })
    }

    pub fn weights(&self) -> [f64; 5] {
        self.weights
    }
}

impl Default for CostVector {
    fn default() -> Self {
        CostVector { weights: DEFAULT_WEIGHTS }
    }
}

impl FromStr for CostVector {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self, CostError> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(CostError::Count(parts.len()));
        }
        let mut w = [0.0; 5];
        for (slot, p) in w.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| CostError::BadWeight(p.to_string()))?;
        }
        CostVector::new(w)
    }
}

impl fmt::Display for CostVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.weights.iter().map(|w| w.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// `(prod (cf+1)^w)^(1/sum w) - 1` over the factors with nonzero weight.
pub fn aggregate(cfs: &[f64; 5], w: &CostVector) -> f64 {
    let mut log_sum = 0.0;
    let mut weight_sum = 0.0;
    for (cf, w) in cfs.iter().zip(w.weights) {
        if w == 0.0 {
            continue;
        }
        log_sum += w * (cf + 1.0).ln();
        weight_sum += w;
    }
    (log_sum / weight_sum).exp() - 1.0
}

/// Estimated instantiation effort per nonterminal: the mean node count of
/// seeded random closed trees.
#[derive(Clone, Debug)]
pub struct ClosingCosts {
    per: BTreeMap<Arc<str>, f64>,
}

impl ClosingCosts {
    pub fn new(g: &Grammar, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = g.length_table();
        let mut per = BTreeMap::new();
        for nt in g.nonterminals() {
            let lens: Vec<usize> = table.lengths(nt).into_iter().take(3).collect();
            let mut total = 0usize;
            let mut n = 0usize;
            for _ in 0..CLOSING_SAMPLES {
                let Some(&len) = lens.choose(&mut rng) else { break };
                let mut next = 1;
                if let Some(t) = sample_with_length(g, nt, len, &mut rng, &mut next) {
                    total += t.size();
                    n += 1;
                }
            }
            let est = if n == 0 { g.min_height(nt) as f64 } else { total as f64 / n as f64 };
            per.insert(nt.clone(), est);
        }
        ClosingCosts { per }
    }

    pub fn of(&self, nt: &str) -> f64 {
        self.per.get(nt).copied().unwrap_or(0.0)
    }

    /// Summed estimate over the open leaves of `t`.
    pub fn cost(&self, t: &DerivationTree) -> f64 {
        t.open_leaves().iter().map(|l| self.of(l.label())).sum()
    }
}

pub fn constraint_cost(phi: &[Formula]) -> f64 {
    phi.iter()
        .map(|f| (1 + 2 * f.existential_count() + f.quantifier_depth()) as f64)
        .sum()
}

pub fn kpath_penalty(g: &Grammar, t: &DerivationTree, k: usize) -> f64 {
    1.0 - t.kpath_coverage(g, k)
}

/// k-paths covered by results emitted so far. The record is cleared once
/// every k-path of the grammar has been covered.
#[derive(Clone, Debug)]
pub struct GlobalCoverage {
    k: usize,
    all: Arc<HashSet<KPath>>,
    covered: HashSet<KPath>,
}

impl GlobalCoverage {
    pub fn new(g: &Grammar, k: usize) -> Self {
        GlobalCoverage { k, all: g.kpaths(k), covered: HashSet::new() }
    }

    pub fn penalty(&self, g: &Grammar, t: &DerivationTree) -> f64 {
        if self.all.is_empty() || self.covered.is_empty() {
            return 0.0;
        }
        let seen = t.kpaths(g, self.k).iter().filter(|p| self.covered.contains(*p)).count();
        seen as f64 / self.all.len() as f64
    }

    pub fn record(&mut self, g: &Grammar, t: &DerivationTree) {
        for p in t.kpaths(g, self.k) {
            if self.all.contains(&p) {
                self.covered.insert(p);
            }
        }
        if self.covered.len() == self.all.len() {
            self.covered.clear();
        }
    }

    pub fn covered(&self) -> usize {
        self.covered.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;
    use crate::parser::parse_input;

    #[test]
    fn aggregate_examples() {
        let w = CostVector::default();
        assert_eq!(aggregate(&[0.0; 5], &w), 0.0);
        let eq = CostVector::new([1.0; 5]).unwrap();
        assert!((aggregate(&[1.0; 5], &eq) - 1.0).abs() < 1e-12);
        let single = CostVector::new([0.0, 0.0, 4.0, 0.0, 0.0]).unwrap();
        assert!((aggregate(&[9.0, 3.0, 2.5, 1.0, 7.0], &single) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn weight_vectors() {
        assert_eq!(CostVector::new([0.0; 5]), Err(CostError::AllZero));
        assert!(CostVector::new([1.0, -1.0, 0.0, 0.0, 0.0]).is_err());
        assert_eq!("11,3,5,20,10".parse::<CostVector>().unwrap(), CostVector::default());
        assert_eq!("1,2".parse::<CostVector>(), Err(CostError::Count(2)));
        assert!("1,2,x,4,5".parse::<CostVector>().is_err());
    }

    #[test]
    fn factor_examples() {
        let g = parse_grammar("<s> ::= \"a\" <s> | \"b\"").unwrap();
        let closed = parse_input(&g, "aab").unwrap();
        let cc = ClosingCosts::new(&g, 1);
        assert_eq!(cc.cost(&closed), 0.0);
        assert!(cc.cost(&crate::tree::root_tree(&g)) >= 2.0);
        assert_eq!(constraint_cost(&[]), 0.0);
        assert_eq!(kpath_penalty(&g, &closed, DEFAULT_K), 0.0);
    }

    #[test]
    fn global_record_resets() {
        let g = parse_grammar("<s> ::= <a> | <b>\n<a> ::= \"a\"\n<b> ::= \"b\"").unwrap();
        let a = parse_input(&g, "a").unwrap();
        let b = parse_input(&g, "b").unwrap();
        let mut cov = GlobalCoverage::new(&g, 2);
        assert_eq!(cov.penalty(&g, &a), 0.0);
        cov.record(&g, &a);
        assert!(cov.penalty(&g, &a) > 0.0);
        assert_eq!(cov.penalty(&g, &b), 0.0);
        cov.record(&g, &b);
        assert_eq!(cov.covered(), 0);
    }
}
