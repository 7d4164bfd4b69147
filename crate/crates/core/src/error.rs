use thiserror::Error;

use crate::tree::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("grammar syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("undefined nonterminal {0}")]
    UndefinedNonterminal(String),
    #[error("nonterminal {0} cannot derive any closed tree")]
    Unproductive(String),
    #[error("nonterminal {0} has an empty alternative")]
    EmptyAlternative(String),
    #[error("unknown grammar symbol {0}")]
    UnknownSymbol(String),
    #[error("grammar has no rules")]
    Empty,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("input does not parse as {symbol}; longest match ends at offset {position}")]
    ParseFailure { symbol: String, position: usize },
    #[error("no node with id {0}")]
    UnknownNode(NodeId),
    #[error("label mismatch: expected {expected}, found {found}")]
    LabelMismatch { expected: String, found: String },
    #[error("tree is open")]
    OpenTree,
    #[error("tree violates the grammar at node {0}")]
    NotADerivation(NodeId),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulaError {
    #[error("constraint syntax error at offset {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown nonterminal type {0}")]
    UnknownType(String),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("predicate {name} expects {expected} arguments, got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("sort error: {0}")]
    Sort(String),
    #[error("semantic predicate {0} may not occur negated")]
    NegatedSemantic(String),
    #[error("numeric quantifier over {0} may not occur negated")]
    NegatedNumeric(String),
    #[error("disjunctive normal form exceeds {0} branches")]
    DnfBlowup(usize),
    #[error("cannot substitute bound variable {0}")]
    BoundSubstitution(String),
    #[error(transparent)]
    Match(#[from] MatchError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("malformed match expression: {0}")]
    Malformed(String),
    #[error("match expression does not parse as {0}")]
    Unparseable(String),
    #[error("match expression of type {found} used for a variable of type {expected}")]
    TypeMismatch { expected: String, found: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredicateError {
    #[error("unknown predicate {0}")]
    Unknown(String),
    #[error("argument {index} of {name} is not resolved")]
    Unresolved { name: String, index: usize },
    #[error("bad argument for {name}: {message}")]
    BadArgument { name: String, message: String },
    #[error("semantic predicate {0} returned not-ready on a closed tree")]
    NotReadyOnClosed(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("unresolved symbol {0}")]
    Unresolved(String),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("sort error: {0}")]
    Sort(String),
    #[error("numeric witness search for {0} is inconclusive within the bounded domain")]
    Unknown(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("all cost weights are zero")]
    AllZero,
    #[error("invalid weight {0:?}")]
    BadWeight(String),
    #[error("expected 5 weights, found {0}")]
    Count(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("no transition applies to a non-final state: {0}")]
    Stuck(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("unknown spec {0}")]
    UnknownSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
