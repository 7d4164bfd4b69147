//! Grammar-based input generation and validation under declarative
//! constraints over derivation trees.

pub mod cli;
pub mod corpus;
pub mod cost;
pub mod error;
pub mod evaluator;
pub mod formula;
pub mod grammar;
pub mod matching;
pub mod parser;
pub mod predicates;
pub mod sample;
pub mod smt;
pub mod solver;
pub mod tree;
