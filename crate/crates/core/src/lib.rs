//! Refactoring of nested-IF spreadsheet formulas.
//!
//! The pipeline parses a formula, removes conditions already decided by an
//! enclosing IF, and reassembles IF chains into built-in functions. Every
//! rewrite can be checked against the reference interpreter in [`eval`].

pub mod analysis;
pub mod ast;
pub mod engine;
pub mod eval;
pub mod harness;
pub mod oracle;
pub mod par;
pub mod parser;
pub mod patterns;
pub mod redundancy;
pub mod value;

pub use ast::{CellAddr, Expr, Formula};
pub use eval::{eval_formula, EvalError};
pub use parser::{parse, print, SyntaxError};
pub use value::{Environment, ErrorKind, Value};
