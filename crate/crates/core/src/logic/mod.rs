//! First-order syntax, the matrix file format, unification and the Robinson
//! Arithmetic problem generator.

pub mod parse;
pub mod ra;
pub mod term;

pub use parse::{convert_tptp_cnf, parse_named, parse_problem};
pub use ra::{derive_seed, eval_ground, generate_ra_problem, generate_ra_set, numeral, ra_problem_from_expr, Expr};
pub use term::{apply_substitution, rename_apart, unify, Clause, Literal, Problem, Substitution, Symbol, Term};
