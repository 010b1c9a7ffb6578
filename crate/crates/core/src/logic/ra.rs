//! Robinson Arithmetic problems: ground equations `T = N` over `0`, `s`, `plus`
//! and `times`, refuted against a fixed clausal axiomatization of equality and
//! the recursion equations.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::EvalError;
use crate::logic::parse::parse_named;
use crate::logic::term::{Clause, Literal, Problem, Term};

/// The axiom matrix. Reflexivity closes branches; the rest are used by extension.
pub const RA_AXIOMS: &str = "\
eq(X, X).
~eq(X, Y) | eq(Y, X).
~eq(X, Y) | ~eq(Y, Z) | eq(X, Z).
~eq(X, Y) | eq(s(X), s(Y)).
~eq(X, Y) | eq(plus(X, Z), plus(Y, Z)).
~eq(X, Y) | eq(plus(Z, X), plus(Z, Y)).
~eq(X, Y) | eq(times(X, Z), times(Y, Z)).
~eq(X, Y) | eq(times(Z, X), times(Z, Y)).
eq(plus(X, 0), X).
eq(plus(X, s(Y)), s(plus(X, Y))).
eq(times(X, 0), 0).
eq(times(X, s(Y)), plus(times(X, Y), X)).
";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Plus,
    Times,
}

/// Arithmetic expression over natural-number literals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Num(u64),
    Bin(Op, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn num(n: u64) -> Self {
        Expr::Num(n)
    }

    pub fn plus(a: Expr, b: Expr) -> Self {
        Expr::Bin(Op::Plus, Box::new(a), Box::new(b))
    }

    pub fn times(a: Expr, b: Expr) -> Self {
        Expr::Bin(Op::Times, Box::new(a), Box::new(b))
    }

    pub fn value(&self) -> u64 {
        match self {
            Expr::Num(n) => *n,
            Expr::Bin(Op::Plus, a, b) => a.value() + b.value(),
            Expr::Bin(Op::Times, a, b) => a.value() * b.value(),
        }
    }

    pub fn to_term(&self) -> Term {
        match self {
            Expr::Num(n) => numeral(*n),
            Expr::Bin(op, a, b) => {
                let f = match op {
                    Op::Plus => "plus",
                    Op::Times => "times",
                };
                Term::app(f, vec![a.to_term(), b.to_term()])
            }
        }
    }

    pub fn operators(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Bin(_, a, b) => 1 + a.operators() + b.operators(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(n) => write!(f, "{n}"),
            Expr::Bin(op, a, b) => {
                let sym = if *op == Op::Plus { '+' } else { '*' };
                let side = |e: &Expr, f: &mut fmt::Formatter<'_>| match e {
                    Expr::Num(_) => write!(f, "{e}"),
                    _ => write!(f, "({e})"),
                };
                side(a, f)?;
                write!(f, "{sym}")?;
                side(b, f)
            }
        }
    }
}

/// `s` applied `n` times to `0`.
pub fn numeral(n: u64) -> Term {
    (0..n).fold(Term::constant("0"), |t, _| Term::app("s", vec![t]))
}

/// Standard natural-number semantics of a ground term over `0`, `s`, `plus`, `times`.
pub fn eval_ground(t: &Term) -> Result<u64, EvalError> {
    match t {
        Term::Var(_) => Err(EvalError::NonGround),
        Term::App(f, args) => {
            let vals = args.iter().map(eval_ground).collect::<Result<Vec<_>, _>>()?;
            match (&**f, vals.as_slice()) {
                ("0", []) => Ok(0),
                ("s", [x]) => Ok(x + 1),
                ("plus", [x, y]) => Ok(x + y),
                ("times", [x, y]) => Ok(x * y),
                _ => Err(EvalError::ForeignSymbol(f.to_string(), args.len())),
            }
        }
    }
}

/// Draws a random expression with exactly `n_operators` binary operators and
/// operands in `0..operand_bound`.
pub fn random_expr<R: Rng>(rng: &mut R, n_operators: usize, operand_bound: u64) -> Expr {
    if n_operators == 0 {
        return Expr::Num(rng.random_range(0..operand_bound));
    }
    let left = rng.random_range(0..n_operators);
    let op = if rng.random_bool(0.5) { Op::Plus } else { Op::Times };
    let a = random_expr(rng, left, operand_bound);
    let b = random_expr(rng, n_operators - 1 - left, operand_bound);
    Expr::Bin(op, Box::new(a), Box::new(b))
}

/// Builds the refutation problem for `expr = value(expr)`: the axioms plus the
/// negated equation, which is the only start clause.
pub fn ra_problem_from_expr(name: &str, expr: &Expr) -> Problem {
    let mut problem = parse_named(RA_AXIOMS, name).expect("axiom matrix parses");
    let value = expr.value();
    let conjecture = Literal::new(false, "eq", vec![expr.to_term(), numeral(value)]);
    debug_assert_eq!(eval_ground(&conjecture.args[0]), eval_ground(&conjecture.args[1]));
    let id = problem.clauses.len();
    problem.clauses.push(Clause { id, literals: vec![conjecture] });
    problem.start_clause_ids = vec![id];
    let mut metadata = BTreeMap::new();
    metadata.insert("expression".to_string(), format!("{expr}={value}"));
    metadata.insert("theory".to_string(), "robinson-arithmetic".to_string());
    problem.metadata = metadata;
    problem
}

pub fn generate_ra_problem(rng_seed: u64, n_operators: usize, operand_bound: u64) -> Problem {
    assert!(n_operators >= 1 && operand_bound >= 1, "need at least one operator and a positive operand bound");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let expr = random_expr(&mut rng, n_operators, operand_bound);
    let problem = ra_problem_from_expr(&format!("ra_{rng_seed}"), &expr);
    let conj = &problem.clauses[problem.start_clause_ids[0]].literals[0];
    assert_eq!(eval_ground(&conj.args[0]).ok(), eval_ground(&conj.args[1]).ok(), "generator produced a false equation");
    problem
}

/// `count` problems with per-problem seeds derived from `seed`.
pub fn generate_ra_set(count: usize, seed: u64, n_operators: usize, operand_bound: u64) -> Vec<Problem> {
    (0..count)
        .map(|i| {
            let mut p = generate_ra_problem(derive_seed(seed, i as u64), n_operators, operand_bound);
            p.name = format!("ra_{seed}_{i:04}");
            p
        })
        .collect()
}

/// SplitMix64 step, used to spread consecutive indices over the seed space.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
