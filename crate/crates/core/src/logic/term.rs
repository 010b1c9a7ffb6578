use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use fnv::FnvHashMap;

/// Function, constant and predicate names.
pub type Symbol = Arc<str>;

/// A first-order term. Variables are identified by a non-negative integer id.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(u32),
    /// Arguments are shared so that cloning a term (and every prover state
    /// holding one) is shallow.
    App(Symbol, Arc<[Term]>),
}

impl Term {
    pub fn var(id: u32) -> Self {
        Term::Var(id)
    }

    pub fn constant(name: &str) -> Self {
        Term::App(Arc::from(name), Arc::from(Vec::new()))
    }

    pub fn app(name: &str, args: Vec<Term>) -> Self {
        Term::App(Arc::from(name), Arc::from(args))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Largest variable id occurring in the term.
    pub fn max_var(&self) -> Option<u32> {
        match self {
            Term::Var(v) => Some(*v),
            Term::App(_, args) => args.iter().filter_map(Term::max_var).max(),
        }
    }

    /// Number of symbol and variable occurrences.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }

    pub fn shift_vars(&self, offset: u32) -> Term {
        match self {
            Term::Var(v) => Term::Var(v + offset),
            Term::App(f, args) if args.is_empty() => Term::App(f.clone(), args.clone()),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|t| t.shift_vars(offset)).collect()),
        }
    }

    fn collect_vars(&self, out: &mut Vec<u32>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Term::App(_, args) => args.iter().for_each(|t| t.collect_vars(out)),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "X{v}"),
            Term::App(name, args) => {
                f.write_str(name)?;
                write_args(f, args)
            }
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    if args.is_empty() {
        return Ok(());
    }
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

/// A signed atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub positive: bool,
    pub predicate: Symbol,
    pub args: Vec<Term>,
}

impl Literal {
    pub fn new(positive: bool, predicate: &str, args: Vec<Term>) -> Self {
        Literal { positive, predicate: Arc::from(predicate), args }
    }

    pub fn negate(&self) -> Literal {
        Literal { positive: !self.positive, ..self.clone() }
    }

    /// True when `other` has the opposite sign and the same predicate and arity.
    pub fn may_connect(&self, other: &Literal) -> bool {
        self.positive != other.positive
            && self.predicate == other.predicate
            && self.args.len() == other.args.len()
    }

    pub fn max_var(&self) -> Option<u32> {
        self.args.iter().filter_map(Term::max_var).max()
    }

    pub fn shift_vars(&self, offset: u32) -> Literal {
        Literal {
            positive: self.positive,
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|t| t.shift_vars(offset)).collect(),
        }
    }

    pub fn vars(&self) -> Vec<u32> {
        let mut out = Vec::new();
        self.args.iter().for_each(|t| t.collect_vars(&mut out));
        out
    }

    pub fn size(&self) -> usize {
        1 + self.args.iter().map(Term::size).sum::<usize>()
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("~")?;
        }
        f.write_str(&self.predicate)?;
        write_args(f, &self.args)
    }
}

/// A matrix clause: a conjunction of literals in the DNF reading, or equivalently
/// a disjunction in the refutational reading. The calculus treats both alike.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    pub id: usize,
    pub literals: Vec<Literal>,
}

impl Clause {
    pub fn max_var(&self) -> Option<u32> {
        self.literals.iter().filter_map(Literal::max_var).max()
    }

    pub fn is_ground(&self) -> bool {
        self.max_var().is_none()
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.literals.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str(".")
    }
}

/// Renames every variable of `clause` by adding `offset` to its id.
pub fn rename_apart(clause: &Clause, offset: u32) -> Clause {
    Clause { id: clause.id, literals: clause.literals.iter().map(|l| l.shift_vars(offset)).collect() }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub name: String,
    pub clauses: Vec<Clause>,
    pub start_clause_ids: Vec<usize>,
    pub metadata: BTreeMap<String, String>,
}

impl Problem {
    pub fn clause(&self, id: usize) -> Option<&Clause> {
        // ids are positional for parsed and generated problems, but fall back to a scan.
        match self.clauses.get(id) {
            Some(c) if c.id == id => Some(c),
            _ => self.clauses.iter().find(|c| c.id == id),
        }
    }

    /// One more than the largest variable id used by any clause; the stride used
    /// when renaming clause copies apart.
    pub fn var_stride(&self) -> u32 {
        self.clauses.iter().filter_map(Clause::max_var).max().map_or(1, |m| m + 1)
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        crate::logic::parse::write_problem(f, self)
    }
}

/// Triangular substitution with an undo trail, so failed unification attempts
/// can be rolled back without cloning.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: FnvHashMap<u32, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn get(&self, var: u32) -> Option<&Term> {
        self.bindings.get(&var)
    }

    pub fn bindings(&self) -> impl Iterator<Item = (u32, &Term)> {
        self.bindings.iter().map(|(k, v)| (*k, v))
    }

    /// Binds without any check; callers are expected to have run the occurs check.
    pub fn bind(&mut self, var: u32, term: Term) {
        self.bindings.insert(var, term);
    }

    /// Follows variable bindings until reaching an unbound variable or an application.
    pub fn walk<'a>(&'a self, mut t: &'a Term) -> &'a Term {
        while let Term::Var(v) = t {
            match self.bindings.get(v) {
                Some(next) => t = next,
                None => break,
            }
        }
        t
    }

    /// Fully applies the substitution.
    pub fn apply(&self, t: &Term) -> Term {
        self.apply_changed(t).unwrap_or_else(|| t.clone())
    }

    /// `None` when applying would not change the term; unchanged subterms are shared.
    fn apply_changed(&self, t: &Term) -> Option<Term> {
        match t {
            Term::Var(v) => self.bindings.get(v).map(|b| self.apply(b)),
            Term::App(f, args) => {
                let mut changed: Option<Vec<Term>> = None;
                for (i, a) in args.iter().enumerate() {
                    match (self.apply_changed(a), &mut changed) {
                        (Some(new), Some(v)) => v.push(new),
                        (Some(new), None) => {
                            let mut v = args[..i].to_vec();
                            v.push(new);
                            changed = Some(v);
                        }
                        (None, Some(v)) => v.push(a.clone()),
                        (None, None) => {}
                    }
                }
                changed.map(|v| Term::App(f.clone(), Arc::from(v)))
            }
        }
    }

    pub fn apply_literal(&self, l: &Literal) -> Literal {
        Literal {
            positive: l.positive,
            predicate: l.predicate.clone(),
            args: l.args.iter().map(|a| self.apply(a)).collect(),
        }
    }

    /// Idempotent form: every binding fully resolved.
    pub fn normalize(&self) -> Substitution {
        let bindings = self.bindings.keys().map(|k| (*k, self.apply(&Term::Var(*k)))).collect();
        Substitution { bindings }
    }

    fn occurs(&self, var: u32, t: &Term) -> bool {
        match self.walk(t) {
            Term::Var(v) => *v == var,
            Term::App(_, args) => args.iter().any(|a| self.occurs(var, a)),
        }
    }

    /// Extends `self` with a most general unifier of `a` and `b`. On failure the
    /// substitution is left unchanged and `false` is returned.
    pub fn unify_mut(&mut self, a: &Term, b: &Term) -> bool {
        let mut trail = Vec::new();
        if self.unify_rec(a, b, &mut trail) {
            true
        } else {
            self.undo(trail);
            false
        }
    }

    /// Pairwise unification of argument lists, with rollback on failure.
    pub fn unify_args_mut(&mut self, a: &[Term], b: &[Term]) -> bool {
        if a.len() != b.len() {
            return false;
        }
        let mut trail = Vec::new();
        for (x, y) in a.iter().zip(b) {
            if !self.unify_rec(x, y, &mut trail) {
                self.undo(trail);
                return false;
            }
        }
        true
    }

    /// Tests whether the argument lists unify without changing the substitution.
    pub fn unifiable_args(&mut self, a: &[Term], b: &[Term]) -> bool {
        if a.len() != b.len() {
            return false;
        }
        let mut trail = Vec::new();
        let ok = a.iter().zip(b).all(|(x, y)| self.unify_rec(x, y, &mut trail));
        self.undo(trail);
        ok
    }

    /// Unifies `a` with the complement of `b`: signs must differ.
    pub fn unify_complementary(&mut self, a: &Literal, b: &Literal) -> bool {
        a.may_connect(b) && self.unify_args_mut(&a.args, &b.args)
    }

    fn undo(&mut self, trail: Vec<u32>) {
        for v in trail {
            self.bindings.remove(&v);
        }
    }

    fn unify_rec(&mut self, a: &Term, b: &Term, trail: &mut Vec<u32>) -> bool {
        let a = self.walk(a).clone();
        let b = self.walk(b).clone();
        match (&a, &b) {
            (Term::Var(x), Term::Var(y)) if x == y => true,
            (Term::Var(x), _) => {
                if self.occurs(*x, &b) {
                    return false;
                }
                self.bindings.insert(*x, b);
                trail.push(*x);
                true
            }
            (_, Term::Var(y)) => {
                if self.occurs(*y, &a) {
                    return false;
                }
                self.bindings.insert(*y, a);
                trail.push(*y);
                true
            }
            (Term::App(f, xs), Term::App(g, ys)) => {
                f == g && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(x, y)| self.unify_rec(x, y, trail))
            }
        }
    }

    /// Syntactic identity under the substitution (Prolog's `==`).
    pub fn identical(&self, a: &Term, b: &Term) -> bool {
        match (self.walk(a), self.walk(b)) {
            (Term::Var(x), Term::Var(y)) => x == y,
            (Term::App(f, xs), Term::App(g, ys)) => {
                f == g && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(x, y)| self.identical(x, y))
            }
            _ => false,
        }
    }

    pub fn identical_literals(&self, a: &Literal, b: &Literal) -> bool {
        a.positive == b.positive
            && a.predicate == b.predicate
            && a.args.len() == b.args.len()
            && a.args.iter().zip(&b.args).all(|(x, y)| self.identical(x, y))
    }

    /// True when `a` is identical to the complement of `b`.
    pub fn complementary(&self, a: &Literal, b: &Literal) -> bool {
        a.may_connect(b) && a.args.iter().zip(&b.args).all(|(x, y)| self.identical(x, y))
    }
}

/// Most general unifier of `a` and `b` extending `s`, or `None`.
pub fn unify(a: &Term, b: &Term, s: &Substitution) -> Option<Substitution> {
    let mut out = s.clone();
    out.unify_mut(a, b).then_some(out)
}

pub fn apply_substitution(t: &Term, s: &Substitution) -> Term {
    s.apply(t)
}
