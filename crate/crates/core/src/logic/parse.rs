//! Line-oriented matrix format.
//!
//! ```text
//! % comment
//! #name: pelletier21
//! #start: 2
//! p | ~f(a).
//! f(b) | ~p.
//! ```
//!
//! One clause per line, literals separated by `|`, negation `~`, clause ends
//! with `.`. Uppercase-initial tokens are variables, numbered per clause in
//! order of first occurrence. Any other `#key: value` header is kept as metadata.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::ParseError;
use crate::logic::term::{Clause, Literal, Problem, Symbol, Term};

pub fn parse_problem(text: &str) -> Result<Problem, ParseError> {
    parse_named(text, "unnamed")
}

/// Parses `text`, using `default_name` unless a `#name:` header is present.
pub fn parse_named(text: &str, default_name: &str) -> Result<Problem, ParseError> {
    let mut name = default_name.to_string();
    let mut start: Option<Vec<usize>> = None;
    let mut metadata = BTreeMap::new();
    let mut clauses = Vec::new();
    let mut arities = Arities::default();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        if let Some(header) = trimmed.strip_prefix('#') {
            let (key, value) = header.split_once(':').ok_or_else(|| ParseError {
                line,
                column: 1,
                message: "header must have the form `#key: value`".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "start" => {
                    let ids = value
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .map(|s| {
                            s.parse::<usize>().map_err(|_| ParseError {
                                line,
                                column: 1,
                                message: format!("invalid start clause id `{s}`"),
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    start = Some(ids);
                }
                "name" => name = value.to_string(),
                _ => {
                    metadata.insert(key.to_string(), value.to_string());
                }
            }
            continue;
        }
        let mut p = LineParser { chars: raw.char_indices().collect(), pos: 0, line, vars: HashMap::new(), arities: &mut arities };
        let literals = p.clause()?;
        clauses.push(Clause { id: clauses.len(), literals });
    }

    let start_clause_ids = match start {
        Some(ids) => {
            if let Some(bad) = ids.iter().find(|&&id| id >= clauses.len()) {
                return Err(ParseError { line: 0, column: 0, message: format!("start clause {bad} does not exist") });
            }
            ids
        }
        None => (0..clauses.len()).collect(),
    };
    Ok(Problem { name, clauses, start_clause_ids, metadata })
}

pub(crate) fn write_problem(f: &mut fmt::Formatter<'_>, p: &Problem) -> fmt::Result {
    writeln!(f, "#name: {}", p.name)?;
    for (k, v) in &p.metadata {
        writeln!(f, "#{k}: {v}")?;
    }
    let ids: Vec<String> = p.start_clause_ids.iter().map(|i| i.to_string()).collect();
    writeln!(f, "#start: {}", ids.join(" "))?;
    for c in &p.clauses {
        writeln!(f, "{c}")?;
    }
    Ok(())
}

#[derive(Default)]
struct Arities {
    predicates: HashMap<Symbol, usize>,
    functions: HashMap<Symbol, usize>,
}

struct LineParser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    line: usize,
    vars: HashMap<String, u32>,
    arities: &'a mut Arities,
}

impl LineParser<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { line: self.line, column: self.pos + 1, message: message.into() })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn clause(&mut self) -> Result<Vec<Literal>, ParseError> {
        let mut literals = vec![self.literal()?];
        loop {
            if self.eat('|') {
                self.skip_ws();
                if matches!(self.peek(), None | Some('.')) {
                    return self.err("dangling `|` separator");
                }
                literals.push(self.literal()?);
            } else if self.eat('.') {
                break;
            } else {
                self.skip_ws();
                return match self.peek() {
                    None => self.err("clause must end with `.`"),
                    Some(c) => self.err(format!("unexpected `{c}`")),
                };
            }
        }
        self.skip_ws();
        match self.peek() {
            None | Some('%') => Ok(literals),
            Some(c) => self.err(format!("unexpected `{c}` after end of clause")),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_' || c == '\'') {
            self.pos += 1;
        }
        if start == self.pos {
            return match self.peek() {
                None => self.err("unexpected end of line"),
                Some(c) => self.err(format!("expected identifier, found `{c}`")),
            };
        }
        Ok(self.chars[start..self.pos].iter().map(|&(_, c)| c).collect())
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        let positive = !self.eat('~');
        let column = self.pos + 1;
        let name = self.ident()?;
        if is_variable(&name) {
            return self.err(format!("predicate `{name}` must start with a lowercase letter"));
        }
        let args = self.args()?;
        let predicate: Symbol = Arc::from(name.as_str());
        check_arity(&mut self.arities.predicates, &predicate, args.len(), self.line, column)?;
        Ok(Literal { positive, predicate, args })
    }

    fn args(&mut self) -> Result<Vec<Term>, ParseError> {
        let mut args = Vec::new();
        if !self.eat('(') {
            return Ok(args);
        }
        loop {
            args.push(self.term()?);
            if self.eat(',') {
                continue;
            }
            if self.eat(')') {
                return Ok(args);
            }
            self.skip_ws();
            return self.err("expected `,` or `)`");
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let column = self.pos + 1;
        let name = self.ident()?;
        if is_variable(&name) {
            let next = self.vars.len() as u32;
            return Ok(Term::Var(*self.vars.entry(name).or_insert(next)));
        }
        let args = self.args()?;
        let sym: Symbol = Arc::from(name.as_str());
        check_arity(&mut self.arities.functions, &sym, args.len(), self.line, column)?;
        Ok(Term::App(sym, Arc::from(args)))
    }
}

fn is_variable(name: &str) -> bool {
    name.chars().next().is_some_and(|c| c.is_uppercase() || c == '_')
}

fn check_arity(table: &mut HashMap<Symbol, usize>, sym: &Symbol, arity: usize, line: usize, column: usize) -> Result<(), ParseError> {
    match table.get(sym) {
        Some(&a) if a != arity => Err(ParseError {
            line,
            column,
            message: format!("symbol `{sym}` used with arity {arity}, previously {a}"),
        }),
        Some(_) => Ok(()),
        None => {
            table.insert(sym.clone(), arity);
            Ok(())
        }
    }
}

/// Converts the `cnf(name, role, (l1 | ... | ln)).` subset of TPTP into a
/// matrix. Clauses with role `negated_conjecture` become start clauses.
/// Only single-line `cnf` statements without quoted names are supported.
pub fn convert_tptp_cnf(text: &str, name: &str) -> Result<Problem, ParseError> {
    let mut matrix = String::new();
    let mut start = Vec::new();
    let mut count = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let err = |m: &str| ParseError { line: lineno + 1, column: 1, message: m.to_string() };
        let body = line
            .strip_prefix("cnf(")
            .and_then(|s| s.strip_suffix(")."))
            .ok_or_else(|| err("expected `cnf(name, role, clause).`"))?;
        let mut parts = body.splitn(3, ',');
        let (_, role, lits) = match (parts.next(), parts.next(), parts.next()) {
            (Some(n), Some(r), Some(l)) => (n, r.trim(), l.trim()),
            _ => return Err(err("cnf statement needs three fields")),
        };
        let lits = lits.strip_prefix('(').and_then(|s| s.strip_suffix(')')).unwrap_or(lits);
        // TPTP writes variables uppercase and negation `~`, like the matrix format.
        // Equality `X = Y` / `X != Y` is not supported.
        if lits.contains('=') {
            return Err(err("infix equality is not supported; use an eq/2 predicate"));
        }
        if role == "negated_conjecture" {
            start.push(count);
        }
        matrix.push_str(lits);
        matrix.push_str(".\n");
        count += 1;
    }
    let mut problem = parse_named(&matrix, name)?;
    if !start.is_empty() {
        problem.start_clause_ids = start;
    }
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_clause_problem() {
        let p = parse_problem("p | f(X).\n~p | ~f(a).").unwrap();
        assert_eq!(p.clauses.len(), 2);
        assert_eq!(p.clauses[0].literals.len(), 2);
        assert_eq!(p.clauses[0].literals[1].args[0], Term::Var(0));
        assert!(!p.clauses[1].literals[0].positive);
        assert_eq!(p.start_clause_ids, vec![0, 1]);
    }

    #[test]
    fn dangling_separator() {
        let e = parse_problem("p |").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.message.contains("dangling"), "{e}");
    }

    #[test]
    fn arity_mismatch() {
        let e = parse_problem("p(a).\n~p(a, b).").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_problem("p(f(a)) | q(f).").unwrap_err();
        assert!(e.message.contains("arity"));
    }

    #[test]
    fn missing_period_reports_column() {
        let e = parse_problem("p | q").unwrap_err();
        assert_eq!((e.line, e.column), (1, 6));
    }

    #[test]
    fn headers_and_comments() {
        let p = parse_problem("% c\n#name: t\n#start: 1\n#origin: test\np.\n~p. % trailing\n").unwrap();
        assert_eq!(p.name, "t");
        assert_eq!(p.start_clause_ids, vec![1]);
        assert_eq!(p.metadata["origin"], "test");
        assert!(parse_problem("#start: 4\np.").is_err());
    }

    #[test]
    fn variables_numbered_per_clause() {
        let p = parse_problem("p(Y, X).\nq(X, Z, X).").unwrap();
        assert_eq!(p.clauses[0].literals[0].args, vec![Term::Var(0), Term::Var(1)]);
        assert_eq!(p.clauses[1].literals[0].args, vec![Term::Var(0), Term::Var(1), Term::Var(0)]);
    }

    #[test]
    fn tptp_cnf_conversion() {
        let text = "cnf(a1, axiom, (p(X) | ~q(X))).\ncnf(c, negated_conjecture, (~p(a))).\n";
        let p = convert_tptp_cnf(text, "t").unwrap();
        assert_eq!(p.clauses.len(), 2);
        assert_eq!(p.start_clause_ids, vec![1]);
    }
}
