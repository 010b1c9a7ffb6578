use pllcop::logic::{apply_substitution, eval_ground, generate_ra_set, parse_named, parse_problem, unify, Substitution, Term};
use proptest::prelude::*;

fn term(depth: u32) -> BoxedStrategy<Term> {
    let leaf = prop_oneof![(0u32..4).prop_map(Term::var), prop_oneof![Just("a"), Just("b")].prop_map(Term::constant)];
    if depth == 0 {
        return leaf.boxed();
    }
    prop_oneof![
        2 => leaf,
        1 => term(depth - 1).prop_map(|t| Term::app("f", vec![t])),
        1 => (term(depth - 1), term(depth - 1)).prop_map(|(x, y)| Term::app("g", vec![x, y])),
    ]
    .boxed()
}

fn ground(depth: u32) -> BoxedStrategy<Term> {
    term(depth).prop_map(|t| close(&t)).boxed()
}

/// Replaces every variable by the constant `a`.
fn close(t: &Term) -> Term {
    match t {
        Term::Var(_) => Term::constant("a"),
        Term::App(s, args) => Term::App(s.clone(), args.iter().map(close).collect::<Vec<_>>().into()),
    }
}

fn instance(t: &Term, theta: &[Term]) -> Term {
    match t {
        Term::Var(v) => theta[*v as usize].clone(),
        Term::App(s, args) => Term::App(s.clone(), args.iter().map(|a| instance(a, theta)).collect::<Vec<_>>().into()),
    }
}

proptest! {
    #[test]
    fn unifiers_equate_both_sides(s in term(3), t in term(3)) {
        if let Some(sigma) = unify(&s, &t, &Substitution::new()) {
            prop_assert_eq!(apply_substitution(&s, &sigma), apply_substitution(&t, &sigma));
            let once = apply_substitution(&s, &sigma);
            prop_assert_eq!(apply_substitution(&once, &sigma), once);
        }
    }

    #[test]
    fn instances_unify_and_the_unifier_is_most_general(t in term(3), theta in prop::collection::vec(ground(2), 4)) {
        let target = instance(&t, &theta);
        let sigma = unify(&t, &target, &Substitution::new());
        prop_assert!(sigma.is_some());
        let sigma = sigma.unwrap();
        prop_assert_eq!(apply_substitution(&t, &sigma), target.clone());
        // Any unifier of t with a ground term factors through sigma.
        let s_of = |v: u32| apply_substitution(&Term::var(v), &sigma);
        for v in t.max_var().map(|m| 0..=m).into_iter().flatten() {
            let bound = s_of(v);
            if bound != Term::var(v) {
                prop_assert_eq!(instance(&bound, &theta), theta[v as usize].clone());
            }
        }
    }

    #[test]
    fn unification_is_symmetric_in_success(s in term(3), t in term(3)) {
        prop_assert_eq!(unify(&s, &t, &Substitution::new()).is_some(), unify(&t, &s, &Substitution::new()).is_some());
    }

    #[test]
    fn printed_problems_parse_back(clauses in prop::collection::vec(prop::collection::vec(literal_text(), 1..4), 1..6), start in any::<prop::sample::Index>()) {
        let start = start.index(clauses.len());
        let mut text = format!("#name: prop\n#start: {start}\n");
        for c in &clauses {
            text.push_str(&c.join(" | "));
            text.push_str(".\n");
        }
        let parsed = parse_problem(&text).unwrap();
        prop_assert_eq!(parsed.clauses.len(), clauses.len());
        let again = parse_named(&parsed.to_string(), "other").unwrap();
        prop_assert_eq!(&again, &parsed);
        prop_assert_eq!(again.to_string(), parsed.to_string());
    }
}

fn literal_text() -> impl Strategy<Value = String> {
    let arg = prop_oneof![Just("X"), Just("Y"), Just("a"), Just("f(X)"), Just("g(Y,b)"), Just("f(g(a,Z))")];
    (any::<bool>(), prop_oneof![Just(0usize), Just(1), Just(2)], prop::collection::vec(arg, 2)).prop_map(|(neg, pred, args)| {
        let sign = if neg { "~" } else { "" };
        match pred {
            0 => format!("{sign}r"),
            1 => format!("{sign}p({})", args[0]),
            _ => format!("{sign}q({},{})", args[0], args[1]),
        }
    })
}

#[test]
fn occurs_check_rejects_cyclic_bindings() {
    let x = Term::var(0);
    assert!(unify(&x, &Term::app("f", vec![x.clone()]), &Substitution::new()).is_none());
    assert!(unify(&Term::app("g", vec![x.clone(), Term::constant("a")]), &Term::app("g", vec![Term::app("f", vec![x.clone()]), Term::constant("a")]), &Substitution::new()).is_none());
}

#[test]
fn generated_equations_are_true() {
    std::thread::Builder::new()
        .stack_size(256 << 20)
        .spawn(|| {
            for p in generate_ra_set(300, 9, 3, 10) {
                let conj = &p.clauses[p.start_clause_ids[0]].literals[0];
                assert!(!conj.positive);
                assert_eq!(eval_ground(&conj.args[0]).unwrap(), eval_ground(&conj.args[1]).unwrap(), "{}", p.name);
                assert_eq!(parse_named(&p.to_string(), "x").unwrap(), p);
            }
        })
        .unwrap()
        .join()
        .unwrap();
}
