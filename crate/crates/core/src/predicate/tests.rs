use super::*;
use crate::event_model::Event;
use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use std::collections::BTreeMap;

pub(crate) fn trace_of(activities: &[&str]) -> Trace {
    let events = activities
        .iter()
        .enumerate()
        .map(|(i, a)| Event {
            activity: a.to_string(),
            timestamp: Utc.timestamp_opt(i as i64, 0).unwrap(),
            attributes: BTreeMap::new(),
        })
        .collect();
    Trace::new("t", BTreeMap::new(), events)
}

/// Quantifier-based reference semantics, deliberately distinct from the
/// per-position table used by `evaluate`.
pub(crate) fn oracle(formula: &LtlFormula, activities: &[&str], i: usize) -> bool {
    let n = activities.len();
    match formula {
        LtlFormula::Atom(label) => i < n && activities[i] == label,
        LtlFormula::Not(f) => !oracle(f, activities, i),
        LtlFormula::And(a, b) => oracle(a, activities, i) && oracle(b, activities, i),
        LtlFormula::Or(a, b) => oracle(a, activities, i) || oracle(b, activities, i),
        LtlFormula::Implies(a, b) => !oracle(a, activities, i) || oracle(b, activities, i),
        LtlFormula::Next(f) => i + 1 < n && oracle(f, activities, i + 1),
        LtlFormula::Eventually(f) => (i..n).any(|j| oracle(f, activities, j)),
        LtlFormula::Globally(f) => (i..n).all(|j| oracle(f, activities, j)),
        LtlFormula::Until(a, b) => (i..n).any(|j| {
            oracle(b, activities, j) && (i..j).all(|k| oracle(a, activities, k))
        }),
    }
}

fn atom(label: &str) -> LtlFormula {
    LtlFormula::Atom(label.to_string())
}

#[test]
fn parses_disjunction_of_eventualities() {
    let parsed = parse_formula(r#"F("a") || F("b")"#).unwrap();
    assert_eq!(
        parsed,
        LtlFormula::Or(
            Box::new(LtlFormula::Eventually(Box::new(atom("a")))),
            Box::new(LtlFormula::Eventually(Box::new(atom("b")))),
        )
    );
}

#[test]
fn parses_globally_implication() {
    let parsed = parse_formula(r#"G("x" -> F("y"))"#).unwrap();
    assert_eq!(
        parsed,
        LtlFormula::Globally(Box::new(LtlFormula::Implies(
            Box::new(atom("x")),
            Box::new(LtlFormula::Eventually(Box::new(atom("y")))),
        )))
    );
}

#[test]
fn parses_negated_until() {
    let parsed = parse_formula(r#"(!"a") U ("b")"#).unwrap();
    assert_eq!(
        parsed,
        LtlFormula::Until(
            Box::new(LtlFormula::Not(Box::new(atom("a")))),
            Box::new(atom("b")),
        )
    );
}

#[test]
fn precedence_unary_until_and_or_implies() {
    // unary > U > && > || > ->
    let parsed = parse_formula(r#"!"a" U "b" && "c" || "d" -> "e""#).unwrap();
    assert_eq!(
        parsed,
        LtlFormula::Implies(
            Box::new(LtlFormula::Or(
                Box::new(LtlFormula::And(
                    Box::new(LtlFormula::Until(
                        Box::new(LtlFormula::Not(Box::new(atom("a")))),
                        Box::new(atom("b")),
                    )),
                    Box::new(atom("c")),
                )),
                Box::new(atom("d")),
            )),
            Box::new(atom("e")),
        )
    );
}

#[test]
fn syntax_error_carries_position() {
    let err = parse_formula(r#"F("a") |"#).unwrap_err();
    assert!(matches!(err, Error::Parse { ref position, .. } if position == "offset 7"), "{err}");
    assert!(parse_formula("").is_err());
    assert!(parse_formula(r#""unterminated"#).is_err());
    assert!(parse_formula(r#"("a""#).is_err());
}

#[test]
fn atom_escapes_round_trip() {
    let formula = LtlFormula::Eventually(Box::new(atom(r#"say "hi" \now"#)));
    let printed = formula.to_string();
    assert_eq!(parse_formula(&printed).unwrap(), formula);
}

#[test]
fn eventually_holds_when_atom_occurs() {
    let f = parse_formula(r#"F("a")"#).unwrap();
    assert!(evaluate(&f, &trace_of(&["b", "a", "c"])));
    assert!(!evaluate(&f, &trace_of(&["b", "c"])));
}

#[test]
fn globally_implication_fails_at_last_position() {
    // "a" holds at the last position and F("b") fails there
    let f = parse_formula(r#"G("a" -> F("b"))"#).unwrap();
    assert!(!evaluate(&f, &trace_of(&["a"])));
    assert!(evaluate(&f, &trace_of(&["a", "b"])));
}

#[test]
fn next_at_last_position_is_false() {
    let f = parse_formula(r#"X("a")"#).unwrap();
    assert!(!evaluate(&f, &trace_of(&["a"])));
    assert!(evaluate(&f, &trace_of(&["b", "a"])));
}

#[test]
fn empty_trace_semantics() {
    let empty = trace_of(&[]);
    assert!(evaluate(&parse_formula(r#"G("a")"#).unwrap(), &empty));
    assert!(!evaluate(&parse_formula(r#"F("a")"#).unwrap(), &empty));
    assert_eq!(
        label_trace(&parse_formula(r#"G("nope")"#).unwrap(), &empty),
        OutcomeLabel::Compliant
    );
}

#[test]
fn labels_recovery_predicate() {
    let f = parse_formula(r#"F("R")"#).unwrap();
    let with_recovery = trace_of(&["M", "A", "C", "D", "P", "R"]);
    let without = trace_of(&["M", "A", "C", "D", "P"]);
    assert_eq!(label_trace(&f, &with_recovery), OutcomeLabel::Compliant);
    assert_eq!(label_trace(&f, &without), OutcomeLabel::NonCompliant);
}

const ALPHABET: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

pub(crate) fn formula_strategy(depth: u32) -> impl Strategy<Value = LtlFormula> {
    let leaf = (0usize..ALPHABET.len()).prop_map(|i| atom(ALPHABET[i]));
    leaf.prop_recursive(depth, 64, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|f| LtlFormula::Not(Box::new(f))),
            inner.clone().prop_map(|f| LtlFormula::Next(Box::new(f))),
            inner.clone().prop_map(|f| LtlFormula::Eventually(Box::new(f))),
            inner.clone().prop_map(|f| LtlFormula::Globally(Box::new(f))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| LtlFormula::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| LtlFormula::Or(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| LtlFormula::Implies(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| LtlFormula::Until(Box::new(a), Box::new(b))),
        ]
    })
}

fn trace_strategy() -> impl Strategy<Value = Vec<&'static str>> {
    proptest::collection::vec((0usize..ALPHABET.len()).prop_map(|i| ALPHABET[i]), 0..=10)
}

proptest! {
    #[test]
    fn agrees_with_suffix_recursion_oracle(
        formula in formula_strategy(4),
        activities in trace_strategy(),
    ) {
        let got = evaluate(&formula, &trace_of(&activities));
        let expected = oracle(&formula, &activities, 0);
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn negation_is_involution(formula in formula_strategy(3), activities in trace_strategy()) {
        let trace = trace_of(&activities);
        let negated = LtlFormula::Not(Box::new(formula.clone()));
        prop_assert_eq!(evaluate(&negated, &trace), !evaluate(&formula, &trace));
    }

    #[test]
    fn eventually_is_true_until(formula in formula_strategy(3), activities in trace_strategy()) {
        let trace = trace_of(&activities);
        // F p = true U p, with true encoded as "x" || !"x"
        let tautology = LtlFormula::Or(
            Box::new(atom("x")),
            Box::new(LtlFormula::Not(Box::new(atom("x")))),
        );
        let eventually = LtlFormula::Eventually(Box::new(formula.clone()));
        let until = LtlFormula::Until(Box::new(tautology), Box::new(formula));
        prop_assert_eq!(evaluate(&eventually, &trace), evaluate(&until, &trace));
    }

    #[test]
    fn globally_is_dual_of_eventually(formula in formula_strategy(3), activities in trace_strategy()) {
        let trace = trace_of(&activities);
        let globally = LtlFormula::Globally(Box::new(formula.clone()));
        let dual = LtlFormula::Not(Box::new(LtlFormula::Eventually(Box::new(LtlFormula::Not(
            Box::new(formula),
        )))));
        prop_assert_eq!(evaluate(&globally, &trace), evaluate(&dual, &trace));
    }

    #[test]
    fn print_parse_round_trip(formula in formula_strategy(4)) {
        let printed = formula.to_string();
        let reparsed = parse_formula(&printed).unwrap();
        prop_assert_eq!(reparsed, formula);
    }
}
