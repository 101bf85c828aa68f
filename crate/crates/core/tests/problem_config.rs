use multipoint::problem::{parse_problem, to_json, validate, MinusCondition};
use multipoint::Error;

const BASE: &str = r#"{"r": "2 + 0.5*sin(x)", "bc_minus": {"alphas": [0.1, -0.2], "etas": [-0.5, 0.3]}, "bc_plus": {"alphas": [0.3], "etas": [0.0]}}"#;

#[test]
fn config_round_trips() {
    let p = parse_problem(BASE).unwrap();
    let again = parse_problem(&to_json(&p.spec)).unwrap();
    assert_eq!(p.spec, again.spec);
    assert!(matches!(p.spec.bc_minus, MinusCondition::MultiPoint(_)));
    assert!((p.r.value(0.0) - 2.0).abs() < 1e-15);
}

#[test]
fn missing_field_is_named() {
    let err = parse_problem(r#"{"r": "1", "bc_minus": {"alphas": [0], "etas": [0]}}"#).unwrap_err();
    assert!(
        matches!(err, Error::MissingField(ref f) if f == "bc_plus"),
        "{err:?}"
    );
}

#[test]
fn mismatched_weights_are_rejected() {
    let cfg = r#"{"r": "1", "bc_minus": {"alphas": [0.1], "etas": []}, "bc_plus": {"alphas": [0], "etas": [0]}}"#;
    assert!(parse_problem(cfg).is_err());
}

#[test]
fn separated_condition_parses() {
    let p = parse_problem(
        r#"{"r": "1", "bc_minus": {"c0": 0, "c1": 1}, "bc_plus": {"alphas": [0], "etas": [0]}}"#,
    )
    .unwrap();
    assert!(p.separated().is_some());
}

#[test]
fn validation_records_large_weights() {
    let ok = validate(&parse_problem(BASE).unwrap());
    assert!(ok.ok(), "{:?}", ok.failures);
    let big = parse_problem(r#"{"r": "1 + 0.8*sin(3*x)", "bc_minus": {"alphas": [0.9], "etas": [0]}, "bc_plus": {"alphas": [0.95], "etas": [0.2]}}"#).unwrap();
    let rep = validate(&big);
    assert!(rep.a1 < 0.9, "a1 = {}", rep.a1);
    // Exceeding the sufficient bound is flagged; only |alpha| >= 1 is a failure.
    assert!(rep.ok());
    assert!(!rep.plus_within_a1);
    assert!(rep.plus_below_one);
    let over = parse_problem(r#"{"r": "1", "bc_minus": {"alphas": [0.6, 0.5], "etas": [0, 0.5]}, "bc_plus": {"alphas": [0], "etas": [0]}}"#).unwrap();
    let rep = validate(&over);
    assert_eq!(rep.minus_below_one, Some(false));
    assert!(!rep.ok());
}

#[test]
fn nonpositive_weight_function_is_reported() {
    let p = parse_problem(
        r#"{"r": "x", "bc_minus": {"alphas": [0], "etas": [0]}, "bc_plus": {"alphas": [0], "etas": [0]}}"#,
    );
    if let Ok(p) = p {
        assert!(!validate(&p).r_positive);
    }
}
