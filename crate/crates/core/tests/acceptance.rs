//! Acceptance suite: one check per criterion at its stated tolerance.
//! Runs without the test harness so the report is always printed.
//!
//! Every criterion prints a PASS/FAIL line. Two criteria rest on claims that
//! do not hold for the instances as posed; they are listed in `KNOWN_FAILING`
//! with the reason, still print FAIL, and the suite asserts that they fail
//! for exactly that reason so a silent change in either direction is caught.

use multipoint::bounds::{
    compute_constants, verify_energy_envelope, verify_identities, DEFAULT_GRID,
};
use multipoint::characteristic::{scan_theta, SingleCondition};
use multipoint::ivp::{Family, DEFAULT_TOL};
use multipoint::nodal::Nu;
use multipoint::nonlinear::{crossing_check, find_nodal_solution, BranchStatus};
use multipoint::oracle::{multiplicity_at, oracle_spectrum};
use multipoint::problem::{parse_problem, Coefficient, CoefficientSpec, Problem};
use multipoint::scenarios::{run_example1, run_example2};
use multipoint::spectrum::{
    check_interlacing, check_principal_positivity, compute_spectrum, dirichlet_spectrum,
    SpectrumOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};
use std::time::{Duration, Instant};

/// Criteria that fail for a documented mathematical reason.
const KNOWN_FAILING: &[(u32, &str)] = &[
    (6, "odd eigenfunctions satisfy the condition for any weight"),
    (7, "|v(1)| exceeds 2^(-1/2)"),
];

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
    /// For criteria in `KNOWN_FAILING`: the failure matched the documented cause.
    expected_cause: bool,
}

fn outcome(id: u32, name: &'static str, failures: Vec<String>, detail: String) -> Outcome {
    Outcome {
        id,
        name,
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            detail
        } else {
            failures.join("; ")
        },
        expected_cause: false,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Smooth positive coefficient `a + b sin(c x + d)` with `b ≤ 0.3 a`.
fn random_r(rng: &mut ChaCha8Rng) -> CoefficientSpec {
    let a: f64 = rng.random_range(1.0..3.0);
    let b: f64 = rng.random_range(0.0..0.3) * a;
    let c: f64 = rng.random_range(0.5..2.0);
    let d: f64 = rng.random_range(0.0..2.0 * PI);
    CoefficientSpec::expression(format!("{a} + {b}*sin({c}*x + {d})"))
}

/// Weights with the given 1-norm spread over `m` points.
fn random_weights(rng: &mut ChaCha8Rng, m: usize, norm: f64, positive: bool) -> Vec<f64> {
    let raw: Vec<f64> = (0..m)
        .map(|_| {
            let v: f64 = rng.random_range(0.1..1.0);
            if positive || rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    let s: f64 = raw.iter().map(|v| v.abs()).sum();
    raw.iter().map(|v| v * norm / s).collect()
}

fn random_etas(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(-0.95..0.95)).collect()
}

fn a1_of(r: &CoefficientSpec) -> f64 {
    let c = Coefficient::compile(r, false).unwrap();
    compute_constants(&c, DEFAULT_GRID).unwrap().a1
}

fn criterion_1() -> Outcome {
    let p = Problem::dirichlet(CoefficientSpec::expression("1")).unwrap();
    let start = Instant::now();
    let res = compute_spectrum(&p, 8, &SpectrumOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for (k, l) in res.lambdas().iter().enumerate() {
        let e = rel(*l, ((k + 1) as f64 * FRAC_PI_2).powi(2));
        worst = worst.max(e);
        if e >= 1e-8 {
            failures.push(format!("k = {}: relative error {e:e}", k + 1));
        }
    }
    if res.pairs.len() != 8 {
        failures.push(format!("{} eigenvalues", res.pairs.len()));
    }
    if elapsed >= Duration::from_secs(1) {
        failures.push(format!("runtime {elapsed:?}"));
    }
    outcome(
        1,
        "Dirichlet baseline",
        failures,
        format!("max rel err {worst:.1e}, {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let p = Problem::multipoint(
        CoefficientSpec::expression("1"),
        (vec![0.5], vec![0.0]),
        (vec![0.5], vec![0.0]),
    )
    .unwrap();
    let res = compute_spectrum(&p, 4, &SpectrumOptions::default()).unwrap();
    let exact = [
        (PI / 3.0).powi(2),
        PI * PI,
        (5.0 * PI / 3.0).powi(2),
        (2.0 * PI).powi(2),
    ];
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for (pair, e) in res.pairs.iter().zip(exact) {
        let err = rel(pair.lambda, e);
        worst = worst.max(err);
        if err >= 1e-7 {
            failures.push(format!("k = {}: relative error {err:e}", pair.k));
        }
        if !pair.certificates.simple {
            failures.push(format!("k = {} not certified simple", pair.k));
        }
        match &pair.certificates.nodal_class {
            Some(c) if c.k == pair.k => {}
            other => failures.push(format!("k = {} classified {other:?}", pair.k)),
        }
    }
    outcome(
        2,
        "multi-point constant case",
        failures,
        format!("max rel err {worst:.1e}"),
    )
}

fn criterion_3() -> Outcome {
    let r = Coefficient::compile(&CoefficientSpec::example2(), false).unwrap();
    let base = dirichlet_spectrum(&r, 4, DEFAULT_TOL).unwrap();
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for b in &base {
        let family = b.family();
        let rep = verify_identities(&r, b.lambda, b.theta(family), family, DEFAULT_TOL).unwrap();
        let m = rep.max_residual();
        worst = worst.max(m);
        if m >= 1e-6 {
            failures.push(format!("k = {}: residual {m:e}", b.k));
        }
    }
    outcome(
        3,
        "endpoint identities",
        failures,
        format!("max residual {worst:.1e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..100 {
        let r = Coefficient::compile(&random_r(&mut rng), false).unwrap();
        let lambda = rng.random_range(1.0..100.0);
        let theta = rng.random_range(0.0..2.0 * PI);
        let rep = verify_energy_envelope(&r, lambda, theta, Family::Energy, DEFAULT_TOL).unwrap();
        worst = worst.max(rep.max_violation);
        if rep.max_violation >= 1e-8 {
            failures.push(format!("instance {i}: violation {:e}", rep.max_violation));
        }
    }
    outcome(
        4,
        "energy envelope",
        failures,
        format!("worst signed violation {worst:.2e}"),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for i in 0..10 {
        let r = random_r(&mut rng);
        let a1 = a1_of(&r);
        let (mm, mp) = (rng.random_range(1..3usize), rng.random_range(1..3usize));
        let minus = (
            {
                let norm = rng.random_range(0.1..0.99) * a1 / 2.0;
                random_weights(&mut rng, mm, norm, false)
            },
            random_etas(&mut rng, mm),
        );
        let plus = (
            {
                let norm = rng.random_range(0.1..0.99) * a1 / 2.0;
                random_weights(&mut rng, mp, norm, false)
            },
            random_etas(&mut rng, mp),
        );
        let p = Problem::multipoint(r, minus, plus).unwrap();
        let cont = compute_spectrum(&p, 5, &SpectrumOptions::default()).unwrap();
        let orc = oracle_spectrum(&p, 2000, 5).unwrap();
        for (k, (a, b)) in cont.lambdas().iter().zip(&orc.eigenvalues).enumerate() {
            let e = rel(*b, *a);
            worst = worst.max(e);
            if e >= 1e-3 {
                failures.push(format!("instance {i}, k = {}: {a} vs {b}", k + 1));
            }
            let m = multiplicity_at(&p, *a, 2000, 1e-4).unwrap();
            if m != 1 {
                failures.push(format!("instance {i}, k = {}: multiplicity {m}", k + 1));
            }
        }
    }
    outcome(
        5,
        "oracle equivalence",
        failures,
        format!("max rel diff {worst:.1e}"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut odd_total = 0;
    let mut even_ok = true;
    for smoothing in [0.0, 0.02] {
        let rep = run_example1(0.25, smoothing).unwrap();
        if !rep.gap_certified {
            failures.push(format!(
                "eps = {smoothing}: eigenvalues {:?} in the window",
                rep.eigenvalues_found
                    .iter()
                    .map(|l| (l * 1e4).round() / 1e4)
                    .collect::<Vec<_>>()
            ));
        }
        odd_total += rep.odd_eigenvalues.len();
        even_ok &=
            rep.even_gap_certified && rep.odd_eigenvalues.len() == rep.eigenvalues_found.len();
        if smoothing == 0.0 && (!rep.chain_holds || rep.chain.len() != 20) {
            failures.push("inequality chain failed".into());
            even_ok = false;
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(10) {
        failures.push(format!("runtime {elapsed:?}"));
    }
    let mut o = outcome(6, "Example 1 gap", failures, format!("{elapsed:.2?}"));
    o.expected_cause = !o.passed && even_ok && odd_total > 0 && elapsed < Duration::from_secs(10);
    if o.expected_cause {
        o.detail.push_str(&format!(
            "; all {odd_total} roots are odd eigenfunctions, even sector empty, energy chain holds ({elapsed:.2?})"
        ));
    }
    o
}

fn criterion_7() -> Outcome {
    let rep = run_example2().unwrap();
    let mut failures = Vec::new();
    if !rep.alpha_bound_ok {
        failures.push(format!(
            "|alpha| = {:.6} is not below 2^(-1/2)",
            rep.alpha.abs()
        ));
    }
    let others_ok = rep.oracle_multiplicity == 2 && rep.jacobian_degenerate && rep.alpha_below_one;
    if rep.oracle_multiplicity != 2 {
        failures.push(format!("oracle multiplicity {}", rep.oracle_multiplicity));
    }
    if !rep.jacobian_degenerate {
        failures.push(format!("normalized det {:e}", rep.jacobian_normalized));
    }
    let mut o = outcome(
        7,
        "Example 2 double eigenvalue",
        failures,
        format!(
            "mu_D = {:.6}, multiplicity {}",
            rep.mu_d, rep.oracle_multiplicity
        ),
    );
    o.expected_cause = !o.passed && !rep.alpha_bound_ok && others_ok;
    if o.expected_cause {
        o.detail.push_str(&format!(
            "; |alpha| < 1 holds, multiplicity {} at mu_D = {:.6}, normalized det {:.1e}",
            rep.oracle_multiplicity, rep.mu_d, rep.jacobian_normalized
        ));
    }
    o
}

fn criterion_8() -> Outcome {
    let p = parse_problem(
        r#"{"r": "1", "bc_minus": {"c0": 1, "c1": 0}, "bc_plus": {"alphas": [0.5], "etas": [0]}}"#,
    )
    .unwrap();
    let rep = check_interlacing(&p, 4, DEFAULT_TOL).unwrap();
    let mut failures = Vec::new();
    if rel(rep.lambdas[0], 0.25f64.acos().powi(2)) > 1e-8 || (rep.lambdas[0] - 1.7375).abs() > 1e-4
    {
        failures.push(format!("lambda_1 = {}", rep.lambdas[0]));
    }
    if (rep.mus[0] - 0.61685).abs() > 1e-5 || (rep.mus[1] - 5.55165).abs() > 1e-5 {
        failures.push(format!("mu = {:?}", &rep.mus[..2]));
    }
    if !rep.holds {
        failures.extend(rep.violations.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..50 {
        let m = rng.random_range(1..4usize);
        let w = {
            let norm = rng.random_range(0.0..0.3);
            random_weights(&mut rng, m, norm, false)
        };
        let e = random_etas(&mut rng, m);
        let cfg = format!(
            r#"{{"r": "1", "bc_minus": {{"c0": 1, "c1": 0}}, "bc_plus": {{"alphas": {w:?}, "etas": {e:?}}}}}"#
        );
        let p = parse_problem(&cfg).unwrap();
        let rep = check_interlacing(&p, 4, DEFAULT_TOL).unwrap();
        if !rep.holds {
            failures.push(format!("instance {i}: {:?}", rep.violations));
        }
    }
    outcome(
        8,
        "interlacing",
        failures,
        format!("lambda_1 = {:.6}", rep.lambdas[0]),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = Vec::new();
    let mut min_seen = f64::INFINITY;
    for i in 0..20 {
        let r = random_r(&mut rng);
        let a1 = a1_of(&r);
        let (mm, mp) = (rng.random_range(1..3usize), rng.random_range(1..3usize));
        let minus = (
            {
                let norm = rng.random_range(0.1..0.99) * a1 / 2.0;
                random_weights(&mut rng, mm, norm, true)
            },
            random_etas(&mut rng, mm),
        );
        let plus = (
            {
                let norm = rng.random_range(0.1..0.99) * a1 / 2.0;
                random_weights(&mut rng, mp, norm, true)
            },
            random_etas(&mut rng, mp),
        );
        let p = Problem::multipoint(r, minus, plus).unwrap();
        let res = compute_spectrum(&p, 1, &SpectrumOptions::default()).unwrap();
        let pos = check_principal_positivity(&res.pairs[0], &p).unwrap();
        min_seen = min_seen.min(pos.min_value);
        if !pos.positive || !pos.closed_interval {
            failures.push(format!("instance {i}: min {}", pos.min_value));
        }
    }
    let p = Problem::multipoint(
        CoefficientSpec::expression("1"),
        (vec![-0.5], vec![0.0]),
        (vec![0.5], vec![0.0]),
    )
    .unwrap();
    let res = compute_spectrum(&p, 1, &SpectrumOptions::default()).unwrap();
    if check_principal_positivity(&res.pairs[0], &p)
        .unwrap()
        .positive
    {
        failures.push("negative weight instance reported positive".into());
    }
    outcome(
        9,
        "principal positivity",
        failures,
        format!("smallest normalized min {min_seen:.3}"),
    )
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let p = parse_problem(
        r#"{"r": "1", "bc_minus": {"alphas": [0], "etas": [0]}, "bc_plus": {"alphas": [0], "etas": [0]}, "g": "(1+15*u^2)/(1+u^2)"}"#,
    )
    .unwrap();
    let mut failures = Vec::new();
    let c = crossing_check(&p, 1).unwrap();
    if !c.crosses || (c.lambda_k_0 - 2.4674).abs() > 1e-4 || (c.lambda_k_inf - 0.16450).abs() > 1e-5
    {
        failures.push(format!("crossing {c:?}"));
    }
    let rep = find_nodal_solution(&p, 1, Nu::Plus).unwrap();
    let b = &rep.branch;
    if b.status != BranchStatus::ReachedTarget {
        failures.push(format!("status {:?}", b.status));
    }
    if rep.solution.residual_inf >= 1e-8 {
        failures.push(format!("residual {:e}", rep.solution.residual_inf));
    }
    match &rep.solution.nodal_class {
        Some(cl) if cl.k == 1 && cl.nu == Nu::Plus => {}
        other => failures.push(format!("class {other:?}")),
    }
    if (b.lambda_bound - 22.207).abs() > 1e-3 || b.max_lambda() >= b.lambda_bound {
        failures.push(format!(
            "max lambda {} vs bound {}",
            b.max_lambda(),
            b.lambda_bound
        ));
    }
    let l0 = b.extrapolate_origin().unwrap_or(f64::NAN);
    if l0.is_nan() || rel(l0, c.lambda_k_0) >= 1e-4 {
        failures.push(format!("extrapolated origin {l0}"));
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(30) {
        failures.push(format!("runtime {elapsed:?}"));
    }
    outcome(
        10,
        "nodal solution via crossing",
        failures,
        format!(
            "residual {:.1e}, sup {:.4}, origin err {:.1e}, {elapsed:.2?}",
            rep.solution.residual_inf,
            rep.solution.sup_norm(),
            rel(l0, c.lambda_k_0)
        ),
    )
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = Vec::new();
    for i in 0..50 {
        let spec = random_r(&mut rng);
        let a1 = a1_of(&spec);
        let r = Coefficient::compile(&spec, false).unwrap();
        let lambda = rng.random_range(0.5..100.0);
        let eta0 = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let m = rng.random_range(1..4usize);
        let alphas = random_weights(&mut rng, m, a1 / 2.0, false);
        let etas = random_etas(&mut rng, m);
        let sc = SingleCondition::new(&r, lambda, eta0, &alphas, &etas, DEFAULT_TOL).unwrap();
        let z = scan_theta(&sc);
        if z.count != 1 || z.degenerate {
            failures.push(format!("instance {i}: {} zeros", z.count));
            continue;
        }
        let mag = sc.b_even.hypot(sc.b_odd);
        if z.slopes.iter().any(|s| s.abs() <= 1e-8 * mag) {
            failures.push(format!("instance {i}: vanishing slope"));
        }
    }
    outcome(
        11,
        "single-condition uniqueness",
        failures,
        "50 instances".into(),
    )
}

fn main() {
    let outcomes = vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
    ];
    let mut unexpected = Vec::new();
    for o in &outcomes {
        let known = KNOWN_FAILING.iter().find(|(id, _)| *id == o.id);
        let status = if o.passed { "PASS" } else { "FAIL" };
        match known {
            Some((_, cause)) => println!(
                "AC{:>2} {status} {}: {} [known: {cause}]",
                o.id, o.name, o.detail
            ),
            None => println!("AC{:>2} {status} {}: {}", o.id, o.name, o.detail),
        }
        let fine = match known {
            None => o.passed,
            Some(_) => !o.passed && o.expected_cause,
        };
        if !fine {
            unexpected.push(o.id);
        }
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed}/{} criteria pass", outcomes.len());
    assert!(
        unexpected.is_empty(),
        "criteria with unexpected outcome: {unexpected:?}"
    );
}
