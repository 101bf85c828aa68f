//! Turn-key reproductions of the two counterexamples: a long eigenvalue-free
//! window for a jump coefficient, and a double eigenvalue for a smooth one.

use crate::characteristic::{jacobian, theta_of, DEGENERACY_THRESHOLD};
use crate::error::Result;
use crate::ivp::{integrate, Family, Solution, Span, State, DEFAULT_TOL};
use crate::numeric::{bisect, linspace};
use crate::oracle::{multiplicity_at, MULTIPLICITY_N};
use crate::problem::{CoefficientSpec, Problem};
use crate::spectrum::{scan_determinant, ScanResult};
use serde::Serialize;
use std::f64::consts::PI;

/// Margin removed from each end of the window before scanning.
pub const WINDOW_MARGIN: f64 = 0.5;
/// Points in the window scans.
pub const SCAN_GRID: usize = 600;
/// Samples of the energy inequality chain.
pub const CHAIN_SAMPLES: usize = 20;
/// Cluster tolerance for the multiplicity check.
pub const CLUSTER_TOL: f64 = 1e-4;

/// The symmetric weight `√3/2` of the first example.
pub fn example1_weight() -> f64 {
    3f64.sqrt() / 2.0
}

/// The jump-coefficient instance with `u(±1) = (√3/2) u(0)`.
pub fn example1_problem(delta: f64, smoothing: f64) -> Result<Problem> {
    let a = example1_weight();
    Problem::multipoint(
        CoefficientSpec::example1(delta, smoothing),
        (vec![a], vec![0.0]),
        (vec![a], vec![0.0]),
    )
}

/// Energy chain `u(1)² ≤ ¼ + ¾u(δ)² ≤ 5/8 < ¾u(0)²` for the even solution with `u(0) = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainSample {
    pub lambda: f64,
    pub u_one_sq: f64,
    pub u_delta_sq: f64,
    pub energy_bound: f64,
    pub holds: bool,
}

/// Result of [`run_example1`].
#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub delta: f64,
    pub smoothing: f64,
    /// `[(π/4δ)², (3π/4δ)²]`.
    pub interval: (f64, f64),
    /// The scanned window, shrunk by the margin.
    pub scanned: (f64, f64),
    /// All roots of the characteristic determinant in the window.
    pub eigenvalues_found: Vec<f64>,
    /// Roots with an even eigenfunction: `u_e(1) = (√3/2) u_e(0)`.
    pub even_eigenvalues: Vec<f64>,
    /// Roots with an odd eigenfunction: `u_o(1) = 0`, which satisfies the
    /// condition for every weight since `u_o(0) = 0`.
    pub odd_eigenvalues: Vec<f64>,
    pub gap_certified: bool,
    pub even_gap_certified: bool,
    pub chain: Vec<ChainSample>,
    pub chain_holds: bool,
    #[serde(skip)]
    pub scan: ScanResult,
}

fn half_solution(problem: &Problem, lambda: f64, init: State) -> Result<Solution> {
    integrate(
        &problem.r,
        lambda,
        init,
        0.0,
        Span::Forward,
        DEFAULT_TOL,
        &problem.stop_points(),
    )
}

/// Sign changes of `f` on a grid uniform in `√λ`, refined by bisection.
fn roots_of(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ls: Vec<f64> = linspace(lo.sqrt(), hi.sqrt(), n)
        .into_iter()
        .map(|s| s * s)
        .collect();
    let vs: Vec<f64> = ls.iter().map(|&l| f(l)).collect();
    (0..n - 1)
        .filter(|&i| vs[i] * vs[i + 1] < 0.0)
        .map(|i| bisect(&f, ls[i], ls[i + 1], 1e-12 * ls[i + 1]))
        .collect()
}

/// Scans the window of the first example and splits the spectrum found
/// into even and odd eigenfunctions.
pub fn run_example1(delta: f64, smoothing: f64) -> Result<GapReport> {
    if !(delta > 0.0 && delta < 0.5) || !(smoothing >= 0.0) {
        return Err(crate::Error::Invalid(format!(
            "delta must lie in (0, 1/2) and smoothing be nonnegative, got {delta}, {smoothing}"
        )));
    }
    let problem = example1_problem(delta, smoothing)?;
    let interval = (
        (PI / (4.0 * delta)).powi(2),
        (3.0 * PI / (4.0 * delta)).powi(2),
    );
    let scanned = (interval.0 + WINDOW_MARGIN, interval.1 - WINDOW_MARGIN);
    let scan = scan_determinant(&problem, scanned.0, scanned.1, SCAN_GRID, DEFAULT_TOL)?;
    let eigenvalues_found: Vec<f64> = scan.roots.iter().map(|r| r.lambda).collect();
    let a = example1_weight();
    let end = |l: f64, init: State| {
        half_solution(&problem, l, init)
            .and_then(|s| s.sample(1.0))
            .map_or(f64::NAN, |s| s.u)
    };
    let even_eigenvalues = roots_of(
        |l| end(l, State::new(1.0, 0.0)) - a,
        scanned.0,
        scanned.1,
        SCAN_GRID,
    );
    let odd_eigenvalues = roots_of(
        |l| end(l, State::new(0.0, 1.0)),
        scanned.0,
        scanned.1,
        SCAN_GRID,
    );
    let chain = linspace(interval.0, interval.1, CHAIN_SAMPLES)
        .into_iter()
        .map(|l| {
            let s = half_solution(&problem, l, State::new(1.0, 0.0))?;
            let u1 = s.sample(1.0)?.u;
            let ud = s.sample(delta)?.u;
            let (u_one_sq, u_delta_sq) = (u1 * u1, ud * ud);
            let energy_bound = 0.25 + 0.75 * u_delta_sq;
            let holds =
                u_one_sq <= energy_bound + 1e-9 && energy_bound <= 0.625 + 1e-9 && 0.625 < 0.75;
            Ok(ChainSample {
                lambda: l,
                u_one_sq,
                u_delta_sq,
                energy_bound,
                holds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GapReport {
        delta,
        smoothing,
        interval,
        scanned,
        gap_certified: eigenvalues_found.is_empty(),
        even_gap_certified: even_eigenvalues.is_empty(),
        eigenvalues_found,
        even_eigenvalues,
        odd_eigenvalues,
        chain_holds: chain.iter().all(|c| c.holds),
        chain,
        scan,
    })
}

/// Result of [`run_example2`].
#[derive(Clone, Debug, Serialize)]
pub struct DoubleEigenReport {
    pub mu_d: f64,
    pub alpha: f64,
    /// `|α| < 2^{-1/2}`.
    pub alpha_bound_ok: bool,
    /// `|α| < 1`, which is what the instance needs to be admissible.
    pub alpha_below_one: bool,
    pub theta_star: f64,
    pub jacobian_det: f64,
    pub jacobian_normalized: f64,
    pub jacobian_degenerate: bool,
    pub oracle_n: usize,
    pub oracle_multiplicity: usize,
    /// `(α, max |u(±1) - α u(0)| / max|u|)` for the odd eigenfunction.
    pub odd_bc_residuals: Vec<(f64, f64)>,
    /// Gram determinant of the normalized odd and even eigenfunctions.
    pub gram_determinant: f64,
    pub failures: Vec<String>,
}

/// First Dirichlet eigenvalue of `-u'' = μ r u` on `(0, 1)` by shooting from 0.
pub fn half_interval_dirichlet(r: &CoefficientSpec) -> Result<f64> {
    let problem = Problem::dirichlet(r.clone())?;
    let end = |m: f64| {
        half_solution(&problem, m, State::new(0.0, 1.0))
            .and_then(|s| s.sample(1.0))
            .map_or(f64::NAN, |s| s.u)
    };
    let mut lo = 1e-3;
    let mut hi = lo;
    loop {
        hi += 0.25;
        if end(hi) < 0.0 {
            break;
        }
        lo = hi;
        if hi > 1e4 {
            return Err(crate::Error::Bracket { k: 1 });
        }
    }
    Ok(bisect(end, lo, hi, 1e-12))
}

/// Builds the double-eigenvalue instance `u(±1) = v(1) u(0)` for
/// `r = 2 - cos(πx/2)` and certifies it.
pub fn run_example2() -> Result<DoubleEigenReport> {
    run_example2_with(MULTIPLICITY_N)
}

/// [`run_example2`] with a chosen oracle grid.
pub fn run_example2_with(oracle_n: usize) -> Result<DoubleEigenReport> {
    let r = CoefficientSpec::example2();
    let mu_d = half_interval_dirichlet(&r)?;
    let base = Problem::dirichlet(r.clone())?;
    let even = integrate(
        &base.r,
        mu_d,
        State::new(1.0, 0.0),
        0.0,
        Span::Both,
        DEFAULT_TOL,
        &[],
    )?;
    let odd = integrate(
        &base.r,
        mu_d,
        State::new(0.0, 1.0),
        0.0,
        Span::Both,
        DEFAULT_TOL,
        &[],
    )?;
    let alpha = even.sample(1.0)?.u;
    let problem = Problem::multipoint(
        r.clone(),
        (vec![alpha], vec![0.0]),
        (vec![alpha], vec![0.0]),
    )?;
    let mut failures = Vec::new();
    let alpha_bound_ok = alpha.abs() < 0.5f64.sqrt();
    if !alpha_bound_ok {
        failures.push(format!("|alpha| = {} is not below 2^(-1/2)", alpha.abs()));
    }
    let family = Family::Energy;
    let theta_star = theta_of(0.0, 1.0, mu_d, base.r.value(0.0), family);
    let jac = jacobian(&problem, mu_d, theta_star, family, DEFAULT_TOL)?;
    let jacobian_degenerate = jac.normalized < DEGENERACY_THRESHOLD;
    if !jacobian_degenerate {
        failures.push(format!(
            "normalized jacobian {:e} above the degeneracy threshold",
            jac.normalized
        ));
    }
    let oracle_multiplicity = multiplicity_at(&problem, mu_d, oracle_n, CLUSTER_TOL)?;
    if oracle_multiplicity != 2 {
        failures.push(format!(
            "oracle multiplicity {oracle_multiplicity}, expected 2"
        ));
    }
    let xs = linspace(-1.0, 1.0, 401);
    let ov: Vec<f64> = xs
        .iter()
        .map(|&x| odd.sample(x).map(|s| s.u))
        .collect::<Result<_>>()?;
    let ev: Vec<f64> = xs
        .iter()
        .map(|&x| even.sample(x).map(|s| s.u))
        .collect::<Result<_>>()?;
    let omax = ov.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let odd_bc_residuals: Vec<(f64, f64)> = [0.0, 0.3, alpha]
        .iter()
        .map(|&a| {
            let (um, up, u0) = (ov[0], ov[400], ov[200]);
            (a, (um - a * u0).abs().max((up - a * u0).abs()) / omax)
        })
        .collect();
    for (a, res) in &odd_bc_residuals {
        if *res > 1e-8 {
            failures.push(format!(
                "odd eigenfunction violates the condition for alpha = {a}: {res:e}"
            ));
        }
    }
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let (no, ne) = (norm(&ov), norm(&ev));
    let c: f64 = ov.iter().zip(&ev).map(|(a, b)| a * b).sum::<f64>() / (no * ne);
    let gram_determinant = 1.0 - c * c;
    if gram_determinant < 0.5 {
        failures.push(format!("gram determinant {gram_determinant} too small"));
    }
    Ok(DoubleEigenReport {
        mu_d,
        alpha,
        alpha_bound_ok,
        alpha_below_one: alpha.abs() < 1.0,
        theta_star,
        jacobian_det: jac.det,
        jacobian_normalized: jac.normalized,
        jacobian_degenerate,
        oracle_n,
        oracle_multiplicity,
        odd_bc_residuals,
        gram_determinant,
        failures,
    })
}
