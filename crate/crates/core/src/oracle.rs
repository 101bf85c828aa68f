//! Independent finite-difference eigenvalue solver used as ground truth.
//!
//! The pencil `A u = λ B u` is reduced by shift-invert Arnoldi: the operator
//! `(A - σB)⁻¹ B` is applied through [`ShiftedSolver`] in O(N) and the small
//! Hessenberg matrix is diagonalized densely.

use crate::error::{Error, Result};
use crate::fd::DiscreteSystem;
use crate::problem::{MinusCondition, Problem};
use nalgebra::DMatrix;
use serde::Serialize;

/// Default interior grid size.
pub const DEFAULT_N: usize = 2000;
/// Grid size for multiplicity checks at a double eigenvalue.
pub const MULTIPLICITY_N: usize = 3000;
/// Smallest grid accepted by the public entry points.
pub const MIN_N: usize = 200;
/// Imaginary parts below this fraction of the real part are dropped.
pub const REAL_TOL: f64 = 1e-8;
/// Shift of the shift-invert transform.
const SHIFT: f64 = -1.0;

/// Eigenvalues of the discretized problem.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub struct OracleSpectrum {
    #[serde(rename = "N")]
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub warnings: Vec<String>,
    /// η points handled by linear interpolation.
    pub interpolated_etas: Vec<f64>,
}

fn check(problem: &Problem, n: usize) -> Result<()> {
    if n < MIN_N {
        return Err(Error::Precondition(format!(
            "oracle grid N = {n} is below {MIN_N}"
        )));
    }
    let (a, b) = problem.alpha_norms();
    if let MinusCondition::MultiPoint(_) = problem.spec.bc_minus {
        if a >= 1.0 {
            return Err(Error::Precondition(format!(
                "|alpha-| = {a} must be below 1"
            )));
        }
    }
    if b >= 1.0 {
        return Err(Error::Precondition(format!(
            "|alpha+| = {b} must be below 1"
        )));
    }
    Ok(())
}

/// The `k` smallest real eigenvalues of the `n`-point discretization.
pub fn oracle_spectrum(problem: &Problem, n: usize, k: usize) -> Result<OracleSpectrum> {
    check(problem, n)?;
    let sys = DiscreteSystem::new(problem, n)?;
    let (eigenvalues, warnings) = smallest_eigenvalues(&sys, k)?;
    Ok(OracleSpectrum {
        n,
        eigenvalues,
        warnings,
        interpolated_etas: sys.elimination.interpolated.clone(),
    })
}

/// Number of oracle eigenvalues within `cluster_tol·max(1, |λ*|)` of `λ*`.
pub fn multiplicity_at(
    problem: &Problem,
    lambda_star: f64,
    n: usize,
    cluster_tol: f64,
) -> Result<usize> {
    check(problem, n)?;
    let sys = DiscreteSystem::new(problem, n)?;
    let radius = cluster_tol * lambda_star.abs().max(1.0);
    let ritz = arnoldi_eigenvalues(
        &sys,
        lambda_star - 0.5 * radius.max(1e-3 * lambda_star.abs().max(1.0)),
        8,
    )?;
    Ok(ritz
        .iter()
        .filter(|z| ((z.re - lambda_star).powi(2) + z.im.powi(2)).sqrt() <= radius)
        .count())
}

/// Smallest `k` eigenvalues by real part; non-real values are reported.
fn smallest_eigenvalues(sys: &DiscreteSystem, k: usize) -> Result<(Vec<f64>, Vec<String>)> {
    let ritz = arnoldi_eigenvalues(sys, SHIFT, k + 2)?;
    let mut warnings = Vec::new();
    let mut real = Vec::new();
    for z in ritz {
        if z.im.abs() < REAL_TOL * z.re.abs() {
            real.push(z.re);
        } else if z.im > 0.0 {
            warnings.push(format!("complex eigenvalue pair {} ± {}i", z.re, z.im));
        }
    }
    real.sort_by(f64::total_cmp);
    if real.len() < k {
        return Err(Error::NoConvergence(format!(
            "only {} of {k} eigenvalues converged",
            real.len()
        )));
    }
    real.truncate(k);
    Ok((real, warnings))
}

type C64 = nalgebra::Complex<f64>;

/// Converged eigenvalues nearest `shift` (at least `want` of them), ordered
/// by distance from the shift.
fn arnoldi_eigenvalues(sys: &DiscreteSystem, shift: f64, want: usize) -> Result<Vec<C64>> {
    let n = sys.n();
    let d: Vec<f64> = sys.r.iter().map(|r| shift * r).collect();
    let solver = sys.factor(&d)?;
    let op = |v: &[f64]| {
        let bv: Vec<f64> = v.iter().zip(&sys.r).map(|(a, r)| a * r).collect();
        solver.solve(&bv)
    };
    let max_dim = n.min(600);
    let mut dim = n.min((3 * want + 40).max(60));
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let start: Vec<f64> = (0..n).map(|j| 1.0 + 0.5 * (1.7 * j as f64).sin()).collect();
    let s = norm(&start);
    let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|a| a / s).collect()];
    let mut h = DMatrix::<f64>::zeros(max_dim + 1, max_dim);
    let mut prev: Option<Vec<C64>> = None;
    let mut built = 0;
    loop {
        while built < dim {
            let mut w = op(&basis[built]);
            // Classical Gram-Schmidt, applied twice.
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c: f64 = q.iter().zip(&w).map(|(a, b)| a * b).sum();
                    h[(i, built)] += c;
                    for (wj, qj) in w.iter_mut().zip(q) {
                        *wj -= c * qj;
                    }
                }
            }
            let beta = norm(&w);
            h[(built + 1, built)] = beta;
            built += 1;
            if beta <= 1e-14 * h.column(built - 1).norm() {
                dim = built;
                break;
            }
            basis.push(w.iter().map(|a| a / beta).collect());
        }
        let hm = h.view((0, 0), (dim, dim)).into_owned();
        let mut lambdas: Vec<C64> = hm
            .complex_eigenvalues()
            .iter()
            .filter(|nu| nu.norm() > 1e-300)
            .map(|nu| C64::new(shift, 0.0) + C64::new(1.0, 0.0) / nu)
            .collect();
        lambdas.sort_by(|a, b| (a - shift).norm().total_cmp(&(b - shift).norm()));
        lambdas.truncate(want);
        let stable = prev.as_ref().is_some_and(|p| {
            p.len() == lambdas.len()
                && p.iter()
                    .zip(&lambdas)
                    .all(|(a, b)| (a - b).norm() <= 1e-11 * b.norm().max(1.0))
        });
        let exhausted = built < dim || dim >= max_dim || basis.len() <= dim;
        if stable || exhausted {
            if !stable && prev.is_some() && built >= dim && dim >= max_dim {
                return Err(Error::NoConvergence(format!(
                    "Krylov dimension {dim} reached"
                )));
            }
            return Ok(lambdas);
        }
        prev = Some(lambdas);
        dim = (dim + 20).min(max_dim);
    }
}

/// All eigenvalues of the dense pencil (for small `n` cross-checks).
pub fn dense_eigenvalues(problem: &Problem, n: usize) -> Result<Vec<C64>> {
    let sys = DiscreteSystem::new(problem, n)?;
    let mut a = sys.dense();
    for (i, r) in sys.r.iter().enumerate() {
        a.row_mut(i).scale_mut(1.0 / r);
    }
    let mut ev: Vec<C64> = a.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.re.total_cmp(&y.re));
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::CoefficientSpec;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn dirichlet_second_order() {
        let p = Problem::dirichlet(CoefficientSpec::expression("1")).unwrap();
        let s = oracle_spectrum(&p, 2000, 3).unwrap();
        assert!((s.eigenvalues[0] - FRAC_PI_2.powi(2)).abs() < 2e-6);
        let c = oracle_spectrum(&p, 1000, 3).unwrap();
        for k in 0..3 {
            let exact = ((k + 1) as f64 * FRAC_PI_2).powi(2);
            let ratio = (c.eigenvalues[k] - exact) / (s.eigenvalues[k] - exact);
            assert!((ratio - 4.0).abs() < 0.05, "k = {k}: ratio {ratio}");
        }
        assert_eq!(
            multiplicity_at(&p, FRAC_PI_2.powi(2), 2000, 1e-4).unwrap(),
            1
        );
    }

    #[test]
    fn multipoint_closed_form() {
        let p = Problem::multipoint(
            CoefficientSpec::expression("1"),
            (vec![0.5], vec![0.0]),
            (vec![0.5], vec![0.0]),
        )
        .unwrap();
        let s = oracle_spectrum(&p, 2000, 2).unwrap();
        let exact = (PI / 3.0).powi(2);
        assert!((s.eigenvalues[0] - exact).abs() < 1e-5 * exact);
        assert!((s.eigenvalues[1] - PI * PI).abs() < 1e-5 * PI * PI);
    }

    #[test]
    fn arnoldi_matches_dense() {
        let p = Problem::multipoint(
            CoefficientSpec::expression("2 - cos(pi*x/2)"),
            (vec![0.2, -0.1], vec![0.3, 0.77]),
            (vec![0.25], vec![-0.41]),
        )
        .unwrap();
        let sys = DiscreteSystem::new(&p, 120).unwrap();
        let (fast, _) = smallest_eigenvalues(&sys, 5).unwrap();
        let dense = dense_eigenvalues(&p, 120).unwrap();
        for (a, b) in fast.iter().zip(&dense) {
            assert!(b.im.abs() < 1e-9);
            assert!((a - b.re).abs() < 1e-9 * b.re.abs(), "{a} vs {}", b.re);
        }
    }

    #[test]
    fn precondition() {
        let p = Problem::dirichlet(CoefficientSpec::expression("1")).unwrap();
        assert!(matches!(
            oracle_spectrum(&p, 50, 2),
            Err(Error::Precondition(_))
        ));
    }
}
