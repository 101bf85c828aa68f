//! Nonlinear problems on a collocation mesh: fixed problems `-u'' = f(x, u)`
//! and branches of `-u'' = λ r(x) g(x, u) u` bifurcating from the
//! linearization at `u = 0`.

use crate::bounds::{lambda_of_k, nonlinear_constants};
use crate::error::{Error, Result};
use crate::fd::DiscreteSystem;
use crate::nodal::{classify, DenseCurve, NodalClass, NotNodal, Nu};
use crate::problem::{Coefficient, Problem};
use crate::spectrum::{compute_spectrum, eigenpair, SpectrumOptions};
use serde::Serialize;
use std::fmt::Write as _;

/// Mesh intervals of the collocation grid.
pub const MESH_INTERVALS: usize = 1024;
/// Newton tolerance on the update, relative to `1 + ‖u‖∞`.
pub const NEWTON_TOL: f64 = 1e-10;
/// Magnitude standing in for `u → ±∞` in limit coefficients.
pub const U_LIMIT: f64 = 1e8;
/// Relative amplitude of the first branch point.
pub const START_AMPLITUDE: f64 = 1e-3;
/// Arclength step bounds.
pub const STEP_INITIAL: f64 = 0.05;
pub const STEP_MIN: f64 = 1e-4;
pub const STEP_MAX: f64 = 0.5;
/// Largest `k` scanned by the nonresonance check.
pub const K_CHECK: usize = 20;

/// Piecewise cubic Hermite interpolant of grid values, used to classify
/// discrete solutions.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCurve {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub up: Vec<f64>,
}

impl GridCurve {
    /// Builds the interpolant with second-order difference slopes.
    pub fn new(x: Vec<f64>, u: Vec<f64>) -> Self {
        let n = u.len();
        let h = x[1] - x[0];
        let mut up = vec![0.0; n];
        for j in 1..n - 1 {
            up[j] = (u[j + 1] - u[j - 1]) / (x[j + 1] - x[j - 1]);
        }
        up[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
        up[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
        GridCurve { x, u, up }
    }

    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let n = self.x.len();
        let h = self.x[1] - self.x[0];
        let j = (((x - self.x[0]) / h).floor().max(0.0) as usize).min(n - 2);
        let hj = self.x[j + 1] - self.x[j];
        (j, ((x - self.x[j]) / hj).clamp(0.0, 1.0), hj)
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// CSV with columns `x,u`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,u\n");
        for (x, u) in self.x.iter().zip(&self.u) {
            let _ = writeln!(s, "{x},{u}");
        }
        s
    }
}

impl DenseCurve for GridCurve {
    fn u_up(&self, x: f64) -> (f64, f64) {
        let (j, t, h) = self.locate(x);
        let (p0, p1, m0, m1) = (self.u[j], self.u[j + 1], self.up[j] * h, self.up[j + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let u = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1;
        let du = (6.0 * t2 - 6.0 * t) * p0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * p1
            + (3.0 * t2 - 2.0 * t) * m1;
        (u, du / h)
    }

    fn upp(&self, x: f64) -> f64 {
        let (j, t, h) = self.locate(x);
        let (p0, p1, m0, m1) = (self.u[j], self.u[j + 1], self.up[j] * h, self.up[j + 1] * h);
        let d2 = (12.0 * t - 6.0) * p0
            + (6.0 * t - 4.0) * m0
            + (-12.0 * t + 6.0) * p1
            + (6.0 * t - 2.0) * m1;
        d2 / (h * h)
    }
}

/// A converged collocation solution with its certificates.
#[derive(Clone, Debug, Serialize)]
pub struct BvpSolution {
    pub lambda: f64,
    /// Mesh including both endpoints.
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub up: Vec<f64>,
    /// Largest collocation residual `|(-u'')_j - λ r g u_j|` (or `|(-u'')_j - f|`).
    pub residual_inf: f64,
    /// `u(-1) - Σ α⁻ u(η⁻)` and `u(1) - Σ α⁺ u(η⁺)` by interpolation.
    pub boundary_residuals: [f64; 2],
    pub nodal_class: Option<NodalClass>,
    pub not_nodal: Option<NotNodal>,
    pub newton_iterations: usize,
}

impl BvpSolution {
    pub fn curve(&self) -> GridCurve {
        GridCurve {
            x: self.x.clone(),
            u: self.u.clone(),
            up: self.up.clone(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// CSV with columns `x,u`.
    pub fn to_csv(&self) -> String {
        self.curve().to_csv()
    }
}

/// Right-hand side of the collocation system.
enum Nonlinearity<'a> {
    /// `λ r g(x, u) u`.
    Eigen { rg: &'a Coefficient },
    /// `f(x, u)`.
    Fixed { f: &'a Coefficient },
}

/// Collocation system on the uniform mesh with the boundary rows eliminated.
pub struct Collocation<'a> {
    sys: DiscreteSystem,
    kind: Nonlinearity<'a>,
    problem: &'a Problem,
}

impl<'a> Collocation<'a> {
    fn new(problem: &'a Problem, kind: Nonlinearity<'a>) -> Result<Self> {
        let sys = DiscreteSystem::new(problem, MESH_INTERVALS - 1)?;
        Ok(Collocation { sys, kind, problem })
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    /// `F(u, λ)`, its diagonal `∂F/∂u - A` (negated) and `∂F/∂λ`.
    fn eval(&self, u: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut f = self.sys.apply(u);
        let mut d = vec![0.0; u.len()];
        let mut fl = vec![0.0; u.len()];
        for (i, &x) in self.sys.x.iter().enumerate() {
            match self.kind {
                Nonlinearity::Eigen { rg } => {
                    let j = rg.eval_xu(x, u[i]);
                    f[i] -= lambda * j.v * u[i];
                    d[i] = lambda * (j.v + u[i] * j.du);
                    fl[i] = -j.v * u[i];
                }
                Nonlinearity::Fixed { f: fc } => {
                    let j = fc.eval_xu(x, u[i]);
                    f[i] -= j.v;
                    d[i] = j.du;
                }
            }
        }
        (f, d, fl)
    }

    fn residual_norm(&self, u: &[f64], lambda: f64) -> f64 {
        self.eval(u, lambda)
            .0
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Damped Newton at fixed `λ`.
    pub fn newton(&self, guess: &[f64], lambda: f64) -> Result<(Vec<f64>, usize)> {
        let mut u = guess.to_vec();
        let l2 = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for it in 0..60 {
            let (f, d, _) = self.eval(&u, lambda);
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::NewtonDivergence(format!(
                    "non-finite residual at iteration {it}"
                )));
            }
            let norm0 = l2(&f);
            if norm0 == 0.0 {
                return Ok((u, it));
            }
            let du = self.sys.factor(&d)?.solve(&f);
            let mut t = 1.0;
            let trial = loop {
                let cand: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a - t * b).collect();
                let n1 = l2(&self.eval(&cand, lambda).0);
                if n1 <= (1.0 - 1e-4 * t) * norm0 || t < 1e-6 {
                    break cand;
                }
                t *= 0.5;
            };
            u = trial;
            let step = t * du.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let size = 1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if step <= NEWTON_TOL * size {
                return Ok((u, it + 1));
            }
            if t < 1e-6 {
                return Err(Error::NewtonDivergence(format!(
                    "line search stalled at iteration {it}, residual {norm0:e}"
                )));
            }
        }
        Err(Error::NewtonDivergence(
            "no convergence in 60 iterations".into(),
        ))
    }

    fn full(&self, u: &[f64]) -> Vec<f64> {
        let (a, b) = self.sys.elimination.endpoint_values(u);
        let mut out = Vec::with_capacity(u.len() + 2);
        out.push(a);
        out.extend_from_slice(u);
        out.push(b);
        out
    }

    fn mesh(&self) -> Vec<f64> {
        (0..=self.n() + 1).map(|j| self.sys.grid.x(j)).collect()
    }

    /// Packages interior values as a certified solution.
    pub fn solution(&self, u: &[f64], lambda: f64, iterations: usize) -> BvpSolution {
        let full = self.full(u);
        let x = self.mesh();
        let curve = GridCurve::new(x.clone(), full.clone());
        let grid = self.sys.grid;
        let at = |eta: f64| {
            grid.interpolate(eta)
                .0
                .iter()
                .map(|&(j, w)| w * full[j])
                .sum::<f64>()
        };
        let minus = match self.problem.minus_multipoint() {
            Some(m) => m.apply(at),
            None => {
                let s = self.problem.separated().expect("separated");
                s.c0 * full[0] + s.c1 * curve.up[0]
            }
        };
        let plus = self.problem.plus().apply(at);
        let (nodal_class, not_nodal) = match classify(&curve) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e)),
        };
        BvpSolution {
            lambda,
            residual_inf: self.residual_norm(u, lambda),
            boundary_residuals: [minus, plus],
            nodal_class,
            not_nodal,
            newton_iterations: iterations,
            up: curve.up,
            u: full,
            x,
        }
    }
}

/// Linear coefficient `lim f(x, ξ)/ξ` or `r g(x, ξ)` as `|ξ| → ∞`, taken at `±U_LIMIT`.
fn limit_coefficient(c: &Coefficient, divide: bool) -> (Coefficient, Vec<String>) {
    let s = if divide { 1.0 / U_LIMIT } else { 1.0 };
    let plus = c.freeze_u(U_LIMIT).times(&Coefficient::constant(s));
    let minus = c.freeze_u(-U_LIMIT).times(&Coefficient::constant(-s));
    let mut warnings = Vec::new();
    let differs = crate::numeric::linspace(-1.0, 1.0, 41).iter().any(|&x| {
        let (a, b) = (
            plus.value(x),
            if divide {
                minus.value(x)
            } else {
                -minus.value(x)
            },
        );
        (a - b).abs() > 1e-6 * a.abs().max(b.abs()).max(1.0)
    });
    if differs {
        warnings
            .push("limits at +infinity and -infinity differ; the +infinity limit is used".into());
    }
    (plus, warnings)
}

/// Nonresonance check for the fixed problem.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    /// `r_∞` is positive on `[-1, 1]`.
    pub r_inf_positive: bool,
    pub r_inf_min: f64,
    /// `λ_k(r_∞)` for the scanned `k`.
    pub lambdas_inf: Vec<f64>,
    /// Indices with `λ_k(r_∞) = 1` to relative `1e-6`.
    pub resonant: Vec<usize>,
    pub holds: bool,
}

/// Result of [`solve_fixed`].
#[derive(Clone, Debug, Serialize)]
pub struct FixedReport {
    pub solution: BvpSolution,
    pub hypothesis: HypothesisReport,
    pub warnings: Vec<String>,
}

/// Checks `λ_k(r_∞) ≠ 1` for `k` up to the first index beyond 1 (at most [`K_CHECK`]).
pub fn nonresonance(problem: &Problem, f: &Coefficient) -> Result<(HypothesisReport, Vec<String>)> {
    let (r_inf, mut warnings) = limit_coefficient(f, true);
    let r_inf_min = crate::numeric::linspace(-1.0, 1.0, 2001)
        .iter()
        .map(|&x| r_inf.value(x))
        .fold(f64::INFINITY, f64::min);
    let mut lambdas = Vec::new();
    if r_inf_min > 0.0 {
        let lin = problem.with_r(r_inf);
        let mut k = 4;
        loop {
            let res = compute_spectrum(&lin, k, &SpectrumOptions::default())?;
            lambdas = res.lambdas();
            if lambdas.last().is_some_and(|&l| l > 1.0) || k >= K_CHECK {
                break;
            }
            k = (2 * k).min(K_CHECK);
        }
        if let Some(first) = lambdas.iter().position(|&l| l > 1.0 + 1e-6) {
            lambdas.truncate(first + 1);
        }
    } else {
        warnings.push(format!(
            "r_inf is not positive (min {r_inf_min}); the nonresonance hypothesis does not apply"
        ));
    }
    let resonant: Vec<usize> = lambdas
        .iter()
        .enumerate()
        .filter(|(_, l)| (*l - 1.0).abs() <= 1e-6)
        .map(|(i, _)| i + 1)
        .collect();
    for k in &resonant {
        warnings.push(format!("resonance: lambda_{k}(r_inf) = 1"));
    }
    Ok((
        HypothesisReport {
            r_inf_positive: r_inf_min > 0.0,
            r_inf_min,
            holds: r_inf_min > 0.0 && resonant.is_empty(),
            lambdas_inf: lambdas,
            resonant,
        },
        warnings,
    ))
}

/// Solves `-u'' = f(x, u)` with the multi-point conditions by damped Newton.
/// `guess` holds interior values on the collocation mesh (zero if absent).
pub fn solve_fixed(
    problem: &Problem,
    f: &Coefficient,
    guess: Option<&[f64]>,
) -> Result<FixedReport> {
    let (a, b) = problem.alpha_norms();
    if a >= 1.0 || b >= 1.0 {
        return Err(Error::Precondition(format!(
            "|alpha| must be below 1, got ({a}, {b})"
        )));
    }
    let (hypothesis, warnings) = nonresonance(problem, f)?;
    let col = Collocation::new(problem, Nonlinearity::Fixed { f })?;
    let zero = vec![0.0; col.n()];
    let guess = guess.unwrap_or(&zero);
    if guess.len() != col.n() {
        return Err(Error::Invalid(format!(
            "guess has {} values, expected {}",
            guess.len(),
            col.n()
        )));
    }
    let (u, its) = col.newton(guess, 1.0)?;
    Ok(FixedReport {
        solution: col.solution(&u, 1.0, its),
        hypothesis,
        warnings,
    })
}

/// `(λ_k⁰ - 1)(λ_k^∞ - 1) < 0` test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossingReport {
    pub k: usize,
    pub lambda_k_0: f64,
    pub lambda_k_inf: f64,
    pub crosses: bool,
    pub warnings: Vec<String>,
}

fn nonlinear_factor(problem: &Problem) -> Result<Coefficient> {
    let g = problem
        .g
        .as_ref()
        .ok_or_else(|| Error::MissingField("g".into()))?;
    Ok(problem.r.times(g))
}

/// Eigenvalues of the linearizations at `u = 0` and `|u| → ∞`.
pub fn crossing_check(problem: &Problem, k: usize) -> Result<CrossingReport> {
    let rg = nonlinear_factor(problem)?;
    let opts = SpectrumOptions::default();
    let l0 = eigenpair(&problem.with_r(rg.freeze_u(0.0)), k, &opts)?.lambda;
    let (r_inf, warnings) = limit_coefficient(&rg, false);
    let linf = eigenpair(&problem.with_r(r_inf), k, &opts)?.lambda;
    Ok(CrossingReport {
        k,
        lambda_k_0: l0,
        lambda_k_inf: linf,
        crosses: (l0 - 1.0) * (linf - 1.0) < 0.0,
        warnings,
    })
}

/// Why branch tracing stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchStatus {
    ReachedTarget,
    LeftWindow,
    StepFailure,
    AmplitudeLimit,
    MaxPoints,
}

/// One accepted branch point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchPoint {
    pub lambda: f64,
    pub sup_norm: f64,
    /// Interior values on the collocation mesh.
    #[serde(skip)]
    pub u: Vec<f64>,
}

/// Options for [`branch_continue`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchOptions {
    pub window: (f64, f64),
    pub target_lambda: Option<f64>,
    pub max_amplitude: f64,
    pub max_points: usize,
}

impl Default for BranchOptions {
    fn default() -> Self {
        BranchOptions {
            window: (0.0, f64::INFINITY),
            target_lambda: Some(1.0),
            max_amplitude: 1e4,
            max_points: 5000,
        }
    }
}

/// A traced branch of nontrivial solutions.
#[derive(Clone, Debug, Serialize)]
pub struct Branch {
    pub k: usize,
    pub nu: Nu,
    /// `λ_k⁰` from shooting.
    pub origin: f64,
    /// The same eigenvalue of the collocation system.
    pub discrete_origin: f64,
    /// `Λ(k)`, an upper bound for `λ` along the branch.
    pub lambda_bound: f64,
    /// `γ_{g,Λ(k)}` and whether both `|α±|` lie below it.
    pub gamma: f64,
    pub certified_regime: bool,
    pub points: Vec<BranchPoint>,
    pub status: BranchStatus,
    /// Solution at the target `λ`, if reached.
    #[serde(skip)]
    pub target_solution: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl Branch {
    /// CSV with columns `lambda,sup_norm,k,nu`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,sup_norm,k,nu\n");
        let nu = match self.nu {
            Nu::Plus => "plus",
            Nu::Minus => "minus",
        };
        for p in &self.points {
            let _ = writeln!(s, "{},{},{},{nu}", p.lambda, p.sup_norm, self.k);
        }
        s
    }

    /// `λ` at zero amplitude: the polynomial in `a²` through the first three
    /// points (amplitude `a`), evaluated at `a = 0`.
    pub fn extrapolate_origin(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .take(3)
            .map(|p| (p.sup_norm * p.sup_norm, p.lambda))
            .collect();
        match pts.len() {
            0 => None,
            1 => Some(pts[0].1),
            _ => Some(
                pts.iter()
                    .enumerate()
                    .map(|(i, &(si, li))| {
                        let w: f64 = pts
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| *j != i)
                            .map(|(_, &(sj, _))| sj / (sj - si))
                            .product();
                        w * li
                    })
                    .sum(),
            ),
        }
    }

    pub fn max_lambda(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.lambda)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Eigenpair of the collocation pencil nearest `sigma` by inverse iteration.
fn discrete_eigenpair(col: &Collocation, rg0: &[f64], sigma: f64) -> Result<(f64, Vec<f64>)> {
    let n = col.n();
    let shift = sigma * (1.0 - 1e-9);
    let d: Vec<f64> = rg0.iter().map(|r| shift * r).collect();
    let solver = col.sys.factor(&d)?;
    let mut v: Vec<f64> = (0..n).map(|j| 1.0 + 0.5 * (1.7 * j as f64).sin()).collect();
    let mut lambda = sigma;
    for _ in 0..100 {
        let bv: Vec<f64> = v.iter().zip(rg0).map(|(a, r)| a * r).collect();
        let w = solver.solve(&bv);
        let mu = w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>()
            / v.iter().map(|a| a * a).sum::<f64>();
        let next = shift + 1.0 / mu;
        let norm = w.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        v = w.iter().map(|a| a / norm).collect();
        let done = (next - lambda).abs() <= 1e-14 * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    Ok((lambda, v))
}

/// Traces the branch of solutions in `T_k^ν` from `(λ_k⁰, 0)` by
/// pseudo-arclength continuation in the scaled `(u, λ)` metric.
pub fn branch_continue(
    problem: &Problem,
    k: usize,
    nu: Nu,
    opts: &BranchOptions,
) -> Result<Branch> {
    let rg = nonlinear_factor(problem)?;
    let rg0 = rg.freeze_u(0.0);
    let mut warnings = Vec::new();
    let origin = eigenpair(&problem.with_r(rg0.clone()), k, &SpectrumOptions::default())?.lambda;
    let g_min = nonlinear_constants(&rg, 0.0, k)?.g_min;
    let lambda_bound = lambda_of_k(g_min, k);
    let gamma = nonlinear_constants(&rg, lambda_bound, k)?.gamma;
    let (a, b) = problem.alpha_norms();
    let certified_regime = a < gamma && b < gamma;
    if !certified_regime {
        warnings.push(format!(
            "outside certified regime: |alpha| = ({a}, {b}) not below gamma = {gamma:e}"
        ));
    }
    let col = Collocation::new(problem, Nonlinearity::Eigen { rg: &rg })?;
    let n = col.n();
    let rg0_nodes = col.sys.sample(&rg0);
    let (discrete_origin, mut phi) = discrete_eigenpair(&col, &rg0_nodes, origin)?;
    let full = col.full(&phi);
    if (full[1] - full[0]) * nu.sign() < 0.0 {
        phi.iter_mut().for_each(|v| *v = -*v);
    }
    let scale_l = origin;
    let dot = |u1: &[f64], l1: f64, u2: &[f64], l2: f64| {
        u1.iter().zip(u2).map(|(a, b)| a * b).sum::<f64>() / n as f64
            + l1 * l2 / (scale_l * scale_l)
    };
    let normalize = |u: &mut Vec<f64>, l: &mut f64| {
        let s = dot(u, *l, u, *l).sqrt();
        u.iter_mut().for_each(|v| *v /= s);
        *l /= s;
    };
    let mut branch = Branch {
        k,
        nu,
        origin,
        discrete_origin,
        lambda_bound,
        gamma,
        certified_regime,
        points: Vec::new(),
        status: BranchStatus::StepFailure,
        target_solution: None,
        warnings,
    };

    // Bordered Newton for F(u, λ) = 0 with ⟨τ, (u, λ) - (u_p, λ_p)⟩ = 0.
    let correct = |tu: &[f64], tl: f64, up: &[f64], lp: f64| -> Result<(Vec<f64>, f64, usize)> {
        let (mut u, mut l) = (up.to_vec(), lp);
        for it in 0..15 {
            let (f, d, fl) = col.eval(&u, l);
            let solver = col.sys.factor(&d)?;
            let av = solver.solve(&fl);
            let bv: Vec<f64> = solver.solve(&f).iter().map(|v| -v).collect();
            let du0: Vec<f64> = u.iter().zip(up).map(|(a, b)| a - b).collect();
            let c = dot(tu, tl, &du0, l - lp);
            let denom = tl / (scale_l * scale_l)
                - tu.iter().zip(&av).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            let dl = (-c - tu.iter().zip(&bv).map(|(a, b)| a * b).sum::<f64>() / n as f64) / denom;
            if !dl.is_finite() {
                break;
            }
            let mut step = 0.0f64;
            for i in 0..n {
                let di = bv[i] - dl * av[i];
                u[i] += di;
                step = step.max(di.abs());
            }
            l += dl;
            let size = 1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if step <= NEWTON_TOL * size && dl.abs() <= NEWTON_TOL * l.abs().max(1.0) {
                return Ok((u, l, it + 1));
            }
        }
        Err(Error::NewtonDivergence("arclength corrector".into()))
    };
    let tangent = |u: &[f64], l: f64, tu: &[f64], tl: f64| -> Result<(Vec<f64>, f64)> {
        let (_, d, fl) = col.eval(u, l);
        let av = col.sys.factor(&d)?.solve(&fl);
        let denom = tl / (scale_l * scale_l)
            - tu.iter().zip(&av).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        let nl = 1.0 / denom;
        let mut nu_: Vec<f64> = av.iter().map(|a| -nl * a).collect();
        let mut nl = nl;
        normalize(&mut nu_, &mut nl);
        Ok((nu_, nl))
    };
    let check_class = |u: &[f64], l: f64, step: usize| -> Result<()> {
        let sol = col.solution(u, l, 0);
        match sol.nodal_class {
            Some(c) if c.k == k && c.nu == nu => Ok(()),
            other => Err(Error::NodalClassChanged {
                step,
                t: l,
                detail: match other {
                    Some(c) => format!("expected T_{k}{nu} at lambda = {l}, found {c}"),
                    None => format!(
                        "not nodal at lambda = {l}: {}",
                        sol.not_nodal.map(|e| e.to_string()).unwrap_or_default()
                    ),
                },
            }),
        }
    };

    // First point: amplitude ε along the discrete eigenvector.
    let eps = START_AMPLITUDE;
    let u_start: Vec<f64> = phi.iter().map(|v| eps * v).collect();
    let (mut tu, mut tl) = (phi.clone(), 0.0);
    normalize(&mut tu, &mut tl);
    let (mut u, mut l, _) = correct(&tu, tl, &u_start, discrete_origin)?;
    check_class(&u, l, 0)?;
    let sup = |u: &[f64]| u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    branch.points.push(BranchPoint {
        lambda: l,
        sup_norm: sup(&col.full(&u)),
        u: u.clone(),
    });
    let (nt, ntl) = tangent(&u, l, &tu, tl)?;
    tu = nt;
    tl = ntl;
    let mut s = STEP_INITIAL;
    loop {
        if branch.points.len() >= opts.max_points {
            branch.status = BranchStatus::MaxPoints;
            break;
        }
        let up: Vec<f64> = u.iter().zip(&tu).map(|(a, b)| a + s * b).collect();
        let lp = l + s * tl;
        let attempt = correct(&tu, tl, &up, lp);
        let (un, ln, its) = match attempt {
            Ok(v) => v,
            Err(_) => {
                s *= 0.5;
                if s < STEP_MIN {
                    branch.status = BranchStatus::StepFailure;
                    break;
                }
                continue;
            }
        };
        check_class(&un, ln, branch.points.len())?;
        let amp = sup(&col.full(&un));
        // Target crossing between the previous point and this one.
        if let Some(target) = opts.target_lambda {
            if (l - target) * (ln - target) <= 0.0 && ln != l {
                let w = (target - l) / (ln - l);
                let guess: Vec<f64> = u.iter().zip(&un).map(|(a, b)| a + w * (b - a)).collect();
                let (ut, its) = col.newton(&guess, target)?;
                check_class(&ut, target, branch.points.len())?;
                branch.points.push(BranchPoint {
                    lambda: ln,
                    sup_norm: amp,
                    u: un,
                });
                let _ = its;
                branch.points.push(BranchPoint {
                    lambda: target,
                    sup_norm: sup(&col.full(&ut)),
                    u: ut.clone(),
                });
                branch.target_solution = Some(ut);
                branch.status = BranchStatus::ReachedTarget;
                break;
            }
        }
        let (nt, ntl) = tangent(&un, ln, &tu, tl)?;
        u = un;
        l = ln;
        tu = nt;
        tl = ntl;
        branch.points.push(BranchPoint {
            lambda: l,
            sup_norm: amp,
            u: u.clone(),
        });
        if !(opts.window.0..=opts.window.1).contains(&l) {
            branch.status = BranchStatus::LeftWindow;
            break;
        }
        if amp > opts.max_amplitude {
            branch.status = BranchStatus::AmplitudeLimit;
            break;
        }
        if its <= 3 {
            s = (2.0 * s).min(STEP_MAX);
        } else if its > 6 {
            s = (0.5 * s).max(STEP_MIN);
        }
    }
    if branch.max_lambda() > lambda_bound {
        branch.warnings.push(format!(
            "branch lambda {} exceeds Lambda(k) = {lambda_bound}",
            branch.max_lambda()
        ));
    }
    Ok(branch)
}

/// Result of [`find_nodal_solution`].
#[derive(Clone, Debug, Serialize)]
pub struct NodalSolveReport {
    pub crossing: CrossingReport,
    pub branch: Branch,
    pub solution: BvpSolution,
}

/// A solution of `-u'' = r g(x, u) u` in `T_k^ν`, reached along the branch
/// from `λ_k⁰` and polished at `λ = 1`.
pub fn find_nodal_solution(problem: &Problem, k: usize, nu: Nu) -> Result<NodalSolveReport> {
    let crossing = crossing_check(problem, k)?;
    if !crossing.crosses {
        return Err(Error::Precondition(format!(
            "no crossing for k = {k}: lambda_k_0 = {}, lambda_k_inf = {}",
            crossing.lambda_k_0, crossing.lambda_k_inf
        )));
    }
    let branch = branch_continue(problem, k, nu, &BranchOptions::default())?;
    let Some(u) = branch.target_solution.clone() else {
        return Err(Error::NoConvergence(format!(
            "branch stopped with status {:?} after {} points at lambda = {}",
            branch.status,
            branch.points.len(),
            branch.points.last().map_or(f64::NAN, |p| p.lambda)
        )));
    };
    let rg = nonlinear_factor(problem)?;
    let col = Collocation::new(problem, Nonlinearity::Eigen { rg: &rg })?;
    let (u, its) = col.newton(&u, 1.0)?;
    let solution = col.solution(&u, 1.0, its);
    match &solution.nodal_class {
        Some(c) if c.k == k && c.nu == nu => {}
        other => {
            return Err(Error::NodalClassChanged {
                step: branch.points.len(),
                t: 1.0,
                detail: format!("final solution classified as {other:?}"),
            })
        }
    }
    Ok(NodalSolveReport {
        crossing,
        branch,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{parse_problem, CoefficientSpec};

    fn g_problem(g: &str) -> Problem {
        parse_problem(&format!(
            r#"{{"r": "1", "bc_minus": {{"alphas": [0], "etas": [0]}}, "bc_plus": {{"alphas": [0], "etas": [0]}}, "g": "{g}"}}"#
        ))
        .unwrap()
    }

    #[test]
    fn linear_fixed_closed_form() {
        let p = Problem::dirichlet(CoefficientSpec::expression("1")).unwrap();
        let f = Coefficient::compile(&CoefficientSpec::expression("2*u + 1"), true).unwrap();
        let rep = solve_fixed(&p, &f, None).unwrap();
        assert!(rep.hypothesis.holds);
        let s2 = 2f64.sqrt();
        let sol = &rep.solution;
        let err = sol
            .x
            .iter()
            .zip(&sol.u)
            .map(|(x, u)| ((s2 * x).cos() / (2.0 * s2.cos()) - 0.5 - u).abs())
            .fold(0.0, f64::max);
        // Second-order mesh error on 1024 intervals.
        assert!(err < 1e-5, "{err}");
        assert!(sol.residual_inf < 1e-8);
    }

    #[test]
    fn resonant_limit_warns() {
        let p = Problem::dirichlet(CoefficientSpec::expression("1")).unwrap();
        let f = Coefficient::compile(&CoefficientSpec::expression("(pi/2)^2*u"), true).unwrap();
        let (h, w) = nonresonance(&p, &f).unwrap();
        assert_eq!(h.resonant, vec![1]);
        assert!(!h.holds && !w.is_empty());
    }

    #[test]
    fn crossing_examples() {
        let p = g_problem("(1+15*u^2)/(1+u^2)");
        let c1 = crossing_check(&p, 1).unwrap();
        assert!(c1.crosses);
        assert!((c1.lambda_k_0 - 2.4674011).abs() < 1e-6);
        assert!((c1.lambda_k_inf - 2.4674011 / 15.0).abs() < 1e-6);
        assert!(!crossing_check(&p, 3).unwrap().crosses);
        assert!(!crossing_check(&g_problem("1"), 1).unwrap().crosses);
    }

    #[test]
    fn linear_branch_is_vertical() {
        let p = g_problem("1");
        let opts = BranchOptions {
            target_lambda: None,
            max_amplitude: 5.0,
            ..BranchOptions::default()
        };
        let b = branch_continue(&p, 1, Nu::Plus, &opts).unwrap();
        assert_eq!(b.status, BranchStatus::AmplitudeLimit);
        for pt in &b.points {
            assert!((pt.lambda - b.discrete_origin).abs() < 1e-8 * b.discrete_origin);
        }
    }

    #[test]
    fn nodal_solution_via_crossing() {
        let p = g_problem("(1+15*u^2)/(1+u^2)");
        let rep = find_nodal_solution(&p, 1, Nu::Plus).unwrap();
        let b = &rep.branch;
        assert_eq!(b.status, BranchStatus::ReachedTarget);
        assert!(
            rep.solution.residual_inf < 1e-8,
            "{}",
            rep.solution.residual_inf
        );
        assert!(b.max_lambda() < b.lambda_bound);
        let l0 = b.extrapolate_origin().unwrap();
        assert!(
            (l0 - b.origin).abs() < 1e-4 * b.origin,
            "{l0} vs {}",
            b.origin
        );
        let minus = find_nodal_solution(&p, 1, Nu::Minus).unwrap();
        for (a, b) in rep.solution.u.iter().zip(&minus.solution.u) {
            assert!((a + b).abs() < 1e-6);
        }
        assert!(find_nodal_solution(&p, 3, Nu::Plus).is_err());
        eprintln!("points {} sup {}", b.points.len(), rep.solution.sup_norm());
    }

    #[test]
    fn branch_approaches_limit_eigenvalue() {
        let p = g_problem("(1+15*u^2)/(1+u^2)");
        let opts = BranchOptions {
            target_lambda: None,
            max_amplitude: 60.0,
            ..BranchOptions::default()
        };
        let b = branch_continue(&p, 1, Nu::Plus, &opts).unwrap();
        assert_eq!(b.status, BranchStatus::AmplitudeLimit);
        let last = b.points.last().unwrap();
        let linf = b.origin / 15.0;
        eprintln!(
            "{} points, last {} {}",
            b.points.len(),
            last.lambda,
            last.sup_norm
        );
        assert!(last.sup_norm >= 50.0);
        assert!(
            (last.lambda - linf).abs() < 5e-2 * linf,
            "{} vs {linf}",
            last.lambda
        );
    }

    #[test]
    fn grid_curve_classifies_cosine() {
        let x = crate::numeric::linspace(-1.0, 1.0, 1025);
        let u: Vec<f64> = x.iter().map(|x| (std::f64::consts::PI * x).sin()).collect();
        let c = GridCurve::new(x, u);
        let cl = classify(&c).unwrap();
        assert_eq!((cl.k, cl.nu), (2, Nu::Minus));
    }
}
