//! Eigenvalues by homotopy continuation in the boundary weights, starting
//! from the separated Dirichlet problem, with a determinant-scan fallback.

use crate::characteristic::{
    boundary_matrix, characteristic_determinant, evaluate_on, problem_stops, theta_of,
    JacobianValue, DEGENERACY_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::ivp::{
    integrate_from_left, integrate_system, integrate_variational, Family, Solution, State,
    VariationalTrajectory, DEFAULT_TOL,
};
use crate::nodal::{classify, DenseCurve, NodalClass, NotNodal, Nu};
use crate::numeric::{brent, golden_max, linspace};
use crate::problem::{Coefficient, MinusCondition, Problem, SeparatedCondition};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

/// Knobs shared by the spectral routines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumOptions {
    pub tol: f64,
    /// Points in a determinant scan.
    pub scan_grid: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            tol: DEFAULT_TOL,
            scan_grid: 400,
        }
    }
}

/// Initial homotopy step in `t`.
pub const INITIAL_STEP: f64 = 0.1;
/// Smallest homotopy step before the continuation gives up.
pub const MIN_STEP: f64 = 1e-4;

/// Angle `φ` with `tan φ = u / u'` at `x = 0` and `x = 1` for the solution
/// started from `-1` at angle `phi_start`.
fn prufer(
    r: &Coefficient,
    lambda: f64,
    phi_start: f64,
    tol: f64,
    stops: &[f64],
) -> Result<(f64, f64)> {
    let rhs = |x: f64, p: f64, y: &[f64; 1]| {
        let (s, c) = y[0].sin_cos();
        [c * c + lambda * r.eval_probe(x, p).0 * s * s]
    };
    let mut all = r.breakpoints();
    all.extend_from_slice(stops);
    all.push(0.0);
    let traj = integrate_system(&rhs, -1.0, [phi_start], -1.0, 1.0, &all, tol)?;
    Ok((traj.sample(0.0)?[0], traj.sample(1.0)?[0]))
}

/// Shooting from `-1` at a fixed Prüfer angle toward a condition at `+1`
/// expressed as a Prüfer angle mod π.
struct Shooter<'a> {
    r: &'a Coefficient,
    phi_start: f64,
    phi_end: f64,
    tol: f64,
}

impl Shooter<'_> {
    fn end_angle(&self, lambda: f64) -> Result<f64> {
        Ok(prufer(self.r, lambda, self.phi_start, self.tol, &[])?.1)
    }

    /// `k`-th eigenvalue (1-based) counted among targets strictly above the
    /// angle reached for vanishing λ.
    fn eigenvalue(&self, k: usize) -> Result<f64> {
        let base = self.end_angle(1e-9)?;
        let first = ((base - self.phi_end) / PI).floor() + 1.0;
        let target = self.phi_end + (first + (k as f64 - 1.0)) * PI;
        let f = |l: f64| self.end_angle(l).map(|a| a - target);
        let mut lo = 1e-9;
        let mut hi = 1.0;
        let mut f_hi = f(hi)?;
        let mut tries = 0;
        while f_hi <= 0.0 {
            lo = hi;
            hi *= 2.0;
            f_hi = f(hi)?;
            tries += 1;
            if tries > 80 {
                return Err(Error::Bracket { k });
            }
        }
        brent(f, lo, hi, 1e-15 * hi)
    }
}

/// A separated eigenpair used to start the continuation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Baseline {
    pub k: usize,
    pub lambda: f64,
    /// `(u(0), u'(0))` of the normalized eigenfunction with `u'(-1) > 0`.
    pub u0: f64,
    pub up0: f64,
    pub r0: f64,
}

impl Baseline {
    pub fn theta(&self, family: Family) -> f64 {
        theta_of(self.u0, self.up0, self.lambda, self.r0, family)
    }

    pub fn family(&self) -> Family {
        family_for(self.lambda)
    }
}

/// Energy family when `λ ≥ 1`, slope family otherwise.
pub fn family_for(lambda: f64) -> Family {
    if lambda >= 1.0 {
        Family::Energy
    } else {
        Family::Slope
    }
}

fn separated_baselines(
    r: &Coefficient,
    phi_start: f64,
    phi_end: f64,
    ks: impl IntoParallelIterator<Item = usize>,
    tol: f64,
) -> Result<Vec<Baseline>> {
    // The scalar angle equation is cheap, so it is always solved tightly.
    let tol = tol.min(1e-12);
    let sh = Shooter {
        r,
        phi_start,
        phi_end,
        tol,
    };
    let r0 = r.value(0.0);
    ks.into_par_iter()
        .map(|k| {
            let lambda = sh.eigenvalue(k)?;
            let (phi0, _) = prufer(r, lambda, phi_start, tol, &[])?;
            let (s, c) = phi0.sin_cos();
            Ok(Baseline {
                k,
                lambda,
                u0: s,
                up0: c,
                r0,
            })
        })
        .collect()
}

/// First `k_max` eigenpairs of `u(±1) = 0`, found by Prüfer-angle shooting
/// from `-1`; each eigenfunction is checked to lie in `T_k`.
pub fn dirichlet_spectrum(r: &Coefficient, k_max: usize, tol: f64) -> Result<Vec<Baseline>> {
    let out = separated_baselines(r, 0.0, 0.0, 1..=k_max, tol)?;
    for b in &out {
        let sol = crate::ivp::integrate(
            r,
            b.lambda,
            State::new(b.u0, b.up0),
            0.0,
            crate::ivp::Span::Both,
            tol,
            &[],
        )?;
        match classify(&sol) {
            Ok(c) if c.k == b.k && c.nu == Nu::Plus => {}
            other => {
                return Err(Error::NodalClassChanged {
                    step: 0,
                    t: 0.0,
                    detail: format!("baseline k = {} classified as {other:?}", b.k),
                })
            }
        }
    }
    Ok(out)
}

fn sep_angle(sep: &SeparatedCondition) -> f64 {
    let (u, up) = sep.initial_state();
    u.atan2(up).rem_euclid(PI)
}

/// Eigenvalues with `sep` at `-1` and `u'(1) = 0`.
///
/// For `c0 = 0` the constant mode `μ = 0` is excluded and indexing starts at
/// the first positive eigenvalue.
pub fn separated_reference_spectrum(
    r: &Coefficient,
    sep: &SeparatedCondition,
    k_max: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    sep.check()?;
    Ok(
        separated_baselines(r, sep_angle(sep), FRAC_PI_2, 1..=k_max, tol)?
            .into_iter()
            .map(|b| b.lambda)
            .collect(),
    )
}

/// How an eigenpair was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Continuation,
    Scan,
    Both,
}

/// Certificates attached to an eigenpair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificates {
    pub nodal_class: Option<NodalClass>,
    pub not_nodal: Option<NotNodal>,
    pub simple: bool,
    /// `|Γ⁻|`, `|Γ⁺|` relative to `max |w|`.
    pub residuals: [f64; 2],
    /// `λ ≤ ((k + 1) π / 2)² / r_min`, the Sturm comparison bound for `T_k`.
    pub lambda_bound_ok: bool,
}

/// One computed eigenvalue with its eigenfunction and certificates.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub k: usize,
    pub lambda: f64,
    pub theta: f64,
    pub family: Family,
    pub eigfun: Solution,
    pub jacobian: JacobianValue,
    pub certificates: Certificates,
    pub method: Method,
}

/// JSON view of an [`Eigenpair`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenpairSummary {
    pub k: usize,
    pub lambda: f64,
    pub theta: f64,
    pub family: Family,
    pub simple: bool,
    pub nodal_class: Option<String>,
    pub residuals: [f64; 2],
    pub jacobian_det: f64,
    pub jacobian_normalized: f64,
    pub method: Method,
}

impl Eigenpair {
    pub fn summary(&self) -> EigenpairSummary {
        EigenpairSummary {
            k: self.k,
            lambda: self.lambda,
            theta: self.theta,
            family: self.family,
            simple: self.certificates.simple,
            nodal_class: self
                .certificates
                .nodal_class
                .as_ref()
                .map(|c| c.to_string())
                .or_else(|| {
                    self.certificates
                        .not_nodal
                        .as_ref()
                        .map(|n| format!("not nodal ({:?})", n.reason))
                }),
            residuals: self.certificates.residuals,
            jacobian_det: self.jacobian.det,
            jacobian_normalized: self.jacobian.normalized,
            method: self.method,
        }
    }

    /// The eigenfunction as CSV (`x,u,up`).
    pub fn eigenfunction_csv(&self) -> String {
        self.eigfun.to_csv()
    }
}

fn r_min(r: &Coefficient) -> f64 {
    linspace(-1.0, 1.0, 2001)
        .iter()
        .map(|&x| r.value(x))
        .fold(f64::INFINITY, f64::min)
}

/// Assembles the eigenpair at `(λ, θ)` with the eigenfunction normalized into
/// `T_k⁺` when it is nodal.
fn build_pair(
    problem: &Problem,
    k_hint: usize,
    lambda: f64,
    theta: f64,
    family: Family,
    tol: f64,
    method: Method,
) -> Result<Eigenpair> {
    let stops = problem_stops(problem);
    let mut theta = theta;
    let mut v = integrate_variational(&problem.r, lambda, theta, family, tol, &stops)?;
    let mut sol = v.solution();
    let mut class = classify(&sol);
    let flip = match &class {
        Ok(c) => c.nu == Nu::Minus,
        Err(_) => sol.u_up(-1.0).1 < 0.0,
    };
    if flip {
        theta += PI;
        v = integrate_variational(&problem.r, lambda, theta, family, tol, &stops)?;
        sol = v.solution();
        class = classify(&sol);
    }
    let theta = theta.rem_euclid(2.0 * PI);
    let cp = evaluate_on(problem, &v)?;
    let scale = cp.scale.max(1e-300);
    let k = class.as_ref().map_or(k_hint, |c| c.k);
    let bound = ((k as f64 + 1.0) * FRAC_PI_2).powi(2) / r_min(&problem.r);
    let (nodal_class, not_nodal) = match class {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e)),
    };
    Ok(Eigenpair {
        k,
        lambda,
        theta,
        family,
        eigfun: sol,
        jacobian: cp.jacobian,
        certificates: Certificates {
            nodal_class,
            not_nodal,
            simple: cp.jacobian.normalized >= DEGENERACY_THRESHOLD,
            residuals: [cp.minus.value.abs() / scale, cp.plus.value.abs() / scale],
            lambda_bound_ok: lambda <= bound * 1.01,
        },
        method,
    })
}

/// Solves `J d = -F` for 2×2 systems, falling back to least squares when
/// `J` is numerically singular.
fn newton_step(j: &JacobianValue, f: [f64; 2]) -> (f64, f64) {
    let [[a, b], [c, d]] = j.entries;
    if j.normalized > 1e-12 {
        let det = j.det;
        (
            (-(d * f[0] - b * f[1])) / det,
            (-(-c * f[0] + a * f[1])) / det,
        )
    } else {
        let m = nalgebra::Matrix2::new(a, b, c, d);
        let rhs = nalgebra::Vector2::new(-f[0], -f[1]);
        let svd = m.svd(true, true);
        let x = svd
            .solve(&rhs, 1e-12 * m.norm().max(1e-300))
            .unwrap_or_else(|_| nalgebra::Vector2::zeros());
        (x[0], x[1])
    }
}

/// Weighted sums `Σ αᵢ w(ηᵢ)` on both sides (the negated `t`-derivative of Γ±).
fn alpha_sums(problem: &Problem, v: &VariationalTrajectory) -> Result<[f64; 2]> {
    let mut out = [0.0; 2];
    if let Some(m) = problem.minus_multipoint() {
        for (a, e) in m.alphas.iter().zip(&m.etas) {
            out[0] += a * v.sample(*e)?.w;
        }
    }
    let p = problem.plus();
    for (a, e) in p.alphas.iter().zip(&p.etas) {
        out[1] += a * v.sample(*e)?.w;
    }
    Ok(out)
}

struct Corrected {
    lambda: f64,
    theta: f64,
    v: VariationalTrajectory,
}

/// Newton iteration on `(Γ⁻, Γ⁺) = 0` in `(λ, θ)`.
fn correct(
    problem: &Problem,
    lambda: f64,
    theta: f64,
    family: Family,
    tol: f64,
) -> Result<Corrected> {
    let stops = problem_stops(problem);
    let (mut l, mut th) = (lambda, theta);
    let mut last_res = f64::INFINITY;
    for _ in 0..12 {
        if !(l > 0.0) && family == Family::Energy {
            return Err(Error::NewtonDivergence(format!("lambda left (0, ∞): {l}")));
        }
        let v = integrate_variational(&problem.r, l, th, family, tol, &stops)?;
        let cp = evaluate_on(problem, &v)?;
        let res = cp.minus.value.abs().max(cp.plus.value.abs()) / cp.scale.max(1e-300);
        let (dl, dth) = newton_step(&cp.jacobian, [cp.minus.value, cp.plus.value]);
        if res < 1e-12 || (res < 1e-8 && dl.abs() <= 1e-13 * l.abs().max(1.0) && dth.abs() <= 1e-13)
        {
            return Ok(Corrected {
                lambda: l,
                theta: th,
                v,
            });
        }
        if res > 10.0 * last_res && res > 1e-6 {
            break;
        }
        last_res = last_res.min(res);
        l += dl;
        th += dth;
        if !(l.is_finite() && th.is_finite()) {
            break;
        }
    }
    // Accept a stagnated iterate if it already satisfies the residual bound.
    let v = integrate_variational(&problem.r, l, th, family, tol, &stops)?;
    let cp = evaluate_on(problem, &v)?;
    let res = cp.minus.value.abs().max(cp.plus.value.abs()) / cp.scale.max(1e-300);
    if res < 1e-9 {
        return Ok(Corrected {
            lambda: l,
            theta: th,
            v,
        });
    }
    Err(Error::NewtonDivergence(format!(
        "residual {res:e} at lambda = {l}, theta = {th}"
    )))
}

/// Tracks the `k`-th eigenpair along `t ↦ t·α` from the Dirichlet baseline.
pub fn continue_eigenpair(
    problem: &Problem,
    baseline: &Baseline,
    opts: &SpectrumOptions,
) -> Result<Eigenpair> {
    if problem.separated().is_some() {
        return continue_half_separated(problem, baseline.k, opts);
    }
    let k = baseline.k;
    let family = baseline.family();
    let tol = opts.tol;
    let (na, nb) = problem.alpha_norms();
    if na == 0.0 && nb == 0.0 {
        return build_pair(
            problem,
            k,
            baseline.lambda,
            baseline.theta(family),
            family,
            tol,
            Method::Continuation,
        );
    }
    let stops = problem_stops(problem);
    let (mut l, mut th) = (baseline.lambda, baseline.theta(family));
    let mut t = 0.0;
    let mut dt = INITIAL_STEP;
    let mut step = 0;
    while t < 1.0 {
        let at_t = problem.with_scaled_alphas(t);
        let v = integrate_variational(&problem.r, l, th, family, tol, &stops)?;
        let cp = evaluate_on(&at_t, &v)?;
        let sums = alpha_sums(problem, &v)?;
        let (tl, tth) = newton_step(&cp.jacobian, [-sums[0], -sums[1]]);
        let t_new = (t + dt).min(1.0);
        let h = t_new - t;
        let target = problem.with_scaled_alphas(t_new);
        match correct(&target, l + h * tl, th + h * tth, family, tol) {
            Ok(c) => {
                step += 1;
                let cp = evaluate_on(&target, &c.v)?;
                if t_new < 1.0 && cp.jacobian.normalized < DEGENERACY_THRESHOLD {
                    return Err(Error::DegenerateJacobian {
                        t: t_new,
                        lambda: c.lambda,
                        theta: c.theta,
                    });
                }
                let sol = c.v.solution();
                match classify(&sol) {
                    Ok(cl) if cl.k == k => {}
                    other if t_new < 1.0 || other.is_ok() => {
                        return Err(Error::NodalClassChanged {
                            step,
                            t: t_new,
                            detail: match other {
                                Ok(cl) => format!("expected T_{k}, found {cl}"),
                                Err(e) => e.to_string(),
                            },
                        })
                    }
                    // At t = 1 a non-nodal eigenfunction is reported through the certificates.
                    _ => {}
                }
                l = c.lambda;
                th = c.theta;
                t = t_new;
                dt = (dt * 2.0).min(INITIAL_STEP);
            }
            Err(e) => {
                dt *= 0.5;
                if dt < MIN_STEP {
                    return Err(match e {
                        Error::NewtonDivergence(m) => {
                            Error::NewtonDivergence(format!("at t = {t}: {m}"))
                        }
                        other => other,
                    });
                }
            }
        }
    }
    build_pair(problem, k, l, th, family, tol, Method::Continuation)
}

/// Left-shot solution `[u, u', u_λ, u_λ']` for a separated condition at `-1`.
fn shoot_left(
    problem: &Problem,
    sep: &SeparatedCondition,
    lambda: f64,
    tol: f64,
) -> Result<crate::ivp::Trajectory<4>> {
    let (u, up) = sep.initial_state();
    integrate_from_left(
        &problem.r,
        lambda,
        State::new(u, up),
        tol,
        &problem_stops(problem),
    )
}

fn half_separated_residual(
    problem: &Problem,
    traj: &crate::ivp::Trajectory<4>,
    t: f64,
) -> Result<(f64, f64, f64)> {
    let p = problem.plus();
    let e = traj.sample(1.0)?;
    let (mut f, mut df) = (e[0], e[2]);
    let mut sum = 0.0;
    for (a, eta) in p.alphas.iter().zip(&p.etas) {
        let s = traj.sample(*eta)?;
        f -= t * a * s[0];
        df -= t * a * s[2];
        sum += a * s[0];
    }
    Ok((f, df, sum))
}

/// `k`-th eigenvalue of `c0 u(-1) + c1 u'(-1) = 0`, `u(1) = Σ αᵢ u(ηᵢ)` by
/// continuation of the single equation `u(1) - t Σ αᵢ u(ηᵢ) = 0` in `t`.
pub fn half_separated_eigenvalue(problem: &Problem, k: usize, tol: f64) -> Result<f64> {
    let sep = problem
        .separated()
        .ok_or_else(|| Error::Precondition("bc_minus must be a separated condition".into()))?;
    let base = separated_baselines(&problem.r, sep_angle(&sep), 0.0, [k], tol)?[0];
    let mut l = base.lambda;
    let mut t = 0.0;
    let mut dt = INITIAL_STEP;
    let newton = |l0: f64, t: f64| -> Result<f64> {
        let mut l = l0;
        for _ in 0..30 {
            let traj = shoot_left(problem, &sep, l, tol)?;
            let (f, df, _) = half_separated_residual(problem, &traj, t)?;
            let dl = -f / df;
            if !dl.is_finite() {
                break;
            }
            l += dl;
            if dl.abs() <= 1e-14 * l.abs().max(1.0) {
                return Ok(l);
            }
        }
        Err(Error::NewtonDivergence(format!(
            "single-equation newton at t = {t}"
        )))
    };
    if problem.plus().norm() == 0.0 {
        return Ok(l);
    }
    while t < 1.0 {
        let traj = shoot_left(problem, &sep, l, tol)?;
        let (_, df, sum) = half_separated_residual(problem, &traj, t)?;
        let t_new = (t + dt).min(1.0);
        let pred = l + (t_new - t) * sum / df;
        match newton(pred, t_new) {
            Ok(ln) if (ln - pred).abs() < 0.25 * (pred - l).abs().max(1e-3 * l) + 1e-12 => {
                l = ln;
                t = t_new;
                dt = (dt * 2.0).min(INITIAL_STEP);
            }
            _ => {
                dt *= 0.5;
                if dt < MIN_STEP {
                    return Err(Error::NewtonDivergence(format!(
                        "half-separated continuation stalled at t = {t}"
                    )));
                }
            }
        }
    }
    Ok(l)
}

fn continue_half_separated(
    problem: &Problem,
    k: usize,
    opts: &SpectrumOptions,
) -> Result<Eigenpair> {
    let sep = problem.separated().expect("checked by caller");
    let l = half_separated_eigenvalue(problem, k, opts.tol)?;
    let traj = shoot_left(problem, &sep, l, opts.tol)?;
    let s = traj.sample(0.0)?;
    let family = family_for(l);
    let theta = theta_of(s[0], s[1], l, problem.r.value(0.0), family);
    build_pair(problem, k, l, theta, family, opts.tol, Method::Continuation)
}

/// A root of `D(λ)` located by the scan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRoot {
    pub lambda: f64,
    pub bracket: (f64, f64),
    /// 1 for a sign change, 2 for a touching (even-order) root.
    pub multiplicity_hint: usize,
}

/// Roots of `D` in a window together with the sampled trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanResult {
    pub window: (f64, f64),
    pub roots: Vec<ScanRoot>,
    #[serde(skip)]
    pub samples: Vec<(f64, f64)>,
}

impl ScanResult {
    /// CSV of the sampled trace (`lambda,D`).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,D\n");
        for (l, d) in &self.samples {
            let _ = writeln!(s, "{l},{d}");
        }
        s
    }
}

/// Ratio `|D(λ_min)| / max(|D|)` at neighboring samples below which a local
/// minimum of `|D|` is reported as an even-order root.
pub const EVEN_ROOT_RATIO: f64 = 1e-6;

/// Scans `D(λ)` on `grid` points uniform in `√λ` (uniform in `λ` if the window
/// reaches below zero) and refines every root.
pub fn scan_determinant(
    problem: &Problem,
    lo: f64,
    hi: f64,
    grid: usize,
    tol: f64,
) -> Result<ScanResult> {
    if !(lo < hi) {
        return Err(Error::Invalid(format!("empty window [{lo}, {hi}]")));
    }
    let grid = grid.max(8);
    let lambdas: Vec<f64> = if lo >= 0.0 {
        linspace(lo.sqrt(), hi.sqrt(), grid)
            .into_iter()
            .map(|s| s * s)
            .collect()
    } else {
        linspace(lo, hi, grid)
    };
    let d = |l: f64| characteristic_determinant(problem, l, tol);
    let values: Vec<f64> = lambdas.par_iter().map(|&l| d(l)).collect::<Result<_>>()?;
    let mut roots = Vec::new();
    let refine = |a: f64, b: f64| brent(d, a, b, 1e-12 * a.abs().max(b.abs()).max(1e-6));
    for i in 0..grid - 1 {
        let (a, b) = (lambdas[i], lambdas[i + 1]);
        let (fa, fb) = (values[i], values[i + 1]);
        if fa == 0.0 {
            roots.push(ScanRoot {
                lambda: a,
                bracket: (a, a),
                multiplicity_hint: 1,
            });
            continue;
        }
        if fa.signum() != fb.signum() && fb != 0.0 {
            roots.push(ScanRoot {
                lambda: refine(a, b)?,
                bracket: (a, b),
                multiplicity_hint: 1,
            });
            continue;
        }
        if i == 0 {
            continue;
        }
        let (fp, pa) = (values[i - 1], lambdas[i - 1]);
        let same = fp.signum() == fa.signum() && fa.signum() == fb.signum();
        if same && fa.abs() < fp.abs() && fa.abs() < fb.abs() {
            let (lm, neg) = golden_max(
                |l| d(l).map_or(f64::NEG_INFINITY, |v| -v.abs()),
                pa,
                b,
                1e-13 * b,
            );
            let fm = d(lm)?;
            if fm.signum() != fa.signum() && fm != 0.0 {
                roots.push(ScanRoot {
                    lambda: refine(pa.max(lm.min(a)), lm)?,
                    bracket: (pa, lm),
                    multiplicity_hint: 1,
                });
                roots.push(ScanRoot {
                    lambda: refine(lm, b)?,
                    bracket: (lm, b),
                    multiplicity_hint: 1,
                });
            } else if -neg <= EVEN_ROOT_RATIO * fp.abs().max(fb.abs()) {
                roots.push(ScanRoot {
                    lambda: lm,
                    bracket: (pa, b),
                    multiplicity_hint: 2,
                });
            }
        }
    }
    roots.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    roots.dedup_by(|a, b| (a.lambda - b.lambda).abs() <= 1e-9 * b.lambda.abs().max(1.0));
    Ok(ScanResult {
        window: (lo, hi),
        roots,
        samples: lambdas.into_iter().zip(values).collect(),
    })
}

/// Ordered eigenpairs with their provenance.
#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub pairs: Vec<Eigenpair>,
    pub method: Method,
    pub warnings: Vec<String>,
}

impl SpectrumResult {
    pub fn lambdas(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    pub fn summaries(&self) -> Vec<EigenpairSummary> {
        self.pairs.iter().map(Eigenpair::summary).collect()
    }
}

/// Eigenpair at a root of `D`, with `θ` from the null vector of the boundary matrix.
pub fn pair_from_root(
    problem: &Problem,
    lambda: f64,
    k_hint: usize,
    tol: f64,
) -> Result<Eigenpair> {
    let bm = boundary_matrix(problem, lambda, tol)?;
    let (u0, up0) = bm.null_vector();
    let family = family_for(lambda);
    let theta = theta_of(u0, up0, lambda, problem.r.value(0.0), family);
    build_pair(problem, k_hint, lambda, theta, family, tol, Method::Scan)
}

/// First `k_max` eigenpairs: continuation for each index, determinant scan
/// for any index whose continuation fails.
pub fn compute_spectrum(
    problem: &Problem,
    k_max: usize,
    opts: &SpectrumOptions,
) -> Result<SpectrumResult> {
    let k_max = k_max.max(1);
    let baselines = match problem.separated() {
        Some(sep) => {
            separated_baselines(&problem.r, sep_angle(&sep), 0.0, 1..=k_max + 1, opts.tol)?
        }
        None => dirichlet_spectrum(&problem.r, k_max + 1, opts.tol)?,
    };
    let outcomes: Vec<Result<Eigenpair>> = baselines[..k_max]
        .par_iter()
        .map(|b| continue_eigenpair(problem, b, opts))
        .collect();
    let mut warnings = Vec::new();
    let mut pairs = Vec::new();
    let mut failed = Vec::new();
    for (b, o) in baselines.iter().zip(outcomes) {
        match o {
            Ok(p) => pairs.push(p),
            Err(e) => {
                warnings.push(format!("continuation failed for k = {}: {e}", b.k));
                failed.push(b.k);
            }
        }
    }
    let mut method = Method::Continuation;
    if !failed.is_empty() {
        method = if pairs.is_empty() {
            Method::Scan
        } else {
            Method::Both
        };
        let hi = 1.5
            * baselines[k_max]
                .lambda
                .max(pairs.iter().map(|p| p.lambda).fold(0.0, f64::max));
        let lo = 1e-4 * baselines[0].lambda;
        let grid = opts.scan_grid.max(60 * (k_max + 1));
        let scan = scan_determinant(problem, lo, hi, grid, opts.tol)?;
        for root in &scan.roots {
            let known = pairs
                .iter()
                .any(|p| (p.lambda - root.lambda).abs() <= 1e-6 * root.lambda.abs().max(1.0));
            if known {
                continue;
            }
            match pair_from_root(problem, root.lambda, 0, opts.tol) {
                Ok(p) => {
                    if root.multiplicity_hint > 1 {
                        warnings.push(format!(
                            "scan found an even-order root at lambda = {}",
                            root.lambda
                        ));
                    }
                    pairs.push(p)
                }
                Err(e) => warnings.push(format!(
                    "scan root {} could not be certified: {e}",
                    root.lambda
                )),
            }
        }
    }
    pairs.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    pairs.truncate(k_max);
    for (i, p) in pairs.iter_mut().enumerate() {
        if p.k == 0 {
            p.k = i + 1;
        }
    }
    for w in pairs.windows(2) {
        if w[1].lambda <= w[0].lambda * (1.0 + 1e-9) {
            warnings.push(format!(
                "eigenvalues k = {} and k = {} coincide at lambda = {}",
                w[0].k, w[1].k, w[1].lambda
            ));
        }
    }
    for p in &pairs {
        if !p.certificates.simple {
            warnings.push(format!(
                "eigenvalue k = {} at lambda = {} not certified simple (normalized det {:e})",
                p.k, p.lambda, p.jacobian.normalized
            ));
        }
        if let Some(nn) = &p.certificates.not_nodal {
            warnings.push(format!("eigenfunction k = {} is not nodal: {nn}", p.k));
        }
    }
    Ok(SpectrumResult {
        pairs,
        method,
        warnings,
    })
}

/// The `k`-th eigenpair alone: continuation from its own baseline, with the
/// full spectrum as fallback.
pub fn eigenpair(problem: &Problem, k: usize, opts: &SpectrumOptions) -> Result<Eigenpair> {
    if k == 0 {
        return Err(Error::Invalid("eigenvalue index starts at 1".into()));
    }
    let phi_start = problem.separated().map_or(0.0, |s| sep_angle(&s));
    let base = separated_baselines(&problem.r, phi_start, 0.0, [k], opts.tol)?[0];
    match continue_eigenpair(problem, &base, opts) {
        Ok(p) => Ok(p),
        Err(_) => compute_spectrum(problem, k, opts)?
            .pairs
            .into_iter()
            .nth(k - 1)
            .ok_or(Error::Bracket { k }),
    }
}

/// Interlacing of multi-point eigenvalues with a separated reference spectrum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterlacingReport {
    pub lambdas: Vec<f64>,
    /// `μ_1 … μ_{K+1}`.
    pub mus: Vec<f64>,
    pub holds: bool,
    pub violations: Vec<String>,
}

/// Checks `μ_k < λ_k < μ_{k+1}` for `k ≤ k_max` on a problem whose `-1`
/// condition is separated.
pub fn check_interlacing(problem: &Problem, k_max: usize, tol: f64) -> Result<InterlacingReport> {
    let sep = match &problem.spec.bc_minus {
        MinusCondition::Separated(s) => *s,
        MinusCondition::MultiPoint(_) => {
            return Err(Error::Precondition(
                "interlacing needs a separated condition at -1".into(),
            ))
        }
    };
    let mus = separated_reference_spectrum(&problem.r, &sep, k_max + 1, tol)?;
    let lambdas: Vec<f64> = (1..=k_max)
        .into_par_iter()
        .map(|k| half_separated_eigenvalue(problem, k, tol))
        .collect::<Result<_>>()?;
    let mut violations = Vec::new();
    for (i, &l) in lambdas.iter().enumerate() {
        if !(mus[i] < l && l < mus[i + 1]) {
            violations.push(format!(
                "k = {}: mu_k = {}, lambda_k = {}, mu_k+1 = {}",
                i + 1,
                mus[i],
                l,
                mus[i + 1]
            ));
        }
    }
    Ok(InterlacingReport {
        lambdas,
        mus,
        holds: violations.is_empty(),
        violations,
    })
}

/// Result of [`check_principal_positivity`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositivityReport {
    pub positive: bool,
    pub min_value: f64,
    /// Endpoints included in the check.
    pub closed_interval: bool,
}

/// Tests whether the `T₁⁺`-normalized principal eigenfunction is positive;
/// on the closed interval when both weight vectors are nonzero, otherwise on
/// the open interval.
pub fn check_principal_positivity(pair: &Eigenpair, problem: &Problem) -> Result<PositivityReport> {
    if pair.k != 1 {
        return Err(Error::Precondition(format!(
            "principal eigenpair expected, got k = {}",
            pair.k
        )));
    }
    let (a, b) = problem.alpha_norms();
    let closed = a > 0.0 && b > 0.0;
    let n = 4096;
    let mut min_value = f64::INFINITY;
    let mut max_abs = 0.0f64;
    for i in 0..=n {
        if !closed && (i == 0 || i == n) {
            continue;
        }
        let x = -1.0 + 2.0 * i as f64 / n as f64;
        let u = pair.eigfun.sample(x)?.u;
        min_value = min_value.min(u);
        max_abs = max_abs.max(u.abs());
    }
    Ok(PositivityReport {
        positive: min_value > 0.0,
        min_value: min_value / max_abs.max(1e-300),
        closed_interval: closed,
    })
}
