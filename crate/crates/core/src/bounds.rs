//! Explicit a-priori constants and numerical checks of the estimates they
//! enter.

use crate::error::{Error, Result};
use crate::ivp::{integrate_variational, Family, VariationalTrajectory};
use crate::numeric::{gauss5, grid_max, linspace};
use crate::problem::Coefficient;
use serde::Serialize;
use std::collections::BTreeMap;

/// Grid size for the extrema of `r` and `r'`.
pub const DEFAULT_GRID: usize = 4001;

/// Outward factor applied when a computed constant is used as a threshold.
pub const SAFETY_FACTOR: f64 = 1.001;

/// Constants derived from the coefficient `r`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub r_min: f64,
    pub r_max: f64,
    pub rp_plus_max: f64,
    pub rp_minus_max: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub a1: f64,
    #[serde(rename = "Lambda1")]
    pub lambda1: f64,
    #[serde(rename = "Lambda2")]
    pub lambda2: f64,
    #[serde(rename = "Lambda3")]
    pub lambda3: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub grid: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonlinear: Option<NonlinearBounds>,
    pub warnings: Vec<String>,
}

impl BoundsReport {
    /// Builds every derived constant from the four extrema.
    pub fn from_extrema(
        r_min: f64,
        r_max: f64,
        rp_plus_max: f64,
        rp_minus_max: f64,
        grid: usize,
    ) -> Self {
        let c_min = (-2.0 * rp_plus_max.max(rp_minus_max) / r_min).exp();
        let c_max = 1.0 / c_min;
        let a1 = (r_min * c_min / (r_max * c_max)).sqrt();
        let c1 = 0.25 * r_min * c_min;
        let lambda1 = (4.0 * r_max * c_max).powi(2) / (r_min.powi(3) * c_min * c_min);
        let lambda2 = r_min * r_min / (4.0 * r_max.powi(3) * c_max * c_max);
        let c2 = 3.0 * r_max * r_max * (c_max / r_min).powf(1.5);
        let c3 = 3.0 * r_max * r_max * c_max.powf(1.5) / r_min;
        let lambda3 = (0.25 * r_max / (c1 * c1)).max(lambda1);
        let c4 = (r_max * c_max).sqrt() * (c2 + c3 / r_min.sqrt());
        BoundsReport {
            r_min,
            r_max,
            rp_plus_max,
            rp_minus_max,
            c_min,
            c_max,
            a1,
            lambda1,
            lambda2,
            lambda3,
            c1,
            c2,
            c3,
            c4,
            grid,
            nonlinear: None,
            warnings: Vec::new(),
        }
    }
}

/// Computes the constants of `r` from extrema over a uniform grid of
/// `grid` points, each polished by golden section.
pub fn compute_constants(r: &Coefficient, grid: usize) -> Result<BoundsReport> {
    let grid = grid.max(3);
    let xs = linspace(-1.0, 1.0, grid);
    for &x in &xs {
        let (v, d) = r.eval_checked(x)?;
        if v <= 0.0 {
            return Err(Error::Invalid(format!("r not positive: r({x}) = {v}")));
        }
        if !d.is_finite() {
            return Err(Error::NonFinite {
                what: "r'".into(),
                x,
            });
        }
    }
    let (_, r_max) = grid_max(|x| r.value(x), -1.0, 1.0, grid);
    let (_, neg_min) = grid_max(|x| -r.value(x), -1.0, 1.0, grid);
    let (_, rp_plus) = grid_max(|x| r.eval(x).1, -1.0, 1.0, grid);
    let (_, rp_minus) = grid_max(|x| -r.eval(x).1, -1.0, 1.0, grid);
    let r_min = -neg_min;
    if r_min <= 0.0 {
        return Err(Error::Invalid(format!("r not positive: min r = {r_min}")));
    }
    let mut report =
        BoundsReport::from_extrema(r_min, r_max, rp_plus.max(0.0), rp_minus.max(0.0), grid);
    if r.has_jumps() {
        report
            .warnings
            .push("r has unsmoothed jumps; derivative-based constants ignore them".into());
    }
    Ok(report)
}

/// Constants of the nonlinear coefficient `g(x, u)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonlinearBounds {
    pub g_min: f64,
    pub g_max: f64,
    #[serde(rename = "C1")]
    pub c1_sup: f64,
    #[serde(rename = "C2")]
    pub c2_sup: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(rename = "R_of_Lambda")]
    pub r_of_lambda: f64,
    #[serde(rename = "gamma_gL")]
    pub gamma: f64,
    #[serde(rename = "Lambda_of_k")]
    pub lambda_of_k: BTreeMap<usize, f64>,
    pub grid: String,
    pub u_max: f64,
}

/// Half-width of the sampled `u` range.
pub const U_MAX: f64 = 1e3;

fn u_grid() -> Vec<f64> {
    let mut out = vec![0.0];
    for i in 0..200 {
        let u = 10f64.powf(-6.0 + 9.0 * i as f64 / 199.0);
        out.push(u);
        out.push(-u);
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Samples `g`, `|g_x|` and `|u g_u|` over `[-1, 1] × [-U, U]` and derives
/// `R(Λ)`, `γ_{g,Λ}` and `Λ(k)` for `k ≤ kmax`.
pub fn nonlinear_constants(g: &Coefficient, lambda: f64, kmax: usize) -> Result<NonlinearBounds> {
    let xs = linspace(-1.0, 1.0, 201);
    let us = u_grid();
    let mut g_min = f64::INFINITY;
    let mut g_max = f64::NEG_INFINITY;
    let mut c1 = 0.0f64;
    let mut c2 = 0.0f64;
    let mut arg_c1 = (0.0, 0.0);
    let mut arg_c2 = (0.0, 0.0);
    for &x in &xs {
        for &u in &us {
            let j = g.eval_xu(x, u);
            if !(j.v.is_finite() && j.dx.is_finite() && j.du.is_finite()) {
                return Err(Error::NonFinite {
                    what: "g".into(),
                    x,
                });
            }
            if j.v <= 0.0 {
                return Err(Error::Invalid(format!(
                    "g not positive: g({x}, {u}) = {}",
                    j.v
                )));
            }
            g_min = g_min.min(j.v);
            g_max = g_max.max(j.v);
            if j.dx.abs() > c1 {
                c1 = j.dx.abs();
                arg_c1 = (x, u);
            }
            if (u * j.du).abs() > c2 {
                c2 = (u * j.du).abs();
                arg_c2 = (x, u);
            }
        }
    }
    if c1 > 0.0 {
        let (x, u) = arg_c1;
        let (_, v) = grid_max(
            |s| g.eval_xu(s, u).dx.abs(),
            (x - 0.01).max(-1.0),
            (x + 0.01).min(1.0),
            5,
        );
        c1 = c1.max(v);
    }
    if c2 > 0.0 {
        let (x, u) = arg_c2;
        let (lo, hi) = if u > 0.0 {
            (u * 0.9, u * 1.1)
        } else {
            (u * 1.1, u * 0.9)
        };
        let (_, v) = grid_max(|s| (s * g.eval_xu(x, s).du).abs(), lo, hi, 5);
        c2 = c2.max(v);
    }
    let r_of_lambda = 1f64.max(1.0 / g_min) * (c1 + c2 * lambda.max(0.0).sqrt());
    let gamma = (g_min / g_max).sqrt() * (-r_of_lambda).exp();
    let lambda_of_k = (1..=kmax).map(|k| (k, lambda_of_k(g_min, k))).collect();
    Ok(NonlinearBounds {
        g_min,
        g_max,
        c1_sup: c1,
        c2_sup: c2,
        lambda,
        r_of_lambda,
        gamma,
        lambda_of_k,
        grid: format!("201x{} (x uniform, u symmetric log-spaced)", us.len()),
        u_max: U_MAX,
    })
}

/// Upper bound `g_min^{-1} ((k + 2) π / 2)²` on branch eigenvalue parameters.
pub fn lambda_of_k(g_min: f64, k: usize) -> f64 {
    ((k as f64 + 2.0) * std::f64::consts::FRAC_PI_2).powi(2) / g_min
}

/// Result of [`verify_energy_envelope`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    /// Worst excursion of `E(x)/E(0)` beyond `[c_min, c_max]`; `<= 0` when
    /// the envelope holds.
    pub max_violation: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub c_min: f64,
    pub c_max: f64,
    /// Worst relative excursion of `E` beyond `[λ r_min c_min, λ r_max c_max]`
    /// (energy family only).
    pub amplitude_violation: Option<f64>,
    pub samples: usize,
}

fn energy(r: &Coefficient, lambda: f64, x: f64, w: f64, wp: f64) -> f64 {
    wp * wp + lambda * r.value(x) * w * w
}

fn dense_points(v: &VariationalTrajectory) -> Vec<f64> {
    let nodes = v.traj.nodes();
    let mut xs = Vec::with_capacity(4 * nodes.len());
    for w in nodes.windows(2) {
        for j in 0..4 {
            xs.push(w[0] + (w[1] - w[0]) * j as f64 / 4.0);
        }
    }
    xs.push(1.0);
    xs
}

/// Evaluates `E = w'² + λ r w²` along `w(λ, θ)` against the envelope.
pub fn verify_energy_envelope(
    r: &Coefficient,
    lambda: f64,
    theta: f64,
    family: Family,
    tol: f64,
) -> Result<EnvelopeReport> {
    if !(lambda > 0.0) {
        return Err(Error::Precondition(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let b = compute_constants(r, DEFAULT_GRID)?;
    let v = integrate_variational(r, lambda, theta, family, tol, &[])?;
    let s0 = v.sample(0.0)?;
    let e0 = energy(r, lambda, 0.0, s0.w, s0.wp);
    let (lo_amp, hi_amp) = (lambda * b.r_min * b.c_min, lambda * b.r_max * b.c_max);
    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = f64::NEG_INFINITY;
    let mut amp = f64::NEG_INFINITY;
    let xs = dense_points(&v);
    for &x in &xs {
        let s = v.sample(x)?;
        let e = energy(r, lambda, x, s.w, s.wp);
        let q = e / e0;
        ratio_min = ratio_min.min(q);
        ratio_max = ratio_max.max(q);
        amp = amp.max((lo_amp - e) / e0).max((e - hi_amp) / e0);
    }
    Ok(EnvelopeReport {
        max_violation: (b.c_min - ratio_min).max(ratio_max - b.c_max),
        ratio_min,
        ratio_max,
        c_min: b.c_min,
        c_max: b.c_max,
        amplitude_violation: (family == Family::Energy).then_some(amp),
        samples: xs.len(),
    })
}

/// Residuals of the endpoint identities at a Dirichlet eigenpair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    /// `w'(-1) w_θ(-1) - s`, `w'(1) w_θ(1) - s` with `s = (λ r(0))^{1/2}`
    /// (energy) or `1` (slope).
    pub wwth: [f64; 2],
    /// `w'(±1) w_λ(±1) - ∫₀^{±1} r w² + ½ λ^{-1/2} r(0)^{1/2} sin θ cos θ`.
    pub wwla: [f64; 2],
    /// `∫₀^{±1} r w² - [w' w_λ - w w_λ']₀^{±1}`.
    pub lagrange: [f64; 2],
    /// `∫₀^{±1} r w²`.
    pub integrals: [f64; 2],
    /// `±∫₀^{±1} r w² ≥ c₁`, checked only when `λ ≥ Λ₁`.
    pub integral_bound: Option<bool>,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.wwth
            .iter()
            .chain(&self.wwla)
            .chain(&self.lagrange)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// `∫₀^{±1} r w²` by Gauss–Legendre on each mesh step.
pub fn weighted_square_integrals(v: &VariationalTrajectory) -> Result<[f64; 2]> {
    let nodes = v.traj.nodes();
    let mut left = 0.0;
    let mut right = 0.0;
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        let probe = 0.5 * (a + b);
        let mut err = None;
        let piece = gauss5(
            |x| match v.sample(x) {
                Ok(s) => v.r.eval_probe(x, probe).0 * s.w * s.w,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            },
            a,
            b,
        );
        if let Some(e) = err {
            return Err(e);
        }
        if b <= 0.0 {
            left -= piece;
        } else {
            right += piece;
        }
    }
    Ok([left, right])
}

/// Checks the endpoint identities for `w(λ, θ)` assuming `w(±1) = 0`.
pub fn verify_identities(
    r: &Coefficient,
    lambda: f64,
    theta: f64,
    family: Family,
    tol: f64,
) -> Result<IdentityReport> {
    let v = integrate_variational(r, lambda, theta, family, tol, &[])?;
    let ends = [v.sample(-1.0)?, v.sample(1.0)?];
    let scale = v
        .traj
        .node_values()
        .iter()
        .fold(0.0f64, |m, s| m.max(s[0].abs()));
    for e in &ends {
        if e.w.abs() > 1e-6 * scale.max(1e-300) {
            return Err(Error::Precondition(format!(
                "w(±1) = {} is not small; identities hold only at Dirichlet eigenpairs",
                e.w
            )));
        }
    }
    let r0 = r.value(0.0);
    let (s, c) = theta.sin_cos();
    let (wronski, cross0) = match family {
        Family::Energy => ((lambda * r0).sqrt(), 0.5 * (r0 / lambda).sqrt() * s * c),
        Family::Slope => (1.0, 0.0),
    };
    let ints = weighted_square_integrals(&v)?;
    let s0 = v.sample(0.0)?;
    let bracket0 = s0.wp * s0.wla - s0.w * s0.wlap;
    let mut wwth = [0.0; 2];
    let mut wwla = [0.0; 2];
    let mut lagrange = [0.0; 2];
    for i in 0..2 {
        let e = ends[i];
        wwth[i] = e.wp * e.wth - wronski;
        wwla[i] = e.wp * e.wla - ints[i] + cross0;
        lagrange[i] = ints[i] - ((e.wp * e.wla - e.w * e.wlap) - bracket0);
    }
    let b = compute_constants(r, DEFAULT_GRID)?;
    let integral_bound = (family == Family::Energy && lambda >= b.lambda1)
        .then(|| -ints[0] >= b.c1 && ints[1] >= b.c1);
    Ok(IdentityReport {
        wwth,
        wwla,
        lagrange,
        integrals: ints,
        integral_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ivp::DEFAULT_TOL;
    use crate::problem::CoefficientSpec;
    use std::f64::consts::PI;

    fn coef(s: &str) -> Coefficient {
        Coefficient::compile(&CoefficientSpec::expression(s), false).unwrap()
    }

    #[test]
    fn unit_coefficient() {
        let b = compute_constants(&coef("1"), DEFAULT_GRID).unwrap();
        assert_eq!((b.c_min, b.c_max, b.a1), (1.0, 1.0, 1.0));
        assert_eq!(b.lambda1, 16.0);
        assert_eq!(b.c1, 0.25);
        assert_eq!(b.lambda3, 16.0);
        assert_eq!(b.c4, 6.0);
    }

    #[test]
    fn constant_four() {
        let b = compute_constants(&coef("4"), DEFAULT_GRID).unwrap();
        assert_eq!(b.c_min, 1.0);
        assert_eq!(b.a1, 1.0);
        assert!((b.lambda1 - 4.0).abs() < 1e-14);
    }

    #[test]
    fn cosine_coefficient() {
        let b = compute_constants(&coef("2 - cos(pi*x/2)"), DEFAULT_GRID).unwrap();
        assert!((b.r_min - 1.0).abs() < 1e-12);
        assert!((b.r_max - 2.0).abs() < 1e-12);
        assert!((b.rp_plus_max - PI / 2.0).abs() < 1e-10);
        assert!((b.rp_minus_max - PI / 2.0).abs() < 1e-10);
        assert!((b.c_min - (-PI).exp()).abs() < 1e-10);
        assert!((b.a1 - (-PI).exp() / 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(compute_constants(&coef("x"), 101).is_err());
    }

    #[test]
    fn unit_g() {
        let nb = nonlinear_constants(&Coefficient::constant(1.0), 10.0, 3).unwrap();
        assert_eq!(
            (nb.c1_sup, nb.c2_sup, nb.r_of_lambda, nb.gamma),
            (0.0, 0.0, 0.0, 1.0)
        );
        assert!((nb.lambda_of_k[&1] - (1.5 * PI).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn saturating_g() {
        let g =
            Coefficient::compile(&CoefficientSpec::expression("(1+15*u^2)/(1+u^2)"), true).unwrap();
        let nb = nonlinear_constants(&g, 22.0, 2).unwrap();
        assert_eq!(nb.c1_sup, 0.0);
        assert!((nb.c2_sup - 7.0).abs() < 1e-8, "{}", nb.c2_sup);
        assert_eq!(nb.g_min, 1.0);
        assert!((nb.lambda_of_k[&1] - 22.2066099).abs() < 1e-6);
    }

    #[test]
    fn x_only_g() {
        let g = Coefficient::compile(&CoefficientSpec::example2(), true).unwrap();
        let nb = nonlinear_constants(&g, 1.0, 1).unwrap();
        assert!((nb.c1_sup - PI / 2.0).abs() < 1e-9);
        assert_eq!(nb.c2_sup, 0.0);
        assert!((nb.g_min - 1.0).abs() < 1e-12);
        assert!((nb.g_max - 2.0).abs() < 1e-12);
    }

    #[test]
    fn flat_energy_for_unit_coefficient() {
        let rep =
            verify_energy_envelope(&coef("1"), 5.0, 0.3, Family::Energy, DEFAULT_TOL).unwrap();
        assert!(rep.max_violation <= 1e-9);
        assert!((rep.ratio_max - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identities_for_unit_coefficient() {
        for k in 1..=4 {
            let lam = (k as f64 * PI / 2.0).powi(2);
            // w = sin(√λ x + θ) vanishes at ±1 when θ = kπ/2 mod π.
            let theta = (k as f64 * PI / 2.0).rem_euclid(PI);
            let rep =
                verify_identities(&coef("1"), lam, theta, Family::Energy, DEFAULT_TOL).unwrap();
            assert!(rep.max_residual() < 1e-7, "{k}: {rep:?}");
        }
    }

    #[test]
    fn identity_precondition() {
        assert!(matches!(
            verify_identities(&coef("1"), 3.0, 0.1, Family::Energy, DEFAULT_TOL),
            Err(Error::Precondition(_))
        ));
    }
}
