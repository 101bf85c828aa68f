//! Boundary characteristic functions: `Γ±(λ, θ)`, their Jacobian, the scalar
//! determinant `D(λ)`, and the single-condition function in `θ`.

use crate::error::Result;
use crate::ivp::{
    integrate_fundamental, integrate_variational, Family, Trajectory, VariationalTrajectory,
};
use crate::numeric::bisect;
use crate::problem::{MinusCondition, MultiPointCondition, Problem, Side};
use serde::Serialize;
use std::f64::consts::PI;

/// `Γ` on one side with its partial derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaValue {
    pub value: f64,
    pub d_lambda: f64,
    pub d_theta: f64,
    pub side: Side,
    pub family: Family,
}

/// The 2×2 Jacobian of `(Γ⁻, Γ⁺)` in `(λ, θ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JacobianValue {
    pub det: f64,
    /// `[[Γ⁻_λ, Γ⁻_θ], [Γ⁺_λ, Γ⁺_θ]]`.
    pub entries: [[f64; 2]; 2],
    /// `|det|` divided by the product of the row norms.
    pub normalized: f64,
}

impl JacobianValue {
    pub fn from_entries(entries: [[f64; 2]; 2]) -> Self {
        let det = entries[0][0] * entries[1][1] - entries[0][1] * entries[1][0];
        let n0 = entries[0][0].hypot(entries[0][1]);
        let n1 = entries[1][0].hypot(entries[1][1]);
        let normalized = if n0 * n1 > 0.0 {
            det.abs() / (n0 * n1)
        } else {
            0.0
        };
        JacobianValue {
            det,
            entries,
            normalized,
        }
    }
}

/// Normalized determinant below which an eigenvalue is not certified simple.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

/// `Γ` for a multi-point condition: `w(±1) - Σ αᵢ w(ηᵢ)`.
pub fn gamma(v: &VariationalTrajectory, bc: &MultiPointCondition) -> Result<GammaValue> {
    let mut value = 0.0;
    let mut d_lambda = 0.0;
    let mut d_theta = 0.0;
    let mut add = |c: f64, x: f64| -> Result<()> {
        let s = v.sample(x)?;
        value += c * s.w;
        d_lambda += c * s.wla;
        d_theta += c * s.wth;
        Ok(())
    };
    add(1.0, bc.side.endpoint())?;
    for (a, e) in bc.alphas.iter().zip(&bc.etas) {
        if *a != 0.0 {
            add(-a, *e)?;
        }
    }
    Ok(GammaValue {
        value,
        d_lambda,
        d_theta,
        side: bc.side,
        family: v.family,
    })
}

/// `Γ⁻` for whichever condition is imposed at `-1`.
pub fn gamma_minus(v: &VariationalTrajectory, bc: &MinusCondition) -> Result<GammaValue> {
    match bc {
        MinusCondition::MultiPoint(m) => gamma(v, m),
        MinusCondition::Separated(s) => {
            let e = v.sample(-1.0)?;
            Ok(GammaValue {
                value: s.c0 * e.w + s.c1 * e.wp,
                d_lambda: s.c0 * e.wla + s.c1 * e.wlap,
                d_theta: s.c0 * e.wth + s.c1 * e.wthp,
                side: Side::Minus,
                family: v.family,
            })
        }
    }
}

/// Both characteristic values and the Jacobian at one `(λ, θ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CharacteristicPoint {
    pub lambda: f64,
    pub theta: f64,
    pub minus: GammaValue,
    pub plus: GammaValue,
    pub jacobian: JacobianValue,
    /// `max(|w|)` over the mesh, the natural scale of the residuals.
    pub scale: f64,
}

/// Interior points at which a problem's solutions must be sampled exactly.
pub fn problem_stops(problem: &Problem) -> Vec<f64> {
    problem.stop_points()
}

/// Evaluates `Γ±` and `J` with one variational integration.
pub fn evaluate(
    problem: &Problem,
    lambda: f64,
    theta: f64,
    family: Family,
    tol: f64,
) -> Result<CharacteristicPoint> {
    let v = integrate_variational(
        &problem.r,
        lambda,
        theta,
        family,
        tol,
        &problem_stops(problem),
    )?;
    evaluate_on(problem, &v)
}

/// Like [`evaluate`] on an existing trajectory.
pub fn evaluate_on(problem: &Problem, v: &VariationalTrajectory) -> Result<CharacteristicPoint> {
    let minus = gamma_minus(v, &problem.spec.bc_minus)?;
    let plus = gamma(v, problem.plus())?;
    let jacobian = JacobianValue::from_entries([
        [minus.d_lambda, minus.d_theta],
        [plus.d_lambda, plus.d_theta],
    ]);
    let scale = v
        .traj
        .node_values()
        .iter()
        .fold(0.0f64, |m, s| m.max(s[0].abs()));
    Ok(CharacteristicPoint {
        lambda: v.lambda,
        theta: v.theta,
        minus,
        plus,
        jacobian,
        scale,
    })
}

/// The Jacobian of `(Γ⁻, Γ⁺)` at `(λ, θ)`.
pub fn jacobian(
    problem: &Problem,
    lambda: f64,
    theta: f64,
    family: Family,
    tol: f64,
) -> Result<JacobianValue> {
    Ok(evaluate(problem, lambda, theta, family, tol)?.jacobian)
}

/// Boundary matrix `[[B⁻φ₀, B⁻φ₁], [B⁺φ₀, B⁺φ₁]]` for the fundamental pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryMatrix {
    pub lambda: f64,
    pub m: [[f64; 2]; 2],
    /// Largest fundamental-solution magnitude at the sample points.
    pub scale: f64,
}

impl BoundaryMatrix {
    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// `(u(0), u'(0))` of the solution annihilated by the row with larger norm.
    pub fn null_vector(&self) -> (f64, f64) {
        let [a, b] = self.m;
        let row = if a[0].hypot(a[1]) >= b[0].hypot(b[1]) {
            a
        } else {
            b
        };
        let (u0, up0) = (row[1], -row[0]);
        let n = u0.hypot(up0);
        if n == 0.0 {
            (0.0, 1.0)
        } else {
            (u0 / n, up0 / n)
        }
    }
}

fn apply_multi(traj: &Trajectory<4>, bc: &MultiPointCondition) -> Result<[f64; 2]> {
    let mut out = [0.0; 2];
    let mut add = |c: f64, x: f64| -> Result<()> {
        let s = traj.sample(x)?;
        out[0] += c * s[0];
        out[1] += c * s[2];
        Ok(())
    };
    add(1.0, bc.side.endpoint())?;
    for (a, e) in bc.alphas.iter().zip(&bc.etas) {
        if *a != 0.0 {
            add(-a, *e)?;
        }
    }
    Ok(out)
}

/// Boundary functionals applied to `φ₀`, `φ₁` at `λ`.
pub fn boundary_matrix(problem: &Problem, lambda: f64, tol: f64) -> Result<BoundaryMatrix> {
    let traj = integrate_fundamental(&problem.r, lambda, tol, &problem_stops(problem))?;
    let minus = match &problem.spec.bc_minus {
        MinusCondition::MultiPoint(m) => apply_multi(&traj, m)?,
        MinusCondition::Separated(s) => {
            let e = traj.sample(-1.0)?;
            [s.c0 * e[0] + s.c1 * e[1], s.c0 * e[2] + s.c1 * e[3]]
        }
    };
    let plus = apply_multi(&traj, problem.plus())?;
    let mut scale = 0.0f64;
    for x in [-1.0, 1.0] {
        let e = traj.sample(x)?;
        scale = scale.max(e[0].abs()).max(e[2].abs());
    }
    Ok(BoundaryMatrix {
        lambda,
        m: [minus, plus],
        scale: scale.max(1.0),
    })
}

/// `D(λ)`, zero exactly at eigenvalues.
pub fn characteristic_determinant(problem: &Problem, lambda: f64, tol: f64) -> Result<f64> {
    Ok(boundary_matrix(problem, lambda, tol)?.det())
}

/// `θ` of the shooting family representing `(u(0), u'(0))`, in `[0, 2π)`.
pub fn theta_of(u0: f64, up0: f64, lambda: f64, r0: f64, family: Family) -> f64 {
    let th = match family {
        Family::Energy => (u0 * (lambda * r0).sqrt()).atan2(up0),
        Family::Slope => u0.atan2(up0),
    };
    th.rem_euclid(2.0 * PI)
}

/// Single-condition function `θ ↦ w̃(θ)(η₀) - Σ αᵢ w̃(θ)(ηᵢ)` at fixed `λ`,
/// represented through the rotation identity by its values at two phases.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingleCondition {
    /// `B(w̃(π/2))`, the functional applied to the solution with `(1, 0)` at 0.
    pub b_even: f64,
    /// `B(w̃(0))`, the functional applied to the solution with `(0, 1)` at 0.
    pub b_odd: f64,
    /// Magnitude of the individual terms, for relative thresholds.
    pub scale: f64,
}

impl SingleCondition {
    pub fn new(
        r: &crate::problem::Coefficient,
        lambda: f64,
        eta0: f64,
        alphas: &[f64],
        etas: &[f64],
        tol: f64,
    ) -> Result<Self> {
        let mut stops = etas.to_vec();
        stops.push(eta0);
        let traj = integrate_fundamental(r, lambda, tol, &stops)?;
        let e0 = traj.sample(eta0)?;
        let (mut b_even, mut b_odd) = (e0[0], e0[2]);
        let mut scale = e0[0].abs().max(e0[2].abs());
        for (a, e) in alphas.iter().zip(etas) {
            let s = traj.sample(*e)?;
            b_even -= a * s[0];
            b_odd -= a * s[2];
            scale = scale.max(a.abs() * s[0].abs().max(s[2].abs()));
        }
        Ok(SingleCondition {
            b_even,
            b_odd,
            scale,
        })
    }

    pub fn value(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        s * self.b_even + c * self.b_odd
    }

    pub fn d_theta(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        c * self.b_even - s * self.b_odd
    }

    /// True when the function vanishes identically up to rounding.
    pub fn is_degenerate(&self) -> bool {
        self.b_even.hypot(self.b_odd) <= 1e-9 * self.scale.max(1e-300)
    }
}

/// Direct evaluation of the single-condition function by integration.
pub fn gamma_single(
    r: &crate::problem::Coefficient,
    lambda: f64,
    theta: f64,
    eta0: f64,
    alphas: &[f64],
    etas: &[f64],
    tol: f64,
) -> Result<f64> {
    let mut stops = etas.to_vec();
    stops.push(eta0);
    let v = integrate_variational(r, lambda, theta, Family::Slope, tol, &stops)?;
    let mut g = v.sample(eta0)?.w;
    for (a, e) in alphas.iter().zip(etas) {
        g -= a * v.sample(*e)?.w;
    }
    Ok(g)
}

/// Zeros of the single-condition function on `[0, π)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThetaZeros {
    pub count: usize,
    pub zeros: Vec<f64>,
    /// `∂Γ/∂θ` at each zero.
    pub slopes: Vec<f64>,
    /// The function vanishes identically, so every θ is a zero.
    pub degenerate: bool,
}

/// Points in the θ scan.
pub const THETA_SCAN: usize = 721;

/// Counts zeros on `[0, π)` by a 721-point scan refined by bisection to 1e-12.
pub fn count_theta_zeros(
    r: &crate::problem::Coefficient,
    lambda: f64,
    eta0: f64,
    alphas: &[f64],
    etas: &[f64],
    tol: f64,
) -> Result<ThetaZeros> {
    let sc = SingleCondition::new(r, lambda, eta0, alphas, etas, tol)?;
    Ok(scan_theta(&sc))
}

/// Scan of an already assembled single-condition function.
pub fn scan_theta(sc: &SingleCondition) -> ThetaZeros {
    let noise = 1e-9 * sc.scale.max(1e-300);
    let thetas: Vec<f64> = (0..THETA_SCAN)
        .map(|j| PI * j as f64 / (THETA_SCAN - 1) as f64)
        .collect();
    let vals: Vec<f64> = thetas.iter().map(|&t| sc.value(t)).collect();
    let mut zeros: Vec<f64> = Vec::new();
    for j in 0..THETA_SCAN - 1 {
        if vals[j].abs() <= noise {
            zeros.push(thetas[j]);
        } else if vals[j + 1].abs() > noise && vals[j].signum() != vals[j + 1].signum() {
            zeros.push(bisect(|t| sc.value(t), thetas[j], thetas[j + 1], 1e-12));
        }
    }
    zeros.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let slopes = zeros.iter().map(|&t| sc.d_theta(t)).collect();
    ThetaZeros {
        count: zeros.len(),
        zeros,
        slopes,
        degenerate: sc.is_degenerate(),
    }
}
