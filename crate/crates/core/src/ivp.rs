//! Adaptive Dormand–Prince 5(4) integration with dense output.
//!
//! Every integration starts at a given point and marches toward one or both
//! endpoints of `[-1, 1]`. Coefficient breakpoints and caller-supplied points
//! are forced mesh nodes, and the right-hand side is told which mesh segment
//! it is being evaluated in so that jump coefficients pick the correct piece.

use crate::error::{Error, Result};
use crate::problem::Coefficient;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Default absolute and relative tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Solution value and slope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub u: f64,
    pub up: f64,
}

impl State {
    pub fn new(u: f64, up: f64) -> Self {
        State { u, up }
    }
}

/// Normalization of the shooting family at `x = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `w(0) = sin θ`, `w'(0) = (λ r(0))^{1/2} cos θ`.
    Energy,
    /// `w(0) = sin θ`, `w'(0) = cos θ`.
    Slope,
}

/// Direction(s) of integration from the starting point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Span {
    /// Toward `+1`.
    Forward,
    /// Toward `-1`.
    Backward,
    /// Toward both endpoints.
    Both,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Debug)]
struct Step<const D: usize> {
    x0: f64,
    x1: f64,
    y0: [f64; D],
    y1: [f64; D],
    /// Dense-output coefficients beyond `y0`.
    cont: [[f64; D]; 4],
}

impl<const D: usize> Step<D> {
    fn lo(&self) -> f64 {
        self.x0.min(self.x1)
    }

    fn hi(&self) -> f64 {
        self.x0.max(self.x1)
    }

    fn eval(&self, x: f64) -> [f64; D] {
        if x == self.x0 {
            return self.y0;
        }
        if x == self.x1 {
            return self.y1;
        }
        let t = (x - self.x0) / (self.x1 - self.x0);
        let t1 = 1.0 - t;
        let [c2, c3, c4, c5] = &self.cont;
        let mut out = [0.0; D];
        for i in 0..D {
            out[i] = self.y0[i] + t * (c2[i] + t1 * (c3[i] + t * (c4[i] + t1 * c5[i])));
        }
        out
    }
}

/// Dense-output solution of a `D`-dimensional first-order system.
#[derive(Clone, Debug)]
pub struct Trajectory<const D: usize> {
    steps: Vec<Step<D>>,
    lo: f64,
    hi: f64,
    origin: f64,
    origin_value: [f64; D],
}

impl<const D: usize> Trajectory<D> {
    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Interpolated state at `x`.
    pub fn sample(&self, x: f64) -> Result<[f64; D]> {
        if !(x >= self.lo && x <= self.hi) {
            return Err(Error::OutOfDomain(x));
        }
        if x == self.origin || self.steps.is_empty() {
            return Ok(self.origin_value);
        }
        let i = self.steps.partition_point(|s| s.hi() < x);
        let i = i.min(self.steps.len() - 1);
        Ok(self.steps[i].eval(x))
    }

    /// Sorted mesh nodes.
    pub fn nodes(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.steps.iter().map(|s| s.lo()).collect();
        out.push(self.hi);
        if self.steps.is_empty() {
            out = vec![self.origin];
        }
        out
    }

    /// Stored state at each node of [`nodes`](Self::nodes).
    pub fn node_values(&self) -> Vec<[f64; D]> {
        if self.steps.is_empty() {
            return vec![self.origin_value];
        }
        let mut out: Vec<[f64; D]> = self
            .steps
            .iter()
            .map(|s| if s.x0 < s.x1 { s.y0 } else { s.y1 })
            .collect();
        let last = self.steps.last().expect("non-empty");
        out.push(if last.x0 < last.x1 { last.y1 } else { last.y0 });
        out
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Integrates `y' = rhs(x, probe, y)` from `(x0, y0)` to `lo` and to `hi`.
///
/// `probe` is the midpoint of the mesh segment containing the step, so a
/// right-hand side with jumps at `stops` can pick the right piece.
pub fn integrate_system<const D: usize, F>(
    rhs: &F,
    x0: f64,
    y0: [f64; D],
    lo: f64,
    hi: f64,
    stops: &[f64],
    tol: f64,
) -> Result<Trajectory<D>>
where
    F: Fn(f64, f64, &[f64; D]) -> [f64; D],
{
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if !(lo <= x0 && x0 <= hi) {
        return Err(Error::OutOfDomain(x0));
    }
    let mut stops: Vec<f64> = stops.iter().copied().filter(|s| s.is_finite()).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut backward = Vec::new();
    if lo < x0 {
        let mut ends: Vec<f64> = stops
            .iter()
            .copied()
            .filter(|&s| s < x0 && s > lo)
            .rev()
            .collect();
        ends.push(lo);
        march(rhs, x0, y0, &ends, tol, &mut backward)?;
    }
    let mut forward = Vec::new();
    if hi > x0 {
        let mut ends: Vec<f64> = stops
            .iter()
            .copied()
            .filter(|&s| s > x0 && s < hi)
            .collect();
        ends.push(hi);
        march(rhs, x0, y0, &ends, tol, &mut forward)?;
    }
    backward.reverse();
    backward.extend(forward);
    Ok(Trajectory {
        steps: backward,
        lo,
        hi,
        origin: x0,
        origin_value: y0,
    })
}

fn march<const D: usize, F>(
    rhs: &F,
    x_start: f64,
    y_start: [f64; D],
    ends: &[f64],
    tol: f64,
    out: &mut Vec<Step<D>>,
) -> Result<()>
where
    F: Fn(f64, f64, &[f64; D]) -> [f64; D],
{
    let mut x = x_start;
    let mut y = y_start;
    let mut h_abs = 0.0f64;
    for &b in ends {
        let dir = if b > x { 1.0 } else { -1.0 };
        let probe = 0.5 * (x + b);
        let mut k1 = rhs(x, probe, &y);
        if h_abs == 0.0 {
            h_abs = initial_step(&y, &k1, tol).min((b - x).abs());
        }
        loop {
            let remaining = (b - x).abs();
            if remaining == 0.0 {
                break;
            }
            let last = remaining <= 1.01 * h_abs;
            let h = if last { b - x } else { dir * h_abs };
            let (y1, k7, err, cont) = dp_step(rhs, x, &y, &k1, h, probe, tol);
            if !err.is_finite() || y1.iter().any(|v| !v.is_finite()) {
                if h_abs < 1e-14 * x.abs().max(1.0) {
                    return Err(Error::NonFinite {
                        what: "solution".into(),
                        x,
                    });
                }
                h_abs = 0.2 * h.abs();
                continue;
            }
            if err <= 1.0 {
                let x1 = if last { b } else { x + h };
                out.push(Step {
                    x0: x,
                    x1,
                    y0: y,
                    y1,
                    cont,
                });
                x = x1;
                y = y1;
                k1 = k7;
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                h_abs = if last {
                    h_abs.max(h.abs() * fac)
                } else {
                    h.abs() * fac
                };
            } else {
                h_abs = h.abs() * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h_abs < 1e-14 * x.abs().max(1.0) {
                    return Err(Error::StepUnderflow { x });
                }
            }
        }
    }
    Ok(())
}

fn initial_step<const D: usize>(y: &[f64; D], f: &[f64; D], tol: f64) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..D {
        let sc = tol + tol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (f[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / D as f64).sqrt(), (d1 / D as f64).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-3
    } else {
        0.01 * d0 / d1
    };
    h.clamp(1e-6, 0.1)
}

#[allow(clippy::type_complexity)]
fn dp_step<const D: usize, F>(
    rhs: &F,
    x: f64,
    y: &[f64; D],
    k1: &[f64; D],
    h: f64,
    probe: f64,
    tol: f64,
) -> ([f64; D], [f64; D], f64, [[f64; D]; 4])
where
    F: Fn(f64, f64, &[f64; D]) -> [f64; D],
{
    let comb = |coef: &[(f64, &[f64; D])]| {
        let mut out = *y;
        for (c, k) in coef {
            for i in 0..D {
                out[i] += h * c * k[i];
            }
        }
        out
    };
    let k2 = rhs(x + C2 * h, probe, &comb(&[(A21, k1)]));
    let k3 = rhs(x + C3 * h, probe, &comb(&[(A31, k1), (A32, &k2)]));
    let k4 = rhs(
        x + C4 * h,
        probe,
        &comb(&[(A41, k1), (A42, &k2), (A43, &k3)]),
    );
    let k5 = rhs(
        x + C5 * h,
        probe,
        &comb(&[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = rhs(
        x + h,
        probe,
        &comb(&[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y1 = comb(&[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = rhs(x + h, probe, &y1);

    let mut err = 0.0;
    let mut cont = [[0.0; D]; 4];
    for i in 0..D {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = tol + tol * y[i].abs().max(y1[i].abs());
        err += (e / sc).powi(2);
        let dy = y1[i] - y[i];
        let bspl = h * k1[i] - dy;
        cont[0][i] = dy;
        cont[1][i] = bspl;
        cont[2][i] = dy - h * k7[i] - bspl;
        cont[3][i] =
            h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    ((y1), k7, (err / D as f64).sqrt(), cont)
}

fn bounds_for(at: f64, span: Span) -> (f64, f64) {
    match span {
        Span::Forward => (at, 1.0),
        Span::Backward => (-1.0, at),
        Span::Both => (-1.0, 1.0),
    }
}

fn with_breaks(r: &Coefficient, extra: &[f64]) -> Vec<f64> {
    let mut s = r.breakpoints();
    s.extend_from_slice(extra);
    s.push(0.0);
    s
}

/// Solution of `-u'' = λ r u`.
#[derive(Clone, Debug)]
pub struct Solution {
    pub lambda: f64,
    pub r: Coefficient,
    pub traj: Trajectory<2>,
}

impl Solution {
    pub fn sample(&self, x: f64) -> Result<State> {
        let [u, up] = self.traj.sample(x)?;
        Ok(State { u, up })
    }

    /// `u''` from the equation.
    pub fn second_derivative(&self, x: f64) -> f64 {
        let u = self.traj.sample(x.clamp(-1.0, 1.0)).map_or(0.0, |s| s[0]);
        -self.lambda * self.r.value(x) * u
    }

    /// CSV with columns `x,u,up` at the mesh nodes.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,u,up\n");
        for (x, v) in self.traj.nodes().iter().zip(self.traj.node_values()) {
            let _ = writeln!(s, "{x},{},{}", v[0], v[1]);
        }
        s
    }
}

/// Integrates `-u'' = λ r u` from `init` given at `at`.
pub fn integrate(
    r: &Coefficient,
    lambda: f64,
    init: State,
    at: f64,
    span: Span,
    tol: f64,
    stops: &[f64],
) -> Result<Solution> {
    if !lambda.is_finite() {
        return Err(Error::Invalid(format!(
            "lambda must be finite, got {lambda}"
        )));
    }
    let (lo, hi) = bounds_for(at, span);
    let rhs = |x: f64, p: f64, y: &[f64; 2]| {
        let rv = r.eval_probe(x, p).0;
        [y[1], -lambda * rv * y[0]]
    };
    let traj = integrate_system(
        &rhs,
        at,
        [init.u, init.up],
        lo,
        hi,
        &with_breaks(r, stops),
        tol,
    )?;
    Ok(Solution {
        lambda,
        r: r.clone(),
        traj,
    })
}

/// The six-component variational state at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VarState {
    pub w: f64,
    pub wp: f64,
    pub wth: f64,
    pub wthp: f64,
    pub wla: f64,
    pub wlap: f64,
}

/// `w(λ, θ)` together with its θ- and λ-derivatives over `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct VariationalTrajectory {
    pub lambda: f64,
    pub theta: f64,
    pub family: Family,
    pub tol: f64,
    pub r: Coefficient,
    pub traj: Trajectory<6>,
}

/// Initial variational data at `x = 0`.
pub fn variational_initial(lambda: f64, r0: f64, theta: f64, family: Family) -> [f64; 6] {
    let (s, c) = theta.sin_cos();
    match family {
        Family::Energy => {
            let root = (lambda * r0).sqrt();
            [
                s,
                root * c,
                c,
                -root * s,
                0.0,
                0.5 * (r0 / lambda).sqrt() * c,
            ]
        }
        Family::Slope => [s, c, c, -s, 0.0, 0.0],
    }
}

impl VariationalTrajectory {
    pub fn sample(&self, x: f64) -> Result<VarState> {
        let [w, wp, wth, wthp, wla, wlap] = self.traj.sample(x)?;
        Ok(VarState {
            w,
            wp,
            wth,
            wthp,
            wla,
            wlap,
        })
    }

    /// The `w` component as a standalone solution.
    pub fn solution(&self) -> Solution {
        let steps = self
            .traj
            .steps
            .iter()
            .map(|s| Step {
                x0: s.x0,
                x1: s.x1,
                y0: [s.y0[0], s.y0[1]],
                y1: [s.y1[0], s.y1[1]],
                cont: s.cont.map(|c| [c[0], c[1]]),
            })
            .collect();
        Solution {
            lambda: self.lambda,
            r: self.r.clone(),
            traj: Trajectory {
                steps,
                lo: self.traj.lo,
                hi: self.traj.hi,
                origin: self.traj.origin,
                origin_value: [self.traj.origin_value[0], self.traj.origin_value[1]],
            },
        }
    }

    /// CSV with columns `x,u,up,wth,wthp,wla,wlap` at the mesh nodes.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,u,up,wth,wthp,wla,wlap\n");
        for (x, v) in self.traj.nodes().iter().zip(self.traj.node_values()) {
            let _ = writeln!(
                s,
                "{x},{},{},{},{},{},{}",
                v[0], v[1], v[2], v[3], v[4], v[5]
            );
        }
        s
    }
}

/// Integrates the joint system for `w`, `w_θ`, `w_λ` from `x = 0`.
pub fn integrate_variational(
    r: &Coefficient,
    lambda: f64,
    theta: f64,
    family: Family,
    tol: f64,
    stops: &[f64],
) -> Result<VariationalTrajectory> {
    if family == Family::Energy && !(lambda > 0.0) {
        return Err(Error::Invalid(format!(
            "energy family needs lambda > 0, got {lambda}"
        )));
    }
    let r0 = r.value(0.0);
    let init = variational_initial(lambda, r0, theta, family);
    let rhs = |x: f64, p: f64, y: &[f64; 6]| {
        let rv = r.eval_probe(x, p).0;
        let lr = lambda * rv;
        [
            y[1],
            -lr * y[0],
            y[3],
            -lr * y[2],
            y[5],
            -lr * y[4] - rv * y[0],
        ]
    };
    let traj = integrate_system(&rhs, 0.0, init, -1.0, 1.0, &with_breaks(r, stops), tol)?;
    Ok(VariationalTrajectory {
        lambda,
        theta,
        family,
        tol,
        r: r.clone(),
        traj,
    })
}

/// Fundamental pair `φ0`, `φ1` with `(1, 0)` and `(0, 1)` at `x = 0`,
/// stored as `[φ0, φ0', φ1, φ1']`.
pub fn integrate_fundamental(
    r: &Coefficient,
    lambda: f64,
    tol: f64,
    stops: &[f64],
) -> Result<Trajectory<4>> {
    let rhs = |x: f64, p: f64, y: &[f64; 4]| {
        let lr = lambda * r.eval_probe(x, p).0;
        [y[1], -lr * y[0], y[3], -lr * y[2]]
    };
    integrate_system(
        &rhs,
        0.0,
        [1.0, 0.0, 0.0, 1.0],
        -1.0,
        1.0,
        &with_breaks(r, stops),
        tol,
    )
}

/// Solution from `x = -1` with initial state `init` plus its λ-derivative,
/// stored as `[u, u', u_λ, u_λ']`.
pub fn integrate_from_left(
    r: &Coefficient,
    lambda: f64,
    init: State,
    tol: f64,
    stops: &[f64],
) -> Result<Trajectory<4>> {
    let rhs = |x: f64, p: f64, y: &[f64; 4]| {
        let rv = r.eval_probe(x, p).0;
        let lr = lambda * rv;
        [y[1], -lr * y[0], y[3], -lr * y[2] - rv * y[0]]
    };
    integrate_system(
        &rhs,
        -1.0,
        [init.u, init.up, 0.0, 0.0],
        -1.0,
        1.0,
        &with_breaks(r, stops),
        tol,
    )
}
