//! Membership tests for the nodal classes `T_k^ν`.
//!
//! A `C¹` function on `[-1, 1]` lies in `T_k^ν` when `u'(±1) ≠ 0` with
//! `ν = sign u'(-1)`, `u'` has exactly `k` zeros in `(-1, 1)`, all simple,
//! and `u` changes sign strictly between consecutive zeros of `u'`.

use crate::ivp::Solution;
use crate::numeric::{bisect, golden_max, linspace};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Uniform samples taken before refinement.
pub const SCAN_SAMPLES: usize = 4096;
/// Relative size of `|u''|` at a zero of `u'` certifying simplicity.
pub const TOL_SIMPLE: f64 = 1e-6;
/// Relative size of `|u'(±1)|` required at the endpoints.
pub const TOL_BOUNDARY: f64 = 1e-8;

/// A function with value, slope and second derivative available pointwise.
pub trait DenseCurve {
    /// `(u(x), u'(x))` for `x ∈ [-1, 1]`.
    fn u_up(&self, x: f64) -> (f64, f64);
    /// `u''(x)`.
    fn upp(&self, x: f64) -> f64;
}

impl DenseCurve for Solution {
    fn u_up(&self, x: f64) -> (f64, f64) {
        let s = self.sample(x).expect("x in [-1, 1]");
        (s.u, s.up)
    }

    fn upp(&self, x: f64) -> f64 {
        self.second_derivative(x)
    }
}

/// A curve given by closures, mostly for tests and closed forms.
pub struct FnCurve<F, G, H> {
    pub u: F,
    pub up: G,
    pub upp: H,
}

impl<F, G, H> DenseCurve for FnCurve<F, G, H>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    fn u_up(&self, x: f64) -> (f64, f64) {
        ((self.u)(x), (self.up)(x))
    }

    fn upp(&self, x: f64) -> f64 {
        (self.upp)(x)
    }
}

/// The sign `ν` of `u'(-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nu {
    Plus,
    Minus,
}

impl Nu {
    pub fn flip(self) -> Nu {
        match self {
            Nu::Plus => Nu::Minus,
            Nu::Minus => Nu::Plus,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Nu::Plus => 1.0,
            Nu::Minus => -1.0,
        }
    }
}

impl fmt::Display for Nu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Nu::Plus => "+",
            Nu::Minus => "-",
        })
    }
}

/// Certified membership in `T_k^ν`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodalClass {
    pub k: usize,
    pub nu: Nu,
    pub zeros_of_up: Vec<f64>,
    pub sign_changes_of_u: Vec<f64>,
}

impl fmt::Display for NodalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T_{}{}", self.k, self.nu)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NotNodalReason {
    BoundaryDerivativeZero,
    NonSimpleZero,
    MissingInteriorSignChange,
    NoZeros,
}

/// Why a function is in no `T_k^ν`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NotNodal {
    pub reason: NotNodalReason,
    pub detail: String,
}

impl fmt::Display for NotNodal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.reason, self.detail)
    }
}

fn not_nodal(reason: NotNodalReason, detail: String) -> NotNodal {
    NotNodal { reason, detail }
}

/// Sign changes of `up` over the uniform scan, refined by bisection.
fn slope_zeros<C: DenseCurve + ?Sized>(c: &C, xs: &[f64], ups: &[f64]) -> Vec<f64> {
    let mut zeros = Vec::new();
    let mut last: Option<usize> = None;
    for (i, &v) in ups.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        if let Some(j) = last {
            if ups[j].signum() != v.signum() {
                zeros.push(bisect(|x| c.u_up(x).1, xs[j], xs[i], 1e-14));
            }
        }
        last = Some(i);
    }
    zeros
}

/// Classifies `c` into some `T_k^ν` or explains why it is in none.
pub fn classify<C: DenseCurve + ?Sized>(c: &C) -> Result<NodalClass, NotNodal> {
    let xs = linspace(-1.0, 1.0, SCAN_SAMPLES + 1);
    let vals: Vec<(f64, f64)> = xs.iter().map(|&x| c.u_up(x)).collect();
    let ups: Vec<f64> = vals.iter().map(|v| v.1).collect();
    let max_up = ups.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_upp = xs.iter().fold(0.0f64, |m, &x| m.max(c.upp(x).abs()));
    if max_up == 0.0 {
        return Err(not_nodal(
            NotNodalReason::BoundaryDerivativeZero,
            "u' vanishes identically".into(),
        ));
    }

    let (up_l, up_r) = (ups[0], ups[SCAN_SAMPLES]);
    if up_l.abs() <= TOL_BOUNDARY * max_up || up_r.abs() <= TOL_BOUNDARY * max_up {
        return Err(not_nodal(
            NotNodalReason::BoundaryDerivativeZero,
            format!("u'(-1) = {up_l:e}, u'(1) = {up_r:e}, max |u'| = {max_up:e}"),
        ));
    }
    let nu = if up_l > 0.0 { Nu::Plus } else { Nu::Minus };

    // A zero of u' that touches without crossing is a non-simple zero.
    for i in 1..SCAN_SAMPLES {
        let (a, b, m) = (ups[i - 1].abs(), ups[i + 1].abs(), ups[i].abs());
        let same_side = ups[i - 1] != 0.0
            && ups[i - 1].signum() == ups[i + 1].signum()
            && (ups[i] == 0.0 || ups[i].signum() == ups[i - 1].signum());
        if m <= a && m <= b && same_side {
            let (_, neg) = golden_max(|x| -c.u_up(x).1.abs(), xs[i - 1], xs[i + 1], 1e-13);
            if -neg <= TOL_BOUNDARY * max_up {
                return Err(not_nodal(
                    NotNodalReason::NonSimpleZero,
                    format!("u' touches zero near x = {}", xs[i]),
                ));
            }
        }
    }

    let zeros = slope_zeros(c, &xs, &ups);
    if zeros.is_empty() {
        return Err(not_nodal(
            NotNodalReason::NoZeros,
            "u' has no zero in (-1, 1)".into(),
        ));
    }
    for &z in &zeros {
        let upp = c.upp(z);
        if upp.abs() <= TOL_SIMPLE * max_upp {
            return Err(not_nodal(
                NotNodalReason::NonSimpleZero,
                format!("u''({z}) = {upp:e} relative to max |u''| = {max_upp:e}"),
            ));
        }
    }
    let mut sign_changes = Vec::new();
    for w in zeros.windows(2) {
        let (ua, ub) = (c.u_up(w[0]).0, c.u_up(w[1]).0);
        if ua.signum() == ub.signum() || ua == 0.0 || ub == 0.0 {
            return Err(not_nodal(
                NotNodalReason::MissingInteriorSignChange,
                format!("u keeps its sign between x = {} and x = {}", w[0], w[1]),
            ));
        }
        sign_changes.push(bisect(|x| c.u_up(x).0, w[0], w[1], 1e-14));
    }
    Ok(NodalClass {
        k: zeros.len(),
        nu,
        zeros_of_up: zeros,
        sign_changes_of_u: sign_changes,
    })
}

/// Number of sign changes of `u'` in `(-1, 1)`, without any certification.
pub fn oscillation_count<C: DenseCurve + ?Sized>(c: &C) -> usize {
    let xs = linspace(-1.0, 1.0, SCAN_SAMPLES + 1);
    let ups: Vec<f64> = xs.iter().map(|&x| c.u_up(x).1).collect();
    slope_zeros(c, &xs, &ups).len()
}

/// Negated view of a curve.
pub struct Negated<'a, C: ?Sized>(pub &'a C);

impl<C: DenseCurve + ?Sized> DenseCurve for Negated<'_, C> {
    fn u_up(&self, x: f64) -> (f64, f64) {
        let (u, up) = self.0.u_up(x);
        (-u, -up)
    }

    fn upp(&self, x: f64) -> f64 {
        -self.0.upp(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn cosine_is_t1_plus() {
        let a = PI / 3.0;
        let c = FnCurve {
            u: |x: f64| (a * x).cos(),
            up: |x: f64| -a * (a * x).sin(),
            upp: |x: f64| -a * a * (a * x).cos(),
        };
        let n = classify(&c).unwrap();
        assert_eq!((n.k, n.nu), (1, Nu::Plus));
        assert!(n.zeros_of_up[0].abs() < 1e-12);
    }

    #[test]
    fn sine_pi_is_t2_minus() {
        let c = FnCurve {
            u: |x: f64| (PI * x).sin(),
            up: |x: f64| PI * (PI * x).cos(),
            upp: |x: f64| -PI * PI * (PI * x).sin(),
        };
        let n = classify(&c).unwrap();
        assert_eq!((n.k, n.nu), (2, Nu::Minus));
        assert!((n.zeros_of_up[0] + 0.5).abs() < 1e-12);
        assert!((n.zeros_of_up[1] - 0.5).abs() < 1e-12);
        assert!(n.sign_changes_of_u[0].abs() < 1e-12);
        let m = classify(&Negated(&c)).unwrap();
        assert_eq!((m.k, m.nu), (2, Nu::Plus));
    }

    #[test]
    fn parabola_is_t1_minus() {
        let c = FnCurve {
            u: |x: f64| x * x,
            up: |x: f64| 2.0 * x,
            upp: |_| 2.0,
        };
        let n = classify(&c).unwrap();
        assert_eq!((n.k, n.nu), (1, Nu::Minus));
    }

    #[test]
    fn failure_reasons() {
        let flat = FnCurve {
            u: |x: f64| (PI * x / 2.0).sin(),
            up: |x: f64| PI / 2.0 * (PI * x / 2.0).cos(),
            upp: |x: f64| -(PI / 2.0).powi(2) * (PI * x / 2.0).sin(),
        };
        assert_eq!(
            classify(&flat).unwrap_err().reason,
            NotNodalReason::BoundaryDerivativeZero
        );

        let line = FnCurve {
            u: |x: f64| x,
            up: |_| 1.0,
            upp: |_| 0.0,
        };
        assert_eq!(classify(&line).unwrap_err().reason, NotNodalReason::NoZeros);

        // u' = x² - 1/4 touches nowhere but u = x³/3 - x/4 + 1 has no sign change.
        let shifted = FnCurve {
            u: |x: f64| x.powi(3) / 3.0 - x / 4.0 + 1.0,
            up: |x: f64| x * x - 0.25,
            upp: |x: f64| 2.0 * x,
        };
        assert_eq!(
            classify(&shifted).unwrap_err().reason,
            NotNodalReason::MissingInteriorSignChange
        );

        // u' = x³ has a triple zero at 0 where u'' vanishes.
        let cubic = FnCurve {
            u: |x: f64| x.powi(4) / 4.0,
            up: |x: f64| x.powi(3),
            upp: |x: f64| 3.0 * x * x,
        };
        assert_eq!(
            classify(&cubic).unwrap_err().reason,
            NotNodalReason::NonSimpleZero
        );

        // u' = x² touches zero at the origin.
        let touch = FnCurve {
            u: |x: f64| x.powi(3) / 3.0 + 0.1,
            up: |x: f64| x * x + 1e-12 * 0.0,
            upp: |x: f64| 2.0 * x,
        };
        assert_eq!(
            classify(&touch).unwrap_err().reason,
            NotNodalReason::NonSimpleZero
        );
    }

    #[test]
    fn oscillation_counts() {
        let c = FnCurve {
            u: |x: f64| (PI * (x + 1.0)).sin(),
            up: |x: f64| PI * (PI * (x + 1.0)).cos(),
            upp: |x: f64| -PI * PI * (PI * (x + 1.0)).sin(),
        };
        assert_eq!(oscillation_count(&c), 2);
        let k = FnCurve {
            u: |_| 3.0,
            up: |_| 0.0,
            upp: |_| 0.0,
        };
        assert_eq!(oscillation_count(&k), 0);
    }

    proptest! {
        #[test]
        fn sign_equivariance(freq in 0.6f64..6.0, phase in 0.0f64..std::f64::consts::TAU) {
            let c = FnCurve {
                u: move |x: f64| (freq * x + phase).sin(),
                up: move |x: f64| freq * (freq * x + phase).cos(),
                upp: move |x: f64| -freq * freq * (freq * x + phase).sin(),
            };
            let a = classify(&c);
            let b = classify(&Negated(&c));
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(a.k, b.k);
                    prop_assert_eq!(a.nu, b.nu.flip());
                }
                (Err(a), Err(b)) => prop_assert_eq!(a.reason, b.reason),
                _ => prop_assert!(false),
            }
        }
    }
}
