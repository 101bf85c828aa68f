//! Coefficient specifications and their compiled evaluators.

use super::expr::{self, Jet, Node};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Declarative description of a coefficient function.
///
/// In JSON a bare string is accepted as shorthand for an expression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CoefficientSpec {
    Expression {
        body: String,
    },
    Piecewise {
        breaks: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        smoothing_width: f64,
    },
    Builtin {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        smoothing_width: Option<f64>,
    },
}

impl CoefficientSpec {
    pub fn expression(body: impl Into<String>) -> Self {
        CoefficientSpec::Expression { body: body.into() }
    }

    /// The step coefficient equal to 1 on `[-delta, delta]` and 4 elsewhere.
    pub fn example1(delta: f64, smoothing_width: f64) -> Self {
        CoefficientSpec::Builtin {
            name: "example1".into(),
            delta: Some(delta),
            smoothing_width: Some(smoothing_width),
        }
    }

    /// `2 - cos(pi x / 2)`.
    pub fn example2() -> Self {
        CoefficientSpec::Builtin {
            name: "example2".into(),
            delta: None,
            smoothing_width: None,
        }
    }
}

pub(crate) fn deserialize_coefficient<'de, D>(
    de: D,
) -> std::result::Result<CoefficientSpec, D::Error>
where
    D: serde::Deserializer<'de>,
{
    use serde::de::Error as _;
    let v = serde_json::Value::deserialize(de)?;
    match v {
        serde_json::Value::String(body) => Ok(CoefficientSpec::Expression { body }),
        serde_json::Value::Number(n) => Ok(CoefficientSpec::Expression {
            body: n.to_string(),
        }),
        other => serde_json::from_value(other).map_err(D::Error::custom),
    }
}

pub(crate) fn deserialize_opt_coefficient<'de, D>(
    de: D,
) -> std::result::Result<Option<CoefficientSpec>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    struct Wrap(#[serde(deserialize_with = "deserialize_coefficient")] CoefficientSpec);
    Ok(Option::<Wrap>::deserialize(de)?.map(|w| w.0))
}

#[derive(Clone, Debug)]
enum Repr {
    Expr(Node),
    Steps {
        breaks: Vec<f64>,
        values: Vec<f64>,
        eps: f64,
    },
    Product(Box<Coefficient>, Box<Coefficient>),
}

/// A compiled coefficient `c(x)` or `c(x, u)`.
#[derive(Clone, Debug)]
pub struct Coefficient {
    repr: Repr,
    spec: CoefficientSpec,
}

fn smoothstep(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0)
    } else {
        (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t))
    }
}

impl Coefficient {
    /// Compiles `spec`; `allow_u` admits the state variable `u` in expressions.
    pub fn compile(spec: &CoefficientSpec, allow_u: bool) -> Result<Self> {
        let repr = match spec {
            CoefficientSpec::Expression { body } => Repr::Expr(expr::parse(body, allow_u)?),
            CoefficientSpec::Piecewise {
                breaks,
                values,
                smoothing_width,
            } => steps(breaks.clone(), values.clone(), *smoothing_width)?,
            CoefficientSpec::Builtin {
                name,
                delta,
                smoothing_width,
            } => match name.as_str() {
                "example1" => {
                    let d = delta.unwrap_or(0.25);
                    if !(d > 0.0 && d < 0.5) {
                        return Err(Error::Config(format!(
                            "example1 delta must lie in (0, 0.5), got {d}"
                        )));
                    }
                    steps(
                        vec![-d, d],
                        vec![4.0, 1.0, 4.0],
                        smoothing_width.unwrap_or(0.0),
                    )?
                }
                "example2" => Repr::Expr(expr::parse("2 - cos(pi*x/2)", false)?),
                other => {
                    return Err(Error::Config(format!(
                        "unknown builtin coefficient `{other}`"
                    )))
                }
            },
        };
        Ok(Coefficient {
            repr,
            spec: spec.clone(),
        })
    }

    pub fn constant(c: f64) -> Self {
        Coefficient {
            repr: Repr::Expr(Node::Const(c)),
            spec: CoefficientSpec::expression(format!("{c:?}")),
        }
    }

    pub fn spec(&self) -> &CoefficientSpec {
        &self.spec
    }

    pub fn uses_u(&self) -> bool {
        match &self.repr {
            Repr::Expr(n) => n.uses_u(),
            Repr::Steps { .. } => false,
            Repr::Product(a, b) => a.uses_u() || b.uses_u(),
        }
    }

    /// True for piecewise coefficients with unsmoothed jumps.
    pub fn has_jumps(&self) -> bool {
        match &self.repr {
            Repr::Expr(_) => false,
            Repr::Steps { eps, breaks, .. } => *eps == 0.0 && !breaks.is_empty(),
            Repr::Product(a, b) => a.has_jumps() || b.has_jumps(),
        }
    }

    /// Points in (-1, 1) where the coefficient or its derivatives are not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Expr(_) => Vec::new(),
            Repr::Product(a, b) => {
                let mut out = a.breakpoints();
                out.extend(b.breakpoints());
                out.sort_by(f64::total_cmp);
                out.dedup();
                out
            }
            Repr::Steps { breaks, eps, .. } => {
                let mut out = Vec::new();
                for &b in breaks {
                    if *eps == 0.0 {
                        out.push(b);
                    } else {
                        out.push(b - eps);
                        out.push(b + eps);
                    }
                }
                out.retain(|&p| p > -1.0 && p < 1.0);
                out.sort_by(f64::total_cmp);
                out.dedup();
                out
            }
        }
    }

    /// Value and x-derivative at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        self.eval_probe(x, x)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// Like [`eval`](Self::eval), but at an unsmoothed jump the piece is the one
    /// containing `probe`.
    pub fn eval_probe(&self, x: f64, probe: f64) -> (f64, f64) {
        match &self.repr {
            Repr::Expr(n) => {
                let j = n.eval(x, 0.0);
                (j.v, j.dx)
            }
            Repr::Steps {
                breaks,
                values,
                eps,
            } => {
                let mut v = values[0];
                let mut d = 0.0;
                for (i, &b) in breaks.iter().enumerate() {
                    let jump = values[i + 1] - values[i];
                    if *eps == 0.0 {
                        let right = if x == b { probe > b } else { x > b };
                        if right {
                            v += jump;
                        }
                    } else {
                        let (s, ds) = smoothstep((x - b + eps) / (2.0 * eps));
                        v += jump * s;
                        d += jump * ds / (2.0 * eps);
                    }
                }
                (v, d)
            }
            Repr::Product(a, b) => {
                let (va, da) = a.eval_probe(x, probe);
                let (vb, db) = b.eval_probe(x, probe);
                (va * vb, da * vb + va * db)
            }
        }
    }

    /// Value and partial derivatives in `(x, u)`.
    pub fn eval_xu(&self, x: f64, u: f64) -> Jet {
        match &self.repr {
            Repr::Expr(n) => n.eval(x, u),
            Repr::Steps { .. } => {
                let (v, d) = self.eval(x);
                Jet { v, dx: d, du: 0.0 }
            }
            Repr::Product(a, b) => {
                let (ja, jb) = (a.eval_xu(x, u), b.eval_xu(x, u));
                Jet {
                    v: ja.v * jb.v,
                    dx: ja.dx * jb.v + ja.v * jb.dx,
                    du: ja.du * jb.v + ja.v * jb.du,
                }
            }
        }
    }

    /// Checked evaluation: reports non-finite values.
    pub fn eval_checked(&self, x: f64) -> Result<(f64, f64)> {
        let (v, d) = self.eval(x);
        if !v.is_finite() || !d.is_finite() {
            return Err(Error::NonFinite {
                what: "coefficient".into(),
                x,
            });
        }
        Ok((v, d))
    }

    /// The coefficient with `u` frozen at `value`.
    pub fn freeze_u(&self, value: f64) -> Coefficient {
        match &self.repr {
            Repr::Expr(n) => {
                let frozen = n.substitute_u(value);
                Coefficient {
                    spec: CoefficientSpec::expression(frozen.to_string()),
                    repr: Repr::Expr(frozen),
                }
            }
            Repr::Steps { .. } => self.clone(),
            Repr::Product(a, b) => a.freeze_u(value).times(&b.freeze_u(value)),
        }
    }

    /// Pointwise product `self * other`.
    pub fn times(&self, other: &Coefficient) -> Coefficient {
        Coefficient {
            repr: Repr::Product(Box::new(self.clone()), Box::new(other.clone())),
            spec: self.spec.clone(),
        }
    }
}

fn steps(breaks: Vec<f64>, values: Vec<f64>, eps: f64) -> Result<Repr> {
    if values.len() != breaks.len() + 1 {
        return Err(Error::Config(format!(
            "piecewise coefficient needs {} values for {} breaks, got {}",
            breaks.len() + 1,
            breaks.len(),
            values.len()
        )));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!(
            "smoothing_width must be >= 0, got {eps}"
        )));
    }
    for w in breaks.windows(2) {
        if w[1] - w[0] <= 2.0 * eps {
            return Err(Error::Config(
                "piecewise breaks must be increasing and farther apart than twice the smoothing width".into(),
            ));
        }
    }
    if breaks.iter().any(|&b| !(b > -1.0 && b < 1.0)) {
        return Err(Error::Config("piecewise breaks must lie in (-1, 1)".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("piecewise values must be finite".into()));
    }
    Ok(Repr::Steps {
        breaks,
        values,
        eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_one() {
        let c = Coefficient::compile(&CoefficientSpec::expression("1"), false).unwrap();
        assert_eq!(c.eval(0.3), (1.0, 0.0));
    }

    #[test]
    fn example2_at_origin() {
        let c = Coefficient::compile(&CoefficientSpec::example2(), false).unwrap();
        let (v, d) = c.eval(0.0);
        assert!((v - 1.0).abs() < 1e-15);
        assert!(d.abs() < 1e-15);
    }

    #[test]
    fn example1_exact_pieces() {
        let c = Coefficient::compile(&CoefficientSpec::example1(0.25, 0.0), false).unwrap();
        assert_eq!(c.eval(0.5), (4.0, 0.0));
        assert_eq!(c.eval(0.0), (1.0, 0.0));
        assert_eq!(c.eval_probe(0.25, 0.3).0, 4.0);
        assert_eq!(c.eval_probe(0.25, 0.2).0, 1.0);
        assert_eq!(c.breakpoints(), vec![-0.25, 0.25]);
        assert!(c.has_jumps());
    }

    #[test]
    fn smoothed_steps_are_c1() {
        let eps = 0.02;
        let c = Coefficient::compile(&CoefficientSpec::example1(0.25, eps), false).unwrap();
        for &b in &[-0.25, 0.25] {
            for &edge in &[b - eps, b + eps] {
                let h = 1e-14;
                let (vl, dl) = c.eval(edge - h);
                let (vr, dr) = c.eval(edge + h);
                assert!((vl - vr).abs() < 1e-8);
                assert!((dl - dr).abs() < 1e-8);
            }
        }
        assert!(!c.has_jumps());
        assert_eq!(c.breakpoints().len(), 4);
    }

    #[test]
    fn bad_piecewise_rejected() {
        let spec = CoefficientSpec::Piecewise {
            breaks: vec![0.0],
            values: vec![1.0],
            smoothing_width: 0.0,
        };
        assert!(Coefficient::compile(&spec, false).is_err());
    }

    #[test]
    fn freeze_removes_u() {
        let g =
            Coefficient::compile(&CoefficientSpec::expression("(1+15*u^2)/(1+u^2)"), true).unwrap();
        assert!(g.uses_u());
        let g0 = g.freeze_u(0.0);
        assert!(!g0.uses_u());
        assert_eq!(g0.value(0.2), 1.0);
    }

    proptest! {
        #[test]
        fn derivative_matches_central_difference(x in -0.99f64..0.99) {
            for body in ["2 - cos(pi*x/2)", "exp(x)*(1.5 + sin(3*x))", "1 + x^2/(2+x)", "sqrt(2 + x) * abs(x - 3)"] {
                let c = Coefficient::compile(&CoefficientSpec::expression(body), false).unwrap();
                let h = 1e-5;
                let fd = (c.value(x + h) - c.value(x - h)) / (2.0 * h);
                let (_, d) = c.eval(x);
                prop_assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0));
            }
        }
    }
}
