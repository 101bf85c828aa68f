//! Problem instances: coefficients, multi-point boundary data, nonlinearities.

mod coefficient;
pub mod expr;

pub use coefficient::{Coefficient, CoefficientSpec};

use crate::error::{Error, Result};
use coefficient::{deserialize_coefficient, deserialize_opt_coefficient};
use serde::{Deserialize, Deserializer, Serialize};

/// Which endpoint a boundary condition is attached to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Minus,
    #[default]
    Plus,
}

impl Side {
    /// The endpoint `-1` or `+1`.
    pub fn endpoint(self) -> f64 {
        match self {
            Side::Minus => -1.0,
            Side::Plus => 1.0,
        }
    }
}

/// `u(±1) = Σ alphas[i] u(etas[i])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiPointCondition {
    pub alphas: Vec<f64>,
    pub etas: Vec<f64>,
    #[serde(skip)]
    pub side: Side,
}

impl MultiPointCondition {
    pub fn new(side: Side, alphas: Vec<f64>, etas: Vec<f64>) -> Self {
        MultiPointCondition { alphas, etas, side }
    }

    /// Pure Dirichlet condition at the given side.
    pub fn dirichlet(side: Side) -> Self {
        MultiPointCondition::new(side, vec![0.0], vec![0.0])
    }

    /// `Σ |alphas[i]|`.
    pub fn norm(&self) -> f64 {
        self.alphas.iter().map(|a| a.abs()).sum()
    }

    /// The same condition with every weight multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        MultiPointCondition {
            alphas: self.alphas.iter().map(|a| a * t).collect(),
            etas: self.etas.clone(),
            side: self.side,
        }
    }

    /// Applies the boundary functional `f(±1) - Σ α f(η)` to a sampled function.
    pub fn apply(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut v = f(self.side.endpoint());
        for (a, e) in self.alphas.iter().zip(&self.etas) {
            if *a != 0.0 {
                v -= a * f(*e);
            }
        }
        v
    }

    pub fn check(&self) -> Result<()> {
        let name = match self.side {
            Side::Minus => "minus",
            Side::Plus => "plus",
        };
        if self.alphas.is_empty() {
            return Err(Error::Config(format!("bc_{name} needs at least one point")));
        }
        if self.alphas.len() != self.etas.len() {
            return Err(Error::Config(format!(
                "bc_{name}: {} alphas but {} etas",
                self.alphas.len(),
                self.etas.len()
            )));
        }
        for (&a, &e) in self.alphas.iter().zip(&self.etas) {
            if !a.is_finite() || !e.is_finite() {
                return Err(Error::Config(format!("bc_{name}: non-finite entry")));
            }
            if !(-1.0..=1.0).contains(&e) {
                return Err(Error::Config(format!("bc_{name}: eta {e} outside [-1, 1]")));
            }
            if e == self.side.endpoint() {
                return Err(Error::Config(match self.side {
                    Side::Plus => "eta on plus side equals +1".into(),
                    Side::Minus => "eta on minus side equals -1".into(),
                }));
            }
        }
        Ok(())
    }
}

/// `c0 u(-1) + c1 u'(-1) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatedCondition {
    pub c0: f64,
    pub c1: f64,
}

impl SeparatedCondition {
    /// Initial data `(u, u')` at `-1` satisfying the condition.
    pub fn initial_state(&self) -> (f64, f64) {
        (self.c1, -self.c0)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.c0.is_finite() && self.c1.is_finite()) || self.c0.abs() + self.c1.abs() == 0.0 {
            return Err(Error::Config(
                "separated condition needs |c0| + |c1| > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Boundary data at `x = -1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum MinusCondition {
    MultiPoint(MultiPointCondition),
    Separated(SeparatedCondition),
}

impl<'de> Deserialize<'de> for MinusCondition {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(de)?;
        let separated = v
            .as_object()
            .is_some_and(|o| o.contains_key("c0") || o.contains_key("c1"));
        if separated {
            serde_json::from_value(v)
                .map(MinusCondition::Separated)
                .map_err(D::Error::custom)
        } else {
            let mut mp: MultiPointCondition =
                serde_json::from_value(v).map_err(D::Error::custom)?;
            mp.side = Side::Minus;
            Ok(MinusCondition::MultiPoint(mp))
        }
    }
}

fn deserialize_plus<'de, D: Deserializer<'de>>(
    de: D,
) -> std::result::Result<MultiPointCondition, D::Error> {
    let mut mp = MultiPointCondition::deserialize(de)?;
    mp.side = Side::Plus;
    Ok(mp)
}

/// Declarative problem description, as read from a configuration file.
///
/// The optional `g` is a factor in `(x, u)`: the nonlinear equation is
/// `-u'' = lambda r(x) g(x, u) u`. The optional `f` is the right-hand side
/// of the fixed problem `-u'' = f(x, u)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(deserialize_with = "deserialize_coefficient")]
    pub r: CoefficientSpec,
    pub bc_minus: MinusCondition,
    #[serde(deserialize_with = "deserialize_plus")]
    pub bc_plus: MultiPointCondition,
    #[serde(
        default,
        deserialize_with = "deserialize_opt_coefficient",
        skip_serializing_if = "Option::is_none"
    )]
    pub g: Option<CoefficientSpec>,
    #[serde(
        default,
        deserialize_with = "deserialize_opt_coefficient",
        skip_serializing_if = "Option::is_none"
    )]
    pub f: Option<CoefficientSpec>,
}

/// A compiled, structurally valid problem instance.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub r: Coefficient,
    pub g: Option<Coefficient>,
    pub f: Option<Coefficient>,
}

impl Problem {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        if let MinusCondition::MultiPoint(m) = &spec.bc_minus {
            m.check()?;
        }
        if let MinusCondition::Separated(s) = &spec.bc_minus {
            s.check()?;
        }
        spec.bc_plus.check()?;
        let r = Coefficient::compile(&spec.r, false)?;
        let g = spec
            .g
            .as_ref()
            .map(|g| Coefficient::compile(g, true))
            .transpose()?;
        let f = spec
            .f
            .as_ref()
            .map(|f| Coefficient::compile(f, true))
            .transpose()?;
        Ok(Problem { spec, r, g, f })
    }

    /// Multi-point instance from an `r` expression and the two conditions.
    pub fn multipoint(
        r: CoefficientSpec,
        minus: (Vec<f64>, Vec<f64>),
        plus: (Vec<f64>, Vec<f64>),
    ) -> Result<Self> {
        Problem::new(ProblemSpec {
            r,
            bc_minus: MinusCondition::MultiPoint(MultiPointCondition::new(
                Side::Minus,
                minus.0,
                minus.1,
            )),
            bc_plus: MultiPointCondition::new(Side::Plus, plus.0, plus.1),
            g: None,
            f: None,
        })
    }

    /// Separated Dirichlet instance `u(±1) = 0`.
    pub fn dirichlet(r: CoefficientSpec) -> Result<Self> {
        Problem::multipoint(r, (vec![0.0], vec![0.0]), (vec![0.0], vec![0.0]))
    }

    pub fn minus_multipoint(&self) -> Option<&MultiPointCondition> {
        match &self.spec.bc_minus {
            MinusCondition::MultiPoint(m) => Some(m),
            MinusCondition::Separated(_) => None,
        }
    }

    pub fn separated(&self) -> Option<SeparatedCondition> {
        match &self.spec.bc_minus {
            MinusCondition::Separated(s) => Some(*s),
            MinusCondition::MultiPoint(_) => None,
        }
    }

    pub fn plus(&self) -> &MultiPointCondition {
        &self.spec.bc_plus
    }

    /// The same instance with all multi-point weights scaled by `t`.
    pub fn with_scaled_alphas(&self, t: f64) -> Problem {
        let mut p = self.clone();
        if let MinusCondition::MultiPoint(m) = &mut p.spec.bc_minus {
            *m = m.scaled(t);
        }
        p.spec.bc_plus = p.spec.bc_plus.scaled(t);
        p
    }

    /// The same boundary data with a different coefficient.
    pub fn with_r(&self, r: Coefficient) -> Problem {
        let mut p = self.clone();
        p.r = r;
        p
    }

    /// `|α⁻|` (zero for a separated condition) and `|α⁺|`.
    pub fn alpha_norms(&self) -> (f64, f64) {
        let minus = self.minus_multipoint().map_or(0.0, |m| m.norm());
        (minus, self.plus().norm())
    }

    /// All interior points where integration must stop: coefficient
    /// breakpoints, the multi-point nodes, and the origin.
    pub fn stop_points(&self) -> Vec<f64> {
        let mut pts = self.r.breakpoints();
        if let Some(m) = self.minus_multipoint() {
            pts.extend(m.etas.iter().copied());
        }
        pts.extend(self.plus().etas.iter().copied());
        pts.push(0.0);
        pts.retain(|p| *p > -1.0 && *p < 1.0);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// Parses a JSON problem configuration.
pub fn parse_problem(config_text: &str) -> Result<Problem> {
    let spec: ProblemSpec = serde_json::from_str(config_text).map_err(map_json_error)?;
    Problem::new(spec)
}

/// Canonical JSON form of a problem specification.
pub fn to_json(spec: &ProblemSpec) -> String {
    serde_json::to_string_pretty(spec).expect("problem spec serializes")
}

fn map_json_error(e: serde_json::Error) -> Error {
    let msg = e.to_string();
    if let Some(rest) = msg.strip_prefix("missing field `") {
        if let Some(end) = rest.find('`') {
            return Error::MissingField(rest[..end].to_string());
        }
    }
    if msg.contains("eta on plus side") {
        return Error::Config("eta on plus side equals +1".into());
    }
    Error::Config(msg)
}

/// Outcome of [`validate`]; failures are recorded, never raised.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub r_positive: bool,
    pub r_min_sampled: f64,
    pub alpha_minus_norm: Option<f64>,
    pub alpha_plus_norm: f64,
    pub minus_below_one: Option<bool>,
    pub plus_below_one: bool,
    pub a1: f64,
    pub minus_within_a1: Option<bool>,
    pub plus_within_a1: bool,
    pub g_positive: Option<bool>,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Number of uniform points used for positivity checks.
pub const VALIDATION_GRID: usize = 2001;

/// Checks positivity of `r` (and `g`) and compares `|α±|` with 1 and `a1`.
pub fn validate(problem: &Problem) -> ValidationReport {
    let mut failures = Vec::new();
    let mut r_min = f64::INFINITY;
    let mut finite = true;
    for i in 0..VALIDATION_GRID {
        let x = -1.0 + 2.0 * i as f64 / (VALIDATION_GRID - 1) as f64;
        let v = problem.r.value(x);
        if !v.is_finite() {
            finite = false;
        }
        r_min = r_min.min(v);
    }
    let r_positive = finite && r_min > 0.0;
    if !finite {
        failures.push("r not finite".to_string());
    } else if !r_positive {
        failures.push("r not positive".to_string());
    }

    let a1 = if r_positive {
        crate::bounds::compute_constants(&problem.r, crate::bounds::DEFAULT_GRID)
            .map(|b| b.a1)
            .unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    let threshold = a1 / crate::bounds::SAFETY_FACTOR;

    let alpha_minus_norm = problem.minus_multipoint().map(|m| m.norm());
    let alpha_plus_norm = problem.plus().norm();
    let minus_below_one = alpha_minus_norm.map(|n| n < 1.0);
    let plus_below_one = alpha_plus_norm < 1.0;
    if minus_below_one == Some(false) {
        failures.push("|alpha-| >= 1".into());
    }
    if !plus_below_one {
        failures.push("|alpha+| >= 1".into());
    }

    let g_positive = problem.g.as_ref().map(|g| {
        let gr = g.times(&problem.r);
        let mut ok = true;
        'outer: for i in 0..201 {
            let x = -1.0 + 2.0 * i as f64 / 200.0;
            for &u in &[-1e3, -10.0, -1.0, -0.1, 0.0, 0.1, 1.0, 10.0, 1e3] {
                let v = gr.eval_xu(x, u).v;
                if !(v.is_finite() && v > 0.0) {
                    ok = false;
                    break 'outer;
                }
            }
        }
        ok
    });
    if g_positive == Some(false) {
        failures.push("g not positive".into());
    }

    ValidationReport {
        r_positive,
        r_min_sampled: r_min,
        alpha_minus_norm,
        alpha_plus_norm,
        minus_below_one,
        plus_below_one,
        a1,
        minus_within_a1: alpha_minus_norm.map(|n| n < threshold),
        plus_within_a1: alpha_plus_norm < threshold,
        g_positive,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"{
        "r": "1",
        "bc_minus": {"alphas": [0.5], "etas": [0.0]},
        "bc_plus": {"alphas": [0.5], "etas": [0.0]}
    }"#;

    #[test]
    fn parses_basic_instance() {
        let p = parse_problem(BASIC).unwrap();
        assert_eq!(p.alpha_norms(), (0.5, 0.5));
        assert_eq!(p.plus().side, Side::Plus);
        assert_eq!(p.minus_multipoint().unwrap().side, Side::Minus);
    }

    #[test]
    fn example2_geometry() {
        let text = r#"{"r": {"kind": "expression", "body": "2 - cos(pi*x/2)"},
            "bc_minus": {"alphas": [0.2], "etas": [0]},
            "bc_plus": {"alphas": [0.2], "etas": [0]}}"#;
        let p = parse_problem(text).unwrap();
        assert!((p.r.value(1.0) - 2.0).abs() < 1e-15);
        assert_eq!(p.stop_points(), vec![0.0]);
    }

    #[test]
    fn eta_at_plus_endpoint_rejected() {
        let text = r#"{"r": "1", "bc_minus": {"alphas": [0.1], "etas": [0]},
            "bc_plus": {"alphas": [0.1], "etas": [1.0]}}"#;
        match parse_problem(text) {
            Err(Error::Config(msg)) => assert_eq!(msg, "eta on plus side equals +1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_field_reported() {
        let text = r#"{"r": "1", "bc_minus": {"alphas": [0.1], "etas": [0]}}"#;
        assert_eq!(
            parse_problem(text).unwrap_err(),
            Error::MissingField("bc_plus".into())
        );
    }

    #[test]
    fn syntax_error_reported() {
        let text = r#"{"r": "1 + * x", "bc_minus": {"alphas": [0.1], "etas": [0]},
            "bc_plus": {"alphas": [0.1], "etas": [0]}}"#;
        assert!(matches!(
            parse_problem(text),
            Err(Error::Syntax { pos: 4, .. })
        ));
    }

    #[test]
    fn separated_condition_parses() {
        let text = r#"{"r": "1", "bc_minus": {"c0": 1, "c1": 0},
            "bc_plus": {"alphas": [0.5], "etas": [0]}}"#;
        let p = parse_problem(text).unwrap();
        assert_eq!(p.separated(), Some(SeparatedCondition { c0: 1.0, c1: 0.0 }));
        let bad = r#"{"r": "1", "bc_minus": {"c0": 0, "c1": 0},
            "bc_plus": {"alphas": [0.5], "etas": [0]}}"#;
        assert!(parse_problem(bad).is_err());
    }

    #[test]
    fn round_trip() {
        let p = parse_problem(BASIC).unwrap();
        let again = parse_problem(&to_json(&p.spec)).unwrap();
        assert_eq!(p.spec, again.spec);
    }

    #[test]
    fn validation_flags() {
        let p = parse_problem(BASIC).unwrap();
        let rep = validate(&p);
        assert!(rep.ok());
        assert!((rep.a1 - 1.0).abs() < 1e-12);
        assert!(rep.plus_within_a1);

        let big = r#"{"r": "1", "bc_minus": {"alphas": [0.5], "etas": [0]},
            "bc_plus": {"alphas": [1.2], "etas": [0]}}"#;
        let rep = validate(&parse_problem(big).unwrap());
        assert!(!rep.plus_below_one);

        let neg = r#"{"r": "x", "bc_minus": {"alphas": [0.5], "etas": [0]},
            "bc_plus": {"alphas": [0.5], "etas": [0]}}"#;
        let rep = validate(&parse_problem(neg).unwrap());
        assert!(rep.failures.iter().any(|f| f == "r not positive"));
    }
}
