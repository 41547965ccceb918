//! Registered continuous test functions on `[0,1]`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Registered function names with parameters, as they appear in configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum FunctionSpec {
    /// `x`
    Identity,
    /// `x^2`
    Square,
    /// `x^p`, `p >= 1`
    Power { p: f64 },
    /// `cos(2π k x)`
    Cos2pi {
        #[serde(default = "one")]
        freq: u32,
    },
    /// `sin(2π k x)`
    Sin2pi {
        #[serde(default = "one")]
        freq: u32,
    },
    Constant { c: f64 },
}

fn one() -> u32 {
    1
}

/// How fast a function may change: used to pick ball radii.
#[derive(Clone, Debug, PartialEq)]
pub enum Modulus {
    Lipschitz(f64),
    /// `(ε, σ)` pairs: `ρ(x,y) < σ ⇒ |f(x) − f(y)| < ε`.
    Table(Vec<(f64, f64)>),
}

impl Modulus {
    /// A radius `σ > 0` with oscillation below `eps` on `σ`-balls, if the
    /// modulus provides one.
    pub fn radius_for(&self, eps: f64) -> Option<f64> {
        match self {
            Modulus::Lipschitz(l) if *l <= 0.0 => Some(f64::INFINITY),
            Modulus::Lipschitz(l) => Some(eps / l),
            Modulus::Table(rows) => rows
                .iter()
                .filter(|(e, _)| *e <= eps)
                .map(|&(_, s)| s)
                .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s)))),
        }
    }
}

/// A continuous function with a modulus of continuity and, optionally, its
/// integral against the reference measure.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    modulus: Modulus,
    reference: Option<f64>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("modulus", &self.modulus)
            .field("reference", &self.reference)
            .finish()
    }
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        modulus: Modulus,
        reference: Option<f64>,
    ) -> Self {
        TestFunction {
            name: name.into(),
            eval: Arc::new(eval),
            modulus,
            reference,
        }
    }

    /// Looks up a registered function; reference integrals are over `[0,1]`
    /// with Lebesgue measure.
    pub fn registered(spec: &FunctionSpec) -> Result<Self> {
        Ok(match *spec {
            FunctionSpec::Identity => {
                TestFunction::new("identity", |x| x, Modulus::Lipschitz(1.0), Some(0.5))
            }
            FunctionSpec::Square => {
                TestFunction::new("square", |x| x * x, Modulus::Lipschitz(2.0), Some(1.0 / 3.0))
            }
            FunctionSpec::Power { p } => {
                if !(p >= 1.0 && p.is_finite()) {
                    return Err(invalid(format!("power exponent {p} must be >= 1")));
                }
                TestFunction::new(
                    format!("power({p})"),
                    move |x: f64| x.abs().powf(p),
                    Modulus::Lipschitz(p),
                    Some(1.0 / (p + 1.0)),
                )
            }
            FunctionSpec::Cos2pi { freq } => {
                let k = freq as f64;
                TestFunction::new(
                    format!("cos2pi({freq})"),
                    move |x: f64| (2.0 * PI * k * x).cos(),
                    Modulus::Lipschitz(2.0 * PI * k),
                    Some(if freq == 0 { 1.0 } else { 0.0 }),
                )
            }
            FunctionSpec::Sin2pi { freq } => {
                let k = freq as f64;
                TestFunction::new(
                    format!("sin2pi({freq})"),
                    move |x: f64| (2.0 * PI * k * x).sin(),
                    Modulus::Lipschitz(2.0 * PI * k),
                    Some(0.0),
                )
            }
            FunctionSpec::Constant { c } => {
                TestFunction::new(format!("constant({c})"), move |_| c, Modulus::Lipschitz(0.0), Some(c))
            }
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn reference_integral(&self) -> Option<f64> {
        self.reference
    }

    pub fn without_reference(mut self) -> Self {
        self.reference = None;
        self
    }
}
