//! Unit-mass bump functions on [0, 1] used to perturb edge metrics.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gl64_integrate, unit_rule};

/// Shape of a nonnegative bump with integral one, supported in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BumpKind {
    /// `c exp(-1 / (t (1 - t)))`, smooth and flat at both ends.
    #[default]
    Exponential,
    /// `30 t^2 (1 - t)^2`.
    Polynomial,
}

const CDF_PANELS: usize = 32;

struct ExpTables {
    scale: f64,
    /// cumulative integral at panel starts, `CDF_PANELS + 1` entries
    cumulative: Vec<f64>,
}

fn raw_exp(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

fn exp_tables() -> &'static ExpTables {
    static T: OnceLock<ExpTables> = OnceLock::new();
    T.get_or_init(|| {
        let mass = unit_rule().integrate(0.0, 1.0, raw_exp);
        let scale = 1.0 / mass;
        let h = 1.0 / CDF_PANELS as f64;
        let mut cumulative = Vec::with_capacity(CDF_PANELS + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for p in 0..CDF_PANELS {
            let a = p as f64 * h;
            acc += scale * gl64_integrate(a, a + h, raw_exp);
            cumulative.push(acc);
        }
        // pin the total to exactly one
        let total = acc;
        for c in &mut cumulative {
            *c /= total;
        }
        ExpTables { scale: scale / total, cumulative }
    })
}

impl BumpKind {
    pub fn value(self, t: f64) -> f64 {
        match self {
            BumpKind::Exponential => exp_tables().scale * raw_exp(t),
            BumpKind::Polynomial => {
                if (0.0..=1.0).contains(&t) {
                    30.0 * t * t * (1.0 - t) * (1.0 - t)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        match self {
            BumpKind::Exponential => {
                if t <= 0.0 || t >= 1.0 {
                    return 0.0;
                }
                let s = t * (1.0 - t);
                self.value(t) * (1.0 - 2.0 * t) / (s * s)
            }
            BumpKind::Polynomial => {
                if (0.0..=1.0).contains(&t) {
                    60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
                } else {
                    0.0
                }
            }
        }
    }

    /// `int_0^t phi`, clamped to [0, 1] outside the support.
    pub fn cdf(self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        match self {
            BumpKind::Exponential => {
                let tables = exp_tables();
                let h = 1.0 / CDF_PANELS as f64;
                let p = ((t / h) as usize).min(CDF_PANELS - 1);
                let a = p as f64 * h;
                tables.cumulative[p] + gl64_integrate(a, t, |s| self.value(s))
            }
            BumpKind::Polynomial => t * t * t * (10.0 - 15.0 * t + 6.0 * t * t),
        }
    }

    /// `max phi`, attained at t = 1/2.
    pub fn sup(self) -> f64 {
        self.value(0.5)
    }
}

/// One bump per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpFamily {
    kinds: Vec<BumpKind>,
}

impl BumpFamily {
    pub fn uniform(kind: BumpKind, edges: usize) -> Self {
        Self { kinds: vec![kind; edges] }
    }

    pub fn new(kinds: Vec<BumpKind>) -> Self {
        Self { kinds }
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, edge: usize) -> BumpKind {
        self.kinds[edge]
    }

    pub fn kinds(&self) -> &[BumpKind] {
        &self.kinds
    }

    /// Checks that `1 + x_e phi_e > 0` everywhere on each edge.
    pub fn check_positive(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.kinds.len() {
            return Err(Error::DimensionMismatch { expected: self.kinds.len(), got: x.len() });
        }
        for (e, (&xe, kind)) in x.iter().zip(&self.kinds).enumerate() {
            let min_value = if xe >= 0.0 { 1.0 } else { 1.0 + xe * kind.sup() };
            if !(min_value > 0.0) || !xe.is_finite() {
                return Err(Error::NonPositiveMetric { edge: e, min_value });
            }
        }
        Ok(())
    }
}
