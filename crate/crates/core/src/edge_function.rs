//! Functions on metric graphs that are a single sinusoid of fixed frequency on every edge.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{End, MetricGraph, VertexCondition};

/// `f_e(t) = A_e cos(k t) + B_e sin(k t)` in the arclength `t` of edge `e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFunction {
    frequency: f64,
    coeffs: Vec<[f64; 2]>,
}

/// Worst violation of each defining condition, in absolute terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Residuals {
    pub continuity: f64,
    pub dirichlet: f64,
    pub neumann: f64,
    pub kirchhoff: f64,
    /// `sup |f'' + lambda f|` over a 256-point grid per edge.
    pub ode: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        [self.continuity, self.dirichlet, self.neumann, self.kirchhoff, self.ode]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

// int_0^L cos(w t) dt
fn cos_integral(w: f64, len: f64) -> f64 {
    if w == 0.0 {
        len
    } else {
        (w * len).sin() / w
    }
}

// int_0^L sin(w t) dt
fn sin_integral(w: f64, len: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        let s = (0.5 * w * len).sin();
        2.0 * s * s / w
    }
}

/// `int_0^L (A cos at + B sin at)(C cos bt + D sin bt) dt` in closed form.
fn sinusoid_product(a: f64, [ca, cb]: [f64; 2], b: f64, [cc, cd]: [f64; 2], len: f64) -> f64 {
    0.5 * ((ca * cc + cb * cd) * cos_integral(a - b, len)
        + (ca * cc - cb * cd) * cos_integral(a + b, len)
        + (ca * cd + cb * cc) * sin_integral(a + b, len)
        + (cb * cc - ca * cd) * sin_integral(a - b, len))
}

impl EdgeFunction {
    pub fn new(frequency: f64, coeffs: Vec<[f64; 2]>) -> Result<Self> {
        if !(frequency.is_finite() && frequency >= 0.0) {
            return Err(Error::InvalidArgument(format!("frequency must be >= 0, got {frequency}")));
        }
        Ok(Self { frequency, coeffs })
    }

    pub fn zero(frequency: f64, edges: usize) -> Self {
        Self { frequency, coeffs: vec![[0.0; 2]; edges] }
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn edge_count(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[[f64; 2]] {
        &self.coeffs
    }

    pub fn coeff(&self, edge: usize) -> [f64; 2] {
        self.coeffs[edge]
    }

    pub fn value(&self, edge: usize, t: f64) -> f64 {
        let [a, b] = self.coeffs[edge];
        let (s, c) = (self.frequency * t).sin_cos();
        a * c + b * s
    }

    pub fn derivative(&self, edge: usize, t: f64) -> f64 {
        let [a, b] = self.coeffs[edge];
        let (s, c) = (self.frequency * t).sin_cos();
        self.frequency * (b * c - a * s)
    }

    /// Value at the given end of an edge.
    pub fn trace(&self, g: &MetricGraph, edge: usize, end: End) -> f64 {
        match end {
            End::Tail => self.coeffs[edge][0],
            End::Head => self.value(edge, g.length(edge)),
        }
    }

    /// Derivative pointing into the edge from the given end.
    pub fn outgoing_derivative(&self, g: &MetricGraph, edge: usize, end: End) -> f64 {
        match end {
            End::Tail => self.derivative(edge, 0.0),
            End::Head => -self.derivative(edge, g.length(edge)),
        }
    }

    fn check_host(&self, g: &MetricGraph) -> Result<()> {
        if g.edge_count() != self.coeffs.len() {
            return Err(Error::DimensionMismatch { expected: g.edge_count(), got: self.coeffs.len() });
        }
        Ok(())
    }

    /// `L^2` inner product on `g`, exact for any pair of frequencies.
    pub fn inner(&self, other: &Self, g: &MetricGraph) -> Result<f64> {
        self.check_host(g)?;
        other.check_host(g)?;
        Ok((0..g.edge_count())
            .map(|e| {
                sinusoid_product(self.frequency, self.coeffs[e], other.frequency, other.coeffs[e], g.length(e))
            })
            .sum())
    }

    pub fn norm(&self, g: &MetricGraph) -> Result<f64> {
        Ok(self.inner(self, g)?.max(0.0).sqrt())
    }

    /// The derivative as an edge function of the same frequency.
    pub fn derivative_function(&self) -> Self {
        let k = self.frequency;
        Self { frequency: k, coeffs: self.coeffs.iter().map(|[a, b]| [k * b, -k * a]).collect() }
    }

    /// `sum_e int f' g'`.
    pub fn energy_inner(&self, other: &Self, g: &MetricGraph) -> Result<f64> {
        self.derivative_function().inner(&other.derivative_function(), g)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { frequency: self.frequency, coeffs: self.coeffs.iter().map(|[a, b]| [c * a, c * b]).collect() }
    }

    /// `self + c * other`; both must share the frequency.
    pub fn add_scaled(&self, other: &Self, c: f64) -> Result<Self> {
        if self.coeffs.len() != other.coeffs.len() {
            return Err(Error::DimensionMismatch { expected: self.coeffs.len(), got: other.coeffs.len() });
        }
        if (self.frequency - other.frequency).abs() > 1e-12 * self.frequency.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "cannot add sinusoids of frequencies {} and {}",
                self.frequency, other.frequency
            )));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|([a, b], [c1, d1])| [a + c * c1, b + c * d1])
            .collect();
        Ok(Self { frequency: self.frequency, coeffs })
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Checks vertex conditions and the edge equation `f'' + lambda f = 0`.
    pub fn residuals(&self, g: &MetricGraph, lambda: f64) -> Result<Residuals> {
        self.check_host(g)?;
        let mut r = Residuals::default();
        for v in 0..g.vertex_count() {
            let ends = g.incident(v);
            match g.condition(v) {
                VertexCondition::Dirichlet => {
                    for &(e, end) in ends {
                        r.dirichlet = r.dirichlet.max(self.trace(g, e, end).abs());
                    }
                }
                VertexCondition::Neumann => {
                    for &(e, end) in ends {
                        r.neumann = r.neumann.max(self.outgoing_derivative(g, e, end).abs());
                    }
                }
                VertexCondition::Kirchhoff => {
                    if let Some(&(e0, end0)) = ends.first() {
                        let v0 = self.trace(g, e0, end0);
                        for &(e, end) in &ends[1..] {
                            r.continuity = r.continuity.max((self.trace(g, e, end) - v0).abs());
                        }
                    }
                    let sum: f64 = ends.iter().map(|&(e, end)| self.outgoing_derivative(g, e, end)).sum();
                    r.kirchhoff = r.kirchhoff.max(sum.abs());
                }
            }
        }
        let k2 = self.frequency * self.frequency;
        for e in 0..g.edge_count() {
            let len = g.length(e);
            for i in 0..256 {
                let t = len * i as f64 / 255.0;
                let f = self.value(e, t);
                // f'' = -k^2 f for a sinusoid of frequency k
                r.ode = r.ode.max(((lambda - k2) * f).abs());
            }
        }
        Ok(r)
    }
}

/// Modified Gram-Schmidt in `L^2(g)`, run twice for stability.
pub fn orthonormalize(fs: &[EdgeFunction], g: &MetricGraph) -> Result<Vec<EdgeFunction>> {
    let mut out: Vec<EdgeFunction> = Vec::with_capacity(fs.len());
    for f in fs {
        let mut v = f.clone();
        for _ in 0..2 {
            for q in &out {
                let c = q.inner(&v, g)?;
                v = v.add_scaled(q, -c)?;
            }
        }
        let n = v.norm(g)?;
        if n < 1e-300 {
            return Err(Error::InvalidArgument("linearly dependent functions".into()));
        }
        out.push(v.scaled(1.0 / n));
    }
    Ok(out)
}
