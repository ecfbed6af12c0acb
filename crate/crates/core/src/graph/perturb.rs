//! Perturbation points `x` of `G_N` and the density transport onto the perturbed graph.

use serde::{Deserialize, Serialize};

use super::{complete_pendant, MetricGraph, PendantLayout};
use crate::bump::{BumpFamily, BumpKind};
use crate::edge_function::EdgeFunction;
use crate::error::{Error, Result};
use crate::quadrature::unit_rule;

/// A point `x` in the `N(N+1)/2`-dimensional metric parameter space of `G_N`.
///
/// Edge `e` carries the metric density `1 + x_e phi_e(t)` on `[0, 1]`, so its length is
/// `1 + x_e`. Entries are stored in [`PendantLayout`] edge order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPoint {
    n: usize,
    x: Vec<f64>,
    bumps: BumpFamily,
}

impl PerturbationPoint {
    pub fn new(n: usize, x: Vec<f64>, bumps: BumpFamily) -> Result<Self> {
        let layout = PendantLayout::new(n)?;
        if x.len() != layout.edge_count() {
            return Err(Error::DimensionMismatch { expected: layout.edge_count(), got: x.len() });
        }
        if bumps.len() != x.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: bumps.len() });
        }
        bumps.check_positive(&x)?;
        Ok(Self { n, x, bumps })
    }

    /// `x` with the default exponential bump on every edge.
    pub fn from_vector(n: usize, x: Vec<f64>) -> Result<Self> {
        let m = x.len();
        Self::new(n, x, BumpFamily::uniform(BumpKind::default(), m))
    }

    pub fn from_parts(n: usize, x_interior: &[f64], x_pendant: &[f64]) -> Result<Self> {
        let layout = PendantLayout::new(n)?;
        if x_interior.len() != layout.interior_count() {
            return Err(Error::DimensionMismatch {
                expected: layout.interior_count(),
                got: x_interior.len(),
            });
        }
        if x_pendant.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x_pendant.len() });
        }
        let x = x_interior.iter().chain(x_pendant).copied().collect();
        Self::from_vector(n, x)
    }

    pub fn zero(n: usize) -> Result<Self> {
        let m = PendantLayout::new(n)?.edge_count();
        Self::from_vector(n, vec![0.0; m])
    }

    /// The coordinate direction `X_k` (pendant edge `k`, 0-based).
    pub fn pendant_direction(n: usize, k: usize) -> Result<Self> {
        let layout = PendantLayout::new(n)?;
        if k >= n {
            return Err(Error::InvalidArgument(format!("pendant index {k} out of range")));
        }
        let mut x = vec![0.0; layout.edge_count()];
        x[layout.pendant_edge(k)] = 1.0;
        Self::from_vector(n, x)
    }

    /// The coordinate direction `X_ij` (interior edge between `v_i` and `v_j`, 0-based).
    pub fn interior_direction(n: usize, i: usize, j: usize) -> Result<Self> {
        let layout = PendantLayout::new(n)?;
        if i == j || i >= n || j >= n {
            return Err(Error::InvalidArgument(format!("interior pair ({i}, {j}) out of range")));
        }
        let mut x = vec![0.0; layout.edge_count()];
        x[layout.interior_edge(i, j)] = 1.0;
        Self::from_vector(n, x)
    }

    pub fn with_bumps(mut self, bumps: BumpFamily) -> Result<Self> {
        if bumps.len() != self.x.len() {
            return Err(Error::DimensionMismatch { expected: self.x.len(), got: bumps.len() });
        }
        bumps.check_positive(&self.x)?;
        self.bumps = bumps;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn layout(&self) -> PendantLayout {
        PendantLayout { n: self.n }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn x_interior(&self) -> &[f64] {
        &self.x[..self.layout().interior_count()]
    }

    pub fn x_pendant(&self) -> &[f64] {
        &self.x[self.layout().interior_count()..]
    }

    pub fn bumps(&self) -> &BumpFamily {
        &self.bumps
    }

    pub fn norm(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `s * x` with the same bumps.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let x = self.x.iter().map(|v| s * v).collect();
        Self::new(self.n, x, self.bumps.clone())
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        self.x.iter().map(|v| 1.0 + v).collect()
    }

    /// The perturbed graph: `G_N` with lengths `1 + x_e`.
    pub fn graph(&self) -> Result<MetricGraph> {
        complete_pendant(self.n)?.with_lengths(&self.edge_lengths())
    }

    /// Metric density `1 + x_e phi_e(t)`.
    pub fn density(&self, edge: usize, t: f64) -> f64 {
        1.0 + self.x[edge] * self.bumps.kind(edge).value(t)
    }

    pub fn density_derivative(&self, edge: usize, t: f64) -> f64 {
        self.x[edge] * self.bumps.kind(edge).derivative(t)
    }

    /// Arclength on the perturbed edge, `t + x_e Phi_e(t)`.
    pub fn arclength(&self, edge: usize, t: f64) -> f64 {
        t + self.x[edge] * self.bumps.kind(edge).cdf(t)
    }

    /// Inverse of [`arclength`](Self::arclength) on `[0, 1 + x_e]`.
    pub fn arclength_inverse(&self, edge: usize, s: f64) -> f64 {
        let len = 1.0 + self.x[edge];
        if s <= 0.0 {
            return 0.0;
        }
        if s >= len {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut t = s / len;
        for _ in 0..100 {
            let r = self.arclength(edge, t) - s;
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            if r.abs() < 1e-15 {
                break;
            }
            // safeguarded Newton; the derivative is the density
            let next = t - r / self.density(edge, t);
            t = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-16 {
                break;
            }
        }
        t
    }

    /// `I_gamma^{-1} g` sampled at the unit-rule nodes of every unit edge, concatenated in
    /// edge order: `g_e(arclength(t)) * density(t)^{1/2}`.
    pub fn pull_back_samples(&self, g: &EdgeFunction) -> Result<Vec<f64>> {
        if g.edge_count() != self.x.len() {
            return Err(Error::DimensionMismatch { expected: self.x.len(), got: g.edge_count() });
        }
        let rule = unit_rule();
        let mut out = Vec::with_capacity(self.x.len() * rule.nodes.len());
        for e in 0..self.x.len() {
            for &t in &rule.nodes {
                out.push(g.value(e, self.arclength(e, t)) * self.density(e, t).sqrt());
            }
        }
        Ok(out)
    }

    /// The transported form of a function on the unit graph,
    /// `sum_e int_0^1 |(f gamma^{-1/2})'|^2 gamma^{-1} dt`.
    pub fn transported_energy(&self, f: &EdgeFunction) -> Result<f64> {
        if f.edge_count() != self.x.len() {
            return Err(Error::DimensionMismatch { expected: self.x.len(), got: f.edge_count() });
        }
        let rule = unit_rule();
        let mut total = 0.0;
        for e in 0..self.x.len() {
            total += rule.integrate(0.0, 1.0, |t| {
                let g = self.density(e, t);
                let dg = self.density_derivative(e, t);
                let d = f.derivative(e, t) * g.powf(-0.5) - 0.5 * f.value(e, t) * dg * g.powf(-1.5);
                d * d / g
            });
        }
        Ok(total)
    }
}

/// A function on a graph sampled at the unit-rule nodes mapped onto each edge.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub lengths: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub derivatives: Vec<Vec<f64>>,
}

impl SampledFunction {
    pub fn norm_squared(&self) -> f64 {
        self.integrate(|v, _| v * v)
    }

    /// `sum_e int |f'|^2`.
    pub fn energy(&self) -> f64 {
        self.integrate(|_, d| d * d)
    }

    fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let w = &unit_rule().weights;
        self.lengths
            .iter()
            .zip(self.values.iter().zip(&self.derivatives))
            .map(|(len, (vs, ds))| {
                len * vs.iter().zip(ds).zip(w).map(|((v, d), w)| w * f(*v, *d)).sum::<f64>()
            })
            .sum()
    }
}

/// `I_gamma f` on the perturbed graph: `(I f)_e(arclength(t)) = f_e(t) gamma_e(t)^{-1/2}`,
/// sampled with its arclength derivative at quadrature nodes of each perturbed edge.
pub fn transport_density(f: &EdgeFunction, p: &PerturbationPoint) -> Result<SampledFunction> {
    if f.edge_count() != p.x.len() {
        return Err(Error::InvalidArgument(format!(
            "function lives on a graph with {} edges, perturbation has {}",
            f.edge_count(),
            p.x.len()
        )));
    }
    let rule = unit_rule();
    let lengths = p.edge_lengths();
    let mut values = Vec::with_capacity(lengths.len());
    let mut derivatives = Vec::with_capacity(lengths.len());
    for (e, &len) in lengths.iter().enumerate() {
        let mut vs = Vec::with_capacity(rule.nodes.len());
        let mut ds = Vec::with_capacity(rule.nodes.len());
        for &node in &rule.nodes {
            let t = p.arclength_inverse(e, node * len);
            let g = p.density(e, t);
            let dg = p.density_derivative(e, t);
            vs.push(f.value(e, t) * g.powf(-0.5));
            ds.push((f.derivative(e, t) * g.powf(-0.5) - 0.5 * f.value(e, t) * dg * g.powf(-1.5)) / g);
        }
        values.push(vs);
        derivatives.push(ds);
    }
    Ok(SampledFunction { lengths, values, derivatives })
}
