//! One-dimensional Robin problems: exact interval spectra, the Dirichlet limit, eigenfunction
//! overlap bounds, and a P1 finite element solver for conformally weighted forms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

use crate::edge_function::EdgeFunction;
use crate::error::{Error, Result};
use crate::graph::{interval, MetricGraph, VertexCondition};
use crate::quadrature::gauss_legendre;

/// Robin parameter at one end of an interval. `Dirichlet` is the `rho = infinity` limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Robin {
    Finite(f64),
    Dirichlet,
}

impl Robin {
    fn validate(self) -> Result<()> {
        match self {
            Robin::Finite(r) if !(r.is_finite() && r > 0.0) => {
                Err(Error::InvalidArgument(format!("Robin parameter must be positive and finite, got {r}")))
            }
            _ => Ok(()),
        }
    }

    /// Phase angle `theta` with `k cot(theta) = rho`, zero for Dirichlet.
    fn phase(self, k: f64) -> f64 {
        match self {
            Robin::Finite(r) => k.atan2(r),
            Robin::Dirichlet => 0.0,
        }
    }
}

/// `-f'' = lambda f` on `[0, L]` with `f'(0) = rho_l f(0)` and `f'(L) = -rho_r f(L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobinInterval {
    pub length: f64,
    pub left: Robin,
    pub right: Robin,
}

#[derive(Debug, Clone, Serialize)]
pub struct RobinEigenpair {
    pub eigenvalue: f64,
    /// L^2-normalized, positive near the left end.
    pub function: EdgeFunction,
}

impl RobinInterval {
    pub fn new(length: f64, left: Robin, right: Robin) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidArgument(format!("length must be positive, got {length}")));
        }
        left.validate()?;
        right.validate()?;
        Ok(Self { length, left, right })
    }

    pub fn symmetric(length: f64, rho: f64) -> Result<Self> {
        Self::new(length, Robin::Finite(rho), Robin::Finite(rho))
    }

    pub fn dirichlet(length: f64) -> Result<Self> {
        Self::new(length, Robin::Dirichlet, Robin::Dirichlet)
    }

    /// Same interval with Dirichlet conditions at both ends.
    pub fn dirichlet_counterpart(&self) -> Self {
        Self { left: Robin::Dirichlet, right: Robin::Dirichlet, ..*self }
    }

    // host for closed-form inner products; the vertex conditions play no role there
    fn host(&self) -> MetricGraph {
        interval(self.length, VertexCondition::Dirichlet, VertexCondition::Dirichlet).expect("length validated")
    }

    /// `kL + theta_l(k) + theta_r(k)`, strictly increasing in `k`.
    pub fn phase(&self, k: f64) -> f64 {
        k * self.length + self.left.phase(k) + self.right.phase(k)
    }

    /// Worst violation of the two boundary conditions by `f` at eigenvalue `lambda`.
    pub fn boundary_residual(&self, f: &EdgeFunction) -> f64 {
        let l = self.length;
        let left = match self.left {
            Robin::Finite(r) => f.derivative(0, 0.0) - r * f.value(0, 0.0),
            Robin::Dirichlet => f.value(0, 0.0),
        };
        let right = match self.right {
            Robin::Finite(r) => f.derivative(0, l) + r * f.value(0, l),
            Robin::Dirichlet => f.value(0, l),
        };
        left.abs().max(right.abs())
    }
}

// k with phase(k) = m pi; the root lies in ((m-1) pi / L, m pi / L]
fn phase_root(iv: &RobinInterval, m: usize) -> f64 {
    let target = m as f64 * PI;
    let (mut lo, mut hi) = ((m as f64 - 1.0) * PI / iv.length, m as f64 * PI / iv.length);
    if iv.phase(hi) <= target {
        return hi;
    }
    while hi - lo > 4.0 * f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if iv.phase(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The first `count` eigenpairs, from the phase equation.
pub fn robin_spectrum(iv: &RobinInterval, count: usize) -> Result<Vec<RobinEigenpair>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let host = iv.host();
    (1..=count)
        .map(|m| {
            let k = phase_root(iv, m);
            let theta = iv.left.phase(k);
            // sin(k t + theta)
            let f = EdgeFunction::new(k, vec![[theta.sin(), theta.cos()]])?;
            let norm = f.norm(&host)?;
            Ok(RobinEigenpair { eigenvalue: k * k, function: f.scaled(1.0 / norm) })
        })
        .collect()
}

/// One line of the Robin to Dirichlet table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub rho: f64,
    pub k: usize,
    pub lambda_robin: f64,
    pub lambda_dirichlet: f64,
    pub gap: f64,
    /// `<phi_1^D, phi_1^rho>^2` for `k = 1`, otherwise the squared norm of the projection of
    /// `phi_k^D` onto `span{phi_2^rho, .., phi_K^rho}`.
    pub overlap: f64,
    /// Lower bound for `overlap` from the energy comparison.
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OverlapReport {
    pub rho: f64,
    pub n_cluster: usize,
    pub lambda_robin: Vec<f64>,
    pub lambda_dirichlet: Vec<f64>,
    pub rows: Vec<SweepRow>,
    /// `bound <= overlap <= 1` on every row.
    pub holds: bool,
}

fn sq_inner(a: &EdgeFunction, b: &EdgeFunction, host: &MetricGraph) -> Result<f64> {
    Ok(a.inner(b, host)?.powi(2))
}

/// Overlaps of the first `n_cluster` Dirichlet eigenfunctions with Robin eigenfunctions, against
/// the lower bounds obtained by evaluating the Robin form on Dirichlet eigenfunctions.
pub fn overlap_bounds(iv: &RobinInterval, n_cluster: usize) -> Result<OverlapReport> {
    let rho = match (iv.left, iv.right) {
        (Robin::Finite(a), Robin::Finite(b)) => a.min(b),
        _ => return Err(Error::InvalidArgument("overlap bounds need finite Robin parameters".into())),
    };
    if n_cluster == 0 {
        return Err(Error::InvalidArgument("cluster size must be at least 1".into()));
    }
    let host = iv.host();
    let robin = robin_spectrum(iv, n_cluster + 1)?;
    let dirichlet = robin_spectrum(&iv.dirichlet_counterpart(), n_cluster)?;
    let lr: Vec<f64> = robin.iter().map(|p| p.eigenvalue).collect();
    let ld: Vec<f64> = dirichlet.iter().map(|p| p.eigenvalue).collect();
    // both bounds need lambda_2(rho) above a and lambda_{N+1}(rho) above the cluster
    if lr[1] <= ld[0] || lr[n_cluster] <= ld[n_cluster - 1] {
        return Err(Error::ClusterNotIsolated(format!(
            "rho = {rho}: Robin eigenvalues {lr:?} do not separate Dirichlet eigenvalues {ld:?}"
        )));
    }

    let mut rows = Vec::with_capacity(n_cluster);
    let o1 = sq_inner(&dirichlet[0].function, &robin[0].function, &host)?;
    let b1 = (lr[1] - ld[0]) / (lr[1] - lr[0]);
    rows.push(row(rho, 1, lr[0], ld[0], o1, b1));
    for k in 2..=n_cluster {
        let phi = &dirichlet[k - 1].function;
        let c1 = sq_inner(phi, &robin[0].function, &host)?;
        let projected =
            robin[1..n_cluster].iter().map(|p| sq_inner(phi, &p.function, &host)).sum::<Result<f64>>()?;
        let top = lr[n_cluster];
        let bound = (lr[0] * c1 + top * (1.0 - c1) - ld[k - 1]) / (top - lr[1]);
        rows.push(row(rho, k, lr[k - 1], ld[k - 1], projected, bound));
    }
    // 1e-12 slack for rounding in overlaps that are 1 to machine precision
    let holds = rows.iter().all(|r| r.bound <= r.overlap + 1e-12 && r.overlap <= 1.0 + 1e-12);
    Ok(OverlapReport { rho, n_cluster, lambda_robin: lr, lambda_dirichlet: ld, rows, holds })
}

fn row(rho: f64, k: usize, lambda_robin: f64, lambda_dirichlet: f64, overlap: f64, bound: f64) -> SweepRow {
    SweepRow { rho, k, lambda_robin, lambda_dirichlet, gap: lambda_dirichlet - lambda_robin, overlap, bound }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub length: f64,
    pub ladder: Vec<f64>,
    pub k_max: usize,
    pub rows: Vec<SweepRow>,
    pub gaps_positive: bool,
    /// Gaps strictly decrease down the ladder for every `k`.
    pub gaps_decreasing: bool,
    pub bounds_hold: bool,
    /// Overlaps strictly increase down the ladder for every `k`.
    pub overlaps_increasing: bool,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.gaps_positive && self.gaps_decreasing && self.bounds_hold && self.overlaps_increasing
    }

    fn column(&self, k: usize) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.k == k)
    }
}

/// Symmetric Robin parameter `rho` along `ladder`, first `k_max` eigenvalues against Dirichlet.
pub fn robin_dirichlet_sweep(length: f64, ladder: &[f64], k_max: usize) -> Result<SweepReport> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("ladder must be non-empty and strictly increasing".into()));
    }
    let mut rows = Vec::new();
    for &rho in ladder {
        rows.extend(overlap_bounds(&RobinInterval::symmetric(length, rho)?, k_max)?.rows);
    }
    let mut report = SweepReport {
        length,
        ladder: ladder.to_vec(),
        k_max,
        gaps_positive: rows.iter().all(|r| r.gap > 0.0),
        bounds_hold: rows.iter().all(|r| r.bound <= r.overlap + 1e-12 && r.overlap <= 1.0 + 1e-12),
        rows,
        gaps_decreasing: true,
        overlaps_increasing: true,
    };
    let (mut gaps, mut overlaps) = (true, true);
    for k in 1..=k_max {
        let col: Vec<&SweepRow> = report.column(k).collect();
        gaps &= col.windows(2).all(|w| w[1].gap < w[0].gap);
        overlaps &= col.windows(2).all(|w| w[1].overlap > w[0].overlap);
    }
    report.gaps_decreasing = gaps;
    report.overlaps_increasing = overlaps;
    Ok(report)
}

/// Conformal factor `h` on `[0, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Uniform,
    /// `value` within `epsilon` of either end, 1 beyond `2 epsilon`, quintic smoothstep between.
    Collar { epsilon: f64, value: f64 },
}

impl Profile {
    pub fn value(&self, t: f64, length: f64) -> f64 {
        match *self {
            Profile::Uniform => 1.0,
            Profile::Collar { epsilon, value } => {
                let d = t.min(length - t).max(0.0);
                if d <= epsilon {
                    value
                } else if d >= 2.0 * epsilon {
                    1.0
                } else {
                    let s = (d - epsilon) / epsilon;
                    let step = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
                    value + (1.0 - value) * step
                }
            }
        }
    }

    fn range(&self) -> (f64, f64) {
        match *self {
            Profile::Uniform => (1.0, 1.0),
            Profile::Collar { value, .. } => (value.min(1.0), value.max(1.0)),
        }
    }
}

/// `Q(f) = int h^{n-2} f'^2 + rho_l f(0)^2 + rho_r f(L)^2` against `|f|^2 = int h^n f^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedForm1D {
    pub n: u32,
    pub length: f64,
    pub profile: Profile,
    pub rho_bar: [f64; 2],
    /// Starting number of elements; refinement doubles it.
    pub elements: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FemSpectrum {
    /// Richardson extrapolation of the two finest meshes.
    pub eigenvalues: Vec<f64>,
    /// Raw eigenvalues on the finest mesh.
    pub finest: Vec<f64>,
    pub elements: usize,
    /// Largest change between the last two meshes.
    pub last_change: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormEquivalence {
    pub samples: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `min h^{n/2}` and `max h^{n/2}`.
    pub lower: f64,
    pub upper: f64,
}

impl NormEquivalence {
    pub fn holds(&self) -> bool {
        self.lower * (1.0 - 1e-12) <= self.min_ratio && self.max_ratio <= self.upper * (1.0 + 1e-12)
    }
}

// P1 stiffness kept per element so the pivot recursion never forms the cancelling row sums
struct Pencil {
    /// `int h^{n-2} / len^2` on each element.
    stiffness: Vec<f64>,
    rho: [f64; 2],
    mass_diag: Vec<f64>,
    mass_off: Vec<f64>,
}

impl Pencil {
    /// Eigenvalues of the pencil below `sigma`, counted as negative pivots of `K - sigma M`.
    ///
    /// With `beta_i = -(K - sigma M)_{i,i+1}` the pivots split as `d_i = beta_i + c_i` where
    /// `c_i = gamma_i + beta_{i-1} c_{i-1} / d_{i-1}` only involves small quantities.
    fn count_below(&self, sigma: f64) -> usize {
        let m = self.stiffness.len();
        let beta = |i: usize| if i < m { self.stiffness[i] + sigma * self.mass_off[i] } else { 0.0 };
        let mut count = 0;
        let (mut c, mut d) = (0.0, 1.0);
        for i in 0..=m {
            let mut gamma = -sigma * self.mass_diag[i];
            if i > 0 {
                gamma -= sigma * self.mass_off[i - 1];
            }
            if i < m {
                gamma -= sigma * self.mass_off[i];
            }
            if i == 0 {
                gamma += self.rho[0];
            }
            if i == m {
                gamma += self.rho[1];
            }
            c = if i == 0 { gamma } else { gamma + beta(i - 1) * c / d };
            d = beta(i) + c;
            if d == 0.0 {
                d = -f64::EPSILON * beta(i).abs().max(f64::MIN_POSITIVE);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn mass_positive(&self) -> bool {
        let mut d = 1.0;
        for i in 0..self.mass_diag.len() {
            d = if i == 0 { self.mass_diag[0] } else { self.mass_diag[i] - self.mass_off[i - 1].powi(2) / d };
            if d <= 0.0 {
                return false;
            }
        }
        true
    }

    fn mass_quad(&self, v: &[f64]) -> f64 {
        let diag: f64 = self.mass_diag.iter().zip(v).map(|(d, x)| d * x * x).sum();
        diag + 2.0 * self.mass_off.iter().zip(v.windows(2)).map(|(b, w)| b * w[0] * w[1]).sum::<f64>()
    }
}

impl WeightedForm1D {
    pub fn new(n: u32, length: f64, profile: Profile, rho_bar: [f64; 2]) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("dimension parameter must be >= 2, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidArgument(format!("length must be positive, got {length}")));
        }
        if rho_bar.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidArgument(format!("boundary weights must be positive, got {rho_bar:?}")));
        }
        if let Profile::Collar { epsilon, value } = profile {
            if !(epsilon > 0.0 && 4.0 * epsilon <= length) {
                return Err(Error::InvalidArgument(format!("collar width {epsilon} must lie in (0, L/4]")));
            }
            if !(value.is_finite() && value >= 1.0) {
                return Err(Error::InvalidArgument(format!("profile must be >= 1, got boundary value {value}")));
            }
        }
        // resolve the collar with at least 8 elements
        let elements = match profile {
            Profile::Uniform => 64,
            Profile::Collar { epsilon, .. } => ((8.0 * length / epsilon).ceil() as usize).next_power_of_two(),
        };
        Ok(Self { n, length, profile, rho_bar, elements })
    }

    /// Conformal collar with `h = (rho_bar / rho)^{1/(n-1)}` at both ends, so the Robin
    /// parameter `rho` of the conformal metric acts as `rho_bar` on the background.
    pub fn collar(n: u32, length: f64, rho: f64, rho_bar: f64, epsilon: f64) -> Result<Self> {
        if !(rho > 0.0 && rho_bar > rho) {
            return Err(Error::InvalidArgument(format!("need 0 < rho < rho_bar, got {rho}, {rho_bar}")));
        }
        let value = (rho_bar / rho).powf(1.0 / (n as f64 - 1.0));
        Self::new(n, length, Profile::Collar { epsilon, value }, [rho_bar; 2])
    }

    // stiffness and mass on `m` equal elements, 4-point Gauss per element
    fn assemble(&self, m: usize) -> Pencil {
        let (gx, gw) = gauss_legendre(4);
        let h = self.length / m as f64;
        let mut p = Pencil {
            stiffness: vec![0.0; m],
            rho: self.rho_bar,
            mass_diag: vec![0.0; m + 1],
            mass_off: vec![0.0; m],
        };
        let (ns, nm) = (self.n as i32 - 2, self.n as i32);
        for e in 0..m {
            let a = e as f64 * h;
            let (mut ws, mut m00, mut m01, mut m11) = (0.0, 0.0, 0.0, 0.0);
            for (x, w) in gx.iter().zip(&gw) {
                let s = 0.5 * (x + 1.0);
                let hv = self.profile.value(a + s * h, self.length);
                let wq = 0.5 * w * h;
                ws += wq * hv.powi(ns);
                let mw = wq * hv.powi(nm);
                m00 += mw * (1.0 - s) * (1.0 - s);
                m01 += mw * (1.0 - s) * s;
                m11 += mw * s * s;
            }
            p.stiffness[e] = ws / (h * h);
            p.mass_diag[e] += m00;
            p.mass_diag[e + 1] += m11;
            p.mass_off[e] = m01;
        }
        p
    }

    fn mesh_eigenvalues(&self, m: usize, count: usize) -> Result<Vec<f64>> {
        let p = self.assemble(m);
        if !p.mass_positive() {
            return Err(Error::Verification("assembled mass matrix is indefinite".into()));
        }
        let mut hi = 1.0;
        while p.count_below(hi) < count {
            hi *= 2.0;
        }
        (1..=count)
            .map(|j| {
                let (mut lo, mut up) = (0.0, hi);
                while up - lo > 1e-15 * up {
                    let mid = 0.5 * (lo + up);
                    if p.count_below(mid) >= j {
                        up = mid;
                    } else {
                        lo = mid;
                    }
                }
                Ok(0.5 * (lo + up))
            })
            .collect()
    }

    /// First `count` eigenvalues, doubling the mesh until they move by less than `1e-7`.
    pub fn spectrum(&self, count: usize) -> Result<FemSpectrum> {
        self.spectrum_to(count, 1e-7)
    }

    pub fn spectrum_to(&self, count: usize, tol: f64) -> Result<FemSpectrum> {
        if count == 0 {
            return Err(Error::InvalidArgument("count must be at least 1".into()));
        }
        let mut m = self.elements;
        let mut prev = self.mesh_eigenvalues(m, count)?;
        loop {
            m *= 2;
            let next = self.mesh_eigenvalues(m, count)?;
            let change = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if change < tol {
                let eigenvalues = prev.iter().zip(&next).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
                return Ok(FemSpectrum { eigenvalues, finest: next, elements: m, last_change: change });
            }
            if m > 1 << 22 {
                return Err(Error::NoConvergence { iterations: m, residual: change });
            }
            prev = next;
        }
    }

    /// Eigenvalues on a fixed mesh, for convergence studies.
    pub fn spectrum_on_mesh(&self, elements: usize, count: usize) -> Result<Vec<f64>> {
        if elements == 0 || count == 0 || count > elements + 1 {
            return Err(Error::InvalidArgument(format!("cannot take {count} eigenvalues on {elements} elements")));
        }
        self.mesh_eigenvalues(elements, count)
    }

    /// Ratios `|f|_h / |f|` over random P1 functions, against the pointwise weight extremes.
    pub fn norm_equivalence(&self, samples: usize, seed: u64) -> Result<NormEquivalence> {
        let m = self.elements;
        let weighted = self.assemble(m);
        let plain = Self { profile: Profile::Uniform, ..*self }.assemble(m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for s in 0..samples {
            let v: Vec<f64> = if s % 2 == 0 {
                (0..=m).map(|_| rng.random_range(-1.0..1.0)).collect()
            } else {
                // concentrated near an end, where the weight differs most
                let width = rng.random_range(1..=m / 8 + 1);
                (0..=m).map(|i| if i < width { rng.random_range(-1.0..1.0) } else { 0.0 }).collect()
            };
            let r = (weighted.mass_quad(&v) / plain.mass_quad(&v)).sqrt();
            if r.is_finite() {
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        let (a, b) = self.profile.range();
        let p = self.n as f64 / 2.0;
        Ok(NormEquivalence { samples, min_ratio: lo, max_ratio: hi, lower: a.powf(p), upper: b.powf(p) })
    }
}

/// Gap between the collar family and its limit Robin spectrum along a halving ladder of widths.
#[derive(Debug, Clone, Serialize)]
pub struct CollarConvergence {
    pub epsilons: Vec<f64>,
    pub limit: Vec<f64>,
    pub gaps: Vec<f64>,
    /// `gaps[i] / gaps[i + 1]`.
    pub ratios: Vec<f64>,
}

pub fn collar_convergence(
    n: u32,
    length: f64,
    rho: f64,
    rho_bar: f64,
    epsilons: &[f64],
    count: usize,
) -> Result<CollarConvergence> {
    let limit: Vec<f64> = robin_spectrum(&RobinInterval::symmetric(length, rho_bar)?, count)?
        .iter()
        .map(|p| p.eigenvalue)
        .collect();
    let gaps = epsilons
        .iter()
        .map(|&eps| {
            let s = WeightedForm1D::collar(n, length, rho, rho_bar, eps)?.spectrum_to(count, 1e-9)?;
            Ok(s.eigenvalues.iter().zip(&limit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let ratios = gaps.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(CollarConvergence { epsilons: epsilons.to_vec(), limit, gaps, ratios })
}
