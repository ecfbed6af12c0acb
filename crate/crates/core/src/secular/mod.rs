//! Laplacian eigenvalues and eigenspaces of metric graphs.
//!
//! On every edge an eigenfunction with eigenvalue `k^2 > 0` is `A cos kt + B sin kt`, so the
//! vertex conditions give a `2|E| x 2|E|` linear system in `k` (the secular matrix).
//! Eigenvalues are located with an exact counting function instead of scanning the smallest
//! singular value: for `k` away from the Dirichlet spectra of single edges,
//!
//! `#{lambda_j < k^2} = sum_e #{m >= 1 : m pi < k L_e} + n_+(M(k))`
//!
//! where `M(k)` is the Dirichlet-to-Neumann matrix on the non-Dirichlet vertices. `M` is
//! monotone in `k`, so bisection on the count brackets every eigenvalue and its jump is the
//! multiplicity, even for clusters far tighter than any scan step.

pub mod reference;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::edge_function::{orthonormalize, EdgeFunction};
use crate::error::{Error, Result};
use crate::graph::{End, MetricGraph, VertexCondition};
use crate::linalg::{positive_inertia, smallest_right_singular_vectors};

/// Scan parameters for [`find_eigenvalues`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    /// Upper bound on the initial grid step in `k`; the effective step is
    /// `min(pi / (4 L_max), scan_step)`.
    pub scan_step: f64,
    /// Eigenvalues closer than this (in `lambda`) are reported as one entry.
    pub merge_tol: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { scan_step: 0.1, merge_tol: 1e-9 }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scan_step.is_finite() && self.scan_step > 0.0) {
            return Err(Error::InvalidArgument(format!("scan step must be positive, got {}", self.scan_step)));
        }
        if !(self.merge_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("merge tolerance must be >= 0, got {}", self.merge_tol)));
        }
        Ok(())
    }
}

/// One distinct eigenvalue with its eigenspace.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralEntry {
    pub eigenvalue: f64,
    pub multiplicity: usize,
    /// The individually bracketed values merged into this entry (length `multiplicity`).
    pub raw: Vec<f64>,
    /// `L^2`-orthonormal basis.
    #[serde(skip)]
    pub eigenspace: Vec<EdgeFunction>,
    /// Largest secular singular value used for the eigenspace, relative to the largest one.
    pub null_singular: f64,
    /// Next singular value after the eigenspace block, relative to the largest one.
    pub gap_singular: f64,
}

/// Constants of the cluster hypothesis: `lambda_N + delta <= lambda_{N+1} <= M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisData {
    pub n: usize,
    pub delta: f64,
    pub m: f64,
}

/// Eigenvalues in a window, ascending, with eigenspaces.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralCluster {
    pub window: (f64, f64),
    pub entries: Vec<SpectralEntry>,
    pub hypothesis: Option<HypothesisData>,
}

impl SpectralCluster {
    /// Eigenvalues repeated according to multiplicity, ascending.
    pub fn expanded(&self) -> Vec<f64> {
        self.entries.iter().flat_map(|e| e.raw.iter().copied()).collect()
    }

    pub fn distinct(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.eigenvalue).collect()
    }

    /// Total multiplicity.
    pub fn count(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    /// Entries with eigenvalue in `[lo, hi]`.
    pub fn restricted(&self, lo: f64, hi: f64) -> SpectralCluster {
        SpectralCluster {
            window: (lo, hi),
            entries: self.entries.iter().filter(|e| e.eigenvalue >= lo && e.eigenvalue <= hi).cloned().collect(),
            hypothesis: self.hypothesis,
        }
    }

    /// All eigenfunctions, ordered like [`expanded`](Self::expanded).
    pub fn eigenfunctions(&self) -> Vec<&EdgeFunction> {
        self.entries.iter().flat_map(|e| e.eigenspace.iter()).collect()
    }

    pub fn with_hypothesis(mut self, data: HypothesisData) -> Self {
        self.hypothesis = Some(data);
        self
    }
}

/// The secular matrix at frequency `k`: one row per vertex condition, unknowns `(A_e, B_e)`
/// in columns `2e`, `2e + 1`.
pub fn secular_matrix(g: &MetricGraph, k: f64) -> Result<DMatrix<f64>> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidArgument(format!("frequency must be positive, got {k}")));
    }
    let n = 2 * g.edge_count();
    let mut m = DMatrix::zeros(n, n);
    // trace and outgoing derivative / k of an edge end as (coef of A, coef of B)
    let trace = |e: usize, end: End| -> [f64; 2] {
        match end {
            End::Tail => [1.0, 0.0],
            End::Head => {
                let (s, c) = (k * g.length(e)).sin_cos();
                [c, s]
            }
        }
    };
    let flux = |e: usize, end: End| -> [f64; 2] {
        match end {
            End::Tail => [0.0, 1.0],
            End::Head => {
                let (s, c) = (k * g.length(e)).sin_cos();
                [s, -c]
            }
        }
    };
    let mut row = 0;
    for v in 0..g.vertex_count() {
        let ends = g.incident(v);
        match g.condition(v) {
            VertexCondition::Dirichlet | VertexCondition::Neumann => {
                let &(e, end) = &ends[0];
                let c = if g.condition(v) == VertexCondition::Dirichlet { trace(e, end) } else { flux(e, end) };
                m[(row, 2 * e)] += c[0];
                m[(row, 2 * e + 1)] += c[1];
                row += 1;
            }
            VertexCondition::Kirchhoff => {
                if ends.is_empty() {
                    continue;
                }
                let (e0, end0) = ends[0];
                let t0 = trace(e0, end0);
                for &(e, end) in &ends[1..] {
                    let t = trace(e, end);
                    m[(row, 2 * e0)] += t0[0];
                    m[(row, 2 * e0 + 1)] += t0[1];
                    m[(row, 2 * e)] -= t[0];
                    m[(row, 2 * e + 1)] -= t[1];
                    row += 1;
                }
                for &(e, end) in ends {
                    let f = flux(e, end);
                    m[(row, 2 * e)] += f[0];
                    m[(row, 2 * e + 1)] += f[1];
                }
                row += 1;
            }
        }
    }
    debug_assert_eq!(row, n);
    Ok(m)
}

/// `#{m >= 1 : m pi < k L}` decided consistently with the sign of `sin(kL)`.
fn edge_dirichlet_count(kl: f64) -> usize {
    let r = kl / PI;
    let n = r.round();
    if (r - n).abs() < 1e-6 && n >= 1.0 {
        // close to a pole: trust the sign of sin, which is what M(k) sees
        let s = kl.sin() * if n as i64 % 2 == 0 { 1.0 } else { -1.0 };
        if s > 0.0 {
            n as usize
        } else {
            n as usize - 1
        }
    } else {
        (r.ceil() as usize).saturating_sub(1)
    }
}

/// Dirichlet-to-Neumann matrix on the non-Dirichlet vertices at frequency `k`.
fn dtn_matrix(g: &MetricGraph, k: f64) -> DMatrix<f64> {
    let mut index = vec![usize::MAX; g.vertex_count()];
    let mut free = 0;
    for (v, slot) in index.iter_mut().enumerate() {
        if g.condition(v) != VertexCondition::Dirichlet {
            *slot = free;
            free += 1;
        }
    }
    let mut m = DMatrix::zeros(free, free);
    for e in 0..g.edge_count() {
        let (s, c) = (k * g.length(e)).sin_cos();
        let (a, b) = g.endpoints(e);
        let (ia, ib) = (index[a], index[b]);
        let diag = -k * c / s;
        let off = k / s;
        if ia != usize::MAX {
            m[(ia, ia)] += diag;
            if ib != usize::MAX {
                m[(ia, ib)] += off;
            }
        }
        if ib != usize::MAX {
            m[(ib, ib)] += diag;
            if ia != usize::MAX {
                m[(ib, ia)] += off;
            }
        }
    }
    m
}

/// Number of eigenvalues strictly below `k^2`.
pub fn eigenvalue_count(g: &MetricGraph, k: f64) -> usize {
    if k <= 0.0 {
        return 0;
    }
    let edges: usize = (0..g.edge_count()).map(|e| edge_dirichlet_count(k * g.length(e))).sum();
    edges + positive_inertia(&dtn_matrix(g, k))
}

fn check_solvable(g: &MetricGraph) -> Result<()> {
    let bad = g.components_without_dirichlet();
    if let Some(c) = bad.first() {
        return Err(Error::InvalidGraph(format!(
            "component containing vertex {} has no Dirichlet vertex (zero eigenvalue is not supported)",
            g.vertices()[c[0]].id
        )));
    }
    Ok(())
}

/// Brackets of every eigenvalue `k` in `(0, k_max]` as `(k, jump)`, ascending.
fn bracket_roots(g: &MetricGraph, k_max: f64, step: f64) -> Vec<(f64, usize)> {
    let steps = (k_max / step).ceil().max(1.0) as usize;
    let mut grid = Vec::with_capacity(steps + 1);
    grid.push((0.0, 0usize));
    for i in 1..=steps {
        let k = if i == steps { k_max } else { i as f64 * step };
        let prev = grid.last().map(|p: &(f64, usize)| p.1).unwrap_or(0);
        grid.push((k, eigenvalue_count(g, k).max(prev)));
    }
    let mut roots = Vec::new();
    for w in grid.windows(2) {
        let ((lo, clo), (hi, chi)) = (w[0], w[1]);
        if chi > clo {
            refine(g, lo, hi, clo, chi, &mut roots);
        }
    }
    roots
}

fn refine(g: &MetricGraph, lo: f64, hi: f64, clo: usize, chi: usize, out: &mut Vec<(f64, usize)>) {
    // explicit stack keeps the output ordered
    let mut stack = vec![(lo, hi, clo, chi)];
    while let Some((lo, hi, clo, chi)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 4.0 * f64::EPSILON * hi.max(1.0) || mid <= lo || mid >= hi {
            out.push((mid, chi - clo));
            continue;
        }
        let cmid = eigenvalue_count(g, mid).clamp(clo, chi);
        if chi > cmid {
            stack.push((mid, hi, cmid, chi));
        }
        if cmid > clo {
            stack.push((lo, mid, clo, cmid));
        }
    }
}

/// Orthonormal eigenspace of dimension `multiplicity` at frequency `k` from the secular
/// null space. Returns the basis and the relative singular values at the block edge.
pub fn eigenspace(g: &MetricGraph, k: f64, multiplicity: usize) -> Result<(Vec<EdgeFunction>, f64, f64)> {
    let m = secular_matrix(g, k)?;
    let (v, sv) = smallest_right_singular_vectors(&m, multiplicity);
    let top = sv.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let null = sv[multiplicity - 1] / top;
    let gap = sv.get(multiplicity).copied().unwrap_or(top) / top;
    let fs: Vec<EdgeFunction> = (0..multiplicity)
        .map(|j| {
            let coeffs = (0..g.edge_count()).map(|e| [v[(2 * e, j)], v[(2 * e + 1, j)]]).collect();
            EdgeFunction::new(k, coeffs)
        })
        .collect::<Result<_>>()?;
    Ok((orthonormalize(&fs, g)?, null, gap))
}

/// All eigenvalues in `(0, lambda_max]` with multiplicities and orthonormal eigenspaces.
pub fn find_eigenvalues(g: &MetricGraph, lambda_max: f64, cfg: &ScanConfig) -> Result<SpectralCluster> {
    if !(lambda_max.is_finite() && lambda_max > 0.0) {
        return Err(Error::InvalidArgument(format!("empty window (0, {lambda_max}]")));
    }
    cfg.validate()?;
    check_solvable(g)?;
    let step = (PI / (4.0 * g.max_length())).min(cfg.scan_step);
    // nudge the top so an eigenvalue sitting exactly at lambda_max is included
    let k_max = lambda_max.sqrt() * (1.0 + 8.0 * f64::EPSILON);
    let roots = bracket_roots(g, k_max, step);

    let mut groups: Vec<Vec<f64>> = Vec::new();
    for (k, jump) in roots {
        let lam = k * k;
        match groups.last_mut() {
            Some(grp) if lam - grp.last().copied().unwrap_or(lam) < cfg.merge_tol => {
                grp.extend(std::iter::repeat_n(lam, jump))
            }
            _ => groups.push(vec![lam; jump]),
        }
    }
    let mut entries = Vec::with_capacity(groups.len());
    for raw in groups {
        let lambda = raw.iter().sum::<f64>() / raw.len() as f64;
        let (eigenspace, null_singular, gap_singular) = eigenspace(g, lambda.sqrt(), raw.len())?;
        entries.push(SpectralEntry {
            eigenvalue: lambda,
            multiplicity: raw.len(),
            raw,
            eigenspace,
            null_singular,
            gap_singular,
        });
    }
    Ok(SpectralCluster { window: (0.0, lambda_max), entries, hypothesis: None })
}

/// The first `count` eigenvalues (with multiplicity), growing the window as needed.
pub fn lowest_eigenvalues(g: &MetricGraph, count: usize, cfg: &ScanConfig) -> Result<SpectralCluster> {
    check_solvable(g)?;
    let l = g.max_length();
    let mut lambda_max = (PI / l).powi(2).max(1e-3);
    for _ in 0..200 {
        if eigenvalue_count(g, lambda_max.sqrt()) >= count {
            let c = find_eigenvalues(g, lambda_max, cfg)?;
            if c.count() >= count {
                return Ok(c);
            }
        }
        lambda_max *= 2.0;
    }
    Err(Error::NoConvergence { iterations: 200, residual: lambda_max })
}
