//! Inverse problems: prescribed leading eigenvalues and prescribed cluster multiplicities.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{
    admissible, build_scaled_union, check_strictly_increasing, first_frequency, second_frequency,
    MetricGraph, PerturbationPoint,
};
use crate::linalg::{pinv, sym_inv_sqrt};
use crate::perturbation::{cluster_window, psi_gram, qdot_full, ClusterWindow};
use crate::secular::reference::lemma21_reference;
use crate::secular::{find_eigenvalues, ScanConfig};
use crate::spectral_distance::lambda2_cluster_comparison_in;

/// Least `N >= 3` with `a_1 (k_2 / k_1)^2 > a_m + 1`.
///
/// The ratio grows like `pi^2 N / 8`, so exponential search followed by bisection finds it
/// in `O(log N)` evaluations.
pub fn choose_n(a: &[f64]) -> Result<usize> {
    check_strictly_increasing(a)?;
    if admissible(a, 3) {
        return Ok(3);
    }
    let mut lo = 3usize;
    let mut hi = 6usize;
    while !admissible(a, hi) {
        lo = hi;
        hi = hi.checked_mul(2).ok_or_else(|| Error::InvalidArgument("no admissible N fits in usize".into()))?;
    }
    // invariant: lo inadmissible, hi admissible
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if admissible(a, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Serialize)]
pub struct DistinctReport {
    pub n: usize,
    pub targets: Vec<f64>,
    /// First `m + 1` eigenvalues with multiplicity.
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// `|lambda_i - a_i| / max(1, a_i)`.
    pub max_relative_error: f64,
    pub lambda_next: f64,
    pub all_simple: bool,
}

/// Largest `N` for which the scaled union is still built and verified.
pub const MAX_VERIFIED_N: usize = 64;

/// Scaled union realizing `a` as the first `m` eigenvalues, verified with the solver.
pub fn prescribe_distinct(a: &[f64], cfg: &ScanConfig) -> Result<(MetricGraph, DistinctReport)> {
    let n = choose_n(a)?;
    if n > MAX_VERIFIED_N {
        return Err(Error::InvalidArgument(format!(
            "admissible N = {n} exceeds {MAX_VERIFIED_N}; the graph would be too large to verify"
        )));
    }
    let g = build_scaled_union(a, n)?;
    let m = a.len();
    let ratio = (second_frequency(n) / first_frequency(n)).powi(2);
    // the (m+1)-th eigenvalue is min(a_1 ratio, pi^2-type levels) > a_m + 1, so this window holds it
    let top = (a[0] * ratio).max(a[m - 1] + 1.0) * 1.05;
    let cluster = find_eigenvalues(&g, top, cfg)?;
    let mut eigenvalues = Vec::new();
    let mut multiplicities = Vec::new();
    for e in &cluster.entries {
        if eigenvalues.len() > m {
            break;
        }
        eigenvalues.push(e.eigenvalue);
        multiplicities.push(e.multiplicity);
    }
    if eigenvalues.len() < m + 1 {
        return Err(Error::Verification(format!("found only {} eigenvalues below {top}", eigenvalues.len())));
    }
    let max_relative_error = a
        .iter()
        .zip(&eigenvalues)
        .map(|(t, v)| (t - v).abs() / t.max(1.0))
        .fold(0.0, f64::max);
    let all_simple = multiplicities[..m].iter().all(|&k| k == 1);
    let lambda_next = eigenvalues[m];
    let report = DistinctReport {
        n,
        targets: a.to_vec(),
        eigenvalues,
        multiplicities,
        max_relative_error,
        lambda_next,
        all_simple,
    };
    if max_relative_error > 1e-8 || !all_simple || lambda_next <= a[m - 1] + 1.0 {
        return Err(Error::Verification(format!(
            "scaled union failed verification: error {max_relative_error:e}, simple {all_simple}, next {lambda_next}"
        )));
    }
    Ok((g, report))
}

/// Requested grouping of the `N - 1` cluster eigenvalues: `pattern[k]` eigenvalues at level
/// `anchor + k * gap`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicityTarget {
    pub pattern: Vec<usize>,
    pub gap: f64,
    /// Defaults to `Lambda_2`.
    pub anchor: Option<f64>,
}

impl MultiplicityTarget {
    pub fn new(pattern: Vec<usize>, gap: f64) -> Self {
        Self { pattern, gap, anchor: None }
    }

    /// Largest gap keeping every level within half the isolation half-width.
    pub fn default_gap(window: &ClusterWindow, levels: usize) -> f64 {
        0.5 * window.delta / (2.0 * levels.max(1) as f64)
    }

    pub fn levels(&self, lambda2: f64) -> Vec<f64> {
        let base = self.anchor.unwrap_or(lambda2);
        (0..self.pattern.len()).map(|k| base + k as f64 * self.gap).collect()
    }

    fn validate(&self, n: usize, window: &ClusterWindow) -> Result<()> {
        if self.pattern.is_empty() || self.pattern.contains(&0) {
            return Err(Error::InvalidArgument("pattern entries must be positive".into()));
        }
        let sum: usize = self.pattern.iter().sum();
        if sum != n - 1 {
            return Err(Error::InvalidArgument(format!("pattern sums to {sum}, the cluster has {}", n - 1)));
        }
        if self.pattern.len() > 1 && !(self.gap.is_finite() && self.gap > 0.0) {
            return Err(Error::InvalidArgument(format!("gap must be positive, got {}", self.gap)));
        }
        for level in self.levels(window.lambda2) {
            if level <= window.lo() || level >= window.hi() {
                return Err(Error::InvalidArgument(format!(
                    "target level {level} lies outside the isolation window [{}, {}]",
                    window.lo(),
                    window.hi()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupReport {
    pub level: f64,
    pub multiplicity: usize,
    pub values: Vec<f64>,
    pub max_error: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplicityReport {
    pub n: usize,
    pub pattern: Vec<usize>,
    pub gap: f64,
    pub levels: Vec<f64>,
    pub x: Vec<f64>,
    pub x_max_abs: f64,
    pub iterations: usize,
    /// Max-abs residual of the cluster form after each accepted step (entry 0 is at x = 0).
    pub residual_history: Vec<f64>,
    /// Cluster eigenvalues of the final graph from the secular solver.
    pub cluster: Vec<f64>,
    pub groups: Vec<GroupReport>,
    pub max_error: f64,
    /// Differences between consecutive group means.
    pub inter_group_gaps: Vec<f64>,
    /// Same grouping found again with half the scan step.
    pub reverified: bool,
}

/// Newton settings for [`prescribe_multiplicities`].
#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    pub max_iterations: usize,
    /// Stop when the max-abs entry of `Q_x - Q*` is below this. Roots merged by the
    /// solver put a floor of a few 1e-10 under the residual.
    pub tol: f64,
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { max_iterations: 50, tol: 1e-9, max_halvings: 30 }
    }
}

// upper triangle, off-diagonal scaled by sqrt 2 so the Euclidean norm is the Frobenius norm
fn vectorize(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            v.push(if i == j { m[(i, j)] } else { std::f64::consts::SQRT_2 * m[(i, j)] });
        }
    }
    DVector::from_vec(v)
}

/// Jacobian of `x -> Q_x` at the origin in Lowdin coordinates of `psi_1..psi_{N-1}`.
fn origin_jacobian(n: usize) -> Result<DMatrix<f64>> {
    let r = lemma21_reference(n)?;
    let lowdin = sym_inv_sqrt(&psi_gram(&r)?)?;
    let m = n * (n + 1) / 2;
    let rows = (n - 1) * n / 2;
    let mut j = DMatrix::zeros(rows, m);
    for e in 0..m {
        let mut x = vec![0.0; m];
        x[e] = 1.0;
        let full = qdot_full(&PerturbationPoint::from_vector(n, x)?)?;
        let qd = full.view((0, 0), (n - 1, n - 1)).into_owned();
        j.set_column(e, &vectorize(&(&lowdin * qd * &lowdin)));
    }
    Ok(j)
}

fn residual(x: &[f64], n: usize, window: &ClusterWindow, target: &DMatrix<f64>) -> Result<DVector<f64>> {
    let p = PerturbationPoint::from_vector(n, x.to_vec())?;
    let c = lambda2_cluster_comparison_in(&p, window)?;
    Ok(vectorize(&(c.cluster_form() - target)))
}

fn group(values: &[f64], pattern: &[usize], levels: &[f64]) -> Vec<GroupReport> {
    let mut out = Vec::with_capacity(pattern.len());
    let mut start = 0;
    for (&m, &level) in pattern.iter().zip(levels) {
        let vals = values[start..start + m].to_vec();
        let max_error = vals.iter().map(|v| (v - level).abs()).fold(0.0, f64::max);
        let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        out.push(GroupReport { level, multiplicity: m, values: vals, max_error, spread: hi - lo });
        start += m;
    }
    out
}

/// Finds `x` so the `Lambda_2` cluster of the perturbed `G_N` has the requested multiplicities.
///
/// Chord Newton on the cluster form `Q_x` (a symmetric `(N-1) x (N-1)` matrix) towards
/// `Q* = diag(levels repeated by pattern)`: the derivative at the origin is the explicit form
/// derivative, whose rank certificate makes the map a submersion there. Steps are the
/// minimum-norm least-squares solutions, halved while the residual grows. Unlike sorted
/// eigenvalues, `Q_x` is smooth through the degeneracies being targeted.
pub fn prescribe_multiplicities(
    n: usize,
    target: &MultiplicityTarget,
    newton: &NewtonConfig,
) -> Result<(PerturbationPoint, MultiplicityReport)> {
    let window = cluster_window(n)?;
    target.validate(n, &window)?;
    let levels = target.levels(window.lambda2);
    let diag: Vec<f64> = target
        .pattern
        .iter()
        .zip(&levels)
        .flat_map(|(&m, &l)| std::iter::repeat_n(l, m))
        .collect();
    let q_star = DMatrix::from_diagonal(&DVector::from_vec(diag));
    let jac = origin_jacobian(n)?;
    let jinv = pinv(&jac, 1e-10);

    let m = n * (n + 1) / 2;
    let mut x = vec![0.0; m];
    let mut r = residual(&x, n, &window, &q_star)?;
    let mut history = vec![r.amax()];
    let mut iterations = 0;
    while r.amax() > newton.tol {
        if iterations == newton.max_iterations {
            return Err(Error::NoConvergence { iterations, residual: r.amax() });
        }
        iterations += 1;
        let step = -(&jinv * &r);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=newton.max_halvings {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
            // positivity or isolation failures count as a bad step
            if let Ok(rt) = residual(&trial, n, &window, &q_star) {
                if rt.norm() < r.norm() {
                    accepted = Some((trial, rt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((xt, rt)) => {
                x = xt;
                r = rt;
                history.push(r.amax());
            }
            None => return Err(Error::NoConvergence { iterations, residual: r.amax() }),
        }
    }

    let p = PerturbationPoint::from_vector(n, x.clone())?;
    let x_max_abs = p.max_abs();
    let cluster = cluster_values(&p, &window, &ScanConfig::default())?;
    let groups = group(&cluster, &target.pattern, &levels);
    let max_error = groups.iter().map(|g| g.max_error).fold(0.0, f64::max);
    let means: Vec<f64> = groups.iter().map(|g| g.values.iter().sum::<f64>() / g.values.len() as f64).collect();
    let inter_group_gaps = means.windows(2).map(|w| w[1] - w[0]).collect();
    let half = ScanConfig { scan_step: ScanConfig::default().scan_step / 2.0, ..ScanConfig::default() };
    let again = cluster_values(&p, &window, &half)?;
    let regrouped = group(&again, &target.pattern, &levels);
    let reverified = regrouped.iter().all(|g| g.max_error <= 1e-8);
    let report = MultiplicityReport {
        n,
        pattern: target.pattern.clone(),
        gap: target.gap,
        levels,
        x,
        x_max_abs,
        iterations,
        residual_history: history,
        cluster,
        groups,
        max_error,
        inter_group_gaps,
        reverified,
    };
    if max_error > 1e-8 || x_max_abs > 0.1 {
        return Err(Error::Verification(format!(
            "prescribed cluster off by {max_error:e} (|x|_inf = {x_max_abs})"
        )));
    }
    Ok((p, report))
}

fn cluster_values(p: &PerturbationPoint, window: &ClusterWindow, cfg: &ScanConfig) -> Result<Vec<f64>> {
    let c = find_eigenvalues(&p.graph()?, window.hi(), cfg)?.restricted(window.lo(), window.hi());
    let v = c.expanded();
    if v.len() != p.n() - 1 {
        return Err(Error::ClusterNotIsolated(format!("found {} cluster eigenvalues", v.len())));
    }
    Ok(v)
}
