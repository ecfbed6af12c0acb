//! Transport between nearby finite-dimensional subspaces and the N-spectral difference.
//!
//! A subspace `E_i` of an ambient inner-product space carries its own inner product
//! `<x, y>_i = <A_i x, y>`. When `E_1` is the graph of a map `B: E_0 -> E_0^perp`, the map
//! `U = A_1^{-1/2} Bc (Bc^* Bc)^{-1/2} A_0^{1/2}`, `Bc = I + B`, is an isometry
//! `(E_0, <,>_0) -> (E_1, <,>_1)`, and forms on the two spaces are compared through it.
//!
//! All matrices here are in Lowdin-orthonormal coordinates of the respective basis.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::PerturbationPoint;
use crate::linalg::{
    form_norm, generalized_eigenvalues, singular_values_desc, spectral_norm, sym_eigen, sym_inv_sqrt,
    sym_sqrt, symmetrize,
};
use crate::perturbation::{cluster_window, ClusterWindow};
use crate::quadrature::unit_rule;
use crate::secular::reference::lemma21_reference;
use crate::secular::{find_eigenvalues, ScanConfig, SpectralCluster};

/// An ambient space with an inner product on some vector representation.
pub trait InnerProductSpace {
    type Vector;

    fn inner(&self, a: &Self::Vector, b: &Self::Vector) -> f64;
}

/// `R^n` with the dot product.
#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl InnerProductSpace for Euclidean {
    type Vector = DVector<f64>;

    fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(b)
    }
}

/// Sampled functions with quadrature weights: `<f, g> = sum w_i f_i g_i`.
#[derive(Debug, Clone)]
pub struct WeightedL2 {
    pub weights: Vec<f64>,
}

impl WeightedL2 {
    /// `L^2` of a graph with `edges` unit-length edges, sampled at the unit-rule nodes.
    pub fn unit_graph(edges: usize) -> Self {
        let w = &unit_rule().weights;
        Self { weights: (0..edges).flat_map(|_| w.iter().copied()).collect() }
    }
}

impl InnerProductSpace for WeightedL2 {
    type Vector = Vec<f64>;

    fn inner(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        self.weights.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
    }
}

/// A subspace spanned by `basis`, with its own metric operator `A` given in the
/// Lowdin-orthonormal coordinates of the basis.
#[derive(Debug, Clone)]
pub struct EmbeddedSubspace<V> {
    basis: Vec<V>,
    gram: DMatrix<f64>,
    lowdin: DMatrix<f64>,
    metric: DMatrix<f64>,
}

fn gram_of<S: InnerProductSpace>(space: &S, a: &[S::Vector], b: &[S::Vector]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| space.inner(&a[i], &b[j]))
}

impl<V> EmbeddedSubspace<V> {
    /// Subspace with the ambient inner product (`A = I`).
    pub fn new<S: InnerProductSpace<Vector = V>>(space: &S, basis: Vec<V>) -> Result<Self> {
        let n = basis.len();
        Self::with_metric(space, basis, DMatrix::identity(n, n))
    }

    pub fn with_metric<S: InnerProductSpace<Vector = V>>(space: &S, basis: Vec<V>, metric: DMatrix<f64>) -> Result<Self> {
        let n = basis.len();
        if n == 0 {
            return Err(Error::InvalidArgument("subspace basis is empty".into()));
        }
        if metric.nrows() != n || metric.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: metric.nrows() });
        }
        sym_inv_sqrt(&metric)?;
        let gram = symmetrize(&gram_of(space, &basis, &basis));
        let lowdin = sym_inv_sqrt(&gram)
            .map_err(|_| Error::InvalidArgument("subspace basis is linearly dependent".into()))?;
        Ok(Self { basis, gram, lowdin, metric: symmetrize(&metric) })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[V] {
        &self.basis
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    /// A form given in the raw basis, expressed in Lowdin coordinates.
    pub fn form_from_basis(&self, raw: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&(&self.lowdin * raw * &self.lowdin))
    }
}

/// The isometry `U: E_0 -> E_1` and the pieces it is built from.
#[derive(Debug, Clone, Serialize)]
pub struct Transport {
    #[serde(serialize_with = "crate::output::serialize_matrix")]
    pub u: DMatrix<f64>,
    #[serde(serialize_with = "crate::output::serialize_matrix")]
    pub a0: DMatrix<f64>,
    #[serde(serialize_with = "crate::output::serialize_matrix")]
    pub a1: DMatrix<f64>,
    /// `Bc = I + B`, from `E_0` coordinates to `E_1` coordinates.
    #[serde(serialize_with = "crate::output::serialize_matrix")]
    pub graph_map: DMatrix<f64>,
    /// `Bc^* Bc = I + B^* B` on `E_0`.
    #[serde(serialize_with = "crate::output::serialize_matrix")]
    pub graph_gram: DMatrix<f64>,
    /// Cross Gram `<e0_i, e1_j>` of the two orthonormal bases.
    #[serde(serialize_with = "crate::output::serialize_matrix")]
    pub overlap: DMatrix<f64>,
}

impl Transport {
    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// `max |U^T A_1 U - A_0|`.
    pub fn isometry_defect(&self) -> f64 {
        (self.u.transpose() * &self.a1 * &self.u - &self.a0).amax()
    }

    /// Operator norm of `B = Bc - I: E_0 -> E_0^perp`.
    pub fn norm_b(&self) -> f64 {
        let bb = &self.graph_gram - DMatrix::identity(self.dim(), self.dim());
        let (vals, _) = sym_eigen(&symmetrize(&bb));
        vals.iter().fold(0.0f64, |m, v| m.max(*v)).sqrt()
    }

    /// `q_1 o U` as a matrix in `E_0` coordinates.
    pub fn pull_back(&self, q1: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&(self.u.transpose() * q1 * &self.u))
    }
}

/// Builds `U_{E_0, E_1}`. Fails if the projection of `E_1` onto `E_0` is singular
/// (smallest singular value below 1e-10), i.e. `E_1` is not a graph over `E_0`.
pub fn transport_isometry<S: InnerProductSpace>(
    space: &S,
    e0: &EmbeddedSubspace<S::Vector>,
    e1: &EmbeddedSubspace<S::Vector>,
) -> Result<Transport> {
    let n = e0.dim();
    if e1.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: e1.dim() });
    }
    let cross = gram_of(space, &e0.basis, &e1.basis);
    let overlap = &e0.lowdin * cross * &e1.lowdin;
    let sv = singular_values_desc(&overlap);
    let smin = sv.last().copied().unwrap_or(0.0);
    if smin < 1e-10 {
        return Err(Error::NotClose(format!(
            "projection of E1 onto E0 is singular (smallest singular value {smin:e})"
        )));
    }
    // P_0 restricted to E_1 is `overlap`; Bc is its inverse
    let graph_map = overlap
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotClose("projection of E1 onto E0 is not invertible".into()))?;
    let graph_gram = symmetrize(&(graph_map.transpose() * &graph_map));
    let u = sym_inv_sqrt(&e1.metric)? * &graph_map * sym_inv_sqrt(&graph_gram)? * sym_sqrt(&e0.metric)?;
    Ok(Transport { u, a0: e0.metric.clone(), a1: e1.metric.clone(), graph_map, graph_gram, overlap })
}

/// `|q_1 o U - q_0|` as an operator norm relative to `<,>_0`.
pub fn n_spectral_difference(q0: &DMatrix<f64>, q1: &DMatrix<f64>, t: &Transport) -> Result<f64> {
    let n = t.dim();
    for q in [q0, q1] {
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: q.nrows() });
        }
    }
    form_norm(&(t.pull_back(q1) - q0), &t.a0)
}

/// A quadratic form living on an embedded subspace (matrix in Lowdin coordinates).
#[derive(Debug, Clone)]
pub struct FormOnSubspace<V> {
    pub subspace: EmbeddedSubspace<V>,
    pub form: DMatrix<f64>,
}

impl<V> FormOnSubspace<V> {
    pub fn new(subspace: EmbeddedSubspace<V>, form: DMatrix<f64>) -> Result<Self> {
        if form.nrows() != subspace.dim() || form.ncols() != subspace.dim() {
            return Err(Error::DimensionMismatch { expected: subspace.dim(), got: form.nrows() });
        }
        Ok(Self { subspace, form: symmetrize(&form) })
    }

    /// From a form matrix in the raw basis of the subspace.
    pub fn from_basis_form(subspace: EmbeddedSubspace<V>, raw: &DMatrix<f64>) -> Result<Self> {
        let form = subspace.form_from_basis(raw);
        Self::new(subspace, form)
    }
}

/// Transport plus N-spectral difference between two form triples.
pub fn spectral_difference<S: InnerProductSpace>(
    space: &S,
    a: &FormOnSubspace<S::Vector>,
    b: &FormOnSubspace<S::Vector>,
) -> Result<(f64, Transport)> {
    let t = transport_isometry(space, &a.subspace, &b.subspace)?;
    Ok((n_spectral_difference(&a.form, &b.form, &t)?, t))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub differences: Vec<f64>,
    /// `differences[i + 1] <= differences[i]` throughout.
    pub monotone: bool,
    /// `differences[i] / differences[i + 1]`.
    pub ratios: Vec<f64>,
}

/// N-spectral differences from `reference` to each member of `sequence`.
pub fn convergence_harness<S: InnerProductSpace>(
    space: &S,
    reference: &FormOnSubspace<S::Vector>,
    sequence: &[FormOnSubspace<S::Vector>],
) -> Result<ConvergenceReport> {
    let differences = sequence
        .iter()
        .map(|f| spectral_difference(space, reference, f).map(|(d, _)| d))
        .collect::<Result<Vec<_>>>()?;
    Ok(report_from(differences))
}

fn report_from(differences: Vec<f64>) -> ConvergenceReport {
    let monotone = differences.windows(2).all(|w| w[1] <= w[0]);
    let ratios = differences.windows(2).map(|w| w[0] / w[1]).collect();
    ConvergenceReport { differences, monotone, ratios }
}

/// Measured hypotheses of the closeness criterion for a pair of form triples.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct CritereRecord {
    /// `|q_1|` relative to `<,>_1`.
    pub norm_q1: f64,
    /// `|A_0 - I|`.
    #[serde(rename = "dev_A0")]
    pub dev_a0: f64,
    /// `|A_1 - I|`.
    #[serde(rename = "dev_A1")]
    pub dev_a1: f64,
    /// `|B|`.
    #[serde(rename = "norm_B")]
    pub norm_b: f64,
    /// `max_j |lambda_j(q_1) - lambda_j(q_0)|`.
    pub eig_gap: f64,
    /// Largest `q_0(x) - q_1(x + Bx)` over sampled unit `x` and the extremal direction, clipped at 0.
    pub form_violation: f64,
    /// The same supremum computed exactly as an eigenvalue.
    pub form_violation_exact: f64,
}

/// Critere quantities for `q0` on `E_0` and `q1` on `E_1` (Lowdin coordinates), sampling
/// `10 N^2` unit vectors with the given seed.
pub fn critere_diagnostics(q0: &DMatrix<f64>, q1: &DMatrix<f64>, t: &Transport, seed: u64) -> Result<CritereRecord> {
    let n = t.dim();
    for q in [q0, q1] {
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: q.nrows() });
        }
    }
    let id = DMatrix::<f64>::identity(n, n);
    let norm_q1 = form_norm(q1, &t.a1)?;
    let dev_a0 = spectral_norm(&(&t.a0 - &id));
    let dev_a1 = spectral_norm(&(&t.a1 - &id));
    let norm_b = t.norm_b();
    let e0 = generalized_eigenvalues(q0, &t.a0)?;
    let e1 = generalized_eigenvalues(q1, &t.a1)?;
    let eig_gap = e0.iter().zip(&e1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    // q_0(x) - q_1(Bc x) for ambient-unit x in E_0
    let diff = symmetrize(&(q0 - t.graph_map.transpose() * q1 * &t.graph_map));
    let (vals, vecs) = sym_eigen(&diff);
    let form_violation_exact = vals[n - 1].max(0.0);
    let quad = |x: &DVector<f64>| (x.transpose() * &diff * x)[(0, 0)] / x.norm_squared();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = quad(&vecs.column(n - 1).into_owned());
    for _ in 0..10 * n * n {
        let x = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        worst = worst.max(quad(&x));
    }
    Ok(CritereRecord {
        norm_q1,
        dev_a0,
        dev_a1,
        norm_b,
        eig_gap,
        form_violation: worst.max(0.0),
        form_violation_exact,
    })
}

/// Whether `lambda_N + delta <= lambda_{N+1} <= M` holds for the cluster.
pub fn hypothesis_star(cluster: &SpectralCluster, n: usize, delta: f64, m: f64) -> Result<bool> {
    let ev = cluster.expanded();
    if n == 0 || ev.len() < n + 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least {} eigenvalues, cluster has {}",
            n + 1,
            ev.len()
        )));
    }
    Ok(ev[n - 1] + delta <= ev[n] && ev[n] <= m)
}

/// The `Lambda_2` cluster of `G_N` compared with that of a perturbed graph.
///
/// `E_0` is spanned by `psi_1..psi_{N-1}`; `E_1` by the perturbed cluster eigenfunctions pulled
/// back to the unit graph through the density isometry. Both live in `L^2` of the unit graph.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterComparison {
    pub n: usize,
    pub lambda2: f64,
    /// Perturbed cluster eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    #[serde(serialize_with = "crate::output::serialize_matrix")]
    pub q0: DMatrix<f64>,
    #[serde(serialize_with = "crate::output::serialize_matrix")]
    pub q1: DMatrix<f64>,
    pub transport: Transport,
}

impl ClusterComparison {
    /// The cluster form `q_1 o U` on `E_0`.
    pub fn cluster_form(&self) -> DMatrix<f64> {
        self.transport.pull_back(&self.q1)
    }

    pub fn n_spectral_difference(&self) -> Result<f64> {
        n_spectral_difference(&self.q0, &self.q1, &self.transport)
    }

    pub fn critere(&self, seed: u64) -> Result<CritereRecord> {
        critere_diagnostics(&self.q0, &self.q1, &self.transport, seed)
    }
}

fn sample_on_unit_graph(f: &crate::edge_function::EdgeFunction) -> Vec<f64> {
    let nodes = &unit_rule().nodes;
    (0..f.edge_count()).flat_map(|e| nodes.iter().map(move |&t| f.value(e, t))).collect()
}

/// Compares the `Lambda_2` clusters of `G_N` and of the perturbed graph at `p`.
pub fn lambda2_cluster_comparison(p: &PerturbationPoint) -> Result<ClusterComparison> {
    lambda2_cluster_comparison_in(p, &cluster_window(p.n())?)
}

/// As [`lambda2_cluster_comparison`] with a precomputed isolation window.
pub fn lambda2_cluster_comparison_in(p: &PerturbationPoint, window: &ClusterWindow) -> Result<ClusterComparison> {
    let n = p.n();
    let r = lemma21_reference(n)?;
    let space = WeightedL2::unit_graph(p.x().len());
    let e0 = EmbeddedSubspace::new(&space, r.psi[..n - 1].iter().map(sample_on_unit_graph).collect())?;
    let q0 = DMatrix::identity(n - 1, n - 1) * r.lambda2;

    let cluster = find_eigenvalues(&p.graph()?, window.hi(), &ScanConfig::default())?.restricted(window.lo(), window.hi());
    if cluster.count() != n - 1 {
        return Err(Error::ClusterNotIsolated(format!(
            "expected {} eigenvalues in [{:.6}, {:.6}], found {}",
            n - 1,
            window.lo(),
            window.hi(),
            cluster.count()
        )));
    }
    let eigenvalues = cluster.expanded();
    let graph = p.graph()?;
    let fs = cluster.eigenfunctions();
    let samples = fs.iter().map(|f| p.pull_back_samples(f)).collect::<Result<Vec<_>>>()?;
    let e1 = EmbeddedSubspace::new(&space, samples)?;
    // Rayleigh-Ritz on the span: eigenvectors from nearly equal roots are only
    // accurate as a subspace, so the energy is taken exactly rather than assumed diagonal
    let m = fs.len();
    let mut energy = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = fs[i].energy_inner(fs[j], &graph)?;
            energy[(i, j)] = v;
            energy[(j, i)] = v;
        }
    }
    let q1 = e1.form_from_basis(&energy);
    let transport = transport_isometry(&space, &e0, &e1)?;
    Ok(ClusterComparison { n, lambda2: r.lambda2, eigenvalues, q0, q1, transport })
}

/// N-spectral differences between the unperturbed cluster and the cluster at `s x`.
pub fn cluster_sweep(direction: &PerturbationPoint, steps: &[f64]) -> Result<ConvergenceReport> {
    let window = cluster_window(direction.n())?;
    let differences = steps
        .iter()
        .map(|&s| lambda2_cluster_comparison_in(&direction.scaled(s)?, &window)?.n_spectral_difference())
        .collect::<Result<Vec<_>>>()?;
    Ok(report_from(differences))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subspace(cols: &[&[f64]]) -> EmbeddedSubspace<DVector<f64>> {
        EmbeddedSubspace::new(&Euclidean, cols.iter().map(|c| DVector::from_column_slice(c)).collect()).unwrap()
    }

    #[test]
    fn identical_subspaces_give_identity() {
        let e = subspace(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let t = transport_isometry(&Euclidean, &e, &e).unwrap();
        assert!((t.u.clone() - DMatrix::identity(2, 2)).amax() < 1e-14);
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        assert_eq!(n_spectral_difference(&q, &q, &t).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_subspace_rejected() {
        let e0 = subspace(&[&[1.0, 0.0, 0.0]]);
        let e1 = subspace(&[&[0.0, 1.0, 0.0]]);
        assert!(matches!(transport_isometry(&Euclidean, &e0, &e1), Err(Error::NotClose(_))));
    }

    #[test]
    fn rank_one_bump_is_measured_exactly() {
        let e = subspace(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let t = transport_isometry(&Euclidean, &e, &e).unwrap();
        let q0 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let v = DVector::from_vec(vec![1.0, 2.0, 2.0]) / 3.0;
        let q1 = &q0 + &v * v.transpose() * 0.25;
        assert!((n_spectral_difference(&q0, &q1, &t).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn metric_deviation_reported() {
        let space = Euclidean;
        let basis = vec![DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.0, 1.0])];
        let e0 = EmbeddedSubspace::with_metric(&space, basis.clone(), DMatrix::identity(2, 2) * 2.0).unwrap();
        let e1 = EmbeddedSubspace::new(&space, basis).unwrap();
        let t = transport_isometry(&space, &e0, &e1).unwrap();
        assert!(t.isometry_defect() < 1e-14);
        let q = DMatrix::identity(2, 2);
        let rec = critere_diagnostics(&q, &q, &t, 7).unwrap();
        assert!((rec.dev_a0 - 1.0).abs() < 1e-14);
        assert_eq!(rec.dev_a1, 0.0);
    }

    #[test]
    fn identical_data_has_zero_critere() {
        let e = subspace(&[&[1.0, 1.0, 0.0], &[0.0, 1.0, 1.0]]);
        let t = transport_isometry(&Euclidean, &e, &e).unwrap();
        let q = DMatrix::from_row_slice(2, 2, &[3.0, 0.1, 0.1, 4.0]);
        let r = critere_diagnostics(&q, &q, &t, 1).unwrap();
        assert!(r.dev_a0 == 0.0 && r.dev_a1 == 0.0);
        assert!(r.norm_b < 1e-7 && r.eig_gap < 1e-14 && r.form_violation < 1e-13, "{r:?}");
    }
}
