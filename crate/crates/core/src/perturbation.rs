//! First-order calculus of the `Lambda_2` cluster of `G_N` under metric perturbations.
//!
//! For two sinusoids of the same frequency `k` on an edge, `f'g' + k^2 fg = k^2 (A_f A_g +
//! B_f B_g)` is constant, so the derivative of the transported form along `x`,
//!
//! `qdot_x(f, g) = -sum_e x_e int_0^1 (f'g' + k^2 fg) phi_e`,
//!
//! reduces to `-sum_e x_e k^2 (A_f A_g + B_f B_g)` for any unit-mass bump.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::edge_function::EdgeFunction;
use crate::error::{Error, Result};
use crate::graph::{complete_pendant, PendantLayout, PerturbationPoint};
use crate::linalg::{generalized_eigenvalues, numerical_rank, sym_inv_sqrt, symmetrize};
use crate::quadrature::unit_rule;
use crate::secular::reference::{lemma21_reference, PendantReference};
use crate::secular::{find_eigenvalues, ScanConfig};

/// A symmetric bilinear form in a declared (not necessarily orthonormal) basis, with the
/// Gram matrix of that basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadForm {
    pub labels: Vec<String>,
    #[serde(serialize_with = "crate::output::serialize_matrix")]
    form: DMatrix<f64>,
    #[serde(serialize_with = "crate::output::serialize_matrix")]
    gram: DMatrix<f64>,
}

impl QuadForm {
    pub fn new(labels: Vec<String>, form: DMatrix<f64>, gram: DMatrix<f64>) -> Result<Self> {
        let n = labels.len();
        for m in [&form, &gram] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: m.nrows().max(m.ncols()) });
            }
        }
        let scale = form.amax().max(1.0);
        let asym = crate::linalg::asymmetry(&form);
        if asym > 1e-12 * scale {
            return Err(Error::InvalidArgument(format!("form matrix is not symmetric (defect {asym:e})")));
        }
        sym_inv_sqrt(&gram)?;
        Ok(Self { labels, form: symmetrize(&form), gram: symmetrize(&gram) })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn form(&self) -> &DMatrix<f64> {
        &self.form
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// The form in the Lowdin-orthonormalized basis, `G^{-1/2} F G^{-1/2}`.
    pub fn orthonormal_matrix(&self) -> DMatrix<f64> {
        let s = sym_inv_sqrt(&self.gram).expect("gram checked at construction");
        symmetrize(&(&s * &self.form * &s))
    }

    /// Eigenvalues of the form relative to the Gram inner product, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        generalized_eigenvalues(&self.form, &self.gram).expect("gram checked at construction")
    }
}

/// `qdot_x(f, g)` for two functions of the same frequency on the unit `G_N`.
pub fn qdot_pair(f: &EdgeFunction, g: &EdgeFunction, x: &[f64]) -> Result<f64> {
    if f.edge_count() != x.len() || g.edge_count() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: f.edge_count().min(g.edge_count()) });
    }
    let k2 = f.frequency() * g.frequency();
    Ok(-x
        .iter()
        .zip(f.coeffs().iter().zip(g.coeffs()))
        .map(|(xe, ([a, b], [c, d]))| xe * (a * c + b * d))
        .sum::<f64>()
        * k2)
}

/// The same quantity by quadrature of `(f'g' + k^2 fg) phi_e` against the actual bumps.
pub fn qdot_pair_quadrature(f: &EdgeFunction, g: &EdgeFunction, p: &PerturbationPoint) -> f64 {
    let k2 = f.frequency() * g.frequency();
    let rule = unit_rule();
    p.x()
        .iter()
        .enumerate()
        .filter(|(_, xe)| **xe != 0.0)
        .map(|(e, xe)| {
            let kind = p.bumps().kind(e);
            -xe * rule.integrate(0.0, 1.0, |t| {
                (f.derivative(e, t) * g.derivative(e, t) + k2 * f.value(e, t) * g.value(e, t)) * kind.value(t)
            })
        })
        .sum()
}

fn psi_matrix(fs: &[EdgeFunction], entry: impl Fn(&EdgeFunction, &EdgeFunction) -> Result<f64>) -> Result<DMatrix<f64>> {
    let n = fs.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = entry(&fs[i], &fs[j])?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// `[qdot_x(psi_l, psi_m)]` over all `N` functions `psi_1..psi_N`.
pub fn qdot_full(p: &PerturbationPoint) -> Result<DMatrix<f64>> {
    let r = lemma21_reference(p.n())?;
    psi_matrix(&r.psi, |f, g| qdot_pair(f, g, p.x()))
}

/// Quadrature counterpart of [`qdot_full`].
pub fn qdot_full_quadrature(p: &PerturbationPoint) -> Result<DMatrix<f64>> {
    let r = lemma21_reference(p.n())?;
    psi_matrix(&r.psi, |f, g| Ok(qdot_pair_quadrature(f, g, p)))
}

fn psi_labels(count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("psi_{i}")).collect()
}

/// Gram matrix of `psi_1..psi_{N-1}`.
pub fn psi_gram(r: &PendantReference) -> Result<DMatrix<f64>> {
    let g = complete_pendant(r.n)?;
    psi_matrix(&r.psi[..r.n - 1], |a, b| a.inner(b, &g))
}

/// `qdot_x` on the basis `psi_1..psi_{N-1}` of the `Lambda_2` eigenspace.
pub fn qdot_matrix(p: &PerturbationPoint) -> Result<QuadForm> {
    let r = lemma21_reference(p.n())?;
    let form = psi_matrix(&r.psi[..p.n() - 1], |f, g| qdot_pair(f, g, p.x()))?;
    QuadForm::new(psi_labels(p.n() - 1), form, psi_gram(&r)?)
}

/// The unperturbed form `Lambda_2 <., .>` on the same basis.
pub fn unperturbed_form(n: usize) -> Result<QuadForm> {
    let r = lemma21_reference(n)?;
    let gram = psi_gram(&r)?;
    QuadForm::new(psi_labels(n - 1), &gram * r.lambda2, gram)
}

/// Largest entrywise deviation between closed form and quadrature of `qdot_x`.
pub fn qdot_quadrature_check(p: &PerturbationPoint) -> Result<f64> {
    Ok((qdot_full(p)? - qdot_full_quadrature(p)?).amax())
}

/// Index pairs `(l, m)`, `l < m`, that label the coordinates of the `F` vectors.
pub fn form_pairs(n: usize) -> Vec<(usize, usize)> {
    PendantLayout { n }.interior_pairs()
}

fn f_vector(m: &DMatrix<f64>, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs.iter().map(|&(l, k)| m[(l, k)]).collect()
}

/// The vectors `F_k`, `F_ij` with the rank certificate and both combination identities.
#[derive(Debug, Clone, Serialize)]
pub struct RankCertificate {
    pub n: usize,
    pub pairs: Vec<(usize, usize)>,
    /// `F_k` for each pendant `k`.
    pub pendant: Vec<Vec<f64>>,
    /// `((i, j), F_ij)` for each interior edge.
    pub interior: Vec<((usize, usize), Vec<f64>)>,
    pub rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `|sum_k F_k - k2^2 N / (N-1)^2 e|_inf`.
    pub sum_identity_residual: f64,
    /// Max over `i < j` of the `e_ij` identity residual.
    pub pair_identity_residual: f64,
}

impl RankCertificate {
    /// All `N(N+1)/2` vectors as rows, pendant first.
    pub fn matrix(&self) -> DMatrix<f64> {
        let rows: Vec<&Vec<f64>> = self.pendant.iter().chain(self.interior.iter().map(|(_, v)| v)).collect();
        DMatrix::from_fn(rows.len(), self.pairs.len(), |i, j| rows[i][j])
    }

    /// Smallest retained singular value relative to the largest.
    pub fn relative_min_singular(&self) -> f64 {
        match (self.singular_values.first(), self.singular_values.get(self.rank.max(1) - 1)) {
            (Some(top), Some(low)) if *top > 0.0 => low / top,
            _ => 0.0,
        }
    }
}

pub fn basis_vectors(n: usize) -> Result<RankCertificate> {
    let layout = PendantLayout::new(n)?;
    let pairs = form_pairs(n);
    let k2 = lemma21_reference(n)?.k2;
    let k22 = k2 * k2;
    let nf = n as f64;
    let pendant: Vec<Vec<f64>> = (0..n)
        .map(|k| Ok(f_vector(&qdot_full(&PerturbationPoint::pendant_direction(n, k)?)?, &pairs)))
        .collect::<Result<_>>()?;
    let interior: Vec<((usize, usize), Vec<f64>)> = layout
        .interior_pairs()
        .into_iter()
        .map(|(i, j)| Ok(((i, j), f_vector(&qdot_full(&PerturbationPoint::interior_direction(n, i, j)?)?, &pairs))))
        .collect::<Result<_>>()?;

    let sum_target = k22 * nf / ((nf - 1.0) * (nf - 1.0));
    let sum_identity_residual = (0..pairs.len())
        .map(|c| (pendant.iter().map(|f| f[c]).sum::<f64>() - sum_target).abs())
        .fold(0.0, f64::max);

    let n1sq = (nf - 1.0) * (nf - 1.0);
    let mut pair_identity_residual = 0.0f64;
    for ((i, j), fij) in &interior {
        for (c, &(l, m)) in pairs.iter().enumerate() {
            let eij = if (l, m) == (*i, *j) { 1.0 } else { 0.0 };
            let r = fij[c] + k22 * 2.0 * (nf + 1.0) / (nf * n1sq)
                - (nf + 1.0) / nf * (pendant[*i][c] + pendant[*j][c] + 2.0 * k22 / n1sq)
                + k22 * nf / n1sq * eij;
            pair_identity_residual = pair_identity_residual.max(r.abs());
        }
    }

    let mut cert = RankCertificate {
        n,
        pairs,
        pendant,
        interior,
        rank: 0,
        singular_values: Vec::new(),
        sum_identity_residual,
        pair_identity_residual,
    };
    let (rank, sv) = numerical_rank(&cert.matrix(), 1e-10);
    cert.rank = rank;
    cert.singular_values = sv;
    Ok(cert)
}

/// One entry of the explicit `qdot` table checked three ways.
#[derive(Debug, Clone, Serialize)]
pub struct EntryCheck {
    pub direction: String,
    /// 1-based indices of the two `psi` functions.
    pub l: usize,
    pub m: usize,
    pub expected: f64,
    pub closed_form: f64,
    pub quadrature: f64,
}

impl EntryCheck {
    pub fn deviation(&self) -> f64 {
        (self.closed_form - self.expected).abs().max((self.quadrature - self.expected).abs())
    }
}

/// Every off-diagonal entry `qdot_X(psi_l, psi_m)`, `l < m`, for every coordinate direction,
/// against the explicit table:
///
/// - `X_k`: `-k2^2/(N-1)^2` if `k` is neither `l` nor `m`, else `k2^2/(N-1)`;
/// - `X_ij`: `k2^2 (N^2-2)/(N(N-1)^2)` if `{l,m} = {i,j}`, `-k2^2 2(N+1)/(N(N-1)^2)` if disjoint,
///   `k2^2 (N^2-N-2)/(N(N-1)^2)` if they share exactly one index.
pub fn entry_table(n: usize) -> Result<Vec<EntryCheck>> {
    let layout = PendantLayout::new(n)?;
    let k2 = lemma21_reference(n)?.k2;
    let k22 = k2 * k2;
    let nf = n as f64;
    let n1sq = (nf - 1.0) * (nf - 1.0);
    let mut out = Vec::new();
    let mut push = |label: String, p: &PerturbationPoint, expect: &dyn Fn(usize, usize) -> f64| -> Result<()> {
        let cf = qdot_full(p)?;
        let qd = qdot_full_quadrature(p)?;
        for (l, m) in form_pairs(n) {
            out.push(EntryCheck {
                direction: label.clone(),
                l: l + 1,
                m: m + 1,
                expected: expect(l, m),
                closed_form: cf[(l, m)],
                quadrature: qd[(l, m)],
            });
        }
        Ok(())
    };
    for k in 0..n {
        let p = PerturbationPoint::pendant_direction(n, k)?;
        push(format!("X_{}", k + 1), &p, &|l, m| {
            if l != k && m != k {
                -k22 / n1sq
            } else {
                k22 / (nf - 1.0)
            }
        })?;
    }
    for (i, j) in layout.interior_pairs() {
        let p = PerturbationPoint::interior_direction(n, i, j)?;
        push(format!("X_{}{}", i + 1, j + 1), &p, &|l, m| {
            let shared = [l, m].iter().filter(|v| **v == i || **v == j).count();
            match shared {
                2 => k22 * (nf * nf - 2.0) / (nf * n1sq),
                0 => -k22 * 2.0 * (nf + 1.0) / (nf * n1sq),
                _ => k22 * (nf * nf - nf - 2.0) / (nf * n1sq),
            }
        })?;
    }
    Ok(out)
}

fn psi0_norm_sq(n: usize) -> Result<f64> {
    let r = lemma21_reference(n)?;
    r.psi0.inner(&r.psi0, &complete_pendant(n)?)
}

/// `d/ds qbar_{sx}(psi_0)` at `s = 0`.
pub fn lambda1_slope_numerator(direction: &PerturbationPoint) -> Result<f64> {
    let r = lemma21_reference(direction.n())?;
    qdot_pair(&r.psi0, &r.psi0, direction.x())
}

/// Analytic derivative of the first eigenvalue along `direction`.
pub fn lambda1_slope(direction: &PerturbationPoint) -> Result<f64> {
    Ok(lambda1_slope_numerator(direction)? / psi0_norm_sq(direction.n())?)
}

/// First eigenvalue of `G_N` with lengths `1 + s x`, from the secular solver.
pub fn lambda1_at(direction: &PerturbationPoint, s: f64) -> Result<f64> {
    let n = direction.n();
    let r = lemma21_reference(n)?;
    let lengths: Vec<f64> = direction.x().iter().map(|v| 1.0 + s * v).collect();
    let g = complete_pendant(n)?.with_lengths(&lengths)?;
    let c = find_eigenvalues(&g, 0.5 * (r.lambda1 + r.lambda2), &ScanConfig::default())?;
    c.expanded()
        .first()
        .copied()
        .ok_or_else(|| Error::ClusterNotIsolated("no eigenvalue below the midpoint of the first gap".into()))
}

/// Centered finite differences of `lambda_1` on a step ladder with Richardson extrapolation.
#[derive(Debug, Clone, Serialize)]
pub struct FiniteDifferenceSlope {
    pub steps: Vec<f64>,
    pub centered: Vec<f64>,
    /// Extrapolation of each consecutive pair, removing the `h^2` term.
    pub richardson: Vec<f64>,
}

impl FiniteDifferenceSlope {
    /// Extrapolated value from the finest pair.
    pub fn best(&self) -> f64 {
        *self.richardson.last().unwrap_or(&self.centered[self.centered.len() - 1])
    }
}

pub fn lambda1_finite_difference(direction: &PerturbationPoint, steps: &[f64]) -> Result<FiniteDifferenceSlope> {
    if steps.is_empty() || steps.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidArgument("finite-difference steps must be positive".into()));
    }
    let centered = steps
        .iter()
        .map(|&h| Ok((lambda1_at(direction, h)? - lambda1_at(direction, -h)?) / (2.0 * h)))
        .collect::<Result<Vec<f64>>>()?;
    let richardson = steps
        .windows(2)
        .zip(centered.windows(2))
        .map(|(h, d)| {
            let r2 = (h[0] / h[1]).powi(2);
            (r2 * d[1] - d[0]) / (r2 - 1.0)
        })
        .collect();
    Ok(FiniteDifferenceSlope { steps: steps.to_vec(), centered, richardson })
}

/// The isolation window `[Lambda_2 - delta/2, Lambda_2 + delta/2]` with
/// `delta = min(Lambda_2 - Lambda_1, lambda_{N+1} - Lambda_2) / 2` on the unit graph.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClusterWindow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_next: f64,
    pub delta: f64,
}

impl ClusterWindow {
    pub fn lo(&self) -> f64 {
        self.lambda2 - 0.5 * self.delta
    }

    pub fn hi(&self) -> f64 {
        self.lambda2 + 0.5 * self.delta
    }
}

pub fn cluster_window(n: usize) -> Result<ClusterWindow> {
    let r = lemma21_reference(n)?;
    let g = complete_pendant(n)?;
    let c = find_eigenvalues(&g, 12.0, &ScanConfig::default())?;
    let ev = c.expanded();
    let lambda_next = *ev.get(n).ok_or_else(|| Error::ClusterNotIsolated("lambda_{N+1} above 12".into()))?;
    let delta = (r.lambda2 - r.lambda1).min(lambda_next - r.lambda2) / 2.0;
    Ok(ClusterWindow { lambda1: r.lambda1, lambda2: r.lambda2, lambda_next, delta })
}

/// The `N - 1` eigenvalues of the perturbed graph in the isolation window.
pub fn perturbed_cluster(p: &PerturbationPoint, window: &ClusterWindow) -> Result<Vec<f64>> {
    let c = find_eigenvalues(&p.graph()?, window.hi(), &ScanConfig::default())?;
    let vals: Vec<f64> = c.expanded().into_iter().filter(|v| *v >= window.lo()).collect();
    if vals.len() != p.n() - 1 || c.count() != p.n() {
        return Err(Error::ClusterNotIsolated(format!(
            "expected {} eigenvalues in [{:.6}, {:.6}], found {} (and {} below)",
            p.n() - 1,
            window.lo(),
            window.hi(),
            vals.len(),
            c.count() - vals.len()
        )));
    }
    Ok(vals)
}

#[derive(Debug, Clone, Serialize)]
pub struct FirstOrderCluster {
    pub s: f64,
    pub predicted: Vec<f64>,
    pub computed: Vec<f64>,
    pub deviation: f64,
}

/// First-order prediction of the `Lambda_2` cluster at `s x` (with `x` normalized to unit
/// Euclidean length) against the secular solver.
pub fn first_order_cluster(direction: &PerturbationPoint, s: f64) -> Result<FirstOrderCluster> {
    if !(s > 0.0 && s <= 0.05) {
        return Err(Error::InvalidArgument(format!("s must lie in (0, 0.05], got {s}")));
    }
    let norm = direction.norm();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("direction must be nonzero".into()));
    }
    // the unit direction itself need not be an admissible metric, so only s x / |x| is built
    let n = direction.n();
    let r = lemma21_reference(n)?;
    let qd = qdot_matrix(direction)?;
    let pencil = qd.gram() * r.lambda2 + qd.form() * (s / norm);
    let predicted = generalized_eigenvalues(&pencil, qd.gram())?;
    let window = cluster_window(n)?;
    let computed = perturbed_cluster(&direction.scaled(s / norm)?, &window)?;
    let deviation = predicted.iter().zip(&computed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(FirstOrderCluster { s, predicted, computed, deviation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::{BumpFamily, BumpKind};

    #[test]
    fn zero_direction_gives_zero_form() {
        let p = PerturbationPoint::zero(4).unwrap();
        assert_eq!(qdot_matrix(&p).unwrap().form().amax(), 0.0);
        assert_eq!(qdot_quadrature_check(&p).unwrap(), 0.0);
        assert_eq!(lambda1_slope(&p).unwrap(), 0.0);
    }

    #[test]
    fn pendant_direction_entries_n4() {
        let p = PerturbationPoint::pendant_direction(4, 0).unwrap();
        let k22 = lemma21_reference(4).unwrap().lambda2;
        let m = qdot_full(&p).unwrap();
        assert!((m[(1, 2)] + k22 / 9.0).abs() < 1e-13);
        assert!((m[(0, 1)] - k22 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn interior_direction_entry_n4() {
        let p = PerturbationPoint::interior_direction(4, 0, 1).unwrap();
        let k22 = lemma21_reference(4).unwrap().lambda2;
        let m = qdot_full(&p).unwrap();
        assert!((m[(0, 1)] - k22 * 14.0 / 36.0).abs() < 1e-13);
        assert!((m[(2, 3)] + k22 * 10.0 / 36.0).abs() < 1e-13);
    }

    #[test]
    fn bump_choice_does_not_matter() {
        let p = PerturbationPoint::pendant_direction(3, 0).unwrap();
        let q = p.clone().with_bumps(BumpFamily::uniform(BumpKind::Polynomial, 6)).unwrap();
        assert!(qdot_quadrature_check(&p).unwrap() < 1e-12);
        assert!(qdot_quadrature_check(&q).unwrap() < 1e-12);
        assert!((qdot_full_quadrature(&p).unwrap() - qdot_full_quadrature(&q).unwrap()).amax() < 1e-12);
    }

    #[test]
    fn slope_numerator_is_minus_k1_squared() {
        let p = PerturbationPoint::pendant_direction(3, 0).unwrap();
        let k1 = (2.0f64 / 3.0).acos();
        assert!((lambda1_slope_numerator(&p).unwrap() + k1 * k1).abs() < 1e-14);
    }

    #[test]
    fn quad_form_rejects_asymmetric_and_singular() {
        let l = vec!["a".to_string(), "b".to_string()];
        let i = DMatrix::identity(2, 2);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(QuadForm::new(l.clone(), asym, i.clone()).is_err());
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(QuadForm::new(l, i, sing).is_err());
    }

    #[test]
    fn rank_n3() {
        let c = basis_vectors(3).unwrap();
        assert_eq!(c.rank, 3);
        assert!(c.sum_identity_residual < 1e-12);
        assert!(c.pair_identity_residual < 1e-12);
    }
}
