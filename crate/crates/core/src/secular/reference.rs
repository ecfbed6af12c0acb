//! Closed-form low spectrum of `G_N` and the cut-star comparison graph.

use crate::edge_function::EdgeFunction;
use crate::error::Result;
use crate::graph::{complete_pendant, cut_star, first_frequency, second_frequency, MetricGraph, PendantLayout};
use crate::secular::{find_eigenvalues, ScanConfig};

/// The first two distinct eigenvalues of `G_N` and explicit eigenfunctions.
#[derive(Debug, Clone)]
pub struct PendantReference {
    pub n: usize,
    pub k1: f64,
    pub k2: f64,
    /// `k1^2`, simple.
    pub lambda1: f64,
    /// `k2^2`, multiplicity `N - 1`.
    pub lambda2: f64,
    pub multiplicity2: usize,
    /// Eigenfunction for `lambda1`.
    pub psi0: EdgeFunction,
    /// `psi_1, ..., psi_N` (0-based here); they span the `lambda2` eigenspace and sum to zero.
    pub psi: Vec<EdgeFunction>,
}

/// `psi_0`: `sin(k1 t)` on pendant edges, `sqrt(2/N) cos(k1 (t - 1/2))` on interior edges.
pub fn psi0(n: usize) -> Result<EdgeFunction> {
    let layout = PendantLayout::new(n)?;
    let k1 = first_frequency(n);
    let amp = (2.0 / n as f64).sqrt();
    let mut coeffs = vec![[amp * (0.5 * k1).cos(), amp * (0.5 * k1).sin()]; layout.interior_count()];
    coeffs.extend(std::iter::repeat_n([0.0, 1.0], n));
    EdgeFunction::new(k1, coeffs)
}

/// `psi_i` (0-based `i`) for the second eigenvalue.
///
/// - pendant `i`: `sin(k2 t)`; other pendants: `-sin(k2 t) / (N - 1)`;
/// - interior edges away from `v_i`: `-c cos(k2 (t - 1/2))`, `c = sqrt(2N + 2) / ((N - 1) sqrt N)`;
/// - `(v_i, v_j)`: `a cos(k2 t) - b sin(k2 t)`, reflected for edges entering `v_i`,
///   with `a = sqrt(N^2 - 1) / N`, `b = 1 / (N (N - 1))`.
pub fn psi(n: usize, i: usize) -> Result<EdgeFunction> {
    let layout = PendantLayout::new(n)?;
    let nf = n as f64;
    let k2 = second_frequency(n);
    let a = (nf * nf - 1.0).sqrt() / nf;
    let b = 1.0 / (nf * (nf - 1.0));
    let c = (2.0 * nf + 2.0).sqrt() / ((nf - 1.0) * nf.sqrt());
    let (s2, c2) = k2.sin_cos();
    let mut coeffs = Vec::with_capacity(layout.edge_count());
    for (p, q) in layout.interior_pairs() {
        coeffs.push(if p == i {
            [a, -b]
        } else if q == i {
            // a cos(k2 (1 - t)) - b sin(k2 (1 - t))
            [a * c2 - b * s2, a * s2 + b * c2]
        } else {
            [-c * (0.5 * k2).cos(), -c * (0.5 * k2).sin()]
        });
    }
    for k in 0..n {
        coeffs.push(if k == i { [0.0, 1.0] } else { [0.0, -1.0 / (nf - 1.0)] });
    }
    EdgeFunction::new(k2, coeffs)
}

pub fn lemma21_reference(n: usize) -> Result<PendantReference> {
    PendantLayout::new(n)?;
    let k1 = first_frequency(n);
    let k2 = second_frequency(n);
    Ok(PendantReference {
        n,
        k1,
        k2,
        lambda1: k1 * k1,
        lambda2: k2 * k2,
        multiplicity2: n - 1,
        psi0: psi0(n)?,
        psi: (0..n).map(|i| psi(n, i)).collect::<Result<_>>()?,
    })
}

impl PendantReference {
    pub fn graph(&self) -> Result<MetricGraph> {
        complete_pendant(self.n)
    }
}

/// Second eigenvalue of the cut star (one Dirichlet pendant of length 1, `N - 1` Neumann
/// half-edges of length 1/2).
pub fn cut_star_mu2(n: usize) -> Result<f64> {
    Ok(cut_star_spectrum(n, 2)?[1])
}

/// The first `count` eigenvalues of the cut star.
pub fn cut_star_spectrum(n: usize, count: usize) -> Result<Vec<f64>> {
    let g = cut_star(n)?;
    let c = super::lowest_eigenvalues(&g, count, &ScanConfig::default())?;
    Ok(c.expanded().into_iter().take(count).collect())
}

/// Eigenvalues of `G_N` (with multiplicity) up to `lambda_max`.
pub fn pendant_spectrum(n: usize, lambda_max: f64) -> Result<Vec<f64>> {
    Ok(find_eigenvalues(&complete_pendant(n)?, lambda_max, &ScanConfig::default())?.expanded())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let r = lemma21_reference(3).unwrap();
        assert!((r.lambda1 - 0.707_396_508_6).abs() < 1e-10);
        assert!((r.lambda2 - 3.650_519_363_5).abs() < 1e-10);
        assert_eq!(r.multiplicity2, 2);
        let r = lemma21_reference(4).unwrap();
        assert!((r.lambda2 - 3.325_066_844_9).abs() < 1e-10);
        assert_eq!(r.multiplicity2, 3);
        assert!(lemma21_reference(2).is_err());
    }

    #[test]
    fn psi_functions_are_eigenfunctions() {
        for n in 3..=6 {
            let r = lemma21_reference(n).unwrap();
            let g = r.graph().unwrap();
            assert!(r.psi0.residuals(&g, r.lambda1).unwrap().max() < 1e-13);
            for p in &r.psi {
                let res = p.residuals(&g, r.lambda2).unwrap();
                assert!(res.max() < 1e-13, "N={n}: {res:?}");
            }
        }
    }

    #[test]
    fn psi_sum_vanishes() {
        let r = lemma21_reference(5).unwrap();
        let mut s = r.psi[0].clone();
        for p in &r.psi[1..] {
            s = s.add_scaled(p, 1.0).unwrap();
        }
        assert!(s.max_abs_coeff() < 1e-14);
    }
}
