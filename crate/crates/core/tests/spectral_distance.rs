use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qgraph_core::graph::complete_pendant;
use qgraph_core::spectral_distance::{
    cluster_sweep, convergence_harness, critere_diagnostics, hypothesis_star, lambda2_cluster_comparison,
    n_spectral_difference, spectral_difference, transport_isometry, EmbeddedSubspace, Euclidean, FormOnSubspace,
    Transport,
};
use qgraph_core::{find_eigenvalues, Error, PerturbationPoint, ScanConfig};

fn random_vectors(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> Vec<DVector<f64>> {
    (0..count).map(|_| DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0))).collect()
}

fn subspace(basis: Vec<DVector<f64>>) -> EmbeddedSubspace<DVector<f64>> {
    EmbeddedSubspace::new(&Euclidean, basis).unwrap()
}

fn identity_transport(n: usize) -> Transport {
    let i = DMatrix::identity(n, n);
    Transport { u: i.clone(), a0: i.clone(), a1: i.clone(), graph_map: i.clone(), graph_gram: i.clone(), overlap: i }
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

#[test]
fn isometry_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..100 {
        let n = 1 + trial % 5;
        let b0 = random_vectors(&mut rng, 10, n);
        let b1: Vec<_> = b0.iter().map(|v| v + DVector::from_fn(10, |_, _| rng.random_range(-0.3..0.3))).collect();
        // a non-identity metric on E_1
        let a = random_symmetric(&mut rng, n) * 0.1 + DMatrix::identity(n, n);
        let e0 = subspace(b0);
        let e1 = EmbeddedSubspace::with_metric(&Euclidean, b1, a).unwrap();
        let t = transport_isometry(&Euclidean, &e0, &e1).unwrap();
        assert!(t.isometry_defect() < 1e-10, "trial {trial}: {:e}", t.isometry_defect());
    }
}

#[test]
fn same_subspace_gives_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let e0 = subspace(random_vectors(&mut rng, 6, 3));
    let t = transport_isometry(&Euclidean, &e0, &e0).unwrap();
    assert!((t.u.clone() - DMatrix::identity(3, 3)).amax() < 1e-12);
    assert!(t.norm_b() < 1e-7);
}

#[test]
fn small_rotation_is_isometric() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b0 = random_vectors(&mut rng, 6, 3);
    let theta: f64 = 0.05;
    let (s, c) = theta.sin_cos();
    // rotate in the (0, 5) plane of the ambient space
    let rot = |v: &DVector<f64>| {
        let mut w = v.clone();
        w[0] = c * v[0] - s * v[5];
        w[5] = s * v[0] + c * v[5];
        w
    };
    let b1: Vec<_> = b0.iter().map(rot).collect();
    let t = transport_isometry(&Euclidean, &subspace(b0), &subspace(b1)).unwrap();
    let ut_u = t.u.transpose() * &t.u;
    assert!((ut_u - DMatrix::identity(3, 3)).amax() < 1e-12);
}

#[test]
fn orthogonal_subspaces_are_rejected() {
    let e = |i: usize| DVector::from_fn(4, |j, _| if i == j { 1.0 } else { 0.0 });
    let r = transport_isometry(&Euclidean, &subspace(vec![e(0), e(1)]), &subspace(vec![e(2), e(3)]));
    assert!(matches!(r, Err(Error::NotClose(_))));
    let r = transport_isometry(&Euclidean, &subspace(vec![e(0)]), &subspace(vec![e(2), e(3)]));
    assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
}

#[test]
fn difference_basics() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let q = random_symmetric(&mut rng, 4);
    let id = identity_transport(4);
    assert_eq!(n_spectral_difference(&q, &q, &id).unwrap(), 0.0);
    let v = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0)).normalize();
    let eps = 0.37;
    let q1 = &q + &v * v.transpose() * eps;
    assert!((n_spectral_difference(&q, &q1, &id).unwrap() - eps).abs() < 1e-14);
    assert!(n_spectral_difference(&q, &DMatrix::zeros(3, 3), &id).is_err());
}

#[test]
fn difference_is_symmetric_for_identity_metrics() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let b0 = random_vectors(&mut rng, 8, 3);
        let b1: Vec<_> = b0.iter().map(|v| v + DVector::from_fn(8, |_, _| rng.random_range(-0.2..0.2))).collect();
        let f0 = FormOnSubspace::new(subspace(b0), random_symmetric(&mut rng, 3)).unwrap();
        let f1 = FormOnSubspace::new(subspace(b1), random_symmetric(&mut rng, 3)).unwrap();
        let (ab, _) = spectral_difference(&Euclidean, &f0, &f1).unwrap();
        let (ba, _) = spectral_difference(&Euclidean, &f1, &f0).unwrap();
        assert!((ab - ba).abs() < 1e-10, "{ab} vs {ba}");
    }
}

#[test]
fn harness_sees_convergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let b0 = random_vectors(&mut rng, 8, 2);
    let dir = random_vectors(&mut rng, 8, 2);
    let q = random_symmetric(&mut rng, 2);
    let reference = FormOnSubspace::new(subspace(b0.clone()), q.clone()).unwrap();
    let seq: Vec<_> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&s| {
            let b: Vec<_> = b0.iter().zip(&dir).map(|(v, d)| v + d * s).collect();
            FormOnSubspace::new(subspace(b), &q + DMatrix::identity(2, 2) * s).unwrap()
        })
        .collect();
    let rep = convergence_harness(&Euclidean, &reference, &seq).unwrap();
    assert!(rep.monotone);
    assert!(rep.differences[2] < 2e-3);
}

#[test]
fn critere_on_identical_and_scaled_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let q = random_symmetric(&mut rng, 3);
    let rec = critere_diagnostics(&q, &q, &identity_transport(3), 0).unwrap();
    assert_eq!((rec.dev_a0, rec.dev_a1, rec.norm_b, rec.eig_gap), (0.0, 0.0, 0.0, 0.0));
    assert!(rec.form_violation.abs() < 1e-14);
    let mut t = identity_transport(3);
    t.a0 = DMatrix::identity(3, 3) * 2.0;
    let rec = critere_diagnostics(&q, &q, &t, 0).unwrap();
    assert!((rec.dev_a0 - 1.0).abs() < 1e-15);
}

#[test]
fn pendant_cluster_comparison() {
    let x = PerturbationPoint::interior_direction(3, 0, 1).unwrap();
    let c = lambda2_cluster_comparison(&x.scaled(1e-3).unwrap()).unwrap();
    assert!(c.n_spectral_difference().unwrap() <= 5e-3);
    let rec = c.critere(0).unwrap();
    assert!(rec.norm_b <= 1e-2 && rec.eig_gap <= 1e-2 && rec.form_violation <= 1e-2, "{rec:?}");
    assert!(rec.form_violation <= rec.form_violation_exact + 1e-12);
}

#[test]
fn cluster_sweep_decreases() {
    let x = PerturbationPoint::interior_direction(3, 0, 1).unwrap();
    let rep = cluster_sweep(&x, &[1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
    assert!(rep.monotone, "{:?}", rep.differences);
    // first order in s: each decade divides the difference by about ten
    for r in &rep.ratios[1..] {
        assert!((9.0..11.0).contains(r), "{r}");
    }
}

#[test]
fn hypothesis_star_examples() {
    let c = find_eigenvalues(&complete_pendant(3).unwrap(), 10.5, &ScanConfig::default()).unwrap();
    let ev = c.expanded();
    let delta = (ev[3] - ev[2]) / 2.0;
    assert!(hypothesis_star(&c, 3, delta, ev[3] + 1.0).unwrap());
    assert!(!hypothesis_star(&c, 3, ev[3] - ev[2] + 0.1, ev[3] + 1.0).unwrap());
    assert!(!hypothesis_star(&c, 3, delta, ev[3] - 0.1).unwrap());
    assert!(hypothesis_star(&c, 20, delta, 100.0).is_err());
}
