use qgraph_core::graph::admissible;
use qgraph_core::prescriber::{choose_n, prescribe_distinct, prescribe_multiplicities, MultiplicityTarget, NewtonConfig};
use qgraph_core::secular::reference::lemma21_reference;
use qgraph_core::ScanConfig;

#[test]
fn choose_n_examples() {
    assert_eq!(choose_n(&[1.0, 2.0, 3.0]).unwrap(), 3);
    assert_eq!(choose_n(&[1.0]).unwrap(), 3);
    let a = [0.001, 100.0];
    let n = choose_n(&a).unwrap();
    assert!(n > 3);
    assert!(admissible(&a, n));
    assert!(!admissible(&a, n - 1));
    assert!(choose_n(&[2.0, 2.0]).is_err());
    assert!(choose_n(&[]).is_err());
}

#[test]
fn choose_n_is_monotone_in_the_last_target() {
    let mut last = 3;
    for top in [1.5, 3.0, 10.0, 30.0, 100.0, 1000.0] {
        let n = choose_n(&[1.0, top]).unwrap();
        assert!(n >= last);
        last = n;
    }
}

#[test]
fn distinct_targets() {
    let (g, rep) = prescribe_distinct(&[1.0, 2.0, 3.0], &ScanConfig::default()).unwrap();
    assert_eq!(g.components().len(), 3);
    assert!(rep.all_simple);
    for (v, a) in rep.eigenvalues.iter().zip([1.0, 2.0, 3.0]) {
        assert!((v - a).abs() <= 1e-8 * a);
    }
    assert!(rep.lambda_next > 4.0);
    let (_, rep) = prescribe_distinct(&[1.0], &ScanConfig::default()).unwrap();
    assert!((rep.eigenvalues[0] - 1.0).abs() < 1e-8);
    assert_eq!(rep.multiplicities[0], 1);
    assert!(prescribe_distinct(&[2.0, 2.0], &ScanConfig::default()).is_err());
}

#[test]
fn distinct_targets_with_larger_n() {
    let a = [0.5, 0.9, 1.4, 2.0];
    let (_, rep) = prescribe_distinct(&a, &ScanConfig::default()).unwrap();
    assert_eq!(rep.n, choose_n(&a).unwrap());
    assert!(rep.max_relative_error <= 1e-8);
}

#[test]
fn degenerate_pattern_is_already_solved() {
    for n in [3, 4] {
        let (x, rep) = prescribe_multiplicities(n, &MultiplicityTarget::new(vec![n - 1], 0.02), &NewtonConfig::default())
            .unwrap();
        assert!(x.norm() <= 1e-10);
        assert_eq!(rep.iterations, 0);
    }
}

#[test]
fn n4_one_two_pattern() {
    let (x, rep) =
        prescribe_multiplicities(4, &MultiplicityTarget::new(vec![1, 2], 0.02), &NewtonConfig::default()).unwrap();
    let l2 = lemma21_reference(4).unwrap().lambda2;
    let want = [l2, l2 + 0.02, l2 + 0.02];
    let got: Vec<f64> = rep.groups.iter().flat_map(|g| g.values.iter().copied()).collect();
    for (a, b) in got.iter().zip(want) {
        assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }
    assert!(x.max_abs() <= 0.1);
    assert!(rep.reverified);
}

#[test]
fn pattern_must_fill_the_cluster() {
    assert!(prescribe_multiplicities(4, &MultiplicityTarget::new(vec![1, 1], 0.02), &NewtonConfig::default()).is_err());
    // levels far outside the isolation window
    assert!(prescribe_multiplicities(4, &MultiplicityTarget::new(vec![1, 2], 5.0), &NewtonConfig::default()).is_err());
}
