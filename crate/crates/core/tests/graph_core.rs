use qgraph_core::graph::{build_scaled_union, complete_pendant, transport_density, PendantLayout};
use qgraph_core::secular::reference::lemma21_reference;
use qgraph_core::{BumpFamily, BumpKind, Error, MetricGraph, PerturbationPoint, VertexCondition};

#[test]
fn complete_pendant_sizes() {
    let g = complete_pendant(3).unwrap();
    assert_eq!((g.vertex_count(), g.edge_count()), (6, 6));
    assert!(g.lengths().iter().all(|l| *l == 1.0));
    let g = complete_pendant(4).unwrap();
    assert_eq!((g.vertex_count(), g.edge_count()), (8, 10));
    assert!(complete_pendant(2).is_err());
}

#[test]
fn boundary_vertices_have_degree_one() {
    let g = complete_pendant(5).unwrap();
    for v in 0..g.vertex_count() {
        if g.condition(v) == VertexCondition::Dirichlet {
            assert_eq!(g.degree(v), 1);
        } else {
            assert_eq!(g.degree(v), 5);
        }
    }
}

#[test]
fn perturbed_lengths_are_one_plus_x() {
    let p = PerturbationPoint::from_parts(3, &[0.0; 3], &[0.1, 0.0, 0.0]).unwrap();
    let g = p.graph().unwrap();
    let pendant = PendantLayout::new(3).unwrap().pendant_edge(0);
    for (e, l) in g.lengths().iter().enumerate() {
        let want = if e == pendant { 1.1 } else { 1.0 };
        assert!((l - want).abs() < 1e-15);
    }
    let x = vec![0.03, -0.02, 0.01, 0.0, 0.05, -0.04];
    let g = PerturbationPoint::from_vector(3, x.clone()).unwrap().graph().unwrap();
    for (l, xe) in g.lengths().iter().zip(&x) {
        assert!((l - (1.0 + xe)).abs() < 1e-15);
    }
    assert_eq!(PerturbationPoint::zero(3).unwrap().graph().unwrap(), complete_pendant(3).unwrap());
}

#[test]
fn negative_metric_is_rejected() {
    let mut x = vec![0.0; 6];
    x[2] = -1.2;
    let bumps = BumpFamily::uniform(BumpKind::Polynomial, 6);
    assert!(matches!(PerturbationPoint::new(3, x, bumps), Err(Error::NonPositiveMetric { edge: 2, .. })));
}

#[test]
fn scaled_union_lengths() {
    let g = build_scaled_union(&[1.0], 3).unwrap();
    assert_eq!(g.edge_count(), 6);
    assert!(g.lengths().iter().all(|l| (l - 0.841_068_670_6).abs() < 1e-9));
    let g = build_scaled_union(&[1.0, 4.0], 3).unwrap();
    assert_eq!(g.components().len(), 2);
    let ls = g.lengths();
    assert!(ls[..6].iter().all(|l| (l - 0.841_068_670_6).abs() < 1e-9));
    assert!(ls[6..].iter().all(|l| (l - 0.420_534_335_3).abs() < 1e-9));
    assert!(build_scaled_union(&[1.0, 1.0], 3).is_err());
}

#[test]
fn transport_density_identity_at_zero() {
    let r = lemma21_reference(3).unwrap();
    let s = transport_density(&r.psi0, &PerturbationPoint::zero(3).unwrap()).unwrap();
    let rule = qgraph_core::quadrature::unit_rule();
    for (e, vals) in s.values.iter().enumerate() {
        for (v, t) in vals.iter().zip(&rule.nodes) {
            assert!((v - r.psi0.value(e, *t)).abs() < 1e-15);
        }
    }
}

#[test]
fn transport_density_preserves_norm() {
    let r = lemma21_reference(3).unwrap();
    let g = complete_pendant(3).unwrap();
    let x = vec![0.04, -0.03, 0.02, 0.05, -0.01, 0.03];
    for kind in [BumpKind::Exponential, BumpKind::Polynomial] {
        let p = PerturbationPoint::new(3, x.clone(), BumpFamily::uniform(kind, 6)).unwrap();
        for f in std::iter::once(&r.psi0).chain(&r.psi) {
            let before = f.inner(f, &g).unwrap();
            let after = transport_density(f, &p).unwrap().norm_squared();
            assert!((before - after).abs() < 1e-10, "{before} vs {after}");
        }
    }
}

#[test]
fn transported_energy_matches_samples() {
    let r = lemma21_reference(3).unwrap();
    let p = PerturbationPoint::from_parts(3, &[0.0; 3], &[0.05, 0.0, 0.0]).unwrap();
    let sampled = transport_density(&r.psi[0], &p).unwrap().energy();
    let direct = p.transported_energy(&r.psi[0]).unwrap();
    assert!((sampled - direct).abs() < 1e-9 * direct, "{sampled} vs {direct}");
}

#[test]
fn mismatched_host_is_rejected() {
    let r = lemma21_reference(4).unwrap();
    assert!(transport_density(&r.psi0, &PerturbationPoint::zero(3).unwrap()).is_err());
}

#[test]
fn json_round_trip_is_exact() {
    let p = PerturbationPoint::from_vector(4, (0..10).map(|i| 0.01 * i as f64 - 0.033).collect()).unwrap();
    let g = p.graph().unwrap();
    let back = MetricGraph::from_json(&g.to_json().unwrap()).unwrap();
    assert_eq!(g, back);
}

#[test]
fn malformed_json_is_rejected() {
    let bad = r#"{"vertices":[{"id":0,"kind":"boundary","condition":"dirichlet"}],"edges":[{"tail":0,"head":5,"length":1.0}]}"#;
    let err = MetricGraph::from_json(bad).unwrap_err();
    assert!(err.to_string().contains("unknown vertex 5"), "{err}");
    let neg = r#"{"vertices":[{"id":0,"kind":"boundary","condition":"dirichlet"},{"id":1,"kind":"boundary","condition":"dirichlet"}],"edges":[{"tail":0,"head":1,"length":-1.0}]}"#;
    assert!(MetricGraph::from_json(neg).is_err());
}
