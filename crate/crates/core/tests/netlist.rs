use proptest::prelude::*;

use tlq_core::netlist::{derive_reduced_model, potential_gradient, CircuitTopology, ReducedModel};
use tlq_core::Error;

/// Random connected topology: every node has a capacitor and an inductor to a higher index.
fn topology() -> impl Strategy<Value = CircuitTopology> {
    (1usize..8).prop_flat_map(|n| {
        let edges = proptest::collection::vec((0.0f64..1.0, 0.1f64..10.0, 0.1f64..10.0), n);
        let extra = proptest::collection::vec((1usize..=n, 1usize..=n + 1, 0.1f64..5.0), 0..n);
        (Just(n), 0.05f64..5.0, edges, extra).prop_map(|(n, c_c, edges, extra)| {
            let mut t = CircuitTopology::new(n, c_c).unwrap();
            for (i, &(u, c, l)) in edges.iter().enumerate() {
                let node = i + 1;
                let hi = node + 1 + ((u * (n - node + 1) as f64) as usize).min(n - node);
                t.add_capacitor(node, hi, c).unwrap();
                t.add_inductor(node, hi, l).unwrap();
            }
            for (a, b, c) in extra {
                if a != b {
                    t.add_capacitor(a, b, c).unwrap();
                }
            }
            t
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reduced_model_invariants(t in topology(), z_c in 0.1f64..10.0) {
        let m = derive_reduced_model(&t, z_c).unwrap();
        let r = m.invariants();
        prop_assert!(r.worst() <= 1e-12, "{r:?}");
        prop_assert!(m.c_p < m.c_c);
        prop_assert!((m.tau - z_c * m.c_p).abs() <= 1e-15 * m.tau);
        // B = C_p ppᵀ is rank one and positive semidefinite
        prop_assert!(m.b.clone().symmetric_eigenvalues().min() >= -1e-12 * m.b.amax());
    }

    #[test]
    fn netlist_text_round_trips(t in topology()) {
        let text = t.to_string();
        let back: CircuitTopology = text.parse().unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn json_round_trip_is_exact(t in topology(), z_c in 0.1f64..10.0) {
        let m = derive_reduced_model(&t, z_c).unwrap();
        let back = ReducedModel::from_json(&m.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back.cb, &m.cb);
        prop_assert_eq!(&back.p, &m.p);
        prop_assert_eq!(back.c_p, m.c_p);
        prop_assert_eq!(back.tau, m.tau);
    }

    #[test]
    fn gradient_matches_finite_differences(
        t in topology(),
        e_j in 0.1f64..3.0,
        seed in proptest::collection::vec(-2.0f64..2.0, 8),
    ) {
        let mut t = t;
        let n = t.node_count();
        t.add_junction(1, n + 1, e_j, 0.7).unwrap();
        let phi: Vec<f64> = seed[..n].to_vec();
        let grad = potential_gradient(&t, &phi).unwrap();
        let h = 1e-6;
        for i in 0..n {
            let mut up = phi.clone();
            let mut dn = phi.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (t.potential_energy(&up).unwrap() - t.potential_energy(&dn).unwrap()) / (2.0 * h);
            prop_assert!((fd - grad[i]).abs() <= 1e-6 * (1.0 + grad[i].abs()), "node {} fd {} grad {}", i + 1, fd, grad[i]);
        }
    }
}

#[test]
fn floating_node_is_reported() {
    let text = "COUPLE 1\nC 1 3 1\nL 1 3 1\nL 2 3 1\n";
    let t: CircuitTopology = text.parse().unwrap();
    match derive_reduced_model(&t, 1.0) {
        Err(Error::InactiveNode { node, .. }) => assert_eq!(node, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    let text = "COUPLE 1\n# comment\nC 1 2 abc\n";
    match text.parse::<CircuitTopology>() {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!("C 1 2 1\nL 1 2 1\n".parse::<CircuitTopology>().is_err());
}

#[test]
fn lc_example_has_closed_form_model() {
    let (c_r, c_c, z_c) = (2.0, 0.5, 3.0);
    let t = CircuitTopology::lc_example(1.0, c_r, c_c).unwrap();
    let m = derive_reduced_model(&t, z_c).unwrap();
    let c_p = c_r * c_c / (c_r + c_c);
    assert!((m.c_p - c_p).abs() < 1e-15);
    assert!((m.p[0] - 1.0 / c_r).abs() < 1e-15);
    assert!((m.tau - z_c * c_p).abs() < 1e-15);
    assert!((m.a[(0, 0)] - (1.0 / c_r - c_p / (c_r * c_r))).abs() < 1e-15);
}
