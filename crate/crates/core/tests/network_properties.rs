use std::f64::consts::PI;

use proptest::prelude::*;
use qnet::linalg::{max_abs, CMatrix};
use qnet::network::{Block, ComposedNetwork, StaticComponent};
use qnet::observer::{one_way_network, quantum_observer_network, two_way_network};
use qnet::{derive_state_space, make_mode, realizability_residual, Coupling, Error, StateSpace};

fn cavity(omega: f64, rates: &[f64]) -> StateSpace {
    let cps: Vec<Coupling> = rates.iter().map(|r| Coupling::annihilation(*r)).collect();
    derive_state_space(&make_mode(omega, &cps).unwrap())
}

fn assert_close(a: &StateSpace, b: &StateSpace, tol: f64) {
    for (x, y) in [
        (&a.a_minus, &b.a_minus),
        (&a.a_plus, &b.a_plus),
        (&a.b_minus, &b.b_minus),
        (&a.b_plus, &b.b_plus),
        (&a.c_minus, &b.c_minus),
        (&a.c_plus, &b.c_plus),
        (&a.d, &b.d),
    ] {
        assert_eq!(x.shape(), y.shape());
        assert!(max_abs(&(x - y)) <= tol, "deviation {}", max_abs(&(x - y)));
    }
}

#[test]
fn single_block_reduces_to_itself() {
    let ss = derive_state_space(&make_mode(0.3, &[Coupling::annihilation(0.5), Coupling::creation(1.5)]).unwrap());
    let net = ComposedNetwork::concatenate(vec![Block::dynamic("x", ss.clone())]).unwrap();
    assert_eq!(net.reduce().unwrap(), ss);
}

#[test]
fn reduced_feedthrough_is_unitary_for_shipped_networks() {
    let nets = [
        one_way_network(1.0, 0.5).unwrap(),
        two_way_network(1.0, 0.5).unwrap(),
        quantum_observer_network(1.0, 0.5, 2.0, false).unwrap(),
        quantum_observer_network(1.0, 0.5, 2.0, true).unwrap(),
    ];
    for net in nets {
        let d = net.reduce().unwrap().d;
        let n = d.nrows();
        assert!(max_abs(&(d.adjoint() * &d - CMatrix::identity(n, n))) < 1e-12);
    }
}

#[test]
fn dangling_and_reused_ports_are_rejected() {
    let net = ComposedNetwork::concatenate(vec![Block::dynamic("a", cavity(1.0, &[0.5]))]).unwrap();
    assert!(matches!(net.connect("a.out[3]", "a.in[0]"), Err(Error::PortNotFound(_))));
    assert!(matches!(net.connect("b.out[0]", "a.in[0]"), Err(Error::PortNotFound(_))));
    let wired = net.connect("a.out[0]", "a.in[0]").unwrap();
    assert!(matches!(wired.connect("a.out[0]", "a.in[0]"), Err(Error::PortAlreadyUsed(_))));
}

/// A fixed three-block network with several edges, built with its edges
/// inserted in the given order.
fn wired(order: &[usize], thetas: (f64, f64)) -> ComposedNetwork {
    let edges = [
        ("c1.out[0]", "s1.in[0]"),
        ("s1.out[0]", "c2.in[0]"),
        ("c2.out[1]", "s2.in[1]"),
        ("s2.out[0]", "c1.in[1]"),
        ("s1.out[1]", "s2.in[0]"),
    ];
    let mut net = ComposedNetwork::concatenate(vec![
        Block::dynamic("c1", cavity(1.0, &[0.5, 0.3])),
        Block::fixed("s1", StaticComponent::beamsplitter(thetas.0)),
        Block::dynamic("c2", cavity(-0.5, &[0.7, 0.2])),
        Block::fixed("s2", StaticComponent::beamsplitter(thetas.1)),
    ])
    .unwrap();
    for &k in order {
        net = net.connect(edges[k].0, edges[k].1).unwrap();
    }
    net
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wiring_order_is_irrelevant(
        order in Just(vec![0usize, 1, 2, 3, 4]).prop_shuffle(),
        t1 in 0.05f64..(PI / 2.0 - 0.05),
        t2 in 0.05f64..(PI / 2.0 - 0.05),
    ) {
        let base = wired(&[0, 1, 2, 3, 4], (t1, t2)).reduce().unwrap();
        let shuffled = wired(&order, (t1, t2)).reduce().unwrap();
        assert_close(&base, &shuffled, 1e-12);
    }

    #[test]
    fn passive_reductions_stay_realizable(
        rates in prop::collection::vec(0.05f64..3.0, 4),
        omegas in prop::collection::vec(-2.0f64..2.0, 2),
        t1 in 0.05f64..(PI / 2.0 - 0.05),
        t2 in 0.05f64..(PI / 2.0 - 0.05),
        edges in 1usize..=5,
    ) {
        let mut net = ComposedNetwork::concatenate(vec![
            Block::dynamic("c1", cavity(omegas[0], &rates[..2])),
            Block::fixed("s1", StaticComponent::beamsplitter(t1)),
            Block::dynamic("c2", cavity(omegas[1], &rates[2..])),
            Block::fixed("s2", StaticComponent::beamsplitter(t2)),
        ])
        .unwrap();
        let all = [
            ("c1.out[0]", "s1.in[0]"),
            ("s1.out[0]", "c2.in[0]"),
            ("c2.out[1]", "s2.in[1]"),
            ("s2.out[0]", "c1.in[1]"),
            ("s1.out[1]", "s2.in[0]"),
        ];
        for (o, i) in &all[..edges] {
            net = net.connect(o, i).unwrap();
        }
        match net.reduce() {
            Ok(ss) => {
                prop_assert!(realizability_residual(&ss) < 1e-9);
                prop_assert!(ss.is_passive());
            }
            Err(Error::SingularLoop { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
