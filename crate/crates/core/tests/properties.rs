//! Property-based invariants over randomly generated (not necessarily
//! symmetric) circuits.

use proptest::prelude::*;

use modcirc_core::circuit::{truth_table, Circuit, CircuitBuilder, GateId};
use modcirc_core::symmetry::{is_rigid, rigidify};

/// Layered random circuits: every internal gate reads earlier nodes, the
/// last gate is the root. Multiplicities may exceed the modulus.
fn arb_circuit() -> impl Strategy<Value = Circuit> {
    (2u64..=12, 1usize..=5).prop_flat_map(|(m, n)| {
        let gate = (
            prop::collection::vec((any::<prop::sample::Index>(), 1u64..=2 * m), 0..4),
            prop::collection::vec(0..m, 0..4),
        );
        prop::collection::vec(gate, 1..=6).prop_map(move |gates| {
            let mut b = CircuitBuilder::new(m, n);
            let mut nodes: Vec<GateId> = (0..n).map(|i| GateId(i as u32)).collect();
            for (children, accept) in gates {
                let g = b.add_mod(accept.into_iter().collect());
                for (pick, mult) in children {
                    b.wire(*pick.get(&nodes), g, mult);
                }
                nodes.push(g);
            }
            b.set_root(*nodes.last().expect("at least one gate"));
            b.finish().expect("layered construction is valid")
        })
    })
}

proptest! {
    #[test]
    fn normalize_preserves_function(c in arb_circuit()) {
        let norm = c.normalize_multiplicities();
        prop_assert!(norm.size() <= c.size());
        prop_assert_eq!(truth_table(&norm, 20).unwrap(), truth_table(&c, 20).unwrap());
    }

    #[test]
    fn json_round_trip(c in arb_circuit()) {
        let round = Circuit::from_json(&c.to_json()).unwrap();
        prop_assert_eq!(round, c);
    }

    #[test]
    fn evaluation_ignores_listing_order(c in arb_circuit()) {
        let mut shuffled = c.clone();
        shuffled.gates.reverse();
        shuffled.wires.reverse();
        prop_assert_eq!(truth_table(&shuffled, 20).unwrap(), truth_table(&c, 20).unwrap());
    }

    #[test]
    fn rigidify_contract(c in arb_circuit()) {
        let r = rigidify(&c).unwrap();
        prop_assert!(is_rigid(&r).unwrap());
        prop_assert!(r.size() <= c.size());
        prop_assert_eq!(truth_table(&r, 20).unwrap(), truth_table(&c, 20).unwrap());
    }
}
