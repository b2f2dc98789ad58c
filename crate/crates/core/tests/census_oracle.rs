mod oracles;

use std::collections::BTreeSet;

use proptest::prelude::*;
use trl_core::expand::{dl_census, rooted_census};
use trl_core::randmodel::{sample_gnp, GnpParams};
use trl_core::Hypergraph;

fn check(g: &Hypergraph, root: &[u32], ell: usize, forbidden: &BTreeSet<u32>) {
    let c = rooted_census(g, root, ell, forbidden, None).unwrap();
    let (count, ends) = oracles::census(g, root, ell, forbidden);
    assert_eq!(c.path_count, count, "root {root:?} ell {ell}");
    assert_eq!(c.end_tuples, ends.keys().cloned().collect::<BTreeSet<_>>());
    assert_eq!(c.multiplicity, ends);
    assert!(c.jensen_holds());
}

#[test]
fn complete_graph_counts() {
    let g = Hypergraph::complete(3, 10);
    for ell in 1..=3 {
        check(&g, &[0, 1], ell, &BTreeSet::new());
    }
    // falling factorial: 8 * 7 * 6 paths of three new vertices
    assert_eq!(rooted_census(&g, &[0, 1], 3, &BTreeSet::new(), None).unwrap().path_count, 336);
    check(&g, &[4, 2], 2, &BTreeSet::from([0, 9]));
}

#[test]
fn dl_census_k_equals_ell_plus_one() {
    let g = Hypergraph::complete(3, 7);
    let d = dl_census(&g, &[0, 1], 3, None).unwrap();
    assert!(d.jensen_holds);
    assert_eq!(d.path_count, 5 * 4 * 3);
    assert!(dl_census(&g, &[0, 1], 2, None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_graphs_match_oracle(seed in 0u64..100_000, a in 0u32..9, b in 0u32..9, ell in 1usize..4) {
        prop_assume!(a != b);
        let g = sample_gnp(&GnpParams { n: 9, k: 3, p: 0.8, seed });
        check(&g, &[a, b], ell, &BTreeSet::new());
    }
}
