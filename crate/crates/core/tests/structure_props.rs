mod oracles;

use std::collections::BTreeSet;

use num_rational::BigRational;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trl_core::regcomplex::*;
use trl_core::Hypergraph;

fn chain_instance(seed: u64) -> (Vec<Vec<u32>>, Hypergraph, BTreeSet<Vec<u32>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts: Vec<Vec<u32>> = (0..4).map(|i| (i * 6..(i + 1) * 6).collect()).collect();
    let mut edges = Vec::new();
    for s in 0..2 {
        for &a in &parts[s] {
            for &b in &parts[s + 1] {
                for &c in &parts[s + 2] {
                    if rng.gen_bool(0.4) {
                        edges.push(vec![a, b, c]);
                    }
                }
            }
        }
    }
    let top = Hypergraph::new(3, 24, edges).unwrap();
    let mut r0 = BTreeSet::new();
    for &a in &parts[0] {
        for &b in &parts[1] {
            if rng.gen_bool(0.3) {
                r0.insert(vec![a, b]);
            }
        }
    }
    (parts, top, r0)
}

#[test]
fn fine_reach_matches_enumeration() {
    for seed in 0..20 {
        let (parts, top, r0) = chain_instance(seed);
        assert_eq!(fine_reach(&parts, &top, None, &r0).unwrap(), oracles::chain_ends(&parts, &top, &r0));
    }
}

fn refinement_pair(seed: u64, n: usize) -> (FamilyOfPartitions, FamilyOfPartitions, Hypergraph) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coarse_clusters: Vec<Vec<u32>> = (0..3).map(|c| (0..n as u32).filter(|v| v % 3 == c).collect()).collect();
    let fine_clusters: Vec<Vec<u32>> = (0..6).map(|c| (0..n as u32).filter(|v| v % 6 == c).collect()).collect();
    let salt: u64 = rng.gen();
    let coarse = FamilyOfPartitions::from_assignment(3, n, coarse_clusters, |s| (s[0] as u64 + s[1] as u64 + salt) % 2).unwrap();
    let fine = FamilyOfPartitions::from_assignment(3, n, fine_clusters, |s| {
        let base = (s[0] as u64 + s[1] as u64 + salt) % 2;
        base * 2 + (s[0] as u64 * 7 + s[1] as u64 * 13 + salt) % 2
    })
    .unwrap();
    let p = rng.gen_range(0.2..0.8);
    let g = trl_core::randmodel::sample_gnp(&trl_core::randmodel::GnpParams { n, k: 3, p, seed });
    (coarse, fine, g)
}

#[test]
fn energy_grows_under_refinement() {
    for seed in 0..10 {
        let (coarse, fine, g) = refinement_pair(seed, 18);
        assert!(refines(&fine, &coarse).is_ok());
        let (ec, ef) = (energy_exact(&coarse, &[g.clone()]), energy_exact(&fine, &[g]));
        assert!(ef >= ec, "seed {seed}");
        assert!(ef <= BigRational::from_integer(1.into()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn reduction_is_idempotent(seed in 0u64..10_000, t in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let verts: Vec<u32> = (0..7).collect();
        let m = Multicomplex::complete(3, &verts);
        let regular: BTreeSet<usize> = m.ids_of_size(3).into_iter().filter(|_| rng.gen_bool(0.7)).collect();
        let eps = rng.gen_range(1e-6..1e-3);
        let (r, _) = reduced_multicomplex(&m, &regular, &[1.0], eps, t, DensityCut::None);
        let (again, rep) = reduced_multicomplex(&r, &regular, &[1.0], eps, t, DensityCut::None);
        prop_assert_eq!(again, r.clone());
        prop_assert!(rep.removed.is_empty());
        prop_assert!(r.validate().is_ok());
    }
}
