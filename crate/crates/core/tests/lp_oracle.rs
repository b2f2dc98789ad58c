mod oracles;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trl_core::comb::subsets_of;
use trl_core::matchlp::{dual_certificate_bound, fractional_matching, WeightedComplex};

fn small_instance(seed: u64) -> (WeightedComplex, Vec<i64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(3..=7);
    let verts: Vec<u32> = (0..m as u32).collect();
    let mut triples: Vec<Vec<u32>> = subsets_of(&verts, 3).into_iter().filter(|_| rng.gen_bool(0.5)).collect();
    triples.truncate(8);
    let w: Vec<i64> = (0..m).map(|_| rng.gen_range(0..=4)).collect();
    let h = WeightedComplex {
        m,
        layers: vec![verts.iter().map(|&v| vec![v]).collect(), subsets_of(&verts, 2), triples],
        w: w.iter().map(|&x| x as f64 / 4.0).collect(),
    };
    (h, w)
}

#[test]
fn simplex_matches_basis_enumeration() {
    for seed in 0..40 {
        let (h, w) = small_instance(seed);
        let mt = fractional_matching(&h).unwrap();
        assert!(mt.is_feasible(&h));
        let (num, den) = oracles::lp_optimum_by_bases(h.m, &h.layers[2], &w, 4);
        assert_eq!(mt.objective, BigRational::new(BigInt::from(num), BigInt::from(den)), "seed {seed}");
        assert_eq!(dual_certificate_bound(&h, &mt.dual).unwrap(), mt.objective);
    }
}
