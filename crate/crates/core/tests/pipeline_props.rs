use std::collections::BTreeSet;

use proptest::prelude::*;
use trl_core::hypercore::*;
use trl_core::pipeline::*;
use trl_core::randmodel::{apply_adversary, sample_gnp, AdversarySpec, GnpParams};

fn instance(n: usize, p: f64, seed: u64) -> Hypergraph {
    let g = sample_gnp(&GnpParams { n, k: 3, p, seed });
    let target = (0.6 * p * n as f64).ceil() as usize;
    apply_adversary(&g, &AdversarySpec::CodegreeFloorRepair { q: 0.3, target, host_capped: true }, seed).unwrap()
}

#[test]
fn identical_inputs_give_identical_traces() {
    let g = instance(40, 0.3, 7);
    let cfg = PipelineConfig { seed: 7, ..Default::default() };
    let a = find_tight_hamilton(&g, &cfg);
    let b = find_tight_hamilton(&g, &cfg);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.trace.ordered());
}

#[test]
fn spiked_template_produces_valid_reservoirs() {
    let g = sample_gnp(&GnpParams { n: 50, k: 3, p: 0.6, seed: 2 });
    let cfg = PipelineConfig { template: AbsorberTemplate::Spiked { t: 2 }, ..Default::default() };
    let (p, _) = build_reservoir_path(&g, &[1, 2, 3], &BTreeSet::new(), &cfg).unwrap();
    let rep = verify_reservoir(&g, &p, ReservoirMode::Exhaustive, 16).unwrap();
    assert!(rep.ok && rep.subsets_checked == 8);
}

#[test]
fn leftover_vertices_are_absorbed_through_the_reservoir() {
    let g = Hypergraph::complete(3, 40);
    let cfg = PipelineConfig { l_ratio: 0.1, ..Default::default() };
    let r: Vec<u32> = (30..40).collect();
    let (pres, _) = build_reservoir_path(&g, &r, &BTreeSet::new(), &cfg).unwrap();
    let on: BTreeSet<u32> = pres.base.seq.iter().copied().collect();
    let mut rest: Vec<u32> = (0..40).filter(|v| !on.contains(v)).collect();
    let leftover = rest.split_off(rest.len() - 2);
    let mut seq = pres.base.seq.clone();
    seq.extend(&rest);
    let (cyc, rep) = cover_and_close(&g, &TightPath::new(seq), &pres, &leftover, &cfg).unwrap();
    assert!(is_tight_cycle(&g, &cyc.cyc).unwrap());
    assert_eq!(rep.sides, vec!["w", "v"]);
    assert_eq!(rep.absorbed, leftover);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn connect_returns_tight_paths(n in 10usize..20, seed in 0u64..10_000, len in 0usize..4) {
        let g = sample_gnp(&GnpParams { n, k: 3, p: 0.5, seed });
        let avoid: BTreeSet<u32> = BTreeSet::from([4, 5]);
        match connect(&g, &[0, 1], &[2, 3], &avoid, len, 100_000).unwrap() {
            ConnectOutcome::Found(p) => {
                prop_assert!(is_tight_path(&g, &p.seq).unwrap());
                prop_assert_eq!(&p.seq[..2], &[0, 1]);
                prop_assert_eq!(&p.seq[p.len() - 2..], &[3, 2]);
                prop_assert!(p.len() <= 4 + len);
                prop_assert!(p.seq.iter().all(|v| !avoid.contains(v)));
            }
            ConnectOutcome::Absent | ConnectOutcome::Budget => {}
        }
    }

    #[test]
    fn reservoirs_verify_exhaustively(seed in 0u64..10_000, size in 0usize..6) {
        let g = instance(40, 0.5, seed);
        let r: Vec<u32> = (0..size as u32).map(|i| i * 5 + 1).collect();
        let cfg = PipelineConfig { seed, ..Default::default() };
        if let Ok((p, _)) = build_reservoir_path(&g, &r, &BTreeSet::new(), &cfg) {
            let rep = verify_reservoir(&g, &p, ReservoirMode::Exhaustive, 16).unwrap();
            prop_assert!(rep.ok);
            prop_assert_eq!(rep.subsets_checked, 1usize << size);
        }
    }
}
