use blockqkd::attacks::{
    default_corpus, delayed_measurement, singlet_simulation, verify_reduction, verify_reduction_at, AncillaPolicy,
};
use blockqkd::quantum::{prepare_bb84, Basis, UnitarySpec};
use blockqkd::randomness::{LedgerRng, Party, Stage};

#[test]
fn default_corpus_passes_in_every_slot() {
    for case in default_corpus(2024, 20).unwrap() {
        for slot in 0..case.n {
            let r = verify_reduction_at(&case.u, case.n, case.m, [0.5, 0.5], slot).unwrap();
            assert!(r.passed, "{} n={} m={} slot={slot}: {}", case.name, case.n, case.m, r.max_deviation);
        }
    }
}

#[test]
fn report_covers_every_branch() {
    let u = UnitarySpec::random(5, 3);
    let r = verify_reduction(&u, 3, 2, [0.5, 0.5]).unwrap();
    // 2 bases x 2 Alice bits x 4 kept patterns
    assert_eq!(r.branches.len(), 16);
    assert!(r.branches.iter().all(|b| (b.weight - 0.25).abs() < 1e-12));
    assert!(r.passed);
}

#[test]
fn sampled_delayed_measurement_reproduces_genuine_block() {
    // with U = identity the forwarded block after Eve's measurement is a
    // product of BB84 states: Alice's bit at slot 0, Eve's bits elsewhere
    let u = UnitarySpec::identity(3);
    let mut rng = LedgerRng::from_seed(77);
    for trial in 0..50 {
        let basis = if trial % 2 == 0 { Basis::Z } else { Basis::X };
        let bit = trial % 3 == 0;
        let mut block = singlet_simulation(&prepare_bb84(bit, basis), 3, &u, 0, 0).unwrap();
        let out = delayed_measurement(&mut block, basis, AncillaPolicy::default(), &mut rng.coin(Party::Eve, Stage::Attack))
            .unwrap();
        let mut expected = prepare_bb84(bit, basis);
        for slot in 1..3 {
            expected = expected.tensor(&prepare_bb84(out.simulated_bits[slot].unwrap(), basis)).unwrap();
        }
        let got = block.state().reduced_density(&block.forwarded()).unwrap();
        assert!(got.max_abs_diff(&expected.density()).unwrap() < 1e-12);
    }
}
