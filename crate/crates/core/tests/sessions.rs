use blockqkd::attacks::{BlockAttackSpec, EveRecord, Granularity};
use blockqkd::oracle::intercept_resend_triples;
use blockqkd::protocol::{run_session, BasisMode, ProtocolConfig};
use blockqkd::randomness::{consumption_ratio, Stage};
use num_rational::Ratio;

fn config(mode: BasisMode, n: usize, blocks: usize, seed: u64) -> ProtocolConfig {
    ProtocolConfig { mode, block_size: n, num_blocks: blocks, seed, ..ProtocolConfig::default() }
}

#[test]
fn block_sifting_is_all_or_nothing() {
    let n = 5;
    let r = run_session(&config(BasisMode::PerBlock, n, 4000, 11), &BlockAttackSpec::none()).unwrap();
    for rec in &r.records {
        let kept = rec.sifted.iter().filter(|&&s| s).count();
        assert!(kept == 0 || kept == n);
        assert_eq!(kept == n, rec.alice_bases == rec.bob_bases);
    }
    assert_eq!(r.sifted_bits, r.kept_blocks * n);
    let frac = r.kept_blocks as f64 / 4000.0;
    let sigma = (0.25f64 / 4000.0).sqrt();
    assert!((frac - 0.5).abs() < 5.0 * sigma, "{frac}");
}

#[test]
fn alice_ratio_is_exact() {
    for n in [2u64, 7, 50] {
        let block = run_session(&config(BasisMode::PerBlock, n as usize, 30, 1), &BlockAttackSpec::none()).unwrap();
        let base = run_session(&config(BasisMode::PerQubit, 1, 30 * n as usize, 1), &BlockAttackSpec::none()).unwrap();
        let r = consumption_ratio(&block.consumption(), &base.consumption()).unwrap();
        assert_eq!(r.quantum_phase_alice, Ratio::new(n + 1, 2 * n));
        assert_eq!(r.quantum_phase_bob, Ratio::new(1, n));
        assert_eq!(r.quantum_phase_total, Ratio::new(n + 2, 3 * n));
        assert_eq!(r.per_stage[&Stage::AliceBits], Some(Ratio::from_integer(1)));
    }
}

#[test]
fn intercept_resend_matches_oracle_in_both_granularities() {
    let oracle = intercept_resend_triples(1.0, 0.0).unwrap();
    let qber = oracle.probability_of(|o| o[0] != o[1]);
    let iea = oracle.mutual_information("e", "a").unwrap();
    let mut seen = Vec::new();
    for g in [Granularity::PerQubit, Granularity::PerBlock] {
        let r = run_session(&config(BasisMode::PerBlock, 8, 3000, 21), &BlockAttackSpec::intercept_resend(1.0, g)).unwrap();
        assert!(r.sifted_bits >= 10_000);
        let rate = r.rate().unwrap();
        assert!((r.qber_true - qber).abs() < 0.02, "{g:?} qber {}", r.qber_true);
        assert!((rate.i_ea - iea).abs() < 0.02, "{g:?} I(E:A) {}", rate.i_ea);
        assert!(!rate.distillable);
        seen.push((r.qber_true, rate.i_ea));
    }
    assert!((seen[0].0 - seen[1].0).abs() < 0.01);
    assert!((seen[0].1 - seen[1].1).abs() < 0.01);
}

#[test]
fn channel_noise_matches_oracle_qber() {
    let oracle = intercept_resend_triples(0.0, 0.1).unwrap();
    let expected = oracle.probability_of(|o| o[0] != o[1]);
    let c = ProtocolConfig { channel_flip_prob: 0.1, ..config(BasisMode::PerQubit, 10, 2000, 3) };
    let r = run_session(&c, &BlockAttackSpec::none()).unwrap();
    let sigma = (expected * (1.0 - expected) / r.sifted_bits as f64).sqrt();
    assert!((r.qber_true - expected).abs() < 5.0 * sigma, "{}", r.qber_true);
}

#[test]
fn per_block_intercept_uses_one_eve_basis() {
    let r = run_session(&config(BasisMode::PerBlock, 6, 200, 4), &BlockAttackSpec::intercept_resend(1.0, Granularity::PerBlock)).unwrap();
    for rec in &r.records {
        let EveRecord::InterceptResend(v) = &rec.eve else { panic!("missing record") };
        let b = v[0].unwrap().basis;
        assert!(v.iter().all(|x| x.unwrap().basis == b));
    }
}

#[test]
fn sessions_are_reproducible_and_seed_sensitive() {
    let c = ProtocolConfig { channel_flip_prob: 0.05, ..config(BasisMode::PerBlock, 4, 500, 9) };
    let attack = BlockAttackSpec::intercept_resend(0.4, Granularity::PerQubit);
    let a = run_session(&c, &attack).unwrap();
    assert_eq!(a, run_session(&c, &attack).unwrap());
    let other = run_session(&ProtocolConfig { seed: 10, ..c }, &attack).unwrap();
    assert_ne!(a.sifted_keys, other.sifted_keys);
}
