//! Named circuits whose exact outcome distributions back the simulator's
//! statistical claims, and the binomial test that compares them with
//! sampled frequencies.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::infotheory::JointDistribution;
use crate::quantum::{enumerate_outcomes, Basis, Circuit, UnitarySpec};
use crate::randomness::{LedgerRng, Party, Stage};

/// Eve's symbol when she did not measure in the announced basis.
const ERASED: u32 = crate::attacks::ERASED;

/// An event whose exact probability is known independently of the circuit.
#[derive(Debug, Clone, Copy)]
pub struct OracleEvent {
    pub label: &'static str,
    pub holds: fn(&[u32]) -> bool,
    pub probability: f64,
}

#[derive(Debug, Clone)]
pub struct OracleCase {
    pub name: &'static str,
    pub circuit: Circuit,
    pub events: Vec<OracleEvent>,
}

/// Singlet measured half by half in `basis`: variables `q0`, `q1`.
pub fn singlet_pair(basis: Basis) -> Circuit {
    Circuit::new().singlet().measure(0, basis, "q0").measure(1, basis, "q1")
}

/// Prepare-and-measure of one qubit under intercept-resend on a fraction
/// `p` and channel flips with probability `c`, Alice and Bob in matched
/// bases. Variables: `a`, `basis`, `hit`, `eve_basis`, `e`, `flip`, `b`.
pub fn intercept_resend_qubit(p: f64, c: f64) -> Circuit {
    Circuit::new()
        .coin("a", 0.5)
        .coin("basis", 0.5)
        .bb84("a", "basis")
        .coin("hit", p)
        .coin("eve_basis", 0.5)
        .measure_if(0, "eve_basis", "e", &[("hit", 1)])
        .coin("flip", c)
        .unitary_if(UnitarySpec::flip(Basis::Z), &[0], &[("flip", 1), ("basis", 0)])
        .unitary_if(UnitarySpec::flip(Basis::X), &[0], &[("flip", 1), ("basis", 1)])
        .measure(0, "basis", "b")
}

/// Sifted triples `(a, b, e)` of [`intercept_resend_qubit`], where `e` is
/// Eve's outcome when she measured in the announced basis and erased
/// otherwise.
pub fn intercept_resend_triples(p: f64, c: f64) -> Result<JointDistribution> {
    let joint = enumerate_outcomes(&intercept_resend_qubit(p, c))?;
    joint.derive(["a", "b", "e"], |o| {
        let (a, basis, hit, eve_basis, e, b) = (o[0], o[1], o[2], o[3], o[4], o[6]);
        let sym = if hit == 1 && eve_basis == basis { e } else { ERASED };
        vec![a, b, sym]
    })
}

/// Full intercept-resend on a 2-qubit block with one Eve basis for the
/// block. Variables: `a0`, `a1`, `basis`, `eve_basis`, `e0`, `e1`, `b0`, `b1`.
pub fn block_intercept_resend() -> Circuit {
    Circuit::new()
        .coin("a0", 0.5)
        .coin("a1", 0.5)
        .coin("basis", 0.5)
        .bb84("a0", "basis")
        .bb84("a1", "basis")
        .coin("eve_basis", 0.5)
        .measure(0, "eve_basis", "e0")
        .measure(1, "eve_basis", "e1")
        .measure(0, "basis", "b0")
        .measure(1, "basis", "b1")
}

/// Singlet-simulated slot: qubit 0 goes to Bob, Eve keeps qubit 1. With
/// `eve_first`, Eve measures before Bob. Variables: `bob`, `eve` in
/// execution order.
pub fn simulated_slot(basis: Basis, eve_first: bool) -> Circuit {
    let c = Circuit::new().singlet();
    if eve_first {
        c.measure(1, basis, "eve").measure(0, basis, "bob")
    } else {
        c.measure(0, basis, "bob").measure(1, basis, "eve")
    }
}

type EventSpec = (&'static str, fn(&[u32]) -> bool, f64);

fn events(list: &[EventSpec]) -> Vec<OracleEvent> {
    list.iter().map(|&(label, holds, probability)| OracleEvent { label, holds, probability }).collect()
}

/// Every enumeration-backed example used by the test suites.
pub fn derived_cases() -> Vec<OracleCase> {
    let mut cases = Vec::new();
    for (name, basis) in [("singlet_zz", Basis::Z), ("singlet_xx", Basis::X)] {
        cases.push(OracleCase {
            name,
            circuit: singlet_pair(basis),
            events: events(&[
                ("anti-correlated", |o| o[0] != o[1], 1.0),
                ("(0,1)", |o| o == [0, 1], 0.5),
            ]),
        });
    }
    cases.push(OracleCase {
        name: "plus_measured_in_z",
        circuit: Circuit::new().bb84(false, Basis::X).measure(0, Basis::Z, "q"),
        events: events(&[("outcome 1", |o| o[0] == 1, 0.5)]),
    });
    cases.push(OracleCase {
        name: "mismatched_bases_no_attack",
        circuit: Circuit::new().coin("a", 0.5).bb84("a", Basis::Z).measure(0, Basis::X, "b"),
        events: events(&[("b = 1", |o| o[1] == 1, 0.5), ("b = 1 | a = 0", |o| o == [0, 1], 0.25)]),
    });
    cases.push(OracleCase {
        name: "intercept_resend_per_qubit",
        circuit: intercept_resend_qubit(1.0, 0.0),
        events: events(&[("error", |o| o[0] != o[6], 0.25)]),
    });
    cases.push(OracleCase {
        name: "intercept_resend_per_block_n2",
        circuit: block_intercept_resend(),
        events: events(&[
            ("pattern (0,0)", |o| o[0] == o[6] && o[1] == o[7], 0.625),
            ("pattern (1,1)", |o| o[0] != o[6] && o[1] != o[7], 0.125),
            ("error on qubit 0", |o| o[0] != o[6], 0.25),
        ]),
    });
    for (name, basis) in [("delayed_simulated_slot_z", Basis::Z), ("delayed_simulated_slot_x", Basis::X)] {
        cases.push(OracleCase {
            name,
            circuit: simulated_slot(basis, false),
            events: events(&[
                ("eve's complement equals bob", |o| o[0] != o[1], 1.0),
                ("bob 1, eve records 1", |o| o == [1, 0], 0.5),
            ]),
        });
    }
    cases
}

/// Outcome frequencies of `trials` independent runs.
pub fn sample_counts(circuit: &Circuit, trials: usize, seed: u64) -> Result<BTreeMap<Vec<u32>, u64>> {
    let mut rng = LedgerRng::from_seed(seed);
    let mut coin = rng.coin(Party::Shared, Stage::Sampling);
    let mut counts = BTreeMap::new();
    for _ in 0..trials {
        *counts.entry(circuit.sample(&mut coin)?).or_insert(0) += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agreement {
    /// Largest |observed - expected| in binomial standard deviations.
    pub worst_sigma: f64,
    /// Outcomes seen in samples but impossible per the oracle, or vice
    /// versa for certain outcomes.
    pub impossible: usize,
    pub passed: bool,
}

fn binomial_sigma(p: f64, hits: u64, trials: u64) -> Option<f64> {
    let n = trials as f64;
    let sd = (p * (1.0 - p) / n).sqrt();
    let diff = (hits as f64 / n - p).abs();
    if sd == 0.0 {
        (diff < 1e-12).then_some(0.0)
    } else {
        Some(diff / sd)
    }
}

/// Compares each outcome, and each event, with the oracle at `k` sigma.
pub fn agreement(oracle: &JointDistribution, counts: &BTreeMap<Vec<u32>, u64>, case_events: &[OracleEvent], k: f64) -> Agreement {
    let trials: u64 = counts.values().sum();
    let mut worst: f64 = 0.0;
    let mut impossible = 0;
    let mut outcomes: Vec<&Vec<u32>> = oracle.table().keys().collect();
    outcomes.extend(counts.keys().filter(|o| !oracle.table().contains_key(*o)));
    let mut check = |p: f64, hits: u64| match binomial_sigma(p, hits, trials) {
        Some(s) => worst = worst.max(s),
        None => impossible += 1,
    };
    for o in outcomes {
        check(oracle.probability(o), counts.get(o).copied().unwrap_or(0));
    }
    for e in case_events {
        let hits = counts.iter().filter(|(o, _)| (e.holds)(o)).map(|(_, c)| c).sum();
        check(oracle.probability_of(e.holds), hits);
    }
    Agreement { worst_sigma: worst, impossible, passed: impossible == 0 && worst <= k }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_reproduces_stated_event_probabilities() {
        for case in derived_cases() {
            let joint = enumerate_outcomes(&case.circuit).unwrap();
            assert!((joint.total() - 1.0).abs() < 1e-10, "{}", case.name);
            for e in &case.events {
                let p = joint.probability_of(e.holds);
                assert!((p - e.probability).abs() < 1e-12, "{} / {}: {p}", case.name, e.label);
            }
        }
    }

    #[test]
    fn full_intercept_gives_half_bit_to_eve() {
        let t = intercept_resend_triples(1.0, 0.0).unwrap();
        assert!((t.mutual_information("e", "a").unwrap() - 0.5).abs() < 1e-12);
        assert!((t.mutual_information("e", "b").unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn qber_formula() {
        for (p, c) in [(0.0, 0.0), (0.4, 0.0), (1.0, 0.1), (0.3, 0.05)] {
            let t = intercept_resend_triples(p, c).unwrap();
            let q = t.probability_of(|o| o[0] != o[1]);
            assert!((q - (p / 4.0 + c * (1.0 - p / 2.0))).abs() < 1e-12, "p={p} c={c}: {q}");
        }
    }

    #[test]
    fn agreement_flags_impossible_outcomes() {
        let oracle = enumerate_outcomes(&singlet_pair(Basis::Z)).unwrap();
        let counts = BTreeMap::from([(vec![0, 1], 50), (vec![1, 0], 49), (vec![0, 0], 1)]);
        assert!(!agreement(&oracle, &counts, &[], 5.0).passed);
        let counts = BTreeMap::from([(vec![0, 1], 50), (vec![1, 0], 50)]);
        assert!(agreement(&oracle, &counts, &[], 5.0).passed);
    }
}
