//! Counted randomness.
//!
//! Every random bit used anywhere in a session is drawn through [`LedgerRng`],
//! which wraps a seedable ChaCha generator and charges each draw to a
//! `(party, stage)` entry of a [`RandomnessLedger`]. Nothing else in the crate
//! holds a generator, so the ledger is complete by construction.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Alice,
    Bob,
    Eve,
    Shared,
}

impl Party {
    pub const ALL: [Party; 4] = [Party::Alice, Party::Bob, Party::Eve, Party::Shared];

    pub fn as_str(self) -> &'static str {
        match self {
            Party::Alice => "alice",
            Party::Bob => "bob",
            Party::Eve => "eve",
            Party::Shared => "shared",
        }
    }
}

/// Protocol stage a random draw is charged to.
///
/// `Channel` covers the simulated channel noise; like `BobMeasurement` it is
/// physics, not protocol randomness, and is excluded from consumption ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    AliceBasis,
    AliceBits,
    BobBasis,
    BobMeasurement,
    Channel,
    Sampling,
    EcPermutation,
    PaSeed,
    Attack,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::AliceBasis,
        Stage::AliceBits,
        Stage::BobBasis,
        Stage::BobMeasurement,
        Stage::Channel,
        Stage::Sampling,
        Stage::EcPermutation,
        Stage::PaSeed,
        Stage::Attack,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::AliceBasis => "alice_basis",
            Stage::AliceBits => "alice_bits",
            Stage::BobBasis => "bob_basis",
            Stage::BobMeasurement => "bob_measurement",
            Stage::Channel => "channel",
            Stage::Sampling => "sampling",
            Stage::EcPermutation => "ec_permutation",
            Stage::PaSeed => "pa_seed",
            Stage::Attack => "attack",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::UnknownStage(s.to_string()))
    }
}

impl FromStr for Party {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Party::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownParty(s.to_string()))
    }
}

/// Bit counts per `(party, stage)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RandomnessLedger {
    counts: BTreeMap<(Party, Stage), u64>,
}

impl RandomnessLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn charge(&mut self, party: Party, stage: Stage, bits: u64) {
        if bits > 0 {
            *self.counts.entry((party, stage)).or_insert(0) += bits;
        }
    }

    pub fn get(&self, party: Party, stage: Stage) -> u64 {
        self.counts.get(&(party, stage)).copied().unwrap_or(0)
    }

    /// Total over all parties for one stage.
    pub fn stage_total(&self, stage: Stage) -> u64 {
        self.counts
            .iter()
            .filter(|((_, s), _)| *s == stage)
            .map(|(_, c)| *c)
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (Party, Stage, u64)> + '_ {
        self.counts.iter().map(|(&(p, s), &c)| (p, s, c))
    }

    /// Commutative merge: counts add entry-wise.
    pub fn merge(&mut self, other: &RandomnessLedger) {
        for (p, s, c) in other.entries() {
            self.charge(p, s, c);
        }
    }

    /// Entry-wise difference `self - earlier`; `earlier` must be a prefix snapshot.
    pub fn delta_since(&self, earlier: &RandomnessLedger) -> RandomnessLedger {
        let mut out = RandomnessLedger::new();
        for (p, s, c) in self.entries() {
            out.charge(p, s, c - earlier.get(p, s));
        }
        out
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            entries: self
                .entries()
                .map(|(party, stage, bits)| LedgerEntry { party, stage, bits })
                .collect(),
            by_stage: Stage::ALL
                .iter()
                .map(|&s| (s.as_str().to_string(), self.stage_total(s)))
                .collect(),
            total: self.total(),
        }
    }
}

/// Serializable view of a ledger with stable ordering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub entries: Vec<LedgerEntry>,
    pub by_stage: BTreeMap<String, u64>,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub party: Party,
    pub stage: Stage,
    pub bits: u64,
}

impl Serialize for RandomnessLedger {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.snapshot().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RandomnessLedger {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let snap = LedgerSnapshot::deserialize(deserializer)?;
        let mut ledger = RandomnessLedger::new();
        for e in snap.entries {
            ledger.charge(e.party, e.stage, e.bits);
        }
        Ok(ledger)
    }
}

/// Source of biased coin flips, as consumed by projective measurement.
pub trait Coin {
    /// Returns `true` with probability `p_one`.
    fn flip(&mut self, p_one: f64) -> bool;
}

/// Seeded generator that charges every bit it hands out to the ledger.
#[derive(Debug, Clone)]
pub struct LedgerRng {
    rng: ChaCha8Rng,
    word: u64,
    word_bits: u32,
    ledger: RandomnessLedger,
}

impl LedgerRng {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            word: 0,
            word_bits: 0,
            ledger: RandomnessLedger::new(),
        }
    }

    pub fn ledger(&self) -> &RandomnessLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> RandomnessLedger {
        self.ledger
    }

    fn next_raw_bit(&mut self) -> bool {
        if self.word_bits == 0 {
            self.word = self.rng.next_u64();
            self.word_bits = 64;
        }
        let bit = self.word & 1 == 1;
        self.word >>= 1;
        self.word_bits -= 1;
        bit
    }

    pub fn draw_bit(&mut self, party: Party, stage: Stage) -> bool {
        self.ledger.charge(party, stage, 1);
        self.next_raw_bit()
    }

    pub fn draw_bits(&mut self, party: Party, stage: Stage, count: usize) -> Vec<bool> {
        self.ledger.charge(party, stage, count as u64);
        (0..count).map(|_| self.next_raw_bit()).collect()
    }

    /// Uniform integer in `0..n` from `ceil(log2 n)`-bit draws with rejection.
    pub fn uniform_index(&mut self, party: Party, stage: Stage, n: usize) -> usize {
        assert!(n > 0, "uniform_index over an empty range");
        if n == 1 {
            return 0;
        }
        let width = usize::BITS - (n - 1).leading_zeros();
        loop {
            let mut v = 0usize;
            for _ in 0..width {
                v = (v << 1) | self.next_raw_bit() as usize;
            }
            self.ledger.charge(party, stage, width as u64);
            if v < n {
                return v;
            }
        }
    }

    /// Exact Bernoulli trial that compares fresh random bits against the
    /// binary expansion of `p`, stopping at the first difference. Consumes
    /// two bits on average and none when `p` is 0 or 1.
    pub fn bernoulli(&mut self, party: Party, stage: Stage, p: f64) -> bool {
        if !(p > 0.0) {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        let mut rest = p;
        let mut used = 0u64;
        let result = loop {
            if rest == 0.0 {
                // random expansion is >= p from here on
                break false;
            }
            rest *= 2.0;
            let p_bit = if rest >= 1.0 {
                rest -= 1.0;
                true
            } else {
                false
            };
            let r_bit = self.next_raw_bit();
            used += 1;
            if r_bit != p_bit {
                break p_bit;
            }
        };
        self.ledger.charge(party, stage, used);
        result
    }

    /// Fisher-Yates shuffle of `0..n` built from [`Self::uniform_index`].
    pub fn permutation(&mut self, party: Party, stage: Stage, n: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.uniform_index(party, stage, i + 1);
            perm.swap(i, j);
        }
        perm
    }

    /// Borrow the generator as a [`Coin`] charged to one `(party, stage)`.
    pub fn coin(&mut self, party: Party, stage: Stage) -> StagedCoin<'_> {
        StagedCoin { rng: self, party, stage }
    }
}

pub struct StagedCoin<'a> {
    rng: &'a mut LedgerRng,
    party: Party,
    stage: Stage,
}

impl Coin for StagedCoin<'_> {
    fn flip(&mut self, p_one: f64) -> bool {
        self.rng.bernoulli(self.party, self.stage, p_one)
    }
}

/// Quantum-phase consumption of one session, derived from its ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsumptionReport {
    pub raw_qubits: u64,
    pub per_stage: BTreeMap<Stage, u64>,
    pub quantum_phase_alice: u64,
    pub quantum_phase_bob: u64,
}

impl ConsumptionReport {
    pub fn from_ledger(ledger: &RandomnessLedger, raw_qubits: u64) -> Self {
        let per_stage: BTreeMap<Stage, u64> =
            Stage::ALL.iter().map(|&s| (s, ledger.stage_total(s))).collect();
        Self {
            raw_qubits,
            quantum_phase_alice: per_stage[&Stage::AliceBasis] + per_stage[&Stage::AliceBits],
            quantum_phase_bob: per_stage[&Stage::BobBasis],
            per_stage,
        }
    }

    pub fn quantum_phase_total(&self) -> u64 {
        self.quantum_phase_alice + self.quantum_phase_bob
    }
}

/// Block-mode over per-qubit-mode consumption, as exact ratios.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsumptionRatios {
    /// `None` where the baseline drew nothing for that stage.
    pub per_stage: BTreeMap<Stage, Option<Ratio<u64>>>,
    pub quantum_phase_alice: Ratio<u64>,
    pub quantum_phase_bob: Ratio<u64>,
    pub quantum_phase_total: Ratio<u64>,
}

fn ratio(num: u64, den: u64) -> Result<Ratio<u64>> {
    if den == 0 {
        return Err(Error::EmptyBaseline);
    }
    Ok(Ratio::new(num, den))
}

pub fn consumption_ratio(
    block: &ConsumptionReport,
    baseline: &ConsumptionReport,
) -> Result<ConsumptionRatios> {
    if block.raw_qubits != baseline.raw_qubits {
        return Err(Error::RawQubitMismatch {
            block: block.raw_qubits,
            baseline: baseline.raw_qubits,
        });
    }
    let per_stage = Stage::ALL
        .iter()
        .map(|s| {
            let den = baseline.per_stage[s];
            let r = (den > 0).then(|| Ratio::new(block.per_stage[s], den));
            (*s, r)
        })
        .collect();
    Ok(ConsumptionRatios {
        per_stage,
        quantum_phase_alice: ratio(block.quantum_phase_alice, baseline.quantum_phase_alice)?,
        quantum_phase_bob: ratio(block.quantum_phase_bob, baseline.quantum_phase_bob)?,
        quantum_phase_total: ratio(block.quantum_phase_total(), baseline.quantum_phase_total())?,
    })
}
