//! BB84 sessions with per-qubit or per-block basis choices.
//!
//! A session runs `num_blocks` blocks of `block_size` qubits through
//! prepare → attack → channel → measure → announce, then sifts and
//! estimates the QBER on a random disclosed sample. In per-block mode Alice
//! and Bob each draw one basis per block and a block whose bases differ is
//! dropped whole.

use serde::{Deserialize, Serialize};

use crate::attacks::{self, Announcement, BlockAttackSpec, EveRecord};
use crate::error::{Error, Result};
use crate::infotheory::{ck_rate, empirical_joint, RateReport};
use crate::quantum::{prepare_bb84, Basis, QubitId, QubitSystem, StateVector, UnitarySpec};
use crate::randomness::{ConsumptionReport, LedgerRng, Party, RandomnessLedger, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisMode {
    PerQubit,
    PerBlock,
}

impl BasisMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BasisMode::PerQubit => "per_qubit",
            BasisMode::PerBlock => "per_block",
        }
    }
}

impl std::str::FromStr for BasisMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_qubit" => Ok(BasisMode::PerQubit),
            "per_block" => Ok(BasisMode::PerBlock),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub block_size: usize,
    pub num_blocks: usize,
    pub mode: BasisMode,
    pub channel_flip_prob: f64,
    pub sample_fraction: f64,
    pub seed: u64,
    /// Test hook: Bob uses Alice's bases and draws none of his own.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub force_matching_bases: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            block_size: 4,
            num_blocks: 100,
            mode: BasisMode::PerBlock,
            channel_flip_prob: 0.0,
            sample_fraction: 0.1,
            seed: 1,
            force_matching_bases: false,
        }
    }
}

impl ProtocolConfig {
    /// Per-block mode with `block_size == 1` is accepted and behaves exactly
    /// like the per-qubit baseline.
    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 {
            return Err(Error::InvalidConfig("block_size must be at least 1".into()));
        }
        if self.num_blocks == 0 {
            return Err(Error::InvalidConfig("num_blocks must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.channel_flip_prob) {
            return Err(Error::InvalidConfig(format!(
                "channel_flip_prob {} outside [0, 1]",
                self.channel_flip_prob
            )));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sample_fraction {} outside (0, 1)",
                self.sample_fraction
            )));
        }
        Ok(())
    }

    pub fn raw_qubits(&self) -> u64 {
        (self.block_size * self.num_blocks) as u64
    }
}

/// Bases of one block: a single shared basis, or one per position.
///
/// Equality is position-wise, so `Shared(Z)` equals `PerQubit([Z])`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockBases {
    Shared(Basis),
    PerQubit(Vec<Basis>),
}

impl BlockBases {
    pub fn at(&self, i: usize) -> Basis {
        match self {
            BlockBases::Shared(b) => *b,
            BlockBases::PerQubit(v) => v[i],
        }
    }

    pub fn shared(&self) -> Option<Basis> {
        match self {
            BlockBases::Shared(b) => Some(*b),
            BlockBases::PerQubit(v) => match v.as_slice() {
                [first, rest @ ..] if rest.iter().all(|b| b == first) => Some(*first),
                _ => None,
            },
        }
    }
}

impl PartialEq for BlockBases {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (BlockBases::Shared(a), BlockBases::Shared(b)) => a == b,
            (BlockBases::PerQubit(a), BlockBases::PerQubit(b)) => a == b,
            (BlockBases::Shared(a), BlockBases::PerQubit(v)) | (BlockBases::PerQubit(v), BlockBases::Shared(a)) => {
                v.iter().all(|b| b == a)
            }
        }
    }
}

fn draw_bases(mode: BasisMode, n: usize, party: Party, stage: Stage, rng: &mut LedgerRng) -> BlockBases {
    match mode {
        BasisMode::PerBlock => BlockBases::Shared(Basis::from_bit(rng.draw_bit(party, stage))),
        BasisMode::PerQubit => BlockBases::PerQubit(
            rng.draw_bits(party, stage, n).into_iter().map(Basis::from_bit).collect(),
        ),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AliceBlock {
    pub bases: BlockBases,
    pub bits: Vec<bool>,
    pub states: Vec<StateVector>,
}

/// Alice's basis choice(s) first, then her `n` data bits.
pub fn alice_prepare_block(config: &ProtocolConfig, rng: &mut LedgerRng) -> AliceBlock {
    let n = config.block_size;
    let bases = draw_bases(config.mode, n, Party::Alice, Stage::AliceBasis, rng);
    let bits = rng.draw_bits(Party::Alice, Stage::AliceBits, n);
    let states = bits.iter().enumerate().map(|(i, &b)| prepare_bb84(b, bases.at(i))).collect();
    AliceBlock { bases, bits, states }
}

/// Channel noise: each qubit independently has its two preparation-basis
/// eigenstates exchanged with probability `flip_prob`. Returns the number
/// of flips.
pub fn transmit(
    system: &mut QubitSystem,
    qubits: &[QubitId],
    prep_bases: &BlockBases,
    flip_prob: f64,
    rng: &mut LedgerRng,
) -> Result<usize> {
    let mut flips = 0;
    for (i, &q) in qubits.iter().enumerate() {
        if rng.bernoulli(Party::Shared, Stage::Channel, flip_prob) {
            system.apply(&UnitarySpec::flip(prep_bases.at(i)), &[q])?;
            flips += 1;
        }
    }
    Ok(flips)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BobBlock {
    pub bases: BlockBases,
    pub outcomes: Vec<bool>,
}

/// Bob's basis choice(s), then one measurement per qubit. Born-rule
/// sampling is charged to `bob_measurement`, separate from `bob_basis`.
pub fn bob_measure_block(
    system: &mut QubitSystem,
    qubits: &[QubitId],
    config: &ProtocolConfig,
    forced_bases: Option<&BlockBases>,
    rng: &mut LedgerRng,
) -> Result<BobBlock> {
    let n = config.block_size;
    if qubits.len() != n {
        return Err(Error::QubitCount { expected: n, got: qubits.len() });
    }
    let bases = match forced_bases {
        Some(b) => b.clone(),
        None => draw_bases(config.mode, n, Party::Bob, Stage::BobBasis, rng),
    };
    let mut outcomes = Vec::with_capacity(n);
    for (i, &q) in qubits.iter().enumerate() {
        let mut coin = rng.coin(Party::Bob, Stage::BobMeasurement);
        outcomes.push(system.measure(q, bases.at(i), &mut coin)?);
    }
    Ok(BobBlock { bases, outcomes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    pub alice_bits: Vec<bool>,
    pub alice_bases: BlockBases,
    pub bob_bases: BlockBases,
    pub bob_outcomes: Vec<bool>,
    /// Per position; in per-block mode every entry equals the block verdict.
    pub sifted: Vec<bool>,
    pub eve: EveRecord,
}

impl BlockRecord {
    pub fn block_kept(&self) -> bool {
        self.sifted.iter().any(|&s| s)
    }
}

fn sift_flags(mode: BasisMode, alice: &BlockBases, bob: &BlockBases, n: usize) -> Vec<bool> {
    match mode {
        BasisMode::PerBlock => vec![alice.at(0) == bob.at(0); n],
        BasisMode::PerQubit => (0..n).map(|i| alice.at(i) == bob.at(i)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiftOutcome {
    pub alice_key: Vec<bool>,
    pub bob_key: Vec<bool>,
    /// Blocks contributing at least one sifted bit.
    pub kept_blocks: usize,
    /// `(block, position)` of each sifted bit.
    pub positions: Vec<(usize, usize)>,
}

pub fn sift(records: &[BlockRecord], mode: BasisMode) -> SiftOutcome {
    let mut out = SiftOutcome { alice_key: Vec::new(), bob_key: Vec::new(), kept_blocks: 0, positions: Vec::new() };
    for (b, rec) in records.iter().enumerate() {
        let flags = sift_flags(mode, &rec.alice_bases, &rec.bob_bases, rec.alice_bits.len());
        let mut kept = false;
        for (i, keep) in flags.into_iter().enumerate() {
            if keep {
                kept = true;
                out.alice_key.push(rec.alice_bits[i]);
                out.bob_key.push(rec.bob_outcomes[i]);
                out.positions.push((b, i));
            }
        }
        out.kept_blocks += kept as usize;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QberEstimate {
    pub estimate: f64,
    /// Sorted indices into the sifted key.
    pub disclosed: Vec<usize>,
}

/// Discloses `round(len * sample_fraction)` uniformly chosen positions
/// (at least one) and returns their mismatch fraction.
pub fn estimate_qber(alice: &[bool], bob: &[bool], sample_fraction: f64, rng: &mut LedgerRng) -> Result<QberEstimate> {
    if alice.len() != bob.len() {
        return Err(Error::LengthMismatch { alice: alice.len(), bob: bob.len() });
    }
    if !(sample_fraction > 0.0 && sample_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("sample_fraction {sample_fraction} outside (0, 1)")));
    }
    let len = alice.len();
    let min = (1.0 / sample_fraction).ceil() as usize;
    if len < min {
        return Err(Error::KeyTooShort { len, min });
    }
    let k = ((len as f64 * sample_fraction).round() as usize).clamp(1, len);
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..k {
        let j = i + rng.uniform_index(Party::Shared, Stage::Sampling, len - i);
        idx.swap(i, j);
    }
    let mut disclosed = idx[..k].to_vec();
    disclosed.sort_unstable();
    let errors = disclosed.iter().filter(|&&i| alice[i] != bob[i]).count();
    Ok(QberEstimate { estimate: errors as f64 / k as f64, disclosed })
}

/// `key` without the (sorted) `disclosed` positions.
pub fn remove_disclosed(key: &[bool], disclosed: &[usize]) -> Vec<bool> {
    let mut out = Vec::with_capacity(key.len().saturating_sub(disclosed.len()));
    let mut d = disclosed.iter().peekable();
    for (i, &bit) in key.iter().enumerate() {
        if d.peek() == Some(&&i) {
            d.next();
        } else {
            out.push(bit);
        }
    }
    out
}

/// Observations used for the information estimates. One unit is one sifted
/// bit, or one chunk of `bits_per_unit` sifted bits for block-unitary
/// attacks; `eve` is everything Eve holds about the unit after the basis
/// announcement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoUnits {
    pub bits_per_unit: usize,
    pub samples: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub seed: u64,
    pub raw_qubits: u64,
    pub sifted_bits: usize,
    pub kept_blocks: usize,
    pub qber_estimated: f64,
    pub qber_true: f64,
    pub disclosed_indices: Vec<usize>,
    pub ledger: RandomnessLedger,
    pub sifted_keys: (Vec<bool>, Vec<bool>),
    pub info: InfoUnits,
    pub records: Vec<BlockRecord>,
}

impl SessionReport {
    /// Sifted keys with the disclosed sample removed.
    pub fn remaining_keys(&self) -> (Vec<bool>, Vec<bool>) {
        (
            remove_disclosed(&self.sifted_keys.0, &self.disclosed_indices),
            remove_disclosed(&self.sifted_keys.1, &self.disclosed_indices),
        )
    }

    pub fn consumption(&self) -> ConsumptionReport {
        ConsumptionReport::from_ledger(&self.ledger, self.raw_qubits)
    }

    /// Plug-in estimates of I(A:B), I(E:A), I(E:B) per sifted bit, and the
    /// resulting Csiszár–Körner rate.
    pub fn rate(&self) -> Result<RateReport> {
        let joint = empirical_joint(["a", "b", "e"], &self.info.samples)?;
        let per_bit = self.info.bits_per_unit as f64;
        let clamp = |v: f64| (v / per_bit).max(0.0);
        ck_rate(
            clamp(joint.mutual_information("a", "b")?),
            clamp(joint.mutual_information("e", "a")?),
            clamp(joint.mutual_information("e", "b")?),
        )
    }
}

fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

fn pattern(bits: impl IntoIterator<Item = bool>) -> u32 {
    bits.into_iter().fold(0, |acc, b| (acc << 1) | b as u32)
}

fn info_units(records: &[BlockRecord], sifted: &SiftOutcome, attack: &BlockAttackSpec) -> InfoUnits {
    match attacks::chunk_size(attack) {
        None => {
            let samples = sifted
                .positions
                .iter()
                .map(|&(b, i)| {
                    let rec = &records[b];
                    let announced = rec.alice_bases.at(i);
                    [rec.alice_bits[i] as u32, rec.bob_outcomes[i] as u32, rec.eve.symbol_for(i, announced)]
                })
                .collect();
            InfoUnits { bits_per_unit: 1, samples }
        }
        Some(n) => {
            let mut samples = Vec::new();
            for rec in records.iter().filter(|r| r.block_kept()) {
                let announced = rec.alice_bases.at(0);
                for (c, start) in (0..rec.alice_bits.len()).step_by(n).enumerate() {
                    let a = pattern(rec.alice_bits[start..start + n].iter().copied());
                    let b = pattern(rec.bob_outcomes[start..start + n].iter().copied());
                    samples.push([a, b, rec.eve.chunk_symbol(c, announced)]);
                }
            }
            InfoUnits { bits_per_unit: n, samples }
        }
    }
}

/// Runs a full session. Deterministic in `(config, attack)`.
pub fn run_session(config: &ProtocolConfig, attack: &BlockAttackSpec) -> Result<SessionReport> {
    config.validate()?;
    attack.validate_for(config)?;
    let mut rng = LedgerRng::from_seed(config.seed);
    let mut records = Vec::with_capacity(config.num_blocks);

    for _ in 0..config.num_blocks {
        let alice = alice_prepare_block(config, &mut rng);
        let mut system = QubitSystem::new();
        let qubits: Vec<QubitId> = alice.states.iter().map(|s| system.add(s.clone())[0]).collect();

        let pending = attacks::attack_block(attack, &mut system, &qubits, &mut rng)?;
        transmit(&mut system, &qubits, &alice.bases, config.channel_flip_prob, &mut rng)?;
        let forced = config.force_matching_bases.then_some(&alice.bases);
        let bob = bob_measure_block(&mut system, &qubits, config, forced, &mut rng)?;

        // bases are announced only once the whole block is measured
        let announcement = Announcement { alice: &alice.bases, bob: &bob.bases };
        let eve = attacks::settle(pending, &mut system, &announcement, &mut rng)?;
        let sifted = sift_flags(config.mode, &alice.bases, &bob.bases, config.block_size);

        records.push(BlockRecord {
            alice_bits: alice.bits,
            alice_bases: alice.bases,
            bob_bases: bob.bases,
            bob_outcomes: bob.outcomes,
            sifted,
            eve,
        });
    }

    let sifted = sift(&records, config.mode);
    let estimate = estimate_qber(&sifted.alice_key, &sifted.bob_key, config.sample_fraction, &mut rng)?;
    let sifted_bits = sifted.alice_key.len();
    let qber_true = hamming(&sifted.alice_key, &sifted.bob_key) as f64 / sifted_bits as f64;
    let info = info_units(&records, &sifted, attack);

    Ok(SessionReport {
        seed: config.seed,
        raw_qubits: config.raw_qubits(),
        sifted_bits,
        kept_blocks: sifted.kept_blocks,
        qber_estimated: estimate.estimate,
        qber_true,
        disclosed_indices: estimate.disclosed,
        ledger: rng.into_ledger(),
        sifted_keys: (sifted.alice_key, sifted.bob_key),
        info,
        records,
    })
}
