//! Eavesdropping models.
//!
//! Session-level attacks (intercept-resend and block unitaries with
//! ancillas) hook into the protocol loop through [`attack_block`] before the
//! channel and [`settle`] after the basis announcement. The singlet
//! construction that turns a block attack into a one-qubit attack, and the
//! exact check that both scenarios hand Eve the same states, live in
//! [`reduction`].

mod matrix_file;
pub mod reduction;

pub use matrix_file::{format_matrix_file, load_unitary, parse_matrix_file};
pub use reduction::{
    default_corpus, delayed_measurement, singlet_simulation, verify_reduction, verify_reduction_at,
    BranchCheck, DelayedOutcome, EquivalenceReport, ReductionCase, SimulatedBlock, REDUCTION_TOL,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{BasisMode, BlockBases, ProtocolConfig};
use crate::quantum::{Basis, QubitId, QubitSystem, StateVector, UnitarySpec};
use crate::randomness::{LedgerRng, Party, Stage};

/// Eve's symbol for a sifted bit she knows nothing about.
pub const ERASED: u32 = 2;

/// Largest `n + m` accepted for a block unitary.
pub const MAX_ATTACK_QUBITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    PerQubit,
    PerBlock,
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_qubit" => Ok(Granularity::PerQubit),
            "per_block" => Ok(Granularity::PerBlock),
            other => Err(Error::InvalidAttack(format!("unknown granularity `{other}`"))),
        }
    }
}

/// Basis Eve measures her ancillas in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AncillaPolicy {
    /// The block basis once announced; a random guess if Eve cannot wait.
    #[default]
    AnnouncedBasis,
    Fixed(Basis),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackVariant {
    None,
    InterceptResend { fraction: f64, granularity: Granularity },
    /// `u` acts on `n` consecutive block qubits followed by `m` ancillas
    /// prepared in `|0>`.
    UnitaryBlock { u: UnitarySpec, n: usize, m: usize, policy: AncillaPolicy },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockAttackSpec {
    pub variant: AttackVariant,
    /// Eve keeps her systems until the bases are announced.
    pub delayed: bool,
}

impl BlockAttackSpec {
    pub fn none() -> Self {
        Self { variant: AttackVariant::None, delayed: false }
    }

    pub fn intercept_resend(fraction: f64, granularity: Granularity) -> Self {
        Self { variant: AttackVariant::InterceptResend { fraction, granularity }, delayed: false }
    }

    pub fn unitary_block(u: UnitarySpec, n: usize, m: usize, policy: AncillaPolicy, delayed: bool) -> Result<Self> {
        let spec = Self { variant: AttackVariant::UnitaryBlock { u, n, m, policy }, delayed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn name(&self) -> &'static str {
        match self.variant {
            AttackVariant::None => "none",
            AttackVariant::InterceptResend { .. } => "intercept_resend",
            AttackVariant::UnitaryBlock { .. } => "unitary_block",
        }
    }

    /// Intercept fraction, 1 for unitary attacks, 0 for none.
    pub fn fraction(&self) -> f64 {
        match self.variant {
            AttackVariant::None => 0.0,
            AttackVariant::InterceptResend { fraction, .. } => fraction,
            AttackVariant::UnitaryBlock { .. } => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.variant {
            AttackVariant::None => Ok(()),
            AttackVariant::InterceptResend { fraction, .. } => {
                if !(0.0..=1.0).contains(fraction) {
                    return Err(Error::InvalidAttack(format!("fraction {fraction} outside [0, 1]")));
                }
                if self.delayed {
                    return Err(Error::InvalidAttack("intercept-resend cannot delay its measurement".into()));
                }
                Ok(())
            }
            AttackVariant::UnitaryBlock { u, n, m, .. } => {
                if *n == 0 {
                    return Err(Error::InvalidAttack("block unitary needs n >= 1".into()));
                }
                if n + m > MAX_ATTACK_QUBITS {
                    return Err(Error::InvalidAttack(format!("n + m = {} exceeds {MAX_ATTACK_QUBITS}", n + m)));
                }
                if u.num_qubits() != n + m {
                    return Err(Error::DimensionMismatch { dim: u.dim(), targets: n + m });
                }
                Ok(())
            }
        }
    }

    /// Checks that the attack fits the session's block structure.
    pub fn validate_for(&self, config: &ProtocolConfig) -> Result<()> {
        self.validate()?;
        if let AttackVariant::UnitaryBlock { n, .. } = self.variant {
            if config.mode != BasisMode::PerBlock {
                return Err(Error::InvalidAttack("block unitaries need per_block mode".into()));
            }
            if !config.block_size.is_multiple_of(n) {
                return Err(Error::InvalidAttack(format!(
                    "block size {} is not a multiple of the attacked chunk {n}",
                    config.block_size
                )));
            }
        }
        Ok(())
    }
}

/// Bits of `n` attacked jointly, or `None` when the attack is per qubit.
pub fn chunk_size(spec: &BlockAttackSpec) -> Option<usize> {
    match spec.variant {
        AttackVariant::UnitaryBlock { n, .. } => Some(n),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interception {
    pub basis: Basis,
    pub outcome: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub basis: Basis,
    pub ancilla_bits: Vec<bool>,
}

/// What Eve learned about one block. Holds no quantum state: everything is
/// measured by the time a record exists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveRecord {
    None,
    InterceptResend(Vec<Option<Interception>>),
    UnitaryBlock(Vec<ChunkRecord>),
}

impl EveRecord {
    /// Eve's knowledge of position `i` once `announced` is public: her
    /// outcome if she measured in that basis, [`ERASED`] otherwise.
    pub fn symbol_for(&self, i: usize, announced: Basis) -> u32 {
        match self {
            EveRecord::InterceptResend(v) => match v[i] {
                Some(Interception { basis, outcome }) if basis == announced => outcome as u32,
                _ => ERASED,
            },
            _ => ERASED,
        }
    }

    /// Eve's knowledge of chunk `c`: ancilla outcomes, the basis she used,
    /// and the announced basis, packed into one symbol.
    pub fn chunk_symbol(&self, c: usize, announced: Basis) -> u32 {
        match self {
            EveRecord::UnitaryBlock(chunks) => {
                let rec = &chunks[c];
                let m = rec.ancilla_bits.len();
                let bits = rec.ancilla_bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
                bits | (rec.basis.as_bit() as u32) << m | (announced.as_bit() as u32) << (m + 1)
            }
            _ => ERASED,
        }
    }
}

/// Eve's state between interception and announcement.
#[derive(Debug)]
pub enum PendingEve {
    None,
    Done(EveRecord),
    Unitary { chunks: Vec<PendingChunk>, policy: AncillaPolicy },
}

#[derive(Debug)]
pub struct PendingChunk {
    ancillas: Vec<QubitId>,
    measured: Option<ChunkRecord>,
}

/// Public basis announcement of one block.
#[derive(Debug, Clone, Copy)]
pub struct Announcement<'a> {
    pub alice: &'a BlockBases,
    pub bob: &'a BlockBases,
}

/// Each qubit is attacked with probability `fraction`: measured in a random
/// basis (fresh per qubit, or one per block) and left in the observed
/// eigenstate, which is exactly the resent state.
pub fn intercept_resend(
    system: &mut QubitSystem,
    qubits: &[QubitId],
    fraction: f64,
    granularity: Granularity,
    rng: &mut LedgerRng,
) -> Result<Vec<Option<Interception>>> {
    if fraction <= 0.0 {
        return Ok(vec![None; qubits.len()]);
    }
    let block_basis = match granularity {
        Granularity::PerBlock => Some(Basis::from_bit(rng.draw_bit(Party::Eve, Stage::Attack))),
        Granularity::PerQubit => None,
    };
    let mut out = Vec::with_capacity(qubits.len());
    for &q in qubits {
        if !rng.bernoulli(Party::Eve, Stage::Attack, fraction) {
            out.push(None);
            continue;
        }
        let basis = block_basis.unwrap_or_else(|| Basis::from_bit(rng.draw_bit(Party::Eve, Stage::Attack)));
        let outcome = system.measure(q, basis, &mut rng.coin(Party::Eve, Stage::Attack))?;
        out.push(Some(Interception { basis, outcome }));
    }
    Ok(out)
}

fn measure_ancillas(
    system: &mut QubitSystem,
    ancillas: &[QubitId],
    basis: Basis,
    rng: &mut LedgerRng,
) -> Result<ChunkRecord> {
    let mut bits = Vec::with_capacity(ancillas.len());
    for &a in ancillas {
        bits.push(system.measure(a, basis, &mut rng.coin(Party::Eve, Stage::Attack))?);
    }
    Ok(ChunkRecord { basis, ancilla_bits: bits })
}

/// Eve's action on a block in flight, before the channel.
pub fn attack_block(
    spec: &BlockAttackSpec,
    system: &mut QubitSystem,
    qubits: &[QubitId],
    rng: &mut LedgerRng,
) -> Result<PendingEve> {
    match &spec.variant {
        AttackVariant::None => Ok(PendingEve::None),
        AttackVariant::InterceptResend { fraction, granularity } => {
            let v = intercept_resend(system, qubits, *fraction, *granularity, rng)?;
            Ok(PendingEve::Done(EveRecord::InterceptResend(v)))
        }
        AttackVariant::UnitaryBlock { u, n, m, policy } => {
            if !qubits.len().is_multiple_of(*n) {
                return Err(Error::QubitCount { expected: qubits.len().next_multiple_of(*n), got: qubits.len() });
            }
            let mut chunks = Vec::with_capacity(qubits.len() / n);
            for chunk in qubits.chunks(*n) {
                let ancillas = if *m > 0 { system.add(StateVector::zeros(*m)?) } else { Vec::new() };
                let targets: Vec<QubitId> = chunk.iter().chain(&ancillas).copied().collect();
                system.apply(u, &targets)?;
                let measured = if spec.delayed {
                    None
                } else {
                    let basis = match policy {
                        AncillaPolicy::Fixed(b) => *b,
                        AncillaPolicy::AnnouncedBasis => Basis::from_bit(rng.draw_bit(Party::Eve, Stage::Attack)),
                    };
                    Some(measure_ancillas(system, &ancillas, basis, rng)?)
                };
                chunks.push(PendingChunk { ancillas, measured });
            }
            Ok(PendingEve::Unitary { chunks, policy: *policy })
        }
    }
}

/// Completes Eve's record after the announcement, measuring whatever she
/// kept.
pub fn settle(
    pending: PendingEve,
    system: &mut QubitSystem,
    announcement: &Announcement<'_>,
    rng: &mut LedgerRng,
) -> Result<EveRecord> {
    match pending {
        PendingEve::None => Ok(EveRecord::None),
        PendingEve::Done(rec) => Ok(rec),
        PendingEve::Unitary { chunks, policy } => {
            let announced = announcement
                .alice
                .shared()
                .ok_or_else(|| Error::InvalidAttack("block unitaries need a shared block basis".into()))?;
            let basis = match policy {
                AncillaPolicy::Fixed(b) => b,
                AncillaPolicy::AnnouncedBasis => announced,
            };
            chunks
                .into_iter()
                .map(|c| match c.measured {
                    Some(rec) => Ok(rec),
                    None => measure_ancillas(system, &c.ancillas, basis, rng),
                })
                .collect::<Result<Vec<_>>>()
                .map(EveRecord::UnitaryBlock)
        }
    }
}
