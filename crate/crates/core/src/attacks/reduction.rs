//! Singlet simulation of a block and the exact check of the reduction.
//!
//! Eve holds one genuine qubit from Alice and wants to run a block attack
//! built for `n` qubits sharing one basis. She fills the other `n - 1` slots
//! with halves of singlets and keeps their partners. After the basis is
//! announced she measures the partners in it; each simulated slot then
//! carries the complement of her outcome in the announced basis, exactly as
//! if Alice had prepared it.
//!
//! Register layout of a [`SimulatedBlock`]: `[n simulated slots][m ancillas]
//! [n - 1 kept halves]`. Kept half `k` is the partner of the `k`-th
//! simulated slot other than Alice's.

use serde::Serialize;

use super::AncillaPolicy;
use crate::error::{Error, Result};
use crate::quantum::{prepare_bb84, prepare_singlet, Basis, DensityMatrix, StateVector, UnitarySpec};
use crate::randomness::Coin;

/// Entry-wise tolerance for every density-matrix comparison.
pub const REDUCTION_TOL: f64 = 1e-9;

/// Largest register the verifier builds is `2n - 1 + m`.
const MAX_VERIFY_QUBITS: usize = 8;

#[derive(Debug, Clone)]
pub struct SimulatedBlock {
    state: StateVector,
    n: usize,
    m: usize,
    alice_slot: usize,
    measured: bool,
}

impl SimulatedBlock {
    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn alice_slot(&self) -> usize {
        self.alice_slot
    }

    /// Register indices of the simulated block qubits.
    pub fn forwarded(&self) -> Vec<usize> {
        (0..self.n).collect()
    }

    pub fn ancillas(&self) -> Vec<usize> {
        (self.n..self.n + self.m).collect()
    }

    pub fn kept(&self) -> Vec<usize> {
        (self.n + self.m..2 * self.n + self.m - 1).collect()
    }

    /// Simulated slots fed by singlets, in kept-half order.
    pub fn simulated_slots(&self) -> Vec<usize> {
        (0..self.n).filter(|&s| s != self.alice_slot).collect()
    }

    pub fn is_measured(&self) -> bool {
        self.measured
    }
}

/// Builds the simulated block around `alice_qubit` at `alice_slot` and
/// applies `u` to the `n` simulated qubits followed by `m` fresh ancillas.
pub fn singlet_simulation(
    alice_qubit: &StateVector,
    n: usize,
    u: &UnitarySpec,
    m: usize,
    alice_slot: usize,
) -> Result<SimulatedBlock> {
    if alice_qubit.num_qubits() != 1 {
        return Err(Error::QubitCount { expected: 1, got: alice_qubit.num_qubits() });
    }
    if n == 0 || alice_slot >= n {
        return Err(Error::ReductionPrecondition(format!("slot {alice_slot} outside a block of {n}")));
    }
    if u.num_qubits() != n + m {
        return Err(Error::DimensionMismatch { dim: u.dim(), targets: n + m });
    }
    // built as [alice][(sim, kept) x (n-1)][ancillas], then reordered
    let mut state = alice_qubit.clone();
    for _ in 1..n {
        state = state.tensor(&prepare_singlet())?;
    }
    if m > 0 {
        state = state.tensor(&StateVector::zeros(m)?)?;
    }
    let singlet_sim = |k: usize| 1 + 2 * k;
    let mut order = Vec::with_capacity(2 * n - 1 + m);
    let mut k = 0;
    for slot in 0..n {
        if slot == alice_slot {
            order.push(0);
        } else {
            order.push(singlet_sim(k));
            k += 1;
        }
    }
    order.extend((0..m).map(|a| 2 * n - 1 + a));
    order.extend((0..n - 1).map(|k| singlet_sim(k) + 1));
    let state = state.permute(&order)?;
    let targets: Vec<usize> = (0..n + m).collect();
    let state = state.apply_unitary(u, &targets)?;
    Ok(SimulatedBlock { state, n, m, alice_slot, measured: false })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayedOutcome {
    /// Bit carried by each simulated slot (complement of Eve's outcome);
    /// `None` at Alice's slot.
    pub simulated_bits: Vec<Option<bool>>,
    pub ancilla_bits: Vec<bool>,
}

/// Eve's measurement after the announcement: kept halves in `announced`,
/// ancillas per `policy`.
pub fn delayed_measurement(
    block: &mut SimulatedBlock,
    announced: Basis,
    policy: AncillaPolicy,
    coin: &mut impl Coin,
) -> Result<DelayedOutcome> {
    if block.measured {
        return Err(Error::AlreadyMeasured);
    }
    let mut simulated_bits = vec![None; block.n];
    for (slot, kept) in block.simulated_slots().into_iter().zip(block.kept()) {
        let (outcome, post) = block.state.measure(kept, announced, coin)?;
        block.state = post;
        simulated_bits[slot] = Some(!outcome);
    }
    let ancilla_basis = match policy {
        AncillaPolicy::AnnouncedBasis => announced,
        AncillaPolicy::Fixed(b) => b,
    };
    let mut ancilla_bits = Vec::with_capacity(block.m);
    for a in block.ancillas() {
        let (outcome, post) = block.state.measure(a, ancilla_basis, coin)?;
        block.state = post;
        ancilla_bits.push(outcome);
    }
    block.measured = true;
    Ok(DelayedOutcome { simulated_bits, ancilla_bits })
}

/// One conditional branch: Alice's bit, the announced basis, and Eve's
/// outcomes on the kept halves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchCheck {
    pub basis: Basis,
    pub alice_bit: bool,
    pub kept_outcomes: Vec<bool>,
    pub weight: f64,
    pub weight_error: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub n: usize,
    pub m: usize,
    pub alice_slot: usize,
    pub branches: Vec<BranchCheck>,
    /// Per announced basis, Z then X: unconditional ensembles compared.
    pub ensemble_deviation: [f64; 2],
    pub max_deviation: f64,
    pub passed: bool,
}

fn bits_of(pattern: usize, width: usize) -> Vec<bool> {
    (0..width).rev().map(|b| pattern >> b & 1 == 1).collect()
}

/// `u` on a genuine block prepared with `bits` in `basis`, ancillas `|0>`.
fn real_block(u: &UnitarySpec, bits: &[bool], basis: Basis, m: usize) -> Result<StateVector> {
    let mut state = prepare_bb84(bits[0], basis);
    for &b in &bits[1..] {
        state = state.tensor(&prepare_bb84(b, basis))?;
    }
    if m > 0 {
        state = state.tensor(&StateVector::zeros(m)?)?;
    }
    let targets: Vec<usize> = (0..bits.len() + m).collect();
    state.apply_unitary(u, &targets)
}

fn check_preconditions(u: &UnitarySpec, n: usize, m: usize, alice_input: [f64; 2]) -> Result<()> {
    if !(2..=3).contains(&n) {
        return Err(Error::ReductionPrecondition(format!("n = {n}, expected 2 or 3")));
    }
    if n + m > MAX_VERIFY_QUBITS {
        return Err(Error::ReductionPrecondition(format!("n + m = {} exceeds {MAX_VERIFY_QUBITS}", n + m)));
    }
    if u.num_qubits() != n + m {
        return Err(Error::DimensionMismatch { dim: u.dim(), targets: n + m });
    }
    let err = u.unitarity_error();
    if err > crate::quantum::UNITARITY_TOL {
        return Err(Error::NonUnitary(err));
    }
    if alice_input.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (alice_input[0] + alice_input[1] - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidDistribution(format!("alice input {alice_input:?}")));
    }
    Ok(())
}

/// [`verify_reduction_at`] with Alice's qubit in slot 0.
pub fn verify_reduction(u: &UnitarySpec, n: usize, m: usize, alice_input: [f64; 2]) -> Result<EquivalenceReport> {
    verify_reduction_at(u, n, m, alice_input, 0)
}

/// Compares the genuine block attack with its singlet simulation.
///
/// For each announced basis, Alice bit and pattern of Eve's kept-half
/// outcomes, the conditional state of (forwarded qubits, ancillas) must
/// equal the genuine block carrying Alice's bit and the complemented
/// outcomes, with branch weight `2^-(n-1)`. The unconditional ensembles,
/// with Alice's bit drawn from `alice_input` and the other bits uniform,
/// must agree as well.
pub fn verify_reduction_at(
    u: &UnitarySpec,
    n: usize,
    m: usize,
    alice_input: [f64; 2],
    alice_slot: usize,
) -> Result<EquivalenceReport> {
    check_preconditions(u, n, m, alice_input)?;
    if alice_slot >= n {
        return Err(Error::ReductionPrecondition(format!("slot {alice_slot} outside a block of {n}")));
    }
    let keep: Vec<usize> = (0..n + m).collect();
    let expected_weight = 1.0 / (1usize << (n - 1)) as f64;
    let mut branches = Vec::new();
    let mut ensemble_deviation = [0.0; 2];

    for basis in Basis::BOTH {
        let mut sim_terms = Vec::new();
        let mut real_terms = Vec::new();
        for alice_bit in [false, true] {
            let block = singlet_simulation(&prepare_bb84(alice_bit, basis), n, u, m, alice_slot)?;
            let slots = block.simulated_slots();
            sim_terms.push((alice_input[alice_bit as usize], block.state().reduced_density(&keep)?));

            for pattern in 0..1usize << (n - 1) {
                let kept_outcomes = bits_of(pattern, n - 1);
                let mut weight = 1.0;
                let mut post = block.state().clone();
                for (&q, &o) in block.kept().iter().zip(&kept_outcomes) {
                    let (p, next) = post.project(q, basis, o)?;
                    weight *= p;
                    post = next.ok_or(Error::ZeroProbabilityEvent)?;
                }
                let mut bits = vec![alice_bit; n];
                for (&slot, &o) in slots.iter().zip(&kept_outcomes) {
                    bits[slot] = !o;
                }
                let expected = real_block(u, &bits, basis, m)?.density();
                real_terms.push((alice_input[alice_bit as usize] * expected_weight, expected.clone()));
                let deviation = post.reduced_density(&keep)?.max_abs_diff(&expected)?;
                branches.push(BranchCheck {
                    basis,
                    alice_bit,
                    kept_outcomes,
                    weight,
                    weight_error: (weight - expected_weight).abs(),
                    deviation,
                });
            }
        }
        let sim: Vec<(f64, &DensityMatrix)> = sim_terms.iter().map(|(w, r)| (*w, r)).collect();
        let real: Vec<(f64, &DensityMatrix)> = real_terms.iter().map(|(w, r)| (*w, r)).collect();
        ensemble_deviation[basis.as_bit() as usize] =
            DensityMatrix::mixture(&sim)?.max_abs_diff(&DensityMatrix::mixture(&real)?)?;
    }

    let max_deviation = branches
        .iter()
        .flat_map(|b| [b.deviation, b.weight_error])
        .chain(ensemble_deviation)
        .fold(0.0, f64::max);
    Ok(EquivalenceReport { n, m, alice_slot, branches, ensemble_deviation, max_deviation, passed: max_deviation < REDUCTION_TOL })
}

/// One entry of the equivalence corpus.
#[derive(Debug, Clone)]
pub struct ReductionCase {
    pub name: String,
    pub u: UnitarySpec,
    pub n: usize,
    pub m: usize,
}

/// Block/ancilla shapes the random part of the corpus cycles through.
pub const RANDOM_SHAPES: [(usize, usize); 6] = [(2, 0), (2, 1), (2, 2), (3, 0), (3, 1), (3, 2)];

/// Identities for n = 2, 3; CNOT from block qubit 0 to the first ancilla
/// for (n, m) = (2, 1), (3, 1); then `random_count` random unitaries, the
/// i-th drawn with seed `seed + i` on shape `RANDOM_SHAPES[i % 6]`.
pub fn default_corpus(seed: u64, random_count: usize) -> Result<Vec<ReductionCase>> {
    let mut cases = vec![
        ReductionCase { name: "identity".into(), u: UnitarySpec::identity(2), n: 2, m: 0 },
        ReductionCase { name: "identity".into(), u: UnitarySpec::identity(3), n: 3, m: 0 },
    ];
    for n in [2, 3] {
        cases.push(ReductionCase { name: "cnot_entangler".into(), u: UnitarySpec::cnot().embed(&[0, n], n + 1)?, n, m: 1 });
    }
    for i in 0..random_count {
        let (n, m) = RANDOM_SHAPES[i % RANDOM_SHAPES.len()];
        let s = seed.wrapping_add(i as u64);
        cases.push(ReductionCase { name: format!("random_seed{s}"), u: UnitarySpec::random(n + m, s), n, m });
    }
    Ok(cases)
}
