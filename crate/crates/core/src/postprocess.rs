//! Classical post-processing: Cascade reconciliation and Toeplitz privacy
//! amplification, with every random permutation and seed bit drawn through
//! the ledger.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::attacks::EveRecord;
use crate::error::{Error, Result};
use crate::infotheory::RateReport;
use crate::protocol::SessionReport;
use crate::randomness::{LedgerRng, Party, RandomnessLedger, Stage};

/// Shortest key Cascade accepts.
pub const MIN_CASCADE_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeParams {
    pub passes: usize,
    /// First-pass block length is `block_constant / qber`.
    pub block_constant: f64,
    /// Lower bound applied to the QBER estimate before sizing blocks.
    pub qber_floor: f64,
}

impl Default for CascadeParams {
    fn default() -> Self {
        Self { passes: 4, block_constant: 0.73, qber_floor: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassStats {
    pub block_size: usize,
    pub disclosed: u64,
    pub corrections: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconciliationResult {
    #[serde(skip)]
    pub corrected: Vec<bool>,
    pub disclosed_parities: u64,
    pub passes: usize,
    /// Compared against Alice's key; only a simulation can know this.
    pub residual_mismatches: usize,
    pub pass_stats: Vec<PassStats>,
}

struct Pass {
    order: Vec<usize>,
    block_size: usize,
    // position -> block index
    block_of: Vec<usize>,
    alice_parity: Vec<bool>,
}

impl Pass {
    fn block(&self, b: usize) -> &[usize] {
        let start = b * self.block_size;
        &self.order[start..(start + self.block_size).min(self.order.len())]
    }
}

fn parity(key: &[bool], positions: &[usize]) -> bool {
    positions.iter().fold(false, |acc, &p| acc ^ key[p])
}

/// Locates one error in a block of odd relative parity. The left half
/// takes `ceil(len/2)` positions, so an error at the front costs exactly
/// `ceil(log2 len)` disclosed parities.
fn bisect(alice: &[bool], bob: &[bool], mut positions: &[usize]) -> (usize, u64) {
    let mut disclosed = 0;
    while positions.len() > 1 {
        let (left, right) = positions.split_at(positions.len().div_ceil(2));
        disclosed += 1;
        positions = if parity(alice, left) != parity(bob, left) { left } else { right };
    }
    (positions[0], disclosed)
}

pub fn cascade(
    alice: &[bool],
    bob: &[bool],
    qber_estimate: f64,
    params: &CascadeParams,
    rng: &mut LedgerRng,
) -> Result<ReconciliationResult> {
    if alice.len() != bob.len() {
        return Err(Error::LengthMismatch { alice: alice.len(), bob: bob.len() });
    }
    let len = alice.len();
    if len < MIN_CASCADE_LEN {
        return Err(Error::KeyTooShort { len, min: MIN_CASCADE_LEN });
    }
    if !(0.0..0.5).contains(&qber_estimate) {
        return Err(Error::QberRange(qber_estimate));
    }
    let q = qber_estimate.max(params.qber_floor);
    let first = ((params.block_constant / q).round() as usize).clamp(4, len);

    let mut bob = bob.to_vec();
    let mut passes: Vec<Pass> = Vec::with_capacity(params.passes);
    let mut stats = Vec::with_capacity(params.passes);
    let mut total = 0;

    for i in 0..params.passes {
        let order = if i == 0 {
            (0..len).collect()
        } else {
            rng.permutation(Party::Shared, Stage::EcPermutation, len)
        };
        let block_size = first.saturating_mul(1 << i).min(len);
        let mut block_of = vec![0; len];
        for (k, &p) in order.iter().enumerate() {
            block_of[p] = k / block_size;
        }
        let num_blocks = len.div_ceil(block_size);
        let mut pass = Pass { order, block_size, block_of, alice_parity: Vec::with_capacity(num_blocks) };
        for b in 0..num_blocks {
            let ap = parity(alice, pass.block(b));
            pass.alice_parity.push(ap);
        }
        let mut st = PassStats { block_size, disclosed: num_blocks as u64, corrections: 0 };
        let mut queue: VecDeque<(usize, usize)> =
            (0..num_blocks).filter(|&b| parity(&bob, pass.block(b)) != pass.alice_parity[b]).map(|b| (i, b)).collect();
        passes.push(pass);

        while let Some((p, b)) = queue.pop_front() {
            let blk = passes[p].block(b);
            if parity(&bob, blk) == passes[p].alice_parity[b] {
                continue;
            }
            let (pos, cost) = bisect(alice, &bob, blk);
            bob[pos] = !bob[pos];
            st.disclosed += cost;
            st.corrections += 1;
            for (j, other) in passes.iter().enumerate() {
                if j != p {
                    queue.push_back((j, other.block_of[pos]));
                }
            }
        }
        total += st.disclosed;
        stats.push(st);
    }

    let residual = alice.iter().zip(&bob).filter(|(a, b)| a != b).count();
    Ok(ReconciliationResult {
        corrected: bob,
        disclosed_parities: total,
        passes: params.passes,
        residual_mismatches: residual,
        pass_stats: stats,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmplificationResult {
    #[serde(skip)]
    pub final_key: Vec<bool>,
    pub input_len: usize,
    pub output_len: usize,
    pub seed_bits: usize,
}

/// `max(0, key_len - leaked - ceil(eve_info_bits) - margin)`.
pub fn target_length(key_len: usize, leaked: u64, eve_info_bits: f64, margin: u64) -> usize {
    let eve = eve_info_bits.max(0.0).ceil() as u64;
    (key_len as u64).saturating_sub(leaked).saturating_sub(eve).saturating_sub(margin) as usize
}

fn pack(bits: impl ExactSizeIterator<Item = bool>) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64) + 1];
    for (i, b) in bits.enumerate() {
        words[i / 64] |= (b as u64) << (i % 64);
    }
    words
}

/// 64 bits of `words` starting at bit `start`.
fn window(words: &[u64], start: usize) -> u64 {
    let (q, r) = (start / 64, start % 64);
    let lo = words.get(q).copied().unwrap_or(0) >> r;
    let hi = if r == 0 { 0 } else { words.get(q + 1).copied().unwrap_or(0) << (64 - r) };
    lo | hi
}

/// Multiplies `key` by the `output_len x k` Toeplitz matrix
/// `T[j][i] = seed[i - j]` for `i >= j`, `seed[k + j - i - 1]` otherwise.
pub fn toeplitz_hash(key: &[bool], seed: &[bool], output_len: usize) -> Vec<bool> {
    let k = key.len();
    if output_len == 0 {
        return Vec::new();
    }
    assert_eq!(seed.len(), k + output_len - 1, "Toeplitz seed length");
    // diagonal sequence: T[j][i] = diag[output_len - 1 - j + i]
    let diag = seed[k..].iter().rev().chain(&seed[..k]).copied();
    let diag = pack(diag.collect::<Vec<_>>().into_iter());
    let key_words = pack(key.iter().copied());
    let words = k.div_ceil(64);
    (0..output_len)
        .map(|j| {
            let start = output_len - 1 - j;
            let mut acc = 0u64;
            for (w, kw) in key_words[..words].iter().enumerate() {
                acc ^= window(&diag, start + 64 * w) & kw;
            }
            acc.count_ones() % 2 == 1
        })
        .collect()
}

pub fn toeplitz_pa(
    key: &[bool],
    leaked: u64,
    eve_info_bits: f64,
    margin: u64,
    rng: &mut LedgerRng,
) -> Result<AmplificationResult> {
    if key.is_empty() {
        return Err(Error::EmptyKey);
    }
    let output_len = target_length(key.len(), leaked, eve_info_bits, margin);
    if output_len == 0 {
        return Ok(AmplificationResult { final_key: Vec::new(), input_len: key.len(), output_len: 0, seed_bits: 0 });
    }
    let seed_bits = key.len() + output_len - 1;
    let seed = rng.draw_bits(Party::Shared, Stage::PaSeed, seed_bits);
    Ok(AmplificationResult {
        final_key: toeplitz_hash(key, &seed, output_len),
        input_len: key.len(),
        output_len,
        seed_bits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub cascade: CascadeParams,
    pub safety_margin: u64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self { cascade: CascadeParams::default(), safety_margin: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStatus {
    Distilled,
    /// Csiszár–Körner rate not positive.
    NotDistillable,
    KeyTooShort,
    QberTooHigh,
    ReconciliationFailed,
    /// Everything was consumed by disclosures, Eve's information and the margin.
    NoKeyLeft,
}

#[derive(Debug, Clone, Default)]
pub struct StageTimings {
    pub reconciliation: Duration,
    pub amplification: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineOutcome {
    pub status: PipelineStatus,
    pub final_key_len: usize,
    #[serde(skip)]
    pub final_key: Vec<bool>,
    pub eve_info_bits: f64,
    pub reconciliation: Option<ReconciliationResult>,
    pub amplification: Option<AmplificationResult>,
    /// Session and post-processing draws together.
    pub ledger: RandomnessLedger,
    /// Wall-clock, excluded from serialized output.
    #[serde(skip)]
    pub timings: StageTimings,
}

/// Seed of the post-processing generator, derived from the session seed.
pub fn postprocess_seed(session_seed: u64) -> u64 {
    session_seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Runs reconciliation and privacy amplification on the undisclosed part of
/// the sifted keys. Eve's information is `min(I(E:A), I(E:B))` per bit
/// times the key length, or zero when no attack touched the session. The
/// final key is nonempty only if the rate is positive and reconciliation
/// leaves no mismatch.
pub fn pipeline(session: &SessionReport, rate: &RateReport, params: &PipelineParams) -> Result<PipelineOutcome> {
    if session.sifted_bits == 0 {
        return Err(Error::EmptyKey);
    }
    let (alice, bob) = session.remaining_keys();
    let attacked = session.records.iter().any(|r| r.eve != EveRecord::None);
    let eve_info_bits = if attacked { rate.i_ea.min(rate.i_eb) * alice.len() as f64 } else { 0.0 };
    let mut outcome = PipelineOutcome {
        status: PipelineStatus::NotDistillable,
        final_key_len: 0,
        final_key: Vec::new(),
        eve_info_bits,
        reconciliation: None,
        amplification: None,
        ledger: session.ledger.clone(),
        timings: StageTimings::default(),
    };
    if !rate.distillable {
        return Ok(outcome);
    }
    if alice.len() < MIN_CASCADE_LEN {
        outcome.status = PipelineStatus::KeyTooShort;
        return Ok(outcome);
    }
    if session.qber_estimated >= 0.5 {
        outcome.status = PipelineStatus::QberTooHigh;
        return Ok(outcome);
    }

    let mut rng = LedgerRng::from_seed(postprocess_seed(session.seed));
    let t = Instant::now();
    let rec = cascade(&alice, &bob, session.qber_estimated, &params.cascade, &mut rng)?;
    outcome.timings.reconciliation = t.elapsed();
    let ok = rec.residual_mismatches == 0;
    let leaked = rec.disclosed_parities;
    outcome.reconciliation = Some(rec);

    if ok {
        let t = Instant::now();
        let amp = toeplitz_pa(&alice, leaked, eve_info_bits, params.safety_margin, &mut rng)?;
        outcome.timings.amplification = t.elapsed();
        outcome.status = if amp.output_len > 0 { PipelineStatus::Distilled } else { PipelineStatus::NoKeyLeft };
        outcome.final_key_len = amp.output_len;
        outcome.final_key = amp.final_key.clone();
        outcome.amplification = Some(amp);
    } else {
        outcome.status = PipelineStatus::ReconciliationFailed;
    }
    outcome.ledger.merge(rng.ledger());
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn noisy_pair(len: usize, q: f64, seed: u64) -> (Vec<bool>, Vec<bool>) {
        let mut rng = LedgerRng::from_seed(seed);
        let a = rng.draw_bits(Party::Alice, Stage::AliceBits, len);
        let b = a.iter().map(|&x| x ^ rng.bernoulli(Party::Shared, Stage::Channel, q)).collect();
        (a, b)
    }

    #[test]
    fn identical_keys_disclose_one_parity_per_block() {
        let (a, _) = noisy_pair(1000, 0.0, 1);
        let mut rng = LedgerRng::from_seed(2);
        let r = cascade(&a, &a, 0.05, &CascadeParams::default(), &mut rng).unwrap();
        // first block 0.73/0.05 = 14.6 -> 15, then 30, 60, 120
        let expected: u64 = [15usize, 30, 60, 120].iter().map(|&k| 1000usize.div_ceil(k) as u64).sum();
        assert_eq!(r.disclosed_parities, expected);
        assert_eq!(r.corrected, a);
        assert!(r.pass_stats.iter().all(|s| s.corrections == 0));
        // three fresh permutations of 1000 were drawn
        assert!(rng.ledger().get(Party::Shared, Stage::EcPermutation) > 0);
    }

    #[test]
    fn single_error_costs_ceil_log2_block() {
        let (a, _) = noisy_pair(64, 0.0, 3);
        let mut b = a.clone();
        b[0] = !b[0];
        let mut rng = LedgerRng::from_seed(4);
        let r = cascade(&a, &b, 0.02, &CascadeParams::default(), &mut rng).unwrap();
        assert_eq!(r.residual_mismatches, 0);
        // 0.73 / 0.02 = 36.5 -> 37: two blocks of 37 and 27
        let first = &r.pass_stats[0];
        assert_eq!(first.block_size, 37);
        assert_eq!(first.corrections, 1);
        assert_eq!(first.disclosed, 2 + 6);
        for later in &r.pass_stats[1..] {
            assert_eq!(later.corrections, 0);
            assert_eq!(later.disclosed, 1);
        }
    }

    #[test]
    fn zero_estimate_uses_floor() {
        let (a, b) = noisy_pair(200, 0.01, 5);
        let mut rng = LedgerRng::from_seed(6);
        let r = cascade(&a, &b, 0.0, &CascadeParams::default(), &mut rng).unwrap();
        assert_eq!(r.pass_stats[0].block_size, 73);
    }

    #[test]
    fn cascade_errors() {
        let (a, b) = noisy_pair(100, 0.05, 7);
        let mut rng = LedgerRng::from_seed(0);
        let p = CascadeParams::default();
        assert!(matches!(cascade(&a, &b[..99], 0.05, &p, &mut rng), Err(Error::LengthMismatch { .. })));
        assert!(matches!(cascade(&a[..63], &b[..63], 0.05, &p, &mut rng), Err(Error::KeyTooShort { len: 63, min: 64 })));
        assert!(matches!(cascade(&a, &b, 0.5, &p, &mut rng), Err(Error::QberRange(_))));
    }

    #[test]
    fn cascade_corrects_typical_noise() {
        let mut failures = 0;
        for seed in 0..20 {
            let (a, b) = noisy_pair(4000, 0.05, seed);
            let mut rng = LedgerRng::from_seed(seed + 100);
            let r = cascade(&a, &b, 0.05, &CascadeParams::default(), &mut rng).unwrap();
            assert_eq!(r.corrected.len(), a.len());
            failures += (r.residual_mismatches > 0) as usize;
        }
        assert!(failures <= 1, "{failures} failures");
    }

    fn naive_toeplitz(key: &[bool], seed: &[bool], l: usize) -> Vec<bool> {
        let k = key.len();
        (0..l)
            .map(|j| {
                (0..k).fold(false, |acc, i| {
                    let t = if i >= j { seed[i - j] } else { seed[k + j - i - 1] };
                    acc ^ (t & key[i])
                })
            })
            .collect()
    }

    #[test]
    fn toeplitz_matches_naive_product() {
        for (k, l) in [(1, 1), (5, 3), (64, 64), (65, 10), (130, 129), (300, 77)] {
            let mut rng = LedgerRng::from_seed((k * 1000 + l) as u64);
            let key = rng.draw_bits(Party::Alice, Stage::AliceBits, k);
            let seed = rng.draw_bits(Party::Shared, Stage::PaSeed, k + l - 1);
            assert_eq!(toeplitz_hash(&key, &seed, l), naive_toeplitz(&key, &seed, l), "k={k} l={l}");
        }
    }

    #[test]
    fn toeplitz_first_row_and_column() {
        // key = e_0 picks out column 0; key = e_i picks column i
        let seed: Vec<bool> = [1, 0, 1, 1, 0, 0, 1].iter().map(|&b| b == 1).collect();
        let (k, l) = (4, 4);
        let mut e0 = vec![false; k];
        e0[0] = true;
        let col0 = toeplitz_hash(&e0, &seed, l);
        assert_eq!(col0, vec![seed[0], seed[4], seed[5], seed[6]]);
        let mut e3 = vec![false; k];
        e3[3] = true;
        assert_eq!(toeplitz_hash(&e3, &seed, l)[0], seed[3]);
    }

    #[test]
    fn pa_lengths_and_ledger() {
        let key = vec![true; 100];
        let mut rng = LedgerRng::from_seed(1);
        let r = toeplitz_pa(&key, 0, 0.0, 0, &mut rng).unwrap();
        assert_eq!((r.output_len, r.seed_bits), (100, 199));
        assert_eq!(rng.ledger().get(Party::Shared, Stage::PaSeed), 199);
        let r = toeplitz_pa(&key, 40, 10.2, 32, &mut rng).unwrap();
        assert_eq!(r.output_len, 17);
        let before = rng.ledger().total();
        let r = toeplitz_pa(&key, 60, 8.0, 32, &mut rng).unwrap();
        assert!(r.final_key.is_empty());
        assert_eq!(rng.ledger().total(), before);
        assert!(matches!(toeplitz_pa(&[], 0, 0.0, 0, &mut rng), Err(Error::EmptyKey)));
    }

    #[test]
    fn zero_key_hashes_to_zero() {
        let mut rng = LedgerRng::from_seed(9);
        let r = toeplitz_pa(&[false; 500], 10, 0.0, 32, &mut rng).unwrap();
        assert!(r.final_key.iter().all(|&b| !b));
    }

    proptest! {
        #[test]
        fn toeplitz_is_linear(
            k1 in proptest::collection::vec(any::<bool>(), 1..200),
            seed_bits in proptest::collection::vec(any::<bool>(), 400),
            l_frac in 0.01f64..1.0,
            k2_seed in any::<u64>(),
        ) {
            let k = k1.len();
            let l = ((k as f64 * l_frac).ceil() as usize).clamp(1, k);
            let mut rng = LedgerRng::from_seed(k2_seed);
            let k2 = rng.draw_bits(Party::Alice, Stage::AliceBits, k);
            let seed = &seed_bits[..k + l - 1];
            let x: Vec<bool> = k1.iter().zip(&k2).map(|(a, b)| a ^ b).collect();
            let hx = toeplitz_hash(&x, seed, l);
            let h1 = toeplitz_hash(&k1, seed, l);
            let h2 = toeplitz_hash(&k2, seed, l);
            let sum: Vec<bool> = h1.iter().zip(&h2).map(|(a, b)| a ^ b).collect();
            prop_assert_eq!(hx, sum);
        }
    }
}
