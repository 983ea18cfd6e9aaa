use std::f64::consts::FRAC_1_SQRT_2;

use super::{c, Basis, DensityMatrix, UnitarySpec, C64, DETERMINISTIC_EPS, MAX_QUBITS};
use crate::error::{Error, Result};
use crate::randomness::Coin;

const NORM_TOL: f64 = 1e-12;

/// Pure state of a `num_qubits`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::BadAmplitudeLength(len));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(num_qubits));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { num_qubits, amps })
    }

    /// Computational basis state `|index>`.
    pub fn basis_state(num_qubits: usize, index: usize) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::BadAmplitudeLength(1));
        }
        if num_qubits > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(num_qubits));
        }
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(Error::QubitIndex { index, num_qubits });
        }
        let mut amps = vec![C64::default(); dim];
        amps[index] = c(1.0, 0.0);
        Ok(Self { num_qubits, amps })
    }

    pub fn zeros(num_qubits: usize) -> Result<Self> {
        Self::basis_state(num_qubits, 0)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `self ⊗ other`; the qubits of `other` come after those of `self`.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.num_qubits + other.num_qubits;
        if n > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(n));
        }
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(Self { num_qubits: n, amps })
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.num_qubits {
            return Err(Error::QubitIndex { index, num_qubits: self.num_qubits });
        }
        Ok(())
    }

    fn bit_mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    /// Unnormalized projection onto `outcome` of `qubit` in `basis`.
    fn project_raw(&self, qubit: usize, basis: Basis, outcome: bool) -> (f64, StateVector) {
        let mask = self.bit_mask(qubit);
        let mut amps = self.amps.clone();
        match basis {
            Basis::Z => {
                for (i, a) in amps.iter_mut().enumerate() {
                    if ((i & mask) != 0) != outcome {
                        *a = C64::default();
                    }
                }
            }
            Basis::X => {
                // P± = (I ± X)/2 applied pairwise
                let sign = if outcome { -1.0 } else { 1.0 };
                for i in 0..amps.len() {
                    if i & mask == 0 {
                        let (a0, a1) = (self.amps[i], self.amps[i | mask]);
                        let plus = (a0 + a1 * sign) * 0.5;
                        amps[i] = plus;
                        amps[i | mask] = plus * sign;
                    }
                }
            }
        }
        let prob = amps.iter().map(|a| a.norm_sqr()).sum();
        (prob, StateVector { num_qubits: self.num_qubits, amps })
    }

    /// Probability of `outcome` and the normalized post-measurement state, or
    /// `None` for the state when that outcome is impossible.
    pub fn project(&self, qubit: usize, basis: Basis, outcome: bool) -> Result<(f64, Option<StateVector>)> {
        self.check_index(qubit)?;
        let (prob, mut post) = self.project_raw(qubit, basis, outcome);
        if prob < DETERMINISTIC_EPS {
            return Ok((prob, None));
        }
        let scale = 1.0 / prob.sqrt();
        for a in &mut post.amps {
            *a *= scale;
        }
        Ok((prob, Some(post)))
    }

    pub fn probability(&self, qubit: usize, basis: Basis, outcome: bool) -> Result<f64> {
        self.check_index(qubit)?;
        Ok(self.project_raw(qubit, basis, outcome).0)
    }

    /// Projective measurement of one qubit. The coin is consulted only when
    /// both outcomes have non-negligible probability.
    pub fn measure(&self, qubit: usize, basis: Basis, coin: &mut impl Coin) -> Result<(bool, StateVector)> {
        self.check_index(qubit)?;
        let p_one = self.project_raw(qubit, basis, true).0;
        let outcome = if p_one < DETERMINISTIC_EPS {
            false
        } else if 1.0 - p_one < DETERMINISTIC_EPS {
            true
        } else {
            coin.flip(p_one)
        };
        let (_, post) = self.project(qubit, basis, outcome)?;
        Ok((outcome, post.expect("sampled outcome has non-zero probability")))
    }

    /// Applies `u` to `targets`; `targets[0]` is the most significant qubit
    /// of `u`'s index.
    pub fn apply_unitary(&self, u: &UnitarySpec, targets: &[usize]) -> Result<StateVector> {
        let k = targets.len();
        if u.num_qubits() != k {
            return Err(Error::DimensionMismatch { dim: u.dim(), targets: k });
        }
        for (i, &t) in targets.iter().enumerate() {
            self.check_index(t)?;
            if targets[..i].contains(&t) {
                return Err(Error::DuplicateQubit(t));
            }
        }
        let masks: Vec<usize> = targets.iter().map(|&t| self.bit_mask(t)).collect();
        let all: usize = masks.iter().sum();
        let dim = u.dim();
        // offsets[j] = full-index bits for local index j
        let offsets: Vec<usize> = (0..dim)
            .map(|j| {
                masks
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| j & (1 << (k - 1 - b)) != 0)
                    .map(|(_, m)| m)
                    .sum()
            })
            .collect();
        let mut out = self.amps.clone();
        let mut local = vec![C64::default(); dim];
        for base in 0..self.amps.len() {
            if base & all != 0 {
                continue;
            }
            for (j, off) in offsets.iter().enumerate() {
                local[j] = self.amps[base | off];
            }
            for (r, off) in offsets.iter().enumerate() {
                let row = u.row(r);
                out[base | off] = row.iter().zip(&local).map(|(x, y)| x * y).sum();
            }
        }
        Ok(StateVector { num_qubits: self.num_qubits, amps: out })
    }

    /// Reorders qubits: qubit `i` of the result is qubit `order[i]` of `self`.
    pub fn permute(&self, order: &[usize]) -> Result<StateVector> {
        if order.len() != self.num_qubits {
            return Err(Error::QubitCount { expected: self.num_qubits, got: order.len() });
        }
        for (i, &q) in order.iter().enumerate() {
            self.check_index(q)?;
            if order[..i].contains(&q) {
                return Err(Error::DuplicateQubit(q));
            }
        }
        let n = self.num_qubits;
        let mut amps = vec![C64::default(); self.amps.len()];
        for (old, a) in self.amps.iter().enumerate() {
            let mut new = 0;
            for (i, &q) in order.iter().enumerate() {
                if old & (1 << (n - 1 - q)) != 0 {
                    new |= 1 << (n - 1 - i);
                }
            }
            amps[new] = *a;
        }
        Ok(StateVector { num_qubits: n, amps })
    }

    /// Partial trace onto `keep`, in the given order.
    pub fn reduced_density(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        let mut order = keep.to_vec();
        for (i, &q) in keep.iter().enumerate() {
            self.check_index(q)?;
            if keep[..i].contains(&q) {
                return Err(Error::DuplicateQubit(q));
            }
        }
        order.extend((0..self.num_qubits).filter(|q| !keep.contains(q)));
        let permuted = self.permute(&order)?;
        let k = keep.len();
        let dim = 1usize << k;
        let rest = 1usize << (self.num_qubits - k);
        let mut rho = vec![C64::default(); dim * dim];
        for r in 0..rest {
            for i in 0..dim {
                let ai = permuted.amps[i * rest + r];
                if ai == C64::default() {
                    continue;
                }
                for j in 0..dim {
                    rho[i * dim + j] += ai * permuted.amps[j * rest + r].conj();
                }
            }
        }
        DensityMatrix::from_entries(k, rho)
    }

    pub fn density(&self) -> DensityMatrix {
        let dim = self.amps.len();
        let mut rho = Vec::with_capacity(dim * dim);
        for a in &self.amps {
            for b in &self.amps {
                rho.push(a * b.conj());
            }
        }
        DensityMatrix::from_entries_unchecked(self.num_qubits, rho)
    }
}

/// Single-qubit BB84 state: `|bit>` in Z, `|+>`/`|->` in X.
pub fn prepare_bb84(bit: bool, basis: Basis) -> StateVector {
    let amps = match (basis, bit) {
        (Basis::Z, false) => vec![c(1.0, 0.0), c(0.0, 0.0)],
        (Basis::Z, true) => vec![c(0.0, 0.0), c(1.0, 0.0)],
        (Basis::X, false) => vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)],
        (Basis::X, true) => vec![c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)],
    };
    StateVector { num_qubits: 1, amps }
}

/// `(|01> - |10>)/sqrt(2)`.
pub fn prepare_singlet() -> StateVector {
    StateVector {
        num_qubits: 2,
        amps: vec![
            c(0.0, 0.0),
            c(FRAC_1_SQRT_2, 0.0),
            c(-FRAC_1_SQRT_2, 0.0),
            c(0.0, 0.0),
        ],
    }
}

#[cfg(test)]
impl StateVector {
    /// Haar-ish random state for tests: first column of a random unitary.
    pub(crate) fn random(num_qubits: usize, seed: u64) -> StateVector {
        let u = UnitarySpec::random(num_qubits, seed);
        let dim = 1 << num_qubits;
        let amps = (0..dim).map(|r| u.row(r)[0]).collect();
        StateVector::from_amplitudes(amps).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::{LedgerRng, Party, Stage};
    use approx::assert_abs_diff_eq;

    fn amps_close(s: &StateVector, expected: &[C64]) {
        assert_eq!(s.amplitudes().len(), expected.len());
        for (a, b) in s.amplitudes().iter().zip(expected) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-15);
        }
    }

    #[test]
    fn bb84_states() {
        amps_close(&prepare_bb84(false, Basis::Z), &[c(1.0, 0.0), c(0.0, 0.0)]);
        amps_close(&prepare_bb84(true, Basis::Z), &[c(0.0, 0.0), c(1.0, 0.0)]);
        amps_close(
            &prepare_bb84(false, Basis::X),
            &[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)],
        );
    }

    #[test]
    fn singlet_amplitudes() {
        amps_close(
            &prepare_singlet(),
            &[c(0.0, 0.0), c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0), c(0.0, 0.0)],
        );
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(matches!(
            StateVector::from_amplitudes(vec![c(1.0, 0.0); 3]),
            Err(Error::BadAmplitudeLength(3))
        ));
        assert!(matches!(
            StateVector::from_amplitudes(vec![c(1.0, 0.0), c(1.0, 0.0)]),
            Err(Error::NotNormalized(_))
        ));
        assert!(matches!(StateVector::zeros(13), Err(Error::RegisterTooLarge(13))));
    }

    #[test]
    fn eigenstate_measurement_draws_no_coin() {
        let mut rng = LedgerRng::from_seed(0);
        let s = prepare_bb84(false, Basis::Z);
        let (o, post) = s.measure(0, Basis::Z, &mut rng.coin(Party::Bob, Stage::BobMeasurement)).unwrap();
        assert!(!o);
        assert_eq!(post, s);
        let (o, _) = prepare_bb84(true, Basis::X)
            .measure(0, Basis::X, &mut rng.coin(Party::Bob, Stage::BobMeasurement))
            .unwrap();
        assert!(o);
        assert_eq!(rng.ledger().total(), 0);
    }

    #[test]
    fn measure_index_out_of_range() {
        let mut rng = LedgerRng::from_seed(0);
        let err = prepare_singlet().measure(2, Basis::Z, &mut rng.coin(Party::Bob, Stage::BobMeasurement));
        assert!(matches!(err, Err(Error::QubitIndex { index: 2, num_qubits: 2 })));
    }

    #[test]
    fn x_projection_of_z_state() {
        let s = prepare_bb84(true, Basis::Z);
        let (p, post) = s.project(0, Basis::X, true).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
        let post = post.unwrap();
        assert_abs_diff_eq!(post.probability(0, Basis::X, true).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn hadamard_maps_z0_to_x0() {
        let h = UnitarySpec::hadamard();
        let out = prepare_bb84(false, Basis::Z).apply_unitary(&h, &[0]).unwrap();
        amps_close(&out, prepare_bb84(false, Basis::X).amplitudes());
    }

    #[test]
    fn identity_leaves_state() {
        let s = prepare_singlet();
        let out = s.apply_unitary(&UnitarySpec::identity(2), &[1, 0]).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn swap_on_singlet_is_minus_phase() {
        let s = prepare_singlet();
        let out = s.apply_unitary(&UnitarySpec::swap(), &[0, 1]).unwrap();
        for (a, b) in out.amplitudes().iter().zip(s.amplitudes()) {
            assert_abs_diff_eq!(a.re, -b.re, epsilon = 1e-15);
        }
        for q in 0..2 {
            let d = out
                .reduced_density(&[q])
                .unwrap()
                .max_abs_diff(&s.reduced_density(&[q]).unwrap())
                .unwrap();
            assert!(d < 1e-15);
        }
        assert!(out.density().max_abs_diff(&s.density()).unwrap() < 1e-15);
    }

    #[test]
    fn cnot_target_order_matters() {
        // |10> with control 0 -> |11>; with control 1 -> unchanged
        let s = StateVector::basis_state(2, 0b10).unwrap();
        let a = s.apply_unitary(&UnitarySpec::cnot(), &[0, 1]).unwrap();
        assert_eq!(a, StateVector::basis_state(2, 0b11).unwrap());
        let b = s.apply_unitary(&UnitarySpec::cnot(), &[1, 0]).unwrap();
        assert_eq!(b, s);
    }

    #[test]
    fn apply_unitary_errors() {
        let s = prepare_singlet();
        assert!(matches!(
            s.apply_unitary(&UnitarySpec::cnot(), &[0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            s.apply_unitary(&UnitarySpec::cnot(), &[0, 0]),
            Err(Error::DuplicateQubit(0))
        ));
        assert!(matches!(
            s.apply_unitary(&UnitarySpec::hadamard(), &[5]),
            Err(Error::QubitIndex { .. })
        ));
    }

    #[test]
    fn singlet_marginal_is_maximally_mixed() {
        let rho = prepare_singlet().reduced_density(&[0]).unwrap();
        let mixed = DensityMatrix::maximally_mixed(1);
        assert!(rho.max_abs_diff(&mixed).unwrap() < 1e-15);
    }

    #[test]
    fn product_marginal_is_pure() {
        let s = prepare_bb84(false, Basis::Z).tensor(&prepare_bb84(true, Basis::Z)).unwrap();
        let rho = s.reduced_density(&[0]).unwrap();
        assert!(rho.max_abs_diff(&prepare_bb84(false, Basis::Z).density()).unwrap() < 1e-15);
        let rho1 = s.reduced_density(&[1]).unwrap();
        assert!(rho1.max_abs_diff(&prepare_bb84(true, Basis::Z).density()).unwrap() < 1e-15);
    }

    #[test]
    fn full_keep_is_projector() {
        let s = StateVector::random(3, 17);
        let rho = s.reduced_density(&[0, 1, 2]).unwrap();
        assert!(rho.max_abs_diff(&s.density()).unwrap() < 1e-14);
        assert!(matches!(s.reduced_density(&[]), Err(Error::EmptyKeepSet)));
    }

    #[test]
    fn permute_roundtrip() {
        let s = StateVector::random(4, 3);
        let p = s.permute(&[2, 0, 3, 1]).unwrap();
        // inverse of [2,0,3,1] is [1,3,0,2]
        let back = p.permute(&[1, 3, 0, 2]).unwrap();
        for (a, b) in back.amplitudes().iter().zip(s.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}
