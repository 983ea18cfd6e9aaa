use std::f64::consts::FRAC_1_SQRT_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{c, Basis, StateVector, C64, MAX_QUBITS};
use crate::error::{Error, Result};

/// `U U* = I` must hold to this tolerance, entry-wise.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Square unitary matrix acting on `log2(dim)` qubits, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitarySpec {
    dim: usize,
    num_qubits: usize,
    entries: Vec<C64>,
}

impl UnitarySpec {
    pub fn new(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(dim));
        }
        let num_qubits = dim.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(num_qubits));
        }
        if entries.len() != dim * dim {
            return Err(Error::MatrixShape { dim, entries: entries.len() });
        }
        let u = Self { dim, num_qubits, entries };
        let err = u.unitarity_error();
        if !(err <= UNITARITY_TOL) {
            return Err(Error::NonUnitary(err));
        }
        Ok(u)
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::MatrixShape { dim, entries: rows.iter().map(Vec::len).sum() });
        }
        Self::new(dim, rows.into_iter().flatten().collect())
    }

    fn unchecked(dim: usize, entries: Vec<C64>) -> Self {
        Self { dim, num_qubits: dim.trailing_zeros() as usize, entries }
    }

    fn real(dim: usize, values: &[f64]) -> Self {
        Self::unchecked(dim, values.iter().map(|&v| c(v, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim + col]
    }

    pub(crate) fn row(&self, r: usize) -> &[C64] {
        &self.entries[r * self.dim..(r + 1) * self.dim]
    }

    /// `max |(U U*)_{ij} - I_{ij}|`.
    pub fn unitarity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let dot: C64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b.conj()).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }

    pub fn identity(num_qubits: usize) -> Self {
        let dim = 1 << num_qubits;
        let mut entries = vec![C64::default(); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = c(1.0, 0.0);
        }
        Self::unchecked(dim, entries)
    }

    pub fn hadamard() -> Self {
        let h = FRAC_1_SQRT_2;
        Self::real(2, &[h, h, h, -h])
    }

    pub fn pauli_x() -> Self {
        Self::real(2, &[0.0, 1.0, 1.0, 0.0])
    }

    pub fn pauli_z() -> Self {
        Self::real(2, &[1.0, 0.0, 0.0, -1.0])
    }

    /// Control is the first target, data the second.
    pub fn cnot() -> Self {
        #[rustfmt::skip]
        let m = [
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
        ];
        Self::real(4, &m)
    }

    pub fn swap() -> Self {
        #[rustfmt::skip]
        let m = [
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ];
        Self::real(4, &m)
    }

    /// Exchanges the two eigenstates of `basis`: X for Z, Z for X.
    pub fn flip(basis: Basis) -> Self {
        match basis {
            Basis::Z => Self::pauli_x(),
            Basis::X => Self::pauli_z(),
        }
    }

    /// `self ⊗ other`, with `self` on the leading qubits.
    pub fn kron(&self, other: &UnitarySpec) -> Result<Self> {
        let n = self.num_qubits + other.num_qubits;
        if n > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(n));
        }
        let dim = self.dim * other.dim;
        let mut entries = vec![C64::default(); dim * dim];
        for i1 in 0..self.dim {
            for j1 in 0..self.dim {
                let a = self.get(i1, j1);
                for i2 in 0..other.dim {
                    for j2 in 0..other.dim {
                        entries[(i1 * other.dim + i2) * dim + j1 * other.dim + j2] = a * other.get(i2, j2);
                    }
                }
            }
        }
        Ok(Self::unchecked(dim, entries))
    }

    /// Matrix product `self · other` (apply `other` first).
    pub fn compose(&self, other: &UnitarySpec) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { dim: other.dim, targets: self.num_qubits });
        }
        let d = self.dim;
        let mut entries = vec![C64::default(); d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                for j in 0..d {
                    entries[i * d + j] += a * other.get(k, j);
                }
            }
        }
        Ok(Self::unchecked(d, entries))
    }

    /// `self` acting on `targets` of a `num_qubits` register, identity
    /// elsewhere.
    pub fn embed(&self, targets: &[usize], num_qubits: usize) -> Result<Self> {
        if num_qubits > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(num_qubits));
        }
        let dim = 1usize << num_qubits;
        let mut entries = vec![C64::default(); dim * dim];
        for j in 0..dim {
            let col = StateVector::basis_state(num_qubits, j)?.apply_unitary(self, targets)?;
            for (i, a) in col.amplitudes().iter().enumerate() {
                entries[i * dim + j] = *a;
            }
        }
        Ok(Self::unchecked(dim, entries))
    }

    /// Seeded random unitary: complex Gaussian matrix orthonormalized column
    /// by column with modified Gram-Schmidt (two sweeps).
    pub fn random(num_qubits: usize, seed: u64) -> Self {
        let dim = 1usize << num_qubits;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols: Vec<Vec<C64>> = (0..dim)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        c(re, im)
                    })
                    .collect()
            })
            .collect();
        for j in 0..dim {
            for _ in 0..2 {
                for k in 0..j {
                    let proj: C64 = cols[k].iter().zip(&cols[j]).map(|(a, b)| a.conj() * b).sum();
                    let (done, rest) = cols.split_at_mut(j);
                    for (x, q) in rest[0].iter_mut().zip(&done[k]) {
                        *x -= proj * q;
                    }
                }
            }
            let norm = cols[j].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            for x in &mut cols[j] {
                *x /= norm;
            }
        }
        let mut entries = vec![C64::default(); dim * dim];
        for (j, col) in cols.iter().enumerate() {
            for (i, x) in col.iter().enumerate() {
                entries[i * dim + j] = *x;
            }
        }
        Self::unchecked(dim, entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_gates_are_unitary() {
        for u in [
            UnitarySpec::identity(3),
            UnitarySpec::hadamard(),
            UnitarySpec::pauli_x(),
            UnitarySpec::pauli_z(),
            UnitarySpec::cnot(),
            UnitarySpec::swap(),
        ] {
            assert!(u.unitarity_error() < 1e-15);
        }
    }

    #[test]
    fn random_unitaries_are_unitary_and_seeded() {
        for n in 1..=5 {
            let u = UnitarySpec::random(n, 42 + n as u64);
            assert!(u.unitarity_error() < 1e-12, "n={n}: {}", u.unitarity_error());
            assert_eq!(u, UnitarySpec::random(n, 42 + n as u64));
        }
        assert_ne!(UnitarySpec::random(2, 1), UnitarySpec::random(2, 2));
    }

    #[test]
    fn rejects_non_unitary() {
        let m = vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        assert!(matches!(UnitarySpec::new(2, m), Err(Error::NonUnitary(_))));
        assert!(matches!(UnitarySpec::new(3, vec![c(1.0, 0.0); 9]), Err(Error::NotPowerOfTwo(3))));
        assert!(matches!(UnitarySpec::new(2, vec![c(1.0, 0.0); 3]), Err(Error::MatrixShape { .. })));
    }

    #[test]
    fn embed_places_gate_on_targets() {
        // CNOT from qubit 0 to qubit 2 of three: |100> -> |101>
        let u = UnitarySpec::cnot().embed(&[0, 2], 3).unwrap();
        assert!(u.unitarity_error() < 1e-15);
        assert_eq!(u.get(0b101, 0b100), c(1.0, 0.0));
        assert_eq!(u.get(0b010, 0b010), c(1.0, 0.0));
        assert!(UnitarySpec::cnot().embed(&[0, 3], 3).is_err());
    }

    #[test]
    fn kron_and_compose() {
        let hh = UnitarySpec::hadamard().kron(&UnitarySpec::hadamard()).unwrap();
        let id = hh.compose(&hh).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let t = if i == j { 1.0 } else { 0.0 };
                assert!((id.get(i, j) - c(t, 0.0)).norm() < 1e-15);
            }
        }
    }
}
