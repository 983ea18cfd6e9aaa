use nalgebra::DMatrix;

use super::{c, C64, MAX_QUBITS};
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-10;

/// Density operator on `num_qubits` qubits, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    dim: usize,
    entries: Vec<C64>,
}

impl DensityMatrix {
    /// Validating constructor: Hermitian, unit trace, positive semidefinite.
    pub fn from_entries(num_qubits: usize, entries: Vec<C64>) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(num_qubits));
        }
        let dim = 1usize << num_qubits;
        if entries.len() != dim * dim {
            return Err(Error::MatrixShape { dim, entries: entries.len() });
        }
        let rho = Self { num_qubits, dim, entries };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_entries_unchecked(num_qubits: usize, entries: Vec<C64>) -> Self {
        let dim = 1usize << num_qubits;
        debug_assert_eq!(entries.len(), dim * dim);
        Self { num_qubits, dim, entries }
    }

    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        let mut entries = vec![C64::default(); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = c(1.0 / dim as f64, 0.0);
        }
        Self { num_qubits, dim, entries }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order (of the Hermitian part).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = DMatrix::from_fn(self.dim, self.dim, |i, j| {
            (self.get(i, j) + self.get(j, i).conj()) * 0.5
        });
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn validate(&self) -> Result<()> {
        if self.hermiticity_error() > HERMITIAN_TOL {
            return Err(Error::InvalidDensity("hermiticity"));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensity("unit trace"));
        }
        if self.eigenvalues().first().is_some_and(|&e| e < -EIGEN_TOL) {
            return Err(Error::InvalidDensity("positivity"));
        }
        Ok(())
    }

    /// Largest entry-wise absolute difference.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { dim: other.dim, targets: self.num_qubits });
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn kron(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let n = self.num_qubits + other.num_qubits;
        if n > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(n));
        }
        let dim = self.dim * other.dim;
        let mut entries = vec![C64::default(); dim * dim];
        for i1 in 0..self.dim {
            for j1 in 0..self.dim {
                let a = self.get(i1, j1);
                if a == C64::default() {
                    continue;
                }
                for i2 in 0..other.dim {
                    for j2 in 0..other.dim {
                        entries[(i1 * other.dim + i2) * dim + j1 * other.dim + j2] = a * other.get(i2, j2);
                    }
                }
            }
        }
        Ok(Self { num_qubits: n, dim, entries })
    }

    /// Convex combination `sum_k w_k rho_k`. Weights must be non-negative and
    /// sum to one.
    pub fn mixture(terms: &[(f64, &DensityMatrix)]) -> Result<DensityMatrix> {
        let first = terms.first().ok_or(Error::EmptySamples)?.1;
        let total: f64 = terms.iter().map(|(w, _)| w).sum();
        if terms.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("mixture weights sum to {total}")));
        }
        let mut entries = vec![C64::default(); first.entries.len()];
        for (w, rho) in terms {
            if rho.dim != first.dim {
                return Err(Error::DimensionMismatch { dim: rho.dim, targets: first.num_qubits });
            }
            for (e, x) in entries.iter_mut().zip(&rho.entries) {
                *e += x * *w;
            }
        }
        Ok(Self { num_qubits: first.num_qubits, dim: first.dim, entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{prepare_bb84, prepare_singlet, Basis};

    #[test]
    fn pure_states_are_valid() {
        for s in [prepare_bb84(true, Basis::X), prepare_singlet()] {
            let rho = s.density();
            rho.validate().unwrap();
            let ev = rho.eigenvalues();
            assert!((ev.last().unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_density() {
        let bad = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        assert!(matches!(DensityMatrix::from_entries(1, bad), Err(Error::InvalidDensity("unit trace"))));
        let neg = vec![c(1.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)];
        assert!(matches!(DensityMatrix::from_entries(1, neg), Err(Error::InvalidDensity("positivity"))));
        let nonherm = vec![c(0.5, 0.0), c(0.3, 0.0), c(0.0, 0.0), c(0.5, 0.0)];
        assert!(matches!(DensityMatrix::from_entries(1, nonherm), Err(Error::InvalidDensity("hermiticity"))));
    }

    #[test]
    fn mixture_of_bb84_z_states_is_mixed() {
        let r0 = prepare_bb84(false, Basis::Z).density();
        let r1 = prepare_bb84(true, Basis::Z).density();
        let m = DensityMatrix::mixture(&[(0.5, &r0), (0.5, &r1)]).unwrap();
        assert!(m.max_abs_diff(&DensityMatrix::maximally_mixed(1)).unwrap() < 1e-15);
    }

    #[test]
    fn kron_matches_tensor_of_states() {
        let a = prepare_bb84(true, Basis::X);
        let b = prepare_bb84(false, Basis::Z);
        let k = a.density().kron(&b.density()).unwrap();
        assert!(k.max_abs_diff(&a.tensor(&b).unwrap().density()).unwrap() < 1e-15);
    }
}
