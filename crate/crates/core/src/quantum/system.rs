use super::{Basis, DensityMatrix, StateVector, UnitarySpec, MAX_QUBITS};
use crate::error::{Error, Result};
use crate::randomness::Coin;

/// Handle to one logical qubit inside a [`QubitSystem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QubitId(usize);

/// A collection of independent registers. Qubits live in product form until
/// an operation touches several of them at once, at which point their
/// registers are merged. Lets a 1000-qubit block stay as 1000 one-qubit
/// registers while a block attack entangles a handful of them with ancillas.
#[derive(Debug, Clone, Default)]
pub struct QubitSystem {
    registers: Vec<Option<StateVector>>,
    // qubit id -> (register, index within register)
    location: Vec<(usize, usize)>,
}

impl QubitSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, state: StateVector) -> Vec<QubitId> {
        let reg = self.registers.len();
        let n = state.num_qubits();
        self.registers.push(Some(state));
        (0..n)
            .map(|i| {
                self.location.push((reg, i));
                QubitId(self.location.len() - 1)
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.location.len()
    }

    pub fn is_empty(&self) -> bool {
        self.location.is_empty()
    }

    fn locate(&self, q: QubitId) -> Result<(usize, usize)> {
        self.location.get(q.0).copied().ok_or(Error::UnknownQubit(q.0))
    }

    /// Number of qubits sharing `q`'s register.
    pub fn register_size(&self, q: QubitId) -> Result<usize> {
        let (r, _) = self.locate(q)?;
        Ok(self.registers[r].as_ref().expect("live register").num_qubits())
    }

    /// Merges the registers of `qubits` into one and returns its index.
    fn merge(&mut self, qubits: &[QubitId]) -> Result<usize> {
        let mut regs: Vec<usize> = Vec::new();
        for &q in qubits {
            let (r, _) = self.locate(q)?;
            if !regs.contains(&r) {
                regs.push(r);
            }
        }
        let target = regs[0];
        if regs.len() == 1 {
            return Ok(target);
        }
        let total: usize = regs
            .iter()
            .map(|&r| self.registers[r].as_ref().expect("live register").num_qubits())
            .sum();
        if total > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(total));
        }
        let mut merged = self.registers[target].take().expect("live register");
        for &r in &regs[1..] {
            let offset = merged.num_qubits();
            let other = self.registers[r].take().expect("live register");
            merged = merged.tensor(&other)?;
            for loc in self.location.iter_mut().filter(|l| l.0 == r) {
                *loc = (target, loc.1 + offset);
            }
        }
        self.registers[target] = Some(merged);
        Ok(target)
    }

    pub fn apply(&mut self, u: &UnitarySpec, targets: &[QubitId]) -> Result<()> {
        if targets.is_empty() {
            return Err(Error::DimensionMismatch { dim: u.dim(), targets: 0 });
        }
        let reg = self.merge(targets)?;
        let local: Vec<usize> = targets.iter().map(|&q| self.location[q.0].1).collect();
        let state = self.registers[reg].as_ref().expect("live register");
        let next = state.apply_unitary(u, &local)?;
        self.registers[reg] = Some(next);
        Ok(())
    }

    pub fn measure(&mut self, q: QubitId, basis: Basis, coin: &mut impl Coin) -> Result<bool> {
        let (reg, idx) = self.locate(q)?;
        let state = self.registers[reg].as_ref().expect("live register");
        let (outcome, post) = state.measure(idx, basis, coin)?;
        self.registers[reg] = Some(post);
        Ok(outcome)
    }

    pub fn reduced_density(&mut self, qubits: &[QubitId]) -> Result<DensityMatrix> {
        if qubits.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        let reg = self.merge(qubits)?;
        let local: Vec<usize> = qubits.iter().map(|&q| self.location[q.0].1).collect();
        self.registers[reg].as_ref().expect("live register").reduced_density(&local)
    }
}
