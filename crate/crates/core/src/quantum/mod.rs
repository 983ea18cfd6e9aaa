//! Dense simulation of small qubit registers.
//!
//! Qubit 0 is the most significant bit of the amplitude index: in a 3-qubit
//! register the amplitude of `|q0 q1 q2>` sits at index `4*q0 + 2*q1 + q2`.
//! Registers are capped at [`MAX_QUBITS`] qubits. Equivalence checks never
//! compare global phases; they go through density matrices or outcome
//! distributions.

mod circuit;
mod density;
mod state;
mod system;
mod unitary;

use serde::{Deserialize, Serialize};

pub use circuit::{enumerate_outcomes, Circuit, Condition, Source, Step, SKIPPED};
pub use density::DensityMatrix;
pub use state::{prepare_bb84, prepare_singlet, StateVector};
pub use system::{QubitId, QubitSystem};
pub use unitary::{UnitarySpec, UNITARITY_TOL};

pub type C64 = num_complex::Complex64;

pub const MAX_QUBITS: usize = 12;

/// Projections whose probability falls below this are treated as impossible;
/// a measurement with such a branch is deterministic and draws no coin.
pub const DETERMINISTIC_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub const BOTH: [Basis; 2] = [Basis::Z, Basis::X];

    /// Basis encoded by a random bit: `false` is Z, `true` is X.
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Basis::X
        } else {
            Basis::Z
        }
    }

    pub fn as_bit(self) -> bool {
        self == Basis::X
    }
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Basis::Z => "Z",
            Basis::X => "X",
        })
    }
}

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
