//! Small classical-quantum circuits with exhaustive outcome enumeration.
//!
//! A circuit is a list of steps over a growing register. Classical coins and
//! measurements define named variables; later steps may pick their bit,
//! basis, or firing condition from those variables. [`enumerate_outcomes`]
//! branches on every coin and measurement to produce the exact joint
//! distribution; [`Circuit::sample`] runs the same circuit once with real
//! randomness, which is the Monte Carlo cross-check.

use std::collections::BTreeMap;

use super::{prepare_bb84, prepare_singlet, Basis, StateVector, UnitarySpec, MAX_QUBITS};
use crate::error::{Error, Result};
use crate::infotheory::JointDistribution;
use crate::randomness::Coin;

/// Value recorded for a measurement whose condition did not hold.
pub const SKIPPED: u32 = 2;

/// Branches lighter than this (relative to their parent) are dropped.
const BRANCH_EPS: f64 = 1e-14;

/// A bit supplied either as a constant or by an earlier variable. For
/// bases, 0 is Z and 1 is X.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Fixed(u32),
    Var(String),
}

impl Source {
    pub fn var(name: impl Into<String>) -> Self {
        Source::Var(name.into())
    }
}

impl From<bool> for Source {
    fn from(b: bool) -> Self {
        Source::Fixed(b as u32)
    }
}

impl From<Basis> for Source {
    fn from(b: Basis) -> Self {
        Source::Fixed(b.as_bit() as u32)
    }
}

impl From<&str> for Source {
    fn from(name: &str) -> Self {
        Source::Var(name.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub var: String,
    pub value: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// Append a fixed state after the existing qubits.
    Append(StateVector),
    /// Append a BB84 qubit.
    Bb84 { bit: Source, basis: Source },
    /// Classical random bit, 1 with probability `p_one`.
    Coin { label: String, p_one: f64 },
    Unitary { u: UnitarySpec, targets: Vec<usize>, when: Vec<Condition> },
    Measure { qubit: usize, basis: Source, label: String, when: Vec<Condition> },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Circuit {
    steps: Vec<Step>,
}

fn conds(when: &[(&str, u32)]) -> Vec<Condition> {
    when.iter().map(|&(v, value)| Condition { var: v.to_string(), value }).collect()
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn push(mut self, step: Step) -> Self {
        self.steps.push(step);
        self
    }

    pub fn append(self, state: StateVector) -> Self {
        self.push(Step::Append(state))
    }

    pub fn singlet(self) -> Self {
        self.append(prepare_singlet())
    }

    pub fn bb84(self, bit: impl Into<Source>, basis: impl Into<Source>) -> Self {
        self.push(Step::Bb84 { bit: bit.into(), basis: basis.into() })
    }

    pub fn coin(self, label: &str, p_one: f64) -> Self {
        self.push(Step::Coin { label: label.to_string(), p_one })
    }

    pub fn unitary(self, u: UnitarySpec, targets: &[usize]) -> Self {
        self.unitary_if(u, targets, &[])
    }

    /// Unitary applied only when every `(variable, value)` pair matches.
    pub fn unitary_if(self, u: UnitarySpec, targets: &[usize], when: &[(&str, u32)]) -> Self {
        self.push(Step::Unitary { u, targets: targets.to_vec(), when: conds(when) })
    }

    pub fn measure(self, qubit: usize, basis: impl Into<Source>, label: &str) -> Self {
        self.measure_if(qubit, basis, label, &[])
    }

    /// Measurement performed only when every `(variable, value)` pair
    /// matches; otherwise the variable records [`SKIPPED`].
    pub fn measure_if(self, qubit: usize, basis: impl Into<Source>, label: &str, when: &[(&str, u32)]) -> Self {
        self.push(Step::Measure { qubit, basis: basis.into(), label: label.to_string(), when: conds(when) })
    }

    /// Variable names in order of definition.
    pub fn variables(&self) -> Vec<String> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                Step::Coin { label, .. } | Step::Measure { label, .. } => Some(label.clone()),
                _ => None,
            })
            .collect()
    }

    /// Static checks; returns the final qubit count.
    fn validate(&self) -> Result<usize> {
        let mut defined: Vec<&str> = Vec::new();
        let mut qubits = 0usize;
        let check_source = |s: &Source, defined: &[&str]| match s {
            Source::Fixed(v) if *v > 1 => Err(Error::NotABit(v.to_string())),
            Source::Var(name) if !defined.contains(&name.as_str()) => Err(Error::UnknownVariable(name.clone())),
            _ => Ok(()),
        };
        let check_when = |when: &[Condition], defined: &[&str]| {
            when.iter().try_for_each(|c| {
                if defined.contains(&c.var.as_str()) {
                    Ok(())
                } else {
                    Err(Error::UnknownVariable(c.var.clone()))
                }
            })
        };
        for step in &self.steps {
            match step {
                Step::Append(s) => qubits += s.num_qubits(),
                Step::Bb84 { bit, basis } => {
                    check_source(bit, &defined)?;
                    check_source(basis, &defined)?;
                    qubits += 1;
                }
                Step::Coin { label, p_one } => {
                    if !(0.0..=1.0).contains(p_one) {
                        return Err(Error::ProbabilityRange(*p_one));
                    }
                    if defined.contains(&label.as_str()) {
                        return Err(Error::DuplicateLabel(label.clone()));
                    }
                    defined.push(label);
                }
                Step::Unitary { u, targets, when } => {
                    check_when(when, &defined)?;
                    if u.num_qubits() != targets.len() {
                        return Err(Error::DimensionMismatch { dim: u.dim(), targets: targets.len() });
                    }
                    if let Some(&t) = targets.iter().find(|&&t| t >= qubits) {
                        return Err(Error::QubitIndex { index: t, num_qubits: qubits });
                    }
                }
                Step::Measure { qubit, basis, label, when } => {
                    check_when(when, &defined)?;
                    check_source(basis, &defined)?;
                    if *qubit >= qubits {
                        return Err(Error::QubitIndex { index: *qubit, num_qubits: qubits });
                    }
                    if defined.contains(&label.as_str()) {
                        return Err(Error::DuplicateLabel(label.clone()));
                    }
                    defined.push(label);
                }
            }
            if qubits > MAX_QUBITS {
                return Err(Error::RegisterTooLarge(qubits));
            }
        }
        Ok(qubits)
    }

    /// Executes the circuit once, sampling every coin and measurement.
    /// Returns one value per variable, in [`Self::variables`] order.
    pub fn sample(&self, coin: &mut impl Coin) -> Result<Vec<u32>> {
        self.validate()?;
        let vars = self.variables();
        let mut ctx = Ctx { vars: &vars, values: vec![None; vars.len()] };
        let mut state: Option<StateVector> = None;
        for step in &self.steps {
            match step {
                Step::Append(s) => state = Some(grow(state, s)?),
                Step::Bb84 { bit, basis } => {
                    let q = prepare_bb84(ctx.bit(bit)?, Basis::from_bit(ctx.bit(basis)?));
                    state = Some(grow(state, &q)?);
                }
                Step::Coin { label, p_one } => {
                    let v = coin.flip(*p_one);
                    ctx.set(label, v as u32);
                }
                Step::Unitary { u, targets, when } => {
                    if ctx.holds(when)? {
                        state = Some(live(&state)?.apply_unitary(u, targets)?);
                    }
                }
                Step::Measure { qubit, basis, label, when } => {
                    if ctx.holds(when)? {
                        let b = Basis::from_bit(ctx.bit(basis)?);
                        let (o, post) = live(&state)?.measure(*qubit, b, coin)?;
                        state = Some(post);
                        ctx.set(label, o as u32);
                    } else {
                        ctx.set(label, SKIPPED);
                    }
                }
            }
        }
        Ok(ctx.values.into_iter().map(|v| v.expect("every variable assigned")).collect())
    }
}

struct Ctx<'a> {
    vars: &'a [String],
    values: Vec<Option<u32>>,
}

impl Ctx<'_> {
    fn lookup(&self, name: &str) -> Result<u32> {
        let i = self.vars.iter().position(|v| v == name).ok_or_else(|| Error::UnknownVariable(name.into()))?;
        self.values[i].ok_or_else(|| Error::UnknownVariable(name.into()))
    }

    fn bit(&self, s: &Source) -> Result<bool> {
        let (v, name) = match s {
            Source::Fixed(v) => (*v, v.to_string()),
            Source::Var(name) => (self.lookup(name)?, name.clone()),
        };
        match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(Error::NotABit(name)),
        }
    }

    fn holds(&self, when: &[Condition]) -> Result<bool> {
        for c in when {
            if self.lookup(&c.var)? != c.value {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn set(&mut self, label: &str, v: u32) {
        let i = self.vars.iter().position(|x| x == label).expect("validated label");
        self.values[i] = Some(v);
    }
}

fn grow(state: Option<StateVector>, extra: &StateVector) -> Result<StateVector> {
    match state {
        None => Ok(extra.clone()),
        Some(s) => s.tensor(extra),
    }
}

fn live(state: &Option<StateVector>) -> Result<&StateVector> {
    state.as_ref().ok_or(Error::QubitIndex { index: 0, num_qubits: 0 })
}

/// Exact joint distribution of every coin and measurement variable, obtained
/// by following both outcomes of each random step.
pub fn enumerate_outcomes(circuit: &Circuit) -> Result<JointDistribution> {
    circuit.validate()?;
    let vars = circuit.variables();
    let mut table = BTreeMap::new();
    let ctx = Ctx { vars: &vars, values: vec![None; vars.len()] };
    branch(circuit.steps(), None, ctx, 1.0, &mut table)?;
    JointDistribution::new(vars, table)
}

fn branch(
    steps: &[Step],
    mut state: Option<StateVector>,
    mut ctx: Ctx<'_>,
    weight: f64,
    table: &mut BTreeMap<Vec<u32>, f64>,
) -> Result<()> {
    for (k, step) in steps.iter().enumerate() {
        match step {
            Step::Append(s) => state = Some(grow(state, s)?),
            Step::Bb84 { bit, basis } => {
                let q = prepare_bb84(ctx.bit(bit)?, Basis::from_bit(ctx.bit(basis)?));
                state = Some(grow(state, &q)?);
            }
            Step::Coin { label, p_one } => {
                for (v, p) in [(0u32, 1.0 - p_one), (1, *p_one)] {
                    if p <= BRANCH_EPS {
                        continue;
                    }
                    let mut sub = Ctx { vars: ctx.vars, values: ctx.values.clone() };
                    sub.set(label, v);
                    branch(&steps[k + 1..], state.clone(), sub, weight * p, table)?;
                }
                return Ok(());
            }
            Step::Unitary { u, targets, when } => {
                if ctx.holds(when)? {
                    state = Some(live(&state)?.apply_unitary(u, targets)?);
                }
            }
            Step::Measure { qubit, basis, label, when } => {
                if !ctx.holds(when)? {
                    ctx.set(label, SKIPPED);
                    continue;
                }
                let b = Basis::from_bit(ctx.bit(basis)?);
                let s = live(&state)?;
                for outcome in [false, true] {
                    let (p, post) = s.project(*qubit, b, outcome)?;
                    let Some(post) = post else { continue };
                    if p <= BRANCH_EPS {
                        continue;
                    }
                    let mut sub = Ctx { vars: ctx.vars, values: ctx.values.clone() };
                    sub.set(label, outcome as u32);
                    branch(&steps[k + 1..], Some(post), sub, weight * p, table)?;
                }
                return Ok(());
            }
        }
    }
    let key: Vec<u32> = ctx.values.into_iter().map(|v| v.expect("every variable assigned")).collect();
    *table.entry(key).or_insert(0.0) += weight;
    Ok(())
}
