//! Entropies and mutual information over discrete joint distributions, plus
//! the Csiszár–Körner key-rate condition. All quantities are in bits.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-9;

/// Probability table over tuples of discrete outcomes, one column per named
/// variable.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    variables: Vec<String>,
    table: BTreeMap<Vec<u32>, f64>,
}

impl JointDistribution {
    pub fn new(variables: Vec<String>, table: BTreeMap<Vec<u32>, f64>) -> Result<Self> {
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].contains(v) {
                return Err(Error::DuplicateLabel(v.clone()));
            }
        }
        let mut total = 0.0;
        for (outcome, &p) in &table {
            if outcome.len() != variables.len() {
                return Err(Error::InvalidDistribution(format!(
                    "outcome of arity {} for {} variables",
                    outcome.len(),
                    variables.len()
                )));
            }
            if !(p >= 0.0) {
                return Err(Error::InvalidDistribution(format!("negative probability {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self { variables, table })
    }

    pub fn from_pairs<S: Into<String>>(
        variables: impl IntoIterator<Item = S>,
        pairs: impl IntoIterator<Item = (Vec<u32>, f64)>,
    ) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (o, p) in pairs {
            *table.entry(o).or_insert(0.0) += p;
        }
        Self::new(variables.into_iter().map(Into::into).collect(), table)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn table(&self) -> &BTreeMap<Vec<u32>, f64> {
        &self.table
    }

    pub fn total(&self) -> f64 {
        self.table.values().sum()
    }

    /// Values of `var` observed with non-zero probability.
    pub fn alphabet(&self, var: &str) -> Result<BTreeSet<u32>> {
        let i = self.index_of(var)?;
        Ok(self.table.iter().filter(|(_, &p)| p > 0.0).map(|(o, _)| o[i]).collect())
    }

    fn index_of(&self, var: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == var)
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))
    }

    pub fn probability(&self, outcome: &[u32]) -> f64 {
        self.table.get(outcome).copied().unwrap_or(0.0)
    }

    /// Probability of the event `pred`.
    pub fn probability_of(&self, pred: impl Fn(&[u32]) -> bool) -> f64 {
        self.table.iter().filter(|(o, _)| pred(o)).map(|(_, p)| p).sum()
    }

    pub fn marginal(&self, vars: &[&str]) -> Result<JointDistribution> {
        let idx: Vec<usize> = vars.iter().map(|v| self.index_of(v)).collect::<Result<_>>()?;
        let mut table = BTreeMap::new();
        for (o, p) in &self.table {
            let key: Vec<u32> = idx.iter().map(|&i| o[i]).collect();
            *table.entry(key).or_insert(0.0) += p;
        }
        Ok(Self { variables: vars.iter().map(|s| s.to_string()).collect(), table })
    }

    /// Renormalized distribution restricted to outcomes satisfying `pred`.
    pub fn condition(&self, pred: impl Fn(&[u32]) -> bool) -> Result<JointDistribution> {
        let mass = self.probability_of(&pred);
        if mass <= 0.0 {
            return Err(Error::ZeroProbabilityEvent);
        }
        let table = self
            .table
            .iter()
            .filter(|(o, _)| pred(o))
            .map(|(o, p)| (o.clone(), p / mass))
            .collect();
        Ok(Self { variables: self.variables.clone(), table })
    }

    /// Push-forward through `f`, producing new variables.
    pub fn derive<S: Into<String>>(
        &self,
        variables: impl IntoIterator<Item = S>,
        f: impl Fn(&[u32]) -> Vec<u32>,
    ) -> Result<JointDistribution> {
        Self::from_pairs(variables, self.table.iter().map(|(o, &p)| (f(o), p)))
    }

    /// Joint Shannon entropy of `vars`.
    pub fn entropy(&self, vars: &[&str]) -> Result<f64> {
        let m = self.marginal(vars)?;
        Ok(m.table.values().map(|&p| plogp(p)).sum::<f64>())
    }

    pub fn mutual_information(&self, a: &str, b: &str) -> Result<f64> {
        mutual_information(self, a, b)
    }
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// `h(p) = -p log p - (1-p) log(1-p)`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityRange(p));
    }
    Ok(plogp(p) + plogp(1.0 - p))
}

/// `I(A:B) = H(A) + H(B) - H(A,B)`.
pub fn mutual_information(joint: &JointDistribution, a: &str, b: &str) -> Result<f64> {
    let ha = joint.entropy(&[a])?;
    let hb = joint.entropy(&[b])?;
    let hab = if a == b { ha } else { joint.entropy(&[a, b])? };
    Ok(ha + hb - hab)
}

/// Plug-in frequency table from observed outcome tuples.
pub fn empirical_joint<S, T>(variables: impl IntoIterator<Item = S>, samples: impl IntoIterator<Item = T>) -> Result<JointDistribution>
where
    S: Into<String>,
    T: AsRef<[u32]>,
{
    let mut counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    let mut n = 0u64;
    for s in samples {
        *counts.entry(s.as_ref().to_vec()).or_insert(0) += 1;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    let table = counts.into_iter().map(|(o, c)| (o, c as f64 / n as f64)).collect();
    JointDistribution::new(variables.into_iter().map(Into::into).collect(), table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub i_ab: f64,
    pub i_ea: f64,
    pub i_eb: f64,
    pub ck_rate: f64,
    pub distillable: bool,
}

/// Csiszár–Körner rate `I(A:B) - min(I(E:A), I(E:B))`; a key is distillable
/// when it is strictly positive.
pub fn ck_rate(i_ab: f64, i_ea: f64, i_eb: f64) -> Result<RateReport> {
    for v in [i_ab, i_ea, i_eb] {
        if !(v >= 0.0) {
            return Err(Error::NegativeInformation(v));
        }
    }
    let rate = i_ab - i_ea.min(i_eb);
    Ok(RateReport { i_ab, i_ea, i_eb, ck_rate: rate, distillable: rate > 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bsc(crossover: f64) -> JointDistribution {
        JointDistribution::from_pairs(
            ["a", "b"],
            [
                (vec![0, 0], 0.5 * (1.0 - crossover)),
                (vec![0, 1], 0.5 * crossover),
                (vec![1, 0], 0.5 * crossover),
                (vec![1, 1], 0.5 * (1.0 - crossover)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // -0.25 log2 0.25 - 0.75 log2 0.75 = 0.5 + 0.311278...
        let direct = 0.5 - 0.75 * (0.75f64).log2();
        assert_abs_diff_eq!(binary_entropy(0.25).unwrap(), direct, epsilon = 1e-15);
        assert_abs_diff_eq!(binary_entropy(0.25).unwrap(), 0.811_278_124_459_132_8, epsilon = 1e-12);
        assert!(matches!(binary_entropy(1.5), Err(Error::ProbabilityRange(_))));
        assert!(matches!(binary_entropy(-0.1), Err(Error::ProbabilityRange(_))));
    }

    #[test]
    fn mutual_information_examples() {
        assert_abs_diff_eq!(bsc(0.5).mutual_information("a", "b").unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bsc(0.0).mutual_information("a", "b").unwrap(), 1.0, epsilon = 1e-15);
        let expected = 1.0 - binary_entropy(0.25).unwrap();
        assert_abs_diff_eq!(bsc(0.25).mutual_information("a", "b").unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, 0.188_721_875_540_867_2, epsilon = 1e-12);
        assert!(matches!(bsc(0.1).mutual_information("a", "z"), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn ck_rate_examples() {
        let r = ck_rate(1.0, 0.0, 0.0).unwrap();
        assert_eq!(r.ck_rate, 1.0);
        assert!(r.distillable);
        let i_ab = 1.0 - binary_entropy(0.25).unwrap();
        let r = ck_rate(i_ab, 0.5, 0.5).unwrap();
        assert_abs_diff_eq!(r.ck_rate, -0.311_278_124_459_132_8, epsilon = 1e-12);
        assert!(!r.distillable);
        let r = ck_rate(0.3, 0.3, 0.7).unwrap();
        assert_eq!(r.ck_rate, 0.0);
        assert!(!r.distillable);
        assert!(matches!(ck_rate(-0.1, 0.0, 0.0), Err(Error::NegativeInformation(_))));
    }

    #[test]
    fn empirical_examples() {
        let j = empirical_joint(["a", "b"], [[0u32, 0], [1, 1]]).unwrap();
        assert_eq!(j.probability(&[0, 0]), 0.5);
        assert_eq!(j.probability(&[1, 1]), 0.5);
        let point = empirical_joint(["a"], vec![[3u32]; 10]).unwrap();
        assert_eq!(point.probability(&[3]), 1.0);
        assert_eq!(point.entropy(&["a"]).unwrap(), 0.0);
        assert!(matches!(empirical_joint(["a"], Vec::<[u32; 1]>::new()), Err(Error::EmptySamples)));
    }

    #[test]
    fn rejects_bad_tables() {
        let r = JointDistribution::from_pairs(["a"], [(vec![0], 0.7)]);
        assert!(matches!(r, Err(Error::InvalidDistribution(_))));
        let r = JointDistribution::from_pairs(["a"], [(vec![0], 1.2), (vec![1], -0.2)]);
        assert!(matches!(r, Err(Error::InvalidDistribution(_))));
    }

    #[test]
    fn conditioning_and_marginals() {
        let j = bsc(0.25);
        let c = j.condition(|o| o[0] == 1).unwrap();
        assert_abs_diff_eq!(c.probability(&[1, 1]), 0.75, epsilon = 1e-15);
        let m = j.marginal(&["b"]).unwrap();
        assert_abs_diff_eq!(m.probability(&[0]), 0.5, epsilon = 1e-15);
        assert!(matches!(j.condition(|o| o[0] == 7), Err(Error::ZeroProbabilityEvent)));
    }

    fn arb_joint() -> impl Strategy<Value = JointDistribution> {
        prop::collection::vec(0.0f64..1.0, 9).prop_filter_map("mass", |w| {
            let total: f64 = w.iter().sum();
            (total > 1e-6).then(|| {
                JointDistribution::from_pairs(
                    ["x", "y"],
                    w.iter().enumerate().map(|(i, p)| (vec![(i / 3) as u32, (i % 3) as u32], p / total)),
                )
                .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn mutual_information_is_symmetric_and_nonnegative(j in arb_joint()) {
            let ixy = j.mutual_information("x", "y").unwrap();
            let iyx = j.mutual_information("y", "x").unwrap();
            prop_assert!(ixy >= -1e-12);
            prop_assert!((ixy - iyx).abs() < 1e-12);
            let hx = j.entropy(&["x"]).unwrap();
            prop_assert!(ixy <= hx + 1e-12);
        }
    }
}
