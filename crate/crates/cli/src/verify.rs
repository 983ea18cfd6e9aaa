//! The reduction-equivalence suite behind `blockqkd verify`.

use std::io::Write;
use std::path::PathBuf;

use blockqkd::attacks::{default_corpus, load_unitary, verify_reduction_at, ReductionCase, REDUCTION_TOL};
use blockqkd::Error;

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub random_count: usize,
    /// Extra case read from a matrix file.
    pub matrix: Option<PathBuf>,
    /// Restricts the corpus to this block size, or sets the extra case's.
    pub n: Option<usize>,
    pub m: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 2024, random_count: 20, matrix: None, n: None, m: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseOutcome {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub max_deviation: f64,
    pub passed: bool,
}

fn check_shape(n: usize, m: usize) -> Result<(), CliError> {
    if !(2..=3).contains(&n) {
        return Err(CliError::Config(format!("n = {n}: the verifier handles n = 2 or 3")));
    }
    if n + m > 8 {
        return Err(CliError::Config(format!("n + m = {} exceeds 8", n + m)));
    }
    Ok(())
}

pub fn build_corpus(opts: &VerifyOptions) -> Result<Vec<ReductionCase>, CliError> {
    if let Some(n) = opts.n {
        check_shape(n, opts.m.unwrap_or(0))?;
    }
    let mut cases = default_corpus(opts.seed, opts.random_count)?;
    if let Some(path) = &opts.matrix {
        let u = load_unitary(path).map_err(|e| match e {
            Error::NonUnitary(err) => {
                CliError::Runtime(format!("{}: matrix is not unitary (max |UU* - I| = {err:.3e})", path.display()))
            }
            other => CliError::Config(other.to_string()),
        })?;
        let n = opts.n.unwrap_or(2);
        let m = opts.m.unwrap_or_else(|| u.num_qubits().saturating_sub(n));
        check_shape(n, m)?;
        if u.num_qubits() != n + m {
            return Err(CliError::Config(format!("matrix acts on {} qubits, n + m = {}", u.num_qubits(), n + m)));
        }
        cases.push(ReductionCase { name: path.display().to_string(), u, n, m });
    } else if let Some(n) = opts.n {
        cases.retain(|c| c.n == n);
    }
    Ok(cases)
}

/// Checks every case with Alice's qubit in every slot and prints one line
/// per case. Returns the per-case outcomes.
pub fn run_verify(opts: &VerifyOptions, out: &mut impl Write) -> Result<Vec<CaseOutcome>, CliError> {
    let cases = build_corpus(opts)?;
    let mut outcomes = Vec::with_capacity(cases.len());
    for case in &cases {
        let mut worst: f64 = 0.0;
        for slot in 0..case.n {
            let r = verify_reduction_at(&case.u, case.n, case.m, [0.5, 0.5], slot)?;
            worst = worst.max(r.max_deviation);
        }
        let passed = worst < REDUCTION_TOL;
        writeln!(
            out,
            "{:<24} n={} m={} max_deviation={:.3e} {}",
            case.name,
            case.n,
            case.m,
            worst,
            if passed { "PASS" } else { "FAIL" }
        )?;
        outcomes.push(CaseOutcome { name: case.name.clone(), n: case.n, m: case.m, max_deviation: worst, passed });
    }
    Ok(outcomes)
}
