use std::path::PathBuf;
use std::process::ExitCode;

use blockqkd_cli::experiment::run;
use blockqkd_cli::verify::{run_verify, VerifyOptions};
use blockqkd_cli::{report, CliError, ExperimentConfig, Overrides};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "blockqkd", version, about = "BB84 with block-wise basis choices: sweeps, reduction checks, reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sessions described by a config file and flags.
    Run(Box<RunArgs>),
    /// Check the singlet-simulation reduction on a corpus of unitaries.
    Verify(VerifyArgs),
    /// Pretty-print a session JSON report.
    Report { file: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// INI config; flags override its values.
    config: Option<PathBuf>,
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long)]
    num_blocks: Option<usize>,
    /// per_qubit or per_block
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    channel_flip_prob: Option<f64>,
    #[arg(long)]
    sample_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// none, intercept_resend or unitary_block
    #[arg(long)]
    attack: Option<String>,
    #[arg(long)]
    fraction: Option<f64>,
    /// per_qubit or per_block
    #[arg(long)]
    granularity: Option<String>,
    /// Matrix file for unitary_block.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Comma-separated list, e.g. 2,4,8
    #[arg(long)]
    block_sizes: Option<String>,
    #[arg(long)]
    flip_probs: Option<String>,
    #[arg(long)]
    fractions: Option<String>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Enable or disable reconciliation and privacy amplification.
    #[arg(long)]
    postprocess: Option<bool>,
    #[arg(long)]
    safety_margin: Option<u64>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print per-stage wall times to stderr.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    random_count: usize,
    /// Add a unitary read from a matrix file to the corpus.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
}

fn cmd_run(a: RunArgs) -> Result<(), CliError> {
    let overrides = Overrides {
        block_size: a.block_size,
        num_blocks: a.num_blocks,
        mode: a.mode,
        channel_flip_prob: a.channel_flip_prob,
        sample_fraction: a.sample_fraction,
        seed: a.seed,
        attack: a.attack,
        fraction: a.fraction,
        granularity: a.granularity,
        matrix: a.matrix,
        block_sizes: a.block_sizes,
        flip_probs: a.flip_probs,
        fractions: a.fractions,
        repetitions: a.repetitions,
        postprocess: a.postprocess,
        safety_margin: a.safety_margin,
        output: a.output,
    };
    let config = ExperimentConfig::load(a.config.as_deref(), &overrides)?;
    let summary = run(&config)?;
    if a.timings {
        for out in &summary.outputs {
            let t = &out.timings;
            eprintln!(
                "session {:>4}: protocol {:?}, reconciliation {:?}, amplification {:?}",
                out.report.config.index, t.session, t.reconciliation, t.amplification
            );
        }
    }
    println!("{} sessions, results in {}", summary.sessions, summary.csv_path.display());
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Result<bool, CliError> {
    let opts = VerifyOptions { seed: a.seed, random_count: a.random_count, matrix: a.matrix, n: a.n, m: a.m };
    let outcomes = run_verify(&opts, &mut std::io::stdout())?;
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} cases, {failed} failed", outcomes.len());
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(*a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
        Command::Report { file } => report::render_file(&file).map(|text| {
            print!("{text}");
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
