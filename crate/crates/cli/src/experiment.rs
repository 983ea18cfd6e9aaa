//! Sweep execution and report writing.

use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use blockqkd::postprocess::{pipeline, PassStats, PipelineStatus};
use blockqkd::protocol::{run_session, ProtocolConfig};
use blockqkd::randomness::{RandomnessLedger, Stage};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AttackConfig, ExperimentConfig, PostprocessConfig, SweepPoint};
use crate::error::CliError;

/// Bumped whenever a key of the JSON report changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct PointConfig {
    pub index: usize,
    pub repetition: usize,
    pub protocol: ProtocolConfig,
    pub attack: AttackConfig,
    pub postprocess: PostprocessConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct PostprocessResults {
    pub status: PipelineStatus,
    pub disclosed_parities: u64,
    pub residual_mismatches: usize,
    pub passes: Vec<PassStats>,
    pub eve_info_bits: f64,
    pub pa_seed_bits: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Results {
    pub raw_qubits: u64,
    pub sifted_bits: usize,
    pub kept_blocks: usize,
    pub disclosed_sample: usize,
    pub qber_true: f64,
    pub qber_estimated: f64,
    pub i_ab: f64,
    pub i_ea: f64,
    pub i_eb: f64,
    pub ck_rate: f64,
    pub distillable: bool,
    pub info_bits_per_unit: usize,
    pub quantum_phase_alice: u64,
    pub quantum_phase_bob: u64,
    pub postprocess: Option<PostprocessResults>,
    pub final_key_len: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub blockqkd: &'static str,
    pub blockqkd_cli: &'static str,
    pub schema: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self { blockqkd: blockqkd::VERSION, blockqkd_cli: env!("CARGO_PKG_VERSION"), schema: SCHEMA_VERSION }
    }
}

/// One session's JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct SessionJson {
    pub config: PointConfig,
    pub results: Results,
    /// Every bit drawn, session and post-processing together.
    pub ledger: RandomnessLedger,
    pub versions: Versions,
}

#[derive(Debug, Clone, Default)]
pub struct Timings {
    pub session: Duration,
    pub reconciliation: Duration,
    pub amplification: Duration,
}

#[derive(Debug, Clone)]
pub struct SessionOutput {
    pub report: SessionJson,
    pub timings: Timings,
}

pub fn run_point(config: &ExperimentConfig, point: &SweepPoint) -> Result<SessionOutput, CliError> {
    let attack = config.attack.spec(point.fraction)?;
    let t = Instant::now();
    let session = run_session(&point.protocol, &attack)?;
    let mut timings = Timings { session: t.elapsed(), ..Timings::default() };
    let rate = session.rate()?;
    let consumption = session.consumption();

    let (post, ledger, final_key_len) = if config.postprocess.enabled {
        let out = pipeline(&session, &rate, &config.postprocess.params)?;
        timings.reconciliation = out.timings.reconciliation;
        timings.amplification = out.timings.amplification;
        let rec = out.reconciliation.as_ref();
        let post = PostprocessResults {
            status: out.status,
            disclosed_parities: rec.map_or(0, |r| r.disclosed_parities),
            residual_mismatches: rec.map_or(0, |r| r.residual_mismatches),
            passes: rec.map(|r| r.pass_stats.clone()).unwrap_or_default(),
            eve_info_bits: out.eve_info_bits,
            pa_seed_bits: out.amplification.as_ref().map_or(0, |a| a.seed_bits),
        };
        (Some(post), out.ledger, out.final_key_len)
    } else {
        (None, session.ledger.clone(), 0)
    };

    let results = Results {
        raw_qubits: session.raw_qubits,
        sifted_bits: session.sifted_bits,
        kept_blocks: session.kept_blocks,
        disclosed_sample: session.disclosed_indices.len(),
        qber_true: session.qber_true,
        qber_estimated: session.qber_estimated,
        i_ab: rate.i_ab,
        i_ea: rate.i_ea,
        i_eb: rate.i_eb,
        ck_rate: rate.ck_rate,
        distillable: rate.distillable,
        info_bits_per_unit: session.info.bits_per_unit,
        quantum_phase_alice: consumption.quantum_phase_alice,
        quantum_phase_bob: consumption.quantum_phase_bob,
        postprocess: post,
        final_key_len,
    };
    let report = SessionJson {
        config: PointConfig {
            index: point.index,
            repetition: point.repetition,
            protocol: point.protocol.clone(),
            attack: AttackConfig { fraction: point.fraction, ..config.attack.clone() },
            postprocess: config.postprocess.clone(),
        },
        results,
        ledger,
        versions: Versions::default(),
    };
    Ok(SessionOutput { report, timings })
}

pub const CSV_COLUMNS: [&str; 16] = [
    "mode",
    "n",
    "num_blocks",
    "seed",
    "attack",
    "fraction",
    "flip_prob",
    "sifted_bits",
    "qber_true",
    "qber_estimated",
    "i_ab",
    "i_ea",
    "i_eb",
    "ck_rate",
    "final_key_len",
    "status",
];

pub fn csv_header() -> Vec<String> {
    CSV_COLUMNS.iter().map(|s| s.to_string()).chain(Stage::ALL.iter().map(|s| s.as_str().to_string())).collect()
}

pub fn csv_row(r: &SessionJson) -> Vec<String> {
    let p = &r.config.protocol;
    let res = &r.results;
    let status = res.postprocess.as_ref().map_or("skipped".to_string(), |pp| {
        serde_json::to_value(pp.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    });
    let fixed = [
        p.mode.as_str().to_string(),
        p.block_size.to_string(),
        p.num_blocks.to_string(),
        p.seed.to_string(),
        serde_json::to_value(r.config.attack.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        r.config.attack.fraction.to_string(),
        p.channel_flip_prob.to_string(),
        res.sifted_bits.to_string(),
        res.qber_true.to_string(),
        res.qber_estimated.to_string(),
        res.i_ab.to_string(),
        res.i_ea.to_string(),
        res.i_eb.to_string(),
        res.ck_rate.to_string(),
        res.final_key_len.to_string(),
        status,
    ];
    fixed.into_iter().chain(Stage::ALL.iter().map(|&s| r.ledger.stage_total(s).to_string())).collect()
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub sessions: usize,
    pub csv_path: PathBuf,
    pub json_paths: Vec<PathBuf>,
    pub outputs: Vec<SessionOutput>,
}

/// Runs every sweep point (in parallel) and writes the reports in sweep
/// order.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let points = config.points();
    let outputs: Vec<SessionOutput> =
        points.par_iter().map(|p| run_point(config, p)).collect::<Result<_, _>>()?;

    fs::create_dir_all(&config.output.dir)?;
    let csv_path = config.output.dir.join(&config.output.csv);
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&csv_path)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    writer.write_record(csv_header()).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut json_paths = Vec::new();
    for out in &outputs {
        writer.write_record(csv_row(&out.report)).map_err(|e| CliError::Runtime(e.to_string()))?;
        if config.output.json {
            let path = config.output.dir.join(format!("session_{:04}.json", out.report.config.index));
            let text = serde_json::to_string_pretty(&out.report).map_err(|e| CliError::Runtime(e.to_string()))?;
            fs::write(&path, text + "\n")?;
            json_paths.push(path);
        }
    }
    writer.flush()?;
    Ok(RunSummary { sessions: outputs.len(), csv_path, json_paths, outputs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Overrides;

    #[test]
    fn header_has_required_columns_and_every_stage() {
        let h = csv_header();
        for col in ["mode", "n", "seed", "attack", "flip_prob", "ck_rate", "final_key_len", "alice_basis", "pa_seed"] {
            assert!(h.iter().any(|c| c == col), "{col}");
        }
        assert_eq!(h.len(), CSV_COLUMNS.len() + Stage::ALL.len());
    }

    #[test]
    fn row_matches_header_and_ledger() {
        let c = ExperimentConfig::parse_str("[protocol]\nnum_blocks = 200\n", &Overrides::default()).unwrap();
        let out = run_point(&c, &c.points()[0]).unwrap();
        let row = csv_row(&out.report);
        assert_eq!(row.len(), csv_header().len());
        let i = csv_header().iter().position(|c| c == "alice_bits").unwrap();
        assert_eq!(row[i], "800");
    }

    #[test]
    fn json_has_schema_keys_in_order() {
        let c = ExperimentConfig::parse_str("[protocol]\nnum_blocks = 100\n", &Overrides::default()).unwrap();
        let out = run_point(&c, &c.points()[0]).unwrap();
        let text = serde_json::to_string(&out.report).unwrap();
        let pos: Vec<usize> = ["\"config\"", "\"results\"", "\"ledger\"", "\"versions\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }
}
