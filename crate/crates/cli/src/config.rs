//! Experiment configuration: INI file, then command-line overrides.
//!
//! ```ini
//! [protocol]
//! block_size = 4
//! num_blocks = 100
//! mode = per_block
//! channel_flip_prob = 0.0
//! sample_fraction = 0.1
//! seed = 1
//!
//! [attack]
//! kind = intercept_resend      # none | intercept_resend | unitary_block
//! fraction = 1.0
//! granularity = per_qubit
//!
//! [sweep]
//! block_sizes = 2, 4, 8
//! flip_probs = 0.0, 0.05
//! repetitions = 5
//!
//! [postprocess]
//! enabled = true
//! safety_margin = 32
//!
//! [output]
//! dir = out
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use blockqkd::attacks::{load_unitary, AncillaPolicy, BlockAttackSpec, Granularity};
use blockqkd::postprocess::PipelineParams;
use blockqkd::protocol::{BasisMode, ProtocolConfig};
use blockqkd::quantum::{Basis, UnitarySpec};
use ini::Ini;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    None,
    InterceptResend,
    UnitaryBlock,
}

impl FromStr for AttackKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "none" => Ok(AttackKind::None),
            "intercept_resend" => Ok(AttackKind::InterceptResend),
            "unitary_block" => Ok(AttackKind::UnitaryBlock),
            other => Err(CliError::Config(format!("unknown attack `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub fraction: f64,
    pub granularity: Granularity,
    pub matrix: Option<PathBuf>,
    pub n: usize,
    pub m: usize,
    pub ancilla_basis: AncillaPolicy,
    pub delayed: bool,
    #[serde(skip)]
    pub unitary: Option<UnitarySpec>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            kind: AttackKind::None,
            fraction: 1.0,
            granularity: Granularity::PerQubit,
            matrix: None,
            n: 2,
            m: 1,
            ancilla_basis: AncillaPolicy::AnnouncedBasis,
            delayed: true,
            unitary: None,
        }
    }
}

impl AttackConfig {
    /// The attack for one sweep point.
    pub fn spec(&self, fraction: f64) -> Result<BlockAttackSpec, CliError> {
        let spec = match self.kind {
            AttackKind::None => BlockAttackSpec::none(),
            AttackKind::InterceptResend => BlockAttackSpec::intercept_resend(fraction, self.granularity),
            AttackKind::UnitaryBlock => {
                let u = self.unitary.clone().ok_or_else(|| CliError::Config("unitary_block needs `matrix`".into()))?;
                BlockAttackSpec::unitary_block(u, self.n, self.m, self.ancilla_basis, self.delayed)
                    .map_err(|e| CliError::Config(e.to_string()))?
            }
        };
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub block_sizes: Vec<usize>,
    pub flip_probs: Vec<f64>,
    pub fractions: Vec<f64>,
    pub repetitions: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PostprocessConfig {
    pub enabled: bool,
    pub params: PipelineParams,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: String,
    pub json: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub protocol: ProtocolConfig,
    pub attack: AttackConfig,
    pub sweep: SweepConfig,
    pub postprocess: PostprocessConfig,
    pub output: OutputConfig,
}

/// Values given on the command line; each replaces the matching key.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub block_size: Option<usize>,
    pub num_blocks: Option<usize>,
    pub mode: Option<String>,
    pub channel_flip_prob: Option<f64>,
    pub sample_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub attack: Option<String>,
    pub fraction: Option<f64>,
    pub granularity: Option<String>,
    pub matrix: Option<PathBuf>,
    pub block_sizes: Option<String>,
    pub flip_probs: Option<String>,
    pub fractions: Option<String>,
    pub repetitions: Option<usize>,
    pub postprocess: Option<bool>,
    pub safety_margin: Option<u64>,
    pub output: Option<PathBuf>,
}

const KEYS: &[(&str, &[&str])] = &[
    ("protocol", &["block_size", "num_blocks", "mode", "channel_flip_prob", "sample_fraction", "seed"]),
    ("attack", &["kind", "fraction", "granularity", "matrix", "n", "m", "ancilla_basis", "delayed"]),
    ("sweep", &["block_sizes", "flip_probs", "fractions", "repetitions"]),
    ("postprocess", &["enabled", "safety_margin", "cascade_passes", "cascade_block_constant", "qber_floor"]),
    ("output", &["dir", "csv", "json"]),
];

fn parse<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| CliError::Config(format!("[{section}] {key}: cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse("sweep", key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(CliError::Config(format!("[sweep] {key} is empty")));
    }
    Ok(items)
}

fn parse_basis_policy(value: &str) -> Result<AncillaPolicy, CliError> {
    match value {
        "announced" => Ok(AncillaPolicy::AnnouncedBasis),
        "z" => Ok(AncillaPolicy::Fixed(Basis::Z)),
        "x" => Ok(AncillaPolicy::Fixed(Basis::X)),
        other => Err(CliError::Config(format!("[attack] ancilla_basis: unknown `{other}`"))),
    }
}

fn core_err(e: blockqkd::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Raw key/value pairs, by section, before defaults are applied.
#[derive(Debug, Default)]
struct Raw {
    entries: Vec<(String, String, String)>,
}

impl Raw {
    fn from_ini(ini: &Ini) -> Result<Self, CliError> {
        let mut raw = Raw::default();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if props.iter().next().is_some() {
                    return Err(CliError::Config("keys must sit under a [section]".into()));
                }
                continue;
            };
            let known = KEYS
                .iter()
                .find(|(s, _)| *s == section)
                .ok_or_else(|| CliError::Config(format!("unknown section [{section}]")))?
                .1;
            for (key, value) in props.iter() {
                if !known.contains(&key) {
                    return Err(CliError::Config(format!("unknown key `{key}` in [{section}]")));
                }
                // inline comments
                let value = value.split(['#', ';']).next().unwrap_or("").trim();
                raw.entries.push((section.to_string(), key.to_string(), value.to_string()));
            }
        }
        Ok(raw)
    }

    fn set(&mut self, section: &str, key: &str, value: impl ToString) {
        self.entries.retain(|(s, k, _)| !(s == section && k == key));
        self.entries.push((section.to_string(), key.to_string(), value.to_string()));
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(s, k, _)| s == section && k == key).map(|(_, _, v)| v.as_str())
    }
}

impl ExperimentConfig {
    /// Loads `path` (if given) and applies `overrides`. Relative matrix
    /// paths resolve against the config file's directory.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let (mut raw, base) = match path {
            Some(p) => {
                let ini = Ini::load_from_file(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                (Raw::from_ini(&ini)?, p.parent().map(Path::to_path_buf))
            }
            None => (Raw::default(), None),
        };
        apply_overrides(&mut raw, overrides);
        Self::from_raw(&raw, base.as_deref())
    }

    pub fn parse_str(text: &str, overrides: &Overrides) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut raw = Raw::from_ini(&ini)?;
        apply_overrides(&mut raw, overrides);
        Self::from_raw(&raw, None)
    }

    fn from_raw(raw: &Raw, base: Option<&Path>) -> Result<Self, CliError> {
        let mut protocol = ProtocolConfig::default();
        let g = |s: &str, k: &str| raw.get(s, k);
        if let Some(v) = g("protocol", "block_size") {
            protocol.block_size = parse("protocol", "block_size", v)?;
        }
        if let Some(v) = g("protocol", "num_blocks") {
            protocol.num_blocks = parse("protocol", "num_blocks", v)?;
        }
        if let Some(v) = g("protocol", "mode") {
            protocol.mode = BasisMode::from_str(v.trim()).map_err(core_err)?;
        }
        if let Some(v) = g("protocol", "channel_flip_prob") {
            protocol.channel_flip_prob = parse("protocol", "channel_flip_prob", v)?;
        }
        if let Some(v) = g("protocol", "sample_fraction") {
            protocol.sample_fraction = parse("protocol", "sample_fraction", v)?;
        }
        if let Some(v) = g("protocol", "seed") {
            protocol.seed = parse("protocol", "seed", v)?;
        }
        protocol.validate().map_err(core_err)?;

        let mut attack = AttackConfig::default();
        if let Some(v) = g("attack", "kind") {
            attack.kind = v.trim().parse()?;
        }
        if let Some(v) = g("attack", "fraction") {
            attack.fraction = parse("attack", "fraction", v)?;
        }
        if let Some(v) = g("attack", "granularity") {
            attack.granularity = v.trim().parse().map_err(core_err)?;
        }
        if let Some(v) = g("attack", "n") {
            attack.n = parse("attack", "n", v)?;
        }
        if let Some(v) = g("attack", "m") {
            attack.m = parse("attack", "m", v)?;
        }
        if let Some(v) = g("attack", "ancilla_basis") {
            attack.ancilla_basis = parse_basis_policy(v.trim())?;
        }
        if let Some(v) = g("attack", "delayed") {
            attack.delayed = parse("attack", "delayed", v)?;
        }
        if let Some(v) = g("attack", "matrix") {
            let p = PathBuf::from(v.trim());
            attack.matrix = Some(match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            });
        }
        if attack.kind == AttackKind::UnitaryBlock {
            let path = attack.matrix.as_ref().ok_or_else(|| CliError::Config("unitary_block needs `matrix`".into()))?;
            attack.unitary = Some(load_unitary(path).map_err(core_err)?);
        }

        let sweep = SweepConfig {
            block_sizes: match g("sweep", "block_sizes") {
                Some(v) => parse_list("block_sizes", v)?,
                None => vec![protocol.block_size],
            },
            flip_probs: match g("sweep", "flip_probs") {
                Some(v) => parse_list("flip_probs", v)?,
                None => vec![protocol.channel_flip_prob],
            },
            fractions: match g("sweep", "fractions") {
                Some(v) => parse_list("fractions", v)?,
                None => vec![attack.fraction],
            },
            repetitions: match g("sweep", "repetitions") {
                Some(v) => parse("sweep", "repetitions", v)?,
                None => 1,
            },
        };
        if sweep.repetitions == 0 {
            return Err(CliError::Config("[sweep] repetitions must be at least 1".into()));
        }
        if g("sweep", "fractions").is_some() && attack.kind != AttackKind::InterceptResend {
            return Err(CliError::Config("[sweep] fractions needs kind = intercept_resend".into()));
        }

        let mut postprocess = PostprocessConfig { enabled: true, params: PipelineParams::default() };
        if let Some(v) = g("postprocess", "enabled") {
            postprocess.enabled = parse("postprocess", "enabled", v)?;
        }
        if let Some(v) = g("postprocess", "safety_margin") {
            postprocess.params.safety_margin = parse("postprocess", "safety_margin", v)?;
        }
        if let Some(v) = g("postprocess", "cascade_passes") {
            postprocess.params.cascade.passes = parse("postprocess", "cascade_passes", v)?;
        }
        if let Some(v) = g("postprocess", "cascade_block_constant") {
            postprocess.params.cascade.block_constant = parse("postprocess", "cascade_block_constant", v)?;
        }
        if let Some(v) = g("postprocess", "qber_floor") {
            postprocess.params.cascade.qber_floor = parse("postprocess", "qber_floor", v)?;
        }

        let output = OutputConfig {
            dir: PathBuf::from(g("output", "dir").unwrap_or("out").trim()),
            csv: g("output", "csv").unwrap_or("results.csv").trim().to_string(),
            json: match g("output", "json") {
                Some(v) => parse("output", "json", v)?,
                None => true,
            },
        };

        let config = ExperimentConfig { protocol, attack, sweep, postprocess, output };
        for point in config.points() {
            point.protocol.validate().map_err(core_err)?;
            config.attack.spec(point.fraction)?.validate_for(&point.protocol).map_err(core_err)?;
        }
        Ok(config)
    }

    /// Sweep points in output order: block size, then flip probability,
    /// then attack fraction, then repetition. Point `i` runs with seed
    /// `seed + i`.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &n in &self.sweep.block_sizes {
            for &flip in &self.sweep.flip_probs {
                for &fraction in &self.sweep.fractions {
                    for rep in 0..self.sweep.repetitions {
                        let index = out.len();
                        let protocol = ProtocolConfig {
                            block_size: n,
                            channel_flip_prob: flip,
                            seed: self.protocol.seed.wrapping_add(index as u64),
                            ..self.protocol.clone()
                        };
                        out.push(SweepPoint { index, repetition: rep, protocol, fraction });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub repetition: usize,
    pub protocol: ProtocolConfig,
    pub fraction: f64,
}

fn apply_overrides(raw: &mut Raw, o: &Overrides) {
    let pairs: [(&str, &str, Option<String>); 17] = [
        ("protocol", "block_size", o.block_size.map(|v| v.to_string())),
        ("protocol", "num_blocks", o.num_blocks.map(|v| v.to_string())),
        ("protocol", "mode", o.mode.clone()),
        ("protocol", "channel_flip_prob", o.channel_flip_prob.map(|v| v.to_string())),
        ("protocol", "sample_fraction", o.sample_fraction.map(|v| v.to_string())),
        ("protocol", "seed", o.seed.map(|v| v.to_string())),
        ("attack", "kind", o.attack.clone()),
        ("attack", "fraction", o.fraction.map(|v| v.to_string())),
        ("attack", "granularity", o.granularity.clone()),
        ("attack", "matrix", o.matrix.as_ref().map(|p| p.display().to_string())),
        ("sweep", "block_sizes", o.block_sizes.clone()),
        ("sweep", "flip_probs", o.flip_probs.clone()),
        ("sweep", "fractions", o.fractions.clone()),
        ("sweep", "repetitions", o.repetitions.map(|v| v.to_string())),
        ("postprocess", "enabled", o.postprocess.map(|v| v.to_string())),
        ("postprocess", "safety_margin", o.safety_margin.map(|v| v.to_string())),
        ("output", "dir", o.output.as_ref().map(|p| p.display().to_string())),
    ];
    for (section, key, value) in pairs {
        if let Some(v) = value {
            raw.set(section, key, v);
        }
    }
    // a single value on the command line replaces any sweep list
    if o.block_size.is_some() && o.block_sizes.is_none() {
        raw.entries.retain(|(s, k, _)| !(s == "sweep" && k == "block_sizes"));
    }
    if o.channel_flip_prob.is_some() && o.flip_probs.is_none() {
        raw.entries.retain(|(s, k, _)| !(s == "sweep" && k == "flip_probs"));
    }
    if o.fraction.is_some() && o.fractions.is_none() {
        raw.entries.retain(|(s, k, _)| !(s == "sweep" && k == "fractions"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_one_point() {
        let c = ExperimentConfig::parse_str("", &Overrides::default()).unwrap();
        assert_eq!(c.points().len(), 1);
        assert_eq!(c.protocol.block_size, 4);
        assert_eq!(c.postprocess.params.safety_margin, 32);
    }

    #[test]
    fn sweep_arithmetic_and_seeds() {
        let text = "[protocol]\nseed = 10\n[sweep]\nblock_sizes = 2, 4, 8, 16, 32, 64\nrepetitions = 5\n";
        let c = ExperimentConfig::parse_str(text, &Overrides::default()).unwrap();
        let points = c.points();
        assert_eq!(points.len(), 30);
        assert_eq!(points[7].protocol.seed, 17);
        assert_eq!(points[7].protocol.block_size, 4);
        assert_eq!(points[7].repetition, 2);
    }

    #[test]
    fn overrides_win() {
        let text = "[protocol]\nblock_size = 8\n[sweep]\nblock_sizes = 2, 4\n";
        let o = Overrides { block_size: Some(16), seed: Some(3), ..Overrides::default() };
        let c = ExperimentConfig::parse_str(text, &o).unwrap();
        assert_eq!(c.sweep.block_sizes, vec![16]);
        assert_eq!(c.protocol.seed, 3);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "[protocol]\nblock_size = four\n",
            "[protocol]\ncolour = red\n",
            "[extras]\na = 1\n",
            "loose = 1\n",
            "[protocol]\nmode = sideways\n",
            "[attack]\nkind = laser\n",
            "[attack]\nkind = intercept_resend\nfraction = 2\n",
            "[attack]\nkind = unitary_block\n",
            "[sweep]\nrepetitions = 0\n",
            "[sweep]\nfractions = 0.1, 0.2\n",
            "[sweep]\nblock_sizes = \n",
        ] {
            assert!(matches!(ExperimentConfig::parse_str(text, &Overrides::default()), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn missing_matrix_file_is_a_config_error() {
        let o = Overrides { attack: Some("unitary_block".into()), matrix: Some("/nonexistent/u.txt".into()), ..Overrides::default() };
        assert!(matches!(ExperimentConfig::load(None, &o), Err(CliError::Config(_))));
    }
}
