//! Experiment configuration: file schema, defaults and validation.
//!
//! A config file is TOML with four top-level keys, all required:
//!
//! ```toml
//! experiment = "malus"
//! seed = 42
//!
//! [output]
//! format = "json"
//! path = "-"
//!
//! [parameters]
//! # every field of the experiment's parameter table
//! ```
//!
//! A `manifest.json` written by an earlier run is accepted too; its `config`
//! object has the same shape.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use photonsim_core::protocol::ReceiverStrategy;

/// Largest number of Monte Carlo samples a single setting may request.
const MAX_SAMPLES: u64 = 1 << 34;
/// Largest number of rows a sweep may produce.
const MAX_ROWS: usize = 100_000;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type ConfigResult<T> = Result<T, ConfigError>;

fn fail<T>(msg: impl Into<String>) -> ConfigResult<T> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Malus,
    Entropy,
    Bell,
    Nosignal,
    Protocol,
    Mzi,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Experiment::Malus => "malus",
            Experiment::Entropy => "entropy",
            Experiment::Bell => "bell",
            Experiment::Nosignal => "nosignal",
            Experiment::Protocol => "protocol",
            Experiment::Mzi => "mzi",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub format: Format,
    /// Output directory; `"-"` means the default (the environment variable
    /// named by [`OUT_DIR_ENV`], else standard output).
    pub path: String,
}

/// Optional default output directory.
pub const OUT_DIR_ENV: &str = "PHOTONSIM_OUT_DIR";

impl Default for OutputSpec {
    fn default() -> Self {
        Self { format: Format::Json, path: "-".into() }
    }
}

impl OutputSpec {
    pub fn directory(&self) -> Option<PathBuf> {
        if self.path != "-" {
            return Some(PathBuf::from(&self.path));
        }
        std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analytic,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Natural,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    Singlet,
    PsiPlus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub enabled: bool,
    pub from_deg: f64,
    pub to_deg: f64,
    pub step_deg: f64,
}

impl SweepSpec {
    pub fn grid(&self) -> Vec<f64> {
        let rows = ((self.to_deg - self.from_deg) / self.step_deg + 1e-9).floor() as usize + 1;
        (0..rows).map(|i| self.from_deg + i as f64 * self.step_deg).collect()
    }

    fn validate(&self, what: &str) -> ConfigResult<()> {
        finite(what, &[self.from_deg, self.to_deg, self.step_deg])?;
        if self.step_deg <= 0.0 {
            return fail(format!("{what}: step_deg must be positive"));
        }
        if self.to_deg < self.from_deg {
            return fail(format!("{what}: to_deg must not be below from_deg"));
        }
        if (self.to_deg - self.from_deg) / self.step_deg >= MAX_ROWS as f64 {
            return fail(format!("{what}: more than {MAX_ROWS} rows"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MalusParams {
    pub axes_deg: Vec<f64>,
    pub mode: Mode,
    pub n: u64,
    pub source: SourceKind,
    pub source_angle_deg: f64,
    /// Final intensity of the crossed-polarizer sandwich against the middle
    /// polarizer's rotation.
    pub sweep: SweepSpec,
}

impl Default for MalusParams {
    fn default() -> Self {
        Self {
            axes_deg: vec![90.0, 45.0, 0.0],
            mode: Mode::Analytic,
            n: 1_000_000,
            source: SourceKind::Natural,
            source_angle_deg: 0.0,
            sweep: SweepSpec { enabled: false, from_deg: 1.0, to_deg: 89.0, step_deg: 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyParams {
    /// `|α|²` of the states `α|0°⟩ + β|90°⟩`.
    pub alpha_sq: Vec<f64>,
    pub basis_deg: f64,
}

impl Default for EntropyParams {
    fn default() -> Self {
        Self { alpha_sq: vec![0.0, 0.25, 0.5, 0.75, 1.0], basis_deg: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellParams {
    pub state: PairKind,
    /// Samples per correlation point.
    pub n: u64,
    /// Grid of `θ_b − θ_a` with `θ_a = 0`.
    pub delta: SweepSpec,
    /// `[a, a′, b, b′]`
    pub chsh_deg: [f64; 4],
    pub n_chsh: u64,
}

impl Default for BellParams {
    fn default() -> Self {
        Self {
            state: PairKind::Singlet,
            n: 100_000,
            delta: SweepSpec { enabled: true, from_deg: 0.0, to_deg: 90.0, step_deg: 7.5 },
            chsh_deg: [0.0, 45.0, 22.5, 67.5],
            n_chsh: 250_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NosignalParams {
    pub state: PairKind,
    pub alice_bases_deg: Vec<f64>,
    pub bob_bases_deg: Vec<f64>,
    pub n: u64,
}

impl Default for NosignalParams {
    fn default() -> Self {
        Self { state: PairKind::Singlet, alice_bases_deg: vec![0.0, 45.0], bob_bases_deg: vec![0.0, 22.5, 45.0, 67.5, 90.0], n: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    pub n_bits: u64,
    pub strategy: String,
    pub basis_for_one_deg: f64,
    pub basis_for_zero_deg: f64,
    pub shuffles: u64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self { n_bits: 100_000, strategy: "fixed-basis-ml:0".into(), basis_for_one_deg: 0.0, basis_for_zero_deg: 45.0, shuffles: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MziParams {
    /// Phases `k · 360° / fringe_points` for `k = 0..fringe_points`.
    pub fringe_points: u64,
    pub n: u64,
    pub timing_phase_deg: f64,
    pub p_present: f64,
    pub n_timing: u64,
}

impl Default for MziParams {
    fn default() -> Self {
        Self { fringe_points: 16, n: 100_000, timing_phase_deg: 60.0, p_present: 0.5, n_timing: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parameters {
    Malus(MalusParams),
    Entropy(EntropyParams),
    Bell(BellParams),
    Nosignal(NosignalParams),
    Protocol(ProtocolParams),
    Mzi(MziParams),
}

impl Parameters {
    pub fn defaults(experiment: Experiment) -> Self {
        match experiment {
            Experiment::Malus => Parameters::Malus(MalusParams::default()),
            Experiment::Entropy => Parameters::Entropy(EntropyParams::default()),
            Experiment::Bell => Parameters::Bell(BellParams::default()),
            Experiment::Nosignal => Parameters::Nosignal(NosignalParams::default()),
            Experiment::Protocol => Parameters::Protocol(ProtocolParams::default()),
            Experiment::Mzi => Parameters::Mzi(MziParams::default()),
        }
    }

    fn parse(experiment: Experiment, value: serde_json::Value) -> ConfigResult<Self> {
        fn typed<T: DeserializeOwned>(v: serde_json::Value) -> ConfigResult<T> {
            serde_json::from_value(v).map_err(|e| ConfigError(format!("parameters: {e}")))
        }
        Ok(match experiment {
            Experiment::Malus => Parameters::Malus(typed(value)?),
            Experiment::Entropy => Parameters::Entropy(typed(value)?),
            Experiment::Bell => Parameters::Bell(typed(value)?),
            Experiment::Nosignal => Parameters::Nosignal(typed(value)?),
            Experiment::Protocol => Parameters::Protocol(typed(value)?),
            Experiment::Mzi => Parameters::Mzi(typed(value)?),
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let v = match self {
            Parameters::Malus(p) => serde_json::to_value(p),
            Parameters::Entropy(p) => serde_json::to_value(p),
            Parameters::Bell(p) => serde_json::to_value(p),
            Parameters::Nosignal(p) => serde_json::to_value(p),
            Parameters::Protocol(p) => serde_json::to_value(p),
            Parameters::Mzi(p) => serde_json::to_value(p),
        };
        v.expect("parameter tables serialize")
    }

    pub fn validate(&self) -> ConfigResult<()> {
        match self {
            Parameters::Malus(p) => {
                if p.axes_deg.is_empty() {
                    return fail("axes_deg: at least one polarizer is required");
                }
                finite("axes_deg", &p.axes_deg)?;
                finite("source_angle_deg", &[p.source_angle_deg])?;
                samples("n", p.n)?;
                if p.sweep.enabled {
                    p.sweep.validate("sweep")?;
                }
            }
            Parameters::Entropy(p) => {
                if p.alpha_sq.is_empty() {
                    return fail("alpha_sq: at least one state is required");
                }
                if p.alpha_sq.len() > MAX_ROWS {
                    return fail(format!("alpha_sq: more than {MAX_ROWS} rows"));
                }
                if p.alpha_sq.iter().any(|a| !(0.0..=1.0).contains(a)) {
                    return fail("alpha_sq: every value must lie in [0, 1]");
                }
                finite("basis_deg", &[p.basis_deg])?;
            }
            Parameters::Bell(p) => {
                samples("n", p.n)?;
                samples("n_chsh", p.n_chsh)?;
                finite("chsh_deg", &p.chsh_deg)?;
                if p.delta.enabled {
                    p.delta.validate("delta")?;
                }
            }
            Parameters::Nosignal(p) => {
                if p.alice_bases_deg.is_empty() || p.bob_bases_deg.is_empty() {
                    return fail("alice_bases_deg and bob_bases_deg must be non-empty");
                }
                finite("alice_bases_deg", &p.alice_bases_deg)?;
                finite("bob_bases_deg", &p.bob_bases_deg)?;
                samples("n", p.n)?;
            }
            Parameters::Protocol(p) => {
                strategy(&p.strategy)?;
                samples("n_bits", p.n_bits)?;
                finite("basis degrees", &[p.basis_for_one_deg, p.basis_for_zero_deg])?;
                if p.shuffles < 1000 || p.shuffles > 1_000_000 {
                    return fail("shuffles must lie in [1000, 1000000]");
                }
            }
            Parameters::Mzi(p) => {
                if p.fringe_points == 0 || p.fringe_points as usize > MAX_ROWS {
                    return fail(format!("fringe_points must lie in [1, {MAX_ROWS}]"));
                }
                samples("n", p.n)?;
                samples("n_timing", p.n_timing)?;
                finite("timing_phase_deg", &[p.timing_phase_deg])?;
                if !(0.0..=1.0).contains(&p.p_present) {
                    return fail("p_present must lie in [0, 1]");
                }
            }
        }
        Ok(())
    }
}

/// Parses a receiver strategy; the error lists the valid forms.
pub fn strategy(text: &str) -> ConfigResult<ReceiverStrategy> {
    text.parse().map_err(|e: photonsim_core::Error| ConfigError(format!("strategy: {e}")))
}

fn finite(what: &str, values: &[f64]) -> ConfigResult<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        fail(format!("{what}: values must be finite"))
    }
}

fn samples(what: &str, n: u64) -> ConfigResult<()> {
    if n == 0 || n > MAX_SAMPLES {
        return fail(format!("{what} must lie in [1, {MAX_SAMPLES}]"));
    }
    Ok(())
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output: OutputSpec,
    pub parameters: Parameters,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Experiment,
    seed: u64,
    output: OutputSpec,
    parameters: serde_json::Value,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        Self { experiment, seed: 0, output: OutputSpec::default(), parameters: Parameters::defaults(experiment) }
    }

    /// Loads a TOML config or the `config` object of a JSON run manifest.
    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let raw: RawConfig = if text.trim_start().starts_with('{') {
            let manifest: serde_json::Value = serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            let config = manifest
                .get("config")
                .cloned()
                .ok_or_else(|| ConfigError(format!("{}: JSON input must be a run manifest with a `config` object", path.display())))?;
            serde_json::from_value(config).map_err(|e| ConfigError(format!("{}: config: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?
        };
        Ok(Self {
            experiment: raw.experiment,
            seed: raw.seed,
            output: raw.output,
            parameters: Parameters::parse(raw.experiment, raw.parameters)?,
        })
    }

    /// The config as echoed in manifests, in the file schema.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": self.experiment,
            "seed": self.seed,
            "output": self.output,
            "parameters": self.parameters.to_json(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        std::io::Write::write_all(&mut f, text.as_bytes()).unwrap();
        f
    }

    const MALUS: &str = r#"
experiment = "malus"
seed = 7

[output]
format = "csv"
path = "-"

[parameters]
axes_deg = [90, 0]
mode = "mc"
n = 1000
source = "natural"
source_angle_deg = 0
sweep = { enabled = false, from_deg = 1, to_deg = 89, step_deg = 1 }
"#;

    #[test]
    fn full_toml_loads() {
        let f = write(MALUS);
        let c = ExperimentConfig::load(f.path()).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.output.format, Format::Csv);
        match c.parameters {
            Parameters::Malus(p) => {
                assert_eq!(p.axes_deg, vec![90.0, 0.0]);
                assert_eq!(p.mode, Mode::Mc);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let f = write(&MALUS.replace("n = 1000", "n = 1000\nlasers = 3"));
        let err = ExperimentConfig::load(f.path()).unwrap_err().0;
        assert!(err.contains("lasers"), "{err}");
        let f = write(&format!("colour = \"red\"\n{MALUS}"));
        assert!(ExperimentConfig::load(f.path()).unwrap_err().0.contains("colour"));
    }

    #[test]
    fn missing_key_is_rejected() {
        let f = write(&MALUS.replace("n = 1000\n", ""));
        let err = ExperimentConfig::load(f.path()).unwrap_err().0;
        assert!(err.contains("`n`"), "{err}");
        let f = write(&MALUS.replace("seed = 7\n", ""));
        assert!(ExperimentConfig::load(f.path()).unwrap_err().0.contains("seed"));
    }

    #[test]
    fn json_round_trip_through_manifest_shape() {
        let c = ExperimentConfig::defaults(Experiment::Bell);
        let manifest = serde_json::json!({ "tool": "photonsim", "config": c.to_json() });
        let f = write(&serde_json::to_string_pretty(&manifest).unwrap());
        assert_eq!(ExperimentConfig::load(f.path()).unwrap(), c);
    }

    #[test]
    fn every_default_validates() {
        for e in Experiment::value_variants() {
            Parameters::defaults(*e).validate().unwrap();
        }
    }

    #[test]
    fn sweep_grid_includes_endpoints() {
        let s = SweepSpec { enabled: true, from_deg: 1.0, to_deg: 89.0, step_deg: 1.0 };
        let g = s.grid();
        assert_eq!(g.len(), 89);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[88], 89.0);
        let s = SweepSpec { enabled: true, from_deg: 0.0, to_deg: 90.0, step_deg: 7.5 };
        assert_eq!(s.grid().len(), 13);
    }

    #[test]
    fn invalid_values_are_caught() {
        let p = MziParams { p_present: 1.5, ..Default::default() };
        assert!(Parameters::Mzi(p).validate().is_err());
        let p = ProtocolParams { strategy: "telepathy".into(), ..Default::default() };
        let err = Parameters::Protocol(p).validate().unwrap_err().0;
        assert!(err.contains("basis-oracle"), "{err}");
        let p = MalusParams { n: 0, ..Default::default() };
        assert!(Parameters::Malus(p).validate().is_err());
    }
}
