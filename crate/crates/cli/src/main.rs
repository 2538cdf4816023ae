//! `photonsim`: runs the polarization, entanglement and interferometer
//! experiments and writes plot-ready results.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration or validation
//! error. Configuration errors are reported before any computation starts.

mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{ConfigError, ConfigResult, Experiment, ExperimentConfig, Format, Mode, PairKind, Parameters, SourceKind};
use photonsim_core::rng::RNG_ALGORITHM;

#[derive(Parser, Debug)]
#[command(name = "photonsim", version, about = "Polarization, entanglement and interferometer experiments")]
struct Cli {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Output directory. Defaults to $PHOTONSIM_OUT_DIR, else standard output.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Polarizer cascades and the three-polarizer sweep.
    Malus(MalusArgs),
    /// Entropy before and after measuring superpositions.
    Entropy(EntropyArgs),
    /// Pair correlations and the CHSH value.
    Bell(BellArgs),
    /// Bob's statistics against Alice's basis choice.
    Nosignal(NosignalArgs),
    /// The basis-encoding transmission scheme.
    Protocol(ProtocolArgs),
    /// Mach-Zehnder fringe and delayed-choice statistics.
    Mzi(MziArgs),
}

#[derive(Args, Debug)]
struct MalusArgs {
    /// Polarizer axes in degrees, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    axes: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, value_enum)]
    source: Option<SourceKind>,
    #[arg(long, allow_hyphen_values = true)]
    source_angle: Option<f64>,
    /// Also sweep the middle polarizer of the crossed sandwich.
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    sweep_from: Option<f64>,
    #[arg(long)]
    sweep_to: Option<f64>,
    #[arg(long)]
    sweep_step: Option<f64>,
}

#[derive(Args, Debug)]
struct EntropyArgs {
    /// Values of |α|², comma separated.
    #[arg(long, value_delimiter = ',')]
    alpha_sq: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    basis: Option<f64>,
}

#[derive(Args, Debug)]
struct BellArgs {
    #[arg(long, value_enum)]
    state: Option<PairKind>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    n_chsh: Option<u64>,
    /// CHSH angles a,a',b,b' in degrees.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    chsh: Option<Vec<f64>>,
    #[arg(long)]
    delta_from: Option<f64>,
    #[arg(long)]
    delta_to: Option<f64>,
    #[arg(long)]
    delta_step: Option<f64>,
}

#[derive(Args, Debug)]
struct NosignalArgs {
    #[arg(long, value_enum)]
    state: Option<PairKind>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alice: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    bob: Option<Vec<f64>>,
    #[arg(long)]
    n: Option<u64>,
}

#[derive(Args, Debug)]
struct ProtocolArgs {
    #[arg(long)]
    n_bits: Option<u64>,
    /// fixed-basis-ml:<deg>, fixed-basis-readout:<deg>, basis-oracle or
    /// repetition:<k>:<strategy>.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    basis_for_one: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    basis_for_zero: Option<f64>,
    #[arg(long)]
    shuffles: Option<u64>,
}

#[derive(Args, Debug)]
struct MziArgs {
    #[arg(long)]
    fringe_points: Option<u64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    timing_phase: Option<f64>,
    #[arg(long)]
    p_present: Option<f64>,
    #[arg(long)]
    n_timing: Option<u64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Command {
    fn experiment(&self) -> Experiment {
        match self {
            Command::Malus(_) => Experiment::Malus,
            Command::Entropy(_) => Experiment::Entropy,
            Command::Bell(_) => Experiment::Bell,
            Command::Nosignal(_) => Experiment::Nosignal,
            Command::Protocol(_) => Experiment::Protocol,
            Command::Mzi(_) => Experiment::Mzi,
        }
    }

    /// Applies flag overrides on top of the configured parameters.
    fn apply(self, params: &mut Parameters) {
        match (self, params) {
            (Command::Malus(a), Parameters::Malus(p)) => {
                set(&mut p.axes_deg, a.axes);
                set(&mut p.mode, a.mode);
                set(&mut p.n, a.n);
                set(&mut p.source, a.source);
                set(&mut p.source_angle_deg, a.source_angle);
                if a.sweep {
                    p.sweep.enabled = true;
                }
                set(&mut p.sweep.from_deg, a.sweep_from);
                set(&mut p.sweep.to_deg, a.sweep_to);
                set(&mut p.sweep.step_deg, a.sweep_step);
            }
            (Command::Entropy(a), Parameters::Entropy(p)) => {
                set(&mut p.alpha_sq, a.alpha_sq);
                set(&mut p.basis_deg, a.basis);
            }
            (Command::Bell(a), Parameters::Bell(p)) => {
                set(&mut p.state, a.state);
                set(&mut p.n, a.n);
                set(&mut p.n_chsh, a.n_chsh);
                set(&mut p.delta.from_deg, a.delta_from);
                set(&mut p.delta.to_deg, a.delta_to);
                set(&mut p.delta.step_deg, a.delta_step);
                if let Some(c) = a.chsh {
                    // length is checked before this runs
                    p.chsh_deg.copy_from_slice(&c);
                }
            }
            (Command::Nosignal(a), Parameters::Nosignal(p)) => {
                set(&mut p.state, a.state);
                set(&mut p.alice_bases_deg, a.alice);
                set(&mut p.bob_bases_deg, a.bob);
                set(&mut p.n, a.n);
            }
            (Command::Protocol(a), Parameters::Protocol(p)) => {
                set(&mut p.n_bits, a.n_bits);
                set(&mut p.strategy, a.strategy);
                set(&mut p.basis_for_one_deg, a.basis_for_one);
                set(&mut p.basis_for_zero_deg, a.basis_for_zero);
                set(&mut p.shuffles, a.shuffles);
            }
            (Command::Mzi(a), Parameters::Mzi(p)) => {
                set(&mut p.fringe_points, a.fringe_points);
                set(&mut p.n, a.n);
                set(&mut p.timing_phase_deg, a.timing_phase);
                set(&mut p.p_present, a.p_present);
                set(&mut p.n_timing, a.n_timing);
            }
            _ => unreachable!("experiment kinds are matched before overrides"),
        }
    }
}

fn resolve(cli: Cli) -> ConfigResult<(ExperimentConfig, Option<usize>)> {
    let experiment = cli.command.experiment();
    if let Command::Bell(BellArgs { chsh: Some(c), .. }) = &cli.command {
        if c.len() != 4 {
            return Err(ConfigError(format!("--chsh takes four angles a,a',b,b', got {}", c.len())));
        }
    }
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::defaults(experiment),
    };
    if config.experiment != experiment {
        return Err(ConfigError(format!("config is for `{}` but the subcommand is `{experiment}`", config.experiment)));
    }
    set(&mut config.seed, cli.seed);
    set(&mut config.output.format, cli.format);
    if let Some(dir) = cli.out {
        config.output.path = dir.to_string_lossy().into_owned();
    }
    if cli.workers == Some(0) {
        return Err(ConfigError("--workers must be at least 1".into()));
    }
    cli.command.apply(&mut config.parameters);
    config.parameters.validate()?;
    Ok((config, cli.workers))
}

fn execute(config: &ExperimentConfig, workers: Option<usize>) -> Result<(), String> {
    let started = Instant::now();
    let job = || experiments::run(config);
    let out = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| e.to_string())?.install(job),
        None => job(),
    }
    .map_err(|e| e.to_string())?;
    match config.output.directory() {
        Some(dir) => {
            let manifest = json!({
                "tool": "photonsim",
                "version": env!("CARGO_PKG_VERSION"),
                "config": config.to_json(),
                "seed": config.seed,
                "rng_algorithm": RNG_ALGORITHM,
                "workers": workers.unwrap_or_else(rayon::current_num_threads),
                "wall_time_seconds": started.elapsed().as_secs_f64(),
                "summary": out.summary,
            });
            output::write_dir(&dir, config.output.format, &out, &manifest).map_err(|e| format!("{}: {e}", dir.display()))
        }
        None => output::write_stdout(config.output.format, &out).map_err(|e| e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (config, workers) = match resolve(cli) {
        Ok(resolved) => resolved,
        Err(e) => {
            eprintln!("photonsim: configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(&config, workers) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("photonsim: {e}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve_args(args: &[&str]) -> ConfigResult<ExperimentConfig> {
        let mut full = vec!["photonsim"];
        full.extend_from_slice(args);
        resolve(Cli::try_parse_from(full).unwrap()).map(|(c, _)| c)
    }

    #[test]
    fn flags_override_defaults() {
        let c = resolve_args(&["malus", "--axes", "90,-30,0", "--mode", "mc", "--seed", "5"]).unwrap();
        assert_eq!(c.seed, 5);
        match c.parameters {
            Parameters::Malus(p) => {
                assert_eq!(p.axes_deg, vec![90.0, -30.0, 0.0]);
                assert_eq!(p.mode, Mode::Mc);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_strategy_is_a_config_error() {
        let err = resolve_args(&["protocol", "--strategy", "mind-reading"]).unwrap_err().0;
        assert!(err.contains("fixed-basis-ml") && err.contains("basis-oracle") && err.contains("repetition"), "{err}");
    }

    #[test]
    fn chsh_needs_four_angles() {
        assert!(resolve_args(&["bell", "--chsh", "0,45,22.5"]).is_err());
        assert!(resolve_args(&["bell", "--chsh", "0,45,22.5,67.5"]).is_ok());
    }

    #[test]
    fn degrees_reach_the_core_as_radians() {
        assert_eq!(90f64.to_radians(), std::f64::consts::FRAC_PI_2);
        assert_eq!(45f64.to_radians(), std::f64::consts::FRAC_PI_4);
        assert!((22.5f64.to_radians() - std::f64::consts::FRAC_PI_8).abs() < 1e-16);
    }
}
