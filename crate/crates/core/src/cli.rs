//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::config::{AlnnConfig, FastPath, YInit, MANIFEST_PREFIX};
use crate::dual_rail::{encode_all, DualRailValue};
use crate::error::Error;
use crate::feedforward::{closed_form_output, compile_feedforward, compute_p, forward};
use crate::learner::{
    compile_learning_with_catalyst, learn_step_full, learn_step_simulated, resolve_fast,
    slow_equilibrium,
};
use crate::ode::Trajectory;
use crate::pipeline::{
    initial_output, initial_weights, lms_oracle, samples_from_config, train, y_init_rng,
    TrainingTrace,
};
use crate::verify::verify;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "crn-neuron", version, about = "Adaptive linear neuron built from chemical reactions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file, or directory for `compile` and `train --seeds`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the reaction dumps `feedforward.crn` and `learning.crn`.
    Compile,
    /// Integrate one forward pass or learn step and export its trajectory.
    Simulate {
        #[arg(long, value_enum, default_value_t = NetworkKind::Ff)]
        network: NetworkKind,
        #[arg(long)]
        yinit: Option<YInit>,
        #[arg(long)]
        fast_path: Option<FastPath>,
    },
    /// Run the training loop and export the trace.
    Train {
        /// Run the plain LMS oracle and report its deviation from the chemical run.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        max_epochs: Option<usize>,
        /// Independent runs over `a..b` or `a..=b`.
        #[arg(long)]
        seeds: Option<SeedRange>,
        #[arg(long)]
        yinit: Option<YInit>,
        #[arg(long)]
        fast_path: Option<FastPath>,
    },
    /// Run the invariant checks and print a table.
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NetworkKind {
    Ff,
    Learn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRange {
    pub start: u64,
    /// Exclusive.
    pub end: u64,
}

impl FromStr for SeedRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |v: &str| v.trim().parse::<u64>().map_err(|e| format!("bad seed `{v}`: {e}"));
        let (start, end) = if let Some((a, b)) = s.split_once("..=") {
            (parse(a)?, parse(b)?.checked_add(1).ok_or("seed range overflows")?)
        } else if let Some((a, b)) = s.split_once("..") {
            (parse(a)?, parse(b)?)
        } else {
            return Err(format!("expected `a..b` or `a..=b`, got `{s}`"));
        };
        if start >= end {
            return Err(format!("empty seed range `{s}`"));
        }
        Ok(SeedRange { start, end })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verify(_) => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) | CliError::Io { .. } => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Configuration snapshot written next to every output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: AlnnConfig,
    pub command: String,
    pub tool_version: String,
    /// `(name, path)` of each file the run wrote.
    pub artifacts: Vec<(String, PathBuf)>,
}

impl RunManifest {
    pub fn new(config: &AlnnConfig, command: &str) -> Self {
        RunManifest {
            config: config.clone(),
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            artifacts: Vec::new(),
        }
    }

    pub fn to_kv(&self) -> String {
        let mut out = self.config.to_kv();
        let _ = writeln!(out, "{MANIFEST_PREFIX}command = {}", self.command);
        let _ = writeln!(out, "{MANIFEST_PREFIX}tool_version = {}", self.tool_version);
        for (name, path) in &self.artifacts {
            let _ = writeln!(out, "{MANIFEST_PREFIX}artifact.{name} = {}", path.display());
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut manifest = RunManifest::new(&AlnnConfig::parse(text)?, "");
        manifest.tool_version.clear();
        for line in text.lines() {
            let Some((key, value)) = line.split_once('=') else {
                continue;
            };
            let Some(key) = key.trim().strip_prefix(MANIFEST_PREFIX) else {
                continue;
            };
            let value = value.trim();
            match key {
                "command" => manifest.command = value.to_string(),
                "tool_version" => manifest.tool_version = value.to_string(),
                k => match k.strip_prefix("artifact.") {
                    Some(name) => manifest.artifacts.push((name.to_string(), value.into())),
                    None => return Err(Error::config(&format!("{MANIFEST_PREFIX}{k}"), "unknown key")),
                },
            }
        }
        Ok(manifest)
    }
}

/// Formats with 9 significant digits.
pub fn sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..9).contains(&exp) {
        return format!("{v:.8e}");
    }
    let s = format!("{:.*}", (8 - exp).max(0) as usize, v);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn manifest_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest");
    out.with_file_name(name)
}

fn load_config(cli: &Cli) -> CliResult<AlnnConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            AlnnConfig::parse(&text)?
        }
        None => AlnnConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Compile => cmd_compile(cli, &cfg),
        Command::Simulate {
            network,
            yinit,
            fast_path,
        } => {
            cfg.y_init = yinit.unwrap_or(cfg.y_init);
            cfg.fast_path = fast_path.unwrap_or(cfg.fast_path);
            cmd_simulate(cli, &cfg, *network)
        }
        Command::Train {
            oracle,
            max_epochs,
            seeds,
            yinit,
            fast_path,
        } => {
            cfg.y_init = yinit.unwrap_or(cfg.y_init);
            cfg.fast_path = fast_path.unwrap_or(cfg.fast_path);
            cfg.max_epochs = max_epochs.unwrap_or(cfg.max_epochs);
            match seeds {
                Some(range) => cmd_train_seeds(cli, &cfg, *range),
                None => cmd_train(cli, &cfg, *oracle),
            }
        }
        Command::Verify => cmd_verify(cli, &cfg),
    }
}

fn cmd_compile(cli: &Cli, cfg: &AlnnConfig) -> CliResult<()> {
    cfg.validate()?;
    let ff = compile_feedforward(cfg.n, cfg.k, cfg.k_inf)?;
    let learn = compile_learning_with_catalyst(cfg.n, cfg.eta, cfg.k_l_inf, cfg.k1, cfg.beta0)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut manifest = RunManifest::new(cfg, "compile");
    for (name, net) in [("feedforward", &ff.network), ("learning", &learn.network)] {
        let path = dir.join(format!("{name}.crn"));
        write_file(&path, &net.dump())?;
        println!("{}: {} reactions, {} species", path.display(), net.reactions().len(), net.n_species());
        manifest.artifacts.push((name.to_string(), path));
    }
    write_file(&dir.join("manifest.kv"), &manifest.to_kv())
}

fn write_trajectory(
    cli: &Cli,
    cfg: &AlnnConfig,
    names: Vec<&str>,
    traj: &Trajectory,
    command: &str,
) -> CliResult<()> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("trajectory.csv"));
    write_file(&out, &traj.to_csv(&names))?;
    let mut manifest = RunManifest::new(cfg, command);
    manifest.artifacts.push(("trajectory".into(), out.clone()));
    write_file(&manifest_path_for(&out), &manifest.to_kv())?;
    println!("trajectory: {} ({} points)", out.display(), traj.len());
    Ok(())
}

fn cmd_simulate(cli: &Cli, cfg: &AlnnConfig, network: NetworkKind) -> CliResult<()> {
    cfg.validate()?;
    let samples = samples_from_config(cfg)?;
    let sample = &samples[0];
    let mut x = vec![crate::feedforward::FeedforwardNetwork::bias()];
    x.extend(encode_all(&sample.x)?);
    let w = encode_all(&initial_weights(cfg.n, cfg.seed))?;
    let p = compute_p(&x, &w)?;

    match network {
        NetworkKind::Ff => {
            let ff = compile_feedforward(cfg.n, cfg.k, cfg.k_inf)?;
            let y_init = initial_output(cfg.y_init, &mut y_init_rng(cfg.seed))?;
            let out = forward(&x, &w, &cfg.integrator, &ff, y_init)?;
            let diff = (out.y.decode() - p.decode()).abs();
            println!("y(0)          = {y_init}");
            println!("y             = {}", sig9(out.y.decode()));
            println!("p+ - p-       = {}", sig9(p.decode()));
            println!("|difference|  = {}", sig9(diff));
            println!("within 1e-4   = {}", diff <= 1e-4);
            println!("raw rails     = ({}, {})", sig9(out.raw.plus), sig9(out.raw.minus));
            println!("final time    = {}", sig9(out.trajectory.final_time()));
            write_trajectory(cli, cfg, ff.network.species_names(), &out.trajectory, "simulate ff")
        }
        NetworkKind::Learn => {
            let learn =
                compile_learning_with_catalyst(cfg.n, cfg.eta, cfg.k_l_inf, cfg.k1, cfg.beta0)?;
            let d = DualRailValue::encode(sample.d)?;
            let y = closed_form_output(p);
            let fb = resolve_fast(d, y)?;
            let closed = slow_equilibrium(&fb, &x, &w, cfg.eta)?;
            let (sim, traj) = match cfg.fast_path {
                FastPath::Closed => learn_step_simulated(&fb, &x, &w, &cfg.integrator, &learn)?,
                FastPath::Simulated => learn_step_full(d, y, &x, &w, &cfg.integrator, &learn)?,
            };
            let dev = sim.max_abs_diff(&closed);
            let weights: Vec<String> = sim.decoded_weights().into_iter().map(sig9).collect();
            println!("fast path        = {}", cfg.fast_path.as_str());
            println!("error            = {}", sig9(sim.e.decode()));
            println!("weights          = [{}]", weights.join(", "));
            println!("max |sim-closed| = {}", sig9(dev));
            println!("within 1e-3      = {}", dev <= 1e-3);
            println!("final time       = {}", sig9(traj.final_time()));
            write_trajectory(cli, cfg, learn.network.species_names(), &traj, "simulate learn")
        }
    }
}

fn weights_line(w: &[f64]) -> String {
    w.iter().map(|v| sig9(*v)).collect::<Vec<_>>().join(", ")
}

fn cmd_train(cli: &Cli, cfg: &AlnnConfig, oracle: bool) -> CliResult<()> {
    cfg.validate()?;
    let samples = samples_from_config(cfg)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("trace.csv"));
    let (trace, command) = if oracle {
        let lms = lms_oracle(&samples, cfg)?;
        let crn = train(&samples, cfg)?;
        println!("max weight deviation vs chemical run = {}", sig9(lms.max_weight_deviation(&crn)));
        println!("chemical run iterations = {}, oracle iterations = {}", crn.records.len(), lms.records.len());
        (lms, "train --oracle")
    } else {
        (train(&samples, cfg)?, "train")
    };
    print_summary(&trace);
    write_file(&out, &trace.to_csv())?;
    let mut manifest = RunManifest::new(cfg, command);
    manifest.artifacts.push(("trace".into(), out.clone()));
    write_file(&manifest_path_for(&out), &manifest.to_kv())?;
    println!("trace = {}", out.display());
    Ok(())
}

fn print_summary(trace: &TrainingTrace) {
    println!("converged   = {}", trace.converged);
    println!("epochs_used = {}", trace.epochs_used);
    println!("weights     = [{}]", weights_line(trace.final_weights()));
}

fn cmd_train_seeds(cli: &Cli, cfg: &AlnnConfig, range: SeedRange) -> CliResult<()> {
    cfg.validate()?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let runs: Vec<(u64, TrainingTrace)> = (range.start..range.end)
        .into_par_iter()
        .map(|seed| {
            let run_cfg = AlnnConfig { seed, ..cfg.clone() };
            let samples = samples_from_config(&run_cfg)?;
            Ok((seed, train(&samples, &run_cfg)?))
        })
        .collect::<Result<_, Error>>()?;
    let mut manifest = RunManifest::new(cfg, &format!("train --seeds {}..{}", range.start, range.end));
    println!("seed  converged  epochs  weights");
    for (seed, trace) in &runs {
        println!(
            "{seed:<4}  {:<9}  {:<6}  [{}]",
            trace.converged,
            trace.epochs_used,
            weights_line(trace.final_weights())
        );
        let path = dir.join(format!("trace_seed{seed}.csv"));
        write_file(&path, &trace.to_csv())?;
        manifest.artifacts.push((format!("trace_seed{seed}"), path));
    }
    let converged = runs.iter().filter(|(_, t)| t.converged).count();
    println!("converged {converged}/{}", runs.len());
    write_file(&dir.join("manifest.kv"), &manifest.to_kv())
}

fn cmd_verify(cli: &Cli, cfg: &AlnnConfig) -> CliResult<()> {
    let report = verify(cfg)?;
    let table = report.table();
    print!("{table}");
    if let Some(out) = &cli.out {
        write_file(out, &table)?;
        let mut manifest = RunManifest::new(cfg, "verify");
        manifest.artifacts.push(("report".into(), out.clone()));
        write_file(&manifest_path_for(out), &manifest.to_kv())?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::Verify(report.failures().join(", ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(4.913312345678), "4.91331235");
        assert_eq!(sig9(-1.97010000), "-1.9701");
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(123456789.4), "123456789");
        assert_eq!(sig9(1.5e-9), "1.50000000e-9");
    }

    #[test]
    fn seed_ranges() {
        assert_eq!("0..20".parse::<SeedRange>().unwrap(), SeedRange { start: 0, end: 20 });
        assert_eq!("3..=4".parse::<SeedRange>().unwrap(), SeedRange { start: 3, end: 5 });
        assert!("5..5".parse::<SeedRange>().is_err());
        assert!("five".parse::<SeedRange>().is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let mut m = RunManifest::new(&AlnnConfig { seed: 9, ..Default::default() }, "train");
        m.artifacts.push(("trace".into(), PathBuf::from("out/trace.csv")));
        assert_eq!(RunManifest::parse(&m.to_kv()).unwrap(), m);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Verify("x".into()).exit_code(), 1);
        assert_eq!(CliError::Core(Error::config("eta", "bad")).exit_code(), 2);
        let numerical = Error::StepLimit { max_steps: 1, time: 0.0 };
        assert_eq!(CliError::Core(numerical).exit_code(), 3);
    }
}
