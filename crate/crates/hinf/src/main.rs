use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hinf::artifacts::{self, DATASET};
use hinf::config::{self, ExperimentConfig, MissileConfig};
use hinf::experiments;
use hinf::{data, Result};
use hinf_core::DMatrix;

/// Damped-Newton policy iteration for H∞ control: reference experiments
/// and data tools.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration or a manifest from an earlier run. Built-in
    /// defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the learner seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the Newton step size α ∈ (0, 1].
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Output directory [default: out/<command>].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn on the two-state nonlinear benchmark, then replay under a
    /// decaying disturbance.
    ExampleA,
    /// Missile interception with guidance re-learned every cycle.
    Missile,
    /// Compare off-policy weights with the Riccati solution of a linear game.
    Oracle,
    /// Record a data set under uniform behavior inputs.
    Collect,
    /// Run off-policy iteration on a stored data set.
    Solve {
        /// Data set written by `collect`.
        #[arg(long)]
        data: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::ExampleA => "example-a",
            Command::Missile => "missile",
            Command::Oracle => "oracle",
            Command::Collect => "collect",
            Command::Solve { .. } => "solve",
        }
    }
}

/// How a finished run ended.
enum Outcome {
    Done,
    NotConverged,
}

fn experiment_config(cli: &Cli, default: ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => default,
    };
    if let Some(seed) = cli.seed {
        cfg.learner.seed = seed;
    }
    if let Some(alpha) = cli.alpha {
        cfg.learner.alpha = alpha;
    }
    Ok(cfg)
}

fn missile_config(cli: &Cli) -> Result<MissileConfig> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => MissileConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.learner.seed = seed;
    }
    if let Some(alpha) = cli.alpha {
        cfg.learner.alpha = alpha;
    }
    Ok(cfg)
}

fn converged(flag: bool) -> Outcome {
    if flag {
        Outcome::Done
    } else {
        Outcome::NotConverged
    }
}

fn print_matrix(name: &str, m: &DMatrix<f64>) {
    println!("{name}:");
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>16.9}")).collect();
        println!("  {}", cells.join(" "));
    }
}

fn run(cli: &Cli, dir: &Path) -> Result<Outcome> {
    match &cli.command {
        Command::ExampleA => {
            let cfg = experiment_config(cli, ExperimentConfig::example_a())?;
            let out = experiments::example_a(&cfg)?;
            artifacts::write_example_a(dir, &cfg, &out)?;
            let rep = &out.report;
            println!("converged: {} after {} iterations", rep.converged, rep.iterations());
            println!("critic weights: {:?}", rep.weights.critic.as_slice());
            if let Some(a) = out.replay.final_attenuation() {
                println!("final attenuation level: {a:.4}");
            }
            Ok(converged(rep.converged))
        }
        Command::Missile => {
            let cfg = missile_config(cli)?;
            let res = experiments::missile(&cfg)?;
            artifacts::write_missile(dir, &cfg, &res)?;
            let bad = res.cycles.iter().filter(|c| !c.converged).count();
            println!("miss distance: {:.4} m at t = {:.4} s", res.miss_distance, res.intercept_time);
            println!(
                "cycles: {}, max iterations per cycle: {}, unconverged: {bad}",
                res.cycles.len(),
                res.max_iterations()
            );
            Ok(converged(bad == 0))
        }
        Command::Oracle => {
            let cfg = experiment_config(cli, ExperimentConfig::linear_oracle())?;
            let out = experiments::oracle(&cfg)?;
            artifacts::write_oracle(dir, &cfg, &out)?;
            print_matrix("P", &out.gare.p);
            print_matrix("K (u = -Kx)", &out.gare.control_gain);
            print_matrix("L (w = Lx)", &out.gare.disturbance_gain);
            println!("{:<12} {:>3} {:>6} {:>16} {:>16} {:>10}", "block", "ch", "term", "oracle", "learned", "error");
            for d in &out.deltas {
                println!(
                    "{:<12} {:>3} {:>6} {:>16.9} {:>16.9} {:>10.2e}",
                    d.block,
                    d.channel + 1,
                    experiments::term_label(&d.term),
                    d.oracle,
                    d.learned,
                    d.error()
                );
            }
            println!("converged: {} after {} iterations", out.report.converged, out.report.iterations());
            Ok(converged(out.report.converged))
        }
        Command::Collect => {
            let cfg = experiment_config(cli, ExperimentConfig::example_a())?;
            let set = experiments::collect_data(&cfg)?;
            artifacts::write_collect(dir, &cfg, &set)?;
            println!("{} windows written to {}", set.len(), dir.join(DATASET).display());
            Ok(Outcome::Done)
        }
        Command::Solve { data: path } => {
            let cfg = experiment_config(cli, ExperimentConfig::example_a())?;
            let set = data::read(path)?;
            set.check(&cfg.spec()?)?;
            let rep = experiments::solve(&cfg, &set)?;
            artifacts::write_solve(dir, &cfg, path, &set, &rep)?;
            println!("converged: {} after {} iterations", rep.converged, rep.iterations());
            println!("critic weights: {:?}", rep.weights.critic.as_slice());
            Ok(converged(rep.converged))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    if cli.seed.is_some_and(|s| s > i64::MAX as u64) {
        eprintln!("error: --seed must fit in a signed 64-bit integer");
        return ExitCode::from(1);
    }
    let dir = cli
        .out_dir
        .clone()
        .unwrap_or_else(|| Path::new("out").join(cli.command.name()));
    match run(&cli, &dir) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: iteration did not converge; artifacts are in {}", dir.display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}

