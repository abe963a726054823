use std::path::PathBuf;
use std::process::ExitCode;

use agecontrol_cli::config::{Auto, FormName, InequalityName};
use agecontrol_cli::{commands, load_config, CliError, CommandName};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "agecontrol", version, about = "Degenerate age-structured population experiments")]
struct Cli {
    /// Output directory; overrides the environment variable.
    #[arg(long, global = true, env = "AGECONTROL_OUT", default_value = "agecontrol-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Inequality {
    Carleman,
    Caccioppoli,
    Observability,
}

#[derive(Subcommand)]
enum Command {
    /// Forward solve.
    Simulate(Common),
    /// Backward adjoint solve.
    Adjoint(Common),
    /// Evaluate an inequality on seeded samples.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        inequality: Option<Inequality>,
        /// Comma-separated Carleman parameters.
        #[arg(long, value_delimiter = ',')]
        s: Option<Vec<f64>>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Observability right-hand side including the young-age strip.
        #[arg(long)]
        age_strip: bool,
    },
    /// Penalized HUM null control.
    Control {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cartesian sweep over the parameters listed in the config.
    Sweep(Common),
    /// Run the command named in the config.
    Run(Common),
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (path, name) = match &cli.command {
        Command::Simulate(c) => (&c.config, Some(CommandName::Simulate)),
        Command::Adjoint(c) => (&c.config, Some(CommandName::Adjoint)),
        Command::Certify { common, .. } => (&common.config, Some(CommandName::Certify)),
        Command::Control { common, .. } => (&common.config, Some(CommandName::Control)),
        Command::Sweep(c) => (&c.config, Some(CommandName::Sweep)),
        Command::Run(c) => (&c.config, None),
    };
    let mut cfg = load_config(path)?;
    match cli.command {
        Command::Certify { inequality, s, samples, seed, delta, age_strip, .. } => {
            let b = &mut cfg.certify;
            if let Some(i) = inequality {
                b.inequality = match i {
                    Inequality::Carleman => InequalityName::Carleman,
                    Inequality::Caccioppoli => InequalityName::Caccioppoli,
                    Inequality::Observability => InequalityName::Observability,
                };
            }
            if let Some(s) = s {
                b.s = Auto::Value(s);
            }
            if let Some(n) = samples {
                b.samples = n;
            }
            if let Some(d) = delta {
                b.delta = d;
            }
            if age_strip {
                b.form = FormName::AgeStrip;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
        }
        Command::Control { delta, epsilon, seed, .. } => {
            if let Some(d) = delta {
                cfg.control.delta = d;
            }
            if let Some(e) = epsilon {
                cfg.control.epsilon = e;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
        }
        _ => {}
    }
    let command = name
        .or(cfg.command)
        .ok_or_else(|| CliError::config("config names no command; set `command = ...` or use a subcommand"))?;
    cfg.command = Some(command);
    commands::execute(command, &mut cfg, &cli.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = e.record();
            eprintln!("{record}");
            if out.is_dir() {
                let _ = std::fs::write(out.join("error.json"), format!("{record}\n"));
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
