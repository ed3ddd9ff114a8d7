use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slabguide_cli::{run, CliError, RunKind, Scenario};

#[derive(Parser)]
#[command(
    name = "slabguide",
    version,
    about = "Green's function, perturbation and estimate runs for open slab waveguides"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Guided modes of the profile.
    Modes(Common),
    /// G at the point pairs listed under [green].
    Green(Common),
    /// u = L0⁻¹ f for the Gaussian source.
    Field(Common),
    /// w⁽⁰⁾, w⁽¹⁾ and w⁽⁰⁾ + ε w⁽¹⁾ for the configured map.
    Perturb(Common),
    /// Picard iteration for the perturbed operator.
    Picard(Common),
    /// Existence constants and ε₀.
    Estimates(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario's quadrature tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn execute(kind: RunKind, c: &Common) -> Result<Vec<String>, CliError> {
    let mut sc = Scenario::load(&c.config)?;
    if let Some(t) = c.tol {
        sc.tol = t;
    }
    sc.kind = Some(kind);
    let out = slabguide::par::with_threads(c.threads, || run(kind, &sc, &c.out))?;
    let mut lines = out.summary;
    lines.extend(out.files.iter().map(|f| format!("wrote {}", f.display())));
    Ok(lines)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, common) = match &cli.command {
        Command::Modes(c) => (RunKind::Modes, c),
        Command::Green(c) => (RunKind::Green, c),
        Command::Field(c) => (RunKind::Field, c),
        Command::Perturb(c) => (RunKind::Perturb, c),
        Command::Picard(c) => (RunKind::Picard, c),
        Command::Estimates(c) => (RunKind::Estimates, c),
    };
    match execute(kind, common) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
