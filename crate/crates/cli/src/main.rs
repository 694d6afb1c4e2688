use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use excitonbench_core::exec::ExecPolicy;
use excitonbench_core::workbench::{self, commands, reproduce, FigureId, Overrides, Scenario, Summary};
use excitonbench_core::{Error, Result};

#[derive(Parser)]
#[command(name = "excitonbench", version, about = "Open-system exciton transfer workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output directory (default: $EXCITONBENCH_OUT, then ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed for noise realizations and control initialisation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Ensemble size (or trajectory count for noise-audit).
    #[arg(long, global = true)]
    realizations: Option<usize>,
    /// Fixed hierarchy depth; disables the depth search.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Run on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Hierarchy solver.
    Heom { scenario: PathBuf },
    /// Noise-ensemble solver.
    Ensemble { scenario: PathBuf },
    /// Ensemble deviation from the hierarchy reference versus ensemble size.
    Converge { scenario: PathBuf },
    /// Compile noise-segment propagators into control sequences and replay them.
    Grape { scenario: PathBuf },
    /// Simulated NMR tomography round trip on random states.
    Tomo {
        #[arg(long, default_value_t = 20)]
        states: usize,
    },
    /// Empirical spectrum of the synthesised noise against its target.
    NoiseAudit { scenario: PathBuf },
    /// Transfer time over `scan.gamma_hz`.
    ScanGamma { scenario: PathBuf },
    /// Transfer time over `scan.r_angstrom`.
    ScanGeometry { scenario: PathBuf },
    /// Exact and Stirling ADM counts; with no arguments prints the default table.
    Complexity {
        #[arg(long = "levels", requires_all = ["k", "n"])]
        levels: Option<u64>,
        #[arg(long)]
        k: Option<u64>,
        #[arg(long)]
        n: Option<u64>,
    },
    /// Run a bundled figure or table recipe.
    Reproduce {
        /// fig2, fig2d, fig3, fig4 or table-complexity.
        figure: String,
    },
}

fn load(path: &Path, ov: &Overrides) -> Result<Scenario> {
    let mut s = Scenario::load(path)?;
    ov.apply(&mut s)?;
    Ok(s)
}

fn run(cli: Cli) -> Result<Summary> {
    let c = &cli.common;
    let ov = Overrides {
        seed: c.seed,
        realizations: c.realizations,
        depth: c.depth,
    };
    let policy = if c.sequential {
        ExecPolicy::Sequential
    } else {
        ExecPolicy::Parallel
    };
    let out = workbench::resolve_out_dir(c.out.as_deref());
    match &cli.command {
        Command::Heom { scenario } => commands::cmd_heom(&load(scenario, &ov)?, &out, policy),
        Command::Ensemble { scenario } => commands::cmd_ensemble(&load(scenario, &ov)?, &out, policy),
        Command::Converge { scenario } => commands::cmd_converge(&load(scenario, &ov)?, &out, policy),
        Command::Grape { scenario } => commands::cmd_grape(&load(scenario, &ov)?, &out, policy),
        Command::Tomo { states } => commands::cmd_tomo(*states, c.seed.unwrap_or(1), &out, policy),
        Command::NoiseAudit { scenario } => commands::cmd_noise_audit(&load(scenario, &ov)?, &out, policy),
        Command::ScanGamma { scenario } => commands::cmd_scan_gamma(&load(scenario, &ov)?, &out, policy),
        Command::ScanGeometry { scenario } => commands::cmd_scan_geometry(&load(scenario, &ov)?, &out, policy),
        Command::Complexity { levels, k, n } => {
            let rows = match (levels, k, n) {
                (Some(d), Some(k), Some(n)) => vec![(*d, *k, *n)],
                _ => reproduce::complexity_rows(),
            };
            commands::cmd_complexity(&rows, &out, policy)
        }
        Command::Reproduce { figure } => {
            let id: FigureId = figure.parse()?;
            let (report, dir) = reproduce::reproduce(id, &out, &ov, policy)?;
            let mut lines = report.lines.clone();
            lines.extend(
                report
                    .checks
                    .iter()
                    .map(|c| format!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail)),
            );
            Ok(Summary { out_dir: dir, lines })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            for l in &summary.lines {
                println!("{l}");
            }
            println!("wrote {}", summary.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code().clamp(1, 255) as u8
}
