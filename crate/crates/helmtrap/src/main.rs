use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use helmtrap::cli::config::{ExperimentConfig, ExperimentKind, IdentitiesConfig};
use helmtrap::cli::manifest::emit_plot_manifest;
use helmtrap::cli::runner::run;
use helmtrap::cli::CliError;

/// 2-D Helmholtz exterior scattering lab.
#[derive(Debug, Parser)]
#[command(name = "helmtrap", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment file (TOML). Without it the built-in run for the subcommand is used.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for the wavenumber loop and matrix assembly.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Seed of the randomised identity suite.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify the obstacle and report (R0, R1) and any parallel trapping.
    GeometryCheck,
    /// Print the Morawetz cutoff and threshold constants.
    Constants,
    /// Randomised checks of the multiplier identities and inequalities.
    Identities,
    /// Norms and condition numbers of the combined-field operator over k.
    Sweep,
    /// Quasimode residuals and resolvent lower bounds over k.
    Quasimode,
    /// Coercivity probe of the combined-field operator over k.
    Coercivity,
    /// Plane-wave scattering: Neumann trace norms and optional field dumps.
    Scatter,
    /// Write the plot manifest for the runs under a results directory.
    PlotManifest {
        /// Results directory; defaults to `--out` or `results`.
        dir: Option<PathBuf>,
    },
}

impl Command {
    fn kind(&self) -> Option<ExperimentKind> {
        Some(match self {
            Command::GeometryCheck => ExperimentKind::GeometryCheck,
            Command::Constants => ExperimentKind::Constants,
            Command::Identities => ExperimentKind::Identities,
            Command::Sweep => ExperimentKind::Sweep,
            Command::Quasimode => ExperimentKind::Quasimode,
            Command::Coercivity => ExperimentKind::Coercivity,
            Command::Scatter => ExperimentKind::Scatter,
            Command::PlotManifest { .. } => return None,
        })
    }
}

fn execute(cli: Cli) -> Result<Vec<String>, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let Some(kind) = cli.command.kind() else {
        let Command::PlotManifest { dir } = cli.command else { unreachable!() };
        let dir = dir.or(cli.out).unwrap_or_else(|| PathBuf::from("results"));
        let (path, m) = emit_plot_manifest(&dir)?;
        return Ok(vec![format!(
            "wrote {} with {} entries ({} skipped)",
            path.display(),
            m.entries.len(),
            m.skipped.len()
        )]);
    };
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default_for(kind),
    };
    if cfg.kind != kind {
        return Err(CliError::Config(format!(
            "config declares kind = \"{}\" but the subcommand is {}",
            cfg.kind.name(),
            kind.name()
        )));
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = cli.seed {
        if kind != ExperimentKind::Identities {
            return Err(CliError::Config("--seed only applies to the identities subcommand".into()));
        }
        cfg.identities.get_or_insert_with(IdentitiesConfig::default).seed = seed;
    }
    let outcome = run(&cfg)?;
    let mut lines = outcome.report;
    lines.extend(outcome.files.iter().map(|f| format!("wrote {}", f.display())));
    Ok(lines)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
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
