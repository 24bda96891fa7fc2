use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pie_cli::config::{AnalysisConfig, Overrides};
use pie_cli::{compare, render, run, CliError};
use pie_core::survival_data::{read_coords_csv, read_risk_csv, reconstruct_ipd, DigitizedCurve};

#[derive(Parser)]
#[command(
    name = "pie",
    version,
    about = "Predictive individual effect analyses for survival trials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Fit both arms, sample the joint gain and write a run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw the three SVG panels for an existing run directory.
    Render { dir: PathBuf },
    /// Tabulate the summaries of several run directories.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Rebuild individual records from a digitized curve and risk table.
    Reconstruct {
        #[arg(long)]
        coords: PathBuf,
        #[arg(long)]
        risk: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        total_events: Option<u64>,
        #[arg(long, default_value = "arm")]
        label: String,
    },
}

fn execute(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Run {
            config,
            seed,
            draws,
            out,
        } => {
            let overrides = Overrides {
                seed,
                n_draws: draws,
                output_dir: out,
            };
            let cfg = AnalysisConfig::load(&config, &overrides)?;
            let manifest = run::run_analysis(&cfg)?;
            Ok(format!("wrote {} files\n", manifest.outputs.len()))
        }
        Command::Render { dir } => {
            let paths = render::render_panels(&dir)?;
            Ok(paths.iter().map(|p| format!("{}\n", p.display())).collect())
        }
        Command::Compare { dirs, format } => {
            let table = compare::compare_runs(&dirs)?;
            Ok(match format {
                Format::Text => table.to_text(),
                Format::Csv => table.to_csv(),
            })
        }
        Command::Reconstruct {
            coords,
            risk,
            out,
            total_events,
            label,
        } => {
            for p in [&coords, &risk] {
                if !p.exists() {
                    return Err(CliError::MissingInput { path: p.clone() });
                }
            }
            let curve = DigitizedCurve {
                coords: read_coords_csv(&coords).map_err(|e| CliError::core(&label, e))?,
                risk_table: read_risk_csv(&risk).map_err(|e| CliError::core(&label, e))?,
                total_events,
            };
            let ds = reconstruct_ipd(&curve, &label).map_err(|e| CliError::core(&label, e))?;
            run::write_ipd(&out, ds.records())?;
            Ok(format!("{} records, {} events\n", ds.len(), ds.n_events()))
        }
    }
}

fn threads() -> Result<usize, CliError> {
    match std::env::var("PIE_THREADS") {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "PIE_THREADS must be a non-negative integer, got {v:?}"
            ))
        }),
        Err(_) => Ok(0),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = threads().and_then(|n| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
        pool.install(|| execute(cli.command))
    });
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
