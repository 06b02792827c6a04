//! Argument parsing and output for the `adrf` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{cmd_costfit, cmd_crosscheck, cmd_run, cmd_stats, CostSource, KindFit};
use crate::config::{ExperimentConfig, QuantityRange};
use crate::error::{CliError, EXIT_INVARIANT, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(
    name = "adrf",
    version,
    about = "Fair multi-resource allocation: simulate, cross-check, measure"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate runs and write traces, a cost CSV and a summary.
    Run(ExperimentArgs),
    /// Compare every machine claim with the fixed-point and exact-rational references.
    Crosscheck(ExperimentArgs),
    /// Monte-Carlo comparison of PDRF against the DRF loop.
    Stats(ExperimentArgs),
    /// Fit cost against resource count per call kind.
    Costfit(CostfitArgs),
}

#[derive(Debug, Default, Args)]
pub struct ExperimentArgs {
    /// JSON file with any of the keys below; flags win over the file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub users: Option<u32>,
    #[arg(long)]
    pub resources: Option<usize>,
    #[arg(long)]
    pub epochs: Option<u64>,
    /// Demand components are drawn uniformly from LO..=HI.
    #[arg(long, value_name = "LO:HI")]
    pub demand_range: Option<QuantityRange>,
    #[arg(long)]
    pub per_user_reserve: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Resource counts to run, comma separated.
    #[arg(long, value_name = "M1,M2,..", value_delimiter = ',')]
    pub sweep: Option<Vec<usize>>,
    /// Reserve range for `stats`.
    #[arg(long, value_name = "LO:HI")]
    pub reserve_range: Option<QuantityRange>,
    /// `stats`: build instances on which PDRF is exact.
    #[arg(long)]
    pub exact_cycles: bool,
    /// `stats`: let the DRF loop skip users whose next task does not fit.
    #[arg(long)]
    pub skip_unfit: bool,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl ExperimentArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$field = v.clone(); })*
            };
        }
        take!(
            users,
            resources,
            epochs,
            demand_range,
            per_user_reserve,
            seed,
            trials,
            sweep,
            reserve_range,
            out
        );
        cfg.exact_cycles |= self.exact_cycles;
        cfg.skip_unfit |= self.skip_unfit;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct CostfitArgs {
    /// Cost CSV written by `run`.
    #[arg(required_unless_present = "fixture", conflicts_with = "fixture")]
    pub csv: Option<PathBuf>,
    /// Fit a bundled measured cost series instead.
    #[arg(long, value_name = "NAME")]
    pub fixture: Option<String>,
    /// Also write `costfit-summary.json` here.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Runs the binary with explicit arguments and output stream. Returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn json_line(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    writeln!(out, "{text}").map_err(|e| CliError::io("writing output", e))
}

fn save(dir: &std::path::Path, file: &str, value: &impl serde::Serialize) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let path = dir.join(file);
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    std::fs::write(&path, text + "\n")
        .map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let w = |e| CliError::io("writing output", e);
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let report = cmd_run(&cfg)?;
            writeln!(
                out,
                "{} runs, {} cost records -> {}",
                report.runs.len(),
                report.cost_records,
                cfg.out.display()
            )
            .map_err(w)?;
            Ok(EXIT_OK)
        }
        Command::Crosscheck(args) => {
            let cfg = args.resolve()?;
            let report = cmd_crosscheck(&cfg)?;
            save(&cfg.out, "crosscheck-summary.json", &report)?;
            json_line(out, &report)?;
            if let Some(m) = &report.first_mismatch {
                eprintln!(
                    "mismatch: m={} trial={} epoch={} block={} user={}: machine {} vs reference {}",
                    m.resources,
                    m.trial,
                    m.claim.epoch,
                    m.claim.block,
                    m.claim.user,
                    m.claim.machine,
                    m.claim.reference
                );
            }
            Ok(if report.passed() {
                EXIT_OK
            } else {
                EXIT_INVARIANT
            })
        }
        Command::Stats(args) => {
            let cfg = args.resolve()?;
            let report = cmd_stats(&cfg)?;
            save(&cfg.out, "stats-summary.json", &report)?;
            json_line(out, &report)?;
            Ok(EXIT_OK)
        }
        Command::Costfit(args) => {
            let fits = match (&args.csv, &args.fixture) {
                (Some(path), _) => cmd_costfit(CostSource::Csv(path))?,
                (None, Some(name)) => cmd_costfit(CostSource::Fixture(name))?,
                (None, None) => unreachable!("clap requires one source"),
            };
            print_fits(out, &fits).map_err(w)?;
            if let Some(dir) = &args.out {
                let summaries: Vec<_> = fits.iter().map(KindFit::summary).collect();
                save(dir, "costfit-summary.json", &summaries)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn print_fits(out: &mut dyn Write, fits: &[KindFit]) -> std::io::Result<()> {
    for fit in fits {
        writeln!(
            out,
            "{} ({} points, {} warm-up excluded)",
            fit.kind, fit.used, fit.excluded
        )?;
        writeln!(out, "  per call:   {}", fit.per_call)?;
        writeln!(out, "  per-m mean: {}", fit.per_m_mean)?;
        for r in fit.summary().residuals {
            writeln!(
                out,
                "  m={:<4} mean={:<14.3} residual={:+.3}",
                r.m, r.mean_cost, r.residual
            )?;
        }
    }
    Ok(())
}
