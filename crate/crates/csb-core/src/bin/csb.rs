//! Command-line front end: simulate decay curves, process them into fidelity
//! reports, and print report summaries.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use csb_core::config::{curves_from_json, curves_to_json, ExperimentConfig};
use csb_core::error::{CsbError, Result};
use csb_core::pipeline::{run_processing, run_simulation};
use csb_core::plot;
use csb_core::report::FidelityReport;

#[derive(Parser)]
#[command(
    name = "csb",
    version,
    about = "Channel spectrum benchmarking: simulate noisy gates, fit decay spectra, estimate fidelity intervals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate shot-sampled decay curves for a configured noisy gate.
    Simulate {
        /// Experiment config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Record exact probabilities instead of shot averages.
        #[arg(long)]
        exact: bool,
    },
    /// Fit a curve file and write the fidelity report plus plot data.
    Process {
        /// Curve file JSON (from `simulate` or external data).
        #[arg(long)]
        curves: PathBuf,
        /// Experiment config JSON; the sidecar written by `simulate` works
        /// directly and carries the oracle fidelity.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Also run the unfiltered 4-term matrix pencil baseline.
        #[arg(long)]
        baseline: bool,
        /// Render static SVG versions of the plot data.
        #[arg(long)]
        svg: bool,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a human-readable summary of a report file.
    Report {
        /// Report JSON written by `process`.
        report: PathBuf,
    },
}

fn load_config(path: &Path, seed: Option<u64>, exact: bool) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CsbError::Config(format!("cannot read config '{}': {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if exact {
        cfg.exact = true;
    }
    Ok(cfg)
}

fn cmd_simulate(config: &Path, out: &Path, seed: Option<u64>, exact: bool) -> Result<()> {
    let cfg = load_config(config, seed, exact)?;
    let sim = run_simulation(&cfg)?;
    std::fs::create_dir_all(out)?;
    let curves_path = out.join("curves.json");
    let sidecar_path = out.join("simulation.json");
    std::fs::write(&curves_path, curves_to_json(&sim.curves)?)?;
    std::fs::write(&sidecar_path, sim.config_echo.to_json()?)?;
    println!(
        "wrote {} curves ({} points each) to {}",
        sim.curves.len(),
        sim.curves.first().map_or(0, |c| c.len()),
        curves_path.display()
    );
    if let Some(oracle) = sim.config_echo.oracle_fidelity {
        println!("oracle fidelity = {oracle:.6}");
    }
    println!("config echo written to {}", sidecar_path.display());
    Ok(())
}

fn cmd_process(
    curves: &Path,
    config: &Path,
    out: &Path,
    baseline: bool,
    svg: bool,
    seed: Option<u64>,
) -> Result<()> {
    let cfg = load_config(config, seed, false)?;
    let text = std::fs::read_to_string(curves)
        .map_err(|e| CsbError::Schema(format!("cannot read curves '{}': {e}", curves.display())))?;
    let loaded = curves_from_json(&text)?;
    let result = run_processing(&loaded, &cfg, baseline)?;

    std::fs::create_dir_all(out)?;
    let report_path = out.join("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&result.report)?)?;
    plot::write_text(
        &out.join("curves_fit.csv"),
        &plot::curves_csv(&loaded, &result.fits, result.baseline_fits.as_deref()),
    )?;
    plot::write_text(
        &out.join("eigenvalues_polar.csv"),
        &plot::eigenvalues_csv(&result.report),
    )?;
    plot::write_text(
        &out.join("bootstrap_histogram.csv"),
        &plot::histogram_csv(&result.fei.samples, 40),
    )?;
    if svg {
        plot::write_text(&out.join("curves.svg"), &plot::curves_svg(&loaded, &result.fits))?;
        plot::write_text(
            &out.join("eigenvalues.svg"),
            &plot::eigenvalues_svg(&result.report),
        )?;
        plot::write_text(
            &out.join("histogram.svg"),
            &plot::histogram_svg(&result.fei.samples, 40),
        )?;
    }
    println!("report written to {}", report_path.display());
    println!(
        "FEI = [{:.6}, {:.6}], midpoint = {:.6}",
        result.report.fei_low, result.report.fei_high, result.report.midpoint
    );
    Ok(())
}

fn cmd_report(report: &Path) -> Result<()> {
    let text = std::fs::read_to_string(report)
        .map_err(|e| CsbError::Schema(format!("cannot read report '{}': {e}", report.display())))?;
    let report: FidelityReport = serde_json::from_str(&text)
        .map_err(|e| CsbError::Schema(format!("cannot parse report: {e}")))?;
    print!("{}", report.summary());
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate { config, out, seed, exact } => {
            cmd_simulate(config, out, *seed, *exact)
        }
        Command::Process { curves, config, out, baseline, svg, seed } => {
            cmd_process(curves, config, out, *baseline, *svg, *seed)
        }
        Command::Report { report } => cmd_report(report),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
