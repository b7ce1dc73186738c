use clap::{Args, Parser, Subcommand};
use splinenet::experiment::{load_config, run_suite, Suite};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "splinenet", about = "Spline-to-network experiment suites", version)]
struct Cli {
    #[command(subcommand)]
    suite: SuiteCmd,
}

#[derive(Args)]
struct Common {
    /// Flat TOML config; defaults apply when omitted
    #[arg(long)]
    config: Option<String>,
    /// CSV output path (stdout when omitted and the config sets none)
    #[arg(long)]
    out: Option<String>,
    /// Base seed; overrides the config
    #[arg(long)]
    seed: Option<u64>,
    /// Desk-scale (small, gated) vs full-scale runs; overrides the config
    #[arg(long)]
    desk_scale: Option<bool>,
}

#[derive(Subcommand)]
enum SuiteCmd {
    /// Exact compilation check over a (k, N, d, mode) grid
    Exactness(Common),
    /// Sobolev approximation rates on the unit cube
    RateSweep(Common),
    /// Activation-order ablation on a surface regression task
    ActkSweep(Common),
    /// Width scaling of the component MSEs
    WidthSweep(Common),
}

fn run(suite: Suite, common: &Common) -> Result<bool, splinenet::Error> {
    let text = match &common.config {
        Some(path) => Some(std::fs::read_to_string(path)?),
        None => None,
    };
    let cfg = load_config(suite, text.as_deref(), common.seed, common.desk_scale)?;
    let report = run_suite(&cfg)?;
    let out = common.out.clone().or_else(|| cfg.out.clone());
    match &out {
        Some(path) => std::fs::write(path, &report.csv)?,
        None => print!("{}", report.csv),
    }
    for g in &report.gates {
        eprintln!(
            "GATE {}/{}: {} ({})",
            cfg.suite.name(),
            g.name,
            if g.pass { "PASS" } else { "FAIL" },
            g.detail
        );
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (suite, common) = match &cli.suite {
        SuiteCmd::Exactness(c) => (Suite::Exactness, c),
        SuiteCmd::RateSweep(c) => (Suite::RateSweep, c),
        SuiteCmd::ActkSweep(c) => (Suite::ActkSweep, c),
        SuiteCmd::WidthSweep(c) => (Suite::WidthSweep, c),
    };
    match run(suite, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
