mod commands;
mod report;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::{Ctx, COMMANDS};

#[derive(Parser)]
#[command(name = "mllt", version, about = "Local limit theorem diagnostics for inhomogeneous Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis configured in the scenario.
    Run(Shared),
    /// Backward Dobrushin and ellipticity constants.
    Validate(Shared),
    /// Exact moments and the variance regime.
    Moments(Shared),
    /// Sequential Perron-Frobenius triples and untwisted decay.
    Rpf(Shared),
    /// Non-decaying frequency scan.
    Corange(Shared),
    /// Lattice, non-lattice or two-sided local limit checks.
    Llt(Shared),
    /// First-order Edgeworth residuals.
    Edgeworth(Shared),
    /// Contracting blocks of the twisted cocycle.
    Blocks(Shared),
    /// Positive matrix products.
    Matrix(Shared),
    /// Perturbed hyperbolic splitting.
    Lyapunov(Shared),
    /// Iterated random functions.
    Irf(Shared),
    /// Monte Carlo sums.
    Simulate(Shared),
}

#[derive(Args, Clone)]
struct Shared {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to the scenario's `output.dir` or `.`.
    #[arg(long, conflicts_with = "stdout")]
    out: Option<PathBuf>,
    /// Print the JSON report to standard output instead of writing files.
    #[arg(long)]
    stdout: bool,
    /// Override the scenario's Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Override the analysis tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
}

impl Command {
    fn split(&self) -> (Option<&'static str>, &Shared) {
        match self {
            Command::Run(s) => (None, s),
            Command::Validate(s) => (Some("validate"), s),
            Command::Moments(s) => (Some("moments"), s),
            Command::Rpf(s) => (Some("rpf"), s),
            Command::Corange(s) => (Some("corange"), s),
            Command::Llt(s) => (Some("llt"), s),
            Command::Edgeworth(s) => (Some("edgeworth"), s),
            Command::Blocks(s) => (Some("blocks"), s),
            Command::Matrix(s) => (Some("matrix"), s),
            Command::Lyapunov(s) => (Some("lyapunov"), s),
            Command::Irf(s) => (Some("irf"), s),
            Command::Simulate(s) => (Some("simulate"), s),
        }
    }
}

/// `Ok(true)` when every check passed.
fn execute(cli: &Cli) -> Result<bool> {
    let (single, shared) = cli.command.split();
    if let Some(t) = shared.tolerance {
        if !(t > 0.0 && t.is_finite()) {
            anyhow::bail!("--tolerance must be positive and finite");
        }
    }
    let scenario = scenario::load(&shared.scenario)?;
    let chain = scenario.chain.build().context("building chain")?;
    let out = shared.out.clone().or_else(|| scenario.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let csv = scenario.output.csv;
    let ctx = Ctx { seed: shared.seed.unwrap_or(scenario.seed), scenario, chain, tolerance: shared.tolerance };
    let names: Vec<&str> = match single {
        Some(c) => vec![c],
        None => COMMANDS.iter().copied().filter(|c| ctx.configured(c)).collect(),
    };
    if names.is_empty() {
        anyhow::bail!("scenario configures no analysis");
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(shared.threads.unwrap_or(0)).build()?;
    let mut pass = true;
    for name in names {
        let report = pool.install(|| commands::dispatch(&ctx, name)).with_context(|| format!("{name} failed"))?;
        if shared.stdout {
            println!("{}", report::to_json(&report)?);
        } else {
            report.write(&out, csv)?;
        }
        for c in report.checks.iter().filter(|c| !c.pass) {
            eprintln!("{name}: check failed: {} (measured {:e}, tolerance {:e})", c.name, c.measured, c.tolerance);
        }
        pass &= report.pass;
    }
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
