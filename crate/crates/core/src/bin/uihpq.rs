//! `uihpq <command> [flags]`: seeded experiments with JSON or CSV reports.

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use uihpq_core::lab::{cmd_sample, run, Command, ExperimentConfig, PercolationMode};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(name = "uihpq", version, about = "Random quadrangulations with a boundary: experiments and samples")]
struct Cli {
    /// verify | local-conv | boltzmann-conv | branching-equiv | rw | percolation | scaling | prefix-law | sample
    command: String,
    /// skewness p, decimal or fraction (e.g. 0.25, 1/3)
    #[arg(long)]
    p: Option<String>,
    /// sizes n, comma-separated
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// half-perimeters σ, comma-separated
    #[arg(long, value_delimiter = ',')]
    sigma: Vec<usize>,
    /// ball radii, comma-separated
    #[arg(long, value_delimiter = ',')]
    radius: Vec<usize>,
    /// samples (walks for rw, trials for scaling, enumeration cap for prefix-law)
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// TV threshold (δ for scaling)
    #[arg(long)]
    tolerance: Option<f64>,
    /// walk length (rw) or horizon K (scaling)
    #[arg(long)]
    length: Option<f64>,
    /// percolation parameters, or a², a-grid for scaling; comma-separated
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    /// percolation modes: site, bond, face
    #[arg(long, value_delimiter = ',')]
    mode: Vec<String>,
    /// cutsets (rw), label trials (scaling) or prefix size k (prefix-law)
    #[arg(long)]
    extra: Option<usize>,
    /// output path (report, or the .pmap file for `sample`)
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// print the wall-clock time to stderr
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn real_main(cli: Cli) -> uihpq_core::Result<bool> {
    let cmd = Command::parse(&cli.command)?;
    let modes = cli.mode.iter().map(|m| PercolationMode::parse(m)).collect::<uihpq_core::Result<Vec<_>>>()?;
    let cfg = ExperimentConfig {
        seed: cli.seed,
        p: cli.p,
        n: cli.n,
        sigma: cli.sigma,
        radius: cli.radius,
        samples: cli.samples,
        tolerance: cli.tolerance,
        length: cli.length,
        grid: cli.grid,
        modes,
        extra: cli.extra,
    };
    let start = Instant::now();
    if cmd == Command::Sample {
        let (report, pmap) = cmd_sample(&cfg)?;
        match &cli.out {
            Some(path) => fs::write(path, pmap)?,
            None => print!("{pmap}"),
        }
        eprint!("{}", report.to_json());
        return Ok(report.pass);
    }
    let report = run(cmd, &cfg)?;
    let text = match cli.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    match &cli.out {
        Some(path) => fs::write(path, &text)?,
        None => print!("{text}"),
    }
    if cli.timing {
        eprintln!("{}: {:.2} s", cmd.name(), start.elapsed().as_secs_f64());
    }
    Ok(report.pass)
}
