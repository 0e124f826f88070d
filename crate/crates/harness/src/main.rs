use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use noetherdyn::{run, ExperimentConfig, ExperimentKind};

/// Runs one experiment and writes CSV tables, SVG charts, a manifest and a
/// verdict file into `<out>/<experiment>/`.
#[derive(Debug, Parser)]
#[command(name = "noetherdyn", version)]
struct Cli {
    /// One of: table2, noether-residual, conservation, modified-eq,
    /// bn-effective-lr, steady-state, rmsprop-equiv.
    experiment: String,
    /// Flat TOML file with the experiment parameters.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Weight decay.
    #[arg(long)]
    wd: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; defaults to $NOETHERDYN_OUT, then `runs`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure(cli: &Cli) -> Result<ExperimentConfig, noetherdyn::HarnessError> {
    let kind: ExperimentKind = cli.experiment.parse()?;
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("NOETHERDYN_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    let mut config = ExperimentConfig::from_file(kind, &cli.config, out)?;
    let overrides = [
        ("eta", cli.eta),
        ("beta", cli.beta),
        ("wd", cli.wd),
        ("rho", cli.rho),
        ("dt", cli.dt),
        ("t1", cli.t1),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            config.set(key, v);
        }
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = configure(&cli).and_then(|config| run(&config).map(|report| (config, report)));
    match result {
        Ok((config, report)) => {
            for v in &report.artifacts.verdicts {
                println!("{v}");
            }
            println!("wrote {} in {:.2} s", config.run_dir().display(), report.wall_seconds);
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("noetherdyn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
