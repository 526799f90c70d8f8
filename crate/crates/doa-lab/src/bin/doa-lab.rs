//! Thin command-line front end over the library's batch commands.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use doa_lab::cli::{
    cmd_clt_check, cmd_kappa, cmd_mp_hist, cmd_mse_sweep, cmd_spikes,
    cmd_unconditional_compare, CliOverrides, CommandReport, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "doa-lab",
    version,
    about = "Large-array direction-of-arrival estimation experiments"
)]
struct Args {
    /// TOML configuration file; built-in presets are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV (and optional SVG) files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Trials override for Monte Carlo commands.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Worker threads; DOA_LAB_THREADS, then machine parallelism, when unset.
    /// Results never depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Also render an SVG chart next to each CSV.
    #[arg(long, global = true)]
    svg: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Histogram the bulk sample eigenvalues against their limit density.
    MpHist,
    /// Sweep SNR and record empirical vs predicted angle MSE per method.
    MseSweep {
        /// Restrict the sweep to these methods (repeatable).
        #[arg(long = "method")]
        methods: Vec<String>,
    },
    /// Tabulate the limiting localization profiles near a close source pair.
    Kappa,
    /// Compare scaled angle-error residuals to their Gaussian limit.
    CltCheck {
        /// Restrict the check to these methods (repeatable).
        #[arg(long = "method")]
        methods: Vec<String>,
    },
    /// Race the weighted-sum estimator against its contour-integral form.
    UnconditionalCompare,
    /// Print spike landing sites, subspace weights, and separation margins.
    Spikes,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::MpHist => "mp-hist",
            Command::MseSweep { .. } => "mse-sweep",
            Command::Kappa => "kappa",
            Command::CltCheck { .. } => "clt-check",
            Command::UnconditionalCompare => "unconditional-compare",
            Command::Spikes => "spikes",
        }
    }
}

fn configure_threads(flag: Option<usize>) {
    let from_env = std::env::var("DOA_LAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = flag.or(from_env) {
        // A second build_global in the same process is harmless; the pool is
        // already running and results do not depend on its width.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    configure_threads(args.threads);

    let mut config = match &args.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        },
        None => RunConfig::default(),
    };
    match &args.command {
        Command::MseSweep { methods } if !methods.is_empty() => {
            config.sweep.get_or_insert_with(Default::default).methods = Some(methods.clone());
        }
        Command::CltCheck { methods } if !methods.is_empty() => {
            config.clt.get_or_insert_with(Default::default).methods = Some(methods.clone());
        }
        _ => {}
    }
    let overrides = CliOverrides {
        out: args.out.clone(),
        seed: args.seed,
        trials: args.trials,
        svg: args.svg,
    };

    let result: Result<CommandReport, _> = match &args.command {
        Command::MpHist => cmd_mp_hist(&config, &overrides),
        Command::MseSweep { .. } => cmd_mse_sweep(&config, &overrides),
        Command::Kappa => cmd_kappa(&config, &overrides),
        Command::CltCheck { .. } => cmd_clt_check(&config, &overrides),
        Command::UnconditionalCompare => cmd_unconditional_compare(&config, &overrides),
        Command::Spikes => cmd_spikes(&config, &overrides),
    };
    match result {
        Ok(report) => {
            for note in &report.notes {
                println!("{note}");
            }
            for file in &report.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("failed: {}: {e}", args.command.name());
            ExitCode::FAILURE
        }
    }
}
