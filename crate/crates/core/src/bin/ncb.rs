use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use neurocontrol::harness::{compare, export, format_compare_table, run_episode, ExperimentConfig, SchemeKind};
use neurocontrol::nn::gradcheck;
use neurocontrol::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

/// Neural-network control benchmark.
#[derive(Parser)]
#[command(name = "ncb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its metrics.
    Run {
        config: PathBuf,
        /// Write <PREFIX>.csv and <PREFIX>.meta.json.
        #[arg(long, value_name = "PREFIX")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the same plant and schedule under several schemes.
    Compare {
        config: PathBuf,
        /// Comma-separated scheme names.
        #[arg(long, value_delimiter = ',', required = true)]
        schemes: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check both backward passes against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List the available schemes.
    ListSchemes,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Diverged { .. } | Error::EmulatorNotReady { .. } => EXIT_RUNTIME,
        _ => EXIT_CONFIG,
    }
}

fn run(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> Result<u8, Error> {
    let cfg = ExperimentConfig::load(&config)?;
    let seed = cfg.effective_seed(seed)?;
    let outcome = run_episode(&cfg, seed)?;
    let r = &outcome.report;
    println!("scheme: {}", cfg.scheme);
    println!("seed: {seed}");
    println!("ticks: {}", outcome.log.len());
    println!("iae: {:.10e}", r.iae);
    println!("final_window_mean_abs_e: {:.10e}", r.final_window_mean_abs_e);
    println!("max_abs_u: {:.10e}", r.max_abs_u);
    println!("diverged: {}", r.diverged);
    if let Some(why) = &r.divergence {
        println!("divergence: {why}");
    }
    if let Some(prefix) = out {
        let (csv, meta) = export(&outcome, &cfg, &prefix)?;
        println!("wrote {} and {}", csv.display(), meta.display());
    }
    Ok(if r.diverged { EXIT_RUNTIME } else { 0 })
}

fn run_compare(config: PathBuf, names: Vec<String>, seed: Option<u64>) -> Result<u8, Error> {
    let cfg = ExperimentConfig::load(&config)?;
    let seed = cfg.effective_seed(seed)?;
    let schemes = names
        .iter()
        .map(|n| SchemeKind::parse(n.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    print!("{}", format_compare_table(&compare(&cfg, &schemes, seed)));
    Ok(0)
}

fn run_gradcheck(cases: usize, seed: u64) -> Result<u8, Error> {
    let reports = gradcheck::run_suite(cases, seed)?;
    let mut failed = 0;
    for (i, r) in reports.iter().enumerate() {
        println!(
            "case {i:>3} dims {:?}: weights {:.3e} inputs {:.3e} {}",
            r.dims,
            r.max_rel_error_weights,
            r.max_rel_error_inputs,
            if r.passed() { "ok" } else { "FAIL" }
        );
        failed += usize::from(!r.passed());
    }
    println!("{} of {} cases passed", reports.len() - failed, reports.len());
    Ok(if failed == 0 { 0 } else { EXIT_RUNTIME })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run { config, out, seed } => run(config, out, seed),
        Command::Compare { config, schemes, seed } => run_compare(config, schemes, seed),
        Command::Gradcheck { cases, seed } => run_gradcheck(cases, seed),
        Command::ListSchemes => {
            for s in SchemeKind::ALL {
                println!("{:<20} {}", s.name(), s.description());
            }
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("ncb: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
