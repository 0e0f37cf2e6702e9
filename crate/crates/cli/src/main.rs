use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use qns_cli::{cmd_compare, cmd_run, cmd_sweep, cmd_verify, parse_config, CliError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Run,
    Compare,
    Sweep,
    Verify,
}

/// Pseudo-spectral regularized quantum Navier-Stokes simulator.
#[derive(Debug, Parser)]
#[command(name = "qns-sim", version)]
struct Args {
    command: Command,

    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Worker threads; 1 gives byte-identical output across runs.
    #[arg(long, env = "QNS_SIM_THREADS")]
    threads: Option<usize>,

    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(args: &Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Io {
        path: args.config.clone(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(out) = &args.out {
        cfg.output.dir = Some(out.clone());
    }
    let out = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("qns-out"));
    match args.command {
        Command::Run => {
            let sim = cmd_run(&cfg, &out)?;
            println!("run: {} steps to t = {}, {} records", sim.steps, sim.final_state.time, sim.records.len());
        }
        Command::Compare => {
            let r = cmd_compare(&cfg, &out)?;
            println!("compare: |rho_p - rho_e|_2 = {:e} (relative {:e})", r.rho_l2_diff, r.rho_rel_diff);
        }
        Command::Sweep => {
            let r = cmd_sweep(&cfg, &out)?;
            println!("sweep: {} entries, max growth {:.4}", r.entries.len(), r.max_growth);
        }
        Command::Verify => {
            let r = cmd_verify(&cfg, &out)?;
            println!("verify: {} reports passed", r.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("qns-sim: {e}");
            return ExitCode::from(3);
        }
    }
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qns-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
