use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ktrunc::{commands, Config, EXIT_CONFIG};

/// Truncation approximations with certified bounds for stationary
/// distributions of countable-state Markov chains.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// Worker threads for parallel solves (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze one truncation and write the report and certificate.
    Run { config: PathBuf },
    /// Construct K and check the drift inequalities only.
    Verify { config: PathBuf },
    /// Analyze every size of the truncation schedule and write a CSV table.
    Sweep { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure threads: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let (path, cmd): (_, fn(&Config, &str) -> ktrunc::Result<commands::Written>) =
        match &cli.command {
            Command::Run { config } => (config, commands::run),
            Command::Verify { config } => (config, commands::verify),
            Command::Sweep { config } => (config, commands::sweep),
        };
    let result = Config::load(path).and_then(|(cfg, text)| cmd(&cfg, &text));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
