use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use coupled_equilibrium::cli::{apply_seed, describe_columns, execute, parse_config, Command};
use coupled_equilibrium::Error;

/// Coupled versus independent equilibrium for reactive multi-species systems.
#[derive(Parser, Debug)]
#[command(name = "coupled-eq", version)]
struct Args {
    /// TOML run configuration.
    #[arg(long, required_unless_present = "describe_columns")]
    config: Option<PathBuf>,

    /// solve | classical | enumerate | sample | compare | scan
    #[arg(long, default_value = "solve")]
    command: String,

    /// Output file; defaults to the configured path or stdout.
    #[arg(long)]
    output: Option<String>,

    /// Overrides the sampler seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Print the output column reference and exit.
    #[arg(long)]
    describe_columns: bool,
}

fn run(args: Args) -> Result<(), Error> {
    if args.describe_columns {
        print!("{}", describe_columns());
        return Ok(());
    }
    let command: Command = args.command.parse()?;
    let path = args.config.expect("clap enforces --config");
    let text = std::fs::read_to_string(&path)?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = args.seed {
        apply_seed(&mut cfg, seed);
    }
    execute(command, &cfg, args.output.as_deref())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
