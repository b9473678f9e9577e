//! `bdshift <command> --workspace ws.json [--n 2] [--m 64] [--out report.json] [expr...]`
//!
//! Results go to stdout as JSON. Exit codes: 1 usage, 2 parse, 3 math domain,
//! 4 numeric non-convergence.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use bdshift::commands::{self, Args, Command, StateArg};
use bdshift::error::CliError;
use bdshift::eval::Side;
use bdshift::workspace::Workspace;

#[derive(Parser, Debug)]
#[command(name = "bdshift", version, about = "Exact arithmetic, derivations and GNS numerics for Bunce-Deddens-Toeplitz algebras")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Workspace JSON with N, chain, sequences, functions, derivations and Laurent data.
    #[arg(long)]
    workspace: Option<PathBuf>,
    /// Spectral degree.
    #[arg(long, allow_negative_numbers = true)]
    n: Option<i64>,
    /// Truncation size, window, Fejer order or grid size, depending on the command.
    #[arg(long)]
    m: Option<usize>,
    /// Also write the result here (CSV for matrix dumps, JSON otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Named derivation or Laurent function.
    #[arg(long)]
    name: Option<String>,
    /// Named function used as the Haar-space datum `psi`.
    #[arg(long)]
    psi: Option<String>,
    #[arg(long, value_enum)]
    side: Option<Side>,
    #[arg(long, value_enum)]
    state: Option<StateArg>,
    /// Element expressions; put `--` before one that starts with `-`.
    exprs: Vec<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ws = match &cli.workspace {
        Some(p) => Workspace::load(p)?,
        None => Workspace::default(),
    };
    let args = Args {
        n: cli.n,
        m: cli.m,
        name: cli.name,
        psi: cli.psi,
        side: cli.side,
        state: cli.state,
        out: cli.out,
        exprs: cli.exprs,
    };
    let output = commands::run(cli.command, &args, &ws)?;
    if let Some(path) = &args.out {
        output.write_out(path)?;
    }
    let text = serde_json::to_string_pretty(&output.json).expect("serializable");
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Usage(format!("cannot write to stdout: {e}"))),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
