//! `merwlab`: subcommands over `merw-core`, each producing one
//! self-describing CSV or JSON table.

pub mod args;
pub mod commands;
pub mod output;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use clap::error::ErrorKind;
use clap::Parser;
use merw_core::Error;

use args::{echo, Cli, Command, Format};
use output::Table;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERIC: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

fn execute(command: &Command) -> merw_core::Result<Table> {
    let (config, table) = match command {
        Command::Merw(a) => (echo("merw", a), commands::merw(a)?),
        Command::UrwBall(a) => (echo("urw-ball", a), commands::urw_ball(a)?),
        Command::RankOne(a) => (echo("rank-one", a), commands::rank_one(a)?),
        Command::Canopy(a) => (echo("canopy", a), commands::canopy(a)?),
        Command::Entropy(a) => (echo("entropy", a), commands::entropy(a)?),
        Command::BsExperiment(a) => (echo("bs-experiment", a), commands::bs_experiment(a)?),
        Command::Sweep(a) => (echo("sweep", a), commands::sweep_loops(a)?),
    };
    Ok(Table { config, ..table })
}

fn write_table(table: &Table, cli: &Cli) -> io::Result<()> {
    let emit = |w: &mut dyn Write| match cli.format {
        Format::Csv => table.write_csv(w),
        Format::Json => table.write_json(w),
    };
    match &cli.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            emit(&mut w)?;
            w.flush()
        }
        None => emit(&mut io::stdout().lock()),
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        EXIT_USAGE
    } else {
        EXIT_NUMERIC
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code: 0 on success, 2 on usage or validation errors, 1 on
/// numerical failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_USAGE;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_NUMERIC;
        }
    };
    let table = match pool.install(|| execute(&cli.command)) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    match write_table(&table, &cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: cannot write output: {e}");
            EXIT_USAGE
        }
    }
}
