use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use mbtree_cli::commands::{run, Cli};
use mbtree_cli::error::{CliError, Kind};

fn write_to(path: Option<&std::path::Path>, text: &str, stderr: bool) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::new(Kind::Io, format!("{}: {e}", p.display()))),
        None if stderr => Ok(std::io::stderr().write_all(text.as_bytes())?),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Kind::General as u8 } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(Kind::General as u8);
        }
    }
    let result = run(&cli).and_then(|out| {
        write_to(cli.out.as_deref(), &out.primary, false)?;
        if let Some(s) = &out.summary {
            write_to(cli.summary.as_deref(), s, true)?;
        }
        if out.failed {
            return Err(CliError::new(Kind::AcceptanceFailed, "acceptance criteria failed"));
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
