use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = match ace_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 64 } else { 0 });
        }
    };
    let threads = std::env::var("ACE_THREADS").ok();
    let result = ace_cli::configure_threads(threads.as_deref())
        .and_then(|()| ace_cli::run(&cli, &mut std::io::stdout().lock()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ace: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
