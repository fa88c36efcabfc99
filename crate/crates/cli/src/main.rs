use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use revchain_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = cli.into_config().and_then(|cfg| run(&cfg));
    match outcome {
        Ok(o) => {
            // a closed pipe (e.g. `| head`) is not an error; the files are already written
            let mut out = std::io::stdout().lock();
            let _ = write!(out, "{}", o.text);
            for f in &o.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            let _ = out.flush();
            let failed = o.failed_names();
            if !failed.is_empty() {
                eprintln!("failed checks: {}", failed.join(", "));
            }
            ExitCode::from(o.exit_code())
        }
        Err(e) => {
            eprintln!("revchain: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
