use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use ssrkit_cli::{run, Cli, EXIT_INPUT, EXIT_OK};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            return ExitCode::from(code as u8);
        }
    };
    let out = run(cli);
    for line in &out.stderr {
        eprintln!("{line}");
    }
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(out.stdout.as_bytes());
    let _ = stdout.flush();
    ExitCode::from(out.code as u8)
}
