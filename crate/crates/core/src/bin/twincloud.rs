use std::io;
use std::process::ExitCode;

use twincloud::cli::{run_command, CliEnv};

fn main() -> ExitCode {
    let code = run_command(
        std::env::args_os(),
        &CliEnv::from_process(),
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    );
    ExitCode::from(code as u8)
}
