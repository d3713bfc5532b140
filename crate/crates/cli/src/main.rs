use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(diglab_cli::run(std::env::args_os()))
}
