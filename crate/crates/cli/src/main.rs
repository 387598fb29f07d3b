use std::process::ExitCode;

fn main() -> ExitCode {
    sllift_cli::run(std::env::args_os())
}
