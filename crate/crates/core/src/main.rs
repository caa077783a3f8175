use std::process::ExitCode;

fn main() -> ExitCode {
    pgnn::cli::run(std::env::args_os())
}
