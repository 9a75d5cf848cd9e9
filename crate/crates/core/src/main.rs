use std::process::ExitCode;

fn main() -> ExitCode {
    sdvn::cli::main_with_args(std::env::args_os())
}
