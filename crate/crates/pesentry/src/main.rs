use std::process::ExitCode;

fn main() -> ExitCode {
    pesentry::cli::run()
}
