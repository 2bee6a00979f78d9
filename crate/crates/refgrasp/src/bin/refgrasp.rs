use std::process::ExitCode;

fn main() -> ExitCode {
    refgrasp::cli::run()
}
