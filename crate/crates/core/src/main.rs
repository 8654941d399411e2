use std::process::ExitCode;

fn main() -> ExitCode {
    morphoscore::cli::run()
}
