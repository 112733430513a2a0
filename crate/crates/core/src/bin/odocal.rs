use std::process::ExitCode;

fn main() -> ExitCode {
    odocal::cli::run()
}
