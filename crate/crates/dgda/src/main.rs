use std::process::ExitCode;

fn main() -> ExitCode {
    dgda::cli::main_entry()
}
