use std::process::ExitCode;

fn main() -> ExitCode {
    poolforge::cli::main()
}
