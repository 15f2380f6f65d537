use std::process::ExitCode;

fn main() -> ExitCode {
    skewshadow::cli::main()
}
