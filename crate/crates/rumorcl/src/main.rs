use std::process::ExitCode;

fn main() -> ExitCode {
    rumorcl::cli::main()
}
