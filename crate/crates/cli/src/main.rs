fn main() -> std::process::ExitCode {
    pass_cli::main_with_args(std::env::args_os())
}
