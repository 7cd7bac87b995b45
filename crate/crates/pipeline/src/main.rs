fn main() -> std::process::ExitCode {
    qgdebias::cli::main_with_args(std::env::args_os())
}
