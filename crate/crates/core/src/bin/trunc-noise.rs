fn main() -> std::process::ExitCode {
    trunc_noise::cli::main_with_args(std::env::args_os())
}
