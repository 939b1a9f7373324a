fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(gnnx_cli::run(std::env::args_os()))
}
