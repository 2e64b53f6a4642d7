use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LQDECEIVE_LOG", "warn")).init();
    let code = lqdeceive_cli::run(std::env::args_os());
    ExitCode::from(code as u8)
}
