fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("off")).init();
    std::process::exit(steklov::cli::run(std::env::args_os()));
}
