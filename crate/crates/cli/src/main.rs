use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = edoc_cli::app::Cli::parse();
    std::process::exit(edoc_cli::app::run(cli));
}
