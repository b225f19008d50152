use clap::Parser;

fn main() {
    let cli = tsrate_cli::Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = tsrate_cli::run(cli) {
        eprintln!("{}", tsrate_cli::error_record(&e));
        std::process::exit(tsrate_cli::exit_code(&e));
    }
}
