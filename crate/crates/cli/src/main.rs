use clap::Parser;

fn main() {
    trl_cli::configure_threads();
    let cli = trl_cli::Cli::parse();
    if let Err(e) = trl_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
