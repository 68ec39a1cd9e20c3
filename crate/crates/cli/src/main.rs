use clap::Parser;

fn main() {
    let cli = rppg_cli::Cli::parse();
    if let Err(e) = rppg_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(rppg_cli::exit_code(&e));
    }
}
