use clap::Parser;

fn main() {
    let cli = cran_cli::Cli::parse();
    if let Err(e) = cran_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
