use clap::Parser;

fn main() {
    let cli = slopeforage::cli::Cli::parse();
    if let Err(e) = slopeforage::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
