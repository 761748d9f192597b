use clap::Parser;

fn main() {
    let cli = i2iu::harness::Cli::parse();
    if let Err(e) = i2iu::harness::run_cli(cli) {
        eprintln!("error: {}", e);
        std::process::exit(1);
    }
}
