use clap::Parser;

fn main() {
    let cli = tsdetect_cli::Cli::parse();
    if let Err(e) = tsdetect_cli::run(&cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
