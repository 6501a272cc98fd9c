use clap::Parser;

fn main() {
    let cli = robex_cli::Cli::parse();
    std::process::exit(robex_cli::run(&cli));
}
