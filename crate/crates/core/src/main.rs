use clap::Parser;

fn main() {
    let cli = clbart::cli::Cli::parse();
    std::process::exit(clbart::cli::run(&cli));
}
