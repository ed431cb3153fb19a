use clap::Parser;

fn main() {
    let cli = scenemem_cli::args::Cli::parse();
    if let Err(e) = scenemem_cli::run(&cli) {
        eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
        std::process::exit(1);
    }
}
