mod commands;
mod manifest;

use clap::Parser;

fn main() {
    let cli = commands::Cli::parse();
    if let Ok(threads) = std::env::var("DUALVOL_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    std::process::exit(commands::run(cli));
}
