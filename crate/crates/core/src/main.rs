use clap::Parser;

fn main() {
    let cli = qnl_chain::cli::Cli::parse();
    std::process::exit(qnl_chain::cli::main_with(cli));
}
