use clap::Parser;

use gazeatt::cli::{init_threads, run, Cli};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    init_threads()?;
    run(cli)?;
    Ok(())
}
