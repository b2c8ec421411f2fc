mod args;
mod commands;
mod render;

use clap::Parser;

use args::{Cli, Command};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Run(a) => commands::run(&a).map(|_| ()),
        Command::Render(a) => commands::render(&a),
        Command::Compare(a) => commands::compare(&a),
    }
}
