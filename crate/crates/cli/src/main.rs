use std::process::ExitCode;

use clap::Parser;
use conceptbench_cli::pipeline::print_reports;
use conceptbench_cli::{run, Cli, Command, ConfigError, Outcome};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Config(toml)) => {
            print!("{toml}");
            ExitCode::SUCCESS
        }
        Ok(Outcome::Stages(reports)) => {
            let _ = print_reports(&reports, std::io::stdout().lock());
            if matches!(cli.command, Command::Stats | Command::All) {
                if let Ok(table) = std::fs::read_to_string(cli.out_dir.join("stats").join("table.txt")) {
                    print!("\n{table}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
