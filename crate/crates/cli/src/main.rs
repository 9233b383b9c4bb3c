use std::process::ExitCode;

use clap::Parser;
use memchart_cli::commands::{export_instances, list_instances, run};
use memchart_cli::config::{resolve, CommandKind, InstancesCommand};
use memchart_cli::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate(args) => resolve(CommandKind::Evaluate, args).and_then(|c| run(&c)),
        Command::Arl(args) => resolve(CommandKind::Arl, args).and_then(|c| run(&c)),
        Command::Optimize(args) => resolve(CommandKind::Optimize, args).and_then(|c| run(&c)),
        Command::Bench(args) => resolve(CommandKind::Bench, args).and_then(|c| run(&c)),
        Command::Instances(InstancesCommand::List(args)) => list_instances(&args),
        Command::Instances(InstancesCommand::Export(args)) => export_instances(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
