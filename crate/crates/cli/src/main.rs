use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dao_cli::calibrate::cmd_calibrate;
use dao_cli::eval::{cmd_eval, render_table, EvalTask, Metric};
use dao_cli::run::{cmd_run, RunTask};

/// Debate-driven event extraction.
#[derive(Parser)]
#[command(name = "dao", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute initial risk thresholds from the calib split and store them in the config.
    Calibrate {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Debate every sentence of a corpus and write a run directory.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "ee")]
        task: RunTask,
    },
    /// Score predictions against gold annotations.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum)]
        task: EvalTask,
        #[arg(long, value_enum, default_value = "exact")]
        metric: Metric,
        /// Also write the JSON report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Calibrate { config, corpus } => {
            for r in cmd_calibrate(&config, &corpus)? {
                match r.n {
                    Some(n) => println!("{}: n={n} delta={} q0={}", r.task, r.delta, r.threshold),
                    None => println!("{}: override q0={} (calibration skipped)", r.task, r.threshold),
                }
            }
        }
        Command::Run { config, input, out, task } => {
            let s = cmd_run(&config, &input, &out, task)?;
            eprintln!(
                "{} sentences, {} events, {} warnings; outputs in {}",
                s.sentences,
                s.events,
                s.warnings,
                out.display()
            );
        }
        Command::Eval { pred, gold, task, metric, report } => {
            let outcome = cmd_eval(&pred, &gold, task, metric, report.as_deref())?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", serde_json::to_string(&outcome.reports)?);
            print!("{}", render_table(&outcome.reports));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
