mod args;
mod commands;
mod io;
mod report;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use io::UsageError;

const USAGE_ERROR: u8 = 1;
const COMPUTE_ERROR: u8 = 2;

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("LUMENFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("LUMENFORGE_THREADS=`{v}` must be a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(cli: &Cli) -> anyhow::Result<report::Report> {
    let ctx = commands::Ctx::new(cli)?;
    match &cli.command {
        Command::FitSg(a) => commands::fit_sg(a),
        Command::Render(a) => commands::render(a, &ctx),
        Command::Insert(a) => commands::insert(a, &ctx),
        Command::EditMaterial(a) => commands::edit_material_cmd(a, &ctx),
        Command::EditSpecular(a) => commands::edit_specular_cmd(a, &ctx),
        Command::Tile(a) => commands::tile(a),
        Command::CompareShSg(a) => commands::compare(a),
        Command::EvalLoss(a) => commands::eval_loss(a, &ctx),
        Command::MatmapSample(a) => commands::matmap_sample(a, &ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(USAGE_ERROR),
            };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(USAGE_ERROR);
    }
    match run(&cli) {
        Ok(report) => {
            print!("{}", report.render(cli.json));
            ExitCode::SUCCESS
        }
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(USAGE_ERROR)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(COMPUTE_ERROR)
        }
    }
}
