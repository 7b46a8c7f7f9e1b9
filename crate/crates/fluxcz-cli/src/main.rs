use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fluxcz::config::{load_config, resolve};
use fluxcz::harness::{run, Stage};

/// Fluxonium–resonator–fluxonium CZ gate pipeline.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// spectrum | constants | perturb-compare | gate | optimize | sweep-tg |
    /// sweep-flux | sweep-ej | lindblad | capnet | fit-scaling
    #[arg(long)]
    stage: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Named preset, applied below the config file; repeatable.
    #[arg(long)]
    preset: Vec<String>,
    /// key.path=value, applied last; repeatable.
    #[arg(long = "override")]
    overrides: Vec<String>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let stage: Stage = match args.stage.parse() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let cfg = match &args.config {
        Some(p) => load_config(p, &args.preset, &args.overrides),
        None => resolve(None, &args.preset, &args.overrides),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(&cfg, stage, &args.out, args.workers) {
        Ok(m) => {
            eprintln!("{} done in {:.2} s → {}", m.stage, m.wall_seconds, args.out.display());
            ExitCode::SUCCESS
        }
        Err(e) if e.is_config() => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
