use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fracext::experiment::{exit, exit_code, run, write_report, ExperimentConfig};
use fracext::{Error, Exec};

/// Run a fractional diffusion experiment described by a JSON config.
#[derive(Debug, Parser)]
#[command(name = "fracext", version)]
struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,

    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads. With 1, everything runs serially and outputs are
    /// byte-identical across runs.
    #[arg(long)]
    threads: Option<usize>,

    /// Seed recorded in the summary; solver paths are deterministic and do
    /// not use it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match execute(&args) {
        Ok(pass) => {
            if pass {
                exit::SUCCESS
            } else {
                exit::ACCEPTANCE_FAILURE
            }
        }
        Err(e) => {
            eprintln!("fracext: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}

fn execute(args: &Args) -> Result<bool, Error> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let exec = match args.threads {
        Some(0) => return Err(Error::Config("--threads must be at least 1".into())),
        Some(1) => Exec::Serial,
        #[cfg(feature = "parallel")]
        Some(k) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global()
                .map_err(|e| Error::Config(e.to_string()))?;
            Exec::Parallel
        }
        // built without rayon: everything runs on the calling thread
        #[cfg(not(feature = "parallel"))]
        Some(_) => Exec::Serial,
        None => Exec::default(),
    };
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    let mut report = run(&cfg, exec)?;
    if let Some(params) = report.summary.params.as_object_mut() {
        params.insert("seed".into(), args.seed.into());
    }
    for path in write_report(&report, &out)? {
        println!("{}", path.display());
    }
    let s = &report.summary;
    match s.slope {
        Some(slope) => println!("slope {slope:.6} pass {}", s.pass),
        None => println!("pass {}", s.pass),
    }
    Ok(s.pass)
}
