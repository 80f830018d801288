use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use atomic_mimo_harness::{run, write_outputs, RawConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "atomic-mimo", version, about = "Channel estimation and faulty-antenna detection studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads, 0 for all cores (overrides `workers`).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Uplink symbols per trial (overrides `samples`).
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, workers, seed, trials, samples } => {
            let result = (|| {
                let mut raw = RawConfig::load(&config)?;
                raw.out = out.or(raw.out);
                raw.workers = workers.or(raw.workers);
                raw.seed = seed.or(raw.seed);
                raw.trials = trials.or(raw.trials);
                raw.samples = samples.or(raw.samples);
                let cfg = raw.resolve()?;
                eprintln!(
                    "{}: {} {} values x {} trials, seed {}",
                    cfg.experiment.id(),
                    cfg.sweep.len(),
                    cfg.experiment.sweep_name(),
                    cfg.trials,
                    cfg.seed
                );
                let start = Instant::now();
                let output = run(&cfg)?;
                let (rows, summary) = write_outputs(&cfg, &output, &cfg.out)?;
                for c in &output.hybrid {
                    println!(
                        "trial {}: alpha {} beta {} faults {:?} ser {}",
                        c.trial,
                        c.alpha,
                        c.beta,
                        c.fault_indices,
                        c.ser.map_or("n/a".to_string(), |s| format!("{s:.3e}"))
                    );
                }
                eprintln!("done in {:.1}s", start.elapsed().as_secs_f64());
                println!("{}", rows.display());
                println!("{}", summary.display());
                Ok::<_, atomic_mimo_harness::HarnessError>(())
            })();
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
