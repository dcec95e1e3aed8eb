use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cylscale::error::Error;
use cylscale::experiment::{compare, run, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "cylscale", version, about = "Run bound-constrained CT reconstruction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration; writes trace.csv, image.pgm and summary.json.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Solve several configurations on the same problem; writes compare.csv.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Output directory (overrides output_dir in the config).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Noise seed for the synthetic data.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Wall-clock budget per solve, in seconds.
    #[arg(long, value_name = "SECS")]
    max_time: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            max_time: self.max_time,
        }
    }
}

fn load(path: &PathBuf, ov: &Overrides) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(ov);
    cfg.solver_config().validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, common } => load(&config, &common.overrides()).and_then(|cfg| {
            let out = run(&cfg)?;
            let s = &out.summary;
            println!(
                "{}: {:?} after {} iterations, pg_ratio {:.3e}, {} CG iterations",
                s.label, s.status, s.iterations, s.pg_ratio, s.cg_total
            );
            Ok(out.exit_code())
        }),
        Command::Compare { configs, common } => {
            let ov = common.overrides();
            configs
                .iter()
                .map(|p| load(p, &ov))
                .collect::<Result<Vec<_>, _>>()
                .and_then(|cfgs| {
                    let outs = compare(&cfgs)?;
                    for o in &outs {
                        let s = &o.summary;
                        println!("{}: {:?}, pg_ratio {:.3e}, {} CG iterations", s.label, s.status, s.pg_ratio, s.cg_total);
                    }
                    Ok(if outs.iter().all(|o| o.exit_code() == 0) { 0 } else { 2 })
                })
        }
    };
    match code {
        Ok(c) => ExitCode::from(c as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
