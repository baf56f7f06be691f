use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mireg::gradcheck::GradcheckPlan;
use mireg_cli::commands;

#[derive(Parser)]
#[command(
    name = "mireg",
    version,
    about = "Mutual-information regularized multi-task autoencoders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic multi-domain benchmark.
    Synth {
        /// Spec file with a [synth] section; defaults apply when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train every (objective, fraction, seed, bandwidth) point of a config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the domains of a config.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Finite-difference checks of every analytic gradient.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Instances for the entropy and MI suites.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Instances per objective kind for the backward suite.
        #[arg(long, default_value_t = 50)]
        backward_trials: usize,
    },
    /// Second-order entropy of consecutive batches of a numeric CSV.
    Entropy {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        bandwidth: f64,
        #[arg(long)]
        batch: usize,
        /// Columns to leave out, e.g. `label,domain`.
        #[arg(long, value_delimiter = ',')]
        skip: Vec<String>,
    },
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Synth { spec, out, seed } => {
            for p in commands::cmd_synth(spec.as_deref(), &out, seed)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Train { config, out } => {
            for s in commands::cmd_train(&config, &out)? {
                println!(
                    "{}: ood_recall={} ood_mi_bits={}",
                    s.dir.display(),
                    s.ood_recall.map_or("-".into(), |v| format!("{v:.4}")),
                    s.ood_mi.map_or("-".into(), |v| format!("{v:.4}")),
                );
            }
        }
        Command::Eval {
            model,
            config,
            report,
        } => {
            let rep = commands::cmd_eval(&model, &config, &report)?;
            print!("{}", rep.to_document());
            println!("runtime_secs = {:.3}", rep.runtime_secs);
        }
        Command::Gradcheck {
            seed,
            trials,
            backward_trials,
        } => {
            let plan = GradcheckPlan {
                seed,
                entropy_trials: trials,
                mi_trials: trials,
                backward_trials,
            };
            let (outcomes, ok) = commands::cmd_gradcheck(&plan)?;
            for o in &outcomes {
                println!("{o}");
            }
            if !ok {
                eprintln!("gradient check failed");
                return Ok(ExitCode::from(1));
            }
        }
        Command::Entropy {
            input,
            bandwidth,
            batch,
            skip,
        } => {
            let s = commands::cmd_entropy(&input, &skip, bandwidth, batch)?;
            for (i, h) in s.per_batch.iter().enumerate() {
                println!("batch {i} H2_bits = {h}");
            }
            println!("mean H2_bits = {}", s.mean);
            if s.leftover > 0 {
                println!(
                    "({} trailing rows outside a full batch ignored)",
                    s.leftover
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
