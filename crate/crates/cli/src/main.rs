use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use demo_gauge_cli::commands::{self, Overrides};

#[derive(Parser)]
#[command(name = "demo-gauge", version, about = "Demonstration quality, consistency and success analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    manifest: PathBuf,
    /// Clustering seed, overriding the manifest.
    #[arg(long)]
    seed: Option<u64>,
    /// Resampling period in seconds, overriding the manifest.
    #[arg(long)]
    dt: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            dt: self.dt,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Per-demonstration quality metrics.
    Metrics(Common),
    /// Range features and consistent / inconsistent clustering.
    Cluster(Common),
    /// Success scores per set and per consistency group.
    Evaluate(Common),
    /// Correlation matrix and stepwise regression models.
    Regress(Common),
    /// All of the above plus a reproducibility record.
    Report(Common),
    /// Generate a synthetic dataset with known consistency regimes.
    Synth {
        /// Generator settings (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DEMO_GAUGE_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let out = cli.out.as_path();
    let result = match &cli.command {
        Command::Metrics(c) => commands::cmd_metrics(&c.manifest, out, &c.overrides()),
        Command::Cluster(c) => commands::cmd_cluster(&c.manifest, out, &c.overrides()),
        Command::Evaluate(c) => commands::cmd_evaluate(&c.manifest, out, &c.overrides()),
        Command::Regress(c) => commands::cmd_regress(&c.manifest, out, &c.overrides()),
        Command::Report(c) => commands::cmd_report(&c.manifest, out, &c.overrides()),
        Command::Synth { config, seed } => commands::cmd_synth(config.as_deref(), out, *seed),
    };
    match result {
        Ok(status) => {
            if status == demo_gauge_cli::Status::Partial {
                eprintln!("warning: finished with partial failures; see the reports in {}", out.display());
            }
            ExitCode::from(status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
