use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use csinet::model::{NetworkSpec, Tap};
use csinet::train::TrainConfig;
use csinet_cli::{
    cmd_baseline, cmd_convert, cmd_eval, cmd_export_features, cmd_train, error_line, BaselineMethod,
    UsageError,
};

#[derive(Parser)]
#[command(name = "csinet", version, about = "Joint activity recognition and localization from WiFi CSI")]
struct Cli {
    /// Seed for every random choice; overrides config files.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a raw recording directory into a CSIT container.
    Convert {
        raw_dir: PathBuf,
        /// Output container path; `manifest.csv` is written beside it.
        container: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Train the network.
    Train {
        container: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Network spec file (`block_counts=1,1,1,1` etc).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Training config file (`epochs=200` etc).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        width: Option<f64>,
    },
    /// Evaluate a checkpoint on the test split.
    Eval {
        container: PathBuf,
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Network spec; defaults to `net.spec` beside the checkpoint.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Location coordinates CSV (`location_id,x_m,y_m`).
        #[arg(long)]
        coords: Option<PathBuf>,
    },
    /// Run a comparison method (`dtw-knn` or `svm-rbf`).
    Baseline {
        container: PathBuf,
        method: String,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write intermediate activations of the test split as CSV.
    ExportFeatures {
        container: PathBuf,
        checkpoint: PathBuf,
        /// Comma-separated tap names, e.g. `input,RB4,output-activity`.
        #[arg(long, default_value = "input")]
        taps: String,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

fn parse_taps(text: &str) -> Result<Vec<Tap>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<Tap>().map_err(|e| UsageError(e.to_string()).into()))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let out = cli.out.as_path();
    match cli.command {
        Command::Convert { raw_dir, container, annotations } => {
            let n = cmd_convert(&raw_dir, &container, annotations.as_deref(), out)?;
            println!("converted {n} samples");
        }
        Command::Train { container, manifest, spec, config, epochs, width } => {
            let mut spec = spec.map(|p| NetworkSpec::load(&p)).transpose()?.unwrap_or_default();
            if let Some(w) = width {
                spec.width_multiplier = w;
            }
            let mut cfg = config.map(|p| TrainConfig::load(&p)).transpose()?.unwrap_or_default();
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let o = cmd_train(&container, manifest.as_deref(), &spec, &cfg, out)?;
            if let Some(last) = o.report.curve.records.last() {
                println!(
                    "trained {} epochs; train loss {:.4}; checkpoint {}",
                    last.epoch + 1,
                    last.train.loss.total,
                    o.checkpoint.display()
                );
            }
        }
        Command::Eval { container, checkpoint, manifest, spec, coords } => {
            let rows = cmd_eval(&container, manifest.as_deref(), &checkpoint, spec.as_deref(), coords.as_deref(), out)?;
            for r in rows {
                let acc = r.accuracy.map_or("NA".into(), |a| format!("{:.2}%", a * 100.0));
                println!("{}: accuracy {acc}", r.task);
            }
        }
        Command::Baseline { container, method, manifest, config } => {
            let method: BaselineMethod = method.parse()?;
            for (task, acc) in cmd_baseline(&container, manifest.as_deref(), method, config.as_deref(), out)? {
                println!("{method} {task}: accuracy {:.2}%", acc * 100.0);
            }
        }
        Command::ExportFeatures { container, checkpoint, taps, manifest, spec } => {
            let taps = parse_taps(&taps)?;
            for p in cmd_export_features(&container, manifest.as_deref(), &checkpoint, spec.as_deref(), &taps, out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
