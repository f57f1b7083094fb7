use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lrv::config::{self, ExperimentConfig};
use lrv::experiment::{self, BaselineMethod, Experiment};
use lrv::io;
use lrv::par::with_workers;

#[derive(Parser)]
#[command(name = "lrv", version, about = "Train Monte Carlo networks by learning their random variables")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Use a bundled preset instead of --config.
    #[arg(long)]
    preset: Option<String>,
    /// Allow the long-running `*_full` presets.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network and write parameters, loss trace and error rows.
    Train {
        #[command(flatten)]
        source: Source,
        /// Validate the configuration and print the layout only.
        #[arg(long)]
        dry_run: bool,
        /// Continue from a checkpoint file.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a classical estimator on the error grid.
    Baseline {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_parser = ["mc", "mc_anti", "qmc", "qmc_anti"])]
        method: String,
    },
    /// Evaluate saved parameters on the error grid.
    Eval {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        theta: PathBuf,
    },
    /// Histogram and moments of learned variables.
    Export {
        #[arg(long)]
        theta: PathBuf,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        /// Histogram range as `lo,hi`.
        #[arg(long, default_value = "-4,4", allow_hyphen_values = true)]
        range: String,
        /// Coordinate inside each sample block; all values if omitted.
        #[arg(long)]
        coord: Option<usize>,
    },
    /// Print a bundled preset.
    Preset {
        name: Option<String>,
        #[arg(long)]
        full_scale: bool,
    },
}

fn load(cli: &Cli, source: &Source) -> Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, &source.preset) {
        (Some(_), Some(_)) => bail!("pass either --config or --preset, not both"),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, Some(name)) => config::preset(name, source.full_scale)?,
        (None, None) => bail!("no configuration: pass --config FILE or --preset NAME"),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out.clone().or_else(|| cfg.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| Path::new("runs").join(&cfg.name))
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s.split_once(',').context("range must look like lo,hi")?;
    Ok((lo.trim().parse()?, hi.trim().parse()?))
}

fn train(cli: &Cli, source: &Source, dry_run: bool, resume: Option<&Path>) -> Result<()> {
    let cfg = load(cli, source)?;
    let exp = Experiment::new(cfg.clone())?;
    if dry_run {
        println!("config   {} ({})", cfg.name, cfg.hash());
        println!("model    {}", cfg.model.name());
        println!("proposal {:?} samples {:?} block {}", exp.spec.kind, exp.spec.samples, exp.spec.per_sample_dim);
        println!("params   {}", exp.spec.num_params());
        println!("steps    {} batch {}", cfg.train.steps, cfg.train.batch);
        return Ok(());
    }
    let out = out_dir(cli, &cfg);
    let steps = cfg.train.steps;
    let every = (steps / 20).max(1);
    let art = experiment::run_train(&cfg, &out, resume, |r| {
        if r.step % every == 0 || r.step == steps {
            eprintln!("step {:>8}  loss {:.6e}  lr {:.1e}", r.step, r.loss, r.lr);
        }
    })?;
    for row in &art.rows {
        println!("{}", row.to_line());
    }
    eprintln!("wrote {}", art.theta_path.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    with_workers(cli.workers, || match &cli.command {
        Command::Train { source, dry_run, resume } => train(&cli, source, *dry_run, resume.as_deref()),
        Command::Baseline { source, method } => {
            let cfg = load(&cli, source)?;
            let row = experiment::run_baseline(&cfg, BaselineMethod::parse(method)?, &out_dir(&cli, &cfg))?;
            println!("{}", row.to_line());
            Ok(())
        }
        Command::Eval { source, theta } => {
            let cfg = load(&cli, source)?;
            let row = experiment::run_eval(&cfg, theta, &out_dir(&cli, &cfg))?;
            println!("{}", row.to_line());
            Ok(())
        }
        Command::Export { theta, bins, range, coord } => {
            let export = experiment::export_learned(theta, *bins, parse_range(range)?, *coord)?;
            let out = cli.out.clone().unwrap_or_else(|| theta.parent().map(Path::to_path_buf).unwrap_or_default());
            io::write_text(&out.join("histogram.csv"), &export.histogram.to_csv())?;
            io::write_text(&out.join("moments.json"), &serde_json::to_string_pretty(&export.moments)?)?;
            let m = export.moments;
            println!(
                "n={} mean={:.6} variance={:.6} skewness={:.6} kurtosis={:.6}",
                m.n, m.mean, m.variance, m.skewness, m.kurtosis
            );
            Ok(())
        }
        Command::Preset { name, full_scale } => {
            match name {
                Some(n) => print!("{}", config::preset_text(n, *full_scale)?),
                None => {
                    for (n, _) in config::PRESETS {
                        println!("{n}");
                    }
                    for (n, _) in config::FULL_PRESETS {
                        println!("{n} (full scale)");
                    }
                }
            }
            Ok(())
        }
    })
}
