use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use dtloc::raytrace::{dump_paths, generate_paths};
use dtloc::sweep::{census, run_sweep_on, write_outputs, Baseline, ExperimentConfig};
use dtloc::Vec3;

/// Monte Carlo sweeps of the single-base-station localizer.
#[derive(Debug, Parser)]
#[command(name = "dtloc-bench", version)]
struct Cli {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Transmit powers in dBm, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    powers: Option<Vec<f64>>,
    /// Inlier thresholds, comma separated.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    runs: Option<usize>,
    /// Subset of ransac,all_paths,perfect_inlier.
    #[arg(long, value_delimiter = ',')]
    baselines: Option<Vec<String>>,
    /// Noise-free measurements.
    #[arg(long)]
    zero_noise: bool,
    /// Write the path dump of the configured scene to stdout and exit.
    #[arg(long)]
    dump_paths: bool,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(p) = &cli.powers {
        cfg.tx_power_sweep = p.clone();
    }
    if let Some(t) = &cli.thresholds {
        cfg.thresholds = t.clone();
    }
    if let Some(r) = cli.runs {
        cfg.runs = r;
    }
    if let Some(b) = &cli.baselines {
        cfg.baselines = b
            .iter()
            .map(|s| Baseline::parse(s.trim()))
            .collect::<dtloc::Result<_>>()?;
    }
    cfg.zero_noise |= cli.zero_noise;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = build_config(cli)?;
    let scene = cfg.load_scene()?;
    let ue = Vec3::from(cfg.ue_position);
    let paths = generate_paths(&ue, &scene, cfg.max_bounces)?;

    if cli.dump_paths {
        print!("{}", dump_paths(&paths));
        return Ok(());
    }

    let (los, sb, mb) = census(&paths);
    eprintln!("paths: {los} LOS, {sb} single-bounce, {mb} multi-bounce");
    if (los, sb, mb) != (1, 3, 3) {
        eprintln!("warning: scene does not produce the 1 + 3 + 3 reference census");
    }
    eprintln!(
        "{} powers x {} runs, thresholds {:?}",
        cfg.tx_power_sweep.len(),
        cfg.runs,
        cfg.thresholds
    );
    let result = run_sweep_on(&cfg, &scene)?;
    for path in write_outputs(&result, &cli.out)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
