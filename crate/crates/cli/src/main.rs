use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ulca_core::harness::{self, presets};
use ulca_core::si::degradation_sweep;
use ulca_core::units::dbm_to_watts;
use ulca_core::Baseline;

#[derive(Parser)]
#[command(name = "ulca", version, about = "Uplink carrier-aggregation resource allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Era,
    DdpgOnly,
    Ha,
}

impl From<BaselineArg> for Baseline {
    fn from(b: BaselineArg) -> Self {
        match b {
            BaselineArg::Era => Baseline::Era,
            BaselineArg::DdpgOnly => Baseline::DdpgOnly,
            BaselineArg::Ha => Baseline::Ha,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace.
    Run {
        /// TOML overrides applied on top of the scenario.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Preset name (see `list-scenarios`); may also come from the config.
        #[arg(long)]
        scenario: Option<String>,
        /// Master seed. CA_SIM_SEED takes precedence when set.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long, value_enum)]
        baseline: Option<BaselineArg>,
        /// Also write SVG plots of sum throughput and per-UE power.
        #[arg(long)]
        plot: bool,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Tabulate receiver sensitivity degradation against SI power.
    SiSweep {
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the preset names.
    ListScenarios,
}

fn seed_from_env(cli_seed: u64) -> Result<u64> {
    match std::env::var("CA_SIM_SEED") {
        Ok(v) => v.trim().parse().with_context(|| format!("CA_SIM_SEED={v:?} is not an unsigned integer")),
        Err(std::env::VarError::NotPresent) => Ok(cli_seed),
        Err(e) => bail!("CA_SIM_SEED: {e}"),
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    config: Option<&Path>,
    scenario: Option<&str>,
    seed: u64,
    episodes: Option<usize>,
    out_dir: &Path,
    baseline: Option<BaselineArg>,
    plot: bool,
    quiet: bool,
) -> Result<()> {
    let file = match config {
        Some(p) => harness::load_config(p)?,
        None => harness::ConfigFile::default(),
    };
    let mut s = file.resolve(scenario)?;
    if let Some(n) = episodes {
        s.agent.episodes = n;
    }
    if let Some(b) = baseline {
        s.baseline = b.into();
    }
    s.validate().context("invalid scenario")?;
    let seed = seed_from_env(seed)?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let total = s.agent.episodes;
    let trace = harness::run_experiment_with_progress(&s, seed, |e, secs| {
        if !quiet && (e % 10 == 0 || e == total) {
            eprintln!("episode {e}/{total} ({secs:.2}s)");
        }
    })?;

    let stem = format!("{}-seed{seed}", s.name);
    let csv = out_dir.join(format!("{stem}.csv"));
    harness::emit_csv(&trace, &csv)?;
    if plot {
        for metric in ["sum_rate", "p_total_w"] {
            let path = out_dir.join(format!("{stem}-{metric}.svg"));
            harness::emit_plot(&[(&s.name, &trace)], metric, &path)?;
        }
    }
    let tail = (total / 10).max(1);
    println!(
        "{}: {} rows, mean sum throughput over last {tail} episodes {:.3} Mbps -> {}",
        s.name,
        trace.rows.len(),
        trace.final_sum_rate(tail) / 1e6,
        csv.display()
    );
    Ok(())
}

fn si_sweep(out: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(out).with_context(|| format!("creating {}", out.display()))?);
    writeln!(w, "p_si_dbm,degradation_db")?;
    for (p, d) in degradation_sweep(-130.0, -80.0, 0.5, dbm_to_watts(-100.0)) {
        writeln!(w, "{p:.1},{d:.8e}")?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            scenario,
            seed,
            episodes,
            out_dir,
            baseline,
            plot,
            quiet,
        } => run(
            config.as_deref(),
            scenario.as_deref(),
            seed,
            episodes,
            &out_dir,
            baseline,
            plot,
            quiet,
        ),
        Command::SiSweep { out } => si_sweep(&out),
        Command::ListScenarios => {
            for name in presets::names() {
                println!("{name}");
            }
            Ok(())
        }
    }
}
