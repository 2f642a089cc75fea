use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use deceptive_mdp::harness::{
    cache_dir, csv_header, generate_layout, parse_trace, read_file, render_svg, run_batch, run_scenario,
    train_to_cache, write_trace, LayoutSpec, Scenario, SweepSpec,
};
use deceptive_mdp::{GridMap, Mdp};

/// Deceptive grid-world policies and their evaluation against a goal-recognition observer.
#[derive(Parser)]
#[command(name = "deceptive-mdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train Q-tables for every goal of the scenario's map and store them in the cache.
    Train { scenario: PathBuf },
    /// Run one scenario and print its CSV row.
    Run {
        scenario: PathBuf,
        /// Write an SVG rendering of the trajectory.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Write the trajectory and posteriors as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run every scenario of a sweep file.
    Batch {
        sweep: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Generate a map from a layout spec.
    GenMap {
        layout_spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Render a saved trace over its map.
    Render {
        map: PathBuf,
        trace: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run_id(path: &Path) -> String {
    path.file_stem().map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
}

fn execute(command: Command) -> anyhow::Result<()> {
    let cache = cache_dir();
    match command {
        Command::Train { scenario } => {
            let sc = Scenario::load(&scenario)?;
            let mdp = Mdp::new(sc.load_map()?, sc.true_goal, sc.gamma)?;
            let cfg = deceptive_mdp::SolverConfig { tolerance: sc.tolerance, ..Default::default() };
            for path in train_to_cache(&mdp, &cfg, &cache)? {
                println!("{}", path.display());
            }
        }
        Command::Run { scenario, svg, trace } => {
            let sc = Scenario::load(&scenario)?;
            let outcome = run_scenario(&sc, &run_id(&scenario), cache.is_dir().then_some(cache.as_path()))?;
            println!("{}", csv_header());
            println!("{}", outcome.row.to_line());
            if let Some(path) = trace {
                write(&path, &write_trace(&outcome.episode.obs, &outcome.snapshots, Some(sc.true_goal)))?;
            }
            if let Some(path) = svg {
                let doc = render_svg(outcome.mdp.map(), &outcome.episode.obs, &outcome.snapshots, Some(sc.true_goal));
                write(&path, &doc)?;
            }
        }
        Command::Batch { sweep, output, workers } => {
            let spec = SweepSpec::load(&sweep)?;
            let out = run_batch(&spec, workers, cache.is_dir().then_some(cache.as_path()))?;
            write(&output, &out.to_csv())?;
            if out.error_count() > 0 {
                anyhow::bail!("{} of {} scenarios failed", out.error_count(), out.rows.len());
            }
        }
        Command::GenMap { layout_spec, output } => {
            let spec = LayoutSpec::parse(&read_file(&layout_spec)?)?;
            write(&output, &generate_layout(&spec)?.to_text())?;
        }
        Command::Render { map, trace, output } => {
            let map = GridMap::parse(&read_file(&map)?)?;
            let trace = parse_trace(&read_file(&trace)?)?;
            let obs = trace.observations(&map)?;
            write(&output, &render_svg(&map, &obs, &trace.snapshots(), trace.true_goal))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
