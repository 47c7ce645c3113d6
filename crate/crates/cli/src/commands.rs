//! Implementations behind the `iterator` subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use iterator_core::catalog::{generate_catalog, load_catalog, save_catalog, DesignId};
use iterator_core::imaging::{color_descriptor, extract_palette, shape_descriptor};
use iterator_core::session::{replay, Transcript};
use iterator_core::simbench::{run_experiment, write_csv, CalibratedTask, Concept, ExperimentConfig};
use iterator_core::{DesignSpace, ImageSize, Strategy};
use serde::Serialize;

use crate::service::{serve, AppState, CatalogHandle};

#[derive(Debug, Parser)]
#[command(name = "iterator", version, about = "Interactive design exploration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Catalog generation.
    #[command(subcommand)]
    Catalog(CatalogCommand),
    /// Per-design measurements.
    #[command(subcommand)]
    Imaging(ImagingCommand),
    /// Simulated-user experiments.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum CatalogCommand {
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = iterator_core::catalog::DEFAULT_CATALOG_SIZE)]
    pub size: usize,
    /// Square image side in pixels.
    #[arg(long, default_value_t = iterator_core::catalog::DEFAULT_IMAGE_SIDE)]
    pub px: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ImagingCommand {
    Describe(DescribeArgs),
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    #[arg(long)]
    pub design: u32,
    #[arg(long)]
    pub catalog: PathBuf,
    /// Also extract a k-color palette.
    #[arg(long)]
    pub palette: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    Run(BenchArgs),
    /// Print calibrated thresholds and prevalences for each task.
    Calibrate(CalibrateArgs),
    /// Re-run a session transcript and check it reproduces.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub task: Concept,
    /// One strategy name, or several separated by commas.
    #[arg(long, value_delimiter = ',', default_value = "everything")]
    pub strategy: Vec<Strategy>,
    #[arg(long, default_value_t = iterator_core::simbench::DEFAULT_ROUNDS)]
    pub rounds: usize,
    #[arg(long, default_value_t = iterator_core::simbench::DEFAULT_RUNS)]
    pub runs: usize,
    #[arg(long, default_value_t = iterator_core::simbench::DEFAULT_HOLDOUT)]
    pub holdout: usize,
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub catalog: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub transcript: PathBuf,
    #[arg(long)]
    pub catalog: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub catalog: Vec<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Write each ended session's transcript here.
    #[arg(long)]
    pub transcripts: Option<PathBuf>,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Catalog(CatalogCommand::Gen(a)) => catalog_gen(&a),
        Command::Imaging(ImagingCommand::Describe(a)) => {
            let out = describe(&a)?;
            println!("{}", serde_json::to_string(&out)?);
            Ok(())
        }
        Command::Bench(BenchCommand::Run(a)) => bench_run(&a),
        Command::Bench(BenchCommand::Calibrate(a)) => calibrate(&a.catalog),
        Command::Bench(BenchCommand::Replay(a)) => replay_transcript(&a),
        Command::Serve(a) => serve_command(&a),
    }
}

pub fn catalog_gen(a: &GenArgs) -> anyhow::Result<()> {
    let catalog = generate_catalog(a.size, ImageSize::square(a.px), a.seed)?;
    save_catalog(&catalog, &a.out)?;
    log::info!("wrote {} designs to {}", catalog.len(), a.out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct PaletteColor {
    pub rgb: [f64; 3],
    pub weight: f64,
}

#[derive(Debug, Serialize)]
pub struct Description {
    pub id: u32,
    pub shape: Vec<f64>,
    pub color: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub palette: Option<Vec<PaletteColor>>,
}

pub fn describe(a: &DescribeArgs) -> anyhow::Result<Description> {
    let catalog = load_catalog(&a.catalog)?;
    let design = catalog.design(DesignId(a.design))?;
    let palette = match a.palette {
        Some(k) => Some(
            extract_palette(&design.image, &design.mask, k, u64::from(a.design))?
                .entries
                .into_iter()
                .map(|e| PaletteColor {
                    rgb: e.rgb,
                    weight: e.weight,
                })
                .collect(),
        ),
        None => None,
    };
    Ok(Description {
        id: a.design,
        shape: shape_descriptor(&design.mask)?.vector,
        color: color_descriptor(&design.image, &design.mask)?.vector,
        palette,
    })
}

fn load_space(dir: &Path) -> anyhow::Result<DesignSpace> {
    let catalog = load_catalog(dir).with_context(|| format!("loading catalog {}", dir.display()))?;
    Ok(DesignSpace::build(catalog)?)
}

pub fn bench_run(a: &BenchArgs) -> anyhow::Result<()> {
    let space = load_space(&a.catalog)?;
    let task = CalibratedTask::new(space.catalog(), a.task)?;
    let mut tables = Vec::with_capacity(a.strategy.len());
    for &strategy in &a.strategy {
        let config = ExperimentConfig {
            strategy,
            rounds: a.rounds,
            runs: a.runs,
            holdout: a.holdout,
            base_seed: a.seed,
        };
        let table = run_experiment(&space, &task, &config)?;
        for f in &table.failures {
            log::error!("{strategy} run {} failed: {}", f.run_index, f.message);
        }
        tables.push(table);
    }
    let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut out = BufWriter::new(file);
    write_csv(&tables, &mut out)?;
    out.flush()?;
    if let Some(t) = tables.iter().find(|t| t.is_partial()) {
        bail!(
            "{} of {} runs failed for {}; table written but partial",
            t.failures.len(),
            a.runs,
            t.strategy
        );
    }
    Ok(())
}

pub fn calibrate(dir: &Path) -> anyhow::Result<()> {
    let catalog = load_catalog(dir)?;
    println!("task,direction,theta_hard,theta_soft,always_rate,expected_prevalence");
    for concept in Concept::ALL {
        let t = CalibratedTask::new(&catalog, concept)?;
        println!(
            "{},{:?},{:.6},{:.6},{:.4},{:.4}",
            concept,
            t.task.direction,
            t.task.theta_hard,
            t.task.theta_soft,
            t.task.always_rate(&t.scores),
            t.task.expected_prevalence(&t.scores)
        );
    }
    Ok(())
}

pub fn replay_transcript(a: &ReplayArgs) -> anyhow::Result<()> {
    let json = std::fs::read_to_string(&a.transcript).with_context(|| format!("reading {}", a.transcript.display()))?;
    let transcript = Transcript::from_json(&json)?;
    let space = load_space(&a.catalog)?;
    let session = replay(&space, &transcript)?;
    println!(
        "replayed {} rounds of session {}: proposals and metrics match",
        session.history().len(),
        transcript.session_id
    );
    Ok(())
}

pub fn serve_command(a: &ServeArgs) -> anyhow::Result<()> {
    if a.catalog.is_empty() {
        bail!("serve needs at least one --catalog");
    }
    let handles = a
        .catalog
        .iter()
        .map(|dir| CatalogHandle::load(dir).with_context(|| format!("loading catalog {}", dir.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if let Some(dir) = &a.transcripts {
        std::fs::create_dir_all(dir)?;
    }
    let state = Arc::new(AppState::new(handles, a.transcripts.clone()));
    let addr = SocketAddr::new(a.host, a.port);
    tokio::runtime::Runtime::new()?.block_on(serve(state, addr))
}
