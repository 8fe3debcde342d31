//! Command-line surface: graph generation, cut-norm and cut-distance
//! computations, particle simulations, Fokker-Planck solves, and the
//! experiment harness. Every subcommand reads one TOML config and writes its
//! artifacts into the output directory; all randomness is seeded.

use clap::{Args, Parser, Subcommand};
use graphon_osc::coupling::CouplingSpec;
use graphon_osc::dynamics::{simulate_annealed, simulate_particle_system, SimConfig};
use graphon_osc::error::{Error, Result};
use graphon_osc::experiments::{
    beta_quantile, run_experiment, write_run_outputs, ExperimentConfig, InitialLawConfig,
};
use graphon_osc::fokker_planck::{solve_labeled_fp, FieldInit, FpConfig};
use graphon_osc::graphon::{
    cut_distance_step, cut_norm_exact, inf_to_one_norm, step_graphon, CutDistanceMode, Graph,
    Graphon, EXACT_NORM_CAP,
};
use graphon_osc::graphs::{degree_stats, generate, GraphKind, GraphSpec};
use ndarray::Array2;
use serde::Deserialize;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "graphon-osc", version, about = "Oscillators on dense graphs and their graphon limits")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a graph and write it as an edge list with degree statistics.
    GraphGen(CommonArgs),
    /// Cut norm (and ∞→1 norm) of a graph shifted by a constant.
    Cutnorm(CommonArgs),
    /// Cut distance between two graphs, or a graph and a constant graphon.
    Cutdist(CommonArgs),
    /// Simulate the particle system or its annealed version.
    Simulate(CommonArgs),
    /// Solve the labeled Fokker-Planck equation.
    FpSolve(CommonArgs),
    /// Run a named experiment from its config.
    Experiment(CommonArgs),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum GraphSourceConfig {
    Complete { n: usize },
    ErdosRenyi { n: usize, p: f64 },
    PreferentialAttachment { n: usize },
    Rank1 { n: usize, mean: f64, concentration: f64 },
    FromFile { path: PathBuf },
}

impl GraphSourceConfig {
    fn build(&self, seed: u64) -> Result<Graph> {
        let (kind, n) = match self {
            GraphSourceConfig::Complete { n } => (GraphKind::Complete, *n),
            GraphSourceConfig::ErdosRenyi { n, p } => (GraphKind::ErdosRenyi { p: *p }, *n),
            GraphSourceConfig::PreferentialAttachment { n } => {
                (GraphKind::PreferentialAttachment, *n)
            }
            GraphSourceConfig::Rank1 { n, mean, concentration } => (
                GraphKind::Rank1 {
                    quantile: beta_quantile(*mean, *concentration)?,
                    deterministic: false,
                },
                *n,
            ),
            GraphSourceConfig::FromFile { path } => return Graph::read_file(path),
        };
        Ok(generate(&GraphSpec { kind, n, seed })?.graph)
    }
}

#[derive(Deserialize)]
struct GraphGenFile {
    seed: u64,
    graph: GraphSourceConfig,
}

#[derive(Deserialize)]
struct CutnormFile {
    file: PathBuf,
    /// Constant subtracted from every entry before taking norms.
    #[serde(default)]
    shift: f64,
    #[serde(default = "default_restarts")]
    restarts: usize,
    #[serde(default)]
    seed: u64,
}

fn default_restarts() -> usize {
    50
}

#[derive(Deserialize)]
struct CutdistFile {
    a: PathBuf,
    /// Second graph; alternatively `p` for a constant graphon.
    b: Option<PathBuf>,
    p: Option<f64>,
    #[serde(default = "default_mode")]
    mode: String,
    #[serde(default)]
    seed: u64,
}

fn default_mode() -> String {
    "local_search".into()
}

#[derive(Deserialize)]
struct SimulateFile {
    seed: u64,
    t_end: f64,
    dt: f64,
    kuramoto_k: f64,
    graph: GraphSourceConfig,
    #[serde(default)]
    initial: InitialLawConfig,
    /// Run the annealed system with this density instead of the graph.
    annealed_p: Option<f64>,
}

#[derive(Deserialize)]
struct FpSolveFile {
    /// Constant graphon density, or `blocks` for a step graphon.
    p: Option<f64>,
    blocks: Option<Vec<Vec<f64>>>,
    m_classes: usize,
    k_max: usize,
    t_end: f64,
    dt: f64,
    kuramoto_k: f64,
    #[serde(default)]
    initial: InitialLawConfig,
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(T, String)> {
    let text = std::fs::read_to_string(path)?;
    let cfg = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok((cfg, text))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, format!("{value:#}\n"))?;
    Ok(())
}

fn graphon_from(blocks: &Option<Vec<Vec<f64>>>, p: &Option<f64>) -> Result<Graphon> {
    match (blocks, p) {
        (Some(rows), None) => {
            let m = rows.len();
            if rows.iter().any(|r| r.len() != m) {
                return Err(Error::Config("step graphon blocks must be square".into()));
            }
            Graphon::step(Array2::from_shape_fn((m, m), |(i, j)| rows[i][j]))
        }
        (None, Some(p)) => Graphon::constant(*p),
        _ => Err(Error::Config("specify exactly one of `p` and `blocks`".into())),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GraphGen(args) => {
            let (mut cfg, _) = read_config::<GraphGenFile>(&args.config)?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            let graph = cfg.graph.build(cfg.seed)?;
            std::fs::create_dir_all(&args.out)?;
            graph.write_edge_list(&args.out.join("graph.txt"))?;
            let stats = degree_stats(&graph);
            write_json(
                &args.out.join("stats.json"),
                &json!({ "n": graph.n(), "density": stats.density, "seed": cfg.seed }),
            )?;
        }
        Cmd::Cutnorm(args) => {
            let (mut cfg, _) = read_config::<CutnormFile>(&args.config)?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            let graph = Graph::read_file(&cfg.file)?;
            let n = graph.n();
            let shifted =
                Array2::from_shape_fn((n, n), |(i, j)| graph.weight(i, j) - cfg.shift);
            let (inf_to_one, _) = inf_to_one_norm(&shifted, cfg.restarts, cfg.seed)?;
            let cut = if n <= EXACT_NORM_CAP { Some(cut_norm_exact(&shifted)?) } else { None };
            std::fs::create_dir_all(&args.out)?;
            write_json(
                &args.out.join("cutnorm.json"),
                &json!({
                    "n": n,
                    "shift": cfg.shift,
                    "cut_norm_exact": cut,
                    "inf_to_one_normalized": inf_to_one,
                    "cut_norm_lower_bound": inf_to_one / 4.0,
                }),
            )?;
        }
        Cmd::Cutdist(args) => {
            let (mut cfg, _) = read_config::<CutdistFile>(&args.config)?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            let a = step_graphon(&Graph::read_file(&cfg.a)?);
            let b = match (&cfg.b, cfg.p) {
                (Some(path), None) => step_graphon(&Graph::read_file(path)?),
                (None, Some(p)) => Graphon::constant(p)?,
                _ => return Err(Error::Config("specify exactly one of `b` and `p`".into())),
            };
            let mode = match cfg.mode.as_str() {
                "exact" => CutDistanceMode::Exact,
                "local_search" => CutDistanceMode::LocalSearch,
                other => return Err(Error::Config(format!("unknown mode {other}"))),
            };
            let report = cut_distance_step(&a, &b, mode, cfg.seed)?;
            std::fs::create_dir_all(&args.out)?;
            write_json(
                &args.out.join("cutdist.json"),
                &json!({
                    "value": report.value,
                    "blocks": report.blocks,
                    "labeling_slack": report.labeling_slack,
                }),
            )?;
        }
        Cmd::Simulate(args) => {
            let (mut cfg, _) = read_config::<SimulateFile>(&args.config)?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            let graph = cfg.graph.build(cfg.seed)?;
            let mut sim = SimConfig::new(graph.n(), cfg.t_end, cfg.dt, cfg.seed.wrapping_add(1));
            sim.coupling = CouplingSpec::kuramoto(cfg.kuramoto_k);
            sim.initial_law = cfg.initial.to_law();
            let ens = match cfg.annealed_p {
                Some(p) => simulate_annealed(&sim, p)?,
                None => simulate_particle_system(&sim, &graph)?,
            };
            std::fs::create_dir_all(&args.out)?;
            ens.write_binary(&args.out.join("ensemble.bin"))?;
            if ens.n() <= 64 {
                ens.write_csv(&args.out.join("ensemble.csv"))?;
            }
            write_json(
                &args.out.join("run.json"),
                &json!({ "n": ens.n(), "steps": ens.steps(), "dt": ens.dt(), "seed": cfg.seed }),
            )?;
        }
        Cmd::FpSolve(args) => {
            let (cfg, _) = read_config::<FpSolveFile>(&args.config)?;
            let w = graphon_from(&cfg.blocks, &cfg.p)?;
            let field = solve_labeled_fp(
                &w,
                &CouplingSpec::kuramoto(cfg.kuramoto_k),
                &FieldInit::Shared(cfg.initial.to_law()),
                &FpConfig::new(cfg.m_classes, cfg.k_max, cfg.t_end, cfg.dt),
            )?;
            std::fs::create_dir_all(&args.out)?;
            field.write_binary(&args.out.join("field.bin"))?;
            field.write_order_parameter_csv(&args.out.join("order_parameter.csv"))?;
        }
        Cmd::Experiment(args) => {
            let (mut cfg, text) = read_config::<ExperimentConfig>(&args.config)?;
            if let Some(s) = args.seed {
                match &mut cfg {
                    ExperimentConfig::Lln(c) => c.seed = s,
                    ExperimentConfig::Holder(c) => c.seed = s,
                    ExperimentConfig::Chaos(c) => c.seed = s,
                    ExperimentConfig::RandomMeanfield(c) => c.seed = s,
                    ExperimentConfig::AnnealedGap(c) => c.seed = s,
                    ExperimentConfig::GraphConvergence(c) => c.seed = s,
                }
            }
            let start = Instant::now();
            let table = run_experiment(&cfg)?;
            write_run_outputs(&args.out, &cfg, &text, &table, start.elapsed().as_secs_f64())?;
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        let code = e.exit_code();
        eprintln!(
            "{}",
            json!({ "error": format!("{e}"), "exit_code": code })
        );
        std::process::exit(code);
    }
}
