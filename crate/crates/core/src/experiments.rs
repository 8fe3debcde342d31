//! Configuration-driven experiment harness: law-of-large-numbers trends,
//! Hölder modulus of the graphon-to-solution map, propagation of chaos,
//! random mean-field limits of preferential attachment, the annealed gap for
//! rank-1 graphs, and Monte-Carlo cut-distance convergence of W-random
//! graphs. Every run is fully determined by its config (seeds included) and
//! emits a flat result table.

use crate::coupling::{CouplingSpec, InitialLaw};
use crate::dynamics::{
    draw_inputs, empirical_measure, lln_estimator, simulate_annealed_with_inputs,
    simulate_coupled_copies, simulate_particle_system_with_inputs, SimConfig, TrajectoryEnsemble,
};
use crate::error::{Error, Result};
use crate::fokker_planck::{
    kuramoto_self_consistent_r, sample_density, solve_labeled_fp, FieldInit, FpConfig,
};
use crate::graphon::{
    cut_distance_step, delta_expectation, step_graphon, CutDistanceMode, Graphon,
};
use crate::graphs::{degree_stats, generate, GraphKind, GraphSpec};
use crate::torus::{wasserstein2_circle, EmpiricalMeasure};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{Beta, ContinuousCDF};
use std::fmt::Write as FmtWrite;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InitialLawConfig {
    #[default]
    Uniform,
    PointMass {
        theta: f64,
    },
    VonMises {
        loc: f64,
        concentration: f64,
    },
}

impl InitialLawConfig {
    pub fn to_law(self) -> InitialLaw {
        match self {
            InitialLawConfig::Uniform => InitialLaw::Uniform,
            InitialLawConfig::PointMass { theta } => InitialLaw::PointMass(theta),
            InitialLawConfig::VonMises { loc, concentration } => {
                InitialLaw::VonMises { loc, concentration }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnConfig {
    pub seed: u64,
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub p: f64,
    pub kuramoto_k: f64,
    pub t_end: f64,
    pub dt: f64,
    pub k_max: usize,
    #[serde(default = "one")]
    pub m_classes: usize,
    #[serde(default)]
    pub initial: InitialLawConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderConfig {
    pub seed: u64,
    pub base_p: f64,
    pub p_list: Vec<f64>,
    pub kuramoto_k: f64,
    pub t_end: f64,
    pub dt: f64,
    pub k_max: usize,
    #[serde(default)]
    pub initial: InitialLawConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosConfig {
    pub seed: u64,
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub p: f64,
    pub kuramoto_k: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub initial: InitialLawConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanfieldGraphConfig {
    #[default]
    PreferentialAttachment,
    Complete,
    ErdosRenyi {
        p: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMeanfieldConfig {
    pub seed: u64,
    pub n: usize,
    pub replicas: usize,
    pub kuramoto_k: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub graph: MeanfieldGraphConfig,
    #[serde(default)]
    pub initial: InitialLawConfig,
    /// Synchronization threshold on the simulated order parameter.
    #[serde(default = "default_r_threshold")]
    pub r_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealedGapConfig {
    pub seed: u64,
    pub n: usize,
    pub replicas: usize,
    pub kuramoto_k: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Mean of the rank-1 vertex weight g; the annealed density is mean².
    pub mean: f64,
    /// Beta concentrations α+β per variance level; infinity means the
    /// degenerate quantile g ≡ mean (Var[g] = 0).
    pub concentrations: Vec<f64>,
    #[serde(default)]
    pub initial: InitialLawConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConvergenceConfig {
    pub seed: u64,
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Lln(LlnConfig),
    Holder(HolderConfig),
    Chaos(ChaosConfig),
    RandomMeanfield(RandomMeanfieldConfig),
    AnnealedGap(AnnealedGapConfig),
    GraphConvergence(GraphConvergenceConfig),
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::Lln(_) => "lln",
            ExperimentConfig::Holder(_) => "holder",
            ExperimentConfig::Chaos(_) => "chaos",
            ExperimentConfig::RandomMeanfield(_) => "random_meanfield",
            ExperimentConfig::AnnealedGap(_) => "annealed_gap",
            ExperimentConfig::GraphConvergence(_) => "graph_convergence",
        }
    }
}

fn one() -> usize {
    1
}

fn default_r_threshold() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub parameters: String,
    pub statistic: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    fn push(
        &mut self,
        experiment: &str,
        parameters: String,
        statistic: &str,
        value: f64,
        std_error: Option<f64>,
        replicas: usize,
    ) {
        debug_assert!(replicas <= 1 || std_error.is_some(), "std-error required for aggregates");
        self.rows.push(ResultRow {
            experiment: experiment.to_string(),
            parameters,
            statistic: statistic.to_string(),
            value,
            std_error,
            replicas,
        });
    }

    /// First row matching the parameter string and statistic name.
    pub fn value(&self, parameters: &str, statistic: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.parameters == parameters && r.statistic == statistic)
            .map(|r| r.value)
    }

    pub fn std_error(&self, parameters: &str, statistic: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.parameters == parameters && r.statistic == statistic)
            .and_then(|r| r.std_error)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("experiment,parameters,statistic,value,std_error,replicas\n");
        for r in &self.rows {
            let se = r.std_error.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.experiment, r.parameters, r.statistic, r.value, se, r.replicas
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Deterministic per-task seed, independent of iteration order.
fn task_seed(base: u64, a: u64, b: u64) -> u64 {
    base ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

fn order_parameter_of(ens: &TrajectoryEnsemble, t_index: usize) -> f64 {
    let n = ens.n() as f64;
    let (mut c, mut s) = (0.0, 0.0);
    for i in 0..ens.n() {
        let th = ens.angles()[[i, t_index]];
        c += th.cos();
        s += th.sin();
    }
    ((c / n).powi(2) + (s / n).powi(2)).sqrt()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    match cfg {
        ExperimentConfig::Lln(c) => run_lln(c),
        ExperimentConfig::Holder(c) => run_holder(c),
        ExperimentConfig::Chaos(c) => run_chaos(c),
        ExperimentConfig::RandomMeanfield(c) => run_random_meanfield(c),
        ExperimentConfig::AnnealedGap(c) => run_annealed_gap(c),
        ExperimentConfig::GraphConvergence(c) => run_graph_convergence(c),
    }
}

/// LLN trend: for each n, couple the quenched ER(p) particle system with the
/// non-linear copies driven by the limiting constant-graphon field (shared
/// noise and initial angles), and record the sup-coupling estimator, the
/// terminal Wasserstein-2 distance to a field sample, and the Monte-Carlo
/// cut distance of the sampled graph to the limit.
pub fn run_lln(c: &LlnConfig) -> Result<ResultTable> {
    if c.n_list.windows(2).any(|w| w[0] >= w[1]) || c.n_list.is_empty() {
        return Err(Error::Config("n_list must be nonempty and strictly increasing".into()));
    }
    if c.replicas == 0 {
        return Err(Error::Config("need at least one replica".into()));
    }
    let coupling = CouplingSpec::kuramoto(c.kuramoto_k);
    let graphon = Graphon::constant(c.p)?;
    let init = c.initial.to_law();
    let field = solve_labeled_fp(
        &graphon,
        &coupling,
        &FieldInit::Shared(init),
        &FpConfig::new(c.m_classes, c.k_max, c.t_end, c.dt),
    )?;
    let avg = field.average();
    let terminal_moments = avg.row(avg.nrows() - 1);

    let mut table = ResultTable::default();
    for &n in &c.n_list {
        let mut ests = Vec::with_capacity(c.replicas);
        let mut w2s = Vec::with_capacity(c.replicas);
        let mut deltas = Vec::with_capacity(c.replicas);
        for rep in 0..c.replicas {
            let s = task_seed(c.seed, n as u64, rep as u64);
            let graph = generate(&GraphSpec {
                kind: GraphKind::ErdosRenyi { p: c.p },
                n,
                seed: s,
            })?
            .graph;
            let mut sim = SimConfig::new(n, c.t_end, c.dt, s.wrapping_add(1));
            sim.coupling = coupling.clone();
            sim.initial_law = init;
            let inputs = draw_inputs(&sim, true)?;
            let quenched = simulate_particle_system_with_inputs(&sim, &graph, &inputs)?;
            let coupled = simulate_coupled_copies(&sim, &graphon, &field, &inputs)?;
            ests.push(lln_estimator(&quenched, &coupled)?);

            let mu_n = empirical_measure(&quenched, quenched.steps())?;
            let limit_sample = EmpiricalMeasure::new(sample_density(
                terminal_moments,
                c.k_max,
                n,
                s.wrapping_add(2),
            )?)?;
            w2s.push(wasserstein2_circle(&mu_n, &limit_sample));

            let report = cut_distance_step(
                &step_graphon(&graph),
                &graphon,
                CutDistanceMode::LocalSearch,
                s.wrapping_add(3),
            )?;
            deltas.push(report.value);

            let params = format!("n={n};replica={rep}");
            table.push("lln", params.clone(), "lln_estimator", ests[rep], None, 1);
            table.push("lln", params.clone(), "w2_terminal", w2s[rep], None, 1);
            table.push("lln", params, "cut_distance", deltas[rep], None, 1);
        }
        for (name, samples) in
            [("lln_estimator", &ests), ("w2_terminal", &w2s), ("cut_distance", &deltas)]
        {
            let m = delta_expectation(samples)?;
            table.push(
                "lln",
                format!("n={n}"),
                &format!("{name}_mean"),
                m.mean,
                Some(m.std_error),
                c.replicas,
            );
        }
    }
    Ok(table)
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|&(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Hölder modulus of p ↦ μ(W ≡ p): solve the McKean-Vlasov field for each p
/// in the sweep, measure the moment-metric distance to the base solution, and
/// fit the log-log exponent against the exact cut distance |p − base|.
pub fn run_holder(c: &HolderConfig) -> Result<ResultTable> {
    if c.p_list.len() < 4 {
        return Err(Error::Config("holder sweep needs at least 4 pairs".into()));
    }
    let coupling = CouplingSpec::kuramoto(c.kuramoto_k);
    let init = FieldInit::Shared(c.initial.to_law());
    let fp = |p: f64| {
        solve_labeled_fp(
            &Graphon::constant(p)?,
            &coupling,
            &init,
            &FpConfig::new(1, c.k_max, c.t_end, c.dt),
        )
    };
    let base = fp(c.base_p)?;
    let mut table = ResultTable::default();
    let mut deltas = Vec::new();
    let mut dists = Vec::new();
    for &p in &c.p_list {
        let field = fp(p)?;
        let delta = (p - c.base_p).abs();
        let dist = crate::fokker_planck::field_distance(&field, &base, false)?;
        deltas.push(delta);
        dists.push(dist);
        let params = format!("p={p}");
        table.push("holder", params.clone(), "cut_delta", delta, None, 1);
        table.push("holder", params, "field_distance", dist, None, 1);
    }
    if let Some(exponent) = loglog_slope(&deltas, &dists) {
        table.push("holder", "sweep".into(), "holder_exponent", exponent, None, 1);
    }
    let c_best = deltas
        .iter()
        .zip(&dists)
        .filter(|&(&d, _)| d > 0.0)
        .map(|(&d, &y)| y / d.sqrt())
        .fold(0.0f64, f64::max);
    table.push("holder", "sweep".into(), "holder_constant", c_best, None, 1);
    Ok(table)
}

/// cos/sin of one time slice of an ensemble, with the across-pair product
/// mean (Σx)² − Σx² over n(n−1) and the particle mean.
fn pair_statistics(ens: &TrajectoryEnsemble, t_index: usize, f: fn(f64) -> f64) -> (f64, f64) {
    let n = ens.n();
    let xs: Vec<f64> = (0..n).map(|i| f(ens.angles()[[i, t_index]])).collect();
    let s: f64 = xs.iter().sum();
    let sq: f64 = xs.iter().map(|x| x * x).sum();
    let pair_mean = (s * s - sq) / (n * (n - 1)) as f64;
    (pair_mean, s / n as f64)
}

/// Propagation of chaos: the covariance Cov(f(θ¹_T), f(θ²_T)) for f = cos and
/// f = sin, estimated with all ordered particle pairs per replica (valid by
/// exchangeability) and averaged over replicas.
pub fn run_chaos(c: &ChaosConfig) -> Result<ResultTable> {
    if c.replicas < 100 {
        return Err(Error::Config("chaos covariance needs at least 100 replicas".into()));
    }
    let coupling = CouplingSpec::kuramoto(c.kuramoto_k);
    let init = c.initial.to_law();
    let mut table = ResultTable::default();
    for &n in &c.n_list {
        if n < 2 {
            return Err(Error::Config("chaos needs at least 2 particles".into()));
        }
        let mut pairs_cos = Vec::with_capacity(c.replicas);
        let mut pairs_sin = Vec::with_capacity(c.replicas);
        let mut means_cos = Vec::with_capacity(c.replicas);
        let mut means_sin = Vec::with_capacity(c.replicas);
        for rep in 0..c.replicas {
            let s = task_seed(c.seed, n as u64, rep as u64);
            let graph = generate(&GraphSpec {
                kind: GraphKind::ErdosRenyi { p: c.p },
                n,
                seed: s,
            })?
            .graph;
            let mut sim = SimConfig::new(n, c.t_end, c.dt, s.wrapping_add(1));
            sim.coupling = coupling.clone();
            sim.initial_law = init;
            let ens = simulate_particle_system_with_inputs(&sim, &graph, &draw_inputs(&sim, false)?)?;
            let t = ens.steps();
            let (pc, mc) = pair_statistics(&ens, t, f64::cos);
            let (ps, ms) = pair_statistics(&ens, t, f64::sin);
            pairs_cos.push(pc);
            means_cos.push(mc);
            pairs_sin.push(ps);
            means_sin.push(ms);
        }
        for (name, pairs, means) in [
            ("cov_cos", &pairs_cos, &means_cos),
            ("cov_sin", &pairs_sin, &means_sin),
        ] {
            let pm = delta_expectation(pairs)?;
            let mm = delta_expectation(means)?;
            let cov = pm.mean - mm.mean * mm.mean;
            table.push(
                "chaos",
                format!("n={n}"),
                name,
                cov,
                Some(pm.std_error),
                c.replicas,
            );
        }
    }
    Ok(table)
}

/// Random mean-field limit: preferential attachment graphs converge to a
/// random constant graphon, so per replica the fitted density p̂ determines a
/// random effective coupling p̂·K; the simulated order parameter is compared
/// with the stationary self-consistent one.
pub fn run_random_meanfield(c: &RandomMeanfieldConfig) -> Result<ResultTable> {
    if c.replicas < 20 {
        return Err(Error::Config("random mean-field needs at least 20 replicas".into()));
    }
    let coupling = CouplingSpec::kuramoto(c.kuramoto_k);
    let init = c.initial.to_law();
    let mut table = ResultTable::default();
    let mut p_hats = Vec::with_capacity(c.replicas);
    let mut agreements = Vec::with_capacity(c.replicas);
    for rep in 0..c.replicas {
        let s = task_seed(c.seed, 1, rep as u64);
        let kind = match c.graph {
            MeanfieldGraphConfig::PreferentialAttachment => GraphKind::PreferentialAttachment,
            MeanfieldGraphConfig::Complete => GraphKind::Complete,
            MeanfieldGraphConfig::ErdosRenyi { p } => GraphKind::ErdosRenyi { p },
        };
        let graph = generate(&GraphSpec { kind, n: c.n, seed: s })?.graph;
        let p_hat = degree_stats(&graph).density;
        let mut sim = SimConfig::new(c.n, c.t_end, c.dt, s.wrapping_add(1));
        sim.coupling = coupling.clone();
        sim.initial_law = init;
        let ens = simulate_particle_system_with_inputs(&sim, &graph, &draw_inputs(&sim, false)?)?;
        let r_sim = order_parameter_of(&ens, ens.steps());
        let r_sc = kuramoto_self_consistent_r(p_hat * c.kuramoto_k, 1e-8);
        let agree = (r_sim > c.r_threshold) == (p_hat * c.kuramoto_k > 1.0);
        p_hats.push(p_hat);
        agreements.push(if agree { 1.0 } else { 0.0 });
        let params = format!("replica={rep}");
        table.push("random_meanfield", params.clone(), "p_hat", p_hat, None, 1);
        table.push("random_meanfield", params.clone(), "r_simulated", r_sim, None, 1);
        table.push("random_meanfield", params, "r_selfconsistent", r_sc, None, 1);
    }
    let pm = delta_expectation(&p_hats)?;
    table.push("random_meanfield", "summary".into(), "p_hat_mean", pm.mean, Some(pm.std_error), c.replicas);
    let var = p_hats.iter().map(|p| (p - pm.mean).powi(2)).sum::<f64>() / (c.replicas as f64 - 1.0);
    let sq_dev: Vec<f64> = p_hats.iter().map(|p| (p - pm.mean).powi(2)).collect();
    let var_se = delta_expectation(&sq_dev)?.std_error;
    table.push("random_meanfield", "summary".into(), "p_hat_variance", var, Some(var_se), c.replicas);
    let am = delta_expectation(&agreements)?;
    table.push(
        "random_meanfield",
        "summary".into(),
        "agreement_fraction",
        am.mean,
        Some(am.std_error),
        c.replicas,
    );
    Ok(table)
}

/// Quantile function of a Beta law with the given mean and concentration
/// α+β; infinite concentration degenerates to the constant mean.
pub fn beta_quantile(mean: f64, concentration: f64) -> Result<Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
    if !(0.0..=1.0).contains(&mean) {
        return Err(Error::Domain(format!("Beta mean {mean} outside [0,1]")));
    }
    if concentration.is_infinite() {
        return Ok(Arc::new(move |_| mean));
    }
    if concentration <= 0.0 {
        return Err(Error::Domain(format!("Beta concentration {concentration} must be positive")));
    }
    let beta = Beta::new(mean * concentration, (1.0 - mean) * concentration)
        .map_err(|e| Error::Domain(format!("Beta parameters invalid: {e}")))?;
    Ok(Arc::new(move |u| beta.inverse_cdf(u.clamp(0.0, 1.0))))
}

/// Var[g] for the Beta family at fixed mean.
pub fn beta_variance(mean: f64, concentration: f64) -> f64 {
    if concentration.is_infinite() {
        0.0
    } else {
        mean * (1.0 - mean) / (concentration + 1.0)
    }
}

/// Annealed gap: terminal W2 between the quenched rank-1 system and the
/// annealed one under shared noise, per Beta variance level, plus a noise
/// floor from independently driven annealed replicas.
pub fn run_annealed_gap(c: &AnnealedGapConfig) -> Result<ResultTable> {
    if c.concentrations.is_empty() {
        return Err(Error::Config("need at least one variance level".into()));
    }
    if c.replicas == 0 {
        return Err(Error::Config("need at least one replica".into()));
    }
    let p_annealed = c.mean * c.mean;
    let coupling = CouplingSpec::kuramoto(c.kuramoto_k);
    let init = c.initial.to_law();
    let mut table = ResultTable::default();
    for (li, &conc) in c.concentrations.iter().enumerate() {
        let var = beta_variance(c.mean, conc);
        let quantile = beta_quantile(c.mean, conc)?;
        let mut gaps = Vec::with_capacity(c.replicas);
        for rep in 0..c.replicas {
            let s = task_seed(c.seed, li as u64 + 1, rep as u64);
            let graph = generate(&GraphSpec {
                kind: GraphKind::Rank1 { quantile: quantile.clone(), deterministic: false },
                n: c.n,
                seed: s,
            })?
            .graph;
            let mut sim = SimConfig::new(c.n, c.t_end, c.dt, s.wrapping_add(1));
            sim.coupling = coupling.clone();
            sim.initial_law = init;
            let inputs = draw_inputs(&sim, false)?;
            let quenched = simulate_particle_system_with_inputs(&sim, &graph, &inputs)?;
            let annealed = simulate_annealed_with_inputs(&sim, p_annealed, &inputs)?;
            let gap = wasserstein2_circle(
                &empirical_measure(&quenched, quenched.steps())?,
                &empirical_measure(&annealed, annealed.steps())?,
            );
            gaps.push(gap);
        }
        let m = delta_expectation(&gaps)?;
        let params = format!("level={li}");
        table.push("annealed_gap", params.clone(), "variance", var, None, 1);
        table.push("annealed_gap", params, "gap_mean", m.mean, Some(m.std_error), c.replicas);
    }
    // noise floor: two annealed systems with independent draws
    let mut floors = Vec::with_capacity(c.replicas);
    for rep in 0..c.replicas {
        let s = task_seed(c.seed, 0, rep as u64);
        let mut sim = SimConfig::new(c.n, c.t_end, c.dt, s.wrapping_add(1));
        sim.coupling = coupling.clone();
        sim.initial_law = init;
        let a = simulate_annealed_with_inputs(&sim, p_annealed, &draw_inputs(&sim, false)?)?;
        sim.seed = s.wrapping_add(2);
        let b = simulate_annealed_with_inputs(&sim, p_annealed, &draw_inputs(&sim, false)?)?;
        floors.push(wasserstein2_circle(
            &empirical_measure(&a, a.steps())?,
            &empirical_measure(&b, b.steps())?,
        ));
    }
    let m = delta_expectation(&floors)?;
    table.push("annealed_gap", "floor".into(), "noise_floor", m.mean, Some(m.std_error), c.replicas);
    Ok(table)
}

/// Monte-Carlo E[δ̂□(ξ⁽ⁿ⁾, W)] for W-random graphs from a constant graphon.
pub fn run_graph_convergence(c: &GraphConvergenceConfig) -> Result<ResultTable> {
    if c.n_list.is_empty() || c.replicas == 0 {
        return Err(Error::Config("need n values and replicas".into()));
    }
    let graphon = Graphon::constant(c.p)?;
    let mut table = ResultTable::default();
    for &n in &c.n_list {
        let mut deltas = Vec::with_capacity(c.replicas);
        for rep in 0..c.replicas {
            let s = task_seed(c.seed, n as u64, rep as u64);
            let (graph, _) = crate::graphon::sample_w_random_graph(
                &graphon,
                n,
                s,
                crate::graphon::SampleMode::Binary,
            )?;
            let report = cut_distance_step(
                &step_graphon(&graph),
                &graphon,
                CutDistanceMode::LocalSearch,
                s.wrapping_add(1),
            )?;
            deltas.push(report.value);
        }
        let m = delta_expectation(&deltas)?;
        table.push(
            "graph_convergence",
            format!("n={n}"),
            "delta_mean",
            m.mean,
            Some(m.std_error),
            c.replicas,
        );
    }
    Ok(table)
}

/// SHA-256 of the raw config text, for the run manifest.
pub fn config_hash(config_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(config_text.as_bytes());
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    experiment: &'a str,
    config_sha256: String,
    package_version: &'a str,
    wall_time_s: f64,
}

/// Write results.csv and a meta.json manifest into the output directory.
pub fn write_run_outputs(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    config_text: &str,
    table: &ResultTable,
    wall_time_s: f64,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    table.write_csv(&out_dir.join("results.csv"))?;
    let manifest = RunManifest {
        experiment: cfg.name(),
        config_sha256: config_hash(config_text),
        package_version: env!("CARGO_PKG_VERSION"),
        wall_time_s,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("manifest serialization failed: {e}")))?;
    std::fs::write(out_dir.join("meta.json"), json)?;
    Ok(())
}
