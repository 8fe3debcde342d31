//! Euler-Maruyama simulation of the n-particle system
//!
//!   dθ^i = F(θ^i) dt + (1/n) Σ_j ξ_{ij} Γ(θ^i, θ^j) dt + dB^i,
//!
//! its annealed version with ξ_{ij} replaced by a constant p (diagonal
//! included), and the coupled non-linear copies driven by a solved density
//! field through ∫ W(U_i, y) ∫ Γ(θ^i, θ') μ^y(dθ') dy with the same noise and
//! initial angles as a particle run.
//!
//! Updates are synchronous: every drift is evaluated at the pre-step state,
//! then all particles move at once by drift·Δt + √Δt·Z on the wrapped torus.

use crate::coupling::{CouplingSpec, InitialLaw};
use crate::error::{Error, Result};
use crate::fokker_planck::LabeledDensityField;
use crate::graphon::{Graph, Graphon};
use crate::torus::{coupled_sup_distance, EmpiricalMeasure, TrajectoryPair};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::io::{Read as IoRead, Write as IoWrite};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub initial_law: InitialLaw,
    pub coupling: CouplingSpec,
    /// Force all Brownian increments to zero; oracle tests only.
    pub zero_noise: bool,
    /// Skip the moment fast path even on complete graphs.
    pub force_direct: bool,
    /// Sum interaction terms in a value-determined order so that particle
    /// permutations act bit-exactly on the output. Costs an O(n log n) sort
    /// per particle per step; off by default.
    pub deterministic_reduction: bool,
}

impl SimConfig {
    pub fn new(n: usize, t_end: f64, dt: f64, seed: u64) -> Self {
        Self {
            n,
            t_end,
            dt,
            seed,
            initial_law: InitialLaw::Uniform,
            coupling: CouplingSpec::kuramoto(1.0),
            zero_noise: false,
            force_direct: false,
            deterministic_reduction: false,
        }
    }

    pub fn steps(&self) -> Result<usize> {
        if self.n == 0 {
            return Err(Error::Config("need at least one particle".into()));
        }
        if self.dt <= 0.0 || self.t_end <= 0.0 {
            return Err(Error::Config("dt and T must be positive".into()));
        }
        let ratio = self.t_end / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Config(format!("T/dt = {ratio} is not an integer")));
        }
        Ok(steps as usize)
    }
}

/// The random data a run consumes: initial angles, Brownian increments and,
/// when the coupled construction needs them, the IID uniform labels U_i.
/// Separated from the integrator so that two systems can share one draw.
#[derive(Debug, Clone)]
pub struct SimInputs {
    pub initial_angles: Vec<f64>,
    /// n × steps, already scaled by √Δt.
    pub increments: Array2<f64>,
    pub labels: Option<Vec<f64>>,
}

/// Draw all randomness for a run from the config seed: initial angles first,
/// then labels if requested, then the Brownian increments in particle-major
/// order.
pub fn draw_inputs(cfg: &SimConfig, with_labels: bool) -> Result<SimInputs> {
    let steps = cfg.steps()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let initial_angles: Vec<f64> = (0..cfg.n).map(|_| cfg.initial_law.sample(&mut rng)).collect();
    let labels = if with_labels {
        Some((0..cfg.n).map(|_| rng.gen::<f64>()).collect())
    } else {
        None
    };
    let sqrt_dt = cfg.dt.sqrt();
    let increments = if cfg.zero_noise {
        Array2::zeros((cfg.n, steps))
    } else {
        Array2::from_shape_fn((cfg.n, steps), |_| {
            let z: f64 = rng.sample(StandardNormal);
            sqrt_dt * z
        })
    };
    Ok(SimInputs { initial_angles, increments, labels })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    time_grid: Vec<f64>,
    /// n × (steps+1), wrapped to [0, 2π).
    angles: Array2<f64>,
    increments: Array2<f64>,
    initial_angles: Vec<f64>,
    labels: Option<Vec<f64>>,
    dt: f64,
    seed: u64,
}

impl TrajectoryEnsemble {
    pub fn n(&self) -> usize {
        self.angles.nrows()
    }

    pub fn steps(&self) -> usize {
        self.angles.ncols() - 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn angles(&self) -> &Array2<f64> {
        &self.angles
    }

    pub fn initial_angles(&self) -> &[f64] {
        &self.initial_angles
    }

    pub fn increments(&self) -> &Array2<f64> {
        &self.increments
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    /// Binary column store: n, steps, dt, seed, then the angle grid row-major
    /// as little-endian 64-bit floats.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&(self.n() as u64).to_le_bytes())?;
        f.write_all(&(self.steps() as u64).to_le_bytes())?;
        f.write_all(&self.dt.to_le_bytes())?;
        f.write_all(&self.seed.to_le_bytes())?;
        for v in self.angles.iter() {
            f.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut b = [0u8; 8];
        f.read_exact(&mut b)?;
        let n = u64::from_le_bytes(b) as usize;
        f.read_exact(&mut b)?;
        let steps = u64::from_le_bytes(b) as usize;
        f.read_exact(&mut b)?;
        let dt = f64::from_le_bytes(b);
        f.read_exact(&mut b)?;
        let seed = u64::from_le_bytes(b);
        let mut angles = Array2::zeros((n, steps + 1));
        for v in angles.iter_mut() {
            f.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
        let initial_angles = angles.column(0).to_vec();
        Ok(Self {
            time_grid: (0..=steps).map(|s| s as f64 * dt).collect(),
            angles,
            increments: Array2::zeros((n, steps)),
            initial_angles,
            labels: None,
            dt,
            seed,
        })
    }

    /// CSV with one row per time step and one column per particle.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t".to_string()];
        header.extend((0..self.n()).map(|i| format!("theta_{i}")));
        w.write_record(&header)?;
        for (s, t) in self.time_grid.iter().enumerate() {
            let mut rec = vec![t.to_string()];
            rec.extend((0..self.n()).map(|i| self.angles[[i, s]].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Drift sources for the shared integrator.
enum Interaction<'a> {
    /// (1/n) Σ_j ξ_{ij} Γ(θ^i, θ^j); the graph's zero diagonal removes the
    /// self term.
    Direct { graph: &'a Graph },
    /// Complete simple graph: per-step totals T_l = Σ_j e^{ilθ^j} give
    /// S_l(i) = T_l − e^{ilθ^i} without the O(n²) sweep.
    FastComplete,
    /// ξ_{ij} ≡ p including j = i.
    Annealed { p: f64 },
    /// ∫ W(U_i, y) ∫ Γ(θ, θ') μ^y(dθ') dy; `cell_w[i][b]` is the average of
    /// W(U_i, ·) over label cell b.
    Field { field: &'a LabeledDensityField, cell_w: Array2<f64> },
}

fn sorted_sum_f64(terms: &mut [f64]) -> f64 {
    terms.sort_by(|a, b| a.total_cmp(b));
    terms.iter().sum()
}

/// Interaction frequencies (k, l, Γ_{kl}) as a flat list.
fn gamma_table(coupling: &CouplingSpec) -> Vec<(i64, i64, Complex64)> {
    coupling.interaction_coeffs().iter().map(|(&(k, l), &c)| (k, l, c)).collect()
}

/// All n drifts at one synchronous state.
fn compute_drifts(
    cfg: &SimConfig,
    gamma: &[(i64, i64, Complex64)],
    interaction: &Interaction<'_>,
    state: &[f64],
    t: f64,
    drift: &mut [f64],
    terms: &mut Vec<f64>,
) -> Result<()> {
    let n = state.len();
    let inv_n = 1.0 / n as f64;
    match interaction {
        Interaction::Direct { graph } => {
            if cfg.deterministic_reduction {
                for i in 0..n {
                    terms.clear();
                    for j in 0..n {
                        terms.push(
                            graph.weight(i, j) * cfg.coupling.eval_interaction(state[i], state[j]),
                        );
                    }
                    let acc = sorted_sum_f64(terms);
                    drift[i] = cfg.coupling.eval_drift(state[i]) + inv_n * acc;
                }
            } else {
                // weighted moments S_l(i) = Σ_j ξ_{ij} e^{ilθ_j} by one real
                // matrix times complex vector product per frequency; the graph
                // is real so S_{−l} = conj(S_l)
                let l_values = distinct_l(gamma);
                let adj = graph.adj();
                let mut moments: Vec<(i64, Vec<Complex64>)> = Vec::new();
                for &l in &l_values {
                    if l < 0 && l_values.binary_search(&-l).is_ok() {
                        continue;
                    }
                    let phases: Vec<Complex64> =
                        state.iter().map(|&t| Complex64::from_polar(1.0, l as f64 * t)).collect();
                    let mut s = vec![Complex64::new(0.0, 0.0); n];
                    for i in 0..n {
                        let row = adj.row(i);
                        let mut acc = Complex64::new(0.0, 0.0);
                        for j in 0..n {
                            acc += row[j] * phases[j];
                        }
                        s[i] = acc;
                    }
                    moments.push((l, s));
                }
                let lookup = |l: i64, i: usize| -> Complex64 {
                    for (lv, s) in &moments {
                        if *lv == l {
                            return s[i];
                        }
                        if *lv == -l {
                            return s[i].conj();
                        }
                    }
                    unreachable!("frequency {l} missing from the moment table")
                };
                for i in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for &(k, l, c) in gamma {
                        acc += c * Complex64::from_polar(1.0, k as f64 * state[i]) * lookup(l, i);
                    }
                    drift[i] = cfg.coupling.eval_drift(state[i]) + inv_n * acc.re;
                }
            }
        }
        Interaction::FastComplete | Interaction::Annealed { .. } => {
            let scale = match interaction {
                Interaction::Annealed { p } => *p,
                _ => 1.0,
            };
            let exclude_self = matches!(interaction, Interaction::FastComplete);
            let l_values = distinct_l(gamma);
            let totals: Vec<(i64, Complex64)> = l_values
                .iter()
                .map(|&l| {
                    let mut t = Complex64::new(0.0, 0.0);
                    for &theta in state {
                        t += Complex64::from_polar(1.0, l as f64 * theta);
                    }
                    (l, t)
                })
                .collect();
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(k, l, c) in gamma {
                    let mut t = totals.iter().find(|&&(lv, _)| lv == l).unwrap().1;
                    if exclude_self {
                        t -= Complex64::from_polar(1.0, l as f64 * state[i]);
                    }
                    acc += c * Complex64::from_polar(1.0, k as f64 * state[i]) * t;
                }
                drift[i] = cfg.coupling.eval_drift(state[i]) + scale * inv_n * acc.re;
            }
        }
        Interaction::Field { field, cell_w } => {
            let m = field.m_classes();
            let moments = field.moments_at(t)?;
            let inv_m = 1.0 / m as f64;
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(k, l, c) in gamma {
                    // ∫ W(U_i, y) μ̂^y_{−l} dy over the M cells
                    let mut integral = Complex64::new(0.0, 0.0);
                    for b in 0..m {
                        integral += cell_w[[i, b]] * moments[[b, field.mode_index(-l)]];
                    }
                    acc += c * Complex64::from_polar(1.0, k as f64 * state[i]) * (integral * inv_m);
                }
                drift[i] = cfg.coupling.eval_drift(state[i]) + acc.re;
            }
        }
    }
    Ok(())
}

/// The drift vector of the particle system at an arbitrary state; exposed for
/// diagnostics and single-state checks.
pub fn drift_profile(cfg: &SimConfig, graph: &Graph, state: &[f64]) -> Result<Vec<f64>> {
    if graph.n() != state.len() {
        return Err(Error::Contract("state length does not match the graph".into()));
    }
    let gamma = gamma_table(&cfg.coupling);
    let interaction = if graph.is_complete() && !cfg.force_direct && !cfg.deterministic_reduction {
        Interaction::FastComplete
    } else {
        Interaction::Direct { graph }
    };
    let mut drift = vec![0.0; state.len()];
    let mut terms = Vec::with_capacity(state.len());
    compute_drifts(cfg, &gamma, &interaction, state, 0.0, &mut drift, &mut terms)?;
    Ok(drift)
}

fn integrate(
    cfg: &SimConfig,
    inputs: &SimInputs,
    interaction: Interaction<'_>,
) -> Result<TrajectoryEnsemble> {
    let n = cfg.n;
    let steps = cfg.steps()?;
    if inputs.initial_angles.len() != n || inputs.increments.dim() != (n, steps) {
        return Err(Error::Contract("inputs do not match the config dimensions".into()));
    }
    let gamma = gamma_table(&cfg.coupling);

    let mut angles = Array2::zeros((n, steps + 1));
    for i in 0..n {
        angles[[i, 0]] = crate::torus::wrap_unchecked(inputs.initial_angles[i]);
    }
    let mut drift = vec![0.0f64; n];
    let mut terms: Vec<f64> = Vec::with_capacity(n);

    for s in 0..steps {
        let state: Vec<f64> = (0..n).map(|i| angles[[i, s]]).collect();
        compute_drifts(cfg, &gamma, &interaction, &state, s as f64 * cfg.dt, &mut drift, &mut terms)?;
        for i in 0..n {
            let next = state[i] + drift[i] * cfg.dt + inputs.increments[[i, s]];
            angles[[i, s + 1]] = crate::torus::wrap_unchecked(next);
        }
    }

    Ok(TrajectoryEnsemble {
        time_grid: (0..=steps).map(|s| s as f64 * cfg.dt).collect(),
        angles,
        increments: inputs.increments.clone(),
        initial_angles: inputs.initial_angles.clone(),
        labels: inputs.labels.clone(),
        dt: cfg.dt,
        seed: cfg.seed,
    })
}

fn distinct_l(gamma: &[(i64, i64, Complex64)]) -> Vec<i64> {
    let mut v: Vec<i64> = gamma.iter().map(|&(_, l, _)| l).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Simulate the particle system on the given graph, drawing all randomness
/// from the config seed.
pub fn simulate_particle_system(cfg: &SimConfig, graph: &Graph) -> Result<TrajectoryEnsemble> {
    let inputs = draw_inputs(cfg, false)?;
    simulate_particle_system_with_inputs(cfg, graph, &inputs)
}

/// As `simulate_particle_system` but with externally drawn inputs, so that
/// multiple systems can share one noise realization.
pub fn simulate_particle_system_with_inputs(
    cfg: &SimConfig,
    graph: &Graph,
    inputs: &SimInputs,
) -> Result<TrajectoryEnsemble> {
    if graph.n() != cfg.n {
        return Err(Error::Config(format!(
            "graph has {} vertices but the config asks for {} particles",
            graph.n(),
            cfg.n
        )));
    }
    let interaction = if graph.is_complete() && !cfg.force_direct && !cfg.deterministic_reduction {
        Interaction::FastComplete
    } else {
        Interaction::Direct { graph }
    };
    integrate(cfg, inputs, interaction)
}

/// The annealed system: every ξ_{ij} replaced by p, the diagonal included.
pub fn simulate_annealed(cfg: &SimConfig, p: f64) -> Result<TrajectoryEnsemble> {
    let inputs = draw_inputs(cfg, false)?;
    simulate_annealed_with_inputs(cfg, p, &inputs)
}

pub fn simulate_annealed_with_inputs(
    cfg: &SimConfig,
    p: f64,
    inputs: &SimInputs,
) -> Result<TrajectoryEnsemble> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("edge density {p} outside [0,1]")));
    }
    integrate(cfg, inputs, Interaction::Annealed { p })
}

/// Coupled non-linear copies: particle i is driven by the solved density
/// field through ∫ W(U_i, y) ∫ Γ(θ^i, θ') μ^y(dθ') dy, with the Brownian
/// increments, initial angles and labels given in `inputs`.
pub fn simulate_coupled_copies(
    cfg: &SimConfig,
    w: &Graphon,
    field: &LabeledDensityField,
    inputs: &SimInputs,
) -> Result<TrajectoryEnsemble> {
    let labels = inputs
        .labels
        .as_ref()
        .ok_or_else(|| Error::Contract("coupled copies need labels in the inputs".into()))?;
    if labels.len() != cfg.n {
        return Err(Error::Contract("label count does not match the config".into()));
    }
    let steps = cfg.steps()?;
    let t_solved = *field.time_grid().last().unwrap();
    if steps as f64 * cfg.dt > t_solved + 1e-9 {
        return Err(Error::Contract(format!(
            "field solved up to t={t_solved} but the run needs t={}",
            steps as f64 * cfg.dt
        )));
    }
    let m = field.m_classes();
    let cell_w = Array2::from_shape_fn((cfg.n, m), |(i, b)| w.avg_over_cell_y(labels[i], b, m));
    integrate(cfg, inputs, Interaction::Field { field, cell_w })
}

/// μⁿ_t = (1/n) Σ_j δ_{θ^j_t} at grid index `t_index`.
pub fn empirical_measure(ens: &TrajectoryEnsemble, t_index: usize) -> Result<EmpiricalMeasure> {
    if t_index >= ens.angles.ncols() {
        return Err(Error::Contract(format!(
            "time index {t_index} out of range 0..{}",
            ens.angles.ncols()
        )));
    }
    EmpiricalMeasure::from_values(&ens.angles.column(t_index).to_vec())
}

/// √E_n[ sup_t d(θ^{i,n}_t, θ^i_t)² ]: the square root of the mean over
/// particles of the squared sup-discrepancy between the two runs.
pub fn lln_estimator(a: &TrajectoryEnsemble, b: &TrajectoryEnsemble) -> Result<f64> {
    if a.n() != b.n() || a.time_grid != b.time_grid {
        return Err(Error::Contract("ensembles have different shapes or grids".into()));
    }
    let pairs: Result<Vec<TrajectoryPair>> = (0..a.n())
        .map(|i| {
            let path_a: Result<Vec<_>> =
                a.angles.row(i).iter().map(|&v| crate::torus::wrap_angle(v)).collect();
            let path_b: Result<Vec<_>> =
                b.angles.row(i).iter().map(|&v| crate::torus::wrap_angle(v)).collect();
            TrajectoryPair::new(a.time_grid.clone(), path_a?, path_b?)
        })
        .collect();
    coupled_sup_distance(&pairs?)
}
