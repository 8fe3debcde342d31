//! Pseudo-spectral solver for the labeled non-linear Fokker-Planck equation
//!
//!   ∂_t μ^x = ½ ∂²_θ μ^x − ∂_θ[μ^x F] − ∂_θ[μ^x ∫_I W(x,y) ∫ Γ(·,θ') μ^y(dθ') dy],
//!
//! its label average, the McKean-Vlasov special case (constant graphon, one
//! class) and the stationary Kuramoto self-consistency equation.
//!
//! Conventions, used everywhere in this module:
//!   μ̂_k = ∫ e^{−ikθ} μ(dθ),   μ(θ) = (1/2π) Σ_k μ̂_k e^{ikθ},
//! and Γ, F carry the same e^{ikθ} basis as the coupling tables. The moment
//! system is
//!   d/dt μ̂^x_k = −k²/2 μ̂^x_k − i k Σ_m V^x_m μ̂^x_{k−m},
//! with drift field V^x_m = F_m + Σ_l Γ_{m,l} (1/M) Σ_b W̄[x][b] μ̂^b_{−l}.
//! Mode 0 has zero derivative, so mass is conserved exactly. The default
//! integrator applies the exact factor e^{−k²Δt/2} to the diffusion part and
//! explicit Euler to the transport part, removing the k² stiffness.

use crate::coupling::{CouplingSpec, InitialLaw};
use crate::error::{Error, Result};
use crate::graphon::Graphon;
use crate::torus::{d_t_classes, wrap_angle, Angle};
use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::{Read as IoRead, Write as IoWrite};
use std::path::Path;

/// Modified Bessel function of the first kind I_ν(x), integer order, by power
/// series with relative term cutoff 1e-15. Valid for |x| ≤ 60.
pub fn bessel_i(nu: u32, x: f64) -> f64 {
    let half = x / 2.0;
    // leading term (x/2)^ν / ν!
    let mut term = 1.0;
    for m in 1..=nu {
        term *= half / m as f64;
    }
    let mut sum = term;
    let mut m = 1.0;
    loop {
        term *= half * half / (m * (m + nu as f64));
        sum += term;
        if term.abs() <= 1e-15 * sum.abs() {
            break;
        }
        m += 1.0;
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Exact integrating factor on the diffusion term, explicit transport.
    SemiImplicit,
    /// Fully explicit Euler; requires dt ≤ 2/K².
    Explicit,
}

#[derive(Debug, Clone)]
pub struct FpConfig {
    pub m_classes: usize,
    pub k_max: usize,
    pub t_end: f64,
    pub dt: f64,
    pub integrator: Integrator,
}

impl FpConfig {
    pub fn new(m_classes: usize, k_max: usize, t_end: f64, dt: f64) -> Self {
        Self { m_classes, k_max, t_end, dt, integrator: Integrator::SemiImplicit }
    }

    fn steps(&self) -> Result<usize> {
        if self.dt <= 0.0 || self.t_end <= 0.0 {
            return Err(Error::Config("dt and t_end must be positive".into()));
        }
        let ratio = self.t_end / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Config(format!("t_end/dt = {ratio} is not an integer")));
        }
        Ok(steps as usize)
    }
}

/// Initial trigonometric moments per label class.
#[derive(Debug, Clone)]
pub enum FieldInit {
    /// The same law in every class.
    Shared(InitialLaw),
    /// Explicit per-class moment arrays of length 2K+1.
    PerClass(Vec<Vec<Complex64>>),
}

/// Per-class trigonometric moments of the solution on a uniform time grid.
#[derive(Debug, Clone)]
pub struct LabeledDensityField {
    m_classes: usize,
    k_max: usize,
    dt: f64,
    time_grid: Vec<f64>,
    /// One M × (2K+1) array per time step.
    coeffs: Vec<Array2<Complex64>>,
    cell_graphon: Array2<f64>,
}

impl LabeledDensityField {
    pub fn m_classes(&self) -> usize {
        self.m_classes
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn cell_graphon(&self) -> &Array2<f64> {
        &self.cell_graphon
    }

    /// Column index of mode k.
    pub fn mode_index(&self, k: i64) -> usize {
        (k + self.k_max as i64) as usize
    }

    pub fn coeffs_at_step(&self, step: usize) -> &Array2<Complex64> {
        &self.coeffs[step]
    }

    pub fn steps(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Moments at an arbitrary time, linearly interpolated between grid steps.
    pub fn moments_at(&self, t: f64) -> Result<Array2<Complex64>> {
        let t_last = *self.time_grid.last().unwrap();
        if t < -1e-12 || t > t_last + 1e-9 {
            return Err(Error::Contract(format!("time {t} outside the solved range [0, {t_last}]")));
        }
        let x = (t / self.dt).clamp(0.0, (self.coeffs.len() - 1) as f64);
        let lo = x.floor() as usize;
        if lo + 1 >= self.coeffs.len() {
            return Ok(self.coeffs[self.coeffs.len() - 1].clone());
        }
        let w = x - lo as f64;
        if w == 0.0 {
            return Ok(self.coeffs[lo].clone());
        }
        Ok(&self.coeffs[lo] * Complex64::new(1.0 - w, 0.0)
            + &self.coeffs[lo + 1] * Complex64::new(w, 0.0))
    }

    /// Uniform average over label classes: one (2K+1) moment row per time step.
    pub fn average(&self) -> Array2<Complex64> {
        let cols = 2 * self.k_max + 1;
        let mut out = Array2::zeros((self.coeffs.len(), cols));
        let inv = 1.0 / self.m_classes as f64;
        for (t, c) in self.coeffs.iter().enumerate() {
            for k in 0..cols {
                let mut acc = Complex64::new(0.0, 0.0);
                for x in 0..self.m_classes {
                    acc += c[[x, k]];
                }
                out[[t, k]] = acc * inv;
            }
        }
        out
    }

    /// Order parameter |μ̂_1| of the label-averaged field at every time step.
    pub fn order_parameter_series(&self) -> Vec<f64> {
        let avg = self.average();
        (0..avg.nrows()).map(|t| order_parameter(avg.row(t), self.k_max)).collect()
    }

    /// Binary layout: M, K, steps, dt, then complex coefficients as
    /// interleaved little-endian 64-bit float pairs in (time, class, mode) order.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&(self.m_classes as u64).to_le_bytes())?;
        f.write_all(&(self.k_max as u64).to_le_bytes())?;
        f.write_all(&(self.steps() as u64).to_le_bytes())?;
        f.write_all(&self.dt.to_le_bytes())?;
        for c in &self.coeffs {
            for x in 0..self.m_classes {
                for k in 0..2 * self.k_max + 1 {
                    f.write_all(&c[[x, k]].re.to_le_bytes())?;
                    f.write_all(&c[[x, k]].im.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut u = [0u8; 8];
        let mut read_u64 = |f: &mut dyn IoRead| -> Result<u64> {
            f.read_exact(&mut u)?;
            Ok(u64::from_le_bytes(u))
        };
        let m = read_u64(&mut f)? as usize;
        let k_max = read_u64(&mut f)? as usize;
        let steps = read_u64(&mut f)? as usize;
        let mut b = [0u8; 8];
        f.read_exact(&mut b)?;
        let dt = f64::from_le_bytes(b);
        let cols = 2 * k_max + 1;
        let mut coeffs = Vec::with_capacity(steps + 1);
        for _ in 0..=steps {
            let mut arr = Array2::zeros((m, cols));
            for x in 0..m {
                for k in 0..cols {
                    let mut re = [0u8; 8];
                    let mut im = [0u8; 8];
                    f.read_exact(&mut re)?;
                    f.read_exact(&mut im)?;
                    arr[[x, k]] = Complex64::new(f64::from_le_bytes(re), f64::from_le_bytes(im));
                }
            }
            coeffs.push(arr);
        }
        let time_grid = (0..=steps).map(|s| s as f64 * dt).collect();
        Ok(Self { m_classes: m, k_max, dt, time_grid, coeffs, cell_graphon: Array2::zeros((m, m)) })
    }

    /// CSV of per-time order parameters of the label-averaged field.
    pub fn write_order_parameter_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "t,r")?;
        for (t, r) in self.time_grid.iter().zip(self.order_parameter_series()) {
            writeln!(f, "{t},{r}")?;
        }
        Ok(())
    }
}

/// Sum of complex terms in a value-determined order, so the result does not
/// depend on the order the terms were produced in.
fn sorted_sum(terms: &mut Vec<Complex64>) -> Complex64 {
    terms.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut acc = Complex64::new(0.0, 0.0);
    for t in terms.iter() {
        acc += *t;
    }
    acc
}

/// Solve the labeled Fokker-Planck system for the given graphon and coupling.
pub fn solve_labeled_fp(
    w: &Graphon,
    coupling: &CouplingSpec,
    init: &FieldInit,
    cfg: &FpConfig,
) -> Result<LabeledDensityField> {
    let m = cfg.m_classes;
    let k_max = cfg.k_max;
    if m == 0 {
        return Err(Error::Config("need at least one label class".into()));
    }
    if (k_max as i64) < coupling.max_frequency() {
        return Err(Error::Config(format!(
            "truncation order {k_max} below the coupling's max frequency {}",
            coupling.max_frequency()
        )));
    }
    let steps = cfg.steps()?;
    if cfg.integrator == Integrator::Explicit && cfg.dt > 2.0 / (k_max * k_max) as f64 {
        return Err(Error::Config(format!(
            "explicit integrator unstable: dt = {} exceeds 2/K² = {}",
            cfg.dt,
            2.0 / (k_max * k_max) as f64
        )));
    }
    let cols = 2 * k_max + 1;
    let idx = |k: i64| (k + k_max as i64) as usize;

    let mut state: Array2<Complex64> = match init {
        FieldInit::Shared(law) => {
            let row: Vec<Complex64> = (-(k_max as i64)..=k_max as i64).map(|k| law.moment(k)).collect();
            Array2::from_shape_fn((m, cols), |(_, c)| row[c])
        }
        FieldInit::PerClass(rows) => {
            if rows.len() != m || rows.iter().any(|r| r.len() != cols) {
                return Err(Error::Config("per-class init must be M rows of length 2K+1".into()));
            }
            Array2::from_shape_fn((m, cols), |(x, c)| rows[x][c])
        }
    };

    let wbar = w.cell_matrix(m);
    let inv_m = Complex64::new(1.0 / m as f64, 0.0);

    // distinct l values in the interaction support
    let l_values: Vec<i64> = {
        let mut v: Vec<i64> = coupling.interaction_coeffs().keys().map(|&(_, l)| l).collect();
        v.sort_unstable();
        v.dedup();
        v
    };

    let diffusion: Vec<f64> =
        (0..cols).map(|c| (-((c as i64 - k_max as i64).pow(2) as f64) * cfg.dt / 2.0).exp()).collect();

    let mut coeffs = Vec::with_capacity(steps + 1);
    coeffs.push(state.clone());
    let mut terms: Vec<Complex64> = Vec::with_capacity(m);

    for step in 0..steps {
        let mut next = Array2::zeros((m, cols));
        for x in 0..m {
            // I_l = (1/M) Σ_b W̄[x][b] μ̂^b_{−l}, summed order-independently so
            // that label permutations act bit-exactly on the solution
            let mut interaction_moments: BTreeMap<i64, Complex64> = BTreeMap::new();
            for &l in &l_values {
                terms.clear();
                for b in 0..m {
                    terms.push(Complex64::new(wbar[[x, b]], 0.0) * state[[b, idx(-l)]]);
                }
                interaction_moments.insert(l, sorted_sum(&mut terms) * inv_m);
            }
            // drift field modes V_m
            let mut v_modes: BTreeMap<i64, Complex64> = coupling.drift_coeffs().clone();
            for (&(km, l), &g) in coupling.interaction_coeffs() {
                *v_modes.entry(km).or_insert(Complex64::new(0.0, 0.0)) += g * interaction_moments[&l];
            }
            for k in -(k_max as i64)..=k_max as i64 {
                let c_old = state[[x, idx(k)]];
                let mut transport = Complex64::new(0.0, 0.0);
                for (&mm, &v) in &v_modes {
                    let shift = k - mm;
                    if shift.abs() <= k_max as i64 {
                        transport += v * state[[x, idx(shift)]];
                    }
                }
                let nk = Complex64::new(0.0, -(k as f64)) * transport;
                let updated = match cfg.integrator {
                    Integrator::SemiImplicit => (c_old + nk * cfg.dt) * diffusion[idx(k)],
                    Integrator::Explicit => {
                        c_old + (Complex64::new(-(k * k) as f64 / 2.0, 0.0) * c_old + nk) * cfg.dt
                    }
                };
                next[[x, idx(k)]] = updated;
            }
        }
        for v in next.iter() {
            if !v.re.is_finite() || !v.im.is_finite() || v.norm() > 2.0 {
                return Err(Error::Numerical {
                    step: step + 1,
                    msg: format!("moment blew up to {v}"),
                });
            }
        }
        state = next;
        coeffs.push(state.clone());
    }

    let time_grid = (0..=steps).map(|s| s as f64 * cfg.dt).collect();
    Ok(LabeledDensityField { m_classes: m, k_max, dt: cfg.dt, time_grid, coeffs, cell_graphon: wbar })
}

/// McKean-Vlasov special case: constant graphon p with a single label class.
pub fn solve_mckean_vlasov(
    p: f64,
    coupling: &CouplingSpec,
    init: &FieldInit,
    k_max: usize,
    t_end: f64,
    dt: f64,
) -> Result<LabeledDensityField> {
    let w = Graphon::constant(p)?;
    solve_labeled_fp(&w, coupling, init, &FpConfig::new(1, k_max, t_end, dt))
}

/// |μ̂_1| of one moment row.
pub fn order_parameter(moments: ArrayView1<Complex64>, k_max: usize) -> f64 {
    assert!(k_max >= 1, "order parameter needs K >= 1");
    moments[(1 + k_max as i64) as usize].norm()
}

/// Largest fixed point in [0,1] of r = I1(2·pK·r)/I0(2·pK·r), by bisection;
/// 0 when the equation has no positive root (pK ≤ 1).
pub fn kuramoto_self_consistent_r(pk: f64, tol: f64) -> f64 {
    assert!(pk >= 0.0 && tol > 0.0);
    let g = |r: f64| bessel_i(1, 2.0 * pk * r) / bessel_i(0, 2.0 * pk * r) - r;
    let mut lo = tol;
    let mut hi = 1.0;
    if g(lo) <= 0.0 {
        return 0.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Moment-metric surrogate for the path distance between two solved fields:
/// max over time of Σ_{k≠0} |μ̂_k − ν̂_k| / k², per class (combined as the
/// labeled distance) or on the label-averaged fields. Dominated by a
/// bounded-Lipschitz-type distance, not the exact Wasserstein metric.
pub fn field_distance(
    a: &LabeledDensityField,
    b: &LabeledDensityField,
    per_class: bool,
) -> Result<f64> {
    if a.m_classes != b.m_classes || a.k_max != b.k_max || a.coeffs.len() != b.coeffs.len() {
        return Err(Error::Contract("field shapes do not match".into()));
    }
    let k_max = a.k_max as i64;
    let row_metric = |ra: ArrayView1<Complex64>, rb: ArrayView1<Complex64>| -> f64 {
        let mut acc = 0.0;
        for k in -k_max..=k_max {
            if k == 0 {
                continue;
            }
            let i = (k + k_max) as usize;
            acc += (ra[i] - rb[i]).norm() / (k * k) as f64;
        }
        acc
    };
    if per_class {
        let mut per = vec![0.0f64; a.m_classes];
        for t in 0..a.coeffs.len() {
            for x in 0..a.m_classes {
                per[x] = per[x].max(row_metric(a.coeffs[t].row(x), b.coeffs[t].row(x)));
            }
        }
        d_t_classes(&per)
    } else {
        let (aa, ba) = (a.average(), b.average());
        let mut best = 0.0f64;
        for t in 0..aa.nrows() {
            best = best.max(row_metric(aa.row(t), ba.row(t)));
        }
        Ok(best)
    }
}

/// Draw n angles from the density reconstructed from one moment row, by
/// inverse-CDF sampling on a 1024-point grid with nonnegativity clamping.
pub fn sample_density(
    moments: ArrayView1<Complex64>,
    k_max: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<Angle>> {
    const GRID: usize = 1024;
    let mut density = vec![0.0f64; GRID];
    for (j, d) in density.iter_mut().enumerate() {
        let theta = TAU * j as f64 / GRID as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in -(k_max as i64)..=k_max as i64 {
            acc += moments[(k + k_max as i64) as usize] * Complex64::from_polar(1.0, k as f64 * theta);
        }
        let rho = acc.re / TAU;
        if rho < -1e-6 {
            return Err(Error::Numerical {
                step: 0,
                msg: format!("reconstructed density dips to {rho} at θ={theta}"),
            });
        }
        *d = rho.max(0.0);
    }
    let total: f64 = density.iter().sum();
    if total <= 0.0 {
        return Err(Error::Numerical { step: 0, msg: "reconstructed density is zero".into() });
    }
    let mut cdf = vec![0.0f64; GRID + 1];
    for j in 0..GRID {
        cdf[j + 1] = cdf[j] + density[j] / total;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        // binary search for the cell containing u, then linear interpolation
        let mut lo = 0usize;
        let mut hi = GRID;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if cdf[mid] <= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let span = cdf[lo + 1] - cdf[lo];
        let frac = if span > 0.0 { (u - cdf[lo]) / span } else { 0.5 };
        out.push(wrap_angle(TAU * (lo as f64 + frac) / GRID as f64)?);
    }
    Ok(out)
}
