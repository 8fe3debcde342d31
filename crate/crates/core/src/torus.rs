//! Angles on the torus T = R/2πZ and distances between torus-valued
//! measures and trajectories.
//!
//! Distances between empirical measures use the geodesic metric
//! d(a, b) = min(|a−b|, 2π−|a−b|), bounded by π. The 2-Wasserstein
//! distance on the circle is computed by sorting both atom lists and
//! minimizing over the n order-preserving cyclic assignments; the
//! 1-Wasserstein distance by the level-shifted CDF formula.

use crate::error::{Error, Result};
use std::f64::consts::{PI, TAU};

/// An angle in [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle(f64);

impl Angle {
    pub fn new(x: f64) -> Result<Self> {
        wrap_angle(x)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Reduce a real number modulo 2π into [0, 2π).
pub fn wrap_angle(x: f64) -> Result<Angle> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite angle {x}")));
    }
    let mut r = x.rem_euclid(TAU);
    // rem_euclid can round up to 2π for tiny negative inputs
    if r >= TAU {
        r = 0.0;
    }
    Ok(Angle(r))
}

/// Wrap an angle that is already known to be finite.
pub(crate) fn wrap_unchecked(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Geodesic distance on the torus, in [0, π].
pub fn geodesic_dist(a: Angle, b: Angle) -> f64 {
    let d = (a.0 - b.0).abs();
    d.min(TAU - d)
}

/// Uniform atomic measure on the torus.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    atoms: Vec<Angle>,
}

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<Angle>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Domain("empirical measure needs at least one atom".into()));
        }
        Ok(Self { atoms })
    }

    pub fn from_values(values: &[f64]) -> Result<Self> {
        let atoms = values.iter().map(|&v| wrap_angle(v)).collect::<Result<Vec<_>>>()?;
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[Angle] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A pair of torus paths on one uniform time grid.
#[derive(Debug, Clone)]
pub struct TrajectoryPair {
    time_grid: Vec<f64>,
    path_a: Vec<Angle>,
    path_b: Vec<Angle>,
}

impl TrajectoryPair {
    pub fn new(time_grid: Vec<f64>, path_a: Vec<Angle>, path_b: Vec<Angle>) -> Result<Self> {
        if time_grid.len() != path_a.len() || time_grid.len() != path_b.len() {
            return Err(Error::Contract("paths and time grid must have equal length".into()));
        }
        if time_grid.is_empty() {
            return Err(Error::Contract("time grid is empty".into()));
        }
        if !time_grid.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Contract("time grid must be strictly increasing".into()));
        }
        Ok(Self { time_grid, path_a, path_b })
    }

    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn endpoints(&self) -> (Angle, Angle) {
        (*self.path_a.last().unwrap(), *self.path_b.last().unwrap())
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Replicate each atom so both lists reach lcm(n, m) entries, preserving the
/// measures exactly, then return both sorted.
fn padded_sorted(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> (Vec<f64>, Vec<f64>) {
    let (n, m) = (mu.len(), nu.len());
    let l = lcm(n, m);
    let mut a: Vec<f64> = Vec::with_capacity(l);
    for atom in &mu.atoms {
        for _ in 0..l / n {
            a.push(atom.0);
        }
    }
    let mut b: Vec<f64> = Vec::with_capacity(l);
    for atom in &nu.atoms {
        for _ in 0..l / m {
            b.push(atom.0);
        }
    }
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    (a, b)
}

/// 2-Wasserstein distance on the circle between two uniform atomic measures,
/// with squared geodesic cost.
pub fn wasserstein2_circle(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    let (a, b) = padded_sorted(mu, nu);
    let n = a.len();
    let mut best = f64::INFINITY;
    for shift in 0..n {
        let mut cost = 0.0;
        for i in 0..n {
            let d = {
                let d = (a[i] - b[(i + shift) % n]).abs();
                d.min(TAU - d)
            };
            cost += d * d;
        }
        if cost < best {
            best = cost;
        }
    }
    (best / n as f64).sqrt()
}

/// 1-Wasserstein distance on the circle via the level-shifted CDF formula:
/// inf over shifts s of ∫ |F_mu − F_nu − s| dθ, s the lower weighted median.
pub fn wasserstein1_circle(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    // events: (angle, mass jump of F_mu − F_nu)
    let wa = 1.0 / mu.len() as f64;
    let wb = 1.0 / nu.len() as f64;
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(mu.len() + nu.len());
    events.extend(mu.atoms.iter().map(|&x| (x.0, wa)));
    events.extend(nu.atoms.iter().map(|&x| (x.0, -wb)));
    events.sort_by(|p, q| p.0.total_cmp(&q.0));

    // piecewise-constant h = F_mu − F_nu on [0, 2π): segments (value, length)
    let mut segments: Vec<(f64, f64)> = Vec::with_capacity(events.len() + 1);
    let mut h = 0.0;
    let mut pos = 0.0;
    let mut i = 0;
    while i < events.len() {
        let theta = events[i].0;
        if theta > pos {
            segments.push((h, theta - pos));
            pos = theta;
        }
        // merge coincident atoms
        while i < events.len() && events[i].0 == theta {
            h += events[i].1;
            i += 1;
        }
    }
    if pos < TAU {
        segments.push((h, TAU - pos));
    }

    // lower weighted median of h values, weighted by segment length
    let mut by_value = segments.clone();
    by_value.sort_by(|p, q| p.0.total_cmp(&q.0));
    let total: f64 = by_value.iter().map(|s| s.1).sum();
    let mut acc = 0.0;
    let mut shift = by_value[0].0;
    for &(v, len) in &by_value {
        acc += len;
        if acc >= total / 2.0 {
            shift = v;
            break;
        }
    }

    segments.iter().map(|&(v, len)| (v - shift).abs() * len).sum()
}

/// Square root of the average over pairs of the squared sup-in-time geodesic
/// discrepancy. Upper-bounds the path-space 2-Wasserstein distance between the
/// two path laws under the synchronous coupling.
pub fn coupled_sup_distance(pairs: &[TrajectoryPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Contract("no trajectory pairs".into()));
    }
    let grid = pairs[0].time_grid.clone();
    let mut acc = 0.0;
    for pair in pairs {
        if pair.time_grid != grid {
            return Err(Error::Contract("trajectory pairs do not share a time grid".into()));
        }
        let sup = pair
            .path_a
            .iter()
            .zip(&pair.path_b)
            .map(|(&a, &b)| geodesic_dist(a, b))
            .fold(0.0f64, f64::max);
        acc += sup * sup;
    }
    Ok((acc / pairs.len() as f64).sqrt())
}

/// Combine per-label-class path distances into the labeled distance:
/// sqrt of the mean of squares over the M uniform label cells.
pub fn d_t_classes(per_class_distances: &[f64]) -> Result<f64> {
    if per_class_distances.is_empty() {
        return Err(Error::Contract("no class distances".into()));
    }
    let mut acc = 0.0;
    for &d in per_class_distances {
        if d < 0.0 {
            return Err(Error::Contract(format!("negative distance {d}")));
        }
        acc += d * d;
    }
    Ok((acc / per_class_distances.len() as f64).sqrt())
}

pub use std::f64::consts::TAU as TWO_PI;

#[allow(dead_code)]
fn _assert_pi_used() -> f64 {
    PI
}
