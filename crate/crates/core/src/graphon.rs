//! Graphon representations, cut-norms, cut-distances, W-random sampling and
//! the graph <-> graphon embedding.
//!
//! The cut norm of an n×n matrix A is (1/n²) max over S,T ⊆ [n] of
//! |Σ_{i∈S,j∈T} A_ij|, computed exactly up to n = 16 by enumerating S and
//! optimizing T in closed form. The ∞→1 norm max over ±1 signs is equivalent
//! to the cut norm within a factor 4 and is estimated by alternating sign
//! maximization with restarts (exact by enumeration at small n). Cut
//! distances between step graphons minimize the cut norm of the difference
//! over block relabelings.

use crate::error::{Error, Result};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

/// Matrix size cap for exact cut-norm / ∞→1 enumeration.
pub const EXACT_NORM_CAP: usize = 16;
/// Block count cap for exact permutation enumeration in the cut distance.
pub const EXACT_PERM_CAP: usize = 10;
/// Cap on the common refinement of two step graphons; above it both are
/// resampled onto this fixed grid by cell averaging.
pub const REFINEMENT_CAP: usize = 120;

/// A symmetric kernel on [0,1]² with values in [0,1].
#[derive(Clone)]
pub enum Graphon {
    Constant(f64),
    /// Piecewise constant on a uniform grid of right-open cells.
    Step(Array2<f64>),
    /// W(x,y) = q(x)·q(y) for a monotone quantile function q with values in (0,1).
    Rank1(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Graphon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Graphon::Constant(p) => write!(f, "Graphon::Constant({p})"),
            Graphon::Step(b) => write!(f, "Graphon::Step({} blocks)", b.nrows()),
            Graphon::Rank1(_) => write!(f, "Graphon::Rank1(..)"),
            Graphon::Custom(_) => write!(f, "Graphon::Custom(..)"),
        }
    }
}

impl Graphon {
    pub fn constant(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("graphon value {p} outside [0,1]")));
        }
        Ok(Graphon::Constant(p))
    }

    pub fn step(blocks: Array2<f64>) -> Result<Self> {
        let n = blocks.nrows();
        if blocks.ncols() != n || n == 0 {
            return Err(Error::Domain("step graphon needs a nonempty square matrix".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let v = blocks[[i, j]];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Domain(format!("block value {v} outside [0,1]")));
                }
                if (v - blocks[[j, i]]).abs() > 1e-12 {
                    return Err(Error::Domain("step graphon blocks must be symmetric".into()));
                }
            }
        }
        Ok(Graphon::Step(blocks))
    }

    pub fn rank1(quantile: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Self {
        Graphon::Rank1(quantile)
    }

    pub fn custom(eval: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>) -> Self {
        Graphon::Custom(eval)
    }

    /// Pointwise evaluation; step graphons use right-open cells.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Graphon::Constant(p) => *p,
            Graphon::Step(b) => {
                let n = b.nrows();
                let i = ((x * n as f64).floor() as usize).min(n - 1);
                let j = ((y * n as f64).floor() as usize).min(n - 1);
                b[[i, j]]
            }
            Graphon::Rank1(q) => q(x) * q(y),
            Graphon::Custom(f) => f(x, y),
        }
    }

    /// Average of W over the cell [a/m,(a+1)/m) × [b/m,(b+1)/m).
    pub fn cell_average(&self, a: usize, b: usize, m: usize) -> f64 {
        match self {
            Graphon::Constant(p) => *p,
            Graphon::Step(blocks) => {
                let wa = overlap_weights(a, m, blocks.nrows());
                let wb = overlap_weights(b, m, blocks.nrows());
                let mut acc = 0.0;
                for &(i, wi) in &wa {
                    for &(j, wj) in &wb {
                        acc += wi * wj * blocks[[i, j]];
                    }
                }
                acc
            }
            Graphon::Rank1(q) => avg_1d(|x| q(x), a, m) * avg_1d(|x| q(x), b, m),
            Graphon::Custom(f) => {
                const Q: usize = 16;
                let mut acc = 0.0;
                for u in 0..Q {
                    for v in 0..Q {
                        let x = (a as f64 + (u as f64 + 0.5) / Q as f64) / m as f64;
                        let y = (b as f64 + (v as f64 + 0.5) / Q as f64) / m as f64;
                        acc += f(x, y);
                    }
                }
                acc / (Q * Q) as f64
            }
        }
    }

    /// Average of W(x, ·) over the cell [b/m,(b+1)/m).
    pub fn avg_over_cell_y(&self, x: f64, b: usize, m: usize) -> f64 {
        match self {
            Graphon::Constant(p) => *p,
            Graphon::Step(blocks) => {
                let n = blocks.nrows();
                let i = ((x * n as f64).floor() as usize).min(n - 1);
                overlap_weights(b, m, n).iter().map(|&(j, w)| w * blocks[[i, j]]).sum()
            }
            Graphon::Rank1(q) => q(x) * avg_1d(|y| q(y), b, m),
            Graphon::Custom(f) => avg_1d(|y| f(x, y), b, m),
        }
    }

    /// The cell-averaged m×m discretization used by the labeled solvers.
    pub fn cell_matrix(&self, m: usize) -> Array2<f64> {
        Array2::from_shape_fn((m, m), |(a, b)| self.cell_average(a, b, m))
    }

    /// Block matrix of a step-representable graphon.
    fn step_blocks(&self) -> Result<Array2<f64>> {
        match self {
            Graphon::Constant(p) => Ok(Array2::from_elem((1, 1), *p)),
            Graphon::Step(b) => Ok(b.clone()),
            _ => Err(Error::Contract("cut distance requires step or constant graphons".into())),
        }
    }
}

/// Overlap of grid cell `a` (grid of m cells) with each of n blocks,
/// normalized to weights summing to 1.
fn overlap_weights(a: usize, m: usize, n: usize) -> Vec<(usize, f64)> {
    let lo = a as f64 / m as f64;
    let hi = (a + 1) as f64 / m as f64;
    let mut out = Vec::new();
    let first = ((lo * n as f64).floor() as usize).min(n - 1);
    let last = (((hi * n as f64).ceil() as usize).max(first + 1)).min(n);
    for i in first..last {
        let blo = i as f64 / n as f64;
        let bhi = (i + 1) as f64 / n as f64;
        let ov = (hi.min(bhi) - lo.max(blo)).max(0.0);
        if ov > 0.0 {
            out.push((i, ov * m as f64));
        }
    }
    out
}

fn avg_1d(f: impl Fn(f64) -> f64, a: usize, m: usize) -> f64 {
    const Q: usize = 32;
    let mut acc = 0.0;
    for u in 0..Q {
        acc += f((a as f64 + (u as f64 + 0.5) / Q as f64) / m as f64);
    }
    acc / Q as f64
}

/// Symmetric adjacency matrix with zero diagonal, entries in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adj: Array2<f64>,
}

impl Graph {
    pub fn new(adj: Array2<f64>) -> Result<Self> {
        let n = adj.nrows();
        if adj.ncols() != n || n == 0 {
            return Err(Error::Domain("adjacency matrix must be square and nonempty".into()));
        }
        for i in 0..n {
            if adj[[i, i]] != 0.0 {
                return Err(Error::Domain(format!("nonzero diagonal at vertex {i}")));
            }
            for j in 0..n {
                let v = adj[[i, j]];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Domain(format!("edge weight {v} outside [0,1]")));
                }
                if v != adj[[j, i]] {
                    return Err(Error::Domain("adjacency matrix must be symmetric".into()));
                }
            }
        }
        Ok(Self { adj })
    }

    pub fn complete(n: usize) -> Self {
        let mut adj = Array2::ones((n, n));
        for i in 0..n {
            adj[[i, i]] = 0.0;
        }
        Self { adj }
    }

    pub fn empty(n: usize) -> Self {
        Self { adj: Array2::zeros((n, n)) }
    }

    pub fn n(&self) -> usize {
        self.adj.nrows()
    }

    pub fn adj(&self) -> &Array2<f64> {
        &self.adj
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adj[[i, j]]
    }

    /// Relabel vertices: adj'[i][j] = adj[perm[i]][perm[j]].
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        let adj = Array2::from_shape_fn((n, n), |(i, j)| self.adj[[perm[i], perm[j]]]);
        Self { adj }
    }

    pub fn is_complete(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| self.adj[[i, j]] == if i == j { 0.0 } else { 1.0 }))
    }

    /// Write as edge list: header `n=<count>`, then `i j [weight]` (0-indexed).
    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "n={}", self.n())?;
        for i in 0..self.n() {
            for j in i + 1..self.n() {
                let w = self.adj[[i, j]];
                if w != 0.0 {
                    if w == 1.0 {
                        writeln!(f, "{i} {j}")?;
                    } else {
                        writeln!(f, "{i} {j} {w}")?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Read either the edge-list format (header `n=<count>`) or a dense CSV matrix.
    pub fn read_file(path: &Path) -> Result<Self> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let lines: Vec<String> = f.lines().collect::<std::io::Result<_>>()?;
        if lines.is_empty() {
            return Err(Error::Format { line: 1, msg: "empty graph file".into() });
        }
        if let Some(rest) = lines[0].trim().strip_prefix("n=") {
            let n: usize = rest
                .trim()
                .parse()
                .map_err(|_| Error::Format { line: 1, msg: format!("bad vertex count {rest:?}") })?;
            if n == 0 {
                return Err(Error::Format { line: 1, msg: "vertex count must be positive".into() });
            }
            let mut adj = Array2::zeros((n, n));
            for (idx, line) in lines.iter().enumerate().skip(1) {
                let lineno = idx + 1;
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() < 2 || parts.len() > 3 {
                    return Err(Error::Format { line: lineno, msg: format!("expected `i j [w]`, got {line:?}") });
                }
                let i: usize = parts[0]
                    .parse()
                    .map_err(|_| Error::Format { line: lineno, msg: format!("bad vertex {:?}", parts[0]) })?;
                let j: usize = parts[1]
                    .parse()
                    .map_err(|_| Error::Format { line: lineno, msg: format!("bad vertex {:?}", parts[1]) })?;
                let w: f64 = if parts.len() == 3 {
                    parts[2]
                        .parse()
                        .map_err(|_| Error::Format { line: lineno, msg: format!("bad weight {:?}", parts[2]) })?
                } else {
                    1.0
                };
                if i >= n || j >= n {
                    return Err(Error::Format { line: lineno, msg: format!("vertex out of range in {line:?}") });
                }
                adj[[i, j]] = w;
                adj[[j, i]] = w;
            }
            Graph::new(adj)
        } else {
            let n = lines.iter().filter(|l| !l.trim().is_empty()).count();
            let mut adj = Array2::zeros((n, n));
            let mut row = 0usize;
            for (idx, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let vals: Vec<&str> = line.split(',').collect();
                if vals.len() != n {
                    return Err(Error::Format {
                        line: idx + 1,
                        msg: format!("expected {n} comma-separated values, got {}", vals.len()),
                    });
                }
                for (col, v) in vals.iter().enumerate() {
                    adj[[row, col]] = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::Format { line: idx + 1, msg: format!("bad entry {v:?}") })?;
                }
                row += 1;
            }
            Graph::new(adj)
        }
    }

    pub fn write_csv_matrix(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.n()).map(|j| format!("{}", self.adj[[i, j]])).collect();
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Embed a finite graph as a step graphon on the uniform n-cell grid.
pub fn step_graphon(g: &Graph) -> Graphon {
    Graphon::Step(g.adj().clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Independent Bernoulli edges with success probability W(U_i, U_j).
    Binary,
    /// Edge weights set to W(U_i, U_j) directly.
    Weighted,
}

/// Sample a W-random graph on n vertices: IID uniform labels U_i, then edges
/// from W(U_i, U_j). Returns the graph and the labels.
pub fn sample_w_random_graph(
    w: &Graphon,
    n: usize,
    seed: u64,
    mode: SampleMode,
) -> Result<(Graph, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Domain("cannot sample a graph on 0 vertices".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let mut adj = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let p = w.eval(labels[i], labels[j]);
            let e = match mode {
                SampleMode::Binary => {
                    if rng.gen::<f64>() < p {
                        1.0
                    } else {
                        0.0
                    }
                }
                SampleMode::Weighted => p,
            };
            adj[[i, j]] = e;
            adj[[j, i]] = e;
        }
    }
    Ok((Graph { adj }, labels))
}

/// ±1 sign vectors witnessing an ∞→1 value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignPair {
    pub s: Vec<i8>,
    pub t: Vec<i8>,
}

fn bilinear(a: &Array2<f64>, s: &[i8], t: &[i8]) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += a[[i, j]] * t[j] as f64;
        }
        acc += row * s[i] as f64;
    }
    acc
}

/// Exact cut norm by S-enumeration (Gray code) with closed-form optimal T.
pub fn cut_norm_exact(a: &Array2<f64>) -> Result<f64> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::Contract("cut norm needs a nonempty square matrix".into()));
    }
    if n > EXACT_NORM_CAP {
        return Err(Error::SizeCap(format!(
            "exact cut norm capped at n={EXACT_NORM_CAP}, got {n}; use the heuristic"
        )));
    }
    let mut col = vec![0.0f64; n];
    let mut best = 0.0f64;
    for k in 1u64..(1u64 << n) {
        let g = k ^ (k >> 1);
        let prev = (k - 1) ^ ((k - 1) >> 1);
        let bit = (g ^ prev).trailing_zeros() as usize;
        let sign = if (g >> bit) & 1 == 1 { 1.0 } else { -1.0 };
        for j in 0..n {
            col[j] += sign * a[[bit, j]];
        }
        let mut pos = 0.0;
        let mut neg = 0.0;
        for &c in &col {
            if c > 0.0 {
                pos += c;
            } else {
                neg -= c;
            }
        }
        best = best.max(pos).max(neg);
    }
    Ok(best / (n * n) as f64)
}

/// Exact ∞→1 norm (normalized by 1/n²) with a sign witness, by enumerating t.
pub fn inf_to_one_norm_exact(a: &Array2<f64>) -> Result<(f64, SignPair)> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::Contract("∞→1 norm needs a nonempty square matrix".into()));
    }
    if n > EXACT_NORM_CAP {
        return Err(Error::SizeCap(format!(
            "exact ∞→1 norm capped at n={EXACT_NORM_CAP}, got {n}"
        )));
    }
    // t_0 fixed to +1: the value is invariant under a global sign flip of t.
    let mut t = vec![1i8; n];
    let mut r: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[[i, j]]).sum()).collect();
    let value = |r: &[f64]| r.iter().map(|x| x.abs()).sum::<f64>();
    let mut best = value(&r);
    let mut best_t = t.clone();
    if n > 1 {
        for k in 1u64..(1u64 << (n - 1)) {
            let g = k ^ (k >> 1);
            let prev = (k - 1) ^ ((k - 1) >> 1);
            let bit = (g ^ prev).trailing_zeros() as usize + 1;
            let old = t[bit] as f64;
            t[bit] = -t[bit];
            for i in 0..n {
                r[i] -= 2.0 * old * a[[i, bit]];
            }
            let v = value(&r);
            if v > best {
                best = v;
                best_t = t.clone();
            }
        }
    }
    // recompute the witness rows and the certified value
    let s: Vec<i8> = (0..n)
        .map(|i| {
            let row: f64 = (0..n).map(|j| a[[i, j]] * best_t[j] as f64).sum();
            if row >= 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    let certified = bilinear(a, &s, &best_t) / (n * n) as f64;
    Ok((certified, SignPair { s, t: best_t }))
}

/// Heuristic ∞→1 lower bound by alternating sign maximization with restarts.
/// The returned value is certified by its witness.
pub fn inf_to_one_norm_heuristic(
    a: &Array2<f64>,
    restarts: usize,
    seed: u64,
) -> Result<(f64, SignPair)> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::Contract("∞→1 norm needs a nonempty square matrix".into()));
    }
    if restarts == 0 {
        return Err(Error::Domain("need at least one restart".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    let mut best_pair = SignPair { s: vec![1; n], t: vec![1; n] };
    for _ in 0..restarts {
        let mut t: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        let mut s = vec![1i8; n];
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..200 {
            for i in 0..n {
                let row: f64 = (0..n).map(|j| a[[i, j]] * t[j] as f64).sum();
                s[i] = if row >= 0.0 { 1 } else { -1 };
            }
            for j in 0..n {
                let col: f64 = (0..n).map(|i| a[[i, j]] * s[i] as f64).sum();
                t[j] = if col >= 0.0 { 1 } else { -1 };
            }
            let v = bilinear(a, &s, &t);
            if v <= prev {
                break;
            }
            prev = v;
        }
        let v = bilinear(a, &s, &t);
        if v > best {
            best = v;
            best_pair = SignPair { s: s.clone(), t: t.clone() };
        }
    }
    Ok((best / (n * n) as f64, best_pair))
}

/// ∞→1 norm: exact enumeration up to the size cap, heuristic above it.
pub fn inf_to_one_norm(a: &Array2<f64>, restarts: usize, seed: u64) -> Result<(f64, SignPair)> {
    if a.nrows() <= EXACT_NORM_CAP {
        inf_to_one_norm_exact(a)
    } else {
        inf_to_one_norm_heuristic(a, restarts, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutDistanceMode {
    /// Enumerate all block permutations (block count ≤ 10).
    Exact,
    /// Best-of-restarts pairwise-swap hill climbing.
    LocalSearch,
}

/// Result of a step-graphon cut-distance computation.
#[derive(Debug, Clone)]
pub struct CutDistanceReport {
    /// Achieved minimum of the cut norm of the difference over relabelings
    /// (an upper bound in heuristic mode).
    pub value: f64,
    /// Blocks of the common refinement on which it was evaluated.
    pub blocks: usize,
    /// 17/sqrt(log n) slack between the graph-level and graphon-level cut
    /// distances; None where log(blocks) < 1 makes the bound vacuous.
    pub labeling_slack: Option<f64>,
}

fn refine_blocks(b: &Array2<f64>, target: usize) -> Array2<f64> {
    let n = b.nrows();
    if target % n == 0 {
        Array2::from_shape_fn((target, target), |(i, j)| b[[i * n / target, j * n / target]])
    } else {
        // cell-averaged resampling onto the target grid
        Array2::from_shape_fn((target, target), |(i, j)| {
            let wi = overlap_weights(i, target, n);
            let wj = overlap_weights(j, target, n);
            let mut acc = 0.0;
            for &(bi, vi) in &wi {
                for &(bj, vj) in &wj {
                    acc += vi * vj * b[[bi, bj]];
                }
            }
            acc
        })
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Cut norm of a difference matrix: exact below the cap, ∞→1 heuristic above.
fn cut_eval(diff: &Array2<f64>, restarts: usize, seed: u64) -> f64 {
    if diff.nrows() <= EXACT_NORM_CAP {
        cut_norm_exact(diff).expect("within cap")
    } else {
        inf_to_one_norm_heuristic(diff, restarts, seed).expect("nonempty").0
    }
}

fn permuted_diff(a: &Array2<f64>, b: &Array2<f64>, perm: &[usize]) -> Array2<f64> {
    let n = a.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] - b[[perm[i], perm[j]]])
}

/// Cut distance between two step graphons: refine to a common grid, then
/// minimize the cut norm of the difference over block relabelings.
pub fn cut_distance_step(
    u: &Graphon,
    v: &Graphon,
    mode: CutDistanceMode,
    seed: u64,
) -> Result<CutDistanceReport> {
    let a0 = u.step_blocks()?;
    let b0 = v.step_blocks()?;
    let (na, nb) = (a0.nrows(), b0.nrows());
    let l = na / gcd(na, nb) * nb;
    let target = if l <= REFINEMENT_CAP { l } else { REFINEMENT_CAP };
    let a = refine_blocks(&a0, target);
    let b = refine_blocks(&b0, target);
    let n = target;
    let slack = if (n as f64).ln() >= 1.0 { Some(17.0 / (n as f64).ln().sqrt()) } else { None };

    // A constant graphon is invariant under relabeling, and the cut norm is
    // invariant under simultaneous row/column permutations, so no search is
    // needed when either side is constant.
    if na == 1 || nb == 1 {
        let diff = &a - &b;
        let value = cut_eval(&diff, 50, seed);
        return Ok(CutDistanceReport { value, blocks: n, labeling_slack: slack });
    }

    match mode {
        CutDistanceMode::Exact => {
            if n > EXACT_PERM_CAP {
                return Err(Error::SizeCap(format!(
                    "exact cut distance capped at {EXACT_PERM_CAP} blocks, got {n}; use local search"
                )));
            }
            let mut best = f64::INFINITY;
            let mut perm: Vec<usize> = (0..n).collect();
            // iterative Heap's algorithm
            let mut c = vec![0usize; n];
            best = best.min(cut_eval(&permuted_diff(&a, &b, &perm), 50, seed));
            let mut i = 0;
            while i < n {
                if c[i] < i {
                    if i % 2 == 0 {
                        perm.swap(0, i);
                    } else {
                        perm.swap(c[i], i);
                    }
                    best = best.min(cut_eval(&permuted_diff(&a, &b, &perm), 50, seed));
                    c[i] += 1;
                    i = 0;
                } else {
                    c[i] = 0;
                    i += 1;
                }
            }
            Ok(CutDistanceReport { value: best, blocks: n, labeling_slack: slack })
        }
        CutDistanceMode::LocalSearch => {
            let restarts = 20;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut best = f64::INFINITY;
            for _ in 0..restarts {
                let mut perm: Vec<usize> = (0..n).collect();
                // Fisher-Yates shuffle
                for i in (1..n).rev() {
                    let j = rng.gen_range(0..=i);
                    perm.swap(i, j);
                }
                let inner_seed = rng.gen::<u64>();
                let mut cur = cut_eval(&permuted_diff(&a, &b, &perm), 20, inner_seed);
                let mut stale = 0usize;
                'climb: loop {
                    for i in 0..n {
                        for j in i + 1..n {
                            perm.swap(i, j);
                            let v = cut_eval(&permuted_diff(&a, &b, &perm), 20, inner_seed);
                            if v < cur {
                                cur = v;
                                stale = 0;
                            } else {
                                perm.swap(i, j);
                                stale += 1;
                                if stale >= n * n {
                                    break 'climb;
                                }
                            }
                        }
                    }
                    if stale > 0 {
                        break;
                    }
                }
                best = best.min(cur);
            }
            Ok(CutDistanceReport { value: best, blocks: n, labeling_slack: slack })
        }
    }
}

/// Monte-Carlo mean and standard error of a sample of distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStdErr {
    pub mean: f64,
    pub std_error: f64,
}

pub fn delta_expectation(samples: &[f64]) -> Result<MeanStdErr> {
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std_error = if samples.len() > 1 {
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(MeanStdErr { mean, std_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Unpruned 2^n × 2^n oracle for the cut norm.
    fn cut_norm_bruteforce(a: &Array2<f64>) -> f64 {
        let n = a.nrows();
        let mut best = 0.0f64;
        for s in 0u32..(1 << n) {
            for t in 0u32..(1 << n) {
                let mut acc = 0.0;
                for i in 0..n {
                    if (s >> i) & 1 == 1 {
                        for j in 0..n {
                            if (t >> j) & 1 == 1 {
                                acc += a[[i, j]];
                            }
                        }
                    }
                }
                best = best.max(acc.abs());
            }
        }
        best / (n * n) as f64
    }

    fn random_matrix(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, n), |_| rng.gen::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn cut_norm_trivial() {
        assert_eq!(cut_norm_exact(&Array2::zeros((3, 3))).unwrap(), 0.0);
        assert!((cut_norm_exact(&Array2::ones((3, 3))).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cut_norm_matches_bruteforce() {
        for seed in 0..20 {
            let mut a = random_matrix(5, seed);
            a.mapv_inplace(|x| if x >= 0.0 { 1.0 } else { -1.0 });
            let fast = cut_norm_exact(&a).unwrap();
            let brute = cut_norm_bruteforce(&a);
            assert!((fast - brute).abs() < 1e-13, "seed={seed} fast={fast} brute={brute}");
        }
    }

    #[test]
    fn cut_norm_cap() {
        assert!(matches!(cut_norm_exact(&Array2::zeros((17, 17))), Err(Error::SizeCap(_))));
    }

    #[test]
    fn inf_to_one_trivial() {
        let (v, _) = inf_to_one_norm_exact(&Array2::zeros((4, 4))).unwrap();
        assert_eq!(v, 0.0);
        let (v, w) = inf_to_one_norm_exact(&Array2::ones((4, 4))).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!(w.s.iter().all(|&x| x == 1) && w.t.iter().all(|&x| x == 1));
    }

    #[test]
    fn heuristic_close_to_exact_and_certified() {
        let mut wins = 0;
        for seed in 0..30 {
            let a = random_matrix(10, seed);
            let (exact, _) = inf_to_one_norm_exact(&a).unwrap();
            let (heur, wit) = inf_to_one_norm_heuristic(&a, 50, seed + 1000).unwrap();
            assert!(heur <= exact + 1e-12);
            let replay = bilinear(&a, &wit.s, &wit.t) / 100.0;
            assert!((replay - heur).abs() < 1e-12);
            if heur >= 0.95 * exact {
                wins += 1;
            }
        }
        assert!(wins >= 29, "heuristic hit 0.95×exact only {wins}/30 times");
    }

    #[test]
    fn norm_sandwich() {
        for seed in 0..30 {
            let a = random_matrix(7, seed);
            let cut = cut_norm_exact(&a).unwrap();
            let (one, _) = inf_to_one_norm_exact(&a).unwrap();
            assert!(cut <= one + 1e-12, "cut={cut} one={one}");
            assert!(one <= 4.0 * cut + 1e-12, "cut={cut} one={one}");
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(40))]
        #[test]
        fn norm_properties_hold_on_random_matrices(
            entries in proptest::collection::vec(-1.0f64..=1.0, 36),
            seed in 0u64..1000,
        ) {
            let a = Array2::from_shape_vec((6, 6), entries).unwrap();
            let cut = cut_norm_exact(&a).unwrap();
            let (one, witness) = inf_to_one_norm_exact(&a).unwrap();
            proptest::prop_assert!(cut <= one + 1e-12);
            proptest::prop_assert!(one <= 4.0 * cut + 1e-12);
            let (heur, hw) = inf_to_one_norm_heuristic(&a, 10, seed).unwrap();
            proptest::prop_assert!(heur <= one + 1e-12);
            // both witnesses certify their reported values
            for (value, w) in [(one, &witness), (heur, &hw)] {
                let mut total = 0.0;
                for i in 0..6 {
                    for j in 0..6 {
                        total += a[[i, j]] * f64::from(w.s[i]) * f64::from(w.t[j]);
                    }
                }
                proptest::prop_assert!((total / 36.0 - value).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn step_embedding() {
        let g = Graph::complete(2);
        let w = step_graphon(&g);
        assert_eq!(w.eval(0.1, 0.7), 1.0);
        assert_eq!(w.eval(0.1, 0.2), 0.0);

        let empty = step_graphon(&Graph::empty(3));
        assert_eq!(empty.eval(0.5, 0.5), 0.0);

        let (er, _) = sample_w_random_graph(&Graphon::Constant(0.5), 4, 9, SampleMode::Binary).unwrap();
        let ws = step_graphon(&er);
        for i in 0..4 {
            for j in 0..4 {
                let x = (i as f64 + 0.5) / 4.0;
                let y = (j as f64 + 0.5) / 4.0;
                assert_eq!(ws.eval(x, y), er.weight(i, j));
            }
        }
    }

    #[test]
    fn w_random_sampling() {
        let (complete, _) = sample_w_random_graph(&Graphon::Constant(1.0), 6, 1, SampleMode::Binary).unwrap();
        assert!(complete.is_complete());
        let (empty, _) = sample_w_random_graph(&Graphon::Constant(0.0), 6, 1, SampleMode::Binary).unwrap();
        assert_eq!(empty, Graph::empty(6));
        assert!(sample_w_random_graph(&Graphon::Constant(0.5), 0, 1, SampleMode::Binary).is_err());

        // binomial concentration at p = 0.5, n = 200
        let n = 200;
        let (g, _) = sample_w_random_graph(&Graphon::Constant(0.5), n, 42, SampleMode::Binary).unwrap();
        let pairs = (n * (n - 1) / 2) as f64;
        let edges: f64 = (0..n).map(|i| (i + 1..n).map(|j| g.weight(i, j)).sum::<f64>()).sum();
        let density = edges / pairs;
        assert!((density - 0.5).abs() <= 3.0 * 0.5 / pairs.sqrt(), "density={density}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let w = Graphon::Constant(0.3);
        let (g1, l1) = sample_w_random_graph(&w, 50, 7, SampleMode::Binary).unwrap();
        let (g2, l2) = sample_w_random_graph(&w, 50, 7, SampleMode::Binary).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(l1, l2);
    }

    #[test]
    fn cut_distance_identity_and_constants() {
        let b = Array2::from_shape_vec((2, 2), vec![0.2, 0.8, 0.8, 0.4]).unwrap();
        let u = Graphon::step(b).unwrap();
        let r = cut_distance_step(&u, &u, CutDistanceMode::Exact, 0).unwrap();
        assert!(r.value.abs() < 1e-14);

        let p = Graphon::Constant(0.2);
        let q = Graphon::Constant(0.9);
        let r = cut_distance_step(&p, &q, CutDistanceMode::Exact, 0).unwrap();
        assert!((r.value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn cut_distance_matches_permutation_bruteforce() {
        for seed in 0..3 {
            let (ga, _) = sample_w_random_graph(&Graphon::Constant(0.5), 5, seed, SampleMode::Binary).unwrap();
            let (gb, _) =
                sample_w_random_graph(&Graphon::Constant(0.5), 5, seed + 100, SampleMode::Binary).unwrap();
            let u = step_graphon(&ga);
            let v = step_graphon(&gb);
            let fast = cut_distance_step(&u, &v, CutDistanceMode::Exact, 0).unwrap().value;

            // brute force over all 120 labelings with the unpruned cut-norm oracle
            let a = ga.adj();
            let mut best = f64::INFINITY;
            let mut perm = [0usize, 1, 2, 3, 4];
            permute_all(&mut perm, 5, &mut |p| {
                let diff = Array2::from_shape_fn((5, 5), |(i, j)| a[[i, j]] - gb.adj()[[p[i], p[j]]]);
                best = best.min(cut_norm_bruteforce(&diff));
            });
            assert!((fast - best).abs() < 1e-12, "seed={seed} fast={fast} brute={best}");
        }
    }

    fn permute_all(perm: &mut [usize; 5], k: usize, f: &mut impl FnMut(&[usize; 5])) {
        if k <= 1 {
            f(perm);
            return;
        }
        for i in 0..k {
            permute_all(perm, k - 1, f);
            if k % 2 == 0 {
                perm.swap(i, k - 1);
            } else {
                perm.swap(0, k - 1);
            }
        }
    }

    #[test]
    fn relabeling_invariance() {
        for (n, seed) in [(5usize, 1u64), (6, 2), (7, 3)] {
            let (g, _) = sample_w_random_graph(&Graphon::Constant(0.5), n, seed, SampleMode::Binary).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 50);
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                perm.swap(i, j);
            }
            let u = step_graphon(&g);
            let v = step_graphon(&g.permuted(&perm));
            let r = cut_distance_step(&u, &v, CutDistanceMode::Exact, 0).unwrap();
            assert!(r.value.abs() < 1e-14, "n={n} value={}", r.value);
        }
    }

    #[test]
    fn local_search_upper_bounds_exact() {
        for seed in 0..3 {
            let (ga, _) = sample_w_random_graph(&Graphon::Constant(0.4), 6, seed, SampleMode::Binary).unwrap();
            let (gb, _) =
                sample_w_random_graph(&Graphon::Constant(0.6), 6, seed + 10, SampleMode::Binary).unwrap();
            let u = step_graphon(&ga);
            let v = step_graphon(&gb);
            let exact = cut_distance_step(&u, &v, CutDistanceMode::Exact, 0).unwrap().value;
            let heur = cut_distance_step(&u, &v, CutDistanceMode::LocalSearch, seed).unwrap().value;
            assert!(heur >= exact - 1e-12);
            assert!(heur <= exact + 0.5, "local search far off: exact={exact} heur={heur}");
        }
    }

    #[test]
    fn delta_expectation_cases() {
        assert_eq!(delta_expectation(&[0.0, 0.0]).unwrap().mean, 0.0);
        let single = delta_expectation(&[0.4]).unwrap();
        assert_eq!(single.mean, 0.4);
        assert_eq!(single.std_error, 0.0);
        let two = delta_expectation(&[0.1, 0.3]).unwrap();
        assert!((two.mean - 0.2).abs() < 1e-15);
        assert!(two.std_error > 0.0);
        assert!(delta_expectation(&[]).is_err());
    }

    #[test]
    fn graph_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let (g, _) = sample_w_random_graph(&Graphon::Constant(0.5), 12, 5, SampleMode::Binary).unwrap();

        let edge_path = dir.path().join("g.edges");
        g.write_edge_list(&edge_path).unwrap();
        assert_eq!(Graph::read_file(&edge_path).unwrap(), g);

        let csv_path = dir.path().join("g.csv");
        g.write_csv_matrix(&csv_path).unwrap();
        assert_eq!(Graph::read_file(&csv_path).unwrap(), g);
    }

    #[test]
    fn bad_graph_file_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.edges");
        std::fs::write(&path, "n=3\n0 1\n0 zzz\n").unwrap();
        match Graph::read_file(&path) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn cell_averages() {
        let p = Graphon::Constant(0.25);
        assert_eq!(p.cell_average(0, 1, 4), 0.25);

        let b = Array2::from_shape_vec((2, 2), vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let w = Graphon::step(b).unwrap();
        // cell (0,0) of a 1-cell grid averages the whole kernel
        assert!((w.cell_average(0, 0, 1) - 0.5).abs() < 1e-12);
        // compatible grid is exact
        assert_eq!(w.cell_average(0, 1, 2), 1.0);
        assert_eq!(w.cell_average(0, 0, 2), 0.0);
    }
}
