//! Random graph generators: complete, Erdős–Rényi, rank-1 inhomogeneous and
//! growing preferential attachment, plus file-backed graphs.

use crate::error::{Error, Result};
use crate::graphon::{sample_w_random_graph, Graph, Graphon, SampleMode};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Clone)]
pub enum GraphKind {
    Complete,
    ErdosRenyi { p: f64 },
    /// Vertex weights g_i from a quantile function with values in (0,1),
    /// edges Bernoulli(g_i·g_j). `deterministic` uses g_i = q(i/n) instead of
    /// q applied to IID uniforms.
    Rank1 { quantile: Arc<dyn Fn(f64) -> f64 + Send + Sync>, deterministic: bool },
    /// Growing preferential attachment: start from a single node; node m+1
    /// connects to each existing i independently with probability
    /// (deg(i)+1)/(m+1), degrees snapshotted before the new node arrives.
    PreferentialAttachment,
    FromFile { path: PathBuf },
}

impl fmt::Debug for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphKind::Complete => write!(f, "Complete"),
            GraphKind::ErdosRenyi { p } => write!(f, "ErdosRenyi(p={p})"),
            GraphKind::Rank1 { deterministic, .. } => write!(f, "Rank1(deterministic={deterministic})"),
            GraphKind::PreferentialAttachment => write!(f, "PreferentialAttachment"),
            GraphKind::FromFile { path } => write!(f, "FromFile({})", path.display()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraphSpec {
    pub kind: GraphKind,
    pub n: usize,
    pub seed: u64,
}

/// A generated graph together with the rank-1 vertex weights when applicable.
#[derive(Debug, Clone)]
pub struct Generated {
    pub graph: Graph,
    pub weights: Option<Vec<f64>>,
}

pub fn generate(spec: &GraphSpec) -> Result<Generated> {
    if spec.n == 0 {
        return Err(Error::Domain("graph needs at least one vertex".into()));
    }
    let n = spec.n;
    match &spec.kind {
        GraphKind::Complete => Ok(Generated { graph: Graph::complete(n), weights: None }),
        GraphKind::ErdosRenyi { p } => {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::Domain(format!("edge probability {p} outside [0,1]")));
            }
            let (graph, _) = sample_w_random_graph(&Graphon::Constant(*p), n, spec.seed, SampleMode::Binary)?;
            Ok(Generated { graph, weights: None })
        }
        GraphKind::Rank1 { quantile, deterministic } => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let weights: Vec<f64> = if *deterministic {
                (1..=n).map(|i| quantile(i as f64 / n as f64)).collect()
            } else {
                (0..n).map(|_| quantile(rng.gen::<f64>())).collect()
            };
            for &g in &weights {
                if !(0.0..=1.0).contains(&g) {
                    return Err(Error::Domain(format!("rank-1 weight {g} outside [0,1]")));
                }
            }
            let mut adj = Array2::zeros((n, n));
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen::<f64>() < weights[i] * weights[j] {
                        adj[[i, j]] = 1.0;
                        adj[[j, i]] = 1.0;
                    }
                }
            }
            Ok(Generated { graph: Graph::new(adj)?, weights: Some(weights) })
        }
        GraphKind::PreferentialAttachment => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut adj = Array2::zeros((n, n));
            let mut deg = vec![0usize; n];
            for m in 1..n {
                // degrees before node m arrives
                let snapshot: Vec<usize> = deg[..m].to_vec();
                for i in 0..m {
                    let p = (snapshot[i] + 1) as f64 / (m + 1) as f64;
                    if rng.gen::<f64>() < p {
                        adj[[i, m]] = 1.0;
                        adj[[m, i]] = 1.0;
                        deg[i] += 1;
                        deg[m] += 1;
                    }
                }
            }
            Ok(Generated { graph: Graph::new(adj)?, weights: None })
        }
        GraphKind::FromFile { path } => Ok(Generated { graph: Graph::read_file(path)?, weights: None }),
    }
}

#[derive(Debug, Clone)]
pub struct DegreeStats {
    /// 2·edges / (n·(n−1)); 0 for n ≤ 1.
    pub density: f64,
    pub degrees: Vec<usize>,
}

pub fn degree_stats(g: &Graph) -> DegreeStats {
    let n = g.n();
    let degrees: Vec<usize> =
        (0..n).map(|i| (0..n).filter(|&j| g.weight(i, j) != 0.0).count()).collect();
    let edge_weight: f64 = (0..n).map(|i| (i + 1..n).map(|j| g.weight(i, j)).sum::<f64>()).sum();
    let density = if n <= 1 { 0.0 } else { 2.0 * edge_weight / (n * (n - 1)) as f64 };
    DegreeStats { density, degrees }
}
