//! Independent reference engines: exact discrete optimal transport and Monte-Carlo set masses.

mod network_simplex;

use crate::domain::SourceMeasure;
use crate::error::{Error, Result};
use crate::geometry::Pt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const MAX_COST_ENTRIES: usize = 4_000_000;

#[derive(Clone, Debug)]
pub struct DiscreteOtProblem {
    pub source_weights: Vec<f64>,
    pub target_weights: Vec<f64>,
    /// Row-major `ns × nt`.
    pub cost: Vec<f64>,
}

impl DiscreteOtProblem {
    pub fn new(source_weights: Vec<f64>, target_weights: Vec<f64>, cost: Vec<f64>) -> Result<Self> {
        let entries = source_weights.len() * target_weights.len();
        if entries > MAX_COST_ENTRIES {
            return Err(Error::SizeCap { entries, cap: MAX_COST_ENTRIES });
        }
        if source_weights.is_empty() || target_weights.is_empty() || cost.len() != entries {
            return Err(Error::Config("cost matrix shape does not match the weights".into()));
        }
        for (name, w) in [("source", &source_weights), ("target", &target_weights)] {
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Config(format!("{name} weights must be finite and nonnegative")));
            }
            let s: f64 = w.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("{name} weights sum to {s}, not 1")));
            }
        }
        if cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("cost matrix has non-finite entries".into()));
        }
        Ok(DiscreteOtProblem { source_weights, target_weights, cost })
    }

    pub fn from_points<S, T>(
        src: &[S],
        a: Vec<f64>,
        tgt: &[T],
        b: Vec<f64>,
        c: impl Fn(&S, &T) -> f64 + Sync,
    ) -> Result<Self>
    where
        S: Sync,
        T: Sync,
    {
        let entries = src.len() * tgt.len();
        if entries > MAX_COST_ENTRIES {
            return Err(Error::SizeCap { entries, cap: MAX_COST_ENTRIES });
        }
        let cost: Vec<f64> = src
            .par_iter()
            .flat_map_iter(|s| tgt.iter().map(|t| c(s, t)).collect::<Vec<_>>())
            .collect();
        Self::new(a, b, cost)
    }

    pub fn ns(&self) -> usize {
        self.source_weights.len()
    }
    pub fn nt(&self) -> usize {
        self.target_weights.len()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanEntry {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OtSolution {
    pub cost: f64,
    pub plan: Vec<PlanEntry>,
    pub dual_u: Vec<f64>,
    pub dual_v: Vec<f64>,
    /// `primal − dual` objective values.
    pub gap: f64,
    pub pivots: usize,
}

impl OtSolution {
    /// Largest violation of `u_i + v_j <= c_ij`.
    pub fn dual_infeasibility(&self, p: &DiscreteOtProblem) -> f64 {
        let nt = p.nt();
        let mut worst: f64 = 0.0;
        for i in 0..p.ns() {
            for j in 0..nt {
                worst = worst.max(self.dual_u[i] + self.dual_v[j] - p.cost[i * nt + j]);
            }
        }
        worst
    }

    pub fn marginals(&self, ns: usize, nt: usize) -> (Vec<f64>, Vec<f64>) {
        let mut a = vec![0.0; ns];
        let mut b = vec![0.0; nt];
        for e in &self.plan {
            a[e.i] += e.mass;
            b[e.j] += e.mass;
        }
        (a, b)
    }
}

/// Exact optimal plan and dual potentials.
pub fn solve_discrete_ot(p: &DiscreteOtProblem) -> Result<OtSolution> {
    let ns = p.ns();
    let nt = p.nt();
    let mut demand = p.target_weights.clone();
    let imbalance = p.source_weights.iter().sum::<f64>() - demand.iter().sum::<f64>();
    let last = demand.len() - 1;
    demand[last] = (demand[last] + imbalance).max(0.0);

    let max_pivots = 200 * (ns + nt) * ((ns * nt) as f64).sqrt().max(10.0) as usize;
    let res = network_simplex::Simplex::new(&p.source_weights, &demand, &p.cost).run(max_pivots)?;

    let mut plan = Vec::new();
    let mut primal = 0.0;
    for i in 0..ns {
        for j in 0..nt {
            let f = res.flow[i * nt + j];
            if f > 0.0 {
                plan.push(PlanEntry { i, j, mass: f });
                primal += f * p.cost[i * nt + j];
            }
        }
    }
    let dual_u: Vec<f64> = (0..ns).map(|i| -res.pi[i]).collect();
    let dual_v: Vec<f64> = (0..nt).map(|j| res.pi[ns + j]).collect();
    let dual: f64 = dual_u.iter().zip(&p.source_weights).map(|(u, a)| u * a).sum::<f64>()
        + dual_v.iter().zip(&p.target_weights).map(|(v, b)| v * b).sum::<f64>();
    Ok(OtSolution { cost: primal, plan, dual_u, dual_v, gap: primal - dual, pivots: res.pivots })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

const CHUNK: usize = 1 << 16;

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// `n` independent samples of `μ`, reproducible per seed regardless of thread count.
pub fn sample_measure(mu: &SourceMeasure, n: usize, seed: u64) -> Vec<Pt> {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(move |_| mu.sample(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// Monte-Carlo estimate of `μ({x : predicate(x)})`.
pub fn mc_mass(mu: &SourceMeasure, predicate: impl Fn(Pt) -> bool + Sync, n: usize, seed: u64) -> McEstimate {
    let chunks = n.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).filter(|_| predicate(mu.sample(&mut rng))).count()
        })
        .sum();
    let p = hits as f64 / n as f64;
    McEstimate { estimate: p, stderr: (p * (1.0 - p) / n as f64).sqrt(), samples: n }
}
