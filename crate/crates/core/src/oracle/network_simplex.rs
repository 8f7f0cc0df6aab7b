//! Primal network simplex for the dense transportation problem.
//!
//! Nodes `0..ns` are sources, `ns..ns+nt` are sinks and one extra root closes the spanning tree
//! through artificial arcs. Entering arcs are chosen by block search; the leaving-arc rule keeps
//! the tree strongly feasible. After each pivot the re-hung subtree is walked once to refresh
//! parents, depths and potentials.

use crate::error::{Error, Result};

const TREE: i8 = 0;
const LOWER: i8 = 1;

pub(crate) struct Simplex<'a> {
    ns: usize,
    nt: usize,
    root: usize,
    n_real: usize,
    cost: &'a [f64],
    art_cost: f64,
    art_up: Vec<bool>,
    flow: Vec<f64>,
    state: Vec<i8>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_up: Vec<bool>,
    depth: Vec<u32>,
    pi: Vec<f64>,
    adj: Vec<Vec<usize>>,
    block: usize,
    next_arc: usize,
    pub pivots: usize,
}

pub(crate) struct SimplexResult {
    pub flow: Vec<f64>,
    pub pi: Vec<f64>,
    pub pivots: usize,
}

impl<'a> Simplex<'a> {
    pub fn new(supply: &[f64], demand: &[f64], cost: &'a [f64]) -> Self {
        let ns = supply.len();
        let nt = demand.len();
        let n = ns + nt;
        let root = n;
        let n_real = ns * nt;
        let max_c = cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let art_cost = (max_c + 1.0) * (n as f64 + 1.0);
        let mut s = Simplex {
            ns,
            nt,
            root,
            n_real,
            cost,
            art_cost,
            art_up: vec![false; n],
            flow: vec![0.0; n_real + n],
            state: vec![LOWER; n_real + n],
            parent: vec![root; n + 1],
            pred: vec![usize::MAX; n + 1],
            pred_up: vec![false; n + 1],
            depth: vec![1; n + 1],
            pi: vec![0.0; n + 1],
            adj: vec![Vec::new(); n + 1],
            block: ((n_real as f64).sqrt() as usize).max(10).min(n_real.max(1)),
            next_arc: 0,
            pivots: 0,
        };
        s.depth[root] = 0;
        for u in 0..n {
            let e = n_real + u;
            s.pred[u] = e;
            s.state[e] = TREE;
            s.adj[u].push(e);
            s.adj[root].push(e);
            if u < ns {
                s.art_up[u] = true;
                s.pred_up[u] = true;
                s.flow[e] = supply[u];
                s.pi[u] = 0.0;
            } else {
                s.art_up[u] = false;
                s.pred_up[u] = false;
                s.flow[e] = demand[u - ns];
                s.pi[u] = art_cost;
            }
        }
        s
    }

    #[inline]
    fn src(&self, e: usize) -> usize {
        if e < self.n_real {
            e / self.nt
        } else {
            let u = e - self.n_real;
            if self.art_up[u] { u } else { self.root }
        }
    }

    #[inline]
    fn tgt(&self, e: usize) -> usize {
        if e < self.n_real {
            self.ns + e % self.nt
        } else {
            let u = e - self.n_real;
            if self.art_up[u] { self.root } else { u }
        }
    }

    #[inline]
    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.n_real {
            self.cost[e]
        } else if self.art_up[e - self.n_real] {
            0.0
        } else {
            self.art_cost
        }
    }

    fn find_entering(&mut self) -> Option<usize> {
        let m = self.n_real;
        if m == 0 {
            return None;
        }
        let mut best = 0.0;
        let mut best_arc = None;
        let mut e = self.next_arc;
        let mut i = e / self.nt;
        let mut j = e % self.nt;
        let mut cnt = self.block;
        for _ in 0..m {
            if self.state[e] == LOWER {
                let c = self.cost[e];
                let pa = self.pi[i];
                let pb = self.pi[self.ns + j];
                let rc = c + pa - pb;
                let tol = 1e-13 * (c.abs() + pa.abs() + pb.abs()).max(1e-300);
                if rc < best && rc < -tol {
                    best = rc;
                    best_arc = Some(e);
                }
            }
            e += 1;
            j += 1;
            if j == self.nt {
                j = 0;
                i += 1;
            }
            if e == m {
                e = 0;
                i = 0;
                j = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if best_arc.is_some() {
                    self.next_arc = e;
                    return best_arc;
                }
                cnt = self.block;
            }
        }
        if best_arc.is_some() {
            self.next_arc = e;
        }
        best_arc
    }

    fn find_join(&self, mut u: usize, mut v: usize) -> usize {
        while u != v {
            if self.depth[u] >= self.depth[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        u
    }

    fn pivot(&mut self, in_arc: usize) {
        let first = self.src(in_arc);
        let second = self.tgt(in_arc);
        let join = self.find_join(first, second);

        let mut delta = f64::INFINITY;
        let mut u_out = usize::MAX;
        let mut from_first = true;
        let mut u = first;
        while u != join {
            if self.pred_up[u] {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    u_out = u;
                    from_first = true;
                }
            }
            u = self.parent[u];
        }
        u = second;
        while u != join {
            if !self.pred_up[u] {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    u_out = u;
                    from_first = false;
                }
            }
            u = self.parent[u];
        }
        debug_assert!(u_out != usize::MAX, "uncapacitated cycle in transportation problem");

        if delta > 0.0 {
            self.flow[in_arc] += delta;
            let mut u = first;
            while u != join {
                let e = self.pred[u];
                if self.pred_up[u] {
                    self.flow[e] -= delta;
                } else {
                    self.flow[e] += delta;
                }
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                let e = self.pred[u];
                if self.pred_up[u] {
                    self.flow[e] += delta;
                } else {
                    self.flow[e] -= delta;
                }
                u = self.parent[u];
            }
        }
        let out_arc = self.pred[u_out];
        self.flow[out_arc] = 0.0;
        let (u_in, v_in) = if from_first { (first, second) } else { (second, first) };

        let p_out = self.parent[u_out];
        remove_arc(&mut self.adj[u_out], out_arc);
        remove_arc(&mut self.adj[p_out], out_arc);
        self.adj[u_in].push(in_arc);
        self.adj[v_in].push(in_arc);
        self.state[in_arc] = TREE;
        self.state[out_arc] = LOWER;

        self.rehang(u_in, v_in, in_arc);
        self.pivots += 1;
    }

    fn rehang(&mut self, u_in: usize, v_in: usize, in_arc: usize) {
        let mut stack = vec![(u_in, v_in, in_arc)];
        while let Some((u, p, e)) = stack.pop() {
            self.parent[u] = p;
            self.pred[u] = e;
            let up = self.src(e) == u;
            self.pred_up[u] = up;
            self.depth[u] = self.depth[p] + 1;
            let c = self.arc_cost(e);
            self.pi[u] = if up { self.pi[p] - c } else { self.pi[p] + c };
            for &f in &self.adj[u] {
                if f == e {
                    continue;
                }
                let w = if self.src(f) == u { self.tgt(f) } else { self.src(f) };
                stack.push((w, u, f));
            }
        }
    }

    pub fn run(mut self, max_pivots: usize) -> Result<SimplexResult> {
        while let Some(e) = self.find_entering() {
            self.pivot(e);
            if self.pivots > max_pivots {
                return Err(Error::Numeric(format!(
                    "network simplex exceeded {max_pivots} pivots"
                )));
            }
        }
        let art_flow: f64 = self.flow[self.n_real..].iter().map(|f| f.abs()).sum();
        if art_flow > 1e-9 {
            return Err(Error::Numeric(format!(
                "transportation problem infeasible: residual artificial flow {art_flow}"
            )));
        }
        Ok(SimplexResult { flow: self.flow, pi: self.pi, pivots: self.pivots })
    }
}

fn remove_arc(list: &mut Vec<usize>, e: usize) {
    if let Some(pos) = list.iter().position(|&f| f == e) {
        list.swap_remove(pos);
    }
}
