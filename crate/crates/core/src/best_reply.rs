//! Best-reply iteration for transport plus potential and interaction energies.
//!
//! `ν` is carried as a particle cloud, so the pushforward `(B_ν)♯μ` is exact on the samples of
//! `μ`. The first variation of the quadratic interaction only depends on the first two moments
//! of `ν`, which keeps each best response O(1).

use crate::cost::CostModel;
use crate::domain::SourceMeasure;
use crate::error::{Error, Result};
use crate::geometry::Pt;
use crate::level::LevelCurve;
use crate::oracle::{solve_discrete_ot, DiscreteOtProblem};
use crate::quadrature::golden_max;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    /// `α|y − y₀|²/2`.
    Quadratic { alpha: f64, center: Vec<f64> },
    /// `Σ cᵢ yⁱ`, one-dimensional targets only.
    Polynomial { coeffs: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Interaction {
    /// `β|y − z|²/2`.
    Quadratic { beta: f64 },
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSpec {
    pub v: Potential,
    pub w: Interaction,
    pub target_dim: usize,
    /// Closed box `Ȳ`, one `[lo, hi]` per coordinate.
    pub target_box: Vec<[f64; 2]>,
}

impl InteractionSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.target_dim;
        if n == 0 || n > 2 || self.target_box.len() != n {
            return Err(Error::Config(format!("target_dim {n} needs 1 or 2 box intervals")));
        }
        if self.target_box.iter().any(|b| !(b[0] < b[1])) {
            return Err(Error::Config("target box intervals must satisfy lo < hi".into()));
        }
        match &self.v {
            Potential::Quadratic { center, .. } if center.len() != n => {
                Err(Error::Config("potential center dimension mismatch".into()))
            }
            Potential::Polynomial { .. } if n != 1 => Err(Error::Config("polynomial potential needs a 1-D target".into())),
            _ => Ok(()),
        }
    }

    fn v_parts(&self, y: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let n = y.len();
        match &self.v {
            Potential::Quadratic { alpha, center } => {
                let d: Vec<f64> = y.iter().zip(center).map(|(a, b)| a - b).collect();
                let val = 0.5 * alpha * d.iter().map(|t| t * t).sum::<f64>();
                let grad = d.iter().map(|t| alpha * t).collect();
                let mut hess = vec![0.0; n * n];
                for i in 0..n {
                    hess[i * n + i] = *alpha;
                }
                (val, grad, hess)
            }
            Potential::Polynomial { coeffs } => {
                let t = y[0];
                let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for &c in coeffs.iter().rev() {
                    d2 = d2 * t + 2.0 * d1;
                    d1 = d1 * t + v;
                    v = v * t + c;
                }
                (v, vec![d1], vec![d2])
            }
        }
    }

    pub fn w_value(&self, y: &[f64], z: &[f64]) -> f64 {
        match self.w {
            Interaction::Quadratic { beta } => 0.5 * beta * y.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>(),
            Interaction::None => 0.0,
        }
    }

    pub fn beta(&self) -> f64 {
        match self.w {
            Interaction::Quadratic { beta } => beta,
            Interaction::None => 0.0,
        }
    }

    pub fn v_value(&self, y: &[f64]) -> f64 {
        self.v_parts(y).0
    }

    pub fn in_box(&self, y: &[f64]) -> bool {
        y.iter().zip(&self.target_box).all(|(t, b)| *t >= b[0] - 1e-12 && *t <= b[1] + 1e-12)
    }

    fn project(&self, y: &mut [f64]) {
        for (t, b) in y.iter_mut().zip(&self.target_box) {
            *t = t.clamp(b[0], b[1]);
        }
    }

    /// Largest `|W(y,z) − W(z,y)|` over sampled pairs.
    pub fn symmetry_defect(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples)
            .map(|_| {
                let y: Vec<f64> = self.target_box.iter().map(|b| rng.random_range(b[0]..=b[1])).collect();
                let z: Vec<f64> = self.target_box.iter().map(|b| rng.random_range(b[0]..=b[1])).collect();
                (self.w_value(&y, &z) - self.w_value(&z, &y)).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::Config("discrete measure needs matching nonempty points and weights".into()));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Config("discrete measure points must share a dimension and be finite".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("discrete measure weights must be nonnegative".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("discrete measure weights sum to {s}")));
        }
        Ok(DiscreteMeasure { points, weights })
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn dirac(p: Vec<f64>) -> Self {
        DiscreteMeasure { points: vec![p], weights: vec![1.0] }
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (a, b) in m.iter_mut().zip(p) {
                *a += w * b;
            }
        }
        m
    }

    /// `∫|z|² dν`.
    pub fn second_moment(&self) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * p.iter().map(|t| t * t).sum::<f64>()).sum()
    }

    /// Smallest distance between two particles.
    pub fn min_separation(&self) -> f64 {
        if self.dim() == 1 {
            let mut xs: Vec<f64> = self.points.iter().map(|p| p[0]).collect();
            xs.sort_by(f64::total_cmp);
            return xs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        }
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.min(dist(&self.points[i], &self.points[j]));
            }
        }
        best
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Midpoint samples of a source measure on an interval (`(j+½)/N` quantiles) or, in two
/// dimensions, seeded random samples.
pub fn source_samples(mu: &SourceMeasure, n: usize, seed: u64) -> Result<(Vec<Pt>, DiscreteMeasure)> {
    let pts: Vec<Pt> = match mu.domain {
        crate::domain::Domain::Interval { a, b } if mu.is_uniform() => {
            (0..n).map(|j| Pt::new(a + (b - a) * (j as f64 + 0.5) / n as f64, 0.0)).collect()
        }
        _ => crate::oracle::sample_measure(mu, n, seed),
    };
    let coords = pts.iter().map(|p| if mu.domain.dim() == 1 { vec![p.x] } else { vec![p.x, p.y] }).collect();
    Ok((pts, DiscreteMeasure::uniform(coords)?))
}

/// `F[ν]` with its gradient and row-major Hessian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstVariation {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

/// Moments of `ν` needed to evaluate `F[ν]`.
#[derive(Clone, Debug)]
pub struct Field<'a> {
    spec: &'a InteractionSpec,
    mean: Vec<f64>,
    second: f64,
}

impl<'a> Field<'a> {
    pub fn new(spec: &'a InteractionSpec, nu: &DiscreteMeasure) -> Self {
        Field { spec, mean: nu.mean(), second: nu.second_moment() }
    }

    pub fn eval(&self, y: &[f64]) -> FirstVariation {
        let n = y.len();
        let (mut value, mut grad, mut hess) = self.spec.v_parts(y);
        let beta = self.spec.beta();
        if beta != 0.0 {
            let yy: f64 = y.iter().map(|t| t * t).sum();
            let ym: f64 = y.iter().zip(&self.mean).map(|(a, b)| a * b).sum();
            value += 0.5 * beta * (yy - 2.0 * ym + self.second);
            for i in 0..n {
                grad[i] += beta * (y[i] - self.mean[i]);
                hess[i * n + i] += beta;
            }
        }
        FirstVariation { value, grad, hess }
    }
}

/// `F[ν](y) = V(y) + ∫W(y,z)dν(z)` with derivatives.
pub fn first_variation(spec: &InteractionSpec, nu: &DiscreteMeasure, y: &[f64]) -> FirstVariation {
    Field::new(spec, nu).eval(y)
}

fn min_eig(h: &[f64], n: usize) -> f64 {
    if n == 1 {
        return h[0];
    }
    let (a, b, c) = (h[0], 0.5 * (h[1] + h[2]), h[3]);
    0.5 * (a + c) - (0.25 * (a - c).powi(2) + b * b).sqrt()
}

/// Stationary point of `y ↦ c(x,y) + F[ν](y)` in `Ȳ`.
pub fn best_response(cost: &CostModel, field: &Field<'_>, x: Pt) -> Result<Vec<f64>> {
    let spec = field.spec;
    if spec.target_dim == 1 {
        best_response_1d(cost, field, x).map(|y| vec![y])
    } else {
        best_response_2d(cost, field, x)
    }
}

fn best_response_1d(cost: &CostModel, field: &Field<'_>, x: Pt) -> Result<f64> {
    let [lo, hi] = field.spec.target_box[0];
    let g = |y: f64| cost.dy(x, y) + field.eval(&[y]).grad[0];
    let h = |y: f64| cost.dyy(x, y) + field.eval(&[y]).hess[0];
    let (glo, ghi) = (g(lo), g(hi));
    if glo > 0.0 {
        return Err(Error::Hypothesis(format!(
            "best response of x=({}, {}) sits on the lower boundary with inward gradient {glo}",
            x.x, x.y
        )));
    }
    if ghi < 0.0 {
        return Err(Error::Hypothesis(format!(
            "best response of x=({}, {}) sits on the upper boundary with inward gradient {ghi}",
            x.x, x.y
        )));
    }
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    let (mut a, mut b) = (lo, hi);
    let mut y = 0.5 * (a + b);
    for _ in 0..200 {
        let gy = g(y);
        if gy.abs() <= 1e-13 {
            return Ok(y);
        }
        if gy < 0.0 {
            a = y;
        } else {
            b = y;
        }
        let hy = h(y);
        let newton = y - gy / hy;
        y = if hy > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if b - a <= 4.0 * f64::EPSILON * (1.0 + a.abs().max(b.abs())) {
            break;
        }
    }
    if g(y).abs() > 1e-10 {
        return Err(Error::Numeric(format!("best response did not converge at x=({}, {})", x.x, x.y)));
    }
    Ok(y)
}

fn best_response_2d(cost: &CostModel, field: &Field<'_>, x: Pt) -> Result<Vec<f64>> {
    let spec = field.spec;
    let phi = |y: &[f64]| cost.value_nd(x, y) + field.eval(y).value;
    let grad = |y: &[f64]| {
        let c = cost.grad_y(x, y);
        let f = field.eval(y).grad;
        vec![c[0] + f[0], c[1] + f[1]]
    };
    let mut y: Vec<f64> = spec.target_box.iter().map(|b| 0.5 * (b[0] + b[1])).collect();
    let mut radius = spec.target_box.iter().map(|b| b[1] - b[0]).fold(0.0, f64::max);
    for _ in 0..200 {
        let g = grad(&y);
        if g[0].hypot(g[1]) <= 1e-13 {
            break;
        }
        let ch = cost.hess_y(x, &y);
        let fh = field.eval(&y).hess;
        let hm: Vec<f64> = ch.iter().zip(&fh).map(|(a, b)| a + b).collect();
        let det = hm[0] * hm[3] - hm[1] * hm[2];
        let mut d = if det > 0.0 && hm[0] > 0.0 {
            vec![-(hm[3] * g[0] - hm[1] * g[1]) / det, -(-hm[2] * g[0] + hm[0] * g[1]) / det]
        } else {
            vec![-g[0], -g[1]]
        };
        let norm = d[0].hypot(d[1]);
        if norm > radius {
            d[0] *= radius / norm;
            d[1] *= radius / norm;
        }
        let mut cand = vec![y[0] + d[0], y[1] + d[1]];
        spec.project(&mut cand);
        if phi(&cand) <= phi(&y) {
            if (cand[0] - y[0]).hypot(cand[1] - y[1]) < 1e-16 {
                break;
            }
            y = cand;
            radius = (2.0 * radius).min(1e3);
        } else {
            radius *= 0.25;
            if radius < 1e-16 {
                break;
            }
        }
    }
    let g = grad(&y);
    if g[0].hypot(g[1]) > 1e-10 {
        // on the boundary: the gradient must point outward, otherwise the boundary hypothesis fails
        for (i, b) in spec.target_box.iter().enumerate() {
            let at_lo = (y[i] - b[0]).abs() < 1e-12 && g[i] > 1e-10;
            let at_hi = (y[i] - b[1]).abs() < 1e-12 && g[i] < -1e-10;
            if at_lo || at_hi {
                return Err(Error::Hypothesis(format!(
                    "best response of x=({}, {}) sits on the boundary with inward gradient",
                    x.x, x.y
                )));
            }
        }
        return Err(Error::Numeric(format!("best response did not converge at x=({}, {})", x.x, x.y)));
    }
    Ok(y)
}

/// `(B_ν)♯μ` on the samples of `μ`.
pub fn iterate(cost: &CostModel, spec: &InteractionSpec, mu_points: &[Pt], mu_weights: &[f64], nu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    let field = Field::new(spec, nu);
    let points: Vec<Vec<f64>> = mu_points.par_iter().map(|&x| best_response(cost, &field, x)).collect::<Result<_>>()?;
    Ok(DiscreteMeasure { points, weights: mu_weights.to_vec() })
}

/// 1-Wasserstein distance: quantile coupling in 1-D, exact LP otherwise.
pub fn w1(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Config(format!("dimension mismatch {} vs {}", a.dim(), b.dim())));
    }
    if a.dim() == 1 {
        let mut ev: Vec<(f64, f64)> = a.points.iter().zip(&a.weights).map(|(p, w)| (p[0], *w)).collect();
        ev.extend(b.points.iter().zip(&b.weights).map(|(p, w)| (p[0], -*w)));
        ev.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut diff = 0.0;
        let mut total = 0.0;
        for w in ev.windows(2) {
            diff += w[0].1;
            total += diff.abs() * (w[1].0 - w[0].0);
        }
        return Ok(total);
    }
    let p = DiscreteOtProblem::from_points(&a.points, a.weights.clone(), &b.points, b.weights.clone(), |s, t| dist(s, t))?;
    Ok(solve_discrete_ot(&p)?.cost)
}

/// Sampled constants behind the contraction estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// Smallest eigenvalue of `D²_yy c`.
    pub eta: f64,
    /// Smallest eigenvalue of `D²F[ν]`.
    pub lambda: f64,
    /// Smallest eigenvalue of `D²_yy c + D²F[ν]`.
    pub convexity_margin: f64,
    /// Bound on the size of the preimage `B_ν⁻¹(y)`.
    pub m_bound: f64,
    /// Smallest Jacobian of `B_ν`.
    pub k_jacobian: f64,
    /// Empirical Lipschitz constant of `ν ↦ DF[ν]` in `L¹` against `W₁`.
    pub c_lipschitz: f64,
    pub mu_sup: f64,
    /// `‖μ̄‖_∞ M C / (k (η+λ))`.
    pub rho: f64,
    pub boundary_ok: bool,
    pub symmetry_defect: f64,
}

impl HypothesisReport {
    pub fn contraction_verified(&self) -> bool {
        self.rho < 1.0 && self.eta + self.lambda > 0.0 && self.boundary_ok
    }
}

fn y_grid(spec: &InteractionSpec, per_dim: usize) -> Vec<Vec<f64>> {
    let axis = |b: [f64; 2]| (0..per_dim).map(move |i| b[0] + (b[1] - b[0]) * i as f64 / (per_dim - 1) as f64);
    if spec.target_dim == 1 {
        axis(spec.target_box[0]).map(|t| vec![t]).collect()
    } else {
        axis(spec.target_box[0]).flat_map(|a| axis(spec.target_box[1]).map(move |b| vec![a, b])).collect()
    }
}

/// `∫_Y |DF[ν₁] − DF[ν₀]| dy` by the trapezoid (1-D) or midpoint (2-D) rule.
pub fn df_l1_distance(spec: &InteractionSpec, nu0: &DiscreteMeasure, nu1: &DiscreteMeasure) -> f64 {
    let (f0, f1) = (Field::new(spec, nu0), Field::new(spec, nu1));
    let diff = |y: &[f64]| {
        let (a, b) = (f0.eval(y).grad, f1.eval(y).grad);
        a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
    };
    if spec.target_dim == 1 {
        let [lo, hi] = spec.target_box[0];
        let n = 2049;
        let h = (hi - lo) / (n - 1) as f64;
        (0..n).map(|i| diff(&[lo + h * i as f64]) * if i == 0 || i == n - 1 { 0.5 * h } else { h }).sum()
    } else {
        let n = 128;
        let [a, b] = [spec.target_box[0], spec.target_box[1]];
        let (hx, hy) = ((a[1] - a[0]) / n as f64, (b[1] - b[0]) / n as f64);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += diff(&[a[0] + hx * (i as f64 + 0.5), b[0] + hy * (j as f64 + 0.5)]);
            }
        }
        s * hx * hy
    }
}

/// Random measure pair around `nu`: a pure shift of one copy and a jittered copy.
pub fn random_pair(spec: &InteractionSpec, nu: &DiscreteMeasure, rng: &mut ChaCha8Rng) -> (DiscreteMeasure, DiscreteMeasure) {
    let span = spec.target_box.iter().map(|b| b[1] - b[0]).fold(f64::INFINITY, f64::min);
    let shift: Vec<f64> = (0..spec.target_dim).map(|_| rng.random_range(-0.1..0.1) * span).collect();
    let jitter = rng.random_range(0.0..0.05) * span;
    let mut make = |shift: &[f64], jitter: f64| {
        let points = nu
            .points
            .iter()
            .map(|p| {
                let mut q: Vec<f64> = p.iter().zip(shift).map(|(a, s)| a + s + jitter * rng.random_range(-1.0..1.0)).collect();
                spec.project(&mut q);
                q
            })
            .collect();
        DiscreteMeasure { points, weights: nu.weights.clone() }
    };
    let a = make(&vec![0.0; spec.target_dim], 0.0);
    let b = make(&shift, jitter);
    (a, b)
}

/// Samples the constants `η, λ, M, k, C` around the reference measure `nu`.
pub fn estimate_hypotheses(
    cost: &CostModel,
    spec: &InteractionSpec,
    mu: &SourceMeasure,
    mu_points: &[Pt],
    nu: &DiscreteMeasure,
    seed: u64,
) -> Result<HypothesisReport> {
    spec.validate()?;
    let n = spec.target_dim;
    let field = Field::new(spec, nu);
    let ys = y_grid(spec, if n == 1 { 100 } else { 12 });
    let xs: Vec<Pt> = mu_points.iter().step_by((mu_points.len() / 100).max(1)).copied().collect();

    let mut eta = f64::INFINITY;
    let mut margin = f64::INFINITY;
    let mut lambda = f64::INFINITY;
    for y in &ys {
        let fh = field.eval(y).hess;
        lambda = lambda.min(min_eig(&fh, n));
        for &x in &xs {
            let ch = cost.hess_y(x, y);
            eta = eta.min(min_eig(&ch, n));
            let sum: Vec<f64> = ch.iter().zip(&fh).map(|(a, b)| a + b).collect();
            margin = margin.min(min_eig(&sum, n));
        }
    }

    let m = mu.domain.dim();
    let m_bound = if m > n {
        ys.iter()
            .map(|y| {
                let k = -field.eval(y).grad[0];
                LevelCurve::trace(cost, mu, y[0], k).length()
            })
            .fold(0.0, f64::max)
    } else {
        1.0
    };

    let mut boundary_ok = true;
    let mut k_jacobian = f64::INFINITY;
    for &x in &xs {
        let y = match best_response(cost, &field, x) {
            Ok(y) => y,
            Err(e) if e.is_hypothesis() => {
                boundary_ok = false;
                continue;
            }
            Err(e) => return Err(e),
        };
        let ch = cost.hess_y(x, &y);
        let fh = field.eval(&y).hess;
        let hm: Vec<f64> = ch.iter().zip(&fh).map(|(a, b)| a + b).collect();
        let mixed = cost.mixed_yx(x, &y, m);
        let jac = if n == 1 {
            mixed.iter().map(|t| t * t).sum::<f64>().sqrt() / hm[0]
        } else {
            let dm = mixed[0] * mixed[3] - mixed[1] * mixed[2];
            (dm / (hm[0] * hm[3] - hm[1] * hm[2])).abs()
        };
        k_jacobian = k_jacobian.min(jac);
    }
    // outward gradient of c + F on ∂Ȳ
    for &x in &xs {
        for y in &ys {
            let g: Vec<f64> = cost.grad_y(x, y).iter().zip(&field.eval(y).grad).map(|(a, b)| a + b).collect();
            for (i, b) in spec.target_box.iter().enumerate() {
                if (y[i] - b[0]).abs() < 1e-14 && g[i] > 1e-12 {
                    boundary_ok = false;
                }
                if (y[i] - b[1]).abs() < 1e-14 && g[i] < -1e-12 {
                    boundary_ok = false;
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c_lipschitz: f64 = 0.0;
    let reference = thin(nu, 200);
    for _ in 0..20 {
        let (a, b) = random_pair(spec, &reference, &mut rng);
        let d = w1(&a, &b)?;
        if d > 1e-12 {
            c_lipschitz = c_lipschitz.max(df_l1_distance(spec, &a, &b) / d);
        }
    }

    let mu_sup = mu.sup_density();
    let rho = mu_sup * m_bound * c_lipschitz / (k_jacobian * (eta + lambda));
    Ok(HypothesisReport {
        eta,
        lambda,
        convexity_margin: margin,
        m_bound,
        k_jacobian,
        c_lipschitz,
        mu_sup,
        rho,
        boundary_ok,
        symmetry_defect: spec.symmetry_defect(1000, seed),
    })
}

/// Keeps at most `n` evenly spaced particles, reweighted uniformly.
fn thin(nu: &DiscreteMeasure, n: usize) -> DiscreteMeasure {
    if nu.len() <= n {
        return nu.clone();
    }
    let step = nu.len() as f64 / n as f64;
    let points = (0..n).map(|i| nu.points[(i as f64 * step) as usize].clone()).collect();
    DiscreteMeasure { points, weights: vec![1.0 / n as f64; n] }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationStep {
    pub t: usize,
    /// `W₁(ν_t, ν_{t−1})`.
    pub w1: f64,
    /// `w1_t / w1_{t−1}`.
    pub ratio: Option<f64>,
    pub mean: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixedPointLog {
    pub steps: Vec<IterationStep>,
    pub converged: bool,
    pub iterations: usize,
    /// First `t` from which `ν_t` no longer moves (within `tol`).
    pub first_stationary_iterate: usize,
    /// Geometric mean of the step ratios after the first two steps.
    pub empirical_ratio: Option<f64>,
    pub hypotheses: HypothesisReport,
    pub min_separation: f64,
}

/// Runs `ν_t = (B_{ν_{t−1}})♯μ` until `W₁(ν_t, ν_{t−1}) ≤ tol`.
#[allow(clippy::too_many_arguments)]
pub fn solve_fixed_point(
    cost: &CostModel,
    spec: &InteractionSpec,
    mu: &SourceMeasure,
    mu_points: &[Pt],
    mu_weights: &[f64],
    nu0: &DiscreteMeasure,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<(DiscreteMeasure, FixedPointLog)> {
    spec.validate()?;
    if !cost.supports_target_dim(spec.target_dim, mu.domain.dim()) {
        return Err(Error::Config(format!("cost {} does not support target dimension {}", cost.name(), spec.target_dim)));
    }
    let hypotheses = estimate_hypotheses(cost, spec, mu, mu_points, nu0, seed)?;
    if hypotheses.convexity_margin <= 0.0 {
        return Err(Error::Hypothesis(format!(
            "objective is not uniformly convex in y (margin {})",
            hypotheses.convexity_margin
        )));
    }
    let mut steps: Vec<IterationStep> = Vec::new();
    let mut nu = nu0.clone();
    let mut converged = false;
    let mut rising = 0;
    for t in 1..=max_iter {
        let next = iterate(cost, spec, mu_points, mu_weights, &nu)?;
        let d = w1(&next, &nu)?;
        let prev = steps.last().map(|s| s.w1);
        let ratio = prev.and_then(|p| if p > 0.0 { Some(d / p) } else { None });
        if let Some(p) = prev {
            rising = if d >= p && d > tol { rising + 1 } else { 0 };
        }
        steps.push(IterationStep { t, w1: d, ratio, mean: next.mean() });
        nu = next;
        if d <= tol {
            converged = true;
            break;
        }
        if rising >= 5 {
            let tail: Vec<f64> = steps.iter().rev().take(6).map(|s| s.w1).collect();
            return Err(Error::Numeric(format!("best-reply iteration diverging; last W1 values {tail:?}")));
        }
    }
    let ratios: Vec<f64> = steps.iter().skip(2).filter_map(|s| s.ratio).filter(|r| *r > 0.0).collect();
    let empirical_ratio = if ratios.is_empty() {
        None
    } else {
        Some((ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp())
    };
    let first_stationary_iterate = steps.iter().position(|s| s.w1 <= tol).map(|i| i.max(1)).unwrap_or(steps.len());
    let log = FixedPointLog {
        iterations: steps.len(),
        converged,
        first_stationary_iterate,
        empirical_ratio,
        hypotheses,
        min_separation: nu.min_separation(),
        steps,
    };
    Ok((nu, log))
}

/// `T_c(μ,ν) + ∫V dν + ½∬W dν dν`, with `T_c` from the exact discrete solver.
pub fn objective(cost: &CostModel, spec: &InteractionSpec, mu_points: &[Pt], mu_weights: &[f64], nu: &DiscreteMeasure) -> Result<f64> {
    let p = DiscreteOtProblem::from_points(mu_points, mu_weights.to_vec(), &nu.points, nu.weights.clone(), |x, y| cost.value_nd(*x, y))?;
    let tc = solve_discrete_ot(&p)?.cost;
    let v: f64 = nu.points.iter().zip(&nu.weights).map(|(p, w)| w * spec.v_value(p)).sum();
    let mut wsum = 0.0;
    for (p, a) in nu.points.iter().zip(&nu.weights) {
        for (q, b) in nu.points.iter().zip(&nu.weights) {
            wsum += a * b * spec.w_value(p, q);
        }
    }
    Ok(tc + v + 0.5 * wsum)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneralizedNestednessReport {
    pub support_points: usize,
    pub contact_points: usize,
    /// Largest `c(x,ȳ) − v(ȳ) − u(x)` over checked contact points.
    pub max_violation: f64,
    pub boundary_ok: bool,
}

/// `v^c(x) = min_y c(x,y) − v(y)` by grid search plus local refinement.
fn c_transform(cost: &CostModel, spec: &InteractionSpec, field: &Field<'_>, x: Pt) -> f64 {
    let obj = |y: &[f64]| cost.value_nd(x, y) + field.eval(y).value;
    if spec.target_dim == 1 {
        let [lo, hi] = spec.target_box[0];
        let n = 4097;
        let h = (hi - lo) / (n - 1) as f64;
        let (i, best) = (0..n).map(|i| (i, obj(&[lo + h * i as f64]))).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let a = lo + h * (i as f64 - 1.0).max(0.0);
        let b = (lo + h * (i + 1) as f64).min(hi);
        let (_, neg) = golden_max(|y| -obj(&[y]), a, b, 1e-12);
        best.min(-neg)
    } else {
        let grid = y_grid(spec, 129);
        let mut best = grid.iter().map(|y| (obj(y), y.clone())).fold((f64::INFINITY, vec![]), |a, b| if b.0 < a.0 { b } else { a });
        // coordinate golden refinement around the grid minimiser
        for _ in 0..4 {
            for d in 0..2 {
                let b = spec.target_box[d];
                let h = (b[1] - b[0]) / 128.0;
                let y0 = best.1.clone();
                let f = |t: f64| {
                    let mut y = y0.clone();
                    y[d] = t;
                    -obj(&y)
                };
                let (t, neg) = golden_max(f, (y0[d] - h).max(b[0]), (y0[d] + h).min(b[1]), 1e-13);
                if -neg < best.0 {
                    best.0 = -neg;
                    best.1[d] = t;
                }
            }
        }
        best.0
    }
}

/// With `v = −F[ν]`, checks `u(x) + v(ȳ) = c(x,ȳ)` for sampled `x ∈ X_=(ȳ, Dv(ȳ))` and support points `ȳ`.
pub fn generalized_nestedness_check(
    cost: &CostModel,
    spec: &InteractionSpec,
    solution: &DiscreteMeasure,
    mu: &SourceMeasure,
    max_support: usize,
) -> (bool, GeneralizedNestednessReport) {
    let field = Field::new(spec, solution);
    let stride = (solution.len() / max_support.max(1)).max(1);
    let support: Vec<&Vec<f64>> = solution.points.iter().step_by(stride).collect();
    let n = spec.target_dim;
    let contacts: Vec<(Pt, Vec<f64>)> = support
        .iter()
        .flat_map(|y| {
            let fv = field.eval(y);
            let xs: Vec<Pt> = if n == 1 {
                let k = -fv.grad[0];
                LevelCurve::trace(cost, mu, y[0], k).sample_points(8)
            } else {
                // quadratic cost: D_y c(x, y) = y − x = −DF
                vec![Pt::new(y[0] + fv.grad[0], y[1] + fv.grad[1])]
            };
            xs.into_iter().filter(|x| mu.domain.contains(*x)).map(|x| (x, (*y).clone())).collect::<Vec<_>>()
        })
        .collect();
    let max_violation = contacts
        .par_iter()
        .map(|(x, y)| {
            let u = c_transform(cost, spec, &field, *x);
            cost.value_nd(*x, y) + field.eval(y).value - u
        })
        .reduce(|| 0.0, f64::max);
    let mut boundary_ok = true;
    let (_, xs) = source_samples(mu, 64, 1).unwrap_or_default();
    for x in &xs.points {
        let x = if x.len() == 1 { Pt::new(x[0], 0.0) } else { Pt::new(x[0], x[1]) };
        for y in y_grid(spec, if n == 1 { 2 } else { 9 }) {
            let g: Vec<f64> = cost.grad_y(x, &y).iter().zip(&field.eval(&y).grad).map(|(a, b)| a + b).collect();
            for (i, b) in spec.target_box.iter().enumerate() {
                if ((y[i] - b[0]).abs() < 1e-14 && g[i] > 1e-12) || ((y[i] - b[1]).abs() < 1e-14 && g[i] < -1e-12) {
                    boundary_ok = false;
                }
            }
        }
    }
    let ok = !contacts.is_empty() && max_violation <= 1e-6;
    (
        ok,
        GeneralizedNestednessReport { support_points: support.len(), contact_points: contacts.len(), max_violation, boundary_ok },
    )
}

/// Wraps an n-vector source sample as a point of the plane.
pub fn as_pt(p: &[f64]) -> Pt {
    if p.len() == 1 { Pt::new(p[0], 0.0) } else { Pt::new(p[0], p[1]) }
}
