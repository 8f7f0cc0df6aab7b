//! Multi-to-one transport by mass splitting and the nestedness diagnostics built on it.

use crate::cost::CostModel;
use crate::domain::SourceMeasure;
use crate::error::{Error, Result};
use crate::geometry::Pt;
use crate::level::{
    dy_extremes, level_integral_on, mass_to_k, superlevel_mass_unchecked, LevelCurve, LevelWeight,
};
use crate::oracle::sample_measure;
use crate::quadrature::{cumulative_trapezoid, golden_max};
use crate::target::TargetDensity;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Containment is declared when the violating mass stays below this.
pub const NESTED_MASS_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KProfile {
    pub y: Vec<f64>,
    pub k: Vec<f64>,
    pub kprime: Vec<f64>,
    pub v: Vec<f64>,
    /// Mass level matched at each node.
    pub mass: Vec<f64>,
}

/// Central differences inside, second-order one-sided stencils at both ends.
pub fn finite_difference(y: &[f64], f: &[f64]) -> Vec<f64> {
    let n = f.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let h = (y[n - 1] - y[0]) / (n - 1) as f64;
    if n == 2 {
        let d = (f[1] - f[0]) / h;
        return vec![d, d];
    }
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    d
}

impl KProfile {
    pub fn from_levels(y: Vec<f64>, k: Vec<f64>, mass: Vec<f64>) -> KProfile {
        let kprime = finite_difference(&y, &k);
        let h = if y.len() > 1 { (y[y.len() - 1] - y[0]) / (y.len() - 1) as f64 } else { 0.0 };
        let v = cumulative_trapezoid(&k, h);
        KProfile { y, k, kprime, v, mass }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn k_at(&self, y: f64) -> f64 {
        interp(&self.y, &self.k, y)
    }

    /// Nodes where `|k′|` exceeds `10·M_c`.
    pub fn suspect_nodes(&self, m_c: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.kprime[i].abs() > 10.0 * m_c).collect()
    }
}

pub(crate) fn interp(xs: &[f64], fs: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n == 1 {
        return fs[0];
    }
    let h = (xs[n - 1] - xs[0]) / (n - 1) as f64;
    let t = ((x - xs[0]) / h).clamp(0.0, (n - 1) as f64);
    let i = (t.floor() as usize).min(n - 2);
    let s = t - i as f64;
    fs[i] * (1.0 - s) + fs[i + 1] * s
}

/// `k(y)` with `μ(X_≥(y, k(y))) = ν((−∞, y])` at every node of `nu`.
pub fn solve_k_profile(cost: &CostModel, mu: &SourceMeasure, nu: &TargetDensity) -> Result<KProfile> {
    cost.check_domain(&mu.domain)?;
    let y = nu.grid();
    let k: Vec<f64> = y
        .par_iter()
        .zip(nu.cdf.par_iter())
        .map(|(&y, &m)| {
            mass_to_k(cost, mu, y, m.clamp(0.0, 1.0))
                .map_err(|e| Error::Numeric(format!("k-profile at y={y}: {e}")))
        })
        .collect::<Result<_>>()?;
    Ok(KProfile::from_levels(y, k, nu.cdf.clone()))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MapPoint {
    pub y: f64,
    /// Number of sign changes of `D_yc(x, ·) − k(·)` seen on the grid; above one means the
    /// returned value is a selection.
    pub crossings: usize,
}

/// Tabulated `D_yc(·, y_i)` coefficients for fast repeated map evaluation.
pub struct TransportMap<'a> {
    cost: &'a CostModel,
    kp: &'a KProfile,
    g: Vec<Pt>,
    h: Vec<f64>,
}

impl<'a> TransportMap<'a> {
    pub fn new(cost: &'a CostModel, kp: &'a KProfile) -> Self {
        let (g, h) = kp.y.iter().map(|&y| cost.affine_dy(y)).unzip();
        TransportMap { cost, kp, g, h }
    }

    pub fn eval(&self, x: Pt) -> Result<MapPoint> {
        let n = self.kp.len();
        let phi = |i: usize| self.g[i].dot(x) + self.h[i] - self.kp.k[i];
        let mut first = None;
        let mut crossings = 0;
        let mut prev = phi(0);
        if prev >= 0.0 {
            first = Some(0);
            crossings = 1;
        }
        for i in 1..n {
            let cur = phi(i);
            if prev < 0.0 && cur >= 0.0 {
                crossings += 1;
                if first.is_none() {
                    first = Some(i);
                }
            }
            prev = cur;
        }
        let Some(i) = first else {
            return Err(Error::OutsideRegion { x: x.x, y: x.y });
        };
        if i == 0 {
            return Ok(MapPoint { y: self.kp.y[0], crossings });
        }
        let (y0, y1) = (self.kp.y[i - 1], self.kp.y[i]);
        let (k0, k1) = (self.kp.k[i - 1], self.kp.k[i]);
        let f = |y: f64| {
            let t = (y - y0) / (y1 - y0);
            self.cost.dy(x, y) - (k0 * (1.0 - t) + k1 * t)
        };
        let (mut lo, mut hi) = (y0, y1);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(MapPoint { y: 0.5 * (lo + hi), crossings })
    }
}

/// `T(x)`: the `y` whose level set `X_=(y, k(y))` contains `x`.
pub fn transport_map(cost: &CostModel, _mu: &SourceMeasure, kp: &KProfile, x: Pt) -> Result<MapPoint> {
    TransportMap::new(cost, kp).eval(x)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveredDensity {
    pub y: Vec<f64>,
    /// `ν̄` at the nodes, clipped at zero.
    pub values: Vec<f64>,
    /// Nodes where the unclipped value was negative, with that value.
    pub negative: Vec<(usize, f64)>,
    /// End nodes whose level set lies along `∂X`; their value is the one-sided limit.
    pub extrapolated: Vec<usize>,
}

impl RecoveredDensity {
    pub fn to_target(&self) -> Result<TargetDensity> {
        TargetDensity::new(self.y[0], self.y[self.y.len() - 1], self.values.clone())
    }
}

fn degenerate_mass(m: f64) -> bool {
    m <= 1e-14 || m >= 1.0 - 1e-14
}

/// `ν̄(y) = ∫ (D²_yy c − k′)/|D²_xy c| μ̄ dH` over `X_=(y, k(y))`.
///
/// At an end node with mass 0 or 1 the level set can run along the boundary rather than
/// across it, where the integral is not the limit of its neighbours; such nodes take the
/// quadratic extrapolation from the adjacent nodes.
pub fn density_from_k(cost: &CostModel, mu: &SourceMeasure, kp: &KProfile) -> RecoveredDensity {
    let n = kp.len();
    let eval = |i: usize| {
        let curve = LevelCurve::trace(cost, mu, kp.y[i], kp.k[i]);
        let a = level_integral_on(cost, mu, &curve, LevelWeight::CyyOverCross);
        let b = level_integral_on(cost, mu, &curve, LevelWeight::OneOverCross);
        a - kp.kprime[i] * b
    };
    let mut raw: Vec<f64> = (0..n).into_par_iter().map(eval).collect();
    let mut extrapolated = Vec::new();
    if n >= 4 {
        let mass = |i: usize| superlevel_mass_unchecked(cost, mu, kp.y[i], kp.k[i]);
        for (end, a, b, c) in [(0, 1, 2, 3), (n - 1, n - 2, n - 3, n - 4)] {
            if degenerate_mass(mass(end)) && !degenerate_mass(mass(a)) && !degenerate_mass(mass(b)) {
                raw[end] = 3.0 * raw[a] - 3.0 * raw[b] + raw[c];
                extrapolated.push(end);
            }
        }
    }
    let negative = raw.iter().enumerate().filter(|(_, v)| **v < 0.0).map(|(i, v)| (i, *v)).collect();
    RecoveredDensity { y: kp.y.clone(), values: raw.iter().map(|v| v.max(0.0)).collect(), negative, extrapolated }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NestednessReport {
    pub nested: bool,
    /// Lexicographically smallest violating pair `(y₀, y₁)`.
    pub witness: Option<(f64, f64)>,
    pub witness_index: Option<(usize, usize)>,
    /// Minimum over checked pairs of `−μ(X_≥(y₀,k₀) ∩ {D_yc(·,y₁) ≤ k₁})`.
    pub min_margin: f64,
    pub pairs_checked: usize,
    /// `Some` when the intercept rule of the quarter-disk model was applicable.
    pub intercept_monotone: Option<bool>,
}

fn containment_violation(cost: &CostModel, mu: &SourceMeasure, y0: f64, k0: f64, y1: f64, k1: f64) -> f64 {
    let r = mu.domain.region().clip_all(&[
        cost.superlevel_halfplane(y0, k0),
        cost.superlevel_halfplane(y1, k1).flipped(),
    ]);
    mu.mass(&r)
}

fn quarter_disk_model(cost: &CostModel, mu: &SourceMeasure) -> bool {
    matches!(cost, CostModel::BilinearArc) && matches!(mu.domain, crate::domain::Domain::QuarterDisk { .. })
}

/// Pairwise containment `X_≥(y₀,k(y₀)) ⊆ X_>(y₁,k(y₁))` for grid pairs charged by `ν`.
pub fn check_nestedness(cost: &CostModel, mu: &SourceMeasure, kp: &KProfile, nu: &TargetDensity) -> NestednessReport {
    let n = kp.len();
    let cdf: Vec<f64> = kp.y.iter().map(|&y| nu.cdf_at(y)).collect();
    let charged = |i: usize, j: usize| cdf[j] - cdf[i] > 1e-15;

    let per_row: Vec<(Option<usize>, f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut first = None;
            let mut margin = f64::INFINITY;
            let mut count = 0;
            for j in i + 1..n {
                if !charged(i, j) {
                    continue;
                }
                count += 1;
                let v = containment_violation(cost, mu, kp.y[i], kp.k[i], kp.y[j], kp.k[j]);
                margin = margin.min(-v);
                if v > NESTED_MASS_TOL && first.is_none() {
                    first = Some(j);
                }
            }
            (first, margin, count)
        })
        .collect();

    let min_margin = per_row.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let pairs_checked = per_row.iter().map(|r| r.2).sum();
    let mut witness_index = per_row.iter().enumerate().find_map(|(i, r)| r.0.map(|j| (i, j)));

    let mut intercept_monotone = None;
    if quarter_disk_model(cost, mu) {
        let applicable = (0..n).all(|i| kp.k[i] <= 1e-12 && -kp.k[i] <= kp.y[i].cos() + 1e-12);
        if applicable {
            let b: Vec<f64> = (0..n)
                .map(|i| {
                    let c = kp.y[i].cos();
                    if c < 1e-12 { f64::INFINITY } else { -kp.k[i] / c }
                })
                .collect();
            let mut wit = None;
            'outer: for i in 0..n {
                for j in i + 1..n {
                    if charged(i, j) && b[j] < b[i] - 1e-9 {
                        wit = Some((i, j));
                        break 'outer;
                    }
                }
            }
            intercept_monotone = Some(wit.is_none());
            witness_index = wit;
        }
    }
    let nested = match intercept_monotone {
        Some(ok) => ok,
        None => witness_index.is_none(),
    };
    NestednessReport {
        nested,
        witness: witness_index.map(|(i, j)| (kp.y[i], kp.y[j])),
        witness_index,
        min_margin: if min_margin.is_finite() { min_margin } else { 0.0 },
        pairs_checked,
        intercept_monotone,
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MinimalMassDifference {
    /// `sup{k : X_≥(y₀,k₀) ⊆ X_≥(y₁,k)}`; `+∞` when `X_≥(y₀,k₀)` is empty.
    pub k_max: f64,
    pub value: f64,
}

fn minimal_difference(cost: &CostModel, mu: &SourceMeasure, y0: f64, y1: f64, k0: f64, lebesgue: bool) -> MinimalMassDifference {
    let dom = mu.domain.region();
    let r0 = dom.clip(&cost.superlevel_halfplane(y0, k0));
    let (g1, h1) = cost.affine_dy(y1);
    // a zero-area superlevel set can still be a boundary segment or point
    let lo = r0.linear_range(g1).map(|r| r.0).or_else(|| {
        let curve = LevelCurve::trace(cost, mu, y0, k0);
        curve.nodes.iter().map(|p| g1.dot(*p)).reduce(f64::min)
    });
    let Some(lo) = lo else {
        return MinimalMassDifference { k_max: f64::INFINITY, value: 0.0 };
    };
    let k_max = lo + h1;
    let diff = dom.clip_all(&[
        cost.superlevel_halfplane(y1, k_max),
        cost.superlevel_halfplane(y0, k0).flipped(),
    ]);
    let value = if lebesgue { diff.volume() } else { mu.mass(&diff) };
    MinimalMassDifference { k_max, value }
}

/// `D^min_μ(y₀, y₁, k₀) = μ(X_≥(y₁, k_max) \ X_≥(y₀, k₀))`.
pub fn minimal_mass_difference(cost: &CostModel, mu: &SourceMeasure, y0: f64, y1: f64, k0: f64) -> MinimalMassDifference {
    minimal_difference(cost, mu, y0, y1, k0, false)
}

/// The same set difference measured by Lebesgue measure.
pub fn minimal_volume_difference(cost: &CostModel, mu: &SourceMeasure, y0: f64, y1: f64, k0: f64) -> MinimalMassDifference {
    minimal_difference(cost, mu, y0, y1, k0, true)
}

/// `(min, max)` of the set difference `X_≥(y₁,k_max) \ X_≥(y₀,k₀)` as a region, for bounds.
pub fn minimal_difference_region(cost: &CostModel, mu: &SourceMeasure, y0: f64, y1: f64, k0: f64) -> crate::domain::Region {
    let d = minimal_mass_difference(cost, mu, y0, y1, k0);
    if !d.k_max.is_finite() {
        return crate::domain::Region::Span { lo: 1.0, hi: 0.0 };
    }
    mu.domain.region().clip_all(&[
        cost.superlevel_halfplane(y1, d.k_max),
        cost.superlevel_halfplane(y0, k0).flipped(),
    ])
}

/// Where the starting level `k₀` of a bound check comes from.
#[derive(Clone, Copy, Debug)]
pub enum LevelChoice<'a> {
    /// `k(y₀)` read off a profile.
    Profile(&'a KProfile),
    /// Worst case over all levels of `D_yc(·, y₀)`.
    AllLevels,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundsReport {
    pub nested: bool,
    /// `sup [D^min/(y₁−y₀) − lower(y)]` over the grid.
    pub sup: f64,
    pub argsup: (f64, f64, f64),
}

/// Largest `D^min(y₀,y₁,k₀)/(y₁−y₀)` over `k₀` for a pair (grid plus golden refinement).
pub fn max_dmin_rate(cost: &CostModel, mu: &SourceMeasure, y0: f64, y1: f64, n_levels: usize, lebesgue: bool) -> (f64, f64) {
    let (kmin, kmax) = dy_extremes(cost, mu, y0);
    let rate = |k0: f64| minimal_difference(cost, mu, y0, y1, k0, lebesgue).value / (y1 - y0);
    let n = n_levels.max(3);
    let ks: Vec<f64> = (0..n).map(|i| kmin + (kmax - kmin) * i as f64 / (n - 1) as f64).collect();
    let mut best = (ks[0], rate(ks[0]));
    let mut best_i = 0;
    for (i, &k) in ks.iter().enumerate() {
        let r = rate(k);
        if r > best.1 {
            best = (k, r);
            best_i = i;
        }
    }
    if kmax > kmin {
        let a = ks[best_i.saturating_sub(1)];
        let b = ks[(best_i + 1).min(n - 1)];
        let (k, r) = golden_max(rate, a, b, 1e-12 * (kmax - kmin));
        if r > best.1 {
            best = (k, r);
        }
    }
    best
}

/// Sufficient test from a lower bound on `ν̄`: nested when `D^min/(y₁−y₀) < ν̄_lower` throughout.
pub fn nestedness_by_bounds(
    cost: &CostModel,
    mu: &SourceMeasure,
    interval: (f64, f64),
    nu_lower: &(dyn Fn(f64) -> f64 + Sync),
    levels: LevelChoice<'_>,
    grid: usize,
) -> BoundsReport {
    let (lo, hi) = interval;
    let n = grid.max(2);
    let ys: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let lower: Vec<f64> = ys.iter().map(|&y| nu_lower(y)).collect();
    let rows: Vec<(f64, (f64, f64, f64))> = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::NEG_INFINITY, (0.0, 0.0, 0.0));
            let mut running_min = lower[i];
            for j in i + 1..n {
                running_min = running_min.min(lower[j]);
                let (k0, rate) = match levels {
                    LevelChoice::Profile(kp) => {
                        let k0 = kp.k_at(ys[i]);
                        (k0, minimal_mass_difference(cost, mu, ys[i], ys[j], k0).value / (ys[j] - ys[i]))
                    }
                    LevelChoice::AllLevels => max_dmin_rate(cost, mu, ys[i], ys[j], 17, false),
                };
                let val = rate - running_min;
                if val > best.0 {
                    best = (val, (ys[i], ys[j], k0));
                }
            }
            best
        })
        .collect();
    let (sup, argsup) = rows.into_iter().fold((f64::NEG_INFINITY, (0.0, 0.0, 0.0)), |a, b| if b.0 > a.0 { b } else { a });
    BoundsReport { nested: sup < 0.0, sup, argsup }
}

/// Dual test from an upper bound on `μ̄` over the set differences.
pub fn nestedness_by_source_bound(
    cost: &CostModel,
    mu: &SourceMeasure,
    mu_upper: &(dyn Fn(Pt) -> f64 + Sync),
    nu: &TargetDensity,
    kp: &KProfile,
    grid: usize,
) -> BoundsReport {
    let (lo, hi) = (nu.lo, nu.hi);
    let n = grid.max(2);
    let ys: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let dens: Vec<f64> = ys.iter().map(|&y| nu.density_at(y)).collect();
    let mut sup = f64::NEG_INFINITY;
    let mut argsup = (0.0, 0.0, 0.0);
    for i in 0..n - 1 {
        let k0 = kp.k_at(ys[i]);
        let mut running_min = dens[i];
        for j in i + 1..n {
            running_min = running_min.min(dens[j]);
            let dvol = minimal_volume_difference(cost, mu, ys[i], ys[j], k0).value;
            let region = minimal_difference_region(cost, mu, ys[i], ys[j], k0);
            let linf = region_sup(&region, mu_upper);
            let val = linf * dvol / (ys[j] - ys[i]) - running_min;
            if val > sup {
                sup = val;
                argsup = (ys[i], ys[j], k0);
            }
        }
    }
    BoundsReport { nested: sup < 0.0, sup, argsup }
}

fn region_sup(region: &crate::domain::Region, f: &(dyn Fn(Pt) -> f64 + Sync)) -> f64 {
    use crate::domain::Region;
    match region {
        Region::Span { lo, hi } if hi >= lo => (0..=16)
            .map(|i| f(Pt::new(lo + (hi - lo) * i as f64 / 16.0, 0.0)))
            .fold(0.0, f64::max),
        Region::Patch(p) if !p.is_empty() => {
            let vs = p.vertices();
            let c = p.centroid().unwrap_or(vs[0]);
            let mut m = f(c);
            for v in &vs {
                for t in 0..=8 {
                    m = m.max(f(c + (*v - c) * (t as f64 / 8.0)));
                }
            }
            m
        }
        _ => 0.0,
    }
}

/// `∫ c(x, T(x)) dμ` through the co-area formula on the profile's grid.
pub fn transport_cost(cost: &CostModel, mu: &SourceMeasure, kp: &KProfile) -> f64 {
    let vals: Vec<f64> = (0..kp.len())
        .into_par_iter()
        .map(|i| {
            let y = kp.y[i];
            let curve = LevelCurve::trace(cost, mu, y, kp.k[i]);
            let pts = curve.sample_points(2);
            if pts.len() < 2 {
                if mu.domain.dim() == 1 && !pts.is_empty() {
                    let p = pts[0];
                    let w = (cost.dyy(p, y) - kp.kprime[i]) / cost.cross_norm(y, 1);
                    return cost.value(p, y) * w * mu.density_unchecked(p);
                }
                return 0.0;
            }
            let (a, b) = (pts[0], pts[1]);
            let len = (b - a).norm();
            let cross = cost.cross_norm(y, mu.domain.dim());
            crate::quadrature::gl_integrate(
                |t| {
                    let p = a + (b - a) * t;
                    cost.value(p, y) * (cost.dyy(p, y) - kp.kprime[i]) * mu.density_unchecked(p)
                },
                0.0,
                1.0,
            ) * len
                / cross
        })
        .collect();
    let h = (kp.y[kp.len() - 1] - kp.y[0]) / (kp.len() - 1) as f64;
    *cumulative_trapezoid(&vals, h).last().unwrap()
}

/// Kolmogorov–Smirnov distance between an empirical sample and a target CDF.
pub fn ks_statistic(samples: &mut [f64], nu: &TargetDensity) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = nu.cdf_at(t);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NestedSolution {
    pub kprofile: KProfile,
    pub map_samples: Vec<(Pt, f64)>,
    pub nu_density: RecoveredDensity,
    pub nested: bool,
    pub witness: Option<(f64, f64)>,
    pub report: NestednessReport,
    pub ks_statistic: f64,
    pub transport_cost: f64,
    pub multi_crossing_samples: usize,
    pub suspect_nodes: Vec<usize>,
}

/// Full pipeline: profile, recovered density, nestedness, pushforward check and cost.
pub fn solve_nested(
    cost: &CostModel,
    mu: &SourceMeasure,
    nu: &TargetDensity,
    n_samples: usize,
    seed: u64,
) -> Result<NestedSolution> {
    let kp = solve_k_profile(cost, mu, nu)?;
    let recovered = density_from_k(cost, mu, &kp);
    let report = check_nestedness(cost, mu, &kp, nu);
    let map = TransportMap::new(cost, &kp);
    let xs = sample_measure(mu, n_samples, seed);
    let mapped: Vec<MapPoint> = xs.par_iter().map(|&x| map.eval(x)).collect::<Result<_>>()?;
    let multi = mapped.iter().filter(|m| m.crossings > 1).count();
    let mut ts: Vec<f64> = mapped.iter().map(|m| m.y).collect();
    let ks = ks_statistic(&mut ts, nu);
    let keep = xs.len().min(1000);
    let map_samples = xs[..keep].iter().zip(&mapped[..keep]).map(|(x, m)| (*x, m.y)).collect();
    let m_c = cost.lipschitz(&mu.domain, nu.lo, nu.hi);
    Ok(NestedSolution {
        suspect_nodes: kp.suspect_nodes(m_c),
        transport_cost: transport_cost(cost, mu, &kp),
        nested: report.nested,
        witness: report.witness,
        kprofile: kp,
        map_samples,
        nu_density: recovered,
        report,
        ks_statistic: ks,
        multi_crossing_samples: multi,
    })
}

/// Mass check used by tests and diagnostics: `μ(X_≥(y, k))` at every node of a profile.
pub fn profile_mass_residual(cost: &CostModel, mu: &SourceMeasure, kp: &KProfile) -> f64 {
    (0..kp.len())
        .map(|i| (superlevel_mass_unchecked(cost, mu, kp.y[i], kp.k[i]) - kp.mass[i]).abs())
        .fold(0.0, f64::max)
}
