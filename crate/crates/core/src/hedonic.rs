//! Two-sided hedonic matching: buyers and sellers meet on a one-dimensional space of goods.
//!
//! For each good `y` the common mass level `M(y)` balances the two sides,
//! `k₁(y, M) + k₂(y, M) = 0`, and `M` is the distribution function of the traded goods.

use crate::cost::CostModel;
use crate::domain::{Domain, Region, SourceMeasure};
use crate::error::{Error, Result};
use crate::geometry::Pt;
use crate::level::{dy_extremes, level_integral, mass_to_k, superlevel_mass_unchecked, LevelCurve, LevelWeight};
use crate::nested::{check_nestedness, finite_difference, KProfile, NestednessReport};
use crate::target::TargetDensity;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug)]
pub struct HedonicInstance {
    pub buyer_cost: CostModel,
    pub buyer: SourceMeasure,
    pub seller_cost: CostModel,
    pub seller: SourceMeasure,
    pub interval: (f64, f64),
}

impl HedonicInstance {
    pub fn new(buyer_cost: CostModel, buyer: SourceMeasure, seller_cost: CostModel, seller: SourceMeasure, interval: (f64, f64)) -> Result<Self> {
        buyer_cost.check_domain(&buyer.domain)?;
        seller_cost.check_domain(&seller.domain)?;
        if !(interval.0 < interval.1) {
            return Err(Error::Config("hedonic interval must satisfy lo < hi".into()));
        }
        Ok(HedonicInstance { buyer_cost, buyer, seller_cost, seller, interval })
    }

    /// Uniform buyers on the unit square with `c₁ = x·(y²/2, −y)`, uniform sellers on the unit
    /// interval with `c₂ = −xy + y²/2`, goods in `(−3, 3)`.
    pub fn worked_example() -> Self {
        HedonicInstance {
            buyer_cost: CostModel::HedonicBuyer,
            buyer: SourceMeasure::uniform(Domain::unit_square()).expect("unit square"),
            seller_cost: CostModel::HedonicSeller,
            seller: SourceMeasure::uniform(Domain::unit_interval()).expect("unit interval"),
            interval: (-3.0, 3.0),
        }
    }

    fn side(&self, i: usize) -> (&CostModel, &SourceMeasure) {
        if i == 1 { (&self.buyer_cost, &self.buyer) } else { (&self.seller_cost, &self.seller) }
    }
}

/// Where `0` sits relative to the range of `M ↦ k₁ + k₂` at one good.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BalancePoint {
    /// `k₁ + k₂ = 0` has a root `M ∈ [0, 1]`.
    Root { m: f64, k1: f64 },
    /// Even the largest levels sum below zero.
    BelowRange,
    /// Even the smallest levels sum above zero.
    AboveRange,
}

/// Solves `μ₁(X¹_≥(y, k)) = μ₂(X²_≥(y, −k))` for `k` by bisection; `M` is the common mass.
pub fn balance_at(inst: &HedonicInstance, y: f64) -> BalancePoint {
    let (c1, m1) = inst.side(1);
    let (c2, m2) = inst.side(2);
    let (lo1, hi1) = dy_extremes(c1, m1, y);
    let (lo2, hi2) = dy_extremes(c2, m2, y);
    if hi1 + hi2 < 0.0 {
        return BalancePoint::BelowRange;
    }
    if lo1 + lo2 > 0.0 {
        return BalancePoint::AboveRange;
    }
    let (mut a, mut b) = (lo1.max(-hi2), hi1.min(-lo2));
    let g = |k: f64| superlevel_mass_unchecked(c1, m1, y, k) - superlevel_mass_unchecked(c2, m2, y, -k);
    let scale = 1.0f64.max(a.abs()).max(b.abs());
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if b - a <= 1e-16 * scale || mid <= a || mid >= b {
            break;
        }
        if g(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let k = 0.5 * (a + b);
    let m = 0.5 * (superlevel_mass_unchecked(c1, m1, y, k) + superlevel_mass_unchecked(c2, m2, y, -k));
    BalancePoint::Root { m: m.clamp(0.0, 1.0), k1: k }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transition {
    pub y: f64,
    pub m: f64,
    pub side: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HedonicSolution {
    pub y: Vec<f64>,
    /// `M` on the whole grid, extended by 0 below and 1 above the support.
    pub m: Vec<f64>,
    pub in_support: Vec<bool>,
    pub support: (f64, f64),
    /// Index range of the support within `y`.
    pub support_index: (usize, usize),
    pub k1: KProfile,
    pub k2: KProfile,
    /// `dM/dy` on the support nodes, one-sided at transitions.
    pub nu_bar: Vec<f64>,
    /// `ν̄` normalised on the support.
    pub nu: TargetDensity,
    pub nested: bool,
    pub witness: Option<(f64, f64)>,
    pub transitions: Vec<Transition>,
}

fn edge_signature(cost: &CostModel, mu: &SourceMeasure, y: f64, k: f64) -> Option<(usize, usize)> {
    let Region::Patch(p) = mu.domain.region() else { return None };
    let curve = LevelCurve::trace(cost, mu, y, k);
    if curve.nodes.len() < 2 {
        return None;
    }
    Some((p.nearest_piece(curve.nodes[0])?, p.nearest_piece(curve.nodes[1])?))
}

fn k_on_side(inst: &HedonicInstance, side: usize, y: f64, m: f64) -> Result<f64> {
    let (c, mu) = inst.side(side);
    mass_to_k(c, mu, y, m)
}

/// Builds `M` on `nodes` grid points, detects the support and the edge transitions, and
/// differentiates `M` piecewise.
pub fn solve_m(inst: &HedonicInstance, nodes: usize) -> Result<HedonicSolution> {
    let (lo, hi) = inst.interval;
    if nodes < 5 {
        return Err(Error::Config("hedonic solve needs at least five nodes".into()));
    }
    let y: Vec<f64> = (0..nodes).map(|i| if i + 1 == nodes { hi } else { lo + (hi - lo) * i as f64 / (nodes - 1) as f64 }).collect();
    let bal: Vec<BalancePoint> = y.par_iter().map(|&t| balance_at(inst, t)).collect();
    let in_support: Vec<bool> = bal.iter().map(|b| matches!(b, BalancePoint::Root { .. })).collect();
    let m: Vec<f64> = bal
        .iter()
        .map(|b| match *b {
            BalancePoint::Root { m, .. } => m,
            BalancePoint::BelowRange => 0.0,
            BalancePoint::AboveRange => 1.0,
        })
        .collect();

    // longest run of included nodes
    let mut best = None;
    let mut i = 0;
    while i < nodes {
        if in_support[i] {
            let s = i;
            while i + 1 < nodes && in_support[i + 1] {
                i += 1;
            }
            if best.is_none_or(|(a, b)| i - s > b - a) {
                best = Some((s, i));
            }
        }
        i += 1;
    }
    let Some((s0, s1)) = best else {
        return Err(Error::Hypothesis("the balance equation has no root anywhere on the grid".into()));
    };
    if s1 - s0 < 4 {
        return Err(Error::Hypothesis("support too short to differentiate M".into()));
    }
    let ys: Vec<f64> = y[s0..=s1].to_vec();
    let ms: Vec<f64> = m[s0..=s1].to_vec();

    let k1: Vec<f64> = ys.par_iter().zip(&ms).map(|(&t, &mm)| k_on_side(inst, 1, t, mm)).collect::<Result<_>>()?;
    let k2: Vec<f64> = ys.par_iter().zip(&ms).map(|(&t, &mm)| k_on_side(inst, 2, t, mm)).collect::<Result<_>>()?;

    let h = ys[1] - ys[0];
    let mut transitions = find_transitions(inst, &ys, &k1);
    // level sets degenerate onto an edge at the support ends; those are not transitions
    transitions.retain(|t| t.y > ys[0] + h && t.y < ys[ys.len() - 1] - h);

    // piecewise differences split at the transitions
    let mut nu_bar = vec![0.0; ys.len()];
    let mut cuts: Vec<usize> = vec![0];
    for t in &transitions {
        let j = ys.partition_point(|&v| v <= t.y);
        if j > *cuts.last().unwrap() && j < ys.len() {
            cuts.push(j);
        }
    }
    cuts.push(ys.len());
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a >= 3 {
            let d = finite_difference(&ys[a..b], &ms[a..b]);
            nu_bar[a..b].copy_from_slice(&d);
        } else {
            for j in a..b {
                let (p, q) = if j + 1 < ys.len() { (j, j + 1) } else { (j - 1, j) };
                nu_bar[j] = (ms[q] - ms[p]) / (ys[q] - ys[p]);
            }
        }
    }
    let nu = TargetDensity::new(ys[0], ys[ys.len() - 1], nu_bar.iter().map(|v| v.max(0.0)).collect())?;

    let kp1 = KProfile::from_levels(ys.clone(), k1, ms.clone());
    let kp2 = KProfile::from_levels(ys.clone(), k2, ms.clone());
    let mut sol = HedonicSolution {
        support: (ys[0], ys[ys.len() - 1]),
        support_index: (s0, s1),
        y,
        m,
        in_support,
        k1: kp1,
        k2: kp2,
        nu_bar,
        nu,
        nested: false,
        witness: None,
        transitions,
    };
    let (nested, witness) = hedonic_nestedness_check(inst, &sol);
    sol.nested = nested;
    sol.witness = witness.map(|w| w.pair);
    Ok(sol)
}

fn find_transitions(inst: &HedonicInstance, ys: &[f64], k1: &[f64]) -> Vec<Transition> {
    let mut out = Vec::new();
    for side in [1usize, 2] {
        let (c, mu) = inst.side(side);
        if mu.domain.dim() < 2 {
            continue;
        }
        let sig = |y: f64, k: f64| edge_signature(c, mu, y, k);
        let k_at = |y: f64| match balance_at(inst, y) {
            BalancePoint::Root { k1, .. } => Some(if side == 1 { k1 } else { -k1 }),
            _ => None,
        };
        let ks: Vec<f64> = if side == 1 { k1.to_vec() } else { k1.iter().map(|k| -k).collect() };
        let sigs: Vec<Option<(usize, usize)>> = ys.iter().zip(&ks).map(|(&y, &k)| sig(y, k)).collect();
        for j in 1..ys.len() {
            let (Some(a), Some(b)) = (sigs[j - 1], sigs[j]) else { continue };
            if a == b {
                continue;
            }
            let (mut lo, mut hi) = (ys[j - 1], ys[j]);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                match k_at(mid).and_then(|k| sig(mid, k)) {
                    Some(s) if s == a => lo = mid,
                    _ => hi = mid,
                }
            }
            let yt = 0.5 * (lo + hi);
            let m = match balance_at(inst, yt) {
                BalancePoint::Root { m, .. } => m,
                _ => f64::NAN,
            };
            out.push(Transition { y: yt, m, side });
        }
    }
    out.sort_by(|a, b| a.y.total_cmp(&b.y));
    out
}

/// `M` at a single good, `None` off the support.
pub fn m_at(inst: &HedonicInstance, y: f64) -> Option<f64> {
    match balance_at(inst, y) {
        BalancePoint::Root { m, .. } => Some(m),
        _ => None,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HedonicWitness {
    pub side: usize,
    pub pair: (f64, f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HedonicNestednessDetail {
    pub side1: NestednessReport,
    pub side2: NestednessReport,
    /// Slope and intercept monotonicity of the buyer's level lines, when they are lines `x₂ = y x₁ − k₁`.
    pub intercept_monotone: Option<bool>,
}

pub fn hedonic_nestedness_detail(inst: &HedonicInstance, sol: &HedonicSolution) -> HedonicNestednessDetail {
    let side1 = check_nestedness(&inst.buyer_cost, &inst.buyer, &sol.k1, &sol.nu);
    let side2 = check_nestedness(&inst.seller_cost, &inst.seller, &sol.k2, &sol.nu);
    let intercept_monotone = matches!(inst.buyer_cost, CostModel::HedonicBuyer).then(|| {
        sol.k1.k.windows(2).all(|w| -w[1] >= -w[0] - 1e-12)
    });
    HedonicNestednessDetail { side1, side2, intercept_monotone }
}

/// Containment on both sides over grid pairs of the support.
pub fn hedonic_nestedness_check(inst: &HedonicInstance, sol: &HedonicSolution) -> (bool, Option<HedonicWitness>) {
    let d = hedonic_nestedness_detail(inst, sol);
    if let Some((a, b)) = d.side1.witness {
        return (false, Some(HedonicWitness { side: 1, pair: (a, b) }));
    }
    if d.intercept_monotone == Some(false) {
        let j = sol.k1.k.windows(2).position(|w| -w[1] < -w[0] - 1e-12).unwrap_or(0);
        return (false, Some(HedonicWitness { side: 1, pair: (sol.k1.y[j], sol.k1.y[j + 1]) }));
    }
    if let Some((a, b)) = d.side2.witness {
        return (false, Some(HedonicWitness { side: 2, pair: (a, b) }));
    }
    let monotone = sol.m.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    (d.side1.nested && d.side2.nested && monotone, None)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EndpointStatus {
    pub y: f64,
    pub in_support: bool,
    /// The level-set measure tends to zero at the extreme level on some side.
    pub precondition: bool,
    /// Linear extrapolation of the last five `ν̄` values.
    pub extrapolated_density: f64,
    pub vanishes: bool,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub lower: EndpointStatus,
    pub upper: EndpointStatus,
    /// The same diagnostics at the ends of the detected support.
    pub support_lower: EndpointStatus,
    pub support_upper: EndpointStatus,
}

/// `H^{m−1}(X_=(y, k))` as `k` approaches the extreme level of `D_yc(·, y)` from inside.
/// Returns the measures at offsets `10⁻², …, 10⁻⁸` of the level range.
pub fn level_set_limit(cost: &CostModel, mu: &SourceMeasure, y: f64, at_max: bool) -> Vec<f64> {
    let (kmin, kmax) = dy_extremes(cost, mu, y);
    let span = (kmax - kmin).max(f64::MIN_POSITIVE);
    (2..=8)
        .map(|e| {
            let eps = span * 10f64.powi(-e);
            let k = if at_max { kmax - eps } else { kmin + eps };
            let curve = LevelCurve::trace(cost, mu, y, k);
            if mu.domain.dim() == 1 { curve.nodes.len() as f64 } else { curve.length() }
        })
        .collect()
}

fn limit_vanishes(values: &[f64]) -> bool {
    let last = *values.last().unwrap_or(&1.0);
    last <= 1e-6 && values.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

fn endpoint_status(inst: &HedonicInstance, sol: &HedonicSolution, y_end: f64, lower: bool) -> EndpointStatus {
    let (s0, s1) = sol.support;
    let h = sol.y[1] - sol.y[0];
    let in_support = y_end >= s0 - 0.5 * h && y_end <= s1 + 0.5 * h;
    let precondition = [1usize, 2].iter().any(|&i| {
        let (c, mu) = inst.side(i);
        limit_vanishes(&level_set_limit(c, mu, y_end, lower))
    });
    let n = sol.nu_bar.len();
    let idx: Vec<usize> = if lower { (0..5.min(n)).collect() } else { (n.saturating_sub(5)..n).collect() };
    let ys: Vec<f64> = idx.iter().map(|&i| sol.k1.y[i]).collect();
    let vs: Vec<f64> = idx.iter().map(|&i| sol.nu_bar[i]).collect();
    let extrapolated_density = linear_extrapolate(&ys, &vs, y_end);
    let vanishes = !in_support || extrapolated_density.abs() <= 10.0 * h;
    EndpointStatus { y: y_end, in_support, precondition, extrapolated_density, vanishes }
}

fn linear_extrapolate(xs: &[f64], vs: &[f64], at: f64) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let mv = vs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxv: f64 = xs.iter().zip(vs).map(|(x, v)| (x - mx) * (v - mv)).sum();
    let slope = if sxx > 0.0 { sxv / sxx } else { 0.0 };
    mv + slope * (at - mx)
}

/// Whether the density vanishes at the ends of the goods interval (trivially when an end lies
/// outside the support), plus the same diagnostics at the ends of the support.
pub fn boundary_vanishing_check(inst: &HedonicInstance, sol: &HedonicSolution) -> BoundaryReport {
    BoundaryReport {
        lower: endpoint_status(inst, sol, inst.interval.0, true),
        upper: endpoint_status(inst, sol, inst.interval.1, false),
        support_lower: endpoint_status(inst, sol, sol.support.0, true),
        support_upper: endpoint_status(inst, sol, sol.support.1, false),
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DifferentialCondition {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    /// `A₁ − A₂ − D²_yy c₁(x̄₁, y)(B₁ + B₂)`.
    pub value: f64,
    pub holds: bool,
    /// `(A₁ − A₂)/(B₁ + B₂)`.
    pub k1_prime: f64,
}

/// Sufficient differential condition for buyer-side nestedness at `(y, x̄₁, x̄₂)`.
pub fn differential_condition(inst: &HedonicInstance, y: f64, x1bar: Pt, x2bar: Pt) -> Result<DifferentialCondition> {
    let (c1, m1) = inst.side(1);
    let (c2, m2) = inst.side(2);
    let k1 = c1.dy(x1bar, y);
    let k2 = c2.dy(x2bar, y);
    if (k1 + k2).abs() > 1e-6 {
        return Err(Error::Hypothesis(format!("k1 + k2 = {} at y={y}, expected 0", k1 + k2)));
    }
    let below1 = 1.0 - superlevel_mass_unchecked(c1, m1, y, k1);
    let below2 = 1.0 - superlevel_mass_unchecked(c2, m2, y, k2);
    if (below1 - below2).abs() > 1e-6 {
        return Err(Error::Hypothesis(format!("mass balance fails at y={y}: {below1} vs {below2}")));
    }
    for (c, m, k, side) in [(c1, m1, k1, 1), (c2, m2, k2, 2)] {
        if LevelCurve::trace(c, m, y, k).is_empty() {
            return Err(Error::Numeric(format!("empty level set on side {side} at y={y}")));
        }
    }
    let a1 = level_integral(c1, m1, y, k1, LevelWeight::CyyOverCross);
    let a2 = level_integral(c2, m2, y, k2, LevelWeight::CyyOverCross);
    let b1 = level_integral(c1, m1, y, k1, LevelWeight::OneOverCross);
    let b2 = level_integral(c2, m2, y, k2, LevelWeight::OneOverCross);
    let value = a1 - a2 - c1.dyy(x1bar, y) * (b1 + b2);
    Ok(DifferentialCondition { a1, a2, b1, b2, value, holds: value < 0.0, k1_prime: (a1 - a2) / (b1 + b2) })
}

/// `differential_condition` at the balanced levels of `y`, with `x̄₁` the midpoint of the buyer's
/// level chord and `x̄₂` the seller's level point (first node for 2-D sellers).
pub fn differential_condition_at(inst: &HedonicInstance, y: f64) -> Result<DifferentialCondition> {
    let BalancePoint::Root { k1, .. } = balance_at(inst, y) else {
        return Err(Error::Hypothesis(format!("y={y} is outside the support")));
    };
    let pick = |side: usize, k: f64| -> Result<Pt> {
        let (c, mu) = inst.side(side);
        let curve = LevelCurve::trace(c, mu, y, k);
        match curve.nodes.len() {
            0 => Err(Error::Numeric(format!("empty level set on side {side} at y={y}"))),
            1 => Ok(curve.nodes[0]),
            _ => Ok((curve.nodes[0] + curve.nodes[1]) * 0.5),
        }
    };
    differential_condition(inst, y, pick(1, k1)?, pick(2, -k1)?)
}
