//! Level and super-level sets of `D_yc`, their masses and line integrals.

use crate::cost::CostModel;
use crate::domain::{Domain, Region, SourceMeasure};
use crate::error::{Error, Result};
use crate::geometry::Pt;
use crate::quadrature::gl64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `L(y, k) = √(1 − k²) + k tan y`, the length of the quarter-disk level segment for `k <= 0`.
pub fn arc_level_length(y: f64, k: f64) -> f64 {
    if k == 0.0 {
        return 1.0;
    }
    (1.0 - k * k).max(0.0).sqrt() + k * y.tan()
}

/// Closed-form `μ(X_≥(y, k))` for the uniform unit quarter disk with the bilinear arc cost,
/// valid for `k <= 0` and `−k <= cos y`.
pub fn arc_closed_form_mass(y: f64, k: f64) -> f64 {
    4.0 / PI * (-0.5 * k * arc_level_length(y, k) + 0.5 * (y - k.asin()))
}

fn closed_form_applies(cost: &CostModel, mu: &SourceMeasure, y: f64, k: f64) -> bool {
    matches!(cost, CostModel::BilinearArc)
        && mu.domain == Domain::quarter_disk()
        && mu.is_uniform()
        && k <= 0.0
        && (0.0..=PI / 2.0).contains(&y)
        && (k == 0.0 || (y.cos() > 1e-3 && -k <= y.cos()))
}

pub fn superlevel_region(cost: &CostModel, mu: &SourceMeasure, y: f64, k: f64) -> Region {
    mu.domain.region().clip(&cost.superlevel_halfplane(y, k))
}

/// `μ(X_≥(y, k))`.
pub fn superlevel_mass(cost: &CostModel, mu: &SourceMeasure, y: f64, k: f64) -> Result<f64> {
    cost.check_domain(&mu.domain)?;
    if !k.is_finite() || !y.is_finite() {
        return Err(Error::Numeric(format!("non-finite level (y={y}, k={k})")));
    }
    Ok(superlevel_mass_unchecked(cost, mu, y, k))
}

pub(crate) fn superlevel_mass_unchecked(cost: &CostModel, mu: &SourceMeasure, y: f64, k: f64) -> f64 {
    if closed_form_applies(cost, mu, y, k) {
        return arc_closed_form_mass(y, k).clamp(0.0, 1.0);
    }
    mu.mass(&superlevel_region(cost, mu, y, k)).clamp(0.0, 1.0)
}

/// `(min, max)` of `D_yc(·, y)` over the closed domain.
pub fn dy_extremes(cost: &CostModel, mu: &SourceMeasure, y: f64) -> (f64, f64) {
    cost.dy_range(&mu.domain.region(), y).expect("domain region is nonempty")
}

/// The level `k` with `μ(X_≥(y, k)) = M`.
pub fn mass_to_k(cost: &CostModel, mu: &SourceMeasure, y: f64, m: f64) -> Result<f64> {
    cost.check_domain(&mu.domain)?;
    if !(-1e-12..=1.0 + 1e-12).contains(&m) {
        return Err(Error::Config(format!("mass {m} outside [0, 1]")));
    }
    mass_to_k_clamped(cost, mu, y, m)
}

/// As `mass_to_k`, clamping `m` into `[0, 1]`.
pub fn mass_to_k_clamped(cost: &CostModel, mu: &SourceMeasure, y: f64, m: f64) -> Result<f64> {
    let (kmin, kmax) = dy_extremes(cost, mu, y);
    if m <= 0.0 {
        return Ok(kmax);
    }
    if m >= 1.0 {
        return Ok(kmin);
    }
    let (mut lo, mut hi) = (kmin, kmax);
    let (mut mlo, mut mhi) = (1.0, 0.0);
    let scale = 1.0f64.max(kmin.abs()).max(kmax.abs());
    for _ in 0..200 {
        if hi - lo <= 1e-15 * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let mm = superlevel_mass_unchecked(cost, mu, y, mid);
        if mm > mlo + 1e-12 || mm < mhi - 1e-12 {
            return Err(Error::Numeric(format!(
                "non-monotone mass profile at y={y}: bracket [{lo}, {hi}] with masses [{mlo}, {mhi}], mid mass {mm}"
            )));
        }
        if mm == m {
            return Ok(mid);
        }
        if mm > m {
            lo = mid;
            mlo = mm;
        } else {
            hi = mid;
            mhi = mm;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelWeight {
    OneOverCross,
    CyyOverCross,
}

/// `X_=(y, k) ∩ X̄` traced as a polyline: two nodes for a segment, one for an isolated point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelCurve {
    pub y: f64,
    pub k: f64,
    pub nodes: Vec<Pt>,
    /// Arclength of each polyline edge.
    pub lengths: Vec<f64>,
}

impl LevelCurve {
    pub fn trace(cost: &CostModel, mu: &SourceMeasure, y: f64, k: f64) -> LevelCurve {
        let (g, h) = cost.affine_dy(y);
        let mut nodes = Vec::new();
        match mu.domain.region() {
            Region::Span { lo, hi } => {
                if g.x != 0.0 {
                    let t = (k - h) / g.x;
                    if t >= lo && t <= hi {
                        nodes.push(Pt::new(t, 0.0));
                    }
                }
            }
            Region::Patch(p) => {
                if let Some((a, b)) = p.chord(g, k - h) {
                    nodes.push(a);
                    if (b - a).norm() > 0.0 {
                        nodes.push(b);
                    }
                }
            }
        }
        let lengths = nodes.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        LevelCurve { y, k, nodes, lengths }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    /// Sample points spread evenly along the curve (endpoints included).
    pub fn sample_points(&self, n: usize) -> Vec<Pt> {
        match self.nodes.len() {
            0 => vec![],
            1 => vec![self.nodes[0]],
            _ => {
                let (a, b) = (self.nodes[0], self.nodes[1]);
                (0..n.max(2))
                    .map(|i| a + (b - a) * (i as f64 / (n.max(2) - 1) as f64))
                    .collect()
            }
        }
    }
}

/// `∫_{X_=(y,k)} μ̄ w / |D²_xy c| dH^{m−1}`, with `w = 1` or `D²_yy c`.
pub fn level_integral(cost: &CostModel, mu: &SourceMeasure, y: f64, k: f64, weight: LevelWeight) -> f64 {
    let curve = LevelCurve::trace(cost, mu, y, k);
    level_integral_on(cost, mu, &curve, weight)
}

pub fn level_integral_on(cost: &CostModel, mu: &SourceMeasure, curve: &LevelCurve, weight: LevelWeight) -> f64 {
    let cross = cost.cross_norm(curve.y, mu.domain.dim());
    if curve.is_empty() || cross == 0.0 {
        return 0.0;
    }
    let y = curve.y;
    let w = |p: Pt| match weight {
        LevelWeight::OneOverCross => 1.0,
        LevelWeight::CyyOverCross => cost.dyy(p, y),
    };
    if curve.nodes.len() == 1 {
        if mu.domain.dim() == 1 {
            let p = curve.nodes[0];
            return mu.density_unchecked(p) * w(p) / cross;
        }
        return 0.0;
    }
    let (a, b) = (curve.nodes[0], curve.nodes[1]);
    let len = curve.lengths[0];
    let mut ts = vec![0.0, 1.0];
    let (gx, gy) = mu.grid_lines();
    let d = b - a;
    for (lines, da, aa) in [(&gx, d.x, a.x), (&gy, d.y, a.y)] {
        if da != 0.0 {
            for &l in lines.iter() {
                let t = (l - aa) / da;
                if t > 0.0 && t < 1.0 {
                    ts.push(t);
                }
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    let (x, wt) = gl64();
    let mut s = 0.0;
    for seg in ts.windows(2) {
        let half = 0.5 * (seg[1] - seg[0]);
        let mid = 0.5 * (seg[1] + seg[0]);
        for i in 0..x.len() {
            let p = a + d * (mid + half * x[i]);
            s += wt[i] * half * mu.density_unchecked(p) * w(p);
        }
    }
    s * len / cross
}
