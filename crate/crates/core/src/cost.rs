//! Cost families. Every builtin family has `D_yc(x, y) = g(y)·x + h(y)`, so level sets of
//! `D_yc` are lines and `|D²_xy c| = |g(y)|`.

use crate::domain::{Domain, Region};
use crate::error::{Error, Result};
use crate::geometry::{HalfPlane, Pt};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostModel {
    /// `c = −x₁ cos y − x₂ sin y`.
    BilinearArc,
    /// `c = |x − ι(y)|²/2`, with `y` embedded in the leading source coordinates.
    Quadratic,
    /// `c = −(a·x + b) y + q y²/2`.
    PseudoIndex { a: [f64; 2], b: f64, q: f64 },
    /// `c = x₁y²/2 − x₂y`.
    HedonicBuyer,
    /// `c = −xy + y²/2`.
    HedonicSeller,
}

/// Rounding residue of `sin`/`cos` at multiples of `π/2` is flushed to zero so that level
/// sets along the axes stay edges instead of collapsing to a vertex.
fn snap(v: f64) -> f64 {
    if v.abs() < 1e-15 { 0.0 } else { v }
}

impl CostModel {
    pub fn name(&self) -> &'static str {
        match self {
            CostModel::BilinearArc => "bilinear_arc",
            CostModel::Quadratic => "quadratic",
            CostModel::PseudoIndex { .. } => "pseudo_index",
            CostModel::HedonicBuyer => "hedonic_buyer",
            CostModel::HedonicSeller => "hedonic_seller",
        }
    }

    /// Checks that the family is defined on a source of this dimension.
    pub fn check_domain(&self, domain: &Domain) -> Result<()> {
        let ok = match self {
            CostModel::BilinearArc | CostModel::HedonicBuyer => domain.dim() == 2,
            CostModel::HedonicSeller => domain.dim() == 1,
            CostModel::Quadratic | CostModel::PseudoIndex { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "cost family {} is not defined on a {}-dimensional domain",
                self.name(),
                domain.dim()
            )))
        }
    }

    pub fn value(&self, x: Pt, y: f64) -> f64 {
        match *self {
            CostModel::BilinearArc => -x.x * y.cos() - x.y * y.sin(),
            CostModel::Quadratic => 0.5 * ((x.x - y).powi(2) + x.y * x.y),
            CostModel::PseudoIndex { a, b, q } => -(a[0] * x.x + a[1] * x.y + b) * y + 0.5 * q * y * y,
            CostModel::HedonicBuyer => 0.5 * x.x * y * y - x.y * y,
            CostModel::HedonicSeller => -x.x * y + 0.5 * y * y,
        }
    }

    /// `(g, h)` with `D_yc(x, y) = g·x + h`.
    pub fn affine_dy(&self, y: f64) -> (Pt, f64) {
        match *self {
            CostModel::BilinearArc => (Pt::new(snap(y.sin()), -snap(y.cos())), 0.0),
            CostModel::Quadratic => (Pt::new(-1.0, 0.0), y),
            CostModel::PseudoIndex { a, b, q } => (Pt::new(-a[0], -a[1]), q * y - b),
            CostModel::HedonicBuyer => (Pt::new(y, -1.0), 0.0),
            CostModel::HedonicSeller => (Pt::new(-1.0, 0.0), y),
        }
    }

    pub fn dy(&self, x: Pt, y: f64) -> f64 {
        let (g, h) = self.affine_dy(y);
        g.dot(x) + h
    }

    pub fn dyy(&self, x: Pt, y: f64) -> f64 {
        match *self {
            CostModel::BilinearArc => x.x * y.cos() + x.y * y.sin(),
            CostModel::Quadratic | CostModel::HedonicSeller => 1.0,
            CostModel::PseudoIndex { q, .. } => q,
            CostModel::HedonicBuyer => x.x,
        }
    }

    pub fn dx(&self, x: Pt, y: f64) -> Pt {
        match *self {
            CostModel::BilinearArc => Pt::new(-y.cos(), -y.sin()),
            CostModel::Quadratic => Pt::new(x.x - y, x.y),
            CostModel::PseudoIndex { a, .. } => Pt::new(-a[0] * y, -a[1] * y),
            CostModel::HedonicBuyer => Pt::new(0.5 * y * y, -y),
            CostModel::HedonicSeller => Pt::new(-y, 0.0),
        }
    }

    /// `|D²_xy c(x, y)|`, independent of `x` for every builtin family.
    pub fn cross_norm(&self, y: f64, dim: usize) -> f64 {
        let (g, _) = self.affine_dy(y);
        if dim == 1 {
            g.x.abs()
        } else {
            g.norm()
        }
    }

    /// `{x : D_yc(x, y) >= k}` as a half-plane.
    pub fn superlevel_halfplane(&self, y: f64, k: f64) -> HalfPlane {
        let (g, h) = self.affine_dy(y);
        HalfPlane::new(g, k - h)
    }

    /// `(min, max)` of `D_yc(·, y)` over a region.
    pub fn dy_range(&self, region: &Region, y: f64) -> Option<(f64, f64)> {
        let (g, h) = self.affine_dy(y);
        region.linear_range(g).map(|(lo, hi)| (lo + h, hi + h))
    }

    /// `M_c = sup |D_yc|` over the domain and a sampled target interval.
    pub fn lipschitz(&self, domain: &Domain, lo: f64, hi: f64) -> f64 {
        let region = domain.region();
        let n = 2049;
        (0..n)
            .map(|i| {
                let y = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                let (a, b) = self.dy_range(&region, y).unwrap_or((0.0, 0.0));
                a.abs().max(b.abs())
            })
            .fold(0.0, f64::max)
    }

    /// Sampled twist check: `y ↦ D_xc(x, y)` separates grid points for sampled `x`.
    pub fn check_twist(&self, domain: &Domain, lo: f64, hi: f64) -> bool {
        let (blo, bhi) = domain.bbox();
        let ny = 64;
        let ys: Vec<f64> = (0..ny).map(|i| lo + (hi - lo) * i as f64 / (ny - 1) as f64).collect();
        for ix in 0..9 {
            for iy in 0..9 {
                let x = Pt::new(
                    blo.x + (bhi.x - blo.x) * (ix as f64 + 0.5) / 9.0,
                    blo.y + (bhi.y - blo.y) * (iy as f64 + 0.5) / 9.0,
                );
                if !domain.contains(x) {
                    continue;
                }
                for i in 0..ny {
                    for j in i + 1..ny {
                        if (self.dx(x, ys[i]) - self.dx(x, ys[j])).norm() < 1e-12 {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Sampled non-degeneracy: `|D²_xy c| > 0` on the target interval.
    pub fn check_nondegenerate(&self, domain: &Domain, lo: f64, hi: f64) -> bool {
        (0..=512).all(|i| self.cross_norm(lo + (hi - lo) * i as f64 / 512.0, domain.dim()) > 0.0)
    }

    // Multi-dimensional targets (quadratic family only for n = 2).

    pub fn value_nd(&self, x: Pt, y: &[f64]) -> f64 {
        if y.len() == 1 {
            return self.value(x, y[0]);
        }
        0.5 * ((x.x - y[0]).powi(2) + (x.y - y[1]).powi(2))
    }

    pub fn grad_y(&self, x: Pt, y: &[f64]) -> Vec<f64> {
        if y.len() == 1 {
            return vec![self.dy(x, y[0])];
        }
        vec![y[0] - x.x, y[1] - x.y]
    }

    /// Row-major `n × n` Hessian in `y`.
    pub fn hess_y(&self, x: Pt, y: &[f64]) -> Vec<f64> {
        if y.len() == 1 {
            return vec![self.dyy(x, y[0])];
        }
        vec![1.0, 0.0, 0.0, 1.0]
    }

    /// Row-major `n × m` mixed derivative `D²_yx c`.
    pub fn mixed_yx(&self, _x: Pt, y: &[f64], m: usize) -> Vec<f64> {
        if y.len() == 1 {
            let (g, _) = self.affine_dy(y[0]);
            return if m == 1 { vec![g.x] } else { vec![g.x, g.y] };
        }
        vec![-1.0, 0.0, 0.0, -1.0]
    }

    pub fn supports_target_dim(&self, n: usize, m: usize) -> bool {
        n == 1 || (n == 2 && m == 2 && matches!(self, CostModel::Quadratic))
    }
}
