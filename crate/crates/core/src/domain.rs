//! Source domains, source densities and the regions obtained by clipping them.

use crate::error::{Error, Result};
use crate::geometry::{ConvexPatch, HalfPlane, Piece, Pt};
use crate::quadrature::{gl64, simpson_piecewise};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    /// `{x₁, x₂ > 0, |x| < radius}`.
    QuarterDisk { radius: f64 },
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    /// One-dimensional `(a, b)`, embedded on the first axis.
    Interval { a: f64, b: f64 },
}

impl Domain {
    pub fn quarter_disk() -> Self {
        Domain::QuarterDisk { radius: 1.0 }
    }
    pub fn unit_square() -> Self {
        Domain::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }
    }
    pub fn unit_interval() -> Self {
        Domain::Interval { a: 0.0, b: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Domain::QuarterDisk { radius } => radius > 0.0 && radius.is_finite(),
            Domain::Rectangle { x0, x1, y0, y1 } => x1 > x0 && y1 > y0,
            Domain::Interval { a, b } => b > a,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("degenerate domain {self:?}")))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            Domain::QuarterDisk { radius } => FRAC_PI_2 * 0.5 * radius * radius,
            Domain::Rectangle { x0, x1, y0, y1 } => (x1 - x0) * (y1 - y0),
            Domain::Interval { a, b } => b - a,
        }
    }

    pub fn bbox(&self) -> (Pt, Pt) {
        match *self {
            Domain::QuarterDisk { radius } => (Pt::new(0.0, 0.0), Pt::new(radius, radius)),
            Domain::Rectangle { x0, x1, y0, y1 } => (Pt::new(x0, y0), Pt::new(x1, y1)),
            Domain::Interval { a, b } => (Pt::new(a, 0.0), Pt::new(b, 0.0)),
        }
    }

    pub fn contains(&self, p: Pt) -> bool {
        match *self {
            Domain::QuarterDisk { radius } => {
                p.x >= 0.0 && p.y >= 0.0 && p.x * p.x + p.y * p.y <= radius * radius
            }
            Domain::Rectangle { x0, x1, y0, y1 } => {
                p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1
            }
            Domain::Interval { a, b } => p.x >= a && p.x <= b,
        }
    }

    pub fn region(&self) -> Region {
        match *self {
            Domain::QuarterDisk { radius } => Region::Patch(ConvexPatch {
                pieces: vec![
                    Piece::Segment { a: Pt::new(0.0, 0.0), b: Pt::new(radius, 0.0) },
                    Piece::Arc { c: Pt::new(0.0, 0.0), r: radius, t0: 0.0, t1: FRAC_PI_2 },
                    Piece::Segment { a: Pt::new(0.0, radius), b: Pt::new(0.0, 0.0) },
                ],
            }),
            Domain::Rectangle { x0, x1, y0, y1 } => Region::Patch(ConvexPatch::polygon(&[
                Pt::new(x0, y0),
                Pt::new(x1, y0),
                Pt::new(x1, y1),
                Pt::new(x0, y1),
            ])),
            Domain::Interval { a, b } => Region::Span { lo: a, hi: b },
        }
    }

    /// Uniform sample by rejection from the bounding box.
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Pt {
        let (lo, hi) = self.bbox();
        loop {
            let p = Pt::new(
                lo.x + (hi.x - lo.x) * rng.random::<f64>(),
                if self.dim() == 1 { 0.0 } else { lo.y + (hi.y - lo.y) * rng.random::<f64>() },
            );
            if self.contains(p) {
                return p;
            }
        }
    }
}

/// A clipped piece of a source domain: a convex patch in the plane or an interval on the line.
#[derive(Clone, Debug)]
pub enum Region {
    Patch(ConvexPatch),
    Span { lo: f64, hi: f64 },
}

impl Region {
    pub fn is_empty(&self) -> bool {
        match self {
            Region::Patch(p) => p.is_empty(),
            Region::Span { lo, hi } => hi < lo,
        }
    }

    pub fn clip(&self, h: &HalfPlane) -> Region {
        match self {
            Region::Patch(p) => Region::Patch(p.clip(h)),
            Region::Span { lo, hi } => {
                let (mut lo, mut hi) = (*lo, *hi);
                if h.g.x > 0.0 {
                    lo = lo.max(h.c / h.g.x);
                } else if h.g.x < 0.0 {
                    hi = hi.min(h.c / h.g.x);
                } else if h.c > 0.0 {
                    return Region::Span { lo: 1.0, hi: 0.0 };
                }
                Region::Span { lo, hi }
            }
        }
    }

    pub fn clip_all(&self, hs: &[HalfPlane]) -> Region {
        let mut r = self.clone();
        for h in hs {
            if r.is_empty() {
                break;
            }
            r = r.clip(h);
        }
        r
    }

    /// Lebesgue measure.
    pub fn volume(&self) -> f64 {
        match self {
            Region::Patch(p) => p.area(),
            Region::Span { lo, hi } => (hi - lo).max(0.0),
        }
    }

    pub fn linear_range(&self, g: Pt) -> Option<(f64, f64)> {
        match self {
            Region::Patch(p) => p.linear_range(g),
            Region::Span { lo, hi } => {
                if hi < lo {
                    None
                } else {
                    let (a, b) = (g.x * lo, g.x * hi);
                    Some((a.min(b), a.max(b)))
                }
            }
        }
    }

    pub fn max_norm(&self) -> f64 {
        match self {
            Region::Patch(p) => p.max_norm(),
            Region::Span { lo, hi } => lo.abs().max(hi.abs()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Density {
    Uniform,
    /// Bilinear interpolation of nodal values over the domain's bounding box.
    Gridded { values: Vec<f64>, nx: usize, ny: usize },
}

#[derive(Clone, Debug)]
pub struct SourceMeasure {
    pub domain: Domain,
    pub density: Density,
    scale: f64,
    sup: f64,
}

impl SourceMeasure {
    pub fn new(domain: Domain, density: Density) -> Result<Self> {
        domain.validate()?;
        let mut m = SourceMeasure { domain, density, scale: 1.0, sup: 1.0 };
        match &m.density {
            Density::Uniform => {
                m.scale = 1.0 / m.domain.volume();
                m.sup = m.scale;
            }
            Density::Gridded { values, nx, ny } => {
                let need = if m.domain.dim() == 1 { *ny == 1 } else { *ny >= 2 };
                if *nx < 2 || !need || values.len() != nx * ny {
                    return Err(Error::Config("gridded density has inconsistent shape".into()));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::Config("gridded density must be finite and nonnegative".into()));
                }
                let total = m.raw_mass(&m.domain.region());
                if total <= 0.0 {
                    return Err(Error::Config("gridded density has zero mass".into()));
                }
                m.scale = 1.0 / total;
                m.sup = values.iter().cloned().fold(0.0, f64::max) * m.scale;
            }
        }
        Ok(m)
    }

    pub fn uniform(domain: Domain) -> Result<Self> {
        Self::new(domain, Density::Uniform)
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.density, Density::Uniform)
    }

    /// `‖μ̄‖_∞`.
    pub fn sup_density(&self) -> f64 {
        self.sup
    }

    fn raw(&self, p: Pt) -> f64 {
        match &self.density {
            Density::Uniform => 1.0,
            Density::Gridded { values, nx, ny } => {
                let (lo, hi) = self.domain.bbox();
                let fx = ((p.x - lo.x) / (hi.x - lo.x) * (*nx - 1) as f64).clamp(0.0, (*nx - 1) as f64);
                let i = (fx.floor() as usize).min(nx - 2);
                let tx = fx - i as f64;
                if *ny == 1 {
                    return values[i] * (1.0 - tx) + values[i + 1] * tx;
                }
                let fy = ((p.y - lo.y) / (hi.y - lo.y) * (*ny - 1) as f64).clamp(0.0, (*ny - 1) as f64);
                let j = (fy.floor() as usize).min(ny - 2);
                let ty = fy - j as f64;
                let v = |i: usize, j: usize| values[j * nx + i];
                (1.0 - ty) * ((1.0 - tx) * v(i, j) + tx * v(i + 1, j))
                    + ty * ((1.0 - tx) * v(i, j + 1) + tx * v(i + 1, j + 1))
            }
        }
    }

    /// `μ̄(x)`; zero outside the closed domain.
    pub fn density_at(&self, p: Pt) -> f64 {
        if self.domain.contains(p) {
            self.scale * self.raw(p)
        } else {
            0.0
        }
    }

    /// `μ̄(x)` without the domain test, for points known to lie on the closed domain.
    pub fn density_unchecked(&self, p: Pt) -> f64 {
        self.scale * self.raw(p)
    }

    /// Grid lines of a gridded density, as x- and y-coordinates.
    pub fn grid_lines(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.density {
            Density::Uniform => (vec![], vec![]),
            Density::Gridded { nx, ny, .. } => {
                let (lo, hi) = self.domain.bbox();
                let xs = (0..*nx).map(|i| lo.x + (hi.x - lo.x) * i as f64 / (*nx - 1) as f64).collect();
                let ys = if *ny > 1 {
                    (0..*ny).map(|j| lo.y + (hi.y - lo.y) * j as f64 / (*ny - 1) as f64).collect()
                } else {
                    vec![]
                };
                (xs, ys)
            }
        }
    }

    /// `μ(region)`.
    pub fn mass(&self, region: &Region) -> f64 {
        if region.is_empty() {
            return 0.0;
        }
        match self.density {
            Density::Uniform => region.volume() * self.scale,
            Density::Gridded { .. } => self.raw_mass(region) * self.scale,
        }
    }

    /// `∫_region f dx` (Lebesgue) for a function that is smooth away from the density grid lines.
    pub fn integrate_lebesgue(&self, region: &Region, f: &(dyn Fn(Pt) -> f64 + Sync), tol: f64) -> f64 {
        let (gx, gy) = self.grid_lines();
        integrate_region(region, f, &gx, &gy, tol)
    }

    fn raw_mass(&self, region: &Region) -> f64 {
        if region.volume() <= 0.0 {
            return 0.0;
        }
        let (gx, gy) = self.grid_lines();
        integrate_region(region, &|p| self.raw(p), &gx, &gy, 1e-12)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Pt {
        loop {
            let p = self.domain.sample_uniform(rng);
            if self.is_uniform() || rng.random::<f64>() * self.sup <= self.density_at(p) {
                return p;
            }
        }
    }
}

fn gl_on(f: &dyn Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    let (x, w) = gl64();
    let mut s = 0.0;
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut part = 0.0;
        for i in 0..x.len() {
            part += w[i] * f(mid + half * x[i]);
        }
        s += part * half;
    }
    s
}

fn with_breaks(lo: f64, hi: f64, lines: &[f64]) -> Vec<f64> {
    let mut b = vec![lo];
    b.extend(lines.iter().cloned().filter(|&t| t > lo && t < hi));
    b.push(hi);
    b
}

/// Iterated integral over a region: Gauss–Legendre across vertical chords, adaptive Simpson
/// along the horizontal axis with breakpoints at vertices and grid lines.
fn integrate_region(region: &Region, f: &(dyn Fn(Pt) -> f64 + Sync), gx: &[f64], gy: &[f64], tol: f64) -> f64 {
    match region {
        Region::Span { lo, hi } => {
            if hi <= lo {
                return 0.0;
            }
            gl_on(&|t| f(Pt::new(t, 0.0)), &with_breaks(*lo, *hi, gx))
        }
        Region::Patch(p) => {
            let Some((xlo, xhi)) = p.linear_range(Pt::new(1.0, 0.0)) else {
                return 0.0;
            };
            if xhi <= xlo {
                return 0.0;
            }
            let mut breaks: Vec<f64> = p.vertices().iter().map(|v| v.x).collect();
            breaks.extend(gx.iter().cloned());
            breaks.push(xlo);
            breaks.push(xhi);
            breaks.retain(|&t| t >= xlo && t <= xhi);
            breaks.sort_by(f64::total_cmp);
            breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
            let inner = |x: f64| -> f64 {
                match p.chord(Pt::new(1.0, 0.0), x) {
                    Some((a, b)) if b.y > a.y => {
                        gl_on(&|t| f(Pt::new(x, t)), &with_breaks(a.y, b.y, gy))
                    }
                    _ => 0.0,
                }
            };
            simpson_piecewise(&inner, &breaks, tol)
        }
    }
}
