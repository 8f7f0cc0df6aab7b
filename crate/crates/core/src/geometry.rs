//! Planar primitives: points, convex regions bounded by segments and circular arcs,
//! half-plane clipping and exact area/moment integrals along the boundary.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Pt {
    pub x: f64,
    pub y: f64,
}

impl Pt {
    pub const fn new(x: f64, y: f64) -> Self {
        Pt { x, y }
    }
    pub fn dot(self, o: Pt) -> f64 {
        self.x * o.x + self.y * o.y
    }
    pub fn cross(self, o: Pt) -> f64 {
        self.x * o.y - self.y * o.x
    }
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
    pub fn polar(r: f64, t: f64) -> Self {
        Pt::new(r * t.cos(), r * t.sin())
    }
}

impl Add for Pt {
    type Output = Pt;
    fn add(self, o: Pt) -> Pt {
        Pt::new(self.x + o.x, self.y + o.y)
    }
}
impl Sub for Pt {
    type Output = Pt;
    fn sub(self, o: Pt) -> Pt {
        Pt::new(self.x - o.x, self.y - o.y)
    }
}
impl Mul<f64> for Pt {
    type Output = Pt;
    fn mul(self, s: f64) -> Pt {
        Pt::new(self.x * s, self.y * s)
    }
}
impl Neg for Pt {
    type Output = Pt;
    fn neg(self) -> Pt {
        Pt::new(-self.x, -self.y)
    }
}

/// `{x : g·x >= c}`.
#[derive(Clone, Copy, Debug)]
pub struct HalfPlane {
    pub g: Pt,
    pub c: f64,
}

impl HalfPlane {
    pub fn new(g: Pt, c: f64) -> Self {
        HalfPlane { g, c }
    }
    /// The closed complement `{g·x <= c}`.
    pub fn flipped(&self) -> Self {
        HalfPlane { g: -self.g, c: -self.c }
    }
}

/// A counter-clockwise boundary piece.
#[derive(Clone, Copy, Debug)]
pub enum Piece {
    Segment { a: Pt, b: Pt },
    Arc { c: Pt, r: f64, t0: f64, t1: f64 },
}

impl Piece {
    pub fn start(&self) -> Pt {
        match *self {
            Piece::Segment { a, .. } => a,
            Piece::Arc { c, r, t0, .. } => c + Pt::polar(r, t0),
        }
    }
    pub fn end(&self) -> Pt {
        match *self {
            Piece::Segment { b, .. } => b,
            Piece::Arc { c, r, t1, .. } => c + Pt::polar(r, t1),
        }
    }

    /// Euclidean distance from `p` to the piece.
    pub fn distance(&self, p: Pt) -> f64 {
        match *self {
            Piece::Segment { a, b } => {
                let d = b - a;
                let l2 = d.dot(d);
                let t = if l2 > 0.0 { ((p - a).dot(d) / l2).clamp(0.0, 1.0) } else { 0.0 };
                (p - (a + d * t)).norm()
            }
            Piece::Arc { c, r, t0, t1 } => {
                let q = p - c;
                let mut t = q.y.atan2(q.x);
                while t < t0 {
                    t += 2.0 * PI;
                }
                if t <= t1 {
                    (q.norm() - r).abs()
                } else {
                    (p - self.start()).norm().min((p - self.end()).norm())
                }
            }
        }
    }

    /// Contribution to `½∮(x dy − y dx)`.
    fn area_term(&self) -> f64 {
        match *self {
            Piece::Segment { a, b } => 0.5 * a.cross(b),
            Piece::Arc { c, r, t0, t1 } => {
                0.5 * (r * c.x * (t1.sin() - t0.sin()) - r * c.y * (t1.cos() - t0.cos())
                    + r * r * (t1 - t0))
            }
        }
    }

    /// Contributions to `(∫∫x dA, ∫∫y dA)`.
    fn moment_terms(&self) -> (f64, f64) {
        match *self {
            Piece::Segment { a, b } => {
                let d = b - a;
                let x2dy = d.y * (a.x * a.x + a.x * d.x + d.x * d.x / 3.0);
                let y2dx = d.x * (a.y * a.y + a.y * d.y + d.y * d.y / 3.0);
                (0.5 * x2dy, -0.5 * y2dx)
            }
            Piece::Arc { c, r, t0, t1 } => {
                let fx = |t: f64| {
                    r * (c.x * c.x * t.sin()
                        + 2.0 * c.x * r * (0.5 * t + 0.25 * (2.0 * t).sin())
                        + r * r * (t.sin() - t.sin().powi(3) / 3.0))
                };
                let fy = |t: f64| {
                    -r * (-c.y * c.y * t.cos() + 2.0 * c.y * r * (0.5 * t - 0.25 * (2.0 * t).sin())
                        + r * r * (-t.cos() + t.cos().powi(3) / 3.0))
                };
                (0.5 * (fx(t1) - fx(t0)), -0.5 * (fy(t1) - fy(t0)))
            }
        }
    }

    fn clip(&self, h: &HalfPlane, out: &mut Vec<Piece>) {
        match *self {
            Piece::Segment { a, b } => {
                let fa = h.g.dot(a) - h.c;
                let fb = h.g.dot(b) - h.c;
                if fa >= 0.0 && fb >= 0.0 {
                    out.push(*self);
                } else if fa >= 0.0 {
                    let t = fa / (fa - fb);
                    out.push(Piece::Segment { a, b: a + (b - a) * t });
                } else if fb >= 0.0 {
                    let t = fa / (fa - fb);
                    out.push(Piece::Segment { a: a + (b - a) * t, b });
                }
            }
            Piece::Arc { c, r, t0, t1 } => {
                let gn = h.g.norm();
                let base = h.g.dot(c) - h.c;
                if gn == 0.0 {
                    if base >= 0.0 {
                        out.push(*self);
                    }
                    return;
                }
                let s = -base / (r * gn);
                if s <= -1.0 {
                    out.push(*self);
                    return;
                }
                if s >= 1.0 {
                    return;
                }
                let alpha = h.g.y.atan2(h.g.x);
                let beta = s.acos();
                let mut parts: Vec<(f64, f64)> = Vec::with_capacity(2);
                for k in -2..=2 {
                    let shift = 2.0 * PI * k as f64;
                    let lo = t0.max(alpha - beta + shift);
                    let hi = t1.min(alpha + beta + shift);
                    if hi > lo {
                        parts.push((lo, hi));
                    }
                }
                parts.sort_by(|p, q| p.0.total_cmp(&q.0));
                for (lo, hi) in parts {
                    out.push(Piece::Arc { c, r, t0: lo, t1: hi });
                }
            }
        }
    }

    fn linear_extremes(&self, g: Pt, lo: &mut f64, hi: &mut f64) {
        let mut upd = |v: f64| {
            *lo = lo.min(v);
            *hi = hi.max(v);
        };
        upd(g.dot(self.start()));
        upd(g.dot(self.end()));
        if let Piece::Arc { c, r, t0, t1 } = *self {
            let gn = g.norm();
            if gn > 0.0 {
                let alpha = g.y.atan2(g.x);
                for cand in [alpha, alpha + PI] {
                    for k in -2..=2 {
                        let t = cand + 2.0 * PI * k as f64;
                        if t > t0 && t < t1 {
                            upd(g.dot(c + Pt::polar(r, t)));
                        }
                    }
                }
            }
        }
    }

    fn line_hits(&self, g: Pt, c0: f64, out: &mut Vec<Pt>) {
        match *self {
            Piece::Segment { a, b } => {
                let fa = g.dot(a) - c0;
                let fb = g.dot(b) - c0;
                if fa == 0.0 {
                    out.push(a);
                }
                if fb == 0.0 {
                    out.push(b);
                }
                if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
                    let t = fa / (fa - fb);
                    out.push(a + (b - a) * t);
                }
            }
            Piece::Arc { c, r, t0, t1 } => {
                let gn = g.norm();
                if gn == 0.0 {
                    return;
                }
                let s = (c0 - g.dot(c)) / (r * gn);
                if !(-1.0..=1.0).contains(&s) {
                    return;
                }
                let alpha = g.y.atan2(g.x);
                let beta = s.acos();
                for cand in [alpha - beta, alpha + beta] {
                    for k in -2..=2 {
                        let t = cand + 2.0 * PI * k as f64;
                        if t >= t0 - 1e-15 && t <= t1 + 1e-15 {
                            out.push(c + Pt::polar(r, t.clamp(t0, t1)));
                        }
                    }
                }
            }
        }
    }
}

/// Closed convex region described by its counter-clockwise boundary.
#[derive(Clone, Debug, Default)]
pub struct ConvexPatch {
    pub pieces: Vec<Piece>,
}

const GAP: f64 = 1e-14;

impl ConvexPatch {
    pub fn polygon(vertices: &[Pt]) -> Self {
        let n = vertices.len();
        let pieces = (0..n)
            .map(|i| Piece::Segment { a: vertices[i], b: vertices[(i + 1) % n] })
            .collect();
        ConvexPatch { pieces }
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Intersection with a half-plane; gaps left by removed boundary are closed with chords.
    pub fn clip(&self, h: &HalfPlane) -> ConvexPatch {
        let mut kept = Vec::with_capacity(self.pieces.len() + 2);
        for p in &self.pieces {
            p.clip(h, &mut kept);
        }
        if kept.is_empty() {
            return ConvexPatch::default();
        }
        let n = kept.len();
        let mut pieces = Vec::with_capacity(n + 2);
        for i in 0..n {
            pieces.push(kept[i]);
            let e = kept[i].end();
            let s = kept[(i + 1) % n].start();
            if (e - s).norm() > GAP {
                pieces.push(Piece::Segment { a: e, b: s });
            }
        }
        let patch = ConvexPatch { pieces };
        if patch.area() <= 0.0 {
            ConvexPatch::default()
        } else {
            patch
        }
    }

    pub fn clip_all(&self, hs: &[HalfPlane]) -> ConvexPatch {
        let mut p = self.clone();
        for h in hs {
            if p.is_empty() {
                break;
            }
            p = p.clip(h);
        }
        p
    }

    pub fn area(&self) -> f64 {
        self.pieces.iter().map(Piece::area_term).sum::<f64>().max(0.0)
    }

    /// `(∫∫x dA, ∫∫y dA)`.
    pub fn moments(&self) -> (f64, f64) {
        self.pieces.iter().fold((0.0, 0.0), |acc, p| {
            let (a, b) = p.moment_terms();
            (acc.0 + a, acc.1 + b)
        })
    }

    pub fn centroid(&self) -> Option<Pt> {
        let a = self.area();
        if a <= 0.0 {
            return None;
        }
        let (mx, my) = self.moments();
        Some(Pt::new(mx / a, my / a))
    }

    /// `(min, max)` of `g·x` over the closed region.
    pub fn linear_range(&self, g: Pt) -> Option<(f64, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.pieces {
            p.linear_extremes(g, &mut lo, &mut hi);
        }
        Some((lo, hi))
    }

    /// Intersection of the line `g·x = c` with the region, ordered along `(−g.y, g.x)`.
    pub fn chord(&self, g: Pt, c: f64) -> Option<(Pt, Pt)> {
        let mut hits = Vec::new();
        for p in &self.pieces {
            p.line_hits(g, c, &mut hits);
        }
        if hits.is_empty() {
            return None;
        }
        let d = Pt::new(-g.y, g.x);
        let mut lo = hits[0];
        let mut hi = hits[0];
        for &h in &hits[1..] {
            if d.dot(h) < d.dot(lo) {
                lo = h;
            }
            if d.dot(h) > d.dot(hi) {
                hi = h;
            }
        }
        Some((lo, hi))
    }

    /// Index of the boundary piece nearest to `p`.
    pub fn nearest_piece(&self, p: Pt) -> Option<usize> {
        self.pieces
            .iter()
            .enumerate()
            .map(|(i, q)| (i, q.distance(p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    pub fn max_norm(&self) -> f64 {
        let mut m: f64 = 0.0;
        for p in &self.pieces {
            m = m.max(p.start().norm()).max(p.end().norm());
            if let Piece::Arc { c, r, t0, t1 } = *p {
                if c.norm() == 0.0 {
                    m = m.max(r);
                } else {
                    let t = c.y.atan2(c.x);
                    for k in -2..=2 {
                        let tt = t + 2.0 * PI * k as f64;
                        if tt > t0 && tt < t1 {
                            m = m.max(c.norm() + r);
                        }
                    }
                }
            }
        }
        m
    }

    pub fn vertices(&self) -> Vec<Pt> {
        self.pieces.iter().map(Piece::start).collect()
    }
}
