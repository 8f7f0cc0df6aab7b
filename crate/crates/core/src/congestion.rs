//! Congestion-penalised transport: density bounds, the shooting solver for the first-order
//! condition, and nestedness thresholds.

use crate::cost::CostModel;
use crate::domain::{Domain, SourceMeasure};
use crate::error::{Error, Result};
use crate::level::mass_to_k_clamped;
use crate::nested::{check_nestedness, max_dmin_rate, minimal_difference_region, minimal_volume_difference, solve_k_profile, KProfile, NestednessReport};
use crate::quadrature::{adaptive_simpson, bisect_increasing, cumulative_trapezoid, golden_max};
use crate::target::TargetDensity;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Convex integrand of the congestion functional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FFamily {
    /// `f(t) = t ln t − t`, so `f′ = ln` and `(f′)⁻¹ = exp`.
    Entropy,
    /// `f(t) = t^p/(p−1)`. Has `f′(0) = 0`, so the density bounds are not guaranteed.
    Power { p: f64 },
}

impl FFamily {
    pub fn validate(&self, allow_nonconforming: bool) -> Result<()> {
        match *self {
            FFamily::Entropy => Ok(()),
            FFamily::Power { p } if !(p > 1.0) => Err(Error::Config(format!("power family needs p > 1, got {p}"))),
            FFamily::Power { .. } if !allow_nonconforming => Err(Error::Hypothesis(
                "power congestion has f'(0) = 0; pass the non-conforming flag to use it".into(),
            )),
            FFamily::Power { .. } => Ok(()),
        }
    }

    pub fn f(&self, t: f64) -> f64 {
        match *self {
            FFamily::Entropy => {
                if t <= 0.0 { 0.0 } else { t * t.ln() - t }
            }
            FFamily::Power { p } => t.max(0.0).powf(p) / (p - 1.0),
        }
    }

    pub fn fprime(&self, t: f64) -> f64 {
        match *self {
            FFamily::Entropy => t.ln(),
            FFamily::Power { p } => p / (p - 1.0) * t.max(0.0).powf(p - 1.0),
        }
    }

    pub fn fsecond(&self, t: f64) -> f64 {
        match *self {
            FFamily::Entropy => 1.0 / t,
            FFamily::Power { p } => p * t.max(0.0).powf(p - 2.0),
        }
    }

    /// `(f′)⁻¹`, extended by zero below `f′(0)`.
    pub fn fprime_inv(&self, z: f64) -> f64 {
        match *self {
            FFamily::Entropy => z.exp(),
            FFamily::Power { p } => ((p - 1.0) / p * z).max(0.0).powf(1.0 / (p - 1.0)),
        }
    }
}

/// `K_v(m)`: the `C` with `∫ (f′)⁻¹(C − v(y)) dy = m` over `interval`.
pub fn kv_invert(f: FFamily, v: &dyn Fn(f64) -> f64, interval: (f64, f64), target_mass: f64) -> Result<f64> {
    let (a, b) = interval;
    let mass = |c: f64| adaptive_simpson(&|y| f.fprime_inv(c - v(y)), a, b, 1e-14);
    solve_constant(&mass, target_mass, 0.0, 1.0)
}

/// Monotone root of `mass(C) = target` by bracket expansion then bisection.
fn solve_constant(mass: &dyn Fn(f64) -> f64, target: f64, guess: f64, width: f64) -> Result<f64> {
    let (mut lo, mut hi) = (guess - width, guess + width);
    let mut expansions = 0;
    while mass(lo) > target {
        lo -= (hi - lo).max(1.0);
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Numeric(format!("normalising constant bracket failed below {lo}")));
        }
    }
    while mass(hi) < target {
        hi += (hi - lo).max(1.0);
        expansions += 1;
        if expansions > 120 {
            return Err(Error::Numeric(format!("normalising constant bracket failed above {hi}")));
        }
    }
    Ok(bisect_increasing(|c| mass(c) - target, lo, hi, 1e-15 * (1.0 + lo.abs().max(hi.abs()))))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DensityBounds {
    pub f: FFamily,
    pub m_c: f64,
    pub interval: (f64, f64),
    /// `K_{−M_c|y|}(1)`.
    pub c_low: f64,
    /// `K_{M_c|y|}(1)`.
    pub c_high: f64,
}

impl DensityBounds {
    fn dist(&self, y: f64) -> f64 {
        (y - self.interval.0).abs()
    }

    pub fn lower(&self, y: f64) -> f64 {
        self.f.fprime_inv(self.c_low - self.m_c * self.dist(y))
    }

    pub fn upper(&self, y: f64) -> f64 {
        self.f.fprime_inv(self.c_high + self.m_c * self.dist(y))
    }
}

/// A-priori bounds on the density of any congestion minimiser. Distances `|y|` are measured
/// from the lower end of the interval, where the potential is pinned to zero.
pub fn density_bounds(cost: &CostModel, domain: &Domain, f: FFamily, interval: (f64, f64)) -> Result<DensityBounds> {
    let m_c = cost.lipschitz(domain, interval.0, interval.1);
    density_bounds_with(m_c, f, interval)
}

pub fn density_bounds_with(m_c: f64, f: FFamily, interval: (f64, f64)) -> Result<DensityBounds> {
    let lo = interval.0;
    let c_low = kv_invert(f, &|y| -m_c * (y - lo).abs(), interval, 1.0)?;
    let c_high = kv_invert(f, &|y| m_c * (y - lo).abs(), interval, 1.0)?;
    Ok(DensityBounds { f, m_c, interval, c_low, c_high })
}

fn is_quarter_disk_arc(cost: &CostModel, mu: &SourceMeasure) -> bool {
    matches!(cost, CostModel::BilinearArc)
        && matches!(mu.domain, Domain::QuarterDisk { radius } if radius == 1.0)
        && mu.is_uniform()
}

/// `ln((1+√(1+2π))/2)`: root of `e^{−ȳ}/(e^{ȳ}−1) = 2/π`.
pub fn quarter_disk_entropy_threshold() -> f64 {
    ((1.0 + (1.0 + 2.0 * PI).sqrt()) / 2.0).ln()
}

/// Largest `ȳ` for which the density lower bound beats the largest minimal mass-difference rate.
/// Uses the closed form on the uniform quarter disk with entropy; numerics otherwise.
pub fn congestion_nestedness_threshold(cost: &CostModel, mu: &SourceMeasure, f: FFamily, y_lo: f64, y_max: f64) -> Result<f64> {
    if is_quarter_disk_arc(cost, mu) && f == FFamily::Entropy && y_lo == 0.0 {
        return Ok(quarter_disk_entropy_threshold().min(y_max));
    }
    numeric_nestedness_threshold(cost, mu, f, y_lo, y_max, 9)
}

/// Threshold by bisection on `ȳ`, with the rate sup taken over a `pairs`-node grid and all levels.
pub fn numeric_nestedness_threshold(cost: &CostModel, mu: &SourceMeasure, f: FFamily, y_lo: f64, y_max: f64, pairs: usize) -> Result<f64> {
    let slack = |ybar: f64| -> Result<f64> {
        let b = density_bounds(cost, &mu.domain, f, (y_lo, ybar))?;
        let min_lower = (0..=256)
            .map(|i| b.lower(y_lo + (ybar - y_lo) * i as f64 / 256.0))
            .fold(f64::INFINITY, f64::min);
        let n = pairs.max(2);
        let ys: Vec<f64> = (0..n).map(|i| y_lo + (ybar - y_lo) * i as f64 / (n - 1) as f64).collect();
        let sup = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| max_dmin_rate(cost, mu, ys[i], ys[j], 17, false).1)
            .reduce(|| 0.0, f64::max);
        Ok(min_lower - sup)
    };
    if slack(y_max)? >= 0.0 {
        return Ok(y_max);
    }
    let (mut lo, mut hi) = (y_lo, y_max);
    let span = y_max - y_lo;
    // the slack blows up as ȳ → y_lo, so start strictly inside
    let mut a = y_lo + 1e-3 * span;
    while slack(a)? < 0.0 {
        a = y_lo + 0.5 * (a - y_lo);
        if a - y_lo < 1e-12 * span {
            return Ok(y_lo);
        }
    }
    lo = lo.max(a);
    while hi - lo > 1e-10 * span.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if slack(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `L(y, k) = √(1−k²) + k tan y`: length of the level chord in the quarter disk.
pub fn appendix_l(y: f64, k: f64) -> f64 {
    (1.0 - k * k).max(0.0).sqrt() + k * y.tan()
}

/// `φ(y, k) = −kL(y,k) + y − arcsin k`, equal to `π/2` times the superlevel mass.
pub fn appendix_phi(y: f64, k: f64) -> f64 {
    -k * appendix_l(y, k) + y - k.asin()
}

/// Inverse of the decreasing map `k ↦ φ(y, k)` on `[−cos y, 0]`, clamped at the ends.
pub fn appendix_z(y: f64, m: f64) -> f64 {
    let (a, b) = (-y.cos(), 0.0);
    if m <= appendix_phi(y, b) {
        return b;
    }
    if m >= appendix_phi(y, a) {
        return a;
    }
    bisect_increasing(|k| m - appendix_phi(y, k), a, b, 1e-16)
}

/// Refined threshold on the uniform quarter disk with entropy: largest `ȳ` for which
/// `e^y L²(y, Z(y; (π/2)(1−e^{−y})/(e^{ȳ}−1))) ≤ π/(2(e^{ȳ}−1))` on `(0, ȳ)`.
pub fn appendix_refined_threshold() -> f64 {
    let holds = |ybar: f64| {
        let e = ybar.exp() - 1.0;
        let rhs = PI / (2.0 * e);
        let lhs = |y: f64| {
            let k = appendix_z(y, FRAC_PI_2 * (1.0 - (-y).exp()) / e);
            y.exp() * appendix_l(y, k).powi(2)
        };
        let n = 2000;
        let h = ybar / n as f64;
        let (i, best) = (1..n).map(|i| (i, lhs(h * i as f64))).fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let refined = golden_max(lhs, h * (i as f64 - 1.0).max(1e-3), h * (i + 1) as f64, 1e-13).1;
        best.max(refined) <= rhs
    };
    let (mut lo, mut hi) = (0.5, 0.9);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CongestionSolution {
    pub kprofile: KProfile,
    pub nu: TargetDensity,
    /// Normalising constant in `v + f′(ν̄) = C`.
    pub c: f64,
    /// `sup |v + f′(ν̄) − C|` with `v` the running integral of `k`.
    pub residual: f64,
    pub bounds: DensityBounds,
    /// Smallest `ν̄ − lower` over the grid.
    pub bound_slack: f64,
    pub nestedness: NestednessReport,
    pub threshold: f64,
    /// The interval lies below the nestedness threshold.
    pub verified: bool,
    /// Nodes where a negative intermediate density was clipped.
    pub clipped: usize,
    pub shots: usize,
}

fn shoot(cost: &CostModel, mu: &SourceMeasure, f: FFamily, ys: &[f64], c: f64, clipped: &mut usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = ys.len();
    let h = ys[1] - ys[0];
    let dens = |v: f64, clipped: &mut usize| {
        let d = f.fprime_inv(c - v);
        if d < 1e-12 {
            *clipped += 1;
            1e-12
        } else {
            d
        }
    };
    let kf = |y: f64, m: f64| mass_to_k_clamped(cost, mu, y, m.clamp(0.0, 1.0));
    let mut v = vec![0.0; n];
    let mut mass = vec![0.0; n];
    for i in 0..n - 1 {
        let (y, v0, m0) = (ys[i], v[i], mass[i]);
        let k1 = kf(y, m0)?;
        let r1 = dens(v0, clipped);
        let k2 = kf(y + h / 2.0, m0 + h / 2.0 * r1)?;
        let r2 = dens(v0 + h / 2.0 * k1, clipped);
        let k3 = kf(y + h / 2.0, m0 + h / 2.0 * r2)?;
        let r3 = dens(v0 + h / 2.0 * k2, clipped);
        let k4 = kf(y + h, m0 + h * r3)?;
        let r4 = dens(v0 + h * k3, clipped);
        v[i + 1] = v0 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        mass[i + 1] = m0 + h / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4);
    }
    Ok((v, mass))
}

/// Solves `v + f′(ν̄) = C`, `v′ = k`, `μ(X_≥(y, k(y))) = ∫ν̄` by shooting on `C`.
/// `nodes` counts grid points including both ends.
pub fn solve_congestion_bvp(
    cost: &CostModel,
    mu: &SourceMeasure,
    f: FFamily,
    interval: (f64, f64),
    nodes: usize,
) -> Result<CongestionSolution> {
    cost.check_domain(&mu.domain)?;
    let (lo, hi) = interval;
    if nodes < 3 || hi <= lo {
        return Err(Error::Config("congestion solve needs an interval and at least three nodes".into()));
    }
    let bounds = density_bounds(cost, &mu.domain, f, interval)?;
    let ys: Vec<f64> = (0..nodes).map(|i| if i + 1 == nodes { hi } else { lo + (hi - lo) * i as f64 / (nodes - 1) as f64 }).collect();

    let mut shots = 0;
    let mut clipped = 0;
    let mut end_mass = |c: f64| -> Result<f64> {
        shots += 1;
        let mut cl = 0;
        let (_, m) = shoot(cost, mu, f, &ys, c, &mut cl)?;
        Ok(m[nodes - 1])
    };
    let pad = 1e-9 * (1.0 + bounds.c_low.abs().max(bounds.c_high.abs()));
    let (mut a, mut b) = (bounds.c_low - pad, bounds.c_high + pad);
    let mut expansions = 0;
    while end_mass(a)? > 1.0 {
        a -= (b - a).max(1.0);
        expansions += 1;
        if expansions > 40 {
            return Err(Error::Numeric(format!("shooting bracket failure below C={a}")));
        }
    }
    while end_mass(b)? < 1.0 {
        b += (b - a).max(1.0);
        expansions += 1;
        if expansions > 80 {
            return Err(Error::Numeric(format!("shooting bracket failure above C={b}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b || b - a < 1e-15 * (1.0 + a.abs()) {
            break;
        }
        let m = end_mass(mid)?;
        if m == 1.0 {
            a = mid;
            b = mid;
            break;
        }
        if m < 1.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let c_shot = 0.5 * (a + b);
    let (v, _) = shoot(cost, mu, f, &ys, c_shot, &mut clipped)?;
    let raw: Vec<f64> = v.iter().map(|&v| f.fprime_inv(c_shot - v).max(1e-12)).collect();
    let nu = TargetDensity::new(lo, hi, raw)?;
    let kp = solve_k_profile(cost, mu, &nu)?;

    let h = ys[1] - ys[0];
    let v_trap = cumulative_trapezoid(&kp.k, h);
    let sums: Vec<f64> = v_trap.iter().zip(&nu.values).map(|(v, d)| v + f.fprime(*d)).collect();
    let smin = sums.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let c = 0.5 * (smin + smax);
    let residual = 0.5 * (smax - smin);
    let bound_slack = ys.iter().zip(&nu.values).map(|(&y, &d)| d - bounds.lower(y)).fold(f64::INFINITY, f64::min);
    let nestedness = check_nestedness(cost, mu, &kp, &nu);
    let threshold = congestion_nestedness_threshold(cost, mu, f, lo, hi)?;
    Ok(CongestionSolution {
        verified: hi <= threshold,
        kprofile: kp,
        nu,
        c,
        residual,
        bounds,
        bound_slack,
        nestedness,
        threshold,
        clipped,
        shots,
    })
}

/// `∫ f(ν̄)` by the trapezoid rule on the density's grid.
pub fn congestion_energy(f: FFamily, nu: &TargetDensity) -> f64 {
    let vals: Vec<f64> = nu.values.iter().map(|&d| f.f(d)).collect();
    *cumulative_trapezoid(&vals, nu.step()).last().unwrap()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HighDimReport {
    pub holds: bool,
    /// `sup [upper_μ · D^min_vol/(y₁−y₀) − min ν̄]` over sampled pairs and levels; negative when it holds.
    pub margin: f64,
    /// `K_{M_c|x|}(1)` on the source.
    pub k_source: f64,
}

/// Sufficient condition for nestedness of every source-side congestion minimiser with target
/// density `nu_bar` fixed on `interval`.
pub fn highdim_congestion_check(
    cost: &CostModel,
    domain: &Domain,
    nu_bar: &(dyn Fn(f64) -> f64 + Sync),
    interval: (f64, f64),
    g: FFamily,
    grid: usize,
) -> Result<HighDimReport> {
    let mu = SourceMeasure::uniform(domain.clone())?;
    let m_c = cost.lipschitz(domain, interval.0, interval.1);
    let region = domain.region();
    let source_mass = |c: f64| mu.integrate_lebesgue(&region, &|x| g.fprime_inv(c - m_c * x.norm()), 1e-12);
    let k_source = solve_constant(&source_mass, 1.0, 0.0, 1.0)?;
    let upper = |r: f64| g.fprime_inv(k_source + m_c * r);

    let (lo, hi) = interval;
    let n = grid.max(2);
    let ys: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let dens: Vec<f64> = ys.iter().map(|&y| nu_bar(y)).collect();
    let n_levels = 33;
    let margin = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let (kmin, kmax) = crate::level::dy_extremes(cost, &mu, ys[i]);
            let mut worst = f64::NEG_INFINITY;
            let mut running_min = dens[i];
            for j in i + 1..n {
                running_min = running_min.min(dens[j]);
                for l in 0..n_levels {
                    let k0 = kmin + (kmax - kmin) * l as f64 / (n_levels - 1) as f64;
                    let dvol = minimal_volume_difference(cost, &mu, ys[i], ys[j], k0).value;
                    if dvol <= 0.0 {
                        continue;
                    }
                    let r = minimal_difference_region(cost, &mu, ys[i], ys[j], k0).max_norm();
                    worst = worst.max(upper(r) * dvol / (ys[j] - ys[i]) - running_min);
                }
            }
            worst
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(HighDimReport { holds: margin < 0.0, margin, k_source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_examples() {
        let f = FFamily::Entropy;
        let ybar = 0.7;
        let c = kv_invert(f, &|y| y, (0.0, ybar), 1.0).unwrap();
        assert!((c - (1.0 / (1.0 - (-ybar).exp())).ln()).abs() < 1e-12);
        assert!(kv_invert(f, &|_| 0.0, (0.0, 1.0), 1.0).unwrap().abs() < 1e-13);
        let c = kv_invert(f, &|y| -y, (0.0, 0.5), 1.0).unwrap();
        assert!((c.exp() * (0.5f64.exp() - 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_bounds_closed_form() {
        let b = density_bounds_with(1.0, FFamily::Entropy, (0.0, 0.5)).unwrap();
        let y = 0.25;
        assert!((b.lower(y) - (-y as f64).exp() / (0.5f64.exp() - 1.0)).abs() < 1e-12);
        assert!(b.lower(y) < b.upper(y));
    }

    #[test]
    fn threshold_closed_form() {
        let t = quarter_disk_entropy_threshold();
        assert!(((-t).exp() / (t.exp() - 1.0) - 2.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn appendix_pieces() {
        for &y in &[0.1, 0.4, 0.65] {
            assert!((appendix_l(y, 0.0) - 1.0).abs() < 1e-15);
            let m = 0.3 + y;
            let z = appendix_z(y, m);
            assert!((appendix_phi(y, z) - m).abs() < 1e-10);
        }
    }

    #[test]
    fn power_family_needs_flag() {
        let f = FFamily::Power { p: 2.0 };
        assert!(f.validate(false).unwrap_err().is_hypothesis());
        assert!(f.validate(true).is_ok());
        assert!((f.fprime_inv(f.fprime(0.7)) - 0.7).abs() < 1e-14);
    }
}
