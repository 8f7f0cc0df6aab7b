//! The reproduction table: every published number recomputed and checked against its tolerance.

use crate::best_reply::{self, DiscreteMeasure, Interaction, InteractionSpec, Potential};
use crate::congestion::{self, FFamily};
use crate::cost::CostModel;
use crate::domain::{Domain, SourceMeasure};
use crate::error::Result;
use crate::geometry::{ConvexPatch, HalfPlane, Pt};
use crate::hedonic::{self, BalancePoint, HedonicInstance};
use crate::level::{dy_extremes, mass_to_k, superlevel_mass};
use crate::nested::{self, TransportMap};
use crate::oracle::{mc_mass, solve_discrete_ot, DiscreteOtProblem};
use crate::quadrature::simpson_uniform;
use crate::target::TargetDensity;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

#[derive(Clone, Debug, Serialize)]
pub struct CriterionRow {
    pub id: u32,
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
    #[serde(skip)]
    pub seconds: f64,
}

fn row(id: u32, name: &str, expected: String, observed: String, pass: bool, t: Instant) -> CriterionRow {
    CriterionRow { id, name: name.into(), expected, observed, pass, seconds: t.elapsed().as_secs_f64() }
}

fn quarter_disk() -> SourceMeasure {
    SourceMeasure::uniform(Domain::quarter_disk()).expect("quarter disk")
}

pub fn closed_form_threshold() -> Result<CriterionRow> {
    let t = Instant::now();
    let v = congestion::congestion_nestedness_threshold(&CostModel::BilinearArc, &quarter_disk(), FFamily::Entropy, 0.0, FRAC_PI_2)?;
    let exact = ((1.0 + (1.0 + 2.0 * PI).sqrt()) / 2.0).ln();
    let pass = (v - exact).abs() <= 1e-6 && t.elapsed().as_secs_f64() < 1.0;
    Ok(row(1, "closed-form threshold", format!("{exact:.10} ± 1e-6, < 1 s"), format!("{v:.10}"), pass, t))
}

pub fn appendix_threshold() -> Result<CriterionRow> {
    let t = Instant::now();
    let v = congestion::appendix_refined_threshold();
    let pass = (v - 0.65806).abs() <= 1e-3 && t.elapsed().as_secs_f64() < 30.0;
    Ok(row(2, "refined numeric threshold", "0.65806 ± 1e-3, < 30 s".into(), format!("{v:.6}"), pass, t))
}

pub fn density_bound_endpoints() -> Result<CriterionRow> {
    let t = Instant::now();
    let b = congestion::density_bounds(&CostModel::BilinearArc, &Domain::quarter_disk(), FFamily::Entropy, (0.0, FRAC_PI_2))?;
    let (a, z) = (b.lower(FRAC_PI_2), b.lower(0.0));
    let pass = (a - 0.0546).abs() <= 1e-3 && (z - 0.2625).abs() <= 1e-3;
    Ok(row(3, "density-bound endpoints", "0.0546, 0.2625 ± 1e-3".into(), format!("{a:.6}, {z:.6}"), pass, t))
}

pub fn uniform_minimiser(nodes: usize) -> Result<CriterionRow> {
    let t = Instant::now();
    let s = congestion::solve_congestion_bvp(&CostModel::BilinearArc, &quarter_disk(), FFamily::Entropy, (0.0, FRAC_PI_2), nodes)?;
    let dnu = s.nu.values.iter().map(|v| (v - 2.0 / PI).abs()).fold(0.0, f64::max);
    let dk = s.kprofile.k.iter().map(|k| k.abs()).fold(0.0, f64::max);
    let pass = dnu <= 1e-3 && dk <= 1e-3;
    Ok(row(4, "uniform minimiser at π/2", "sup|ν̄−2/π|, sup|k| ≤ 1e-3".into(), format!("{dnu:.2e}, {dk:.2e}"), pass, t))
}

pub fn congestion_at_half(nodes: usize) -> Result<CriterionRow> {
    let t = Instant::now();
    let ybar = 0.5;
    let s = congestion::solve_congestion_bvp(&CostModel::BilinearArc, &quarter_disk(), FFamily::Entropy, (0.0, ybar), nodes)?;
    let h = s.nu.step();
    let mass = simpson_uniform(&s.nu.values, h);
    let denom = ybar.exp() - 1.0;
    let slack = s
        .nu
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| v - (-s.nu.node(i)).exp() / denom)
        .fold(f64::INFINITY, f64::min);
    let secs = t.elapsed().as_secs_f64();
    let pass = (mass - 1.0).abs() <= 1e-6 && s.residual <= 1e-4 && slack >= -1e-6 && s.nestedness.nested && secs < 60.0;
    Ok(row(
        5,
        "congestion solution at ȳ=0.5",
        "mass 1±1e-6, residual ≤ 1e-4, above bound, nested, < 60 s".into(),
        format!("mass {mass:.9}, residual {:.1e}, slack {slack:.3}, nested {}", s.residual, s.nestedness.nested),
        pass,
        t,
    ))
}

pub fn hedonic_m(y: f64) -> f64 {
    if y <= 0.8 { 0.75 * y } else { (4.0 * y - y * y).sqrt() - 1.0 }
}

pub fn hedonic_example(nodes: usize) -> Result<Vec<CriterionRow>> {
    let t = Instant::now();
    let inst = HedonicInstance::worked_example();
    let s = hedonic::solve_m(&inst, nodes)?;
    let err = s
        .y
        .iter()
        .zip(&s.m)
        .zip(&s.in_support)
        .filter(|((y, _), inside)| **inside && **y > 0.0 && **y <= 2.0)
        .map(|((y, m), _)| (m - hedonic_m(*y)).abs())
        .fold(0.0, f64::max);
    let m2 = hedonic::m_at(&inst, 2.0).unwrap_or(f64::NAN);
    let (nested, _) = hedonic::hedonic_nestedness_check(&inst, &s);
    let mut fd_err: f64 = 0.0;
    for y in [0.3, 0.5, 1.2, 1.6] {
        let dc = hedonic::differential_condition_at(&inst, y)?;
        let k = |y: f64| match hedonic::balance_at(&inst, y) {
            BalancePoint::Root { k1, .. } => k1,
            _ => f64::NAN,
        };
        let e = 1e-5;
        let fd = (k(y + e) - k(y - e)) / (2.0 * e);
        fd_err = fd_err.max((dc.k1_prime - fd).abs());
    }
    let pass_m = err <= 1e-6 && nested;
    let pass_2 = (m2 - 1.0).abs() <= 1e-8;
    let pass_d = fd_err <= 1e-4;
    Ok(vec![
        row(6, "hedonic M(y)", "sup error ≤ 1e-6, nested".into(), format!("{err:.1e}, nested {nested}"), pass_m, t),
        row(6, "hedonic M(2)=1", "1 ± 1e-8".into(), format!("{m2:.12}"), pass_2, t),
        row(6, "hedonic k₁′ vs finite differences", "≤ 1e-4".into(), format!("{fd_err:.1e}"), pass_d, t),
    ])
}

pub fn quadratic_best_reply_spec() -> InteractionSpec {
    InteractionSpec {
        v: Potential::Quadratic { alpha: 1.0, center: vec![0.0] },
        w: Interaction::Quadratic { beta: 1.0 },
        target_dim: 1,
        target_box: vec![[0.0, 1.0]],
    }
}

pub fn best_reply_quadratic(particles: usize) -> Result<CriterionRow> {
    let t = Instant::now();
    let c = CostModel::Quadratic;
    let mu = SourceMeasure::uniform(Domain::unit_interval())?;
    let (pts, m) = best_reply::source_samples(&mu, particles, 0)?;
    let spec = quadratic_best_reply_spec();
    let (nu, log) = best_reply::solve_fixed_point(&c, &spec, &mu, &pts, &m.weights, &m, 1e-8, 40, 1)?;
    let mean = nu.mean()[0];
    let ratio = log.empirical_ratio.unwrap_or(f64::NAN);
    let (gn, _) = best_reply::generalized_nestedness_check(&c, &spec, &nu, &mu, 64);
    let pass = (mean - 0.25).abs() <= 1e-6 && (0.30..=0.36).contains(&ratio) && log.converged && log.iterations <= 40 && gn;
    Ok(row(
        7,
        "quadratic best-reply fixed point",
        "mean 0.25±1e-6, ratio ∈ [0.30,0.36], ≤ 40 iterations, nested".into(),
        format!("mean {mean:.10}, ratio {ratio:.4}, {} iterations, nested {gn}", log.iterations),
        pass,
        t,
    ))
}

/// Cell of a square grid clipped to the quarter disk.
#[derive(Clone, Debug)]
pub struct Cell {
    pub centroid: Pt,
    pub weight: f64,
    pub vertices: Vec<Pt>,
}

pub fn quarter_disk_cells(n: usize) -> Vec<Cell> {
    let disk = match Domain::quarter_disk().region() {
        crate::domain::Region::Patch(p) => p,
        _ => unreachable!("quarter disk is two-dimensional"),
    };
    let h = 1.0 / n as f64;
    let mut cells = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (x0, y0) = (i as f64 * h, j as f64 * h);
            let p: ConvexPatch = disk.clip_all(&[
                HalfPlane::new(Pt::new(1.0, 0.0), x0),
                HalfPlane::new(Pt::new(-1.0, 0.0), -(x0 + h)),
                HalfPlane::new(Pt::new(0.0, 1.0), y0),
                HalfPlane::new(Pt::new(0.0, -1.0), -(y0 + h)),
            ]);
            let area = p.area();
            if area > 1e-14 {
                cells.push(Cell { centroid: p.centroid().expect("nonempty"), weight: area / (PI / 4.0), vertices: p.vertices() });
            }
        }
    }
    let total: f64 = cells.iter().map(|c| c.weight).sum();
    for c in &mut cells {
        c.weight /= total;
    }
    cells
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleComparison {
    pub nested_cost: f64,
    pub discrete_cost: f64,
    pub relative_gap: f64,
    /// Largest distance, in target grid steps, between a planned target and the range of `T`
    /// over the source cell.
    pub worst_support_steps: f64,
    pub duality_gap: f64,
}

pub fn oracle_comparison(cells_per_side: usize, targets: usize) -> Result<OracleComparison> {
    let cost = CostModel::BilinearArc;
    let mu = quarter_disk();
    let nu = TargetDensity::uniform(0.0, FRAC_PI_2, 1025);
    let kp = nested::solve_k_profile(&cost, &mu, &nu)?;
    let nested_cost = nested::transport_cost(&cost, &mu, &kp);

    let cells = quarter_disk_cells(cells_per_side);
    let dy = FRAC_PI_2 / targets as f64;
    let ys: Vec<f64> = (0..targets).map(|j| (j as f64 + 0.5) * dy).collect();
    let a: Vec<f64> = cells.iter().map(|c| c.weight).collect();
    let p = DiscreteOtProblem::from_points(&cells, a, &ys, vec![1.0 / targets as f64; targets], |c, y| cost.value(c.centroid, *y))?;
    let sol = solve_discrete_ot(&p)?;

    let map = TransportMap::new(&cost, &kp);
    let ranges: Vec<(f64, f64)> = cells
        .iter()
        .map(|c| {
            c.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                let t = map.eval(*v).map(|m| m.y).unwrap_or(if v.x > v.y { 0.0 } else { FRAC_PI_2 });
                (lo.min(t), hi.max(t))
            })
        })
        .collect();
    let worst = sol
        .plan
        .iter()
        .filter(|e| e.mass > 1e-12)
        .map(|e| {
            let (lo, hi) = ranges[e.i];
            let y = ys[e.j];
            ((lo - y).max(y - hi).max(0.0)) / dy
        })
        .fold(0.0, f64::max);
    Ok(OracleComparison {
        nested_cost,
        discrete_cost: sol.cost,
        relative_gap: ((nested_cost - sol.cost) / sol.cost).abs(),
        worst_support_steps: worst,
        duality_gap: sol.gap,
    })
}

pub fn oracle_equivalence() -> Result<CriterionRow> {
    let t = Instant::now();
    let o = oracle_comparison(50, 200)?;
    let pass = o.relative_gap <= 0.01 && o.worst_support_steps <= 2.0;
    Ok(row(
        8,
        "nested cost vs exact discrete OT",
        "relative gap ≤ 1%, support within 2 cells".into(),
        format!("{:.6} vs {:.6} ({:.2e}), support {:.2} cells", o.nested_cost, o.discrete_cost, o.relative_gap, o.worst_support_steps),
        pass,
        t,
    ))
}

/// Reduced-size versions of the property suites.
pub fn property_spot_checks(seed: u64) -> Result<CriterionRow> {
    let t = Instant::now();
    let cost = CostModel::BilinearArc;
    let mu = quarter_disk();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut monotone = true;
    for _ in 0..1000 {
        let y = rng.random_range(0.0..FRAC_PI_2);
        let (lo, hi) = dy_extremes(&cost, &mu, y);
        let (mut k0, mut k1) = (rng.random_range(lo..hi), rng.random_range(lo..hi));
        if k0 > k1 {
            std::mem::swap(&mut k0, &mut k1);
        }
        monotone &= superlevel_mass(&cost, &mu, y, k0)? >= superlevel_mass(&cost, &mu, y, k1)? - 1e-14;
    }

    let mut round_trip: f64 = 0.0;
    for _ in 0..200 {
        let y = rng.random_range(0.0..FRAC_PI_2);
        let m = rng.random_range(0.0..1.0);
        let k = mass_to_k(&cost, &mu, y, m)?;
        round_trip = round_trip.max((superlevel_mass(&cost, &mu, y, k)? - m).abs());
    }

    let measure = |rng: &mut ChaCha8Rng| {
        let pts: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        DiscreteMeasure::uniform(pts)
    };
    let mut triangle: f64 = f64::NEG_INFINITY;
    for _ in 0..100 {
        let (a, b, c) = (measure(&mut rng)?, measure(&mut rng)?, measure(&mut rng)?);
        triangle = triangle.max(best_reply::w1(&a, &c)? - best_reply::w1(&a, &b)? - best_reply::w1(&b, &c)?);
    }

    let mut mc_ok = true;
    for i in 0..50 {
        let y = rng.random_range(0.0..FRAC_PI_2);
        let (lo, hi) = dy_extremes(&cost, &mu, y);
        let k = rng.random_range(lo..hi);
        let exact = superlevel_mass(&cost, &mu, y, k)?;
        let est = mc_mass(&mu, |p| cost.dy(p, y) >= k, 100_000, seed.wrapping_add(i));
        mc_ok &= (est.estimate - exact).abs() <= 4.0 * est.stderr.max(1e-5);
    }

    let nu = TargetDensity::from_fn(0.0, FRAC_PI_2, 513, |y| 1.0 + 0.5 * (2.0 * y).sin())?;
    let ks = nested::solve_nested(&cost, &mu, &nu, 200_000, seed)?.ks_statistic;

    let pass = monotone && round_trip <= 1e-8 && triangle <= 1e-10 && mc_ok && ks <= 0.01;
    Ok(row(
        9,
        "property spot checks",
        "monotone, round trip ≤ 1e-8, triangle, MC within 4σ, KS ≤ 0.01".into(),
        format!("monotone {monotone}, round trip {round_trip:.1e}, triangle {triangle:.1e}, MC {mc_ok}, KS {ks:.4}"),
        pass,
        t,
    ))
}

/// Every criterion; failures to compute are reported as failing rows.
pub fn run_all(seed: u64) -> Vec<CriterionRow> {
    let mut rows = Vec::new();
    let mut push = |id: u32, name: &str, r: Result<Vec<CriterionRow>>| match r {
        Ok(v) => rows.extend(v),
        Err(e) => rows.push(CriterionRow {
            id,
            name: name.into(),
            expected: String::new(),
            observed: format!("error: {e}"),
            pass: false,
            seconds: 0.0,
        }),
    };
    push(1, "closed-form threshold", closed_form_threshold().map(|r| vec![r]));
    push(2, "refined numeric threshold", appendix_threshold().map(|r| vec![r]));
    push(3, "density-bound endpoints", density_bound_endpoints().map(|r| vec![r]));
    push(4, "uniform minimiser", uniform_minimiser(513).map(|r| vec![r]));
    push(5, "congestion solution", congestion_at_half(513).map(|r| vec![r]));
    push(6, "hedonic example", hedonic_example(1025));
    push(7, "quadratic best-reply", best_reply_quadratic(1000).map(|r| vec![r]));
    push(8, "oracle equivalence", oracle_equivalence().map(|r| vec![r]));
    push(9, "property spot checks", property_spot_checks(seed).map(|r| vec![r]));
    rows
}

pub fn to_markdown(rows: &[CriterionRow]) -> String {
    let mut s = String::from("# Reproduction report\n\n| # | check | expected | observed | time (s) | result |\n|---|---|---|---|---|---|\n");
    for r in rows {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {:.2} | {} |\n",
            r.id,
            r.name,
            r.expected.replace('|', "\\|"),
            r.observed.replace('|', "\\|"),
            r.seconds,
            if r.pass { "✅ pass" } else { "❌ FAIL" }
        ));
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    s.push_str(&format!("\n{passed}/{} checks passed.\n", rows.len()));
    s
}
