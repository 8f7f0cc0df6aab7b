//! Acceptance table: one PASS/FAIL line per criterion, checked against values computed here.

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::Instant;
use uneq_ot::best_reply::{self, DiscreteMeasure};
use uneq_ot::congestion::{self, FFamily};
use uneq_ot::hedonic::{self, HedonicInstance};
use uneq_ot::level::dy_extremes;
use uneq_ot::nested;
use uneq_ot::oracle::{mc_mass, sample_measure};
use uneq_ot::reproduce;
use uneq_ot::*;

type Outcome = std::result::Result<String, String>;

fn qd() -> SourceMeasure {
    SourceMeasure::uniform(Domain::quarter_disk()).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) > 0.0) == (fa > 0.0) { a = m } else { b = m }
    }
    0.5 * (a + b)
}

fn trapezoid(v: &[f64], h: f64) -> f64 {
    h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]))
}

fn c1() -> Outcome {
    let t = Instant::now();
    let v = congestion::congestion_nestedness_threshold(&CostModel::BilinearArc, &qd(), FFamily::Entropy, 0.0, FRAC_PI_2).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let closed = ((1.0 + (1.0 + 2.0 * PI).sqrt()) / 2.0).ln();
    // the same number as the root of e^{−ȳ}/(e^{ȳ}−1) = 2/π
    let root = bisect(|s| (-s).exp() / (s.exp() - 1.0) - 2.0 / PI, 0.1, 1.5);
    check((v - closed).abs() <= 1e-6 && (root - closed).abs() <= 1e-10 && secs < 1.0, format!("{v:.10} vs {closed:.10}, {secs:.3} s"))
}

fn c2() -> Outcome {
    let t = Instant::now();
    let v = congestion::appendix_refined_threshold();
    let secs = t.elapsed().as_secs_f64();
    check((v - 0.65806).abs() <= 1e-3 && secs < 30.0, format!("{v:.6}, {secs:.2} s"))
}

fn c3() -> Outcome {
    let b = congestion::density_bounds(&CostModel::BilinearArc, &Domain::quarter_disk(), FFamily::Entropy, (0.0, FRAC_PI_2))
        .map_err(|e| e.to_string())?;
    let (a, z) = (b.lower(FRAC_PI_2), b.lower(0.0));
    check((a - 0.0546).abs() <= 1e-3 && (z - 0.2625).abs() <= 1e-3, format!("{a:.5}, {z:.5}"))
}

fn c4() -> Outcome {
    let s = congestion::solve_congestion_bvp(&CostModel::BilinearArc, &qd(), FFamily::Entropy, (0.0, FRAC_PI_2), 513).map_err(|e| e.to_string())?;
    let dnu = s.nu.values.iter().map(|v| (v - 2.0 / PI).abs()).fold(0.0, f64::max);
    let dk = s.kprofile.k.iter().map(|k| k.abs()).fold(0.0, f64::max);
    check(dnu <= 1e-3 && dk <= 1e-3, format!("sup|ν̄−2/π| {dnu:.1e}, sup|k| {dk:.1e}"))
}

fn c5() -> Outcome {
    let t = Instant::now();
    let c = CostModel::BilinearArc;
    let mu = qd();
    let s = congestion::solve_congestion_bvp(&c, &mu, FFamily::Entropy, (0.0, 0.5), 513).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let h = 0.5 / 512.0;
    let mass = trapezoid(&s.nu.values, h);
    let slack = s.nu.values.iter().enumerate().map(|(i, v)| v - (-(i as f64) * h).exp() / (0.5f64.exp() - 1.0)).fold(f64::INFINITY, f64::min);
    let nested = nested::check_nestedness(&c, &mu, &s.kprofile, &s.nu).nested;
    check(
        (mass - 1.0).abs() <= 1e-6 && s.residual <= 1e-4 && slack >= -1e-6 && nested && secs < 60.0,
        format!("mass {mass:.9}, residual {:.1e}, slack {slack:.4}, nested {nested}, {secs:.1} s", s.residual),
    )
}

fn c6() -> Outcome {
    let inst = HedonicInstance::worked_example();
    let s = hedonic::solve_m(&inst, 1025).map_err(|e| e.to_string())?;
    let exact = |y: f64| if y <= 0.8 { 0.75 * y } else { (4.0 * y - y * y).sqrt() - 1.0 };
    let err = (0..s.y.len()).filter(|&i| s.in_support[i] && s.y[i] > 0.0 && s.y[i] <= 2.0).map(|i| (s.m[i] - exact(s.y[i])).abs()).fold(0.0, f64::max);
    let m2 = hedonic::m_at(&inst, 2.0).unwrap_or(f64::NAN);
    let (nested, _) = hedonic::hedonic_nestedness_check(&inst, &s);
    // k₁(y): the level whose buyer superlevel set {x₁y − x₂ ≥ k} has area M(y)
    let k1 = |y: f64| {
        let n = 20_000;
        let area = |k: f64| (0..n).map(|i| (((i as f64 + 0.5) / n as f64) * y - k).clamp(0.0, 1.0)).sum::<f64>() / n as f64;
        bisect(|k| area(k) - exact(y), -1.5, 2.5)
    };
    let mut fd: f64 = 0.0;
    for y in [0.3, 0.5, 1.2, 1.6] {
        let dc = hedonic::differential_condition_at(&inst, y).map_err(|e| e.to_string())?;
        let e = 1e-4;
        fd = fd.max((dc.k1_prime - (k1(y + e) - k1(y - e)) / (2.0 * e)).abs());
    }
    check(err <= 1e-6 && (m2 - 1.0).abs() <= 1e-8 && nested && fd <= 1e-4, format!("sup err {err:.1e}, M(2) {m2:.10}, nested {nested}, k₁′ err {fd:.1e}"))
}

fn c7() -> Outcome {
    let c = CostModel::Quadratic;
    let mu = SourceMeasure::uniform(Domain::unit_interval()).map_err(|e| e.to_string())?;
    let (pts, m) = best_reply::source_samples(&mu, 1000, 0).map_err(|e| e.to_string())?;
    let spec = reproduce::quadratic_best_reply_spec();
    let (nu, log) = best_reply::solve_fixed_point(&c, &spec, &mu, &pts, &m.weights, &m, 1e-8, 40, 1).map_err(|e| e.to_string())?;
    let mean = nu.mean()[0];
    let ratio = log.empirical_ratio.unwrap_or(f64::NAN);
    // y = (x + m)/3 with m = x̄/2 at the fixed point
    let xbar = pts.iter().map(|p| p.x).sum::<f64>() / pts.len() as f64;
    let map_err = pts.iter().zip(&nu.points).map(|(p, y)| (y[0] - (p.x / 3.0 + xbar / 6.0)).abs()).fold(0.0, f64::max);
    let (gn, _) = best_reply::generalized_nestedness_check(&c, &spec, &nu, &mu, 64);
    check(
        (mean - 0.25).abs() <= 1e-6 && (0.30..=0.36).contains(&ratio) && log.converged && log.iterations <= 40 && gn && map_err <= 1e-7,
        format!("mean {mean:.9}, ratio {ratio:.4}, {} iterations, map err {map_err:.1e}, nested {gn}", log.iterations),
    )
}

fn c8() -> Outcome {
    let o = reproduce::oracle_comparison(50, 200).map_err(|e| e.to_string())?;
    // uniform target: T(x) is the angle of x, so the cost is −E|x|·E[cos(θ−θ)] = −∫|x| dμ = −2/3
    let exact = -2.0 / 3.0;
    check(
        o.relative_gap <= 0.01 && o.worst_support_steps <= 2.0 && ((o.nested_cost - exact) / exact).abs() <= 1e-6,
        format!("nested {:.6}, LP {:.6}, gap {:.1e}, support {:.2} cells", o.nested_cost, o.discrete_cost, o.relative_gap, o.worst_support_steps),
    )
}

fn w1_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn c9() -> Outcome {
    let t = Instant::now();
    let c = CostModel::BilinearArc;
    let mu = qd();
    let runner = |cases: u32| TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    let mut notes = Vec::new();

    runner(1000)
        .run(&(0.0..FRAC_PI_2, 0.0..1.0f64, 0.0..1.0f64), |(y, s, u)| {
            let (lo, hi) = dy_extremes(&c, &mu, y);
            let (k0, k1) = (lo + s.min(u) * (hi - lo), lo + s.max(u) * (hi - lo));
            prop_assert!(superlevel_mass(&c, &mu, y, k0).unwrap() >= superlevel_mass(&c, &mu, y, k1).unwrap() - 1e-14);
            Ok(())
        })
        .map_err(|e| format!("monotone: {e}"))?;
    notes.push("monotone");

    runner(1000)
        .run(&(0.0..FRAC_PI_2, 0.0..=1.0f64), |(y, m)| {
            let k = mass_to_k(&c, &mu, y, m).unwrap();
            prop_assert!((superlevel_mass(&c, &mu, y, k).unwrap() - m).abs() <= 1e-8);
            Ok(())
        })
        .map_err(|e| format!("round trip: {e}"))?;
    notes.push("round trip");

    let cloud = prop::collection::vec(-1.0..1.0f64, 20);
    runner(100)
        .run(&(cloud.clone(), cloud.clone(), cloud), |(a, b, z)| {
            let m = |v: &Vec<f64>| DiscreteMeasure::uniform(v.iter().map(|x| vec![*x]).collect()).unwrap();
            let (ma, mb, mz) = (m(&a), m(&b), m(&z));
            let (ab, bz, az) = (best_reply::w1(&ma, &mb).unwrap(), best_reply::w1(&mb, &mz).unwrap(), best_reply::w1(&ma, &mz).unwrap());
            prop_assert!((ab - w1_sorted(&a, &b)).abs() <= 1e-12);
            prop_assert!(az <= ab + bz + 1e-10);
            Ok(())
        })
        .map_err(|e| format!("triangle: {e}"))?;
    notes.push("triangle");

    let seeds = std::sync::atomic::AtomicU64::new(0);
    runner(50)
        .run(&(0.0..FRAC_PI_2, 0.02..0.98f64), |(y, s)| {
            let (lo, hi) = dy_extremes(&c, &mu, y);
            let k = lo + s * (hi - lo);
            let seed = seeds.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            let est = mc_mass(&mu, |p| c.dy(p, y) >= k, 100_000, 7000 + seed);
            let exact = superlevel_mass(&c, &mu, y, k).unwrap();
            prop_assert!((est.estimate - exact).abs() <= 4.0 * est.stderr, "{} vs {}", est.estimate, exact);
            Ok(())
        })
        .map_err(|e| format!("MC: {e}"))?;
    notes.push("MC");

    let mut worst_ks: f64 = 0.0;
    for (i, shape) in [0.0, 0.5, 0.25].into_iter().enumerate() {
        let nu = TargetDensity::from_fn(0.0, FRAC_PI_2, 513, |y| 1.0 + shape * (2.0 * y).sin()).map_err(|e| e.to_string())?;
        let sol = nested::solve_nested(&c, &mu, &nu, 100_000, 11 + i as u64).map_err(|e| e.to_string())?;
        if !sol.nested {
            return Err(format!("shape {shape} not nested"));
        }
        let map = nested::TransportMap::new(&c, &sol.kprofile);
        let xs = sample_measure(&mu, 100_000, 101 + i as u64);
        let mut ys: Vec<f64> = xs.iter().map(|x| map.eval(*x).map(|m| m.y)).collect::<Result<_>>().map_err(|e| e.to_string())?;
        ys.sort_by(f64::total_cmp);
        let n = ys.len() as f64;
        let h = nu.step();
        let cdf = |y: f64| {
            let s = (y / h).clamp(0.0, (nu.len() - 1) as f64);
            let i = (s.floor() as usize).min(nu.len() - 2);
            nu.cdf[i] + (s - i as f64) * (nu.cdf[i + 1] - nu.cdf[i])
        };
        let ks = ys.iter().enumerate().map(|(j, y)| ((j as f64 + 1.0) / n - cdf(*y)).abs().max((cdf(*y) - j as f64 / n).abs())).fold(0.0, f64::max);
        worst_ks = worst_ks.max(ks);
    }
    let secs = t.elapsed().as_secs_f64();
    check(worst_ks <= 0.01 && secs < 300.0, format!("{}, KS {worst_ks:.4}, {secs:.1} s", notes.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("closed-form threshold", c1),
        ("refined numeric threshold", c2),
        ("density-bound endpoints", c3),
        ("uniform minimiser", c4),
        ("congestion solution at 0.5", c5),
        ("hedonic example", c6),
        ("quadratic best reply", c7),
        ("oracle equivalence", c8),
        ("property suites", c9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("PASS criterion {} ({name}): {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {d}", i + 1)
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
