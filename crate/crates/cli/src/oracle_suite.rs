//! Validation suites for the reference engines, replayed by `oracle-validate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use uneq_ot::level::{dy_extremes, superlevel_mass};
use uneq_ot::oracle::{mc_mass, solve_discrete_ot, DiscreteOtProblem};
use uneq_ot::{CostModel, Domain, Error, SourceMeasure};

#[derive(Clone, Debug, Serialize)]
pub struct OracleRow {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

fn check(name: &str, f: impl FnOnce() -> uneq_ot::Result<(bool, String)>) -> OracleRow {
    match f() {
        Ok((pass, detail)) => OracleRow { name: name.into(), detail, pass },
        Err(e) => OracleRow { name: name.into(), detail: format!("error: {e}"), pass: false },
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn run(seed: u64) -> Vec<OracleRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();

    rows.push(check("single atom", || {
        let s = solve_discrete_ot(&DiscreteOtProblem::new(vec![1.0], vec![1.0], vec![0.7])?)?;
        Ok((s.cost == 0.7 && s.plan.len() == 1, format!("cost {}", s.cost)))
    }));

    let xs: Vec<f64> = {
        let mut v: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.0)).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let ys: Vec<f64> = {
        let mut v: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.0)).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    rows.push(check("1-D monotone matching", || {
        let w = vec![1.0 / 8.0; 8];
        let p = DiscreteOtProblem::from_points(&xs, w.clone(), &ys, w, |a, b| 0.5 * (a - b) * (a - b))?;
        let s = solve_discrete_ot(&p)?;
        let ok = s.plan.iter().filter(|e| e.mass > 1e-12).all(|e| e.i == e.j);
        Ok((ok, format!("{} support entries", s.plan.len())))
    }));

    let c3: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..1.0)).collect();
    rows.push(check("3×3 brute force", || {
        let w = vec![1.0 / 3.0; 3];
        let s = solve_discrete_ot(&DiscreteOtProblem::new(w.clone(), w, c3.clone())?)?;
        let best = permutations(3)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| c3[i * 3 + j]).sum::<f64>() / 3.0)
            .fold(f64::INFINITY, f64::min);
        Ok(((s.cost - best).abs() <= 1e-12, format!("{:.12} vs {:.12}", s.cost, best)))
    }));

    let (ns, nt) = (40, 30);
    let a: Vec<f64> = (0..ns).map(|_| rng.random_range(0.1..1.0)).collect();
    let b: Vec<f64> = (0..nt).map(|_| rng.random_range(0.1..1.0)).collect();
    let cost: Vec<f64> = (0..ns * nt).map(|_| rng.random_range(0.0..1.0)).collect();
    rows.push(check("duality and feasibility (40×30)", || {
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        let a: Vec<f64> = a.iter().map(|v| v / sa).collect();
        let b: Vec<f64> = b.iter().map(|v| v / sb).collect();
        let p = DiscreteOtProblem::new(a.clone(), b.clone(), cost.clone())?;
        let s = solve_discrete_ot(&p)?;
        let (ma, mb) = s.marginals(ns, nt);
        let marg = ma.iter().zip(&a).chain(mb.iter().zip(&b)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let infeas = s.dual_infeasibility(&p);
        let ok = s.gap.abs() <= 1e-9 * s.cost.abs().max(1e-12) && infeas <= 1e-9 && marg <= 1e-10;
        Ok((ok, format!("gap {:.1e}, dual infeasibility {:.1e}, marginals {:.1e}", s.gap, infeas, marg)))
    }));

    rows.push(check("size cap", || {
        let w = vec![1.0 / 2001.0; 2001];
        let r = DiscreteOtProblem::from_points(&w, w.clone(), &w, w.clone(), |_, _| 0.0);
        Ok((matches!(r, Err(Error::SizeCap { .. })), "2001×2001 rejected".into()))
    }));

    let mu = SourceMeasure::uniform(Domain::quarter_disk()).expect("quarter disk");
    let arc = CostModel::BilinearArc;
    rows.push(check("MC always-true", || {
        let e = mc_mass(&mu, |_| true, 10_000, seed);
        Ok(((e.estimate - 1.0).abs() <= 3.0 * e.stderr + 1e-12, format!("{}", e.estimate)))
    }));
    rows.push(check("MC symmetry x₁ ≥ x₂", || {
        let e = mc_mass(&mu, |p| p.x >= p.y, 400_000, seed);
        Ok(((e.estimate - 0.5).abs() <= 3.0 * e.stderr, format!("{:.5} ± {:.5}", e.estimate, e.stderr)))
    }));
    rows.push(check("MC vs quadrature at (0.4, −0.2)", || {
        let exact = superlevel_mass(&arc, &mu, 0.4, -0.2)?;
        let e = mc_mass(&mu, |p| arc.dy(p, 0.4) >= -0.2, 400_000, seed);
        Ok(((e.estimate - exact).abs() <= 4.0 * e.stderr, format!("{:.5} vs {:.5}", e.estimate, exact)))
    }));
    let pairs: Vec<(f64, f64)> = (0..50)
        .map(|_| {
            let y = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
            let (lo, hi) = dy_extremes(&arc, &mu, y);
            (y, rng.random_range(lo..hi))
        })
        .collect();
    rows.push(check("MC vs quadrature, 50 random levels", || {
        let mut worst: f64 = 0.0;
        for (i, &(y, k)) in pairs.iter().enumerate() {
            let exact = superlevel_mass(&arc, &mu, y, k)?;
            let e = mc_mass(&mu, |p| arc.dy(p, y) >= k, 100_000, seed.wrapping_add(i as u64 + 1));
            worst = worst.max((e.estimate - exact).abs() / e.stderr.max(1e-5));
        }
        Ok((worst <= 4.0, format!("worst deviation {worst:.2}σ")))
    }));
    rows
}

pub fn to_markdown(rows: &[OracleRow]) -> String {
    let mut s = String::from("| check | detail | result |\n|---|---|---|\n");
    for r in rows {
        s.push_str(&format!("| {} | {} | {} |\n", r.name, r.detail, if r.pass { "pass" } else { "FAIL" }));
    }
    s
}
