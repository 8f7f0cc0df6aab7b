use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uneq_ot::hedonic::*;
use uneq_ot::oracle::{solve_discrete_ot, DiscreteOtProblem};
use uneq_ot::*;

// (−3, 3) on 1201 nodes puts 0, 0.5, 0.8 and 2 on the grid
const NODES: usize = 1201;

fn exact_m(y: f64) -> f64 {
    if y <= 0.8 { 0.75 * y } else { (4.0 * y - y * y).sqrt() - 1.0 }
}

fn solved() -> (HedonicInstance, HedonicSolution) {
    let inst = HedonicInstance::worked_example();
    let sol = solve_m(&inst, NODES).unwrap();
    (inst, sol)
}

#[test]
fn worked_example_m() {
    let (inst, sol) = solved();
    let (s0, s1) = sol.support;
    assert!(s0.abs() < 1e-12 && (s1 - 2.0).abs() < 1e-12, "{:?}", sol.support);
    for (i, &y) in sol.y.iter().enumerate() {
        if sol.in_support[i] && y > 0.0 {
            assert!((sol.m[i] - exact_m(y)).abs() <= 1e-9, "y={y}");
        }
    }
    assert!((m_at(&inst, 2.0).unwrap() - 1.0).abs() <= 1e-12);
    let t = sol.transitions.iter().find(|t| t.side == 1).expect("buyer transition");
    assert!((t.y - 0.8).abs() < 1e-8 && (t.m - 0.6).abs() < 1e-8, "{t:?}");
    // k₁ = y/2 − M at the transition
    let k1 = match balance_at(&inst, 0.8) {
        BalancePoint::Root { k1, .. } => k1,
        other => panic!("{other:?}"),
    };
    assert!((k1 + 0.2).abs() < 1e-12);
}

#[test]
fn balance_and_potentials() {
    let (_, sol) = solved();
    for i in 0..sol.k1.len() {
        assert!((sol.k1.k[i] + sol.k2.k[i]).abs() <= 1e-9);
    }
    let sums: Vec<f64> = sol.k1.v.iter().zip(&sol.k2.v).map(|(a, b)| a + b).collect();
    let spread = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - sums.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread <= 1e-5);
}

#[test]
fn nested_m_is_a_cdf() {
    let (inst, sol) = solved();
    assert!(sol.nested);
    assert!(sol.m.windows(2).all(|w| w[1] >= w[0]));
    let (a, b) = sol.support_index;
    assert!(sol.m[a].abs() <= 1e-6 && (sol.m[b] - 1.0).abs() <= 1e-6);
    let d = hedonic_nestedness_detail(&inst, &sol);
    assert!(d.side2.nested);
    assert_eq!(d.intercept_monotone, Some(true));
}

#[test]
fn decreasing_intercept_is_caught() {
    let (inst, mut sol) = solved();
    // replace k₁ by an increasing profile: the intercept −k₁ then falls
    for (k, y) in sol.k1.k.iter_mut().zip(&sol.k1.y) {
        *k = 0.3 * y - 0.5;
    }
    let (nested, witness) = hedonic_nestedness_check(&inst, &sol);
    assert!(!nested);
    let w = witness.unwrap();
    assert!(w.pair.0 < w.pair.1);
}

#[test]
fn boundary_reports() {
    let (inst, sol) = solved();
    let r = boundary_vanishing_check(&inst, &sol);
    // ends of (−3, 3) lie outside the support
    assert!(!r.lower.in_support && r.lower.vanishes);
    assert!(!r.upper.in_support && r.upper.vanishes);
    // ν̄ = 3/4 next to y = 0
    assert!((r.support_lower.extrapolated_density - 0.75).abs() < 1e-6);
    assert!(!r.support_lower.vanishes);
    let mu = SourceMeasure::uniform(Domain::quarter_disk()).unwrap();
    for y in [0.3, 0.9, 1.4] {
        for at_max in [true, false] {
            let lens = level_set_limit(&CostModel::BilinearArc, &mu, y, at_max);
            assert!(*lens.last().unwrap() <= 1e-6, "{lens:?}");
        }
    }
}

#[test]
fn differential_condition_examples() {
    let (inst, sol) = solved();
    let i = sol.k1.y.iter().position(|y| (y - 0.5).abs() < 1e-12).unwrap();
    let dc = differential_condition_at(&inst, 0.5).unwrap();
    assert!((dc.k1_prime - sol.k1.kprime[i]).abs() <= 1e-4);
    for y in [0.2, 0.5, 1.0, 1.5, 1.9] {
        let dc = differential_condition_at(&inst, y).unwrap();
        assert!(dc.b1 + dc.b2 > 0.0);
    }
    // identical sides: A₁ = A₂ and the value is −D²_yy c (B₁ + B₂)
    let mu = SourceMeasure::uniform(Domain::unit_interval()).unwrap();
    let twin = HedonicInstance::new(CostModel::HedonicSeller, mu.clone(), CostModel::HedonicSeller, mu, (0.0, 1.0)).unwrap();
    for y in [0.2, 0.6] {
        let dc = differential_condition_at(&twin, y).unwrap();
        assert!((dc.a1 - dc.a2).abs() < 1e-14);
        assert!((dc.value + (dc.b1 + dc.b2)).abs() < 1e-14 && dc.holds);
    }
    assert!(differential_condition(&inst, 0.5, Pt::new(0.5, 0.5), Pt::new(0.9, 0.0)).is_err());
}

#[test]
fn equilibrium_beats_perturbations() {
    let (inst, sol) = solved();
    let n = 20;
    let buyers: Vec<Pt> = (0..n * n).map(|i| Pt::new(((i / n) as f64 + 0.5) / n as f64, ((i % n) as f64 + 0.5) / n as f64)).collect();
    let sellers: Vec<Pt> = (0..100).map(|i| Pt::new((i as f64 + 0.5) / 100.0, 0.0)).collect();
    // 100 quantile points of M
    let (a, b) = sol.support_index;
    let goods: Vec<f64> = (0..100)
        .map(|j| {
            let q = (j as f64 + 0.5) / 100.0;
            let i = (a..=b).find(|&i| sol.m[i] >= q).unwrap();
            let (y0, y1, m0, m1) = (sol.y[i - 1], sol.y[i], sol.m[i - 1], sol.m[i]);
            y0 + (y1 - y0) * (q - m0) / (m1 - m0)
        })
        .collect();
    let total = |ys: &[f64]| {
        let w = vec![1.0 / ys.len() as f64; ys.len()];
        let t1 = DiscreteOtProblem::from_points(&buyers, vec![1.0 / buyers.len() as f64; buyers.len()], ys, w.clone(), |x, y| {
            inst.buyer_cost.value(*x, *y)
        })
        .unwrap();
        let t2 = DiscreteOtProblem::from_points(&sellers, vec![0.01; 100], ys, w, |x, y| inst.seller_cost.value(*x, *y)).unwrap();
        solve_discrete_ot(&t1).unwrap().cost + solve_discrete_ot(&t2).unwrap().cost
    };
    let best = total(&goods);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let amp: f64 = rng.random_range(0.02..0.2);
        let pert: Vec<f64> = goods.iter().map(|y| y + amp * rng.random_range(-1.0..1.0)).collect();
        assert!(best <= total(&pert) + 1e-12);
    }
}
