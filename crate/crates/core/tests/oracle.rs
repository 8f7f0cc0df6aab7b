use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_2;
use uneq_ot::oracle::*;
use uneq_ot::*;

fn qd() -> SourceMeasure {
    SourceMeasure::uniform(Domain::quarter_disk()).unwrap()
}

fn check_certificate(p: &DiscreteOtProblem, s: &OtSolution) {
    let (a, b) = s.marginals(p.ns(), p.nt());
    for (x, y) in a.iter().zip(&p.source_weights).chain(b.iter().zip(&p.target_weights)) {
        assert!((x - y).abs() <= 1e-10);
    }
    assert!(s.gap.abs() <= 1e-9 * s.cost.abs().max(1.0), "gap {}", s.gap);
    assert!(s.dual_infeasibility(p) <= 1e-9);
    let nt = p.nt();
    for e in &s.plan {
        assert!((s.dual_u[e.i] + s.dual_v[e.j] - p.cost[e.i * nt + e.j]).abs() <= 1e-9);
    }
}

#[test]
fn single_atom() {
    let p = DiscreteOtProblem::from_points(&[0.3], vec![1.0], &[0.9], vec![1.0], |x, y| (x - y) * (x - y)).unwrap();
    let s = solve_discrete_ot(&p).unwrap();
    assert!((s.cost - 0.36).abs() < 1e-15);
    assert_eq!(s.plan.len(), 1);
    assert_eq!(s.plan[0].mass, 1.0);
}

#[test]
fn monotone_matching_in_one_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut xs: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
    let mut ys: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
    let p = DiscreteOtProblem::from_points(&xs, vec![1.0 / 40.0; 40], &ys, vec![1.0 / 40.0; 40], |x, y| (x - y) * (x - y)).unwrap();
    let s = solve_discrete_ot(&p).unwrap();
    check_certificate(&p, &s);
    let (xs0, ys0) = (xs.clone(), ys.clone());
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let sorted: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / 40.0;
    assert!((s.cost - sorted).abs() < 1e-12);
    // each atom goes to the target of equal rank
    let rank = |v: &[f64], t: f64| v.iter().filter(|&&u| u < t).count();
    for e in &s.plan {
        assert_eq!(rank(&xs0, xs0[e.i]), rank(&ys0, ys0[e.j]));
    }
}

fn permutations3() -> Vec<[usize; 3]> {
    vec![[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
}

#[test]
fn three_by_three_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let c: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = DiscreteOtProblem::new(vec![1.0 / 3.0; 3], vec![1.0 / 3.0; 3], c.clone()).unwrap();
        let s = solve_discrete_ot(&p).unwrap();
        check_certificate(&p, &s);
        let best = permutations3().iter().map(|s| (0..3).map(|i| c[i * 3 + s[i]]).sum::<f64>() / 3.0).fold(f64::INFINITY, f64::min);
        assert!((s.cost - best).abs() < 1e-12);
    }
}

#[test]
fn certificates_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (ns, nt) in [(7, 13), (50, 50), (120, 80)] {
        let weights = |n: usize, rng: &mut ChaCha8Rng| {
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = w.iter().sum();
            let mut w: Vec<f64> = w.iter().map(|v| v / s).collect();
            let rest: f64 = w[..n - 1].iter().sum();
            w[n - 1] = 1.0 - rest;
            w
        };
        let a = weights(ns, &mut rng);
        let b = weights(nt, &mut rng);
        let c: Vec<f64> = (0..ns * nt).map(|_| rng.random_range(0.0..5.0)).collect();
        let p = DiscreteOtProblem::new(a, b, c).unwrap();
        check_certificate(&p, &solve_discrete_ot(&p).unwrap());
    }
}

#[test]
fn size_cap_and_bad_inputs() {
    let big = vec![1.0 / 2001.0; 2001];
    let r = DiscreteOtProblem::from_points(&big, big.clone(), &big, big.clone(), |_, _| 0.0);
    assert!(matches!(r, Err(Error::SizeCap { .. })));
    assert!(DiscreteOtProblem::new(vec![0.5, 0.4], vec![1.0], vec![0.0, 0.0]).is_err());
    assert!(DiscreteOtProblem::new(vec![1.0], vec![1.0], vec![f64::NAN]).is_err());
}

#[test]
fn mc_examples() {
    let mu = qd();
    let all = mc_mass(&mu, |_| true, 100_000, 1);
    assert_eq!(all.estimate, 1.0);
    let half = mc_mass(&mu, |p| p.x >= p.y, 100_000, 1);
    assert!((half.estimate - 0.5).abs() <= 3.0 * half.stderr);
    let c = CostModel::BilinearArc;
    let est = mc_mass(&mu, |p| c.dy(p, 0.4) >= -0.2, 200_000, 2);
    let exact = superlevel_mass(&c, &mu, 0.4, -0.2).unwrap();
    assert!((est.estimate - exact).abs() <= 4.0 * est.stderr);
    // deterministic per seed
    let again = mc_mass(&mu, |p| c.dy(p, 0.4) >= -0.2, 200_000, 2);
    assert_eq!(est.estimate.to_bits(), again.estimate.to_bits());
    assert_eq!(sample_measure(&mu, 1000, 3), sample_measure(&mu, 1000, 3));
}

#[test]
fn mc_agrees_on_random_levels() {
    let c = CostModel::BilinearArc;
    let mu = qd();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut outside = 0;
    for i in 0..50 {
        let y = rng.random_range(0.0..FRAC_PI_2);
        let k = -y.cos() + rng.random_range(0.05..0.95) * (y.sin() + y.cos());
        let est = mc_mass(&mu, |p| c.dy(p, y) >= k, 100_000, 1000 + i);
        let exact = superlevel_mass(&c, &mu, y, k).unwrap();
        if (est.estimate - exact).abs() > 4.0 * est.stderr {
            outside += 1;
        }
    }
    assert_eq!(outside, 0);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn plans_are_feasible_and_certified(seed in 0u64..10_000, ns in 1usize..25, nt in 1usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Pt> = (0..ns).map(|_| Pt::new(rng.random(), rng.random())).collect();
        let ys: Vec<Pt> = (0..nt).map(|_| Pt::new(rng.random(), rng.random())).collect();
        let p = DiscreteOtProblem::from_points(&xs, vec![1.0 / ns as f64; ns], &ys, vec![1.0 / nt as f64; nt], |x, y| (*x - *y).norm()).unwrap_or_else(|_| {
            // uniform weights may miss 1 by more than 1e-12 for some n; renormalise the last entry
            let fix = |n: usize| { let mut w = vec![1.0 / n as f64; n]; let s: f64 = w[..n - 1].iter().sum(); w[n - 1] = 1.0 - s; w };
            DiscreteOtProblem::from_points(&xs, fix(ns), &ys, fix(nt), |x, y| (*x - *y).norm()).unwrap()
        });
        check_certificate(&p, &solve_discrete_ot(&p).unwrap());
    }
}
