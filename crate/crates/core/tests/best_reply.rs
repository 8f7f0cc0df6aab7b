use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use uneq_ot::best_reply::*;
use uneq_ot::oracle::{solve_discrete_ot, DiscreteOtProblem};
use uneq_ot::*;

fn spec(alpha: f64, center: f64, w: Interaction, lo: f64, hi: f64) -> InteractionSpec {
    InteractionSpec { v: Potential::Quadratic { alpha, center: vec![center] }, w, target_dim: 1, target_box: vec![[lo, hi]] }
}

fn unit() -> SourceMeasure {
    SourceMeasure::uniform(Domain::unit_interval()).unwrap()
}

fn cloud(ys: &[f64]) -> DiscreteMeasure {
    DiscreteMeasure::uniform(ys.iter().map(|y| vec![*y]).collect()).unwrap()
}

#[test]
fn first_variation_examples() {
    let s = spec(2.0, 0.3, Interaction::None, 0.0, 1.0);
    let nu = cloud(&[0.1, 0.9]);
    let fv = first_variation(&s, &nu, &[0.7]);
    assert!((fv.value - 0.16).abs() < 1e-15 && (fv.grad[0] - 0.8).abs() < 1e-15 && fv.hess[0] == 2.0);

    let s = spec(1.0, 0.0, Interaction::Quadratic { beta: 1.5 }, 0.0, 1.0);
    let fv = first_variation(&s, &DiscreteMeasure::dirac(vec![0.2]), &[0.6]);
    assert!((fv.grad[0] - (0.6 + 1.5 * 0.4)).abs() < 1e-15);
    assert!((fv.value - (0.18 + 0.75 * 0.16)).abs() < 1e-15);

    // DF(y) = V′(y) + β(y − m) for any cloud with mean m
    let ys = [0.05, 0.3, 0.45, 0.8, 0.95];
    let m = ys.iter().sum::<f64>() / 5.0;
    let fv = first_variation(&s, &cloud(&ys), &[0.4]);
    assert!((fv.grad[0] - (0.4 + 1.5 * (0.4 - m))).abs() < 1e-14);
    // direct particle sum of W(y, z) = β(y−z)²/2
    let direct: f64 = ys.iter().map(|z| 0.75 * (0.4 - z) * (0.4 - z)).sum::<f64>() / 5.0 + 0.08;
    assert!((fv.value - direct).abs() < 1e-14);
}

#[test]
fn best_response_examples() {
    let c = CostModel::Quadratic;
    let s = spec(1.0, 0.0, Interaction::None, 0.0, 1.0);
    let nu = cloud(&[0.9]);
    let field = Field::new(&s, &nu);
    for x in [0.0, 0.3, 0.77, 1.0] {
        let y = best_response(&c, &field, Pt::new(x, 0.0)).unwrap()[0];
        assert!((y - x / 2.0).abs() < 1e-12);
    }
    let s = spec(1.0, 0.0, Interaction::Quadratic { beta: 1.0 }, 0.0, 1.0);
    let nu = cloud(&[0.2, 0.5, 0.65]);
    let m = nu.mean()[0];
    let field = Field::new(&s, &nu);
    for x in [0.0, 0.3, 0.77, 1.0] {
        let p = Pt::new(x, 0.0);
        let y = best_response(&c, &field, p).unwrap();
        assert!((y[0] - (x + m) / 3.0).abs() < 1e-12);
        assert!((c.dy(p, y[0]) + field.eval(&y).grad[0]).abs() <= 1e-10);
    }
}

#[test]
fn stationarity_on_arc_cost() {
    let c = CostModel::BilinearArc;
    let mu = SourceMeasure::uniform(Domain::quarter_disk()).unwrap();
    let s = spec(1.0, FRAC_PI_4, Interaction::Quadratic { beta: 0.5 }, 0.0, FRAC_PI_2);
    let (pts, _) = source_samples(&mu, 300, 4).unwrap();
    let nu = cloud(&[0.3, 0.8, 1.1]);
    let field = Field::new(&s, &nu);
    for x in pts {
        let y = best_response(&c, &field, x).unwrap();
        assert!((c.dy(x, y[0]) + field.eval(&y).grad[0]).abs() <= 1e-10);
    }
}

#[test]
fn iterate_examples() {
    let c = CostModel::Quadratic;
    let (pts, m) = source_samples(&unit(), 500, 8).unwrap();
    let xbar = m.mean()[0];
    let s0 = spec(1.0, 0.0, Interaction::None, 0.0, 1.0);
    let a = iterate(&c, &s0, &pts, &m.weights, &cloud(&[0.1])).unwrap();
    let b = iterate(&c, &s0, &pts, &m.weights, &a).unwrap();
    assert_eq!(a, b);
    let s1 = spec(1.0, 0.0, Interaction::Quadratic { beta: 1.0 }, 0.0, 1.0);
    let nu = cloud(&[0.6, 0.7]);
    let out = iterate(&c, &s1, &pts, &m.weights, &nu).unwrap();
    assert!((out.mean()[0] - (xbar + 0.65) / 3.0).abs() < 1e-12);
}

#[test]
fn w1_examples() {
    assert!((w1(&cloud(&[0.2]), &cloud(&[0.9])).unwrap() - 0.7).abs() < 1e-15);
    let a = cloud(&[0.1, 0.4, 0.8]);
    assert_eq!(w1(&a, &a).unwrap(), 0.0);
    let a = DiscreteMeasure::new(vec![vec![0.1], vec![0.5], vec![0.7]], vec![0.2, 0.5, 0.3]).unwrap();
    let b = DiscreteMeasure::new(vec![vec![0.0], vec![0.45], vec![0.9]], vec![0.4, 0.4, 0.2]).unwrap();
    let p = DiscreteOtProblem::from_points(&a.points, a.weights.clone(), &b.points, b.weights.clone(), |s, t| (s[0] - t[0]).abs()).unwrap();
    let lp = solve_discrete_ot(&p).unwrap().cost;
    assert!((w1(&a, &b).unwrap() - lp).abs() < 1e-14);
    assert!(w1(&a, &DiscreteMeasure::dirac(vec![0.0, 0.0])).is_err());
}

#[test]
fn no_interaction_converges_in_one_step() {
    let c = CostModel::Quadratic;
    let mu = unit();
    let (pts, m) = source_samples(&mu, 400, 2).unwrap();
    let s = spec(1.0, 0.0, Interaction::None, 0.0, 1.0);
    let (_, log) = solve_fixed_point(&c, &s, &mu, &pts, &m.weights, &m, 1e-10, 10, 1).unwrap();
    assert!(log.converged);
    assert_eq!(log.first_stationary_iterate, 1);
}

#[test]
fn quadratic_fixed_point() {
    let c = CostModel::Quadratic;
    let mu = unit();
    let (pts, m) = source_samples(&mu, 1000, 12).unwrap();
    let xbar = m.mean()[0];
    let s = spec(1.0, 0.0, Interaction::Quadratic { beta: 1.0 }, 0.0, 1.0);
    let (nu, log) = solve_fixed_point(&c, &s, &mu, &pts, &m.weights, &m, 1e-8, 60, 1).unwrap();
    assert!(log.converged);
    assert!((nu.mean()[0] - xbar / 2.0).abs() <= 1e-7);
    // after the first step iterates are translates of x/3, each move a third of the previous
    for w in log.steps.windows(2).skip(1).filter(|w| w[0].w1 > 1e-9) {
        assert!((w[1].ratio.unwrap() - 1.0 / 3.0).abs() < 1e-6, "{:?}", w[1].ratio);
    }
    let (nested, _) = generalized_nestedness_check(&c, &s, &nu, &mu, 64);
    assert!(nested);
}

#[test]
fn contraction_bound_holds_when_below_one() {
    let c = CostModel::Quadratic;
    let mu = unit();
    let (pts, m) = source_samples(&mu, 200, 21).unwrap();
    let s = spec(1.0, 0.0, Interaction::Quadratic { beta: 0.5 }, 0.0, 1.0);
    let h = estimate_hypotheses(&c, &s, &mu, &pts, &m, 5).unwrap();
    assert!(h.contraction_verified(), "{h:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let (a, b) = random_pair(&s, &m, &mut rng);
        let (ba, bb) = (iterate(&c, &s, &pts, &m.weights, &a).unwrap(), iterate(&c, &s, &pts, &m.weights, &b).unwrap());
        assert!(w1(&ba, &bb).unwrap() <= h.rho * w1(&a, &b).unwrap() + 1e-12);
    }
}

#[test]
fn fixed_point_beats_perturbations() {
    let c = CostModel::Quadratic;
    let mu = unit();
    let (pts, m) = source_samples(&mu, 150, 33).unwrap();
    let s = spec(1.0, 0.0, Interaction::Quadratic { beta: 1.0 }, 0.0, 1.0);
    let (nu, _) = solve_fixed_point(&c, &s, &mu, &pts, &m.weights, &m, 1e-10, 60, 1).unwrap();
    let best = objective(&c, &s, &pts, &m.weights, &nu).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let amp: f64 = rng.random_range(0.005..0.05);
        let points = nu.points.iter().map(|p| vec![(p[0] + amp * rng.random_range(-1.0..1.0)).clamp(0.0, 1.0)]).collect();
        let pert = DiscreteMeasure::new(points, nu.weights.clone()).unwrap();
        assert!(best <= objective(&c, &s, &pts, &m.weights, &pert).unwrap() + 1e-12);
    }
}

#[test]
fn best_reply_is_monotone() {
    let c = CostModel::Quadratic;
    let s = spec(1.0, 0.0, Interaction::Quadratic { beta: 1.0 }, 0.0, 1.0);
    let nu = cloud(&[0.1, 0.2, 0.6]);
    let field = Field::new(&s, &nu);
    let ys: Vec<f64> = (0..=200).map(|i| best_response(&c, &field, Pt::new(i as f64 / 200.0, 0.0)).unwrap()[0]).collect();
    assert!(ys.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn outward_potential_violates_boundary() {
    let c = CostModel::Quadratic;
    let mu = unit();
    let (pts, m) = source_samples(&mu, 100, 3).unwrap();
    // V centred at 3 pushes every best response past the box
    let s = spec(1.0, 3.0, Interaction::None, 0.0, 1.0);
    let h = estimate_hypotheses(&c, &s, &mu, &pts, &m, 1).unwrap();
    assert!(!h.boundary_ok);
    let field = Field::new(&s, &m);
    assert!(matches!(best_response(&c, &field, Pt::new(0.5, 0.0)), Err(Error::Hypothesis(_))));
    assert!(solve_fixed_point(&c, &s, &mu, &pts, &m.weights, &m, 1e-8, 10, 1).is_err());
}

#[test]
fn arc_cost_generalized_nestedness() {
    let c = CostModel::BilinearArc;
    let mu = SourceMeasure::uniform(Domain::quarter_disk()).unwrap();
    let (pts, m) = source_samples(&mu, 400, 6).unwrap();
    let s = spec(1.0, FRAC_PI_4, Interaction::None, 0.0, FRAC_PI_2);
    let grid: Vec<f64> = (0..64).map(|i| FRAC_PI_2 * i as f64 / 63.0).collect();
    let nu0 = cloud(&grid);
    let h = estimate_hypotheses(&c, &s, &mu, &pts, &nu0, 2).unwrap();
    assert!(h.eta + h.lambda > 0.0);
    let (nu, log) = solve_fixed_point(&c, &s, &mu, &pts, &m.weights, &nu0, 1e-10, 10, 1).unwrap();
    assert!(log.converged);
    let (nested, report) = generalized_nestedness_check(&c, &s, &nu, &mu, 64);
    assert!(nested, "{report:?}");
}

#[test]
fn discrete_measure_invariants() {
    assert!(DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.6]).is_err());
    assert!(DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![-0.5, 1.5]).is_err());
    let (_, m) = source_samples(&unit(), 37, 1).unwrap();
    assert!((m.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    let s = spec(1.0, 0.0, Interaction::Quadratic { beta: 2.0 }, 0.0, 1.0);
    assert!(s.symmetry_defect(1000, 3) <= 1e-12);
}
