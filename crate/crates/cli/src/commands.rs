//! One function per subcommand. Each writes its artifacts and reports how the run ended.

use crate::config::*;
use crate::oracle_suite;
use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};
use uneq_ot::best_reply::{self, DiscreteMeasure, Interaction, InteractionSpec, Potential};
use uneq_ot::congestion::{self, FFamily};
use uneq_ot::hedonic::{self, HedonicInstance};
use uneq_ot::nested::{self, LevelChoice};
use uneq_ot::{io, reproduce, CostModel, Domain};

#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    /// A hypothesis or nestedness check came back negative.
    Violation(String),
    Failure(String),
}

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Ctx {
    fn seed(&self, cmd: Command) -> Result<u64> {
        self.cfg.seed.ok_or_else(|| anyhow!("{} samples randomly and needs a seed (--seed or `seed` in the config)", cmd.name()))
    }
    fn grid(&self, default: usize) -> usize {
        self.cfg.grid.unwrap_or(default)
    }
    fn tol(&self, default: f64) -> f64 {
        self.cfg.tol.unwrap_or(default)
    }
    fn cost(&self, default: CostModel) -> CostModel {
        self.cfg.cost.clone().unwrap_or(default)
    }
    fn source(&self, default: Domain) -> SourceSpec {
        self.cfg.source.clone().unwrap_or_else(|| SourceSpec::uniform(default))
    }
    fn path(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }
    fn json<T: Serialize>(&self, name: &str, kind: &str, v: &T) -> Result<()> {
        io::write_json(&self.path(name)?, kind, v)?;
        Ok(())
    }
    fn csv(&self, name: &str, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        io::write_csv(&self.path(name)?, headers, rows)?;
        Ok(())
    }
    fn text(&self, name: &str, s: &str) -> Result<()> {
        io::write_atomic(&self.path(name)?, s.as_bytes())?;
        Ok(())
    }
}

fn default_target() -> TargetSpec {
    TargetSpec { lo: 0.0, hi: FRAC_PI_2, density: TargetShape::Uniform }
}

pub fn run(cmd: Command, ctx: &Ctx) -> Result<Status> {
    match cmd {
        Command::SolveNested => solve_nested(ctx),
        Command::CheckNestedness => check_nestedness(ctx),
        Command::SolveCongestion => solve_congestion(ctx),
        Command::BestReply => best_reply_cmd(ctx),
        Command::Hedonic => hedonic_cmd(ctx),
        Command::CheckDoubleMin => check_double_min(ctx),
        Command::OracleValidate => oracle_validate(ctx),
        Command::ReproducePaper => reproduce_paper(ctx),
    }
}

#[derive(Serialize)]
struct NestedSummary<'a> {
    cost: &'a CostModel,
    nested: bool,
    witness: Option<(f64, f64)>,
    min_margin: f64,
    pairs_checked: usize,
    ks_statistic: f64,
    transport_cost: f64,
    multi_crossing_samples: usize,
    suspect_nodes: &'a [usize],
    negative_density_nodes: usize,
}

fn solve_nested(ctx: &Ctx) -> Result<Status> {
    let seed = ctx.seed(Command::SolveNested)?;
    let cost = ctx.cost(CostModel::BilinearArc);
    let mu = ctx.source(Domain::quarter_disk()).build()?;
    let nu = ctx.cfg.target.clone().unwrap_or_else(default_target).build(ctx.grid(513))?;
    let s = nested::solve_nested(&cost, &mu, &nu, ctx.cfg.samples.unwrap_or(100_000), seed)?;
    let kp = &s.kprofile;
    let rows: Vec<Vec<f64>> =
        (0..kp.len()).map(|i| vec![kp.y[i], kp.k[i], kp.kprime[i], kp.v[i], s.nu_density.values[i]]).collect();
    ctx.csv("nested.csv", &["y", "k", "kprime", "v", "nu_density"], &rows)?;
    ctx.json(
        "nested.json",
        "solve-nested",
        &NestedSummary {
            cost: &cost,
            nested: s.nested,
            witness: s.witness,
            min_margin: s.report.min_margin,
            pairs_checked: s.report.pairs_checked,
            ks_statistic: s.ks_statistic,
            transport_cost: s.transport_cost,
            multi_crossing_samples: s.multi_crossing_samples,
            suspect_nodes: &s.suspect_nodes,
            negative_density_nodes: s.nu_density.negative.len(),
        },
    )?;
    println!("nested={} ks={:.4} cost={:.8}", s.nested, s.ks_statistic, s.transport_cost);
    Ok(if s.nested { Status::Success } else { Status::Violation(format!("not nested, witness {:?}", s.witness)) })
}

#[derive(Serialize)]
struct NestednessSummary {
    nested: bool,
    witness: Option<(f64, f64)>,
    min_margin: f64,
    pairs_checked: usize,
    intercept_monotone: Option<bool>,
    /// Largest `D^min` over sampled grid pairs.
    dmin_max: f64,
    bounds_nested: bool,
    bounds_sup: f64,
}

fn check_nestedness(ctx: &Ctx) -> Result<Status> {
    let cost = ctx.cost(CostModel::BilinearArc);
    let mu = ctx.source(Domain::quarter_disk()).build()?;
    let nu = ctx.cfg.target.clone().unwrap_or_else(default_target).build(ctx.grid(257))?;
    let kp = nested::solve_k_profile(&cost, &mu, &nu)?;
    let r = nested::check_nestedness(&cost, &mu, &kp, &nu);
    let idx: Vec<usize> = (0..33).map(|i| i * (kp.len() - 1) / 32).collect();
    let mut dmin_max: f64 = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            if j > i {
                dmin_max = dmin_max.max(nested::minimal_mass_difference(&cost, &mu, kp.y[i], kp.y[j], kp.k[i]).value);
            }
        }
    }
    let b = nested::nestedness_by_bounds(&cost, &mu, (nu.lo, nu.hi), &|y| nu.density_at(y), LevelChoice::Profile(&kp), 33);
    let summary = NestednessSummary {
        nested: r.nested,
        witness: r.witness,
        min_margin: r.min_margin,
        pairs_checked: r.pairs_checked,
        intercept_monotone: r.intercept_monotone,
        dmin_max,
        bounds_nested: b.nested,
        bounds_sup: b.sup,
    };
    ctx.json("check_nestedness.json", "check-nestedness", &summary)?;
    println!("nested={} dmin_max={:.3e} witness={:?}", r.nested, dmin_max, r.witness);
    Ok(if r.nested { Status::Success } else { Status::Violation(format!("not nested, witness {:?}", r.witness)) })
}

fn congestion_section(ctx: &Ctx) -> CongestionSection {
    ctx.cfg.congestion.clone().unwrap_or(CongestionSection { f: FFamily::Entropy, y_lo: 0.0, ybar: 0.5, allow_nonconforming: false })
}

#[derive(Serialize)]
struct CongestionSummary {
    c: f64,
    residual: f64,
    nested: bool,
    witness: Option<(f64, f64)>,
    threshold: f64,
    refined_threshold: Option<f64>,
    verified: bool,
    bound_slack: f64,
    clipped: usize,
    shots: usize,
    energy: f64,
}

fn solve_congestion(ctx: &Ctx) -> Result<Status> {
    let cost = ctx.cost(CostModel::BilinearArc);
    let mu = ctx.source(Domain::quarter_disk()).build()?;
    let sec = congestion_section(ctx);
    sec.f.validate(sec.allow_nonconforming)?;
    let s = congestion::solve_congestion_bvp(&cost, &mu, sec.f, (sec.y_lo, sec.ybar), ctx.grid(513))?;
    let rows: Vec<Vec<f64>> = (0..s.nu.len())
        .map(|i| {
            let y = s.nu.node(i);
            vec![y, s.kprofile.k[i], s.kprofile.v[i], s.nu.values[i], s.bounds.lower(y), s.bounds.upper(y)]
        })
        .collect();
    ctx.csv("congestion.csv", &["y", "k", "v", "nu", "lower_bound", "upper_bound"], &rows)?;
    let quarter = matches!(cost, CostModel::BilinearArc) && matches!(mu.domain, Domain::QuarterDisk { radius } if radius == 1.0);
    let refined = (quarter && mu.is_uniform() && sec.f == FFamily::Entropy).then(congestion::appendix_refined_threshold);
    ctx.json(
        "congestion.json",
        "solve-congestion",
        &CongestionSummary {
            c: s.c,
            residual: s.residual,
            nested: s.nestedness.nested,
            witness: s.nestedness.witness,
            threshold: s.threshold,
            refined_threshold: refined,
            verified: s.verified,
            bound_slack: s.bound_slack,
            clipped: s.clipped,
            shots: s.shots,
            energy: congestion::congestion_energy(sec.f, &s.nu),
        },
    )?;
    println!("C={:.10} residual={:.2e} nested={} verified={}", s.c, s.residual, s.nestedness.nested, s.verified);
    if s.residual > ctx.tol(1e-4) {
        return Ok(Status::Failure(format!("first-order residual {:.2e} above tolerance", s.residual)));
    }
    Ok(if s.nestedness.nested {
        Status::Success
    } else {
        Status::Violation(format!("solution not nested, witness {:?}", s.nestedness.witness))
    })
}

fn default_box(cost: &CostModel, domain: &Domain) -> Result<Vec<[f64; 2]>> {
    Ok(match (cost, domain) {
        (CostModel::Quadratic, Domain::Interval { a, b }) => vec![[*a, *b]],
        (CostModel::Quadratic, Domain::Rectangle { x0, x1, y0, y1 }) => vec![[*x0, *x1], [*y0, *y1]],
        (CostModel::BilinearArc, _) => vec![[0.0, FRAC_PI_2]],
        _ => bail!("no default target box for cost {}; set best_reply.target_box", cost.name()),
    })
}

fn interaction_spec(ctx: &Ctx, cost: &CostModel, domain: &Domain, default: BestReplySection) -> Result<(InteractionSpec, BestReplySection)> {
    let sec = ctx.cfg.best_reply.clone().unwrap_or(default);
    let target_box = match &sec.target_box {
        Some(b) => b.clone(),
        None => default_box(cost, domain)?,
    };
    let spec = InteractionSpec { v: sec.v.clone(), w: sec.w.clone(), target_dim: sec.target_dim, target_box };
    spec.validate()?;
    Ok((spec, sec))
}

#[derive(Serialize)]
struct BestReplySummary<'a> {
    mean: Vec<f64>,
    log: &'a best_reply::FixedPointLog,
    generalized_nested: bool,
    generalized_report: best_reply::GeneralizedNestednessReport,
}

fn best_reply_cmd(ctx: &Ctx) -> Result<Status> {
    let seed = ctx.seed(Command::BestReply)?;
    let cost = ctx.cost(CostModel::Quadratic);
    let mu = ctx.source(Domain::unit_interval()).build()?;
    let default = BestReplySection {
        v: Potential::Quadratic { alpha: 1.0, center: vec![0.0] },
        w: Interaction::Quadratic { beta: 1.0 },
        target_dim: 1,
        target_box: None,
        n_particles: None,
        max_iter: None,
    };
    let (spec, sec) = interaction_spec(ctx, &cost, &mu.domain, default)?;
    let (pts, m) = best_reply::source_samples(&mu, sec.n_particles.unwrap_or(1000), seed)?;
    let nu0 = if m.dim() == spec.target_dim {
        m.clone()
    } else {
        let [lo, hi] = spec.target_box[0];
        DiscreteMeasure::uniform((0..64).map(|i| vec![lo + (hi - lo) * (i as f64 + 0.5) / 64.0]).collect())?
    };
    let (nu, log) = best_reply::solve_fixed_point(&cost, &spec, &mu, &pts, &m.weights, &nu0, ctx.tol(1e-8), sec.max_iter.unwrap_or(40), seed)?;
    let (gn, report) = best_reply::generalized_nestedness_check(&cost, &spec, &nu, &mu, 64);
    let mut headers: Vec<String> = (0..spec.target_dim).map(|d| format!("y{d}")).collect();
    headers.push("weight".into());
    let hdr: Vec<&str> = headers.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = nu.points.iter().zip(&nu.weights).map(|(p, w)| p.iter().copied().chain([*w]).collect()).collect();
    ctx.csv("best_reply_particles.csv", &hdr, &rows)?;
    ctx.json(
        "best_reply.json",
        "best-reply",
        &BestReplySummary { mean: nu.mean(), log: &log, generalized_nested: gn, generalized_report: report },
    )?;
    println!("iterations={} converged={} mean={:?} ratio={:?} nested={gn}", log.iterations, log.converged, nu.mean(), log.empirical_ratio);
    if !log.converged {
        return Ok(Status::Failure(format!("no convergence in {} iterations", log.iterations)));
    }
    let h = &log.hypotheses;
    if !(h.eta + h.lambda > 0.0 && h.boundary_ok) {
        return Ok(Status::Violation(format!("convexity or boundary hypothesis fails (eta + lambda = {:.3})", h.eta + h.lambda)));
    }
    Ok(if gn { Status::Success } else { Status::Violation("generalized nestedness fails".into()) })
}

#[derive(Serialize)]
struct ConditionRow {
    y: f64,
    value: f64,
    holds: bool,
    k1_prime: f64,
}

#[derive(Serialize)]
struct HedonicSummary<'a> {
    nested: bool,
    witness: Option<hedonic::HedonicWitness>,
    support: (f64, f64),
    transitions: &'a [hedonic::Transition],
    boundary: hedonic::BoundaryReport,
    conditions: Vec<ConditionRow>,
}

fn hedonic_cmd(ctx: &Ctx) -> Result<Status> {
    let inst = match &ctx.cfg.hedonic {
        None => HedonicInstance::worked_example(),
        Some(h) => HedonicInstance::new(
            h.buyer_cost.clone(),
            h.buyer.build()?,
            h.seller_cost.clone(),
            h.seller.build()?,
            (h.interval[0], h.interval[1]),
        )?,
    };
    let s = hedonic::solve_m(&inst, ctx.grid(1025))?;
    let (nested, witness) = hedonic::hedonic_nestedness_check(&inst, &s);
    let rows: Vec<Vec<f64>> =
        (0..s.k1.len()).map(|i| vec![s.k1.y[i], s.k1.mass[i], s.k1.k[i], s.k2.k[i], s.nu_bar[i]]).collect();
    ctx.csv("hedonic.csv", &["y", "M", "k1", "k2", "nu"], &rows)?;
    let (a, b) = s.support;
    let conditions = (1..10)
        .filter_map(|i| {
            let y = a + (b - a) * i as f64 / 10.0;
            hedonic::differential_condition_at(&inst, y)
                .ok()
                .map(|d| ConditionRow { y, value: d.value, holds: d.holds, k1_prime: d.k1_prime })
        })
        .collect();
    ctx.json(
        "hedonic.json",
        "hedonic",
        &HedonicSummary {
            nested,
            witness: witness.clone(),
            support: s.support,
            transitions: &s.transitions,
            boundary: hedonic::boundary_vanishing_check(&inst, &s),
            conditions,
        },
    )?;
    println!("support=({a:.6}, {b:.6}) nested={nested} transitions={}", s.transitions.len());
    Ok(if nested { Status::Success } else { Status::Violation(format!("hedonic nestedness fails, witness {witness:?}")) })
}

#[derive(Serialize)]
struct DoubleMinSummary {
    ybar: f64,
    threshold: f64,
    congestion_verified: bool,
    lower_bound_at_ends: (f64, f64),
    highdim: congestion::HighDimReport,
    hypotheses: best_reply::HypothesisReport,
    contraction_verified: bool,
    /// Convexity margin and inward boundary condition; `rho` is reported separately.
    interaction_hypotheses: bool,
}

fn check_double_min(ctx: &Ctx) -> Result<Status> {
    let seed = ctx.seed(Command::CheckDoubleMin)?;
    let cost = ctx.cost(CostModel::BilinearArc);
    let mu = ctx.source(Domain::quarter_disk()).build()?;
    let sec = congestion_section(ctx);
    sec.f.validate(sec.allow_nonconforming)?;
    let interval = (sec.y_lo, sec.ybar);
    let threshold = congestion::congestion_nestedness_threshold(&cost, &mu, sec.f, sec.y_lo, sec.ybar)?;
    let bounds = congestion::density_bounds(&cost, &mu.domain, sec.f, interval)?;
    let nu = match &ctx.cfg.target {
        Some(t) => t.build(ctx.grid(257))?,
        None => uneq_ot::TargetDensity::uniform(sec.y_lo, sec.ybar, ctx.grid(257)),
    };
    let highdim = congestion::highdim_congestion_check(&cost, &mu.domain, &|y| nu.density_at(y), interval, sec.f, 17)?;
    let default = BestReplySection {
        v: Potential::Quadratic { alpha: 8.0 / (sec.ybar - sec.y_lo), center: vec![0.5 * (sec.y_lo + sec.ybar)] },
        w: Interaction::None,
        target_dim: 1,
        target_box: Some(vec![[sec.y_lo, sec.ybar]]),
        n_particles: None,
        max_iter: None,
    };
    let (spec, br) = interaction_spec(ctx, &cost, &mu.domain, default)?;
    let (pts, _) = best_reply::source_samples(&mu, br.n_particles.unwrap_or(2000), seed)?;
    let [lo, hi] = spec.target_box[0];
    let reference = DiscreteMeasure::uniform((0..64).map(|i| vec![lo + (hi - lo) * (i as f64 + 0.5) / 64.0]).collect())?;
    let hyp = best_reply::estimate_hypotheses(&cost, &spec, &mu, &pts, &reference, seed)?;
    let summary = DoubleMinSummary {
        ybar: sec.ybar,
        threshold,
        congestion_verified: sec.ybar <= threshold,
        lower_bound_at_ends: (bounds.lower(sec.y_lo), bounds.lower(sec.ybar)),
        highdim,
        contraction_verified: hyp.contraction_verified(),
        interaction_hypotheses: hyp.eta + hyp.lambda > 0.0 && hyp.boundary_ok,
        hypotheses: hyp,
    };
    ctx.json("double_min.json", "check-double-min", &summary)?;
    println!(
        "congestion_verified={} threshold={:.6} interaction_hypotheses={} rho={:.3} highdim={}",
        summary.congestion_verified, threshold, summary.interaction_hypotheses, summary.hypotheses.rho, summary.highdim.holds
    );
    Ok(if summary.congestion_verified && summary.interaction_hypotheses {
        Status::Success
    } else {
        Status::Violation("double-minimization conditions not verified".into())
    })
}

fn oracle_validate(ctx: &Ctx) -> Result<Status> {
    let seed = ctx.seed(Command::OracleValidate)?;
    let rows = oracle_suite::run(seed);
    let md = oracle_suite::to_markdown(&rows);
    print!("{md}");
    ctx.text("oracle_validate.md", &md)?;
    ctx.json("oracle_validate.json", "oracle-validate", &rows)?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    Ok(if failed == 0 { Status::Success } else { Status::Failure(format!("{failed} oracle checks failed")) })
}

fn reproduce_paper(ctx: &Ctx) -> Result<Status> {
    let rows = reproduce::run_all(ctx.seed(Command::ReproducePaper)?);
    let md = reproduce::to_markdown(&rows);
    print!("{md}");
    ctx.text("reproduce_paper.md", &md)?;
    ctx.json("reproduce_paper.json", "reproduce-paper", &rows)?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    Ok(if failed == 0 { Status::Success } else { Status::Failure(format!("{failed} reproduction checks failed")) })
}

pub fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| Path::new("out").to_path_buf())
}
