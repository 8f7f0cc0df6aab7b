//! `uneq-ot`: batch driver for the solvers and checks of the `uneq_ot` library.
//!
//! Exit status is 0 on success, 2 when a hypothesis or nestedness check fails, 1 otherwise.

mod commands;
mod config;
mod oracle_suite;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use commands::{Ctx, Status};
use config::*;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "uneq-ot", version, about = "Optimal transport between unequal dimensions via nested level sets")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads; UNEQ_OT_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// bilinear_arc, quadratic, hedonic_buyer or hedonic_seller.
    #[arg(long)]
    cost: Option<String>,
    /// quarter_disk, unit_square or unit_interval.
    #[arg(long)]
    domain: Option<String>,
}

#[derive(Args, Debug, Default)]
struct CongestionArgs {
    /// entropy or power:<p>.
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    ybar: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the command named in the config file.
    Run,
    SolveNested(ModelArgs),
    CheckNestedness(ModelArgs),
    SolveCongestion {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        congestion: CongestionArgs,
    },
    BestReply {
        #[command(flatten)]
        model: ModelArgs,
        /// quadratic:<alpha>:<center,...> or poly:<c0,c1,...>.
        #[arg(long = "V")]
        v: Option<String>,
        /// none or quadratic:<beta>.
        #[arg(long = "W")]
        w: Option<String>,
        #[arg(long)]
        n_particles: Option<usize>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    Hedonic {
        #[arg(long)]
        buyer_cost: Option<String>,
        #[arg(long)]
        seller_cost: Option<String>,
        /// Buyer and seller domains, comma separated.
        #[arg(long)]
        domains: Option<String>,
        /// Goods interval `a,b`.
        #[arg(long)]
        interval: Option<String>,
    },
    /// Condition checks for the joint interaction and congestion problem.
    CheckDoubleMin {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        congestion: CongestionArgs,
    },
    OracleValidate,
    ReproducePaper,
}

impl Cmd {
    fn command(&self) -> Option<Command> {
        Some(match self {
            Cmd::Run => return None,
            Cmd::SolveNested(_) => Command::SolveNested,
            Cmd::CheckNestedness(_) => Command::CheckNestedness,
            Cmd::SolveCongestion { .. } => Command::SolveCongestion,
            Cmd::BestReply { .. } => Command::BestReply,
            Cmd::Hedonic { .. } => Command::Hedonic,
            Cmd::CheckDoubleMin { .. } => Command::CheckDoubleMin,
            Cmd::OracleValidate => Command::OracleValidate,
            Cmd::ReproducePaper => Command::ReproducePaper,
        })
    }
}

fn apply_model(cfg: &mut RunConfig, m: &ModelArgs) -> Result<()> {
    if let Some(c) = &m.cost {
        cfg.cost = Some(parse_cost(c)?);
    }
    if let Some(d) = &m.domain {
        let density = cfg.source.as_ref().map(|s| s.density.clone()).unwrap_or(uneq_ot::Density::Uniform);
        cfg.source = Some(SourceSpec { domain: parse_domain(d)?, density });
    }
    Ok(())
}

fn apply_congestion(cfg: &mut RunConfig, c: &CongestionArgs) -> Result<()> {
    if c.f.is_none() && c.ybar.is_none() {
        return Ok(());
    }
    let mut sec = cfg.congestion.clone().unwrap_or(CongestionSection {
        f: uneq_ot::congestion::FFamily::Entropy,
        y_lo: 0.0,
        ybar: 0.5,
        allow_nonconforming: false,
    });
    if let Some(f) = &c.f {
        sec.f = parse_f(f)?;
    }
    if let Some(y) = c.ybar {
        sec.ybar = y;
    }
    cfg.congestion = Some(sec);
    Ok(())
}

fn apply_flags(cli: &Cli, cfg: &mut RunConfig) -> Result<()> {
    cfg.seed = cli.seed.or(cfg.seed);
    cfg.grid = cli.grid.or(cfg.grid);
    cfg.tol = cli.tol.or(cfg.tol);
    cfg.threads = cli.threads.or(cfg.threads);
    if let Ok(v) = std::env::var("UNEQ_OT_THREADS") {
        cfg.threads = Some(v.trim().parse().map_err(|_| anyhow::anyhow!("UNEQ_OT_THREADS must be a positive integer, got {v:?}"))?);
    }
    match &cli.cmd {
        Cmd::SolveNested(m) | Cmd::CheckNestedness(m) => apply_model(cfg, m)?,
        Cmd::SolveCongestion { model, congestion } | Cmd::CheckDoubleMin { model, congestion } => {
            apply_model(cfg, model)?;
            apply_congestion(cfg, congestion)?;
        }
        Cmd::BestReply { model, v, w, n_particles, max_iter } => {
            apply_model(cfg, model)?;
            if v.is_some() || w.is_some() || n_particles.is_some() || max_iter.is_some() {
                let mut sec = cfg.best_reply.clone().unwrap_or(BestReplySection {
                    v: uneq_ot::best_reply::Potential::Quadratic { alpha: 1.0, center: vec![0.0] },
                    w: uneq_ot::best_reply::Interaction::Quadratic { beta: 1.0 },
                    target_dim: 1,
                    target_box: None,
                    n_particles: None,
                    max_iter: None,
                });
                if let Some(v) = v {
                    sec.v = parse_potential(v)?;
                }
                if let Some(w) = w {
                    sec.w = parse_interaction(w)?;
                }
                sec.n_particles = n_particles.or(sec.n_particles);
                sec.max_iter = max_iter.or(sec.max_iter);
                cfg.best_reply = Some(sec);
            }
        }
        Cmd::Hedonic { buyer_cost, seller_cost, domains, interval } => {
            if buyer_cost.is_some() || seller_cost.is_some() || domains.is_some() || interval.is_some() {
                let mut sec = cfg.hedonic.clone().unwrap_or(HedonicSection {
                    buyer_cost: uneq_ot::CostModel::HedonicBuyer,
                    buyer: SourceSpec::uniform(uneq_ot::Domain::unit_square()),
                    seller_cost: uneq_ot::CostModel::HedonicSeller,
                    seller: SourceSpec::uniform(uneq_ot::Domain::unit_interval()),
                    interval: [-3.0, 3.0],
                });
                if let Some(c) = buyer_cost {
                    sec.buyer_cost = parse_cost(c)?;
                }
                if let Some(c) = seller_cost {
                    sec.seller_cost = parse_cost(c)?;
                }
                if let Some(d) = domains {
                    let parts: Vec<&str> = d.split(',').map(str::trim).collect();
                    let [b, s] = parts.as_slice() else { bail!("--domains expects two names, got {d:?}") };
                    sec.buyer = SourceSpec::uniform(parse_domain(b)?);
                    sec.seller = SourceSpec::uniform(parse_domain(s)?);
                }
                if let Some(i) = interval {
                    sec.interval = parse_pair(i)?;
                }
                cfg.hedonic = Some(sec);
            }
        }
        Cmd::Run | Cmd::OracleValidate | Cmd::ReproducePaper => {}
    }
    cfg.validate()
}

fn execute(cli: Cli) -> Result<Status> {
    let mut cfg = match &cli.config {
        Some(p) => load(p)?,
        None => RunConfig::default(),
    };
    let cmd = match (cli.cmd.command(), cfg.command) {
        (None, None) => bail!("`run` needs a config file with a `command` field"),
        (None, Some(c)) => c,
        (Some(c), None) => c,
        (Some(c), Some(d)) if c == d => c,
        (Some(c), Some(d)) => bail!("config is for {} but {} was requested", d.name(), c.name()),
    };
    apply_flags(&cli, &mut cfg)?;
    if cmd.samples() && cfg.seed.is_none() {
        bail!("{} samples randomly and needs a seed (--seed or `seed` in the config)", cmd.name());
    }
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let out = commands::out_dir(cli.out.clone(), &cfg);
    commands::run(cmd, &Ctx { cfg, out })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::Violation(msg)) => {
            eprintln!("violation: {msg}");
            ExitCode::from(2)
        }
        Ok(Status::Failure(msg)) => {
            eprintln!("failure: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let hypothesis = e.chain().any(|c| c.downcast_ref::<uneq_ot::Error>().is_some_and(|e| e.is_hypothesis()));
            ExitCode::from(if hypothesis { 2 } else { 1 })
        }
    }
}
