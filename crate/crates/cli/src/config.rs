//! TOML run configuration. Every table rejects unknown keys.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use uneq_ot::best_reply::{Interaction, Potential};
use uneq_ot::congestion::FFamily;
use uneq_ot::{CostModel, Density, Domain, SourceMeasure, TargetDensity};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveNested,
    SolveCongestion,
    BestReply,
    Hedonic,
    CheckNestedness,
    CheckDoubleMin,
    OracleValidate,
    ReproducePaper,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SolveNested => "solve-nested",
            Command::SolveCongestion => "solve-congestion",
            Command::BestReply => "best-reply",
            Command::Hedonic => "hedonic",
            Command::CheckNestedness => "check-nestedness",
            Command::CheckDoubleMin => "check-double-min",
            Command::OracleValidate => "oracle-validate",
            Command::ReproducePaper => "reproduce-paper",
        }
    }

    pub fn samples(self) -> bool {
        matches!(
            self,
            Command::SolveNested | Command::BestReply | Command::CheckDoubleMin | Command::OracleValidate | Command::ReproducePaper
        )
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Source samples for pushforward checks.
    pub samples: Option<usize>,
    pub cost: Option<CostModel>,
    pub source: Option<SourceSpec>,
    pub target: Option<TargetSpec>,
    pub congestion: Option<CongestionSection>,
    pub best_reply: Option<BestReplySection>,
    pub hedonic: Option<HedonicSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub domain: Domain,
    #[serde(default = "uniform_density")]
    pub density: Density,
}

fn uniform_density() -> Density {
    Density::Uniform
}

impl SourceSpec {
    pub fn uniform(domain: Domain) -> Self {
        SourceSpec { domain, density: Density::Uniform }
    }
    pub fn build(&self) -> Result<SourceMeasure> {
        Ok(SourceMeasure::new(self.domain.clone(), self.density.clone())?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetShape {
    Uniform,
    /// `ν̄ ∝ e^{−rate·y}`.
    Exponential { rate: f64 },
    /// Nodal values on a uniform grid over `[lo, hi]`.
    Values { values: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "uniform_shape")]
    pub density: TargetShape,
}

fn uniform_shape() -> TargetShape {
    TargetShape::Uniform
}

impl TargetSpec {
    pub fn build(&self, grid: usize) -> Result<TargetDensity> {
        Ok(match &self.density {
            TargetShape::Uniform => TargetDensity::from_fn(self.lo, self.hi, grid, |_| 1.0)?,
            TargetShape::Exponential { rate } => {
                let r = *rate;
                TargetDensity::from_fn(self.lo, self.hi, grid, |y| (-r * y).exp())?
            }
            TargetShape::Values { values } => TargetDensity::new(self.lo, self.hi, values.clone())?,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CongestionSection {
    #[serde(default = "entropy")]
    pub f: FFamily,
    #[serde(default)]
    pub y_lo: f64,
    pub ybar: f64,
    /// Admit integrands with `f′(0) > −∞`.
    #[serde(default)]
    pub allow_nonconforming: bool,
}

fn entropy() -> FFamily {
    FFamily::Entropy
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BestReplySection {
    pub v: Potential,
    pub w: Interaction,
    #[serde(default = "one")]
    pub target_dim: usize,
    pub target_box: Option<Vec<[f64; 2]>>,
    pub n_particles: Option<usize>,
    pub max_iter: Option<usize>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedonicSection {
    pub buyer_cost: CostModel,
    pub buyer: SourceSpec,
    pub seller_cost: CostModel,
    pub seller: SourceSpec,
    pub interval: [f64; 2],
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tol {
            if !(t.is_finite() && t > 0.0) {
                bail!("tol must be positive, got {t}");
            }
        }
        if let Some(g) = self.grid {
            if g < 3 {
                bail!("grid must be at least 3, got {g}");
            }
        }
        if self.samples == Some(0) {
            bail!("samples must be positive");
        }
        if self.threads == Some(0) {
            bail!("threads must be positive");
        }
        Ok(())
    }
}

pub fn parse_cost(s: &str) -> Result<CostModel> {
    Ok(match s {
        "bilinear_arc" => CostModel::BilinearArc,
        "quadratic" => CostModel::Quadratic,
        "hedonic_buyer" => CostModel::HedonicBuyer,
        "hedonic_seller" => CostModel::HedonicSeller,
        "pseudo_index" => bail!("pseudo_index needs coefficients; set them in a config file"),
        _ => bail!("unknown cost {s:?}"),
    })
}

pub fn parse_domain(s: &str) -> Result<Domain> {
    Ok(match s {
        "quarter_disk" => Domain::quarter_disk(),
        "unit_square" => Domain::unit_square(),
        "unit_interval" => Domain::unit_interval(),
        _ => bail!("unknown domain {s:?}"),
    })
}

/// `entropy` or `power:<p>`.
pub fn parse_f(s: &str) -> Result<FFamily> {
    if s == "entropy" {
        return Ok(FFamily::Entropy);
    }
    match s.strip_prefix("power:") {
        Some(p) => Ok(FFamily::Power { p: p.parse().with_context(|| format!("bad exponent in {s:?}"))? }),
        None => bail!("unknown f family {s:?}"),
    }
}

fn floats(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number {t:?}"))).collect()
}

/// `quadratic:<alpha>:<center,...>` or `poly:<c0,c1,...>`.
pub fn parse_potential(s: &str) -> Result<Potential> {
    let parts: Vec<&str> = s.split(':').collect();
    Ok(match parts.as_slice() {
        ["quadratic", a, c] => Potential::Quadratic { alpha: a.parse()?, center: floats(c)? },
        ["poly", c] => Potential::Polynomial { coeffs: floats(c)? },
        _ => bail!("unknown potential {s:?}"),
    })
}

/// `none` or `quadratic:<beta>`.
pub fn parse_interaction(s: &str) -> Result<Interaction> {
    let parts: Vec<&str> = s.split(':').collect();
    Ok(match parts.as_slice() {
        ["none"] => Interaction::None,
        ["quadratic", b] => Interaction::Quadratic { beta: b.parse()? },
        _ => bail!("unknown interaction {s:?}"),
    })
}

pub fn parse_pair(s: &str) -> Result<[f64; 2]> {
    match floats(s)?.as_slice() {
        [a, b] if a < b => Ok([*a, *b]),
        _ => bail!("expected an increasing pair a,b, got {s:?}"),
    }
}
