//! Run configuration files.
//!
//! ```toml
//! schema_version = 1
//! slots = 100000
//! seed = 7
//! report_every = 1     # write every n-th slot to metrics.csv (the last slot always)
//! oracle = true        # solve the static problem for the summary
//!
//! [network]
//! file = "pow7-network.toml"      # relative to this file
//! # or: generate = { links = 7, radius = 0.3, link_length = 0.1, seed = 1 }
//!
//! [arrivals]
//! kind = "iid"         # iid | deterministic | drifting | trace
//! load = 0.7           # rates = load · max uniform throughput, unless `rates` is given
//! a_max = 1
//! # rates = [..], initial_rates = [..] or initial_scale = 0.75, decay_horizon = 1e4, trace = "a.csv"
//!
//! [states]
//! kind = "single"      # single | iid | markov
//! # distribution = [..] / transition = [[..], ..]
//!
//! [problem]
//! cost = "average-power"          # or "zero"
//! constraints = ["rate-stability"] # and/or "power-budget" with `budget = [..]`
//! alpha = 2.0
//! beta = 5000.0
//! epsilon = 0.001
//! # z_max defaults to 2·(a_max·links + max mode power)
//!
//! [output]
//! dir = "runs/pow7"    # relative to this file
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::generate::{gen_network, GeometryParams, DEFAULT_LINK_LENGTH};
use crate::model::NetworkSpec;
use crate::objective::{default_z_max, ConstraintKind, CostKind, Objective, PenaltyConfig, ProblemSpec};
use crate::solver::max_uniform_throughput;
use crate::stochastic::{ArrivalModel, ArrivalTrace, StateModel, DEFAULT_DECAY_HORIZON};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_LOAD: f64 = 0.7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub slots: u64,
    pub seed: u64,
    #[serde(default = "one")]
    pub report_every: u64,
    #[serde(default = "yes")]
    pub oracle: bool,
    pub network: NetworkSection,
    pub arrivals: ArrivalSection,
    #[serde(default)]
    pub states: StateSection,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> u64 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub file: Option<PathBuf>,
    pub generate: Option<GenerateSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSection {
    pub links: usize,
    pub radius: f64,
    #[serde(default = "default_link_length")]
    pub link_length: f64,
    pub seed: u64,
}

fn default_link_length() -> f64 {
    DEFAULT_LINK_LENGTH
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrivalKind {
    Iid,
    Deterministic,
    Drifting,
    Trace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalSection {
    pub kind: ArrivalKind,
    pub rates: Option<Vec<f64>>,
    pub load: Option<f64>,
    pub a_max: Option<u32>,
    pub initial_rates: Option<Vec<f64>>,
    pub initial_scale: Option<f64>,
    pub decay_horizon: Option<f64>,
    pub trace: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    #[default]
    Single,
    Iid,
    Markov,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    #[serde(default)]
    pub kind: StateKind,
    pub distribution: Option<Vec<f64>>,
    pub transition: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostName {
    #[default]
    AveragePower,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintName {
    RateStability,
    PowerBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(default)]
    pub cost: CostName,
    #[serde(default = "default_constraints")]
    pub constraints: Vec<ConstraintName>,
    pub budget: Option<Vec<f64>>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub z_max: Option<f64>,
}

fn default_constraints() -> Vec<ConstraintName> {
    vec![ConstraintName::RateStability]
}

fn default_alpha() -> f64 {
    PenaltyConfig::DEFAULT_ALPHA
}

fn default_beta() -> f64 {
    PenaltyConfig::DEFAULT_BETA
}

fn default_epsilon() -> f64 {
    PenaltyConfig::DEFAULT_EPSILON
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            cost: CostName::default(),
            constraints: default_constraints(),
            budget: None,
            alpha: default_alpha(),
            beta: default_beta(),
            epsilon: default_epsilon(),
            z_max: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("runs/out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        if cfg.slots == 0 {
            return Err(Error::Config("slots must be at least 1".into()));
        }
        if cfg.report_every == 0 {
            return Err(Error::Config("report_every must be at least 1".into()));
        }
        if cfg.network.file.is_some() == cfg.network.generate.is_some() {
            return Err(Error::Config(
                "[network] needs exactly one of `file` or `generate`".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// A config with every file loaded and every default filled in.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: RunConfig,
    pub network: NetworkSpec,
    pub objective: Objective,
    pub arrivals: ArrivalModel,
    pub states: StateModel,
    /// State distribution used by the oracle.
    pub pi_true: Vec<f64>,
    pub out_dir: PathBuf,
    /// SHA-256 over the effective config and the network it resolved to.
    pub config_hash: String,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg = RunConfig::from_toml_str(&read(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::build(cfg, base)
    }

    /// Resolve `cfg`, with relative paths taken from `base`.
    pub fn build(config: RunConfig, base: &Path) -> Result<Self> {
        let network = match (&config.network.file, &config.network.generate) {
            (Some(file), None) => NetworkSpec::from_toml_str(&read(&resolve(base, file))?)?,
            (None, Some(g)) => gen_network(&GeometryParams {
                links: g.links,
                radius: g.radius,
                link_length: g.link_length,
                seed: g.seed,
            })?,
            _ => {
                return Err(Error::Config(
                    "[network] needs exactly one of `file` or `generate`".into(),
                ))
            }
        };

        let states = build_states(&config.states, &network)?;
        let pi_true = match &network.pi_true {
            Some(pi) => pi.clone(),
            None => states.stationary()?,
        };

        let p = &config.problem;
        let a_max = match config.arrivals.kind {
            ArrivalKind::Trace => None,
            _ => Some(config.arrivals.a_max.unwrap_or(1)),
        };
        let penalty = PenaltyConfig {
            alpha: p.alpha,
            beta: p.beta,
            epsilon: p.epsilon,
            z_max: 0.0,
        };
        let mut constraints = Vec::new();
        for c in &p.constraints {
            constraints.push(match c {
                ConstraintName::RateStability => ConstraintKind::RateStability,
                ConstraintName::PowerBudget => ConstraintKind::PowerBudget {
                    budget: p
                        .budget
                        .clone()
                        .ok_or_else(|| Error::Config("power-budget needs `budget`".into()))?,
                },
            });
        }
        let cost = match p.cost {
            CostName::AveragePower => CostKind::AveragePower,
            CostName::Zero => CostKind::Zero,
        };

        // provisional z_max; only the throughput LP runs on it
        let provisional = ProblemSpec {
            cost,
            constraints: constraints.clone(),
            penalty: PenaltyConfig {
                z_max: f64::MAX,
                ..penalty
            },
        };
        let probe = Objective::new(&network, &provisional)?;
        let arrivals = build_arrivals(&config.arrivals, base, &probe, &pi_true)?;
        let z_max = p
            .z_max
            .unwrap_or_else(|| default_z_max(&network, a_max.map_or(arrivals.a_max() as f64, f64::from)));
        let spec = ProblemSpec {
            cost,
            constraints,
            penalty: PenaltyConfig { z_max, ..penalty },
        };
        let objective = Objective::new(&network, &spec)?;

        let mut hasher = Sha256::new();
        hasher.update(config.to_toml_string()?.as_bytes());
        hasher.update(network.to_toml_string()?.as_bytes());
        let config_hash = hex::encode(hasher.finalize());

        Ok(Self {
            out_dir: resolve(base, &config.output.dir),
            config,
            network,
            objective,
            arrivals,
            states,
            pi_true,
            config_hash,
        })
    }
}

fn build_states(s: &StateSection, net: &NetworkSpec) -> Result<StateModel> {
    let model = match s.kind {
        StateKind::Single => StateModel::single(),
        StateKind::Iid => StateModel::IidCategorical {
            distribution: s
                .distribution
                .clone()
                .ok_or_else(|| Error::Config("iid states need `distribution`".into()))?,
        },
        StateKind::Markov => StateModel::MarkovChain {
            transition: s
                .transition
                .clone()
                .ok_or_else(|| Error::Config("markov states need `transition`".into()))?,
        },
    };
    if model.num_states() != net.num_states() {
        return Err(Error::Config(format!(
            "state model has {} states, network {}",
            model.num_states(),
            net.num_states()
        )));
    }
    model.validate()?;
    Ok(model)
}

fn build_arrivals(a: &ArrivalSection, base: &Path, obj: &Objective, pi: &[f64]) -> Result<ArrivalModel> {
    let links = obj.network().links;
    let rates = || -> Result<Vec<f64>> {
        match (&a.rates, a.load) {
            (Some(_), Some(_)) => Err(Error::Config("give `rates` or `load`, not both".into())),
            (Some(r), None) => {
                if r.len() != links {
                    return Err(Error::Config(format!("{} rates for {links} links", r.len())));
                }
                Ok(r.clone())
            }
            (None, load) => {
                let load = load.unwrap_or(DEFAULT_LOAD);
                if !(load >= 0.0) || !load.is_finite() {
                    return Err(Error::Config("load must be finite and non-negative".into()));
                }
                let lambda = max_uniform_throughput(obj, pi)?;
                Ok(vec![load * lambda; links])
            }
        }
    };
    let a_max = a.a_max.unwrap_or(1);
    let model = match a.kind {
        ArrivalKind::Iid => ArrivalModel::IidBernoulliBatch { rates: rates()?, a_max },
        ArrivalKind::Deterministic => ArrivalModel::DeterministicRate { rates: rates()? },
        ArrivalKind::Drifting => {
            let rates = rates()?;
            let initial_rates = match (&a.initial_rates, a.initial_scale) {
                (Some(r), None) => r.clone(),
                (None, Some(s)) => rates.iter().map(|r| r * s).collect(),
                _ => {
                    return Err(Error::Config(
                        "drifting arrivals need one of `initial_rates` or `initial_scale`".into(),
                    ))
                }
            };
            ArrivalModel::DriftingRate {
                rates,
                initial_rates,
                a_max,
                decay_horizon: a.decay_horizon.unwrap_or(DEFAULT_DECAY_HORIZON),
            }
        }
        ArrivalKind::Trace => {
            let path = resolve(
                base,
                a.trace
                    .as_deref()
                    .ok_or_else(|| Error::Config("trace arrivals need `trace`".into()))?,
            );
            let file = fs::File::open(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ArrivalModel::Replay {
                trace: ArrivalTrace::read_csv(file, &path)?,
            }
        }
    };
    if model.links() != links {
        return Err(Error::Config(format!(
            "arrival model has {} links, network {links}",
            model.links()
        )));
    }
    model.validate()?;
    Ok(model)
}
