//! Flat `key = value` run configuration.
//!
//! ```text
//! # data: a tensor file or a synthetic generator
//! input = data.gotd
//! synth.dims = 32,32,4,20
//! synth.rank = 8
//! synth.noise = 0.01
//! synth.seed = 1
//!
//! variable_mode = 2          # default: second-to-last mode
//! scaling = mean-std         # or none
//! model = cp                 # or tucker
//! rank = 5                   # CP rank
//! tol = 0.1                  # ST-HOSVD tolerance (or ranks = 4,4,2,6)
//! als.tol = 1e-4
//! als.max_iters = 100
//! optimizer = tr-newton      # or lbfgs
//! iters = 20
//! seed = 0
//! out = results
//!
//! qoi.0.name = mass
//! qoi.0.kind = variable-sum  # variable-sum | kinetic-energy | fe-internal-energy
//!                            # | fe-kinetic-energy | fe-magnetic-energy | fe-momentum
//! qoi.0.vars = 0,1
//! qoi.0.times = all          # or 0,3,5 or 4..20 (end exclusive)
//! ```
//!
//! Every index is zero-based. Relative paths are resolved against the
//! directory of the config file. Unknown keys are rejected.

use super::synth::SynthSpec;
use crate::error::{Error, Result};
use crate::optimize::OptConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    File(PathBuf),
    Synth(SynthSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    MeanStd,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    Cp,
    Tucker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    TrNewton,
    Lbfgs,
}

impl FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tr-newton" | "tr" => Ok(Self::TrNewton),
            "lbfgs" | "l-bfgs" => Ok(Self::Lbfgs),
            _ => Err(Error::Config(format!("unknown optimizer '{s}' (tr-newton | lbfgs)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TimeSet {
    All,
    List(Vec<usize>),
}

impl TimeSet {
    pub fn resolve(&self, tau: usize) -> Vec<usize> {
        match self {
            TimeSet::All => (0..tau).collect(),
            TimeSet::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeshSource {
    File(PathBuf),
    /// Uniform grid over the spatial dims with this spacing.
    Structured([f64; 3]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeIntegrandKind {
    InternalEnergy,
    KineticEnergy,
    MagneticEnergy { mu0: f64 },
    Momentum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QoiKind {
    VariableSum { vars: Vec<usize>, coefficient: f64 },
    KineticEnergy { density: Vec<usize>, ux: usize, uy: usize },
    /// `vars` are the integrand inputs in order; for kinetic energy the
    /// density comes first.
    FiniteElement { integrand: FeIntegrandKind, vars: Vec<usize>, mesh: MeshSource },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoiSpec {
    pub name: String,
    pub kind: QoiKind,
    pub times: TimeSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: Option<DataSource>,
    pub model: Option<ModelFamily>,
    pub variable_mode: Option<usize>,
    pub scaling: ScalingMode,
    pub rank: Option<usize>,
    pub ranks: Option<Vec<usize>>,
    pub tol: Option<f64>,
    pub als_tol: f64,
    pub als_max_iters: usize,
    pub optimizer: OptimizerKind,
    pub opt: OptConfig,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub qois: Vec<QoiSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            model: None,
            variable_mode: None,
            scaling: ScalingMode::MeanStd,
            rank: None,
            ranks: None,
            tol: None,
            als_tol: 1e-4,
            als_max_iters: 100,
            optimizer: OptimizerKind::TrNewton,
            opt: OptConfig::default(),
            seed: 0,
            out: None,
            qois: Vec::new(),
        }
    }
}

/// Command-line overrides; `None` leaves the config value alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub rank: Option<usize>,
    pub tol: Option<f64>,
    pub iters: Option<usize>,
    pub optimizer: Option<OptimizerKind>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: cannot parse {key} = '{v}'"))),
        }
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => parse_list(&v)
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: cannot parse list {key} = '{v}'"))),
        }
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.parse(key)?.ok_or_else(|| Error::Config(format!("missing key {key}")))
    }

    fn require_list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        self.list(key)?.ok_or_else(|| Error::Config(format!("missing key {key}")))
    }
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, ()> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| ()))
        .collect()
}

fn parse_times(v: &str) -> Option<TimeSet> {
    if v == "all" {
        return Some(TimeSet::All);
    }
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.trim().parse().ok()?;
            let (b, inclusive) = match b.strip_prefix('=') {
                Some(b) => (b.trim().parse::<usize>().ok()?, true),
                None => (b.trim().parse::<usize>().ok()?, false),
            };
            out.extend(if inclusive { a..b + 1 } else { a..b });
        } else {
            out.push(part.parse().ok()?);
        }
    }
    Some(TimeSet::List(out))
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if map.insert(k.clone(), (i + 1, v)).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k}", i + 1)));
            }
        }
        let mut e = Entries { map };
        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_relative() {
                base_dir.join(p)
            } else {
                p
            }
        };
        let mut cfg = RunConfig::default();

        let input = e.take("input").map(|(_, v)| resolve(v));
        let synth_dims: Option<Vec<usize>> = e.list("synth.dims")?;
        cfg.seed = e.parse("seed")?.unwrap_or(0);
        cfg.data = match (input, synth_dims) {
            (Some(_), Some(_)) => return Err(Error::Config("give either input or synth.dims, not both".into())),
            (Some(p), None) => Some(DataSource::File(p)),
            (None, Some(dims)) => Some(DataSource::Synth(SynthSpec {
                dims,
                rank: e.require("synth.rank")?,
                noise: e.parse("synth.noise")?.unwrap_or(0.0),
                seed: e.parse("synth.seed")?.unwrap_or(cfg.seed),
            })),
            (None, None) => None,
        };
        if let Some((line, m)) = e.take("model") {
            cfg.model = Some(match m.as_str() {
                "cp" => ModelFamily::Cp,
                "tucker" => ModelFamily::Tucker,
                _ => return Err(Error::Config(format!("line {line}: model must be cp or tucker"))),
            });
        }
        cfg.variable_mode = e.parse("variable_mode")?;
        if let Some((line, s)) = e.take("scaling") {
            cfg.scaling = match s.as_str() {
                "mean-std" => ScalingMode::MeanStd,
                "none" => ScalingMode::None,
                _ => return Err(Error::Config(format!("line {line}: scaling must be mean-std or none"))),
            };
        }
        cfg.rank = e.parse("rank")?;
        cfg.ranks = e.list("ranks")?;
        cfg.tol = e.parse("tol")?;
        cfg.als_tol = e.parse("als.tol")?.unwrap_or(cfg.als_tol);
        cfg.als_max_iters = e.parse("als.max_iters")?.unwrap_or(cfg.als_max_iters);
        if let Some(o) = e.parse::<String>("optimizer")? {
            cfg.optimizer = o.parse()?;
        }
        cfg.opt.max_outer_iterations = e.parse("iters")?.unwrap_or(cfg.opt.max_outer_iterations);
        cfg.opt.lbfgs_memory = e.parse("lbfgs.memory")?.unwrap_or(cfg.opt.lbfgs_memory);
        cfg.opt.tcg_max_iterations = e.parse("tcg.max_iters")?;
        cfg.opt.initial_radius = e.parse("tr.initial_radius")?;
        cfg.out = e.take("out").map(|(_, v)| resolve(v));

        let mut ids: Vec<usize> = e
            .map
            .keys()
            .filter_map(|k| k.strip_prefix("qoi.")?.split('.').next()?.parse().ok())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        for id in ids {
            cfg.qois.push(parse_qoi(&mut e, id, &resolve)?);
        }
        if let Some((k, (line, _))) = e.map.iter().next() {
            return Err(Error::Config(format!("line {line}: unknown key {k}")));
        }
        cfg.opt.validate()?;
        Ok(cfg)
    }

    /// Applies overrides. `--tol` is the ST-HOSVD tolerance for Tucker
    /// runs and the ALS stopping tolerance for CP runs.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(r) = o.rank {
            self.rank = Some(r);
        }
        if let Some(t) = o.tol {
            match self.model {
                Some(ModelFamily::Cp) => self.als_tol = t,
                _ => {
                    self.tol = Some(t);
                    self.ranks = None;
                }
            }
        }
        if let Some(i) = o.iters {
            self.opt.max_outer_iterations = i;
        }
        if let Some(opt) = o.optimizer {
            self.optimizer = opt;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
    }
}

fn parse_qoi(e: &mut Entries, id: usize, resolve: &dyn Fn(String) -> PathBuf) -> Result<QoiSpec> {
    let key = |f: &str| format!("qoi.{id}.{f}");
    let name = e.parse::<String>(&key("name"))?.unwrap_or_else(|| format!("qoi{id}"));
    let kind_name: String = e.require(&key("kind"))?;
    let times = match e.take(&key("times")) {
        None => TimeSet::All,
        Some((line, v)) => parse_times(&v)
            .ok_or_else(|| Error::Config(format!("line {line}: cannot parse time set '{v}'")))?,
    };
    let fe = |e: &mut Entries, integrand| -> Result<QoiKind> {
        let mesh = match (e.take(&key("mesh")), e.list::<f64>(&key("spacing"))?) {
            (Some((_, p)), None) => MeshSource::File(resolve(p)),
            (None, Some(h)) if h.len() == 3 => MeshSource::Structured([h[0], h[1], h[2]]),
            (None, Some(_)) => return Err(Error::Config(format!("{} needs 3 values", key("spacing")))),
            (Some(_), Some(_)) => return Err(Error::Config(format!("qoi.{id}: give mesh or spacing, not both"))),
            (None, None) => return Err(Error::Config(format!("qoi.{id}: finite-element QoI is missing a mesh"))),
        };
        Ok(QoiKind::FiniteElement {
            integrand,
            vars: e.require_list(&key("vars"))?,
            mesh,
        })
    };
    let kind = match kind_name.as_str() {
        "variable-sum" => QoiKind::VariableSum {
            vars: e.require_list(&key("vars"))?,
            coefficient: e.parse(&key("coefficient"))?.unwrap_or(1.0),
        },
        "kinetic-energy" => QoiKind::KineticEnergy {
            density: e.require_list(&key("density"))?,
            ux: e.require(&key("ux"))?,
            uy: e.require(&key("uy"))?,
        },
        "fe-internal-energy" => fe(e, FeIntegrandKind::InternalEnergy)?,
        "fe-kinetic-energy" => fe(e, FeIntegrandKind::KineticEnergy)?,
        "fe-magnetic-energy" => {
            let mu0 = e.parse(&key("mu0"))?.unwrap_or(1.0);
            fe(e, FeIntegrandKind::MagneticEnergy { mu0 })?
        }
        "fe-momentum" => fe(e, FeIntegrandKind::Momentum)?,
        other => return Err(Error::Config(format!("qoi.{id}: unknown kind '{other}'"))),
    };
    Ok(QoiSpec { name, kind, times })
}
