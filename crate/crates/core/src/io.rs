//! File formats and run metrics.
//!
//! JSON schemas (all with 1-based bus numbers):
//!
//! * network: `{version, name?, note?, buses: [{id, inertia, damping, p}], lines: [{from, to, b}]}`
//! * scenario: `{version, T, dt, disturbances: [{bus, dp, t0, t1}], init: {omega_range, p_frac}, noise}`
//! * safety spec: `{version, omega_lo, omega_hi}` with a number or one value per bus on each side
//! * training config: the fields of [`TrainConfig`]
//! * checkpoint: `{version, kind, n, config, config_hash, spec, raw}`
//!
//! Trajectory CSV: `#`-prefixed provenance lines, then the columns
//! `t, omega_1..n, u_1..n, b_1..n, V, loss_freq, loss_ctrl, lambda_1..m`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::{
    AnalyticSafe, ConstrainedPolicy, ControlLaw, ControlOutput, MonotonePolicy, SafetySpec, Trainable, ZeroControl,
};
use crate::dynamics::{rollout, Disturbance, Model, RolloutOptions, Scenario, Trajectory};
use crate::error::{Error, Result};
use crate::netgraph::{Line, PowerNetwork};
use crate::scalar::{ParamView, Real};
use crate::training::{loss, CurvePoint, TrainConfig};
use crate::verify::{verify, VerdictReport, VerifyContext};

pub const FORMAT_VERSION: u32 = 1;

fn one() -> u32 {
    FORMAT_VERSION
}

fn check_version(v: u32, what: &str) -> Result<()> {
    if v == FORMAT_VERSION {
        Ok(())
    } else {
        Err(Error::Checkpoint(format!("{what}: unsupported format version {v}")))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: usize,
    pub inertia: f64,
    pub damping: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRecord {
    pub from: usize,
    pub to: usize,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default = "one")]
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub buses: Vec<BusRecord>,
    pub lines: Vec<LineRecord>,
}

impl NetworkFile {
    pub fn from_network(net: &PowerNetwork<f64>) -> Self {
        Self {
            version: FORMAT_VERSION,
            name: None,
            note: None,
            buses: (0..net.n())
                .map(|i| BusRecord {
                    id: i + 1,
                    inertia: net.inertia()[i],
                    damping: net.damping()[i],
                    p: net.p_nom()[i],
                })
                .collect(),
            lines: net
                .lines()
                .iter()
                .map(|l| LineRecord {
                    from: l.from + 1,
                    to: l.to + 1,
                    b: l.b,
                })
                .collect(),
        }
    }

    pub fn to_network(&self) -> Result<PowerNetwork<f64>> {
        check_version(self.version, "network")?;
        let n = self.buses.len();
        let mut order = vec![None; n];
        for (k, b) in self.buses.iter().enumerate() {
            if b.id == 0 || b.id > n {
                return Err(Error::InvalidNetwork(format!("buses[{k}]: id {} outside 1..={n}", b.id)));
            }
            if order[b.id - 1].replace(k).is_some() {
                return Err(Error::InvalidNetwork(format!("bus {}: listed twice", b.id)));
            }
        }
        let at = |i: usize| &self.buses[order[i].expect("ids form 1..=n")];
        let lines = self
            .lines
            .iter()
            .enumerate()
            .map(|(k, l)| {
                if l.from == 0 || l.to == 0 {
                    return Err(Error::InvalidNetwork(format!("edge {}: bus numbers are 1-based", k + 1)));
                }
                Ok(Line {
                    from: l.from - 1,
                    to: l.to - 1,
                    b: l.b,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PowerNetwork::new(
            lines,
            (0..n).map(|i| at(i).inertia).collect(),
            (0..n).map(|i| at(i).damping).collect(),
            (0..n).map(|i| at(i).p).collect(),
        )
    }
}

pub fn load_network(path: &Path) -> Result<PowerNetwork<f64>> {
    read_json::<NetworkFile>(path)?.to_network()
}

pub fn save_network(path: &Path, net: &PowerNetwork<f64>) -> Result<()> {
    write_json(path, &NetworkFile::from_network(net))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceRecord {
    pub bus: usize,
    pub dp: f64,
    pub t0: f64,
    pub t1: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitRecord {
    pub omega_range: f64,
    pub p_frac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "one")]
    pub version: u32,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub disturbances: Vec<DisturbanceRecord>,
    #[serde(default)]
    pub init: InitRecord,
    #[serde(default)]
    pub noise: f64,
}

impl ScenarioFile {
    pub fn from_scenario(s: &Scenario<f64>) -> Self {
        Self {
            version: FORMAT_VERSION,
            horizon: s.horizon,
            dt: s.dt,
            disturbances: s
                .disturbances
                .iter()
                .map(|d| DisturbanceRecord {
                    bus: d.bus + 1,
                    dp: d.dp,
                    t0: d.t_start,
                    t1: d.t_end,
                })
                .collect(),
            init: InitRecord {
                omega_range: s.init_omega_range,
                p_frac: s.init_p_frac,
            },
            noise: s.noise,
        }
    }

    /// Bus ranges are checked against a network later, by [`Scenario::validate`].
    pub fn to_scenario(&self) -> Result<Scenario<f64>> {
        check_version(self.version, "scenario")?;
        let disturbances = self
            .disturbances
            .iter()
            .enumerate()
            .map(|(k, d)| {
                if d.bus == 0 {
                    return Err(Error::InvalidScenario(format!("disturbance {}: bus numbers are 1-based", k + 1)));
                }
                Ok(Disturbance {
                    bus: d.bus - 1,
                    dp: d.dp,
                    t_start: d.t0,
                    t_end: d.t1,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let s = Scenario {
            horizon: self.horizon,
            dt: self.dt,
            disturbances,
            init_omega_range: self.init.omega_range,
            init_p_frac: self.init.p_frac,
            noise: self.noise,
        };
        s.validate(usize::MAX)?;
        Ok(s)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario<f64>> {
    read_json::<ScenarioFile>(path)?.to_scenario()
}

pub fn save_scenario(path: &Path, s: &Scenario<f64>) -> Result<()> {
    write_json(path, &ScenarioFile::from_scenario(s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundRecord {
    Uniform(f64),
    PerBus(Vec<f64>),
}

impl BoundRecord {
    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            Self::Uniform(x) => vec![*x; n],
            Self::PerBus(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    #[serde(default = "one")]
    pub version: u32,
    pub omega_lo: BoundRecord,
    pub omega_hi: BoundRecord,
}

impl SpecFile {
    pub fn from_spec(s: &SafetySpec<f64>) -> Self {
        Self {
            version: FORMAT_VERSION,
            omega_lo: BoundRecord::PerBus(s.omega_lo.clone()),
            omega_hi: BoundRecord::PerBus(s.omega_hi.clone()),
        }
    }

    /// Expands to `n` buses; sizes are validated against the equilibrium later.
    pub fn to_spec(&self, n: usize) -> Result<SafetySpec<f64>> {
        check_version(self.version, "safety spec")?;
        let s = SafetySpec {
            omega_lo: self.omega_lo.expand(n),
            omega_hi: self.omega_hi.expand(n),
        };
        if s.omega_lo.len() != n || s.omega_hi.len() != n {
            return Err(Error::InvalidSpec(format!(
                "expected {n} bounds per side, got {} and {}",
                s.omega_lo.len(),
                s.omega_hi.len()
            )));
        }
        Ok(s)
    }
}

pub fn load_spec(path: &Path, n: usize) -> Result<SafetySpec<f64>> {
    read_json::<SpecFile>(path)?.to_spec(n)
}

pub fn load_config(path: &Path) -> Result<TrainConfig> {
    let cfg: TrainConfig = read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn save_config(path: &Path, cfg: &TrainConfig) -> Result<()> {
    write_json(path, cfg)
}

/// SHA-256 of the compact JSON encoding, hex.
pub fn config_hash(cfg: &TrainConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    RlConstrained,
    RlMonotoneBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub kind: PolicyKind,
    pub n: usize,
    pub config: TrainConfig,
    pub config_hash: String,
    pub spec: SpecFile,
    pub raw: Vec<f64>,
}

impl Checkpoint {
    pub fn constrained(policy: &ConstrainedPolicy<f64>, cfg: &TrainConfig) -> Self {
        Self::build(PolicyKind::RlConstrained, policy.layout().n, policy.raw(), policy.spec(), cfg)
    }

    pub fn monotone(policy: &MonotonePolicy<f64>, spec: &SafetySpec<f64>, cfg: &TrainConfig) -> Self {
        Self::build(PolicyKind::RlMonotoneBaseline, spec.n(), policy.raw(), spec, cfg)
    }

    fn build(kind: PolicyKind, n: usize, raw: &[f64], spec: &SafetySpec<f64>, cfg: &TrainConfig) -> Self {
        Self {
            version: FORMAT_VERSION,
            kind,
            n,
            config: cfg.clone(),
            config_hash: config_hash(cfg),
            spec: SpecFile::from_spec(spec),
            raw: raw.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_version(self.version, "checkpoint")?;
        if config_hash(&self.config) != self.config_hash {
            return Err(Error::Checkpoint("config hash does not match the stored config".into()));
        }
        self.config.validate()?;
        if let Some(i) = self.raw.iter().position(|x| !x.is_finite()) {
            return Err(Error::Checkpoint(format!("raw parameter {i} is not finite")));
        }
        Ok(())
    }

    /// Rebuilds the policy on `model`.
    pub fn policy(&self, model: &Model<f64>) -> Result<LoadedController> {
        self.validate()?;
        if model.n() != self.n {
            return Err(Error::Checkpoint(format!(
                "checkpoint is for {} buses, network has {}",
                self.n,
                model.n()
            )));
        }
        let spec = self.spec.to_spec(self.n)?;
        let expect_len = |len: usize| {
            if self.raw.len() == len {
                Ok(())
            } else {
                Err(Error::Checkpoint(format!("expected {len} raw parameters, found {}", self.raw.len())))
            }
        };
        match self.kind {
            PolicyKind::RlConstrained => {
                let mut p = ConstrainedPolicy::new(
                    model,
                    spec,
                    self.config.m_hidden,
                    self.config.dtilde_frac,
                    self.config.projection,
                )?;
                expect_len(p.layout().len())?;
                p.set_raw(self.raw.clone());
                p.check_structure()?;
                Ok(LoadedController::Constrained(p))
            }
            PolicyKind::RlMonotoneBaseline => {
                let mut p = MonotonePolicy::new(model, self.config.m_hidden)?;
                expect_len(model.n() * 4 * self.config.m_hidden)?;
                p.set_raw(self.raw.clone());
                p.check_structure()?;
                Ok(LoadedController::Monotone(p))
            }
        }
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let c: Checkpoint = read_json(path)?;
    c.validate().map_err(|e| Error::Format {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    Ok(c)
}

pub fn save_checkpoint(path: &Path, c: &Checkpoint) -> Result<()> {
    write_json(path, c)
}

/// Any controller the command line can name.
#[derive(Debug, Clone)]
pub enum LoadedController {
    Zero,
    Analytic(AnalyticSafe<f64>),
    Constrained(ConstrainedPolicy<f64>),
    Monotone(MonotonePolicy<f64>),
}

impl LoadedController {
    /// `zero`, `analytic-safe-baseline`, or a checkpoint path.
    pub fn resolve(arg: &str, model: &Model<f64>, spec: &SafetySpec<f64>) -> Result<Self> {
        match arg {
            "zero" => Ok(Self::Zero),
            "analytic-safe-baseline" => Ok(Self::Analytic(AnalyticSafe::new(spec.clone()))),
            path => load_checkpoint(Path::new(path))?.policy(model),
        }
    }
}

impl ControlLaw<f64> for LoadedController {
    fn name(&self) -> &str {
        match self {
            Self::Zero => ControlLaw::<f64>::name(&ZeroControl),
            Self::Analytic(c) => c.name(),
            Self::Constrained(c) => c.name(),
            Self::Monotone(c) => c.name(),
        }
    }

    fn effective(&self) -> &[f64] {
        match self {
            Self::Zero | Self::Analytic(_) => &[],
            Self::Constrained(c) => c.effective(),
            Self::Monotone(c) => c.effective(),
        }
    }

    fn act<R, P>(&self, model: &Model<f64>, params: &P, omega: &[R], lambda: &[R], p: &[f64]) -> ControlOutput<R>
    where
        R: Real<Base = f64>,
        P: ParamView<R> + ?Sized,
    {
        match self {
            Self::Zero => ZeroControl.act(model, params, omega, lambda, p),
            Self::Analytic(c) => c.act(model, params, omega, lambda, p),
            Self::Constrained(c) => c.act(model, params, omega, lambda, p),
            Self::Monotone(c) => c.act(model, params, omega, lambda, p),
        }
    }

    fn dead_zones(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Self::Zero | Self::Monotone(_) => None,
            Self::Analytic(c) => c.dead_zones(),
            Self::Constrained(c) => c.dead_zones(),
        }
    }
}

/// Provenance written above the trajectory columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub controller: String,
    pub seed: u64,
    pub dt: f64,
    /// Effective configuration of the producing command.
    pub config: serde_json::Value,
    pub verify: VerifyContext,
}

fn fmt_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    for (k, v) in values.into_iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(&v.to_string());
    }
    out.push('\n');
}

pub fn trajectory_to_string(traj: &Trajectory<f64>, header: &TrajectoryHeader) -> String {
    let (n, m) = (traj.n(), traj.m());
    let mut s = String::new();
    s.push_str(&format!("# freqsafe trajectory v{FORMAT_VERSION}\n"));
    s.push_str(&format!("# controller={}\n", header.controller));
    s.push_str(&format!("# seed={}\n", header.seed));
    s.push_str(&format!("# dt={}\n", header.dt));
    s.push_str(&format!("# config={}\n", header.config));
    s.push_str(&format!(
        "# verify={}\n",
        serde_json::to_string(&header.verify).expect("context serializes")
    ));
    let mut cols = vec!["t".to_string()];
    for (prefix, count) in [("omega", n), ("u", n), ("b", n)] {
        cols.extend((1..=count).map(|i| format!("{prefix}_{i}")));
    }
    cols.extend(["V", "loss_freq", "loss_ctrl"].map(String::from));
    cols.extend((1..=m).map(|e| format!("lambda_{e}")));
    s.push_str(&cols.join(","));
    s.push('\n');
    for k in 0..traj.len() {
        let row = std::iter::once(traj.time[k])
            .chain(traj.omega[k].iter().copied())
            .chain(traj.u[k].iter().copied())
            .chain(traj.budgets[k].iter().copied())
            .chain([traj.energy[k], traj.loss_freq[k], traj.loss_ctrl[k]])
            .chain(traj.lambda[k].iter().copied());
        fmt_row(&mut s, row);
    }
    s
}

pub fn write_trajectory(path: &Path, traj: &Trajectory<f64>, header: &TrajectoryHeader) -> Result<()> {
    fs::write(path, trajectory_to_string(traj, header)).map_err(io_err(path))
}

/// Parses a trajectory CSV; `origin` labels errors.
pub fn trajectory_from_str(text: &str, origin: &str) -> Result<(Trajectory<f64>, TrajectoryHeader)> {
    let fail = |msg: String| Error::Format {
        path: origin.to_string(),
        msg,
    };
    let mut meta = std::collections::BTreeMap::new();
    let mut body_start = 0;
    for line in text.lines() {
        let Some(rest) = line.strip_prefix('#') else { break };
        body_start += line.len() + 1;
        if let Some((k, v)) = rest.trim_start().split_once('=') {
            meta.insert(k.to_string(), v.to_string());
        }
    }
    let get = |k: &str| meta.get(k).ok_or_else(|| fail(format!("missing header line `# {k}=`")));
    let parse_json = |k: &str| -> Result<serde_json::Value> {
        serde_json::from_str(get(k)?).map_err(|e| fail(format!("header `{k}`: {e}")))
    };
    let header = TrajectoryHeader {
        controller: get("controller")?.clone(),
        seed: get("seed")?.parse().map_err(|e| fail(format!("header `seed`: {e}")))?,
        dt: get("dt")?.parse().map_err(|e| fail(format!("header `dt`: {e}")))?,
        config: parse_json("config")?,
        verify: serde_json::from_value(parse_json("verify")?).map_err(|e| fail(format!("header `verify`: {e}")))?,
    };

    let mut rdr = csv::ReaderBuilder::new().from_reader(text[body_start.min(text.len())..].as_bytes());
    let cols: Vec<String> = rdr
        .headers()
        .map_err(|source| Error::Csv {
            path: origin.to_string(),
            source,
        })?
        .iter()
        .map(String::from)
        .collect();
    let count = |prefix: &str| cols.iter().filter(|c| c.starts_with(prefix)).count();
    let (n, m) = (count("omega_"), count("lambda_"));
    if cols.len() != 4 + 3 * n + m || cols[0] != "t" {
        return Err(fail(format!("unexpected column layout ({} columns, n = {n}, m = {m})", cols.len())));
    }
    let mut traj = Trajectory {
        dt: header.dt,
        time: vec![],
        lambda: vec![],
        omega: vec![],
        u: vec![],
        budgets: vec![],
        energy: vec![],
        loss_freq: vec![],
        loss_ctrl: vec![],
    };
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|source| Error::Csv {
            path: origin.to_string(),
            source,
        })?;
        let v = rec
            .iter()
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| fail(format!("data row {}: {e}", r + 1)))?;
        traj.time.push(v[0]);
        traj.omega.push(v[1..1 + n].to_vec());
        traj.u.push(v[1 + n..1 + 2 * n].to_vec());
        traj.budgets.push(v[1 + 2 * n..1 + 3 * n].to_vec());
        traj.energy.push(v[1 + 3 * n]);
        traj.loss_freq.push(v[2 + 3 * n]);
        traj.loss_ctrl.push(v[3 + 3 * n]);
        traj.lambda.push(v[4 + 3 * n..].to_vec());
    }
    if traj.is_empty() {
        return Err(fail("no data rows".into()));
    }
    Ok((traj, header))
}

pub fn read_trajectory(path: &Path) -> Result<(Trajectory<f64>, TrajectoryHeader)> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    trajectory_from_str(&text, &path.display().to_string())
}

/// `episode,loss,loss_freq,loss_ctrl,loss_lip` with `#` provenance lines.
pub fn curve_to_string(points: &[CurvePoint], provenance: &[String]) -> String {
    let mut s = String::new();
    for p in provenance {
        s.push_str(&format!("# {p}\n"));
    }
    s.push_str("episode,loss,loss_freq,loss_ctrl,loss_lip\n");
    for p in points {
        s.push_str(&format!("{},", p.episode));
        fmt_row(&mut s, [p.loss, p.loss_freq, p.loss_ctrl, p.loss_lip]);
    }
    s
}

pub fn write_curve(path: &Path, points: &[CurvePoint], provenance: &[String]) -> Result<()> {
    fs::write(path, curve_to_string(points, provenance)).map_err(io_err(path))
}

/// Metric settings for [`summarize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryConfig {
    pub gamma: f64,
    /// Second, shorter cost horizon (s).
    pub short_horizon: f64,
    /// Settling band on `‖ω − ω∞𝟏‖_∞` (Hz).
    pub settle_tol: f64,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        Self {
            gamma: 40.0,
            short_horizon: 10.0,
            settle_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub controller: String,
    pub runs: usize,
    /// Batch-mean loss with `ρ = 0` over the full horizon.
    pub cost: f64,
    /// Same over the first `short_horizon` seconds.
    pub cost_short: f64,
    pub short_horizon: f64,
    /// Per bus, the recorded `ω_i` farthest from `ω∞`.
    pub nadir: Vec<f64>,
    /// First time after which `‖ω − ω∞𝟏‖_∞` stays below the band; `None` if it never settles.
    pub settling_time: Option<f64>,
    pub safe: bool,
    pub stable: bool,
    pub verdicts: Vec<VerdictReport>,
}

fn truncate(traj: &Trajectory<f64>, steps: usize) -> Trajectory<f64> {
    let r = steps.min(traj.steps()) + 1;
    Trajectory {
        dt: traj.dt,
        time: traj.time[..r].to_vec(),
        lambda: traj.lambda[..r].to_vec(),
        omega: traj.omega[..r].to_vec(),
        u: traj.u[..r].to_vec(),
        budgets: traj.budgets[..r].to_vec(),
        energy: traj.energy[..r].to_vec(),
        loss_freq: traj.loss_freq[..r].to_vec(),
        loss_ctrl: traj.loss_ctrl[..r].to_vec(),
    }
}

fn settling_time(traj: &Trajectory<f64>, omega_inf: f64, tol: f64) -> Option<f64> {
    let outside = |row: &Vec<f64>| row.iter().any(|w| (w - omega_inf).abs() >= tol);
    match traj.omega.iter().rposition(outside) {
        None => Some(traj.time[0]),
        Some(k) if k + 1 < traj.len() => Some(traj.time[k + 1]),
        Some(_) => None,
    }
}

/// Metrics and verdicts over a batch of runs of one controller.
pub fn summarize(controller: &str, batch: &[Trajectory<f64>], ctx: &VerifyContext, cfg: &SummaryConfig) -> RunSummary {
    let winf = ctx.omega_inf;
    let cost = loss(batch, winf, cfg.gamma, 0.0).total;
    let short: Vec<_> = batch
        .iter()
        .map(|t| truncate(t, (cfg.short_horizon / t.dt).round() as usize))
        .collect();
    let cost_short = loss(&short, winf, cfg.gamma, 0.0).total;
    let n = batch.first().map_or(0, Trajectory::n);
    let mut nadir = vec![winf; n];
    for t in batch {
        for row in &t.omega {
            for (i, &w) in row.iter().enumerate() {
                if (w - winf).abs() > (nadir[i] - winf).abs() {
                    nadir[i] = w;
                }
            }
        }
    }
    let settling = batch
        .iter()
        .map(|t| settling_time(t, winf, cfg.settle_tol))
        .try_fold(0.0_f64, |acc, s| s.map(|s| acc.max(s)));
    let verdicts: Vec<VerdictReport> = batch.iter().map(|t| verify(t, ctx)).collect();
    let passed = |r: &VerdictReport, name: &str| r.get(name).is_some_and(|v| v.pass);
    RunSummary {
        controller: controller.to_string(),
        runs: batch.len(),
        cost,
        cost_short,
        short_horizon: cfg.short_horizon,
        nadir,
        settling_time: settling,
        safe: verdicts.iter().all(|r| passed(r, "frequency_invariance")),
        stable: verdicts.iter().all(|r| passed(r, "lyapunov") && passed(r, "convergence")),
        verdicts,
    }
}

/// Runs every controller on the same scenario and seeds.
pub fn compare(
    model: &Model<f64>,
    spec: &SafetySpec<f64>,
    controllers: &[LoadedController],
    scenario: &Scenario<f64>,
    seeds: &[u64],
    cfg: &SummaryConfig,
) -> Result<Vec<RunSummary>> {
    let opts = RolloutOptions {
        gamma: cfg.gamma,
        ..RolloutOptions::default()
    };
    controllers
        .iter()
        .map(|c| {
            let batch = seeds
                .iter()
                .map(|&s| rollout(model, c, scenario, s, &opts))
                .collect::<Result<Vec<_>>>()?;
            let ctx = VerifyContext::new(model, spec, scenario).with_thresholds(c.dead_zones());
            Ok(summarize(c.name(), &batch, &ctx, cfg))
        })
        .collect()
}

/// `method,stability,safety,cost,cost_short,max_abs_nadir,settling_time`.
pub fn comparison_to_string(rows: &[RunSummary], omega_inf: f64, provenance: &[String]) -> String {
    let mark = |b: bool| if b { "pass" } else { "fail" };
    let mut s = String::new();
    for p in provenance {
        s.push_str(&format!("# {p}\n"));
    }
    s.push_str("method,stability,safety,cost,cost_short,max_abs_nadir,settling_time\n");
    for r in rows {
        let nadir = r.nadir.iter().map(|w| (w - omega_inf).abs()).fold(0.0, f64::max);
        let settle = r.settling_time.map_or("inf".to_string(), |t| t.to_string());
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.controller,
            mark(r.stable),
            mark(r.safe),
            r.cost,
            r.cost_short,
            nadir,
            settle
        ));
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}
