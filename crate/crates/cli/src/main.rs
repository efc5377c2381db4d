//! `freqsafe`: simulate, train, verify and compare frequency controllers.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use freqsafe::controller::{ConstrainedPolicy, ControlLaw, MonotonePolicy, SafetySpec, Trainable};
use freqsafe::dynamics::{rollout, Model, RolloutOptions, Scenario};
use freqsafe::io::{
    self, Checkpoint, LoadedController, ScenarioFile, SpecFile, SummaryConfig, TrajectoryHeader,
};
use freqsafe::training::{train, TrainConfig};
use freqsafe::verify::{verify, VerifyContext};

#[derive(Parser, Debug)]
#[command(name = "freqsafe", version, about = "Transient frequency control on swing-equation networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-loop run: trajectory CSV and verdict JSON.
    Simulate(SimulateArgs),
    /// Train a policy: checkpoint and learning-curve CSV.
    Train(TrainArgs),
    /// Check a trajectory CSV; exit 0 iff every check passes.
    Verify(VerifyArgs),
    /// Run several controllers on the same scenario and seeds.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn on(self) -> bool {
        self == OnOff::On
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    RlConstrained,
    RlMonotoneBaseline,
}

#[derive(Args, Debug)]
struct Setup {
    /// Network JSON.
    #[arg(long)]
    net: PathBuf,
    /// Scenario JSON.
    #[arg(long)]
    scenario: PathBuf,
    /// Safety-band JSON.
    #[arg(long, default_value = "data/spec.json")]
    spec: PathBuf,
    /// Overrides the scenario step size.
    #[arg(long)]
    dt: Option<f64>,
    /// Overrides the scenario horizon (s).
    #[arg(long)]
    horizon: Option<f64>,
    /// Overrides the measurement-noise bound (Hz).
    #[arg(long)]
    noise: Option<f64>,
}

struct Loaded {
    model: Model<f64>,
    scenario: Scenario<f64>,
    spec: SafetySpec<f64>,
}

impl Setup {
    fn load(&self) -> Result<Loaded> {
        let net = io::load_network(&self.net).with_context(|| format!("loading network {}", self.net.display()))?;
        let model = Model::new(net).with_context(|| format!("network {}", self.net.display()))?;
        let mut scenario =
            io::load_scenario(&self.scenario).with_context(|| format!("loading scenario {}", self.scenario.display()))?;
        if let Some(dt) = self.dt {
            scenario.dt = dt;
        }
        if let Some(h) = self.horizon {
            scenario = scenario.with_horizon(h);
        }
        if let Some(noise) = self.noise {
            scenario.noise = noise;
        }
        scenario.validate(model.n())?;
        let spec = io::load_spec(&self.spec, model.n()).with_context(|| format!("loading spec {}", self.spec.display()))?;
        spec.validate(model.n(), model.eq.omega_inf)?;
        Ok(Loaded { model, scenario, spec })
    }

    fn echo(&self, l: &Loaded) -> serde_json::Value {
        json!({
            "net": self.net.display().to_string(),
            "scenario": ScenarioFile::from_scenario(&l.scenario),
            "spec": SpecFile::from_spec(&l.spec),
        })
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    setup: Setup,
    /// `zero`, `analytic-safe-baseline`, or a checkpoint path.
    #[arg(long, default_value = "zero")]
    controller: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides the projection mode of a constrained checkpoint.
    #[arg(long, value_enum)]
    projection: Option<OnOff>,
    /// Weight of the frequency term in the recorded loss columns.
    #[arg(long, default_value_t = 40.0)]
    gamma: f64,
    /// Trajectory CSV.
    #[arg(long)]
    out: PathBuf,
    /// Verdict JSON; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    setup: Setup,
    #[arg(long, value_enum, default_value = "rl-constrained")]
    policy: PolicyArg,
    /// Training config JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    /// Steps per training rollout.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long, value_enum)]
    projection: Option<OnOff>,
    /// 12500 steps of 0.8 ms before other overrides.
    #[arg(long)]
    full_scale: bool,
    /// Checkpoint JSON.
    #[arg(long)]
    out: PathBuf,
    /// Learning-curve CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Trajectory CSV written by `simulate`.
    #[arg(long)]
    traj: PathBuf,
    /// Replaces the band recorded in the trajectory header.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    tol_omega: Option<f64>,
    #[arg(long)]
    tol_lambda: Option<f64>,
    /// Verdict JSON; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    setup: Setup,
    /// Comma-separated controllers: `zero`, `analytic-safe-baseline`, or checkpoint paths.
    #[arg(long, value_delimiter = ',', required = true)]
    controllers: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Runs per controller, seeds `seed..seed+runs`.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    #[arg(long, default_value_t = 40.0)]
    gamma: f64,
    /// Second cost horizon (s).
    #[arg(long, default_value_t = 10.0)]
    short_horizon: f64,
    /// Comparison CSV.
    #[arg(long)]
    out: PathBuf,
    /// Full summaries as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn emit_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    match path {
        Some(p) => io::write_json(p, value)?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<bool> {
    let l = a.setup.load()?;
    let mut c = LoadedController::resolve(&a.controller, &l.model, &l.spec)?;
    if let (Some(p), LoadedController::Constrained(pol)) = (a.projection, &mut c) {
        pol.set_projection(p.on());
    }
    let opts = RolloutOptions {
        gamma: a.gamma,
        ..RolloutOptions::default()
    };
    let traj = rollout(&l.model, &c, &l.scenario, a.seed, &opts)?;
    let ctx = VerifyContext::new(&l.model, &l.spec, &l.scenario).with_thresholds(c.dead_zones());
    let mut config = a.setup.echo(&l);
    config["command"] = json!("simulate");
    config["controller"] = json!(a.controller);
    config["seed"] = json!(a.seed);
    config["gamma"] = json!(a.gamma);
    if let LoadedController::Constrained(pol) = &c {
        config["projection"] = json!(pol.projection());
    }
    let header = TrajectoryHeader {
        controller: c.name().to_string(),
        seed: a.seed,
        dt: l.scenario.dt,
        config,
        verify: ctx,
    };
    io::write_trajectory(&a.out, &traj, &header)?;
    let report = verify(&traj, &header.verify);
    emit_json(a.report.as_deref(), &report)?;
    Ok(true)
}

fn train_cmd(a: &TrainArgs) -> Result<bool> {
    let l = a.setup.load()?;
    let mut cfg = match &a.config {
        Some(p) => io::load_config(p)?,
        None if a.full_scale => TrainConfig::full_scale(),
        None => TrainConfig::default(),
    };
    if a.full_scale {
        let ps = TrainConfig::full_scale();
        cfg.k = ps.k;
        cfg.dt = ps.dt;
    }
    if let Some(dt) = a.setup.dt {
        cfg.dt = dt;
    }
    macro_rules! set {
        ($($field:ident <- $flag:expr),*) => { $(if let Some(v) = $flag { cfg.$field = v; })* };
    }
    set!(episodes <- a.episodes, batch <- a.batch, k <- a.k, seed <- a.seed, rho <- a.rho,
         gamma <- a.gamma, lr <- a.lr, m_hidden <- a.hidden);
    if let Some(p) = a.projection {
        cfg.projection = p.on();
    }
    cfg.validate()?;

    let mut provenance = vec![
        "freqsafe learning curve".to_string(),
        format!("config={}", serde_json::to_string(&cfg)?),
        format!("setup={}", a.setup.echo(&l)),
    ];
    let report = |p: &freqsafe::training::CurvePoint| log::info!("episode {} loss {:.6}", p.episode, p.loss);
    let (ckpt, curve) = match a.policy {
        PolicyArg::RlConstrained => {
            let mut pol = ConstrainedPolicy::new(&l.model, l.spec.clone(), cfg.m_hidden, cfg.dtilde_frac, cfg.projection)?;
            pol.init_random(cfg.seed, cfg.init_scale);
            let curve = train(&l.model, &mut pol, &l.scenario, &cfg, report)?;
            pol.check_structure()?;
            (Checkpoint::constrained(&pol, &cfg), curve)
        }
        PolicyArg::RlMonotoneBaseline => {
            let mut pol = MonotonePolicy::new(&l.model, cfg.m_hidden)?;
            pol.init_random(cfg.seed, cfg.init_scale);
            let curve = train(&l.model, &mut pol, &l.scenario, &cfg, report)?;
            (Checkpoint::monotone(&pol, &l.spec, &cfg), curve)
        }
    };
    provenance.push(format!("policy={}", serde_json::to_string(&ckpt.kind)?));
    io::save_checkpoint(&a.out, &ckpt)?;
    if let Some(p) = &a.curve {
        io::write_curve(p, &curve, &provenance)?;
    }
    Ok(true)
}

fn verify_cmd(a: &VerifyArgs) -> Result<bool> {
    let (traj, mut header) = io::read_trajectory(&a.traj)?;
    if let Some(p) = &a.spec {
        let spec = io::load_spec(p, traj.n())?;
        header.verify.omega_lo = spec.omega_lo;
        header.verify.omega_hi = spec.omega_hi;
    }
    if let Some(t) = a.tol_omega {
        header.verify.tol_omega = t;
    }
    if let Some(t) = a.tol_lambda {
        header.verify.tol_lambda = t;
    }
    let report = verify(&traj, &header.verify);
    emit_json(a.out.as_deref(), &report)?;
    Ok(report.pass)
}

fn compare_cmd(a: &CompareArgs) -> Result<bool> {
    if a.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let l = a.setup.load()?;
    let controllers = a
        .controllers
        .iter()
        .map(|c| LoadedController::resolve(c, &l.model, &l.spec))
        .collect::<freqsafe::Result<Vec<_>>>()?;
    let cfg = SummaryConfig {
        gamma: a.gamma,
        short_horizon: a.short_horizon,
        ..SummaryConfig::default()
    };
    let seeds: Vec<u64> = (a.seed..a.seed + a.runs).collect();
    let rows = io::compare(&l.model, &l.spec, &controllers, &l.scenario, &seeds, &cfg)?;
    let mut setup = a.setup.echo(&l);
    setup["command"] = json!("compare");
    setup["controllers"] = json!(a.controllers);
    setup["seeds"] = json!(seeds);
    setup["summary"] = json!(cfg);
    let provenance = vec!["freqsafe comparison".to_string(), format!("config={setup}")];
    io::write_text(&a.out, &io::comparison_to_string(&rows, l.model.eq.omega_inf, &provenance))?;
    if let Some(p) = &a.report {
        io::write_json(p, &rows)?;
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Train(a) => train_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Compare(a) => compare_cmd(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.ends_with(&cause) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&cause);
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
