//! Discrete-time loss, backpropagation through Euler rollouts, Adam, and the
//! batch training loop.
//!
//! Gradients are computed by a reverse sweep over time. The forward pass is a
//! plain rollout; the backward pass re-records one Euler step at a time on a
//! reused tape whose leaves are that step's state and the effective policy
//! parameters, seeds it with the carried state adjoints plus the direct loss
//! terms, and carries the state adjoints one step back. Effective-parameter
//! gradients are then mapped to raw parameters through a separate tape of the
//! reparameterization.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::Trainable;
use crate::dynamics::{
    euler_update, injection_at, rollout_from, rollout_setup, Model, NoiseSource, RolloutOptions, Scenario, Trajectory,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tape::{RecordingParams, Tape, Var};

/// Hyperparameters of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub rho: f64,
    pub lr: f64,
    pub episodes: usize,
    pub batch: usize,
    /// Steps per training rollout.
    pub k: usize,
    pub dt: f64,
    pub m_hidden: usize,
    pub seed: u64,
    /// `D̃ = dtilde_frac · D` per bus.
    pub dtilde_frac: f64,
    /// Raw parameters start uniform in `±init_scale`.
    pub init_scale: f64,
    /// Clamp the control onto its constraint bound after the gated law.
    pub projection: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 40.0,
            rho: 0.0,
            lr: 0.05,
            episodes: 150,
            batch: 50,
            k: 2000,
            dt: 5e-3,
            m_hidden: 20,
            seed: 0,
            dtilde_frac: 0.5,
            init_scale: 0.1,
            projection: false,
        }
    }
}

impl TrainConfig {
    /// Step size and horizon of the original setup: 12500 steps of 0.8 ms.
    pub fn full_scale() -> Self {
        Self {
            k: 12_500,
            dt: 8e-4,
            ..Self::default()
        }
    }

    pub fn horizon(&self) -> f64 {
        self.k as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if !(self.rho >= 0.0) {
            return bad("rho must be non-negative");
        }
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if self.batch == 0 {
            return bad("batch must be positive");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.m_hidden == 0 {
            return bad("m_hidden must be positive");
        }
        if !(self.dtilde_frac > 0.0 && self.dtilde_frac < 1.0) {
            return bad("dtilde_frac must lie in (0, 1)");
        }
        if !(self.init_scale >= 0.0) {
            return bad("init_scale must be non-negative");
        }
        Ok(())
    }
}

/// Loss decomposition; `total = freq + ctrl + lip`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms<T> {
    pub total: T,
    pub freq: T,
    /// `(1/K) Σ ‖u(k)‖²`.
    pub ctrl: T,
    /// `ρ/(K−1) Σ ‖u(k) − u(k−1)‖²`.
    pub lip: T,
}

/// `(1/(K−1)) Σ_{k=1}^{K−1} ‖u(k) − u(k−1)‖²` over the applied controls; 0 when `K < 2`.
pub fn control_variation<T: Scalar>(traj: &Trajectory<T>) -> T {
    let k = traj.steps();
    if k < 2 {
        return T::zero();
    }
    let s: T = (1..k)
        .map(|j| {
            traj.u[j]
                .iter()
                .zip(&traj.u[j - 1])
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
        })
        .sum();
    s / T::of((k - 1) as f64)
}

/// Loss of one trajectory over its `K` applied steps.
pub fn trajectory_loss<T: Scalar>(traj: &Trajectory<T>, omega_inf: T, gamma: T, rho: T) -> LossTerms<T> {
    let k = traj.steps();
    if k == 0 {
        return LossTerms {
            total: T::zero(),
            freq: T::zero(),
            ctrl: T::zero(),
            lip: T::zero(),
        };
    }
    let kf = T::of(k as f64);
    let freq = (0..k)
        .map(|j| gamma * traj.omega[j].iter().map(|&w| (w - omega_inf) * (w - omega_inf)).sum::<T>())
        .sum::<T>()
        / kf;
    let ctrl = (0..k).map(|j| traj.u[j].iter().map(|&x| x * x).sum::<T>()).sum::<T>() / kf;
    let lip = rho * control_variation(traj);
    LossTerms {
        total: freq + ctrl + lip,
        freq,
        ctrl,
        lip,
    }
}

/// Batch mean of [`trajectory_loss`].
pub fn loss<T: Scalar>(batch: &[Trajectory<T>], omega_inf: T, gamma: T, rho: T) -> LossTerms<T> {
    let mut acc = LossTerms {
        total: T::zero(),
        freq: T::zero(),
        ctrl: T::zero(),
        lip: T::zero(),
    };
    if batch.is_empty() {
        return acc;
    }
    for t in batch {
        let l = trajectory_loss(t, omega_inf, gamma, rho);
        acc.total += l.total;
        acc.freq += l.freq;
        acc.ctrl += l.ctrl;
        acc.lip += l.lip;
    }
    let b = T::of(batch.len() as f64);
    LossTerms {
        total: acc.total / b,
        freq: acc.freq / b,
        ctrl: acc.ctrl / b,
        lip: acc.lip / b,
    }
}

/// Loss and gradient with respect to the effective parameters for a single
/// rollout with the given seed.
fn trajectory_grad<T, P>(
    model: &Model<T>,
    policy: &P,
    scenario: &Scenario<T>,
    seed: u64,
    gamma: T,
    rho: T,
) -> Result<(LossTerms<T>, Vec<T>)>
where
    T: Scalar,
    P: Trainable<T>,
{
    let opts = RolloutOptions {
        gamma,
        ..RolloutOptions::default()
    };
    let (init, noise_seed) = rollout_setup(model, scenario, seed)?;
    let traj = rollout_from(model, policy, scenario, init, noise_seed, &opts)?;
    let terms = trajectory_loss(&traj, model.eq.omega_inf, gamma, rho);

    let eff = policy.effective();
    let mut grad = vec![T::zero(); eff.len()];
    let k_steps = traj.steps();
    if k_steps == 0 {
        return Ok((terms, grad));
    }
    let n = model.n();
    let m = model.m();
    let mut noise_src = NoiseSource::new(noise_seed, scenario.noise.to_f64_lossy());
    let noise: Vec<Vec<T>> = (0..k_steps).map(|_| noise_src.sample(n)).collect();

    let kf = T::of(k_steps as f64);
    let two = T::of(2.0);
    let lip_w = if k_steps >= 2 {
        rho / T::of((k_steps - 1) as f64)
    } else {
        T::zero()
    };
    let mut a_lambda = vec![T::zero(); m];
    let mut a_omega = vec![T::zero(); n];
    let mut tape = Tape::with_capacity(4096);
    for k in (0..k_steps).rev() {
        let t = scenario.dt * T::of(k as f64);
        let p = injection_at(scenario, &model.net, t);
        {
            let lam: Vec<Var<'_, T>> = traj.lambda[k].iter().map(|&v| tape.leaf(v)).collect();
            let om: Vec<Var<'_, T>> = traj.omega[k].iter().map(|&v| tape.leaf(v)).collect();
            let measured: Vec<Var<'_, T>> = om
                .iter()
                .zip(&noise[k])
                .map(|(&w, &e)| w + Var::constant(e))
                .collect();
            let rec = RecordingParams::new(&tape, eff);
            let out = policy.act(model, &rec, &measured, &lam, &p);
            let (lam_next, om_next) = euler_update(&model.net, &model.inc, &lam, &om, &out.u, &p, scenario.dt);

            let mut local: Vec<(Var<'_, T>, T)> = Vec::with_capacity(m + 2 * n);
            for (v, &a) in lam_next.iter().zip(&a_lambda) {
                local.push((*v, a));
            }
            for (v, &a) in om_next.iter().zip(&a_omega) {
                local.push((*v, a));
            }
            let u = &traj.u;
            for i in 0..n {
                let mut s = two * u[k][i] / kf;
                if k >= 1 {
                    s += lip_w * two * (u[k][i] - u[k - 1][i]);
                }
                if k + 1 < k_steps {
                    s -= lip_w * two * (u[k + 1][i] - u[k][i]);
                }
                local.push((out.u[i], s));
            }
            let adj = tape.backward(&local)?;
            for (j, v) in lam.iter().enumerate() {
                a_lambda[j] = adj.of(v);
            }
            for (i, v) in om.iter().enumerate() {
                a_omega[i] = adj.of(v) + two * gamma * (traj.omega[k][i] - model.eq.omega_inf) / kf;
            }
            rec.scatter(&adj, &mut grad);
        }
        tape.clear();
    }
    Ok((terms, grad))
}

/// Maps an effective-parameter gradient to the raw parameters.
pub fn pullback_raw<T: Scalar, P: Trainable<T>>(policy: &P, grad_eff: &[T]) -> Result<Vec<T>> {
    let tape = Tape::with_capacity(4 * grad_eff.len());
    let raw: Vec<Var<'_, T>> = policy.raw().iter().map(|&v| tape.leaf(v)).collect();
    let eff = policy.reparameterize(&raw);
    let seeds: Vec<(Var<'_, T>, T)> = eff.iter().zip(grad_eff).map(|(&v, &g)| (v, g)).collect();
    let adj = tape.backward(&seeds)?;
    Ok(raw.iter().map(|v| adj.of(v)).collect())
}

/// Batch-mean loss and its gradient with respect to the raw parameters.
///
/// Rollouts run in parallel; per-trajectory gradients are summed in batch
/// order, so the result does not depend on the worker count.
pub fn grad<T: Scalar, P: Trainable<T>>(
    model: &Model<T>,
    policy: &P,
    scenario: &Scenario<T>,
    seeds: &[u64],
    gamma: T,
    rho: T,
) -> Result<(LossTerms<T>, Vec<T>)> {
    let results: Vec<Result<(LossTerms<T>, Vec<T>)>> = seeds
        .par_iter()
        .map(|&s| trajectory_grad(model, policy, scenario, s, gamma, rho))
        .collect();
    let mut sum = vec![T::zero(); policy.effective().len()];
    let mut terms = LossTerms {
        total: T::zero(),
        freq: T::zero(),
        ctrl: T::zero(),
        lip: T::zero(),
    };
    for r in results {
        let (l, g) = r?;
        terms.total += l.total;
        terms.freq += l.freq;
        terms.ctrl += l.ctrl;
        terms.lip += l.lip;
        for (a, b) in sum.iter_mut().zip(&g) {
            *a += *b;
        }
    }
    if seeds.is_empty() {
        return Ok((terms, vec![T::zero(); policy.raw().len()]));
    }
    let b = T::of(seeds.len() as f64);
    for a in &mut sum {
        *a /= b;
    }
    let terms = LossTerms {
        total: terms.total / b,
        freq: terms.freq / b,
        ctrl: terms.ctrl / b,
        lip: terms.lip / b,
    };
    Ok((terms, pullback_raw(policy, &sum)?))
}

/// Batch-mean loss without gradients.
pub fn evaluate<T: Scalar, P: Trainable<T>>(
    model: &Model<T>,
    policy: &P,
    scenario: &Scenario<T>,
    seeds: &[u64],
    gamma: T,
    rho: T,
) -> Result<LossTerms<T>> {
    let opts = RolloutOptions {
        gamma,
        ..RolloutOptions::default()
    };
    let trajs: Vec<Trajectory<T>> = seeds
        .par_iter()
        .map(|&s| crate::dynamics::rollout(model, policy, scenario, s, &opts))
        .collect::<Result<_>>()?;
    Ok(loss(&trajs, model.eq.omega_inf, gamma, rho))
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub t: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(len: usize, lr: T) -> Self {
        Self {
            lr,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            t: 0,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        assert_eq!(params.len(), grad.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t as i32);
        let c2 = one - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// One row of the learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub loss: f64,
    pub loss_freq: f64,
    pub loss_ctrl: f64,
    pub loss_lip: f64,
}

/// Per-episode batch seeds and the initialization seed, all drawn from one
/// generator in a fixed order.
pub struct SeedPlan {
    rng: ChaCha8Rng,
}

impl SeedPlan {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_seed(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn batch(&mut self, size: usize) -> Vec<u64> {
        (0..size).map(|_| self.rng.next_u64()).collect()
    }
}

/// Runs `cfg.episodes` Adam updates on batches of fresh rollouts of
/// `scenario` with horizon `cfg.k · cfg.dt`, starting from the policy's
/// current raw parameters. Structural constraints are re-checked after every
/// update. `on_episode` sees each curve row as it is produced.
pub fn train<T, P, F>(
    model: &Model<T>,
    policy: &mut P,
    scenario: &Scenario<T>,
    cfg: &TrainConfig,
    mut on_episode: F,
) -> Result<Vec<CurvePoint>>
where
    T: Scalar,
    P: Trainable<T>,
    F: FnMut(&CurvePoint),
{
    cfg.validate()?;
    let mut sc = scenario.with_horizon(T::of(cfg.horizon()));
    sc.dt = T::of(cfg.dt);
    sc.validate(model.n())?;
    policy.check_structure()?;

    let mut plan = SeedPlan::new(cfg.seed);
    let mut adam = Adam::new(policy.raw().len(), T::of(cfg.lr));
    let (gamma, rho) = (T::of(cfg.gamma), T::of(cfg.rho));
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut initial: Option<f64> = None;
    for episode in 0..cfg.episodes {
        let seeds = plan.batch(cfg.batch);
        let (terms, g) = grad(model, policy, &sc, &seeds, gamma, rho)?;
        let point = CurvePoint {
            episode,
            loss: terms.total.to_f64_lossy(),
            loss_freq: terms.freq.to_f64_lossy(),
            loss_ctrl: terms.ctrl.to_f64_lossy(),
            loss_lip: terms.lip.to_f64_lossy(),
        };
        let init = *initial.get_or_insert(point.loss);
        if !point.loss.is_finite() || (init > 0.0 && point.loss > 1e3 * init) {
            return Err(Error::Diverged {
                episode,
                loss: point.loss,
                initial: init,
            });
        }
        log::info!("episode {episode}: loss {:.6e}", point.loss);
        on_episode(&point);
        curve.push(point);
        let mut raw = policy.raw().to_vec();
        adam.step(&mut raw, &g);
        policy.set_raw(raw);
        policy.check_structure()?;
    }
    Ok(curve)
}
