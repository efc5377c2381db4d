//! Compact swing dynamics, forward-Euler discretization and closed-loop
//! rollouts.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::ControlLaw;
use crate::equilibrium::{energy, in_region, solve_equilibrium, Equilibrium};
use crate::error::{Error, Result};
use crate::netgraph::{build_incidence, Incidence, PowerNetwork};
use crate::scalar::{Real, Scalar};

/// Energy level used for the region-of-attraction warning in [`rollout`].
pub const REGION_BETA: f64 = 1.05;

/// State of the compact dynamics: angle differences and frequency deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState<T> {
    pub lambda: Vec<T>,
    pub omega: Vec<T>,
}

impl<T: Scalar> SystemState<T> {
    pub fn new(lambda: Vec<T>, omega: Vec<T>) -> Self {
        Self { lambda, omega }
    }

    /// Admissible state built from bus angles: `λ = Bᵀθ`.
    pub fn from_angles(inc: &Incidence<T>, theta: &[T], omega: Vec<T>) -> Self {
        Self {
            lambda: inc.bt_apply(theta),
            omega,
        }
    }

    pub fn equilibrium(eq: &Equilibrium<T>, n: usize) -> Self {
        Self {
            lambda: eq.lambda_inf.clone(),
            omega: vec![eq.omega_inf; n],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lambda.iter().chain(&self.omega).all(|v| v.is_finite())
    }
}

/// Network together with its incidence structure and nominal equilibrium.
#[derive(Debug, Clone)]
pub struct Model<T> {
    pub net: PowerNetwork<T>,
    pub inc: Incidence<T>,
    pub eq: Equilibrium<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new(net: PowerNetwork<T>) -> Result<Self> {
        let inc = build_incidence(&net)?;
        let eq = solve_equilibrium(&net, &inc)?;
        Ok(Self { net, inc, eq })
    }

    pub fn n(&self) -> usize {
        self.net.n()
    }

    pub fn m(&self) -> usize {
        self.net.m()
    }

    pub fn energy(&self, state: &SystemState<T>) -> T {
        energy(&self.eq, &self.inc, &self.net, state)
    }
}

/// Step change of injection at one bus on the half-open window `(t_start, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance<T> {
    /// 0-based bus index.
    pub bus: usize,
    pub dp: T,
    pub t_start: T,
    pub t_end: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub horizon: T,
    pub dt: T,
    pub disturbances: Vec<Disturbance<T>>,
    /// Initial frequency deviations are uniform in `±init_omega_range`.
    pub init_omega_range: T,
    /// Initial angles come from injections uniform in `p_nom·(1 ± init_p_frac)`.
    pub init_p_frac: T,
    /// Measurement noise bound on the frequency seen by the controller (0 disables).
    pub noise: T,
}

impl<T: Scalar> Scenario<T> {
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if !(self.dt > T::zero()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon >= T::zero()) {
            return bad(format!("T must be non-negative, got {}", self.horizon));
        }
        if !(self.noise >= T::zero()) {
            return bad(format!("noise bound must be non-negative, got {}", self.noise));
        }
        if !(self.init_omega_range >= T::zero()) || !(self.init_p_frac >= T::zero()) {
            return bad("init ranges must be non-negative".into());
        }
        for (k, d) in self.disturbances.iter().enumerate() {
            if d.bus >= n {
                return bad(format!("disturbance {}: bus {} out of range 1..={n}", k + 1, d.bus + 1));
            }
            if !(d.t_start < d.t_end) || d.t_end > self.horizon {
                return bad(format!(
                    "disturbance {}: need t0 < t1 <= T, got ({}, {}] with T = {}",
                    k + 1,
                    d.t_start,
                    d.t_end,
                    self.horizon
                ));
            }
        }
        Ok(())
    }

    /// Number of Euler steps `round(T / dt)`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round().to_usize().unwrap_or(0)
    }

    /// The scenario with a different horizon; disturbance windows are clipped to it.
    pub fn with_horizon(&self, horizon: T) -> Self {
        let mut s = self.clone();
        s.horizon = horizon;
        s.disturbances.retain(|d| d.t_start < horizon);
        for d in &mut s.disturbances {
            d.t_end = d.t_end.min(horizon);
        }
        s
    }
}

/// Injection vector at time `t`: nominal plus every active disturbance.
pub fn injection_at<T: Scalar>(scenario: &Scenario<T>, net: &PowerNetwork<T>, t: T) -> Vec<T> {
    let mut p = net.p_nom().to_vec();
    for d in &scenario.disturbances {
        if t > d.t_start && t <= d.t_end {
            p[d.bus] += d.dp;
        }
    }
    p
}

/// Right-hand side of the compact dynamics.
pub fn rhs<T: Scalar>(
    net: &PowerNetwork<T>,
    inc: &Incidence<T>,
    state: &SystemState<T>,
    u: &[T],
    p: &[T],
) -> (Vec<T>, Vec<T>) {
    let dlambda = inc.bt_apply(&state.omega);
    let flows = inc.flows(&state.lambda);
    let domega = (0..net.n())
        .map(|i| (-net.damping()[i] * state.omega[i] - flows[i] + u[i] + p[i]) / net.inertia()[i])
        .collect();
    (dlambda, domega)
}

/// One forward-Euler step on any [`Real`]; the angle update uses the old
/// frequencies and the frequency update uses the old angles.
pub fn euler_update<T: Scalar, R: Real<Base = T>>(
    net: &PowerNetwork<T>,
    inc: &Incidence<T>,
    lambda: &[R],
    omega: &[R],
    u: &[R],
    p: &[T],
    dt: T,
) -> (Vec<R>, Vec<R>) {
    let dtr = R::cst(dt);
    let dl = inc.bt_apply(omega);
    let lambda_next = lambda.iter().zip(&dl).map(|(&l, &d)| l + dtr * d).collect();
    let flows = inc.flows(lambda);
    let omega_next = (0..net.n())
        .map(|i| {
            let acc = -R::cst(net.damping()[i]) * omega[i] - flows[i] + u[i] + R::cst(p[i]);
            omega[i] + R::cst(dt / net.inertia()[i]) * acc
        })
        .collect();
    (lambda_next, omega_next)
}

pub fn euler_step<T: Scalar>(
    net: &PowerNetwork<T>,
    inc: &Incidence<T>,
    state: &SystemState<T>,
    u: &[T],
    p: &[T],
    dt: T,
) -> Result<SystemState<T>> {
    assert!(dt > T::zero(), "dt must be positive");
    let (lambda, omega) = euler_update(net, inc, &state.lambda, &state.omega, u, p, dt);
    let next = SystemState { lambda, omega };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::Integration { step: 0 })
    }
}

/// Classical RK4 with `u` and `p` held over the step. Verification only.
pub fn rk4_step<T: Scalar>(
    net: &PowerNetwork<T>,
    inc: &Incidence<T>,
    state: &SystemState<T>,
    u: &[T],
    p: &[T],
    dt: T,
) -> Result<SystemState<T>> {
    let half = T::of(0.5);
    let shifted = |s: &SystemState<T>, k: &(Vec<T>, Vec<T>), h: T| SystemState {
        lambda: s.lambda.iter().zip(&k.0).map(|(&a, &b)| a + h * b).collect(),
        omega: s.omega.iter().zip(&k.1).map(|(&a, &b)| a + h * b).collect(),
    };
    let k1 = rhs(net, inc, state, u, p);
    let k2 = rhs(net, inc, &shifted(state, &k1, half * dt), u, p);
    let k3 = rhs(net, inc, &shifted(state, &k2, half * dt), u, p);
    let k4 = rhs(net, inc, &shifted(state, &k3, dt), u, p);
    let sixth = dt / T::of(6.0);
    let two = T::of(2.0);
    let comb = |a: &[T], b: &[T], c: &[T], d: &[T], x: &[T]| -> Vec<T> {
        (0..x.len())
            .map(|i| x[i] + sixth * (a[i] + two * b[i] + two * c[i] + d[i]))
            .collect()
    };
    let next = SystemState {
        lambda: comb(&k1.0, &k2.0, &k3.0, &k4.0, &state.lambda),
        omega: comb(&k1.1, &k2.1, &k3.1, &k4.1, &state.omega),
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::Integration { step: 0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy)]
pub struct RolloutOptions<T> {
    /// Weight of the frequency term in the recorded running loss.
    pub gamma: T,
    pub integrator: Integrator,
}

impl<T: Scalar> Default for RolloutOptions<T> {
    fn default() -> Self {
        Self {
            gamma: T::of(40.0),
            integrator: Integrator::Euler,
        }
    }
}

/// Time-indexed record of a closed-loop run. Row `k` holds the state at
/// `t = k·dt` and the control applied from it; the final row is the terminal
/// state (its control is evaluated but never applied).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub dt: T,
    pub time: Vec<T>,
    pub lambda: Vec<Vec<T>>,
    pub omega: Vec<Vec<T>>,
    pub u: Vec<Vec<T>>,
    pub budgets: Vec<Vec<T>>,
    pub energy: Vec<T>,
    /// `γ‖ω − ω∞𝟏‖²` per row.
    pub loss_freq: Vec<T>,
    /// `‖u‖²` per row.
    pub loss_ctrl: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    fn with_capacity(dt: T, rows: usize) -> Self {
        Self {
            dt,
            time: Vec::with_capacity(rows),
            lambda: Vec::with_capacity(rows),
            omega: Vec::with_capacity(rows),
            u: Vec::with_capacity(rows),
            budgets: Vec::with_capacity(rows),
            energy: Vec::with_capacity(rows),
            loss_freq: Vec::with_capacity(rows),
            loss_ctrl: Vec::with_capacity(rows),
        }
    }

    /// Number of rows (`K + 1`).
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Number of integration steps `K`.
    pub fn steps(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn n(&self) -> usize {
        self.omega.first().map_or(0, Vec::len)
    }

    pub fn m(&self) -> usize {
        self.lambda.first().map_or(0, Vec::len)
    }

    pub fn final_state(&self) -> Option<SystemState<T>> {
        Some(SystemState {
            lambda: self.lambda.last()?.clone(),
            omega: self.omega.last()?.clone(),
        })
    }
}

/// Draws an initial state: uniform frequency deviations and angles from the
/// equilibrium of uniformly perturbed injections.
pub fn sample_initial_state<T: Scalar, G: Rng + ?Sized>(
    model: &Model<T>,
    scenario: &Scenario<T>,
    rng: &mut G,
) -> Result<SystemState<T>> {
    let n = model.n();
    let r = scenario.init_omega_range.to_f64_lossy();
    let omega: Vec<T> = (0..n)
        .map(|_| T::of(if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 }))
        .collect();
    let f = scenario.init_p_frac.to_f64_lossy();
    let p: Vec<T> = model
        .net
        .p_nom()
        .iter()
        .map(|&pi| pi * T::of(if f > 0.0 { rng.gen_range(1.0 - f..=1.0 + f) } else { 1.0 }))
        .collect();
    let lambda = if f > 0.0 {
        let perturbed = model.net.with_injections(p)?;
        solve_equilibrium(&perturbed, &model.inc)?.lambda_inf
    } else {
        model.eq.lambda_inf.clone()
    };
    Ok(SystemState { lambda, omega })
}

/// Per-step measurement noise generator.
pub struct NoiseSource {
    rng: ChaCha8Rng,
    bound: f64,
}

impl NoiseSource {
    pub fn new(seed: u64, bound: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            bound,
        }
    }

    pub fn sample<T: Scalar>(&mut self, n: usize) -> Vec<T> {
        if self.bound > 0.0 {
            (0..n)
                .map(|_| T::of(self.rng.gen_range(-self.bound..=self.bound)))
                .collect()
        } else {
            vec![T::zero(); n]
        }
    }
}

/// Initial state and noise seed for a rollout with the given seed.
pub fn rollout_setup<T: Scalar>(model: &Model<T>, scenario: &Scenario<T>, seed: u64) -> Result<(SystemState<T>, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = sample_initial_state(model, scenario, &mut rng)?;
    Ok((init, rng.next_u64()))
}

/// Closed-loop simulation from an initial state drawn with `seed`.
pub fn rollout<T: Scalar + Real<Base = T>, C: ControlLaw<T>>(
    model: &Model<T>,
    controller: &C,
    scenario: &Scenario<T>,
    seed: u64,
    opts: &RolloutOptions<T>,
) -> Result<Trajectory<T>> {
    let (init, noise_seed) = rollout_setup(model, scenario, seed)?;
    rollout_from(model, controller, scenario, init, noise_seed, opts)
}

/// Closed-loop simulation from a given initial state.
pub fn rollout_from<T: Scalar + Real<Base = T>, C: ControlLaw<T>>(
    model: &Model<T>,
    controller: &C,
    scenario: &Scenario<T>,
    init: SystemState<T>,
    noise_seed: u64,
    opts: &RolloutOptions<T>,
) -> Result<Trajectory<T>> {
    let n = model.n();
    if init.omega.len() != n || init.lambda.len() != model.m() {
        return Err(Error::Dimension(format!(
            "initial state has ({}, {}) entries, network has (m={}, n={n})",
            init.lambda.len(),
            init.omega.len(),
            model.m()
        )));
    }
    scenario.validate(n)?;
    if !in_region(&model.eq, &model.inc, &model.net, &init, T::of(REGION_BETA)) {
        log::warn!(
            "initial state lies outside the energy sublevel set (V = {}, c = {})",
            model.energy(&init),
            model.eq.c
        );
    }
    let steps = scenario.steps();
    let params = controller.effective();
    let mut noise = NoiseSource::new(noise_seed, scenario.noise.to_f64_lossy());
    let mut traj = Trajectory::with_capacity(scenario.dt, steps + 1);
    let mut state = init;
    for k in 0..=steps {
        let t = scenario.dt * T::of(k as f64);
        let p = injection_at(scenario, &model.net, t);
        let eta: Vec<T> = noise.sample(n);
        let measured: Vec<T> = state.omega.iter().zip(&eta).map(|(&w, &e)| w + e).collect();
        let out = controller.act(model, params, &measured, &state.lambda, &p);
        traj.time.push(t);
        traj.energy.push(model.energy(&state));
        traj.loss_freq.push(
            opts.gamma
                * state
                    .omega
                    .iter()
                    .map(|&w| (w - model.eq.omega_inf) * (w - model.eq.omega_inf))
                    .sum::<T>(),
        );
        traj.loss_ctrl.push(out.u.iter().map(|&x| x * x).sum());
        if k < steps {
            let next = match opts.integrator {
                Integrator::Euler => euler_step(&model.net, &model.inc, &state, &out.u, &p, scenario.dt),
                Integrator::Rk4 => rk4_step(&model.net, &model.inc, &state, &out.u, &p, scenario.dt),
            }
            .map_err(|_| Error::Integration { step: k })?;
            traj.lambda.push(std::mem::replace(&mut state.lambda, next.lambda));
            traj.omega.push(std::mem::replace(&mut state.omega, next.omega));
        } else {
            traj.lambda.push(state.lambda.clone());
            traj.omega.push(state.omega.clone());
        }
        traj.u.push(out.u);
        traj.budgets.push(out.budgets);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ZeroControl;
    use crate::netgraph::Line;

    fn two_bus(p: [f64; 2]) -> Model<f64> {
        Model::new(
            PowerNetwork::new(vec![Line { from: 0, to: 1, b: 1.0 }], vec![1.0; 2], vec![1.0; 2], p.to_vec())
                .unwrap(),
        )
        .unwrap()
    }

    fn quiet(horizon: f64, dt: f64) -> Scenario<f64> {
        Scenario {
            horizon,
            dt,
            disturbances: vec![],
            init_omega_range: 0.0,
            init_p_frac: 0.0,
            noise: 0.0,
        }
    }

    #[test]
    fn rhs_two_bus_example() {
        let model = two_bus([0.0, 0.0]);
        let s = SystemState::new(vec![0.0], vec![0.1, -0.1]);
        let (dl, dw) = rhs(&model.net, &model.inc, &s, &[0.0; 2], &[0.0; 2]);
        assert!((dl[0] - 0.2).abs() < 1e-15);
        assert!((dw[0] + 0.1).abs() < 1e-15 && (dw[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rhs_vanishes_at_equilibrium_and_is_linear_in_u() {
        let model = two_bus([0.5, -0.5]);
        let s = SystemState::equilibrium(&model.eq, 2);
        let (dl, dw) = rhs(&model.net, &model.inc, &s, &[0.0; 2], model.net.p_nom());
        assert!(dl.iter().chain(&dw).all(|v| v.abs() < 1e-12));
        let u1 = [0.3, -0.2];
        let u2 = [0.7, 0.4];
        let sum = [1.0, 0.2];
        let (_, a) = rhs(&model.net, &model.inc, &s, &sum, model.net.p_nom());
        let (_, b) = rhs(&model.net, &model.inc, &s, &u1, model.net.p_nom());
        for i in 0..2 {
            assert!((a[i] - b[i] - u2[i] / model.net.inertia()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn euler_two_bus_example() {
        let model = two_bus([0.0, 0.0]);
        let s = SystemState::new(vec![0.0], vec![0.1, -0.1]);
        let next = euler_step(&model.net, &model.inc, &s, &[0.0; 2], &[0.0; 2], 0.01).unwrap();
        assert!((next.lambda[0] - 0.002).abs() < 1e-15);
        assert!((next.omega[0] - 0.099).abs() < 1e-15);
        assert!((next.omega[1] + 0.099).abs() < 1e-15);
    }

    #[test]
    fn euler_keeps_equilibrium_fixed() {
        let model = two_bus([0.5, -0.5]);
        let s = SystemState::equilibrium(&model.eq, 2);
        let next = euler_step(&model.net, &model.inc, &s, &[0.0; 2], model.net.p_nom(), 0.3).unwrap();
        for (a, b) in next.lambda.iter().zip(&s.lambda) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(next.omega.iter().all(|w| w.abs() < 1e-15));
    }

    #[test]
    fn euler_local_error_is_second_order() {
        // Richardson: the gap between one step of h and two of h/2 shrinks ~4x per halving.
        let model = two_bus([0.5, -0.5]);
        let s = SystemState::new(vec![0.3], vec![0.2, -0.1]);
        let gap = |h: f64| {
            let one = euler_step(&model.net, &model.inc, &s, &[0.0; 2], model.net.p_nom(), h).unwrap();
            let half = euler_step(&model.net, &model.inc, &s, &[0.0; 2], model.net.p_nom(), h / 2.0).unwrap();
            let two = euler_step(&model.net, &model.inc, &half, &[0.0; 2], model.net.p_nom(), h / 2.0).unwrap();
            one.lambda
                .iter()
                .zip(&two.lambda)
                .chain(one.omega.iter().zip(&two.omega))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let ratio = gap(1e-2) / gap(5e-3);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn rk4_agrees_with_fine_euler() {
        let model = two_bus([0.5, -0.5]);
        let s0 = SystemState::new(vec![0.3], vec![0.2, -0.1]);
        let mut e = s0.clone();
        for _ in 0..10_000 {
            e = euler_step(&model.net, &model.inc, &e, &[0.0; 2], model.net.p_nom(), 1e-5).unwrap();
        }
        let r = rk4_step(&model.net, &model.inc, &s0, &[0.0; 2], model.net.p_nom(), 0.1).unwrap();
        assert!((e.omega[0] - r.omega[0]).abs() < 1e-4);
        assert!((e.lambda[0] - r.lambda[0]).abs() < 1e-4);
    }

    #[test]
    fn injection_windows() {
        let model = two_bus([0.5, -0.5]);
        let mut sc = quiet(5.0, 0.01);
        assert_eq!(injection_at(&sc, &model.net, 1.0), vec![0.5, -0.5]);
        sc.disturbances.push(Disturbance {
            bus: 0,
            dp: -0.5,
            t_start: 0.0,
            t_end: 2.0,
        });
        assert_eq!(injection_at(&sc, &model.net, 0.0), vec![0.5, -0.5]);
        assert_eq!(injection_at(&sc, &model.net, 1.0), vec![0.0, -0.5]);
        assert_eq!(injection_at(&sc, &model.net, 2.0), vec![0.0, -0.5]);
        assert_eq!(injection_at(&sc, &model.net, 3.0), vec![0.5, -0.5]);

        let short = sc.with_horizon(1.0);
        assert_eq!(short.disturbances[0].t_end, 1.0);
        short.validate(2).unwrap();
        assert!(sc.with_horizon(0.0).disturbances.is_empty());
    }

    #[test]
    fn scenario_validation() {
        let mut sc = quiet(5.0, 0.01);
        sc.disturbances.push(Disturbance {
            bus: 7,
            dp: -0.5,
            t_start: 0.0,
            t_end: 2.0,
        });
        assert!(sc.validate(2).is_err());
        sc.disturbances[0].bus = 0;
        sc.disturbances[0].t_end = 6.0;
        assert!(sc.validate(2).is_err());
        let mut sc = quiet(5.0, 0.0);
        assert!(sc.validate(2).is_err());
        sc.dt = 0.1;
        sc.noise = -1.0;
        assert!(sc.validate(2).is_err());
    }

    #[test]
    fn zero_control_at_equilibrium_is_constant() {
        let model = two_bus([0.5, -0.5]);
        let traj = rollout(&model, &ZeroControl, &quiet(1.0, 0.01), 3, &RolloutOptions::default()).unwrap();
        assert_eq!(traj.len(), 101);
        for row in &traj.lambda {
            assert!((row[0] - model.eq.lambda_inf[0]).abs() < 1e-15);
        }
        assert!(traj.energy.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn zero_control_dissipates_energy() {
        let model = two_bus([0.5, -0.5]);
        let mut sc = quiet(5.0, 1e-3);
        sc.init_omega_range = 0.3;
        sc.init_p_frac = 0.1;
        for seed in 0..20 {
            let traj = rollout(&model, &ZeroControl, &sc, seed, &RolloutOptions::default()).unwrap();
            for w in traj.energy.windows(2) {
                assert!(w[1] <= w[0] + 1e-6, "seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let model = two_bus([0.5, -0.5]);
        let mut sc = quiet(1.0, 1e-2);
        sc.init_omega_range = 0.1;
        sc.init_p_frac = 0.1;
        sc.noise = 0.05;
        let a = rollout(&model, &ZeroControl, &sc, 11, &RolloutOptions::default()).unwrap();
        let b = rollout(&model, &ZeroControl, &sc, 11, &RolloutOptions::default()).unwrap();
        assert_eq!(a, b);
        let c = rollout(&model, &ZeroControl, &sc, 12, &RolloutOptions::default()).unwrap();
        assert_ne!(a, c);
    }
}
