//! The distributed neural policy with built-in stability and safety structure.
//!
//! Per-bus parameter block (stride `12h + 3`, same layout for raw and
//! effective vectors):
//!
//! | offset      | raw                   | effective                 |
//! |-------------|-----------------------|---------------------------|
//! | `0..4h`     | upper class-K block   | reparameterized block     |
//! | `4h..8h`    | lower class-K block   | reparameterized block     |
//! | `8h..9h`    | `q⁺`                  | `q⁺`                      |
//! | `9h..10h`   | `q⁻`                  | `q⁻`                      |
//! | `10h..11h`  | `r⁺` raw              | `−raw²`                   |
//! | `11h..12h`  | `r⁻` raw              | `−raw²`                   |
//! | `12h`       | `v` of lower threshold| `ω̲ᵗʰ`                     |
//! | `12h + 1`   | `v` of upper threshold| `ω̄ᵗʰ`                     |
//! | `12h + 2`   | `ξ` raw               | `ξ_max · tanh(raw)`       |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::classk::{classk_at, reparam_classk, reparam_classk_into};
use super::{ControlLaw, ControlOutput, Trainable};
use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::netgraph::{Incidence, PowerNetwork};
use crate::scalar::{ParamView, Real, Scalar};

/// Hard per-bus frequency bounds, in Hz deviation from nominal.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetySpec<T> {
    pub omega_lo: Vec<T>,
    pub omega_hi: Vec<T>,
}

impl<T: Scalar> SafetySpec<T> {
    pub fn uniform(n: usize, lo: T, hi: T) -> Self {
        Self {
            omega_lo: vec![lo; n],
            omega_hi: vec![hi; n],
        }
    }

    pub fn n(&self) -> usize {
        self.omega_lo.len()
    }

    /// Checks sizes and `ω̲ < ω∞ < ω̄` on every bus.
    pub fn validate(&self, n: usize, omega_inf: T) -> Result<()> {
        if self.omega_lo.len() != n || self.omega_hi.len() != n {
            return Err(Error::InvalidSpec(format!(
                "expected {n} bounds per side, got {} and {}",
                self.omega_lo.len(),
                self.omega_hi.len()
            )));
        }
        for i in 0..n {
            let (lo, hi) = (self.omega_lo[i], self.omega_hi[i]);
            if !(lo < omega_inf && omega_inf < hi) {
                return Err(Error::InvalidSpec(format!(
                    "bus {}: need omega_lo < omega_inf < omega_hi, got {lo} < {omega_inf} < {hi}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, i: usize, omega: T) -> bool {
        self.omega_lo[i] <= omega && omega <= self.omega_hi[i]
    }
}

/// Offsets into a policy parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyLayout {
    pub n: usize,
    pub hidden: usize,
}

impl PolicyLayout {
    pub fn stride(&self) -> usize {
        12 * self.hidden + 3
    }

    pub fn len(&self) -> usize {
        self.n * self.stride()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn alpha_hi(&self, i: usize) -> usize {
        i * self.stride()
    }

    pub fn alpha_lo(&self, i: usize) -> usize {
        i * self.stride() + 4 * self.hidden
    }

    /// Start of the `q⁺ | q⁻ | r⁺ | r⁻` block.
    pub fn deadzone(&self, i: usize) -> usize {
        i * self.stride() + 8 * self.hidden
    }

    pub fn th_lo(&self, i: usize) -> usize {
        i * self.stride() + 12 * self.hidden
    }

    pub fn th_hi(&self, i: usize) -> usize {
        self.th_lo(i) + 1
    }

    pub fn xi(&self, i: usize) -> usize {
        self.th_lo(i) + 2
    }
}

/// Which piece of the constraint applies at a given frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Upper,
    DeadZone,
    Lower,
}

/// Per-bus outcome of [`constraint_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusCheck<T> {
    pub branch: Branch,
    /// `ū` on the upper branch, `u̲` on the lower one, 0 in the dead zone.
    pub bound: T,
    pub u: T,
    /// Distance to the bound on the feasible side; negative on violation.
    pub slack: T,
    pub pass: bool,
}

/// `ω̲ᵗʰ = (ω∞ − ω̲)ς(v_lo) + ω̲`, `ω̄ᵗʰ = (ω∞ − ω̄)ς(v_hi) + ω̄`.
pub fn thresholds<T: Scalar, R: Real<Base = T>>(v_lo: R, v_hi: R, omega_lo: T, omega_hi: T, omega_inf: T) -> (R, R) {
    let lo = R::cst(omega_inf - omega_lo) * v_lo.sigmoid() + R::cst(omega_lo);
    let hi = R::cst(omega_inf - omega_hi) * v_hi.sigmoid() + R::cst(omega_hi);
    (lo, hi)
}

/// Dead-zone function read from a `q⁺ | q⁻ | r⁺ | r⁻` block at `off`.
fn deadzone_at<R: Real, P: ParamView<R> + ?Sized>(params: &P, off: usize, h: usize, lo: R, hi: R, omega: R) -> R {
    let zero = <R::Base as num_traits::Zero>::zero();
    let mut acc = R::rzero();
    for j in 0..h {
        let pre = omega - hi + params.param(off + 2 * h + j);
        if pre.value() > zero {
            acc = acc + params.param(off + j) * pre;
        }
    }
    for j in 0..h {
        let pre = -(omega - lo) + params.param(off + 3 * h + j);
        if pre.value() > zero {
            acc = acc + params.param(off + h + j) * pre;
        }
    }
    acc
}

/// `f(ω) = q⁺σ(𝟏(ω − ω̄ᵗʰ) + r⁺) + q⁻σ(−𝟏(ω − ω̲ᵗʰ) + r⁻)`.
pub fn deadzone_f<R: Real>(q_pos: &[R], q_neg: &[R], r_pos: &[R], r_neg: &[R], lo: R, hi: R, omega: R) -> R {
    let h = q_pos.len();
    assert!(q_neg.len() == h && r_pos.len() == h && r_neg.len() == h, "dead-zone blocks must share a width");
    let block = [q_pos, q_neg, r_pos, r_neg].concat();
    deadzone_at(block.as_slice(), 0, h, lo, hi, omega)
}

/// `b = 𝓛̃(active) ξ`: each edge with both ends active moves `ξ_s − ξ_t`
/// from its target to its source.
pub fn budgets_masked<T: Scalar, R: Real<Base = T>>(inc: &Incidence<T>, active: &[bool], xi: &[R]) -> Vec<R> {
    let mut b = vec![R::rzero(); inc.n()];
    for (s, t) in inc.active_edges(active) {
        let d = xi[s] - xi[t];
        b[s] = b[s] + d;
        b[t] = b[t] - d;
    }
    b
}

/// Budgets for per-bus `(ω̲ᵗʰ, ω̄ᵗʰ)` thresholds: a bus is active when its
/// frequency lies outside its dead zone.
pub fn budgets<T: Scalar, R: Real<Base = T>>(inc: &Incidence<T>, thresholds: &[(T, T)], omega: &[R], xi: &[R]) -> Vec<R> {
    let active: Vec<bool> = omega
        .iter()
        .zip(thresholds)
        .map(|(w, &(lo, hi))| w.value() < lo || w.value() > hi)
        .collect();
    budgets_masked(inc, &active, xi)
}

/// `D̃(ω − ω∞) + b / (ω − ω∞)`.
pub fn stability_cap<T: Scalar, R: Real<Base = T>>(dtilde: T, omega: R, omega_inf: T, b: R) -> R {
    let dw = omega - R::cst(omega_inf);
    R::cst(dtilde) * dw + b / dw
}

/// `q_i = D_i ω_i + [B Yb]_i sin λ − p_i`.
pub fn feedforward_q<T: Scalar, R: Real<Base = T>>(
    net: &PowerNetwork<T>,
    inc: &Incidence<T>,
    omega: &[R],
    lambda: &[R],
    p: &[T],
    i: usize,
) -> R {
    R::cst(net.damping()[i]) * omega[i] + inc.line_outflow(i, lambda) - R::cst(p[i])
}

/// Clamps each `u_i` into the feasible side of its branch.
pub fn project_to_constraint<T: Scalar>(u: &[T], checks: &[BusCheck<T>]) -> Vec<T> {
    u.iter()
        .zip(checks)
        .map(|(&ui, c)| match c.branch {
            Branch::Upper => Real::rmin(ui, c.bound),
            Branch::Lower => Real::rmax(ui, c.bound),
            Branch::DeadZone => T::zero(),
        })
        .collect()
}

/// Bound data for one bus outside its dead zone.
struct BranchEval<R> {
    branch: Branch,
    gate: R,
    f: R,
    bound: R,
}

/// Structurally constrained distributed policy.
#[derive(Debug, Clone)]
pub struct ConstrainedPolicy<T> {
    layout: PolicyLayout,
    raw: Vec<T>,
    eff: Vec<T>,
    spec: SafetySpec<T>,
    dtilde: Vec<T>,
    damping: Vec<T>,
    omega_inf: T,
    row_l1: Vec<T>,
    projection: bool,
}

impl<T: Scalar> ConstrainedPolicy<T> {
    /// Policy with all raw parameters zero.
    pub fn new(model: &Model<T>, spec: SafetySpec<T>, hidden: usize, dtilde_frac: T, projection: bool) -> Result<Self> {
        let n = model.n();
        spec.validate(n, model.eq.omega_inf)?;
        if hidden == 0 {
            return Err(Error::InvalidConfig("m_hidden must be at least 1".into()));
        }
        if !(dtilde_frac > T::zero() && dtilde_frac < T::one()) {
            return Err(Error::InvalidConfig(format!("dtilde fraction must lie in (0, 1), got {dtilde_frac}")));
        }
        let layout = PolicyLayout { n, hidden };
        let mut policy = Self {
            layout,
            raw: Vec::new(),
            eff: Vec::new(),
            spec,
            dtilde: model.net.damping().iter().map(|&d| dtilde_frac * d).collect(),
            damping: model.net.damping().to_vec(),
            omega_inf: model.eq.omega_inf,
            row_l1: model.inc.row_l1().to_vec(),
            projection,
        };
        policy.set_raw(vec![T::zero(); layout.len()]);
        Ok(policy)
    }

    /// Raw parameters uniform in `±scale`, drawn in index order.
    pub fn init_random(&mut self, seed: u64, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = (0..self.layout.len())
            .map(|_| T::of(if scale > 0.0 { rng.gen_range(-scale..=scale) } else { 0.0 }))
            .collect();
        self.set_raw(raw);
    }

    pub fn layout(&self) -> PolicyLayout {
        self.layout
    }

    pub fn spec(&self) -> &SafetySpec<T> {
        &self.spec
    }

    pub fn dtilde(&self) -> &[T] {
        &self.dtilde
    }

    pub fn projection(&self) -> bool {
        self.projection
    }

    pub fn set_projection(&mut self, on: bool) {
        self.projection = on;
    }

    /// Effective `(ω̲ᵗʰ, ω̄ᵗʰ)` per bus.
    pub fn thresholds(&self) -> Vec<(T, T)> {
        (0..self.layout.n)
            .map(|i| (self.eff[self.layout.th_lo(i)], self.eff[self.layout.th_hi(i)]))
            .collect()
    }

    pub fn xi(&self) -> Vec<T> {
        (0..self.layout.n).map(|i| self.eff[self.layout.xi(i)]).collect()
    }

    /// Largest admissible `‖ξ‖_∞` for the current thresholds.
    pub fn xi_max(&self) -> T {
        xi_max_of(&self.thresholds(), &self.dtilde, &self.row_l1, self.omega_inf)
    }

    /// Evaluates the branch data for bus `i` when it is outside its dead zone.
    #[allow(clippy::too_many_arguments)]
    fn branch_eval<R, P>(
        &self,
        model: &Model<T>,
        params: &P,
        omega: &[R],
        lambda: &[R],
        p: &[T],
        b: &[R],
        lo: R,
        hi: R,
        i: usize,
    ) -> Option<BranchEval<R>>
    where
        R: Real<Base = T>,
        P: ParamView<R> + ?Sized,
    {
        let w = omega[i];
        let h = self.layout.hidden;
        let branch = if w.value() > hi.value() {
            Branch::Upper
        } else if w.value() < lo.value() {
            Branch::Lower
        } else {
            return None;
        };
        let f = deadzone_at(params, self.layout.deadzone(i), h, lo, hi, w);
        let cap = stability_cap(self.dtilde[i], w, self.omega_inf, b[i]);
        let q = feedforward_q(&model.net, &model.inc, omega, lambda, p, i);
        Some(match branch {
            Branch::Upper => {
                let gate = (w - hi).relu();
                let alpha = classk_at(params, self.layout.alpha_hi(i), h, R::cst(self.spec.omega_hi[i]) - w);
                let barrier = alpha / (w - hi) + q;
                BranchEval {
                    branch,
                    gate,
                    f,
                    bound: cap.rmin(barrier),
                }
            }
            _ => {
                let gate = (lo - w).relu();
                let alpha = classk_at(params, self.layout.alpha_lo(i), h, R::cst(self.spec.omega_lo[i]) - w);
                let barrier = alpha / (lo - w) + q;
                BranchEval {
                    branch,
                    gate,
                    f,
                    bound: cap.rmax(barrier),
                }
            }
        })
    }

    /// Thresholds read through `params` and the resulting activity mask and budgets.
    fn shared<R, P>(&self, model: &Model<T>, params: &P, omega: &[R]) -> (Vec<(R, R)>, Vec<R>)
    where
        R: Real<Base = T>,
        P: ParamView<R> + ?Sized,
    {
        let n = self.layout.n;
        let th: Vec<(R, R)> = (0..n)
            .map(|i| (params.param(self.layout.th_lo(i)), params.param(self.layout.th_hi(i))))
            .collect();
        let active: Vec<bool> = (0..n)
            .map(|i| omega[i].value() < th[i].0.value() || omega[i].value() > th[i].1.value())
            .collect();
        let xi: Vec<R> = (0..n)
            .map(|i| {
                let touches = model.inc.incident(i).iter().any(|&(k, _)| {
                    let (s, t) = model.inc.ends()[k];
                    active[s] && active[t]
                });
                if touches {
                    params.param(self.layout.xi(i))
                } else {
                    R::rzero()
                }
            })
            .collect();
        let b = budgets_masked(&model.inc, &active, &xi);
        (th, b)
    }

    /// Per-bus check of the combined stability/safety constraint for the
    /// control `u` applied at the measured state.
    pub fn constraint_check(&self, model: &Model<T>, omega: &[T], lambda: &[T], p: &[T], u: &[T]) -> Vec<BusCheck<T>> {
        let params = self.eff.as_slice();
        let (th, b) = self.shared(model, params, omega);
        (0..self.layout.n)
            .map(|i| match self.branch_eval(model, params, omega, lambda, p, &b, th[i].0, th[i].1, i) {
                None => BusCheck {
                    branch: Branch::DeadZone,
                    bound: T::zero(),
                    u: u[i],
                    slack: -u[i].abs(),
                    pass: u[i] == T::zero(),
                },
                Some(e) => {
                    let slack = match e.branch {
                        Branch::Upper => e.bound - u[i],
                        _ => u[i] - e.bound,
                    };
                    BusCheck {
                        branch: e.branch,
                        bound: e.bound,
                        u: u[i],
                        slack,
                        pass: slack >= T::zero(),
                    }
                }
            })
            .collect()
    }

    /// `Σ_i [−D_i Δω_i² + Δω_i u_i]` at the given frequencies.
    pub fn energy_rate(&self, omega: &[T], u: &[T]) -> T {
        omega
            .iter()
            .zip(u)
            .zip(&self.damping)
            .map(|((&w, &ui), &d)| {
                let dw = w - self.omega_inf;
                -d * dw * dw + dw * ui
            })
            .sum()
    }
}

/// `min_i min{D̃_i(ω̄ᵗʰ−ω∞)², D̃_i(ω̲ᵗʰ−ω∞)²} / ‖[𝓛]_i‖₁` over buses with
/// at least one line, shrunk by a few ulps so the product bound survives
/// rounding. Zero when no bus has a line.
fn xi_max_of<T: Scalar, R: Real<Base = T>>(th: &[(R, R)], dtilde: &[T], row_l1: &[T], omega_inf: T) -> R {
    let mut best: Option<R> = None;
    for (i, &(lo, hi)) in th.iter().enumerate() {
        if row_l1[i] <= T::zero() {
            continue;
        }
        let dl = lo - R::cst(omega_inf);
        let dh = hi - R::cst(omega_inf);
        let scale = R::cst(dtilde[i] / row_l1[i]);
        let bound = (scale * dh.square()).rmin(scale * dl.square());
        best = Some(match best {
            None => bound,
            Some(b) => b.rmin(bound),
        });
    }
    let shrink = R::cst(T::one() - T::of(16.0) * T::epsilon());
    best.map_or(R::rzero(), |b| b * shrink)
}

impl<T: Scalar> ControlLaw<T> for ConstrainedPolicy<T> {
    fn name(&self) -> &str {
        "rl-constrained"
    }

    fn effective(&self) -> &[T] {
        &self.eff
    }

    fn act<R, P>(&self, model: &Model<T>, params: &P, omega: &[R], lambda: &[R], p: &[T]) -> ControlOutput<R>
    where
        R: Real<Base = T>,
        P: ParamView<R> + ?Sized,
    {
        let (th, b) = self.shared(model, params, omega);
        let u = (0..self.layout.n)
            .map(|i| match self.branch_eval(model, params, omega, lambda, p, &b, th[i].0, th[i].1, i) {
                None => R::rzero(),
                Some(e) => match e.branch {
                    Branch::Upper => {
                        let u = e.gate * (e.f - (e.f - e.bound).relu());
                        if self.projection {
                            u.rmin(e.bound)
                        } else {
                            u
                        }
                    }
                    _ => {
                        let u = e.gate * (e.f + (e.bound - e.f).relu());
                        if self.projection {
                            u.rmax(e.bound)
                        } else {
                            u
                        }
                    }
                },
            })
            .collect();
        ControlOutput { u, budgets: b }
    }

    fn dead_zones(&self) -> Option<Vec<(T, T)>> {
        Some(self.thresholds())
    }
}

impl<T: Scalar> Trainable<T> for ConstrainedPolicy<T> {
    fn raw(&self) -> &[T] {
        &self.raw
    }

    fn set_raw(&mut self, raw: Vec<T>) {
        assert_eq!(raw.len(), self.layout.len(), "raw parameter length");
        self.eff = self.reparameterize(&raw);
        self.raw = raw;
    }

    fn reparameterize<R: Real<Base = T>>(&self, raw: &[R]) -> Vec<R> {
        let l = self.layout;
        let h = l.hidden;
        let mut eff = vec![R::rzero(); raw.len()];
        let mut th = Vec::with_capacity(l.n);
        for i in 0..l.n {
            for off in [l.alpha_hi(i), l.alpha_lo(i)] {
                reparam_classk_into(&raw[off..off + 4 * h], &mut eff[off..off + 4 * h]);
            }
            let dz = l.deadzone(i);
            eff[dz..dz + 2 * h].copy_from_slice(&raw[dz..dz + 2 * h]);
            for j in dz + 2 * h..dz + 4 * h {
                eff[j] = -raw[j].square();
            }
            let (lo, hi) = thresholds(
                raw[l.th_lo(i)],
                raw[l.th_hi(i)],
                self.spec.omega_lo[i],
                self.spec.omega_hi[i],
                self.omega_inf,
            );
            eff[l.th_lo(i)] = lo;
            eff[l.th_hi(i)] = hi;
            th.push((lo, hi));
        }
        let xi_max = xi_max_of(&th, &self.dtilde, &self.row_l1, self.omega_inf);
        for i in 0..l.n {
            eff[l.xi(i)] = xi_max * raw[l.xi(i)].rtanh();
        }
        eff
    }

    fn check_structure(&self) -> Result<()> {
        let l = self.layout;
        let h = l.hidden;
        let fail = |msg: String| Err(Error::ConstraintViolated(msg));
        if self.eff.iter().any(|v| !v.is_finite()) {
            return fail("non-finite effective parameter".into());
        }
        let xi_inf = self.xi().iter().fold(T::zero(), |m, v| m.max(v.abs()));
        for i in 0..l.n {
            for (name, off) in [("upper", l.alpha_hi(i)), ("lower", l.alpha_lo(i))] {
                let k = reparam_classk(&self.raw[off..off + 4 * h]);
                if !k.is_valid() || k.to_block() != self.eff[off..off + 4 * h] {
                    return fail(format!("bus {}: {name} class-K block invalid", i + 1));
                }
            }
            let dz = l.deadzone(i);
            if self.eff[dz + 2 * h..dz + 4 * h].iter().any(|&r| r > T::zero()) {
                return fail(format!("bus {}: positive dead-zone bias", i + 1));
            }
            let (lo, hi) = (self.eff[l.th_lo(i)], self.eff[l.th_hi(i)]);
            if !(self.spec.omega_lo[i] < lo && lo < self.omega_inf && self.omega_inf < hi && hi < self.spec.omega_hi[i]) {
                return fail(format!("bus {}: thresholds ({lo}, {hi}) not strictly inside the band", i + 1));
            }
            if !(self.dtilde[i] > T::zero() && self.dtilde[i] < self.damping[i]) {
                return fail(format!("bus {}: D~ outside (0, D)", i + 1));
            }
            let bound = (self.dtilde[i] * (hi - self.omega_inf).powi(2)).min(self.dtilde[i] * (lo - self.omega_inf).powi(2));
            if self.row_l1[i] * xi_inf > bound {
                return fail(format!(
                    "bus {}: ||L_i||_1 ||xi||_inf = {} exceeds {}",
                    i + 1,
                    self.row_l1[i] * xi_inf,
                    bound
                ));
            }
        }
        Ok(())
    }
}

/// Free-function form of [`ConstrainedPolicy::constraint_check`].
pub fn constraint_check<T: Scalar>(
    policy: &ConstrainedPolicy<T>,
    model: &Model<T>,
    omega: &[T],
    lambda: &[T],
    p: &[T],
    u: &[T],
) -> Vec<BusCheck<T>> {
    policy.constraint_check(model, omega, lambda, p, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{Line, PowerNetwork};
    use proptest::prelude::*;

    fn path3() -> Model<f64> {
        let net = PowerNetwork::new(
            vec![Line { from: 0, to: 1, b: 1.0 }, Line { from: 1, to: 2, b: 1.0 }],
            vec![1.0; 3],
            vec![1.0; 3],
            vec![0.2, 0.0, -0.2],
        )
        .unwrap();
        Model::new(net).unwrap()
    }

    fn two_bus() -> Model<f64> {
        let net = PowerNetwork::new(vec![Line { from: 0, to: 1, b: 1.0 }], vec![1.0; 2], vec![1.0; 2], vec![0.0; 2])
            .unwrap();
        Model::new(net).unwrap()
    }

    #[test]
    fn threshold_examples() {
        let (_, hi) = thresholds(0.0, 0.0, -0.2, 0.2, 0.0);
        assert!((hi - 0.1_f64).abs() < 1e-15);
        let (lo, _) = thresholds(30.0, 0.0, -0.2, 0.2, 0.0);
        assert!((lo - 0.0_f64).abs() < 1e-9);
    }

    #[test]
    fn deadzone_examples() {
        let f = |q: [f64; 2], w: f64| deadzone_f(&[q[0]], &[q[1]], &[0.0], &[0.0], -0.1, 0.1, w);
        assert_eq!(f([2.0, 1.0], 0.05), 0.0);
        assert!((f([2.0, 0.0], 0.2) - 0.2).abs() < 1e-15);
        assert!((f([0.0, 1.0], -0.3) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn budget_examples() {
        let m = path3();
        let xi = [1.0, 0.0, -1.0];
        assert_eq!(budgets_masked(&m.inc, &[true; 3], &xi), vec![1.0, 0.0, -1.0]);
        assert_eq!(budgets_masked(&m.inc, &[true, true, false], &xi), vec![1.0, -1.0, 0.0]);
        let th = vec![(-0.1, 0.1); 3];
        assert_eq!(budgets(&m.inc, &th, &[0.0, 0.05, -0.05], &xi), vec![0.0; 3]);
    }

    #[test]
    fn cap_examples() {
        assert!((stability_cap(0.5, 0.2, 0.0, 0.0) - 0.1_f64).abs() < 1e-15);
        assert!((stability_cap(0.5, 0.2, 0.0, 0.02) - 0.2_f64).abs() < 1e-15);
        // At the threshold the worst admissible budget leaves the cap at zero.
        let (dt, th) = (0.5, 0.1);
        let cap = stability_cap(dt, th + 1e-12, 0.0, -dt * th * th);
        assert!(cap >= -1e-10);
    }

    #[test]
    fn feedforward_examples() {
        let m = two_bus();
        let q = feedforward_q(&m.net, &m.inc, &[0.1, -0.1], &[0.0], &[0.0; 2], 0);
        assert!((q - 0.1_f64).abs() < 1e-15);
        assert_eq!(feedforward_q(&m.net, &m.inc, &[0.0, 0.0], &[0.0], &[0.0; 2], 1), 0.0);

        let m = path3();
        let w = vec![m.eq.omega_inf; 3];
        for i in 0..3 {
            let q = feedforward_q(&m.net, &m.inc, &w, &m.eq.lambda_inf, m.net.p_nom(), i);
            assert!(q.abs() < 1e-9);
        }
    }

    /// Policy whose bus 1 reproduces the hand example: threshold 0.1,
    /// `f = 0.5` at `ω = 0.15`, `ū = 0.2`.
    fn hand_policy() -> (Model<f64>, ConstrainedPolicy<f64>) {
        let m = two_bus();
        let pol = ConstrainedPolicy::new(&m, SafetySpec::uniform(2, -0.2, 0.2), 1, 0.5, false).unwrap();
        (m, pol)
    }

    #[test]
    fn verbatim_law_hand_example() {
        let (m, mut pol) = hand_policy();
        let l = pol.layout();
        let mut eff = pol.effective().to_vec();
        // f = q⁺ relu(ω − 0.1): q⁺ = 10 gives 0.5 at ω = 0.15.
        eff[l.deadzone(0)] = 10.0;
        eff[l.xi(0)] = 0.0;
        eff[l.xi(1)] = 0.0;
        pol.eff = eff;
        // With λ = 0 and p chosen so q_1 = D·ω − p = 0.15 − p, cap = 0.5·0.15 = 0.075.
        // Choose the barrier to dominate and read off ū = cap.
        let omega = [0.15, 0.0];
        let out = pol.act(&m, pol.effective(), &omega, &[0.0], &[0.0, 0.0]);
        let cap = 0.5 * 0.15;
        let expect = 0.05 * (0.5 - (0.5 - cap));
        assert!((out.u[0] - expect).abs() < 1e-15, "{} vs {expect}", out.u[0]);
        assert_eq!(out.u[1], 0.0);
    }

    #[test]
    fn spec_hand_example_direct() {
        // σ(0.05)·(0.5 − σ(0.5 − 0.2)) = 0.01
        let (gate, f, ubar) = (0.05_f64, 0.5, 0.2);
        let u = gate.relu() * (f - (f - ubar).relu());
        assert!((u - 0.01).abs() < 1e-15);
        let check = BusCheck {
            branch: Branch::Upper,
            bound: ubar,
            u,
            slack: ubar - u,
            pass: true,
        };
        assert!((check.slack - 0.19).abs() < 1e-15);
    }

    #[test]
    fn constraint_check_flags_violation() {
        let (m, pol) = hand_policy();
        let omega = [0.15, 0.0];
        let out = pol.act(&m, pol.effective(), &omega, &[0.0], &[0.0; 2]);
        let checks = pol.constraint_check(&m, &omega, &[0.0], &[0.0; 2], &out.u);
        assert_eq!(checks[1].branch, Branch::DeadZone);
        assert!(checks[1].pass);
        let bad = [checks[0].bound + 1.0, 0.0];
        let checks = pol.constraint_check(&m, &omega, &[0.0], &[0.0; 2], &bad);
        assert!(!checks[0].pass);
        assert!((checks[0].slack + 1.0).abs() < 1e-12);
        let fixed = project_to_constraint(&bad, &checks);
        assert_eq!(fixed[0], checks[0].bound);
        let again = pol.constraint_check(&m, &omega, &[0.0], &[0.0; 2], &fixed);
        assert!(again.iter().all(|c| c.pass));
    }

    #[test]
    fn projection_identity_on_feasible() {
        let checks = [BusCheck {
            branch: Branch::Upper,
            bound: 0.3,
            u: 0.1,
            slack: 0.2,
            pass: true,
        }];
        assert_eq!(project_to_constraint(&[0.1], &checks), vec![0.1]);
    }

    #[test]
    fn zero_raw_structure() {
        let m = path3();
        let pol = ConstrainedPolicy::new(&m, SafetySpec::uniform(3, -0.2, 0.2), 4, 0.5, true).unwrap();
        pol.check_structure().unwrap();
        for (lo, hi) in pol.thresholds() {
            assert!((lo + 0.1).abs() < 1e-12 && (hi - 0.1).abs() < 1e-12);
        }
        assert!(pol.xi().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn xi_zero_without_lines() {
        let th = [(-0.1_f64, 0.1)];
        assert_eq!(xi_max_of(&th, &[0.5], &[0.0], 0.0), 0.0);
    }

    #[test]
    fn locality() {
        // Bus 1 on a 4-bus path depends only on buses 1 and 2.
        let net = PowerNetwork::new(
            (0..3).map(|k| Line { from: k, to: k + 1, b: 1.0 }).collect(),
            vec![1.0; 4],
            vec![1.0; 4],
            vec![0.0; 4],
        )
        .unwrap();
        let m = Model::new(net).unwrap();
        let mut pol = ConstrainedPolicy::new(&m, SafetySpec::uniform(4, -0.2, 0.2), 3, 0.5, false).unwrap();
        pol.init_random(5, 1.0);
        let lambda = vec![0.1, -0.05, 0.02];
        let p = vec![0.1, 0.0, 0.0, -0.1];
        let base = [0.15, 0.14, 0.16, -0.15];
        let u0 = pol.act(&m, pol.effective(), &base, &lambda, &p).u[0];
        let mut moved = base;
        moved[3] = -0.19;
        moved[2] = 0.12;
        let mut lam2 = lambda.clone();
        lam2[2] = 0.3;
        let u1 = pol.act(&m, pol.effective(), &moved, &lam2, &p).u[0];
        assert_eq!(u0, u1);
    }

    fn random_policy(seed: u64, hidden: usize) -> (Model<f64>, ConstrainedPolicy<f64>) {
        let m = path3();
        let mut pol = ConstrainedPolicy::new(&m, SafetySpec::uniform(3, -0.2, 0.2), hidden, 0.5, true).unwrap();
        pol.init_random(seed, 3.0);
        (m, pol)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn thresholds_strictly_inside(v_lo in -30.0f64..30.0, v_hi in -30.0f64..30.0, winf in -0.05f64..0.05) {
            let (lo, hi) = thresholds(v_lo, v_hi, -0.2, 0.2, winf);
            prop_assert!(-0.2 < lo && lo < winf);
            prop_assert!(winf < hi && hi < 0.2);
        }

        #[test]
        fn dead_zone_exact_and_budgets_conserved(
            seed in 0u64..1000,
            w in prop::collection::vec(-0.25f64..0.25, 3),
            l in prop::collection::vec(-1.0f64..1.0, 2),
        ) {
            let (m, pol) = random_policy(seed, 3);
            pol.check_structure().unwrap();
            let out = pol.act(&m, pol.effective(), &w, &l, m.net.p_nom());
            let th = pol.thresholds();
            let sum: f64 = out.budgets.iter().sum();
            prop_assert!(sum.abs() < 1e-9);
            for i in 0..3 {
                if th[i].0 <= w[i] && w[i] <= th[i].1 {
                    prop_assert_eq!(out.u[i], 0.0);
                    prop_assert_eq!(out.budgets[i], 0.0);
                }
            }
            let checks = pol.constraint_check(&m, &w, &l, m.net.p_nom(), &out.u);
            prop_assert!(checks.iter().all(|c| c.pass));
            let rate = pol.energy_rate(&w, &out.u);
            prop_assert!(rate <= 1e-12);
        }
    }
}
