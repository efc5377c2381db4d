//! Comparison controllers: the hand-designed safe law with linear class-K
//! functions and fixed thresholds, and a decentralized monotone neural law.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::classk::{classk_at, reparam_classk, reparam_classk_into};
use super::constrained::{feedforward_q, SafetySpec};
use super::{ControlLaw, ControlOutput, Trainable};
use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::scalar::{ParamView, Real, Scalar};

/// Three-branch safe law with `α(s) = slope·s`:
/// `min{0, α(ω̄ − ω)/(ω − ω̄ᵗʰ) + q}` above the upper threshold,
/// `max{0, α(ω̲ − ω)/(ω̲ᵗʰ − ω) + q}` below the lower one, 0 between.
pub fn baseline_safe<T: Scalar, R: Real<Base = T>>(
    omega: R,
    q: R,
    omega_lo: T,
    omega_hi: T,
    th_lo: T,
    th_hi: T,
    slope: T,
) -> R {
    let w = omega.value();
    if w > th_hi {
        let barrier = R::cst(slope) * (R::cst(omega_hi) - omega) / (omega - R::cst(th_hi)) + q;
        R::rzero().rmin(barrier)
    } else if w < th_lo {
        let barrier = R::cst(slope) * (R::cst(omega_lo) - omega) / (R::cst(th_lo) - omega) + q;
        R::rzero().rmax(barrier)
    } else {
        R::rzero()
    }
}

#[derive(Debug, Clone)]
pub struct AnalyticSafe<T> {
    pub spec: SafetySpec<T>,
    pub slope: T,
    pub th_lo: T,
    pub th_hi: T,
}

impl<T: Scalar> AnalyticSafe<T> {
    /// Slope 2 and thresholds `±0.1` Hz.
    pub fn new(spec: SafetySpec<T>) -> Self {
        Self {
            spec,
            slope: T::of(2.0),
            th_lo: T::of(-0.1),
            th_hi: T::of(0.1),
        }
    }
}

impl<T: Scalar> ControlLaw<T> for AnalyticSafe<T> {
    fn name(&self) -> &str {
        "analytic-safe-baseline"
    }

    fn act<R, P>(&self, model: &Model<T>, _params: &P, omega: &[R], lambda: &[R], p: &[T]) -> ControlOutput<R>
    where
        R: Real<Base = T>,
        P: ParamView<R> + ?Sized,
    {
        let n = model.n();
        let u = (0..n)
            .map(|i| {
                let w = omega[i].value();
                if w > self.th_hi || w < self.th_lo {
                    let q = feedforward_q(&model.net, &model.inc, omega, lambda, p, i);
                    baseline_safe(
                        omega[i],
                        q,
                        self.spec.omega_lo[i],
                        self.spec.omega_hi[i],
                        self.th_lo,
                        self.th_hi,
                        self.slope,
                    )
                } else {
                    R::rzero()
                }
            })
            .collect();
        ControlOutput {
            u,
            budgets: vec![R::rzero(); n],
        }
    }

    fn dead_zones(&self) -> Option<Vec<(T, T)>> {
        Some(vec![(self.th_lo, self.th_hi); self.spec.n()])
    }
}

/// Decentralized `u_i = −α_i(ω_i − ω∞)` with a trainable class-K `α_i` per bus.
#[derive(Debug, Clone)]
pub struct MonotonePolicy<T> {
    n: usize,
    hidden: usize,
    omega_inf: T,
    raw: Vec<T>,
    eff: Vec<T>,
}

impl<T: Scalar> MonotonePolicy<T> {
    pub fn new(model: &Model<T>, hidden: usize) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::InvalidConfig("m_hidden must be at least 1".into()));
        }
        let n = model.n();
        let mut policy = Self {
            n,
            hidden,
            omega_inf: model.eq.omega_inf,
            raw: Vec::new(),
            eff: Vec::new(),
        };
        policy.set_raw(vec![T::zero(); n * 4 * hidden]);
        Ok(policy)
    }

    pub fn init_random(&mut self, seed: u64, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = (0..self.raw.len())
            .map(|_| T::of(if scale > 0.0 { rng.gen_range(-scale..=scale) } else { 0.0 }))
            .collect();
        self.set_raw(raw);
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// `u_i` at a single frequency deviation, plain evaluation.
    pub fn eval_bus(&self, i: usize, omega: T) -> T {
        let s = omega - self.omega_inf;
        -classk_at(self.eff.as_slice(), i * 4 * self.hidden, self.hidden, s)
    }
}

impl<T: Scalar> ControlLaw<T> for MonotonePolicy<T> {
    fn name(&self) -> &str {
        "rl-monotone-baseline"
    }

    fn effective(&self) -> &[T] {
        &self.eff
    }

    fn act<R, P>(&self, _model: &Model<T>, params: &P, omega: &[R], _lambda: &[R], _p: &[T]) -> ControlOutput<R>
    where
        R: Real<Base = T>,
        P: ParamView<R> + ?Sized,
    {
        let h = self.hidden;
        let u = (0..self.n)
            .map(|i| -classk_at(params, i * 4 * h, h, omega[i] - R::cst(self.omega_inf)))
            .collect();
        ControlOutput {
            u,
            budgets: vec![R::rzero(); self.n],
        }
    }
}

impl<T: Scalar> Trainable<T> for MonotonePolicy<T> {
    fn raw(&self) -> &[T] {
        &self.raw
    }

    fn set_raw(&mut self, raw: Vec<T>) {
        assert_eq!(raw.len(), self.n * 4 * self.hidden, "raw parameter length");
        self.eff = self.reparameterize(&raw);
        self.raw = raw;
    }

    fn reparameterize<R: Real<Base = T>>(&self, raw: &[R]) -> Vec<R> {
        let w = 4 * self.hidden;
        let mut eff = vec![R::rzero(); raw.len()];
        for i in 0..self.n {
            reparam_classk_into(&raw[i * w..(i + 1) * w], &mut eff[i * w..(i + 1) * w]);
        }
        eff
    }

    fn check_structure(&self) -> Result<()> {
        let w = 4 * self.hidden;
        for i in 0..self.n {
            if !reparam_classk(&self.raw[i * w..(i + 1) * w]).is_valid() {
                return Err(Error::ConstraintViolated(format!("bus {}: monotone block invalid", i + 1)));
            }
        }
        Ok(())
    }
}
