//! Control policies: the structurally constrained neural controller, its
//! building blocks, and the two comparison baselines.

mod baselines;
mod classk;
mod constrained;

pub use baselines::{baseline_safe, AnalyticSafe, MonotonePolicy};
pub use classk::{classk_eval, reparam_classk, ClassK, CLASSK_EPS};
pub use constrained::{
    budgets, constraint_check, deadzone_f, feedforward_q, project_to_constraint, stability_cap,
    thresholds, Branch, BusCheck, ConstrainedPolicy, PolicyLayout, SafetySpec,
};

use crate::dynamics::Model;
use crate::error::Result;
use crate::scalar::{ParamView, Real, Scalar};

/// Control action and the budgets it was computed with.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput<R> {
    pub u: Vec<R>,
    pub budgets: Vec<R>,
}

/// A feedback law `u(x, p)` over the measured state.
pub trait ControlLaw<T: Scalar>: Sync {
    fn name(&self) -> &str;

    /// Constrained parameter vector read by [`ControlLaw::act`] in plain evaluation.
    fn effective(&self) -> &[T] {
        &[]
    }

    /// Evaluates the law on measured frequencies, line angles and injections.
    /// Parameters are read exclusively through `params`, so the same code
    /// serves plain evaluation and tape recording.
    fn act<R, P>(&self, model: &Model<T>, params: &P, omega: &[R], lambda: &[R], p: &[T]) -> ControlOutput<R>
    where
        R: Real<Base = T>,
        P: ParamView<R> + ?Sized;

    /// Per-bus dead-zone `(lower, upper)` thresholds, when the law has them.
    fn dead_zones(&self) -> Option<Vec<(T, T)>> {
        None
    }
}

/// A law with unconstrained raw parameters mapped onto constrained ones by a
/// differentiable reparameterization.
pub trait Trainable<T: Scalar>: ControlLaw<T> {
    fn raw(&self) -> &[T];

    /// Replaces the raw parameters and refreshes the effective ones.
    fn set_raw(&mut self, raw: Vec<T>);

    fn reparameterize<R: Real<Base = T>>(&self, raw: &[R]) -> Vec<R>;

    /// Verifies every structural invariant of the effective parameters.
    fn check_structure(&self) -> Result<()>;
}

/// `u ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroControl;

impl<T: Scalar> ControlLaw<T> for ZeroControl {
    fn name(&self) -> &str {
        "zero"
    }

    fn act<R, P>(&self, model: &Model<T>, _params: &P, _omega: &[R], _lambda: &[R], _p: &[T]) -> ControlOutput<R>
    where
        R: Real<Base = T>,
        P: ParamView<R> + ?Sized,
    {
        ControlOutput {
            u: vec![R::rzero(); model.n()],
            budgets: vec![R::rzero(); model.n()],
        }
    }
}
