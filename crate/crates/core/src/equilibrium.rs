//! Synchronous equilibrium, energy function and region-of-attraction estimate.

use crate::dynamics::SystemState;
use crate::error::{Error, Result};
use crate::netgraph::{pseudo_inverse_apply, solve_grounded, Incidence, PowerNetwork};
use crate::scalar::Scalar;

const NEWTON_MAX_ITERS: usize = 100;
const NEWTON_MAX_HALVINGS: usize = 40;

/// The equilibrium `(λ∞, ω∞𝟏)` reached by the unforced system.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium<T> {
    /// Common frequency deviation `Σp / ΣD`, Hz.
    pub omega_inf: T,
    /// `p − ω∞ D 𝟏`.
    pub p_tilde: Vec<T>,
    /// Equilibrium angle differences, one per edge.
    pub lambda_inf: Vec<T>,
    /// Bus angles with zero mean such that `λ∞ = Bᵀ θ`.
    pub theta_inf: Vec<T>,
    /// `min` of the energy over the boundary of the closed angle box.
    pub c: T,
    /// `‖L† p̃‖_{E,∞}`.
    pub cond_value: T,
    /// Final Newton residual `‖B Yb sin λ∞ − p̃‖_∞`.
    pub residual: T,
}

fn residual<T: Scalar>(inc: &Incidence<T>, theta: &[T], p_tilde: &[T]) -> (Vec<T>, T) {
    let lambda = inc.bt_apply(theta);
    let f: Vec<T> = inc
        .flows(&lambda)
        .iter()
        .zip(p_tilde)
        .map(|(&a, &b)| a - b)
        .collect();
    let norm = f.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    (f, norm)
}

/// Edge-wise `max |y_i − y_j|`.
pub fn edge_inf_norm<T: Scalar>(inc: &Incidence<T>, y: &[T]) -> T {
    inc.bt_apply(y).iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Computes the equilibrium for the network's nominal injections.
pub fn solve_equilibrium<T: Scalar>(net: &PowerNetwork<T>, inc: &Incidence<T>) -> Result<Equilibrium<T>> {
    let p = net.p_nom();
    let d = net.damping();
    let omega_inf = p.iter().copied().sum::<T>() / d.iter().copied().sum::<T>();
    let p_tilde: Vec<T> = p.iter().zip(d).map(|(&pi, &di)| pi - omega_inf * di).collect();

    let y = pseudo_inverse_apply(inc.laplacian(), &p_tilde);
    let cond_value = edge_inf_norm(inc, &y);
    if !(cond_value < T::one()) {
        return Err(Error::NoEquilibrium {
            cond_value: cond_value.to_f64_lossy(),
        });
    }

    let scale = p_tilde
        .iter()
        .chain(inc.yb())
        .fold(T::one(), |m, v| m.max(v.abs()));
    let tol = T::of(1e-12).max(T::epsilon() * T::of(64.0) * scale);

    let mut theta = y;
    let (mut f, mut res) = residual(inc, &theta, &p_tilde);
    let mut iters = 0;
    while res >= tol {
        if iters == NEWTON_MAX_ITERS {
            return Err(Error::NewtonFailed {
                iterations: iters,
                residual: res.to_f64_lossy(),
            });
        }
        iters += 1;
        let lambda = inc.bt_apply(&theta);
        let w: Vec<T> = lambda.iter().zip(inc.yb()).map(|(&l, &b)| b * l.cos()).collect();
        let jac = inc.weighted_laplacian(&w);
        let neg_f: Vec<T> = f.iter().map(|&v| -v).collect();
        let delta = solve_grounded(&jac, &neg_f).ok_or(Error::NewtonFailed {
            iterations: iters,
            residual: res.to_f64_lossy(),
        })?;
        let mut step = T::one();
        let mut accepted = false;
        for _ in 0..NEWTON_MAX_HALVINGS {
            let trial: Vec<T> = theta.iter().zip(&delta).map(|(&t, &dt)| t + step * dt).collect();
            let (tf, tres) = residual(inc, &trial, &p_tilde);
            if tres < res {
                theta = trial;
                f = tf;
                res = tres;
                accepted = true;
                break;
            }
            step = step * T::of(0.5);
        }
        if !accepted {
            // No further decrease is possible at this precision.
            break;
        }
    }
    if res >= tol * T::of(100.0) {
        return Err(Error::NewtonFailed {
            iterations: iters,
            residual: res.to_f64_lossy(),
        });
    }

    let lambda_inf = inc.bt_apply(&theta);
    let half_pi = T::FRAC_PI_2();
    if let Some((k, &l)) = lambda_inf.iter().enumerate().find(|(_, l)| !(l.abs() < half_pi)) {
        return Err(Error::EquilibriumOutsideRegion {
            edge: k + 1,
            lambda: l.to_f64_lossy(),
        });
    }
    let c = boundary_energy_min(inc, &lambda_inf);
    Ok(Equilibrium {
        omega_inf,
        p_tilde,
        lambda_inf,
        theta_inf: theta,
        c,
        cond_value,
        residual: res,
    })
}

/// Potential term `a(λ)` for one edge with equilibrium angle `l_inf`.
#[inline]
pub fn potential<T: Scalar>(lambda: T, l_inf: T) -> T {
    l_inf.cos() - lambda.cos() - lambda * l_inf.sin() + l_inf * l_inf.sin()
}

/// Minimum of the energy over the boundary of `{|λ_k| ≤ π/2}` at `ω = ω∞𝟏`.
///
/// The potential is separable with each term non-negative and zero at
/// `λ∞_k`, so the minimum puts one coordinate on `±π/2` and the rest at
/// equilibrium.
pub fn boundary_energy_min<T: Scalar>(inc: &Incidence<T>, lambda_inf: &[T]) -> T {
    let half_pi = T::FRAC_PI_2();
    lambda_inf
        .iter()
        .zip(inc.yb())
        .flat_map(|(&l, &b)| [b * potential(half_pi, l), b * potential(-half_pi, l)])
        .fold(T::infinity(), T::min)
}

/// Energy function value at `state`.
pub fn energy<T: Scalar>(
    eq: &Equilibrium<T>,
    inc: &Incidence<T>,
    net: &PowerNetwork<T>,
    state: &SystemState<T>,
) -> T {
    let half = T::of(0.5);
    let kinetic: T = state
        .omega
        .iter()
        .zip(net.inertia())
        .map(|(&w, &m)| half * m * (w - eq.omega_inf) * (w - eq.omega_inf))
        .sum();
    let pot: T = state
        .lambda
        .iter()
        .zip(&eq.lambda_inf)
        .zip(inc.yb())
        .map(|((&l, &li), &b)| b * potential(l, li))
        .sum();
    kinetic + pot
}

/// Membership in `{λ ∈ Γ_cl, V ≤ c/β}`.
pub fn in_region<T: Scalar>(
    eq: &Equilibrium<T>,
    inc: &Incidence<T>,
    net: &PowerNetwork<T>,
    state: &SystemState<T>,
    beta: T,
) -> bool {
    assert!(beta > T::zero(), "beta must be positive");
    let half_pi = T::FRAC_PI_2();
    state.lambda.iter().all(|l| l.abs() <= half_pi) && energy(eq, inc, net, state) <= eq.c / beta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{build_incidence, Line};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    fn two_bus(p: [f64; 2]) -> (PowerNetwork<f64>, Incidence<f64>) {
        let net = PowerNetwork::new(vec![Line { from: 0, to: 1, b: 1.0 }], vec![1.0; 2], vec![1.0; 2], p.to_vec())
            .unwrap();
        let inc = build_incidence(&net).unwrap();
        (net, inc)
    }

    /// Bisection on `sin λ = s` over `(0, π/2)`.
    fn bisect_arcsin(s: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, FRAC_PI_2);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.sin() < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn two_bus_equilibrium() {
        let (net, inc) = two_bus([0.5, -0.5]);
        let eq = solve_equilibrium(&net, &inc).unwrap();
        assert_eq!(eq.omega_inf, 0.0);
        assert!((eq.cond_value - 0.5).abs() < 1e-12);
        assert!((eq.lambda_inf[0] - bisect_arcsin(0.5)).abs() < 1e-12);
        assert!((eq.lambda_inf[0] - FRAC_PI_6).abs() < 1e-12);
        assert!(eq.residual < 1e-10);
    }

    #[test]
    fn zero_injection_equilibrium() {
        let (net, inc) = two_bus([0.0, 0.0]);
        let eq = solve_equilibrium(&net, &inc).unwrap();
        assert_eq!(eq.lambda_inf, vec![0.0]);
        assert_eq!(eq.omega_inf, 0.0);
    }

    #[test]
    fn rejects_infeasible_injection() {
        let (net, inc) = two_bus([1.5, -1.5]);
        let err = solve_equilibrium(&net, &inc).unwrap_err();
        assert!(matches!(err, Error::NoEquilibrium { cond_value } if (cond_value - 1.5).abs() < 1e-12));
    }

    #[test]
    fn energy_cap_two_bus() {
        let (net, inc) = two_bus([0.5, -0.5]);
        let eq = solve_equilibrium(&net, &inc).unwrap();
        // a(π/2) = cos(π/6) − π/4 + π/12.
        let hand = (3.0f64).sqrt() / 2.0 - std::f64::consts::FRAC_PI_4 + std::f64::consts::PI / 12.0;
        assert!((eq.c - hand).abs() < 1e-14);
        assert!((eq.c - 0.34243).abs() < 1e-5);
    }

    #[test]
    fn energy_examples() {
        let (net, inc) = two_bus([0.5, -0.5]);
        let eq = solve_equilibrium(&net, &inc).unwrap();
        let at_eq = SystemState::new(eq.lambda_inf.clone(), vec![0.0; 2]);
        assert_eq!(energy(&eq, &inc, &net, &at_eq), 0.0);
        let kin = SystemState::new(eq.lambda_inf.clone(), vec![0.1, -0.1]);
        assert!((energy(&eq, &inc, &net, &kin) - 0.01).abs() < 1e-15);
        let edge = SystemState::new(vec![FRAC_PI_2], vec![0.0; 2]);
        assert!((energy(&eq, &inc, &net, &edge) - eq.c).abs() < 1e-15);
    }

    #[test]
    fn region_membership() {
        let (net, inc) = two_bus([0.5, -0.5]);
        let eq = solve_equilibrium(&net, &inc).unwrap();
        let at_eq = SystemState::new(eq.lambda_inf.clone(), vec![0.0; 2]);
        assert!(in_region(&eq, &inc, &net, &at_eq, 3.0));
        let fast = SystemState::new(eq.lambda_inf.clone(), vec![1.0, 1.0]);
        assert!(!in_region(&eq, &inc, &net, &fast, 1.0));
        let wide = SystemState::new(vec![1.6], vec![0.0; 2]);
        assert!(!in_region(&eq, &inc, &net, &wide, 1e-6));
    }
}
