//! Single-hidden-layer ReLU networks that are strictly increasing through the
//! origin, and the reparameterization that keeps them so under unconstrained
//! gradient steps.
//!
//! Parameter block layout (length `4h`): `z⁺ | z⁻ | c⁺ | c⁻`.

use crate::scalar::{ParamView, Real, Scalar};

/// Floor added to every weight partial sum.
pub const CLASSK_EPS: f64 = 1e-4;

/// `α(s) = z⁺ σ(𝟏s + c⁺) + z⁻ σ(−𝟏s + c⁻)` with `σ = ReLU`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassK<T> {
    pub z_pos: Vec<T>,
    pub z_neg: Vec<T>,
    pub c_pos: Vec<T>,
    pub c_neg: Vec<T>,
}

impl<T: Scalar + Real<Base = T>> ClassK<T> {
    pub fn hidden(&self) -> usize {
        self.z_pos.len()
    }

    pub fn to_block(&self) -> Vec<T> {
        [&self.z_pos[..], &self.z_neg, &self.c_pos, &self.c_neg].concat()
    }

    pub fn eval(&self, s: T) -> T {
        classk_at(self.to_block().as_slice(), 0, self.hidden(), s)
    }

    /// Partial sums of `z⁺` positive, of `z⁻` negative; both bias vectors
    /// start at zero and are non-increasing.
    pub fn is_valid(&self) -> bool {
        let sums_ok = |z: &[T], positive: bool| {
            let mut acc = T::zero();
            z.iter().all(|&w| {
                acc += w;
                if positive {
                    acc > T::zero()
                } else {
                    acc < T::zero()
                }
            })
        };
        let bias_ok =
            |c: &[T]| c.first().map_or(true, |&c0| c0 == T::zero()) && c.windows(2).all(|w| w[1] <= w[0]);
        sums_ok(&self.z_pos, true) && sums_ok(&self.z_neg, false) && bias_ok(&self.c_pos) && bias_ok(&self.c_neg)
    }
}

pub fn classk_eval<T: Scalar + Real<Base = T>>(k: &ClassK<T>, s: T) -> T {
    k.eval(s)
}

/// Evaluates the block at `off` with `h` hidden units. Units whose
/// pre-activation is not positive contribute neither value nor gradient and
/// are skipped without reading their weight.
pub(crate) fn classk_at<R, P>(params: &P, off: usize, h: usize, s: R) -> R
where
    R: Real,
    P: ParamView<R> + ?Sized,
{
    let mut acc = R::rzero();
    for j in 0..h {
        let pre = s + params.param(off + 2 * h + j);
        if pre.value() > <R::Base as num_traits::Zero>::zero() {
            acc = acc + params.param(off + j) * pre;
        }
    }
    for j in 0..h {
        let pre = -s + params.param(off + 3 * h + j);
        if pre.value() > <R::Base as num_traits::Zero>::zero() {
            acc = acc + params.param(off + h + j) * pre;
        }
    }
    acc
}

/// Maps a raw block onto a valid class-K block.
pub(crate) fn reparam_classk_into<R: Real>(raw: &[R], out: &mut [R]) {
    let h = raw.len() / 4;
    let eps = R::cst(R::Base::of(CLASSK_EPS));
    for (sign, base) in [(false, 0), (true, h)] {
        let mut prev = R::rzero();
        for j in 0..h {
            let mag = eps + raw[base + j].softplus();
            let partial = if sign { -mag } else { mag };
            out[base + j] = partial - prev;
            prev = partial;
        }
    }
    for base in [2 * h, 3 * h] {
        let mut c = R::rzero();
        out[base] = c;
        for j in 1..h {
            c = c - raw[base + j].square();
            out[base + j] = c;
        }
    }
}

/// Raw block (length `4h`) to a valid network.
pub fn reparam_classk<T: Scalar + Real<Base = T>>(raw: &[T]) -> ClassK<T> {
    assert_eq!(raw.len() % 4, 0, "class-K raw block length must be a multiple of 4");
    let h = raw.len() / 4;
    let mut out = vec![T::zero(); raw.len()];
    reparam_classk_into(raw, &mut out);
    ClassK {
        z_pos: out[..h].to_vec(),
        z_neg: out[h..2 * h].to_vec(),
        c_pos: out[2 * h..3 * h].to_vec(),
        c_neg: out[3 * h..].to_vec(),
    }
}
