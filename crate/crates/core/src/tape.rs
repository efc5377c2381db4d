//! Reverse-mode differentiation tape.
//!
//! Every operation on a [`Var`] that involves at least one recorded operand
//! appends a node holding its kind, up to two parent indices and the local
//! partial derivatives evaluated at record time. Constants carry no node.
//! A reverse sweep over the node list in decreasing index order (which is a
//! topological order by construction) accumulates adjoints.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::{sigmoid, softplus, ParamView, Real, Scalar};

const NONE: u32 = u32::MAX;

/// Kind of a recorded operation. Kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Relu,
    Sigmoid,
    Softplus,
    Tanh,
    Sin,
    Cos,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy)]
struct Node<T> {
    op: Op,
    parents: [u32; 2],
    partials: [T; 2],
}

/// Append-only operation record.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
    values: RefCell<Vec<T>>,
}

/// Adjoints produced by a reverse sweep, indexed by node.
#[derive(Debug, Clone)]
pub struct Adjoints<T> {
    adj: Vec<T>,
}

impl<T: Scalar> Adjoints<T> {
    /// Adjoint of `v`; zero for constants.
    pub fn of(&self, v: &Var<'_, T>) -> T {
        if v.idx == NONE {
            T::zero()
        } else {
            self.adj[v.idx as usize]
        }
    }

    pub fn by_index(&self, idx: u32) -> T {
        self.adj[idx as usize]
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            values: RefCell::new(Vec::new()),
        }
    }

    pub fn with_capacity(cap: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(cap)),
            values: RefCell::new(Vec::with_capacity(cap)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops all nodes, keeping allocations.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
        self.values.get_mut().clear();
    }

    /// Records an independent variable.
    pub fn leaf(&self, value: T) -> Var<'_, T> {
        let idx = self.push(Op::Leaf, [NONE, NONE], [T::zero(); 2], value);
        Var {
            tape: Some(self),
            idx,
            val: value,
        }
    }

    fn push(&self, op: Op, parents: [u32; 2], partials: [T; 2], value: T) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len();
        assert!(idx < NONE as usize, "tape overflow");
        nodes.push(Node {
            op,
            parents,
            partials,
        });
        self.values.borrow_mut().push(value);
        idx as u32
    }

    /// Reverse sweep seeded with `(output, adjoint)` pairs.
    ///
    /// Fails on the first node (in sweep order) whose adjoint is not finite.
    pub fn backward(&self, seeds: &[(Var<'_, T>, T)]) -> Result<Adjoints<T>> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![T::zero(); nodes.len()];
        for (v, s) in seeds {
            if v.idx != NONE {
                debug_assert!(v.tape.map_or(false, |t| std::ptr::eq(t, self)));
                adj[v.idx as usize] += *s;
            }
        }
        for i in (0..nodes.len()).rev() {
            let a = adj[i];
            if a == T::zero() {
                continue;
            }
            if !a.is_finite() {
                return Err(Error::NonFiniteAdjoint {
                    node: i,
                    op: format!("{:?}", nodes[i].op),
                    value: self.values.borrow()[i].to_f64_lossy(),
                });
            }
            let node = &nodes[i];
            for k in 0..2 {
                let p = node.parents[k];
                if p != NONE {
                    adj[p as usize] += a * node.partials[k];
                }
            }
        }
        Ok(Adjoints { adj })
    }
}

/// A value that may be recorded on a [`Tape`].
#[derive(Debug, Clone, Copy)]
pub struct Var<'t, T> {
    tape: Option<&'t Tape<T>>,
    idx: u32,
    val: T,
}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn constant(val: T) -> Self {
        Var {
            tape: None,
            idx: NONE,
            val,
        }
    }

    pub fn index(&self) -> Option<u32> {
        (self.idx != NONE).then_some(self.idx)
    }

    fn unary(self, op: Op, val: T, d: T) -> Self {
        match self.tape {
            Some(tape) => {
                let idx = tape.push(op, [self.idx, NONE], [d, T::zero()], val);
                Var {
                    tape: Some(tape),
                    idx,
                    val,
                }
            }
            None => Var::constant(val),
        }
    }

    fn binary(self, other: Self, op: Op, val: T, da: T, db: T) -> Self {
        let tape = self.tape.or(other.tape);
        match tape {
            Some(tape) => {
                let idx = tape.push(op, [self.idx, other.idx], [da, db], val);
                Var {
                    tape: Some(tape),
                    idx,
                    val,
                }
            }
            None => Var::constant(val),
        }
    }
}

impl<'t, T: Scalar> Add for Var<'t, T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.binary(o, Op::Add, self.val + o.val, T::one(), T::one())
    }
}

impl<'t, T: Scalar> Sub for Var<'t, T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.binary(o, Op::Sub, self.val - o.val, T::one(), -T::one())
    }
}

impl<'t, T: Scalar> Mul for Var<'t, T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.binary(o, Op::Mul, self.val * o.val, o.val, self.val)
    }
}

impl<'t, T: Scalar> Div for Var<'t, T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.val / o.val;
        self.binary(o, Op::Div, q, T::one() / o.val, -q / o.val)
    }
}

impl<'t, T: Scalar> Neg for Var<'t, T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(Op::Neg, -self.val, -T::one())
    }
}

impl<'t, T: Scalar> Real for Var<'t, T> {
    type Base = T;

    fn cst(x: T) -> Self {
        Var::constant(x)
    }

    fn value(&self) -> T {
        self.val
    }

    fn relu(self) -> Self {
        if self.val > T::zero() {
            self.unary(Op::Relu, self.val, T::one())
        } else {
            self.unary(Op::Relu, T::zero(), T::zero())
        }
    }

    fn sigmoid(self) -> Self {
        let s = sigmoid(self.val);
        self.unary(Op::Sigmoid, s, s * (T::one() - s))
    }

    fn softplus(self) -> Self {
        self.unary(Op::Softplus, softplus(self.val), sigmoid(self.val))
    }

    fn rtanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(Op::Tanh, t, T::one() - t * t)
    }

    fn rsin(self) -> Self {
        self.unary(Op::Sin, self.val.sin(), self.val.cos())
    }

    fn rcos(self) -> Self {
        self.unary(Op::Cos, self.val.cos(), -self.val.sin())
    }

    fn rmin(self, o: Self) -> Self {
        if self.val <= o.val {
            self.binary(o, Op::Min, self.val, T::one(), T::zero())
        } else {
            self.binary(o, Op::Min, o.val, T::zero(), T::one())
        }
    }

    fn rmax(self, o: Self) -> Self {
        if self.val >= o.val {
            self.binary(o, Op::Max, self.val, T::one(), T::zero())
        } else {
            self.binary(o, Op::Max, o.val, T::zero(), T::one())
        }
    }
}

/// Parameter view that records a leaf for every read.
///
/// After the reverse sweep, [`RecordingParams::scatter`] adds each leaf's
/// adjoint into a gradient buffer indexed like the parameter vector.
pub struct RecordingParams<'t, 'v, T> {
    tape: &'t Tape<T>,
    values: &'v [T],
    reads: RefCell<Vec<(usize, u32)>>,
}

impl<'t, 'v, T: Scalar> RecordingParams<'t, 'v, T> {
    pub fn new(tape: &'t Tape<T>, values: &'v [T]) -> Self {
        Self {
            tape,
            values,
            reads: RefCell::new(Vec::new()),
        }
    }

    pub fn scatter(&self, adj: &Adjoints<T>, grad: &mut [T]) {
        for &(p, node) in self.reads.borrow().iter() {
            grad[p] += adj.by_index(node);
        }
    }
}

impl<'t, 'v, T: Scalar> ParamView<Var<'t, T>> for RecordingParams<'t, 'v, T> {
    fn param(&self, idx: usize) -> Var<'t, T> {
        let v = self.tape.leaf(self.values[idx]);
        self.reads.borrow_mut().push((idx, v.idx));
        v
    }
}
