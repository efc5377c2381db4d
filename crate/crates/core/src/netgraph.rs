//! Network topology, incidence matrix, Laplacians and the small dense linear
//! algebra used throughout the crate.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Transmission line between two buses (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line<T> {
    pub from: usize,
    pub to: usize,
    /// Susceptance, per unit.
    pub b: T,
}

/// Immutable power network: connected graph plus physical parameters.
///
/// Frequencies are deviations in Hz, so `damping` is in p.u./Hz and
/// `inertia` in p.u.·s/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerNetwork<T> {
    n: usize,
    lines: Vec<Line<T>>,
    inertia: Vec<T>,
    damping: Vec<T>,
    p_nom: Vec<T>,
}

impl<T: Scalar> PowerNetwork<T> {
    pub fn new(
        lines: Vec<Line<T>>,
        inertia: Vec<T>,
        damping: Vec<T>,
        p_nom: Vec<T>,
    ) -> Result<Self> {
        let n = inertia.len();
        if n == 0 {
            return Err(Error::InvalidNetwork("network has no buses".into()));
        }
        if damping.len() != n || p_nom.len() != n {
            return Err(Error::Dimension(format!(
                "inertia has {n} entries, damping {}, p_nom {}",
                damping.len(),
                p_nom.len()
            )));
        }
        for i in 0..n {
            if !(inertia[i] > T::zero()) || !inertia[i].is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "bus {}: inertia M must be positive, got {}",
                    i + 1,
                    inertia[i]
                )));
            }
            if !(damping[i] > T::zero()) || !damping[i].is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "bus {}: damping D must be positive, got {}",
                    i + 1,
                    damping[i]
                )));
            }
            if !p_nom[i].is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "bus {}: p_nom is not finite",
                    i + 1
                )));
            }
        }
        let mut seen = HashSet::new();
        for (k, l) in lines.iter().enumerate() {
            if l.from >= n || l.to >= n {
                return Err(Error::InvalidNetwork(format!(
                    "edge {}: endpoint out of range ({} - {})",
                    k + 1,
                    l.from + 1,
                    l.to + 1
                )));
            }
            if l.from == l.to {
                return Err(Error::InvalidNetwork(format!(
                    "edge {}: self-loop at bus {}",
                    k + 1,
                    l.from + 1
                )));
            }
            if !(l.b > T::zero()) || !l.b.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "edge {} ({} - {}): susceptance must be positive, got {}",
                    k + 1,
                    l.from + 1,
                    l.to + 1,
                    l.b
                )));
            }
            let key = (l.from.min(l.to), l.from.max(l.to));
            if !seen.insert(key) {
                return Err(Error::InvalidNetwork(format!(
                    "edge {}: duplicate line between buses {} and {}",
                    k + 1,
                    key.0 + 1,
                    key.1 + 1
                )));
            }
        }
        let net = Self {
            n,
            lines,
            inertia,
            damping,
            p_nom,
        };
        net.check_connected()?;
        Ok(net)
    }

    fn check_connected(&self) -> Result<()> {
        let mut adj = vec![Vec::new(); self.n];
        for l in &self.lines {
            adj[l.from].push(l.to);
            adj[l.to].push(l.from);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        let unreachable: Vec<usize> = (0..self.n).filter(|&i| !seen[i]).map(|i| i + 1).collect();
        if unreachable.is_empty() {
            Ok(())
        } else {
            Err(Error::Disconnected { unreachable })
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.lines.len()
    }

    pub fn lines(&self) -> &[Line<T>] {
        &self.lines
    }

    pub fn inertia(&self) -> &[T] {
        &self.inertia
    }

    pub fn damping(&self) -> &[T] {
        &self.damping
    }

    pub fn p_nom(&self) -> &[T] {
        &self.p_nom
    }

    /// Same topology and machines with a different injection profile.
    pub fn with_injections(&self, p: Vec<T>) -> Result<Self> {
        Self::new(self.lines.clone(), self.inertia.clone(), self.damping.clone(), p)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }

    /// Solves `A x = rhs` by Gaussian elimination with partial pivoting.
    /// Returns `None` when a pivot vanishes.
    pub fn solve(&self, rhs: &[T]) -> Option<Vec<T>> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(rhs.len(), self.rows);
        let n = self.rows;
        let mut a = self.data.clone();
        let mut x = rhs.to_vec();
        let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tiny = scale * T::epsilon() * T::of(n as f64);
        for col in 0..n {
            let (piv, pmax) = (col..n)
                .map(|r| (r, a[r * n + col].abs()))
                .fold((col, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > tiny) {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                x.swap(col, piv);
            }
            let d = a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                if f == T::zero() {
                    continue;
                }
                for j in col..n {
                    let v = a[col * n + j];
                    a[r * n + j] -= f * v;
                }
                let v = x[col];
                x[r] -= f * v;
            }
        }
        for col in (0..n).rev() {
            let mut s = x[col];
            for j in col + 1..n {
                s -= a[col * n + j] * x[j];
            }
            x[col] = s / a[col * n + col];
        }
        Some(x)
    }
}

/// Incidence structure of a network under the fixed orientation
/// source = smaller bus index.
#[derive(Debug, Clone)]
pub struct Incidence<T> {
    /// `(source, target)` per edge.
    ends: Vec<(usize, usize)>,
    /// Signed n×m incidence matrix.
    b: DenseMatrix<T>,
    /// Diagonal of `Yb`.
    yb: Vec<T>,
    /// Weighted Laplacian `B Yb Bᵀ`.
    laplacian: DenseMatrix<T>,
    /// Per-bus 1-norm of the rows of the unweighted Laplacian.
    row_l1: Vec<T>,
    /// Per bus: incident edges as `(edge, sign)` with sign = `B[i, k]`.
    incident: Vec<Vec<(usize, T)>>,
}

/// Builds the incidence matrix and Laplacians.
pub fn build_incidence<T: Scalar>(net: &PowerNetwork<T>) -> Result<Incidence<T>> {
    net.check_connected()?;
    let n = net.n();
    let m = net.m();
    let mut b = DenseMatrix::zeros(n, m);
    let mut laplacian = DenseMatrix::zeros(n, n);
    let mut ends = Vec::with_capacity(m);
    let mut yb = Vec::with_capacity(m);
    let mut incident = vec![Vec::new(); n];
    let mut degree = vec![0usize; n];
    for (k, l) in net.lines().iter().enumerate() {
        let (s, t) = (l.from.min(l.to), l.from.max(l.to));
        b.set(s, k, T::one());
        b.set(t, k, -T::one());
        ends.push((s, t));
        yb.push(l.b);
        incident[s].push((k, T::one()));
        incident[t].push((k, -T::one()));
        laplacian.add_at(s, s, l.b);
        laplacian.add_at(t, t, l.b);
        laplacian.add_at(s, t, -l.b);
        laplacian.add_at(t, s, -l.b);
        degree[s] += 1;
        degree[t] += 1;
    }
    let row_l1 = degree.iter().map(|&d| T::of(2.0 * d as f64)).collect();
    Ok(Incidence {
        ends,
        b,
        yb,
        laplacian,
        row_l1,
        incident,
    })
}

impl<T: Scalar> Incidence<T> {
    pub fn n(&self) -> usize {
        self.incident.len()
    }

    pub fn m(&self) -> usize {
        self.ends.len()
    }

    pub fn ends(&self) -> &[(usize, usize)] {
        &self.ends
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.b
    }

    pub fn yb(&self) -> &[T] {
        &self.yb
    }

    pub fn laplacian(&self) -> &DenseMatrix<T> {
        &self.laplacian
    }

    pub fn row_l1(&self) -> &[T] {
        &self.row_l1
    }

    pub fn incident(&self, bus: usize) -> &[(usize, T)] {
        &self.incident[bus]
    }

    /// Unweighted Laplacian of the full graph.
    pub fn unweighted_laplacian(&self) -> DenseMatrix<T> {
        subgraph_laplacian(self, &vec![true; self.n()])
    }

    /// `Bᵀ x` (per edge: source minus target).
    pub fn bt_apply<R: Real<Base = T>>(&self, x: &[R]) -> Vec<R> {
        self.ends.iter().map(|&(s, t)| x[s] - x[t]).collect()
    }

    /// `B y` for an edge vector `y`.
    pub fn b_apply<R: Real<Base = T>>(&self, y: &[R]) -> Vec<R> {
        let mut out = vec![R::rzero(); self.n()];
        for (k, &(s, t)) in self.ends.iter().enumerate() {
            out[s] = out[s] + y[k];
            out[t] = out[t] - y[k];
        }
        out
    }

    /// `[B Yb]_i sin λ`: net power flowing out of bus `i` over its lines.
    pub fn line_outflow<R: Real<Base = T>>(&self, bus: usize, lambda: &[R]) -> R {
        let mut acc = R::rzero();
        for &(k, sign) in &self.incident[bus] {
            acc = acc + R::cst(sign * self.yb[k]) * lambda[k].rsin();
        }
        acc
    }

    /// `B Yb sin λ` for all buses.
    pub fn flows<R: Real<Base = T>>(&self, lambda: &[R]) -> Vec<R> {
        let y: Vec<R> = lambda
            .iter()
            .zip(&self.yb)
            .map(|(&l, &b)| R::cst(b) * l.rsin())
            .collect();
        self.b_apply(&y)
    }

    /// Laplacian `B diag(w) Bᵀ` with per-edge weights.
    pub fn weighted_laplacian(&self, w: &[T]) -> DenseMatrix<T> {
        let n = self.n();
        let mut l = DenseMatrix::zeros(n, n);
        for (k, &(s, t)) in self.ends.iter().enumerate() {
            l.add_at(s, s, w[k]);
            l.add_at(t, t, w[k]);
            l.add_at(s, t, -w[k]);
            l.add_at(t, s, -w[k]);
        }
        l
    }

    /// Edges whose both endpoints are active.
    pub fn active_edges<'a>(&'a self, active: &'a [bool]) -> impl Iterator<Item = (usize, usize)> + 'a {
        self.ends
            .iter()
            .copied()
            .filter(move |&(s, t)| active[s] && active[t])
    }
}

/// Unweighted Laplacian of the subgraph keeping only edges between active buses.
pub fn subgraph_laplacian<T: Scalar>(inc: &Incidence<T>, active: &[bool]) -> DenseMatrix<T> {
    assert_eq!(active.len(), inc.n(), "mask length must equal bus count");
    let n = inc.n();
    let mut l = DenseMatrix::zeros(n, n);
    for (s, t) in inc.active_edges(active) {
        l.add_at(s, s, T::one());
        l.add_at(t, t, T::one());
        l.add_at(s, t, -T::one());
        l.add_at(t, s, -T::one());
    }
    l
}

/// Solves `L y = v - mean(v)` with `1ᵀ y = 0` for the Laplacian of a
/// connected graph, by grounding the last bus and re-centering.
pub fn solve_grounded<T: Scalar>(l: &DenseMatrix<T>, v: &[T]) -> Option<Vec<T>> {
    let n = l.rows();
    assert_eq!(v.len(), n);
    if n == 1 {
        return Some(vec![T::zero()]);
    }
    let mean = v.iter().copied().sum::<T>() / T::of(n as f64);
    let r = n - 1;
    let mut reduced = DenseMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            reduced.set(i, j, l.get(i, j));
        }
    }
    let rhs: Vec<T> = v[..r].iter().map(|&x| x - mean).collect();
    let mut y = reduced.solve(&rhs)?;
    y.push(T::zero());
    let ym = y.iter().copied().sum::<T>() / T::of(n as f64);
    for x in &mut y {
        *x -= ym;
    }
    Some(y)
}

/// `L† v` for a connected-graph Laplacian.
pub fn pseudo_inverse_apply<T: Scalar>(l: &DenseMatrix<T>, v: &[T]) -> Vec<T> {
    solve_grounded(l, v).expect("Laplacian of a connected graph has rank n-1")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> PowerNetwork<f64> {
        PowerNetwork::new(
            vec![Line { from: 0, to: 1, b: 1.0 }, Line { from: 1, to: 2, b: 1.0 }],
            vec![1.0; 3],
            vec![1.0; 3],
            vec![0.0; 3],
        )
        .unwrap()
    }

    #[test]
    fn two_bus_incidence() {
        let net = PowerNetwork::new(vec![Line { from: 1, to: 0, b: 1.0 }], vec![1.0; 2], vec![1.0; 2], vec![0.0; 2])
            .unwrap();
        let inc = build_incidence(&net).unwrap();
        assert_eq!(inc.matrix(), &DenseMatrix::from_rows(&[vec![1.0], vec![-1.0]]));
        assert_eq!(
            inc.laplacian(),
            &DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]])
        );
    }

    #[test]
    fn path_row_l1() {
        let inc = build_incidence(&path3()).unwrap();
        assert_eq!(inc.row_l1(), &[2.0, 4.0, 2.0]);
    }

    #[test]
    fn subgraph_examples() {
        let inc = build_incidence(&path3()).unwrap();
        let l = subgraph_laplacian(&inc, &[true, true, false]);
        assert_eq!(
            l,
            DenseMatrix::from_rows(&[vec![1.0, -1.0, 0.0], vec![-1.0, 1.0, 0.0], vec![0.0; 3]])
        );
        let l = subgraph_laplacian(&inc, &[true; 3]);
        assert_eq!(
            l,
            DenseMatrix::from_rows(&[
                vec![1.0, -1.0, 0.0],
                vec![-1.0, 2.0, -1.0],
                vec![0.0, -1.0, 1.0]
            ])
        );
        assert_eq!(subgraph_laplacian(&inc, &[false; 3]), DenseMatrix::zeros(3, 3));
    }

    #[test]
    fn pseudo_inverse_two_bus() {
        let l = DenseMatrix::<f64>::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let y = pseudo_inverse_apply(&l, &[0.5, -0.5]);
        assert!((y[0] - 0.25).abs() < 1e-15 && (y[1] + 0.25).abs() < 1e-15);
        let z = pseudo_inverse_apply(&l, &[1.0, 1.0]);
        assert!(z.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn rejects_invalid_networks() {
        let err = PowerNetwork::new(
            vec![Line { from: 0, to: 1, b: 1.0 }],
            vec![1.0; 3],
            vec![1.0; 3],
            vec![0.0; 3],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Disconnected { ref unreachable } if unreachable == &vec![3]));
        assert!(PowerNetwork::new(vec![Line { from: 0, to: 0, b: 1.0 }], vec![1.0], vec![1.0], vec![0.0]).is_err());
        assert!(PowerNetwork::new(
            vec![Line { from: 0, to: 1, b: 1.0 }, Line { from: 1, to: 0, b: 2.0 }],
            vec![1.0; 2],
            vec![1.0; 2],
            vec![0.0; 2]
        )
        .is_err());
        assert!(PowerNetwork::new(vec![Line { from: 0, to: 1, b: 1.0 }], vec![1.0, 0.0], vec![1.0; 2], vec![0.0; 2]).is_err());
        assert!(PowerNetwork::new(vec![Line { from: 0, to: 1, b: -1.0 }], vec![1.0; 2], vec![1.0; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn dense_solve_with_pivoting() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]);
        let x = a.solve(&[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert!(DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).solve(&[1.0, 1.0]).is_none());
    }
}
