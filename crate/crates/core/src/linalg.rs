//! Dense square matrices and the cyclic Jacobi eigensolver.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Row-major `n x n` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::LengthMismatch { left: data.len(), right: n * n });
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::LengthMismatch { left: r.len(), right: n });
        }
        Ok(Self { n, data: rows.concat() })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum()).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.get(i, j) * self.get(i, j);
                }
            }
        }
        math::sqrt(s)
    }

    /// Largest absolute difference between `a_ij` and `a_ji`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`, with its
    /// largest-magnitude entry positive.
    pub vectors: SquareMatrix,
    pub sweeps: usize,
}

pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;
const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Sweeps over every upper off-diagonal pair and annihilates it with a plane
/// rotation until the off-diagonal Frobenius norm drops below
/// `1e-12 * max(1, ||C||_F)`.
pub fn eig_sym(c: &SquareMatrix) -> Result<SymEigen> {
    let n = c.dim();
    let scale = c.max_abs().max(1.0);
    let asym = c.asymmetry();
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let mut a = c.clone();
    // work on the exactly symmetrized input
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }
    let mut v = SquareMatrix::identity(n);
    let target = JACOBI_TOLERANCE * c.frobenius_norm().max(1.0);

    let mut sweeps = 0;
    while a.off_diagonal_norm() >= target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence(JACOBI_MAX_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a.get(y, y).total_cmp(&a.get(x, x)));
    let values = order.iter().map(|&k| a.get(k, k)).collect();
    let mut vectors = SquareMatrix::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        orient(&mut col);
        for (i, x) in col.into_iter().enumerate() {
            vectors.set(i, dst, x);
        }
    }
    Ok(SymEigen { values, vectors, sweeps })
}

/// Flips `v` so that its largest-magnitude entry (first one on ties) is positive.
pub fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn rotate(a: &mut SquareMatrix, v: &mut SquareMatrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    if apq == 0.0 {
        return;
    }
    let app = a.get(p, p);
    let aqq = a.get(q, q);
    let theta = (aqq - app) / (2.0 * apq);
    // smaller root of t^2 + 2 t theta - 1 = 0
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + math::hypot(theta, 1.0))
    };
    let c = 1.0 / math::hypot(t, 1.0);
    let s = t * c;
    let n = a.dim();

    a.set(p, p, app - t * apq);
    a.set(q, q, aqq + t * apq);
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);
    for r in 0..n {
        if r != p && r != q {
            let arp = a.get(r, p);
            let arq = a.get(r, q);
            let new_rp = c * arp - s * arq;
            let new_rq = s * arp + c * arq;
            a.set(r, p, new_rp);
            a.set(p, r, new_rp);
            a.set(r, q, new_rq);
            a.set(q, r, new_rq);
        }
    }
    for r in 0..n {
        let vrp = v.get(r, p);
        let vrq = v.get(r, q);
        v.set(r, p, c * vrp - s * vrq);
        v.set(r, q, s * vrp + c * vrq);
    }
}

/// `max_k ||C v_k - lambda_k v_k||_2`.
pub fn max_residual(c: &SquareMatrix, eig: &SymEigen) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..c.dim() {
        let vk = eig.vectors.column(k);
        let cv = c.mul_vec(&vk);
        let r: f64 = cv.iter().zip(&vk).map(|(a, b)| { let e = a - eig.values[k] * b; e * e }).sum();
        worst = worst.max(math::sqrt(r));
    }
    worst
}

/// `max |V^T V - I|`.
pub fn orthonormality_error(v: &SquareMatrix) -> f64 {
    let g = v.transpose().matmul(v);
    let mut worst: f64 = 0.0;
    for i in 0..g.dim() {
        for j in 0..g.dim() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g.get(i, j) - target).abs());
        }
    }
    worst
}
