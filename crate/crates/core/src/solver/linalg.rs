//! Dense symmetric systems for the Newton step.

use std::ops::{Index, IndexMut};

use crate::ops::OpCounter;

/// Square row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    fn add_diagonal(&mut self, eps: f64) {
        for i in 0..self.n {
            self[(i, i)] += eps;
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    /// Factors `a = L L^T`, reading only the lower triangle. Returns `None`
    /// when a pivot is not strictly positive.
    pub fn factor(a: &DenseMatrix, ops: &mut OpCounter) -> Option<Self> {
        let n = a.dim();
        let mut l = DenseMatrix::zeros(n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            ops.add(2 * j as u64 + 2);
            if !(d > 0.0) {
                return None;
            }
            let pivot = d.sqrt();
            l[(j, j)] = pivot;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / pivot;
            }
            ops.add_each(n - j - 1, 2 * j as u64 + 1);
        }
        Some(Self { l })
    }

    /// Solves `L L^T x = b` by forward then backward substitution.
    pub fn solve(&self, b: &[f64], ops: &mut OpCounter) -> Vec<f64> {
        let n = self.l.dim();
        let l = &self.l;
        let mut z = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                z[i] -= l[(i, k)] * z[k];
            }
            z[i] /= l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                z[i] -= l[(k, i)] * z[k];
            }
            z[i] /= l[(i, i)];
        }
        ops.add(2 * (n * n) as u64);
        z
    }
}

/// Solution of `H delta = g` for the Newton step.
#[derive(Clone, Debug)]
pub struct NewtonDirection {
    pub delta: Vec<f64>,
    /// Diagonal shift that had to be added to make `H` factorizable.
    pub shift: f64,
}

/// Solves `H delta = g` by Cholesky. If `H` is numerically not positive
/// definite, `eps I` is added with `eps = 1e-8 trace(H) / dim`, growing
/// a hundredfold per retry. Returns `None` if every retry fails.
pub fn newton_direction(
    h: &DenseMatrix,
    g: &[f64],
    ops: &mut OpCounter,
) -> Option<NewtonDirection> {
    if let Some(ch) = Cholesky::factor(h, ops) {
        return Some(NewtonDirection {
            delta: ch.solve(g, ops),
            shift: 0.0,
        });
    }
    let n = h.dim().max(1) as f64;
    let mut eps = (1e-8 * h.trace() / n)
        .max(1e-12 * h.max_abs())
        .max(f64::MIN_POSITIVE);
    for _ in 0..10 {
        let mut shifted = h.clone();
        shifted.add_diagonal(eps);
        if let Some(ch) = Cholesky::factor(&shifted, ops) {
            return Some(NewtonDirection {
                delta: ch.solve(g, ops),
                shift: eps,
            });
        }
        eps *= 100.0;
    }
    None
}
