//! Dense `P A P^T = L D L^T` factorization of symmetric indefinite matrices with
//! Bunch-Kaufman partial pivoting (1x1 and 2x2 diagonal blocks).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivots smaller than this fraction of `max |A_ij|` are treated as zero.
pub const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Block {
    One(f64),
    /// Symmetric block `[[a, b], [b, c]]`.
    Two(f64, f64, f64),
}

#[derive(Debug, Clone)]
pub struct BunchKaufman {
    /// Unit lower triangular factor.
    l: DMatrix<f64>,
    blocks: Vec<Block>,
    /// `(P A P^T)_{ij} = A_{perm[i], perm[j]}`.
    perm: Vec<usize>,
}

impl BunchKaufman {
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        assert!(a.is_square(), "factorization needs a square matrix");
        let alpha = (1.0 + 17f64.sqrt()) / 8.0;
        let scale = a.amax();
        let tol = PIVOT_TOL * scale.max(f64::MIN_POSITIVE);
        let mut w = a.clone();
        let mut l = DMatrix::<f64>::identity(n, n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut blocks = Vec::new();

        let swap = |w: &mut DMatrix<f64>,
                    l: &mut DMatrix<f64>,
                    perm: &mut Vec<usize>,
                    k: usize,
                    i: usize,
                    r: usize| {
            if i == r {
                return;
            }
            w.swap_rows(i, r);
            w.swap_columns(i, r);
            perm.swap(i, r);
            for c in 0..k {
                l.swap((i, c), (r, c));
            }
        };

        let mut k = 0;
        while k < n {
            let akk = w[(k, k)].abs();
            let (mut r, mut lambda) = (k, 0.0);
            for i in k + 1..n {
                if w[(i, k)].abs() > lambda {
                    lambda = w[(i, k)].abs();
                    r = i;
                }
            }
            if akk.max(lambda) <= tol {
                return Err(Error::SingularBordered(k));
            }
            let two_by_two = if akk >= alpha * lambda {
                false
            } else {
                let sigma = (k..n)
                    .filter(|&j| j != r)
                    .map(|j| w[(r, j)].abs())
                    .fold(0.0, f64::max);
                if akk * sigma >= alpha * lambda * lambda {
                    false
                } else if w[(r, r)].abs() >= alpha * sigma {
                    swap(&mut w, &mut l, &mut perm, k, k, r);
                    false
                } else {
                    swap(&mut w, &mut l, &mut perm, k, k + 1, r);
                    true
                }
            };

            if !two_by_two {
                let d = w[(k, k)];
                if d.abs() <= tol {
                    return Err(Error::SingularBordered(k));
                }
                for i in k + 1..n {
                    l[(i, k)] = w[(i, k)] / d;
                }
                for j in k + 1..n {
                    let wjk = w[(j, k)];
                    for i in j..n {
                        w[(i, j)] -= l[(i, k)] * wjk;
                        w[(j, i)] = w[(i, j)];
                    }
                }
                blocks.push(Block::One(d));
                k += 1;
            } else {
                let (a11, a21, a22) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
                let det = a11 * a22 - a21 * a21;
                if det.abs() <= tol * tol {
                    return Err(Error::SingularBordered(k));
                }
                for i in k + 2..n {
                    let (x1, x2) = (w[(i, k)], w[(i, k + 1)]);
                    l[(i, k)] = (a22 * x1 - a21 * x2) / det;
                    l[(i, k + 1)] = (a11 * x2 - a21 * x1) / det;
                }
                for j in k + 2..n {
                    let (y1, y2) = (w[(j, k)], w[(j, k + 1)]);
                    for i in j..n {
                        w[(i, j)] -= l[(i, k)] * y1 + l[(i, k + 1)] * y2;
                        w[(j, i)] = w[(i, j)];
                    }
                }
                blocks.push(Block::Two(a11, a21, a22));
                k += 2;
            }
        }
        Ok(BunchKaufman { l, blocks, perm })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Numbers of positive and negative eigenvalues of the factored matrix.
    pub fn inertia(&self) -> (usize, usize) {
        let mut pos = 0;
        let mut neg = 0;
        for b in &self.blocks {
            match *b {
                Block::One(d) if d > 0.0 => pos += 1,
                Block::One(_) => neg += 1,
                Block::Two(a, b, c) => {
                    let det = a * c - b * b;
                    if det < 0.0 {
                        pos += 1;
                        neg += 1;
                    } else if a + c > 0.0 {
                        pos += 2;
                    } else {
                        neg += 2;
                    }
                }
            }
        }
        (pos, neg)
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.len();
        let mut y = DVector::from_iterator(n, self.perm.iter().map(|&p| b[p]));
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for i in j + 1..n {
                    y[i] -= self.l[(i, j)] * yj;
                }
            }
        }
        let mut k = 0;
        for blk in &self.blocks {
            match *blk {
                Block::One(d) => {
                    y[k] /= d;
                    k += 1;
                }
                Block::Two(a, b, c) => {
                    let det = a * c - b * b;
                    let (u, v) = (y[k], y[k + 1]);
                    y[k] = (c * u - b * v) / det;
                    y[k + 1] = (a * v - b * u) / det;
                    k += 2;
                }
            }
        }
        for j in (0..n).rev() {
            let mut s = y[j];
            for i in j + 1..n {
                s -= self.l[(i, j)] * y[i];
            }
            y[j] = s;
        }
        let mut x = DVector::zeros(n);
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let cols: Vec<_> = b
            .column_iter()
            .map(|c| self.solve(&c.into_owned()))
            .collect();
        if cols.is_empty() {
            DMatrix::zeros(b.nrows(), 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    }
}
