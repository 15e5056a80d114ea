//! Small linear-algebra kernels.
//!
//! Every system the solvers build is (after row scaling) diagonally dominant:
//! generator rows restricted to a domain, identity rows for fixed values, or
//! transposes of those. Gaussian elimination without pivoting is stable for
//! such matrices and preserves the band, so a single banded LU covers both the
//! tridiagonal grid models (thousands of states) and small dense chains.

use crate::error::{Error, Result};

/// Square matrix stored by diagonals, `lower` sub- and `upper` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        let lower = lower.min(n.saturating_sub(1));
        let upper = upper.min(n.saturating_sub(1));
        let width = lower + upper + 1;
        Self {
            n,
            lower,
            upper,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.lower >= i && j <= i + self.upper, "({i},{j}) outside band");
        i * self.width + (j + self.lower - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.lower < i || j > i + self.upper {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// Zeroes row `i` and puts `diag` on its diagonal.
    pub fn set_identity_row(&mut self, i: usize, diag: f64) {
        let start = i * self.width;
        self.data[start..start + self.width].fill(0.0);
        self.set(i, i, diag);
    }

    /// In-place LU factorization without pivoting.
    pub fn factor(mut self, context: &str) -> Result<BandedLu> {
        let n = self.n;
        for k in 0..n {
            let piv = self.data[self.idx(k, k)];
            let mut scale = 0.0f64;
            for j in k.saturating_sub(self.lower)..=(k + self.upper).min(n - 1) {
                scale = scale.max(self.get(k, j).abs());
            }
            if !piv.is_finite() || piv.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) || piv == 0.0 {
                return Err(Error::Singular(format!("{context} (pivot {piv:e} at row {k})")));
            }
            let jmax = (k + self.upper).min(n - 1);
            for i in (k + 1)..=(k + self.lower).min(n - 1) {
                let ik = self.idx(i, k);
                let l = self.data[ik] / piv;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                for j in (k + 1)..=jmax {
                    let kj = self.data[self.idx(k, j)];
                    if kj != 0.0 {
                        let ij = self.idx(i, j);
                        self.data[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(BandedLu { m: self })
    }
}

/// Factored banded matrix.
#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
}

impl BandedLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(m.lower)..i {
                s -= m.data[m.idx(i, k)] * b[k];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in (i + 1)..=(i + m.upper).min(n - 1) {
                s -= m.data[m.idx(i, j)] * b[j];
            }
            b[i] = s / m.data[m.idx(i, i)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Dense solve with partial pivoting, for the small Schur systems and oracles.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, a[i][k].abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let scale = a[p].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pmax <= 1e-13 * scale || pmax == 0.0 || !pmax.is_finite() {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in (k + 1)..n {
            let l = a[i][k] / a[k][k];
            if l == 0.0 {
                continue;
            }
            for j in k..n {
                a[i][j] -= l * a[k][j];
            }
            b[i] -= l * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b.first().map_or(0, |r| r.len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for (k, aik) in a[i].iter().enumerate() {
            if *aik == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve_matches_dense() {
        let n = 6;
        let mut m = BandedMatrix::zeros(n, 1, 1);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            m.set(i, i, 4.0 + i as f64);
            dense[i][i] = 4.0 + i as f64;
            if i > 0 {
                m.set(i, i - 1, -1.0);
                dense[i][i - 1] = -1.0;
            }
            if i + 1 < n {
                m.set(i, i + 1, -2.0);
                dense[i][i + 1] = -2.0;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
        let x = m.factor("test").unwrap().solve(&b);
        let y = solve_dense(dense, b).unwrap();
        assert!(sup_diff(&x, &y) < 1e-12);
    }

    #[test]
    fn singular_is_reported() {
        let mut m = BandedMatrix::zeros(2, 1, 1);
        m.set(0, 0, 1.0);
        m.set(0, 1, -1.0);
        m.set(1, 0, -1.0);
        m.set(1, 1, 1.0);
        assert!(matches!(m.factor("pair"), Err(Error::Singular(_))));
    }
}
