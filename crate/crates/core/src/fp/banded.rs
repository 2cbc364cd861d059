use crate::error::{Error, Result};

/// Square band matrix with equal lower and upper bandwidth, factorized in
/// place by Gaussian elimination without pivoting.
///
/// Without pivoting the factorization is only safe for matrices that are
/// diagonally dominant by rows or columns, which is what the implicit
/// flux-form operators produce.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    b: usize,
    data: Vec<f64>,
    factored: bool,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            b: bandwidth,
            data: vec![0.0; n * (2 * bandwidth + 1)],
            factored: false,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.b
    }

    fn at(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.b, "({i},{j}) outside the band");
        i * (2 * self.b + 1) + j + self.b - i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.b {
            0.0
        } else {
            self.data[self.at(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.at(i, j);
        self.data[k] += v;
    }

    /// y = A x. Only valid before factorization.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        assert!(!self.factored, "product with a factorized matrix");
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.b);
                let hi = (i + self.b + 1).min(self.n);
                (lo..hi).map(|j| self.data[self.at(i, j)] * x[j]).sum()
            })
            .collect()
    }

    pub fn factorize(&mut self) -> Result<()> {
        let (n, b) = (self.n, self.b);
        for k in 0..n {
            let pivot = self.data[self.at(k, k)];
            if !(pivot.abs() > 0.0) || !pivot.is_finite() {
                return Err(Error::NoConvergence {
                    iterations: k,
                    residual: pivot,
                });
            }
            let hi = (k + b + 1).min(n);
            for i in k + 1..hi {
                let ik = self.at(i, k);
                let l = self.data[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                for j in k + 1..hi {
                    let kj = self.data[self.at(k, j)];
                    let ij = self.at(i, j);
                    self.data[ij] -= l * kj;
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves A x = rhs in place. Requires [`BandedMatrix::factorize`].
    pub fn solve(&self, rhs: &mut [f64]) {
        assert!(self.factored, "solve before factorize");
        let (n, b) = (self.n, self.b);
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let mut s = rhs[i];
            for j in lo..i {
                s -= self.data[self.at(i, j)] * rhs[j];
            }
            rhs[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + b + 1).min(n);
            let mut s = rhs[i];
            for j in i + 1..hi {
                s -= self.data[self.at(i, j)] * rhs[j];
            }
            rhs[i] = s / self.data[self.at(i, i)];
        }
    }
}
