//! Banded LU without pivoting, for the diagonally dominant Crank–Nicolson
//! matrices. Storage is row-major with `2p + 1` diagonals per row.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    p: usize,
    band: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, p: usize) -> Self {
        BandedMatrix {
            n,
            p,
            band: vec![0.0; n * (2 * p + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.p);
        i * (2 * self.p + 1) + (j + self.p - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.p {
            0.0
        } else {
            self.band[self.slot(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j);
        self.band[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.p);
                let hi = (i + self.p + 1).min(self.n);
                (lo..hi).map(|j| self.band[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Doolittle factorisation in place. Fails on a vanishing pivot and
    /// reports its row.
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, p, w) = (self.n, self.p, 2 * self.p + 1);
        for k in 0..n {
            let pivot = self.band[k * w + p];
            if pivot.abs() < 1e-300 || !pivot.is_finite() {
                return Err(Error::SolveBreakdown { step: 0, row: k });
            }
            let end = (k + p + 1).min(n);
            let (head, tail) = self.band.split_at_mut((k + 1) * w);
            let urow = &head[k * w + p + 1..k * w + p + (end - k)];
            for i in k + 1..end {
                let row = &mut tail[(i - k - 1) * w..(i - k) * w];
                let lik = row[k + p - i] / pivot;
                row[k + p - i] = lik;
                if lik == 0.0 {
                    continue;
                }
                // entries j = k+1 .. end of row i and of the pivot row
                let dst = &mut row[k + 1 + p - i..end + p - i];
                for (d, u) in dst.iter_mut().zip(urow) {
                    *d -= lik * u;
                }
            }
        }
        Ok(BandedLu { m: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
}

impl BandedLu {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, p, w) = (self.m.n, self.m.p, 2 * self.m.p + 1);
        let b = &self.m.band;
        for i in 0..n {
            let lo = i.saturating_sub(p);
            let mut acc = x[i];
            for j in lo..i {
                acc -= b[i * w + (j + p - i)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + p + 1).min(n);
            let mut acc = x[i];
            for j in i + 1..hi {
                acc -= b[i * w + (j + p - i)] * x[j];
            }
            x[i] = acc / b[i * w + p];
        }
    }
}
