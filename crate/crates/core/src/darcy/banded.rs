//! Banded Cholesky factorization for the SPD five-point systems produced by
//! the TPFA assembly.

use crate::error::DarcyError;

/// Lower band of a symmetric matrix: `band[i][k] = A[i][i - k]`, `k <= bw`.
pub(super) struct BandedSpd {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedSpd {
    pub(super) fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            band: vec![0.0; n * (bw + 1)],
        }
    }

    fn at(&self, i: usize, k: usize) -> usize {
        i * (self.bw + 1) + k
    }

    /// Adds `v` to `A[i][j]` for `j <= i`.
    pub(super) fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.bw);
        let idx = self.at(i, i - j);
        self.band[idx] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.band[self.at(i, i - j)]
    }

    /// In-place factorization `A = L L^T`.
    pub(super) fn factor(mut self) -> Result<BandedCholesky, DarcyError> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = self.get(i, j);
                for k in lo.max(j.saturating_sub(bw))..j {
                    s -= self.get(i, k) * self.get(j, k);
                }
                let idx = self.at(i, i - j);
                if i == j {
                    let scale = self.band[idx].abs().max(f64::MIN_POSITIVE);
                    if s <= 1e-12 * scale {
                        return Err(DarcyError::Singular(format!(
                            "non-positive pivot {s:e} at unknown {i}; check that some boundary is Dirichlet"
                        )));
                    }
                    self.band[idx] = s.sqrt();
                } else {
                    self.band[idx] = s / self.get(j, j);
                }
            }
        }
        Ok(BandedCholesky { l: self })
    }
}

pub(super) struct BandedCholesky {
    l: BandedSpd,
}

impl BandedCholesky {
    pub(super) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.l.n, self.l.bw);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l.get(i, k) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for r in (i + 1)..n.min(i + bw + 1) {
                s -= self.l.get(r, i) * y[r];
            }
            y[i] = s / self.l.get(i, i);
        }
        y
    }
}
