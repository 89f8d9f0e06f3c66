//! Discrete Karhunen-Loève expansion.
//!
//! The covariance integral operator is discretized by Nyström quadrature
//! with uniform weights `w = hx * hy`, giving the symmetric eigenproblem
//! `(w R) v = lambda v`. Eigenfunctions are `phi = v / sqrt(w)`, which makes
//! them orthonormal under `<f, g> = w * sum(f * g)`.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::KleError;
use crate::grid::{Grid2D, ScalarField};

/// KLE coordinates, one standard-normal coefficient per retained mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector(Vec<f64>);

impl ThetaVector {
    pub fn new(values: Vec<f64>) -> Result<Self, KleError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KleError::Argument("theta has non-finite entries".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn unit(n: usize, k: usize) -> Self {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        Self(v)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl Deref for ThetaVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<ThetaVector> for Vec<f64> {
    fn from(t: ThetaVector) -> Self {
        t.0
    }
}

/// How many modes to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Modes(usize),
    /// Smallest `n` whose energy fraction reaches the threshold.
    Energy(f64),
}

#[derive(Debug, Clone)]
pub struct KleBasis {
    grid: Grid2D,
    spectrum: Vec<f64>,
    lambdas: Vec<f64>,
    phis: DMatrix<f64>,
    scaled: DMatrix<f64>,
    energy: f64,
}

impl KleBasis {
    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    /// Retained eigenvalues, descending.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Full discrete spectrum (all `N` eigenvalues), descending. Tiny
    /// negative roundoff values are clamped to zero.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// `N x n` matrix whose columns are the eigenfunctions at cell centers.
    pub fn phis(&self) -> &DMatrix<f64> {
        &self.phis
    }

    /// `N x n` matrix with entries `sqrt(lambda_j) * phi_j(cell)`.
    pub fn scaled_modes(&self) -> &DMatrix<f64> {
        &self.scaled
    }

    pub fn phi(&self, mode: usize) -> ScalarField {
        ScalarField::new(self.grid, self.phis.column(mode).iter().copied().collect())
            .expect("eigenfunction values are finite")
    }

    /// `Y(x) = sum_i sqrt(lambda_i) theta_i phi_i(x)`.
    pub fn synthesize(&self, theta: &[f64]) -> Result<ScalarField, KleError> {
        if theta.len() != self.n() {
            return Err(KleError::Argument(format!(
                "theta has length {}, basis has {} modes",
                theta.len(),
                self.n()
            )));
        }
        let values = combine(&self.scaled, theta);
        ScalarField::new(self.grid, values)
            .map_err(|e| KleError::Argument(format!("synthesized field invalid: {e}")))
    }
}

/// `M * x` accumulated column by column in a fixed order.
pub(crate) fn combine(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        for (o, &mij) in out.iter_mut().zip(m.column(j).iter()) {
            *o += mij * xj;
        }
    }
    out
}

pub fn energy_fraction(spectrum: &[f64], n: usize) -> Result<f64, KleError> {
    if spectrum.is_empty() {
        return Err(KleError::Argument("empty spectrum".into()));
    }
    if n > spectrum.len() {
        return Err(KleError::Argument(format!(
            "{n} modes requested from a spectrum of {}",
            spectrum.len()
        )));
    }
    let total: f64 = spectrum.iter().sum();
    if total <= 0.0 {
        return Err(KleError::Argument("spectrum has zero total energy".into()));
    }
    Ok(spectrum[..n].iter().sum::<f64>() / total)
}

/// Solves the discrete eigenproblem for the covariance `cov` assembled on `grid`.
pub fn solve_kle(
    cov: &DMatrix<f64>,
    grid: &Grid2D,
    truncation: Truncation,
) -> Result<KleBasis, KleError> {
    let big_n = grid.len();
    if cov.shape() != (big_n, big_n) {
        return Err(KleError::Argument(format!(
            "covariance is {:?}, grid has {big_n} cells",
            cov.shape()
        )));
    }
    let w = grid.cell_area();
    let eig = SymmetricEigen::new(cov * w);

    let mut order: Vec<usize> = (0..big_n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let spectrum: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();

    let n = match truncation {
        Truncation::Modes(n) => {
            if n == 0 || n > big_n {
                return Err(KleError::Argument(format!(
                    "mode count {n} must be in 1..={big_n}"
                )));
            }
            n
        }
        Truncation::Energy(threshold) => {
            if !(threshold > 0.0 && threshold <= 1.0) {
                return Err(KleError::Argument(format!(
                    "energy threshold {threshold} must be in (0, 1]"
                )));
            }
            let total: f64 = spectrum.iter().sum();
            let mut acc = 0.0;
            let mut found = None;
            for (k, &l) in spectrum.iter().enumerate() {
                acc += l;
                // Relative slack so that threshold 1.0 is reachable despite roundoff.
                if acc >= threshold * total * (1.0 - 1e-14) {
                    found = Some(k + 1);
                    break;
                }
            }
            found.ok_or(KleError::Energy {
                threshold,
                available: big_n,
            })?
        }
    };

    let lead = spectrum[0];
    if let Some(k) = (0..n).find(|&k| spectrum[k] <= 1e-12 * lead) {
        return Err(KleError::Truncation {
            index: k + 1,
            value: spectrum[k],
        });
    }

    let inv_sqrt_w = 1.0 / w.sqrt();
    let mut phis = DMatrix::zeros(big_n, n);
    for (col, &k) in order.iter().take(n).enumerate() {
        let v: DVector<f64> = eig.eigenvectors.column(k).into_owned();
        let mut pivot = 0;
        for r in 1..big_n {
            if v[r].abs() > v[pivot].abs() {
                pivot = r;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..big_n {
            phis[(r, col)] = sign * v[r] * inv_sqrt_w;
        }
    }

    let lambdas = spectrum[..n].to_vec();
    let mut scaled = phis.clone();
    for (j, &l) in lambdas.iter().enumerate() {
        scaled.column_mut(j).scale_mut(l.sqrt());
    }
    let energy = energy_fraction(&spectrum, n)?;

    Ok(KleBasis {
        grid: *grid,
        spectrum,
        lambdas,
        phis,
        scaled,
        energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{assemble_covariance, kernel, KernelParams};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn reference_basis(n: usize) -> KleBasis {
        let g = Grid2D::new(16, 16).unwrap();
        let cov = assemble_covariance(&g, &KernelParams::default());
        solve_kle(&cov, &g, Truncation::Modes(n)).unwrap()
    }

    #[test]
    fn scalar_problem() {
        let g = Grid2D::new(1, 1).unwrap();
        let cov = assemble_covariance(&g, &KernelParams::default());
        let b = solve_kle(&cov, &g, Truncation::Modes(1)).unwrap();
        assert_relative_eq!(b.lambdas()[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(b.phis()[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn reference_energy_at_twenty_modes() {
        let b = reference_basis(20);
        assert!(b.energy() >= 0.95, "energy {}", b.energy());
    }

    #[test]
    fn trace_identity() {
        let b = reference_basis(1);
        let total: f64 = b.spectrum().iter().sum();
        // trace(w R) = w * N * sigma2 = sigma2.
        assert_relative_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn energy_fraction_examples() {
        assert_eq!(energy_fraction(&[3.0, 1.0], 1).unwrap(), 0.75);
        assert_eq!(energy_fraction(&[3.0, 1.0], 2).unwrap(), 1.0);
        assert_eq!(energy_fraction(&[3.0, 1.0], 0).unwrap(), 0.0);
        assert!(energy_fraction(&[], 0).is_err());
    }

    #[test]
    fn rejects_bad_mode_counts() {
        let g = Grid2D::new(2, 2).unwrap();
        let cov = assemble_covariance(&g, &KernelParams::default());
        assert!(matches!(
            solve_kle(&cov, &g, Truncation::Modes(5)),
            Err(KleError::Argument(_))
        ));
        assert!(matches!(
            solve_kle(&cov, &g, Truncation::Modes(0)),
            Err(KleError::Argument(_))
        ));
    }

    #[test]
    fn tiny_eigenvalues_are_a_truncation_error() {
        let g = Grid2D::new(16, 16).unwrap();
        let cov = assemble_covariance(&g, &KernelParams::default());
        assert!(matches!(
            solve_kle(&cov, &g, Truncation::Modes(256)),
            Err(KleError::Truncation { .. })
        ));
    }

    #[test]
    fn energy_mode_picks_smallest_n() {
        let g = Grid2D::new(16, 16).unwrap();
        let cov = assemble_covariance(&g, &KernelParams::default());
        let b = solve_kle(&cov, &g, Truncation::Energy(0.95)).unwrap();
        assert!(b.energy() >= 0.95);
        let n = b.n();
        assert!(energy_fraction(b.spectrum(), n - 1).unwrap() < 0.95);
    }

    #[test]
    fn orthonormal_under_quadrature() {
        let b = reference_basis(20);
        let w = b.grid().cell_area();
        let gram = b.phis().transpose() * b.phis() * w;
        let eye = DMatrix::<f64>::identity(20, 20);
        assert!((gram - eye).abs().max() < 1e-8);
    }

    #[test]
    fn eigenvalues_positive_descending() {
        let b = reference_basis(20);
        assert!(b.lambdas().iter().all(|&l| l > 0.0));
        assert!(b.lambdas().windows(2).all(|w| w[0] >= w[1]));
        assert!(b.spectrum().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn covariance_reconstruction_error_bound() {
        let b = reference_basis(20);
        let g = b.grid();
        let p = KernelParams::default();
        let bound = (1.0 - b.energy()) * p.sigma2 + 1e-6;
        let phis = b.phis();
        for a in 0..g.len() {
            for c in 0..g.len() {
                let approx: f64 = (0..b.n())
                    .map(|k| b.lambdas()[k] * phis[(a, k)] * phis[(c, k)])
                    .sum();
                let exact = kernel(g.center(a), g.center(c), &p);
                assert!((approx - exact).abs() <= bound, "cells {a},{c}: error {:e} > {bound:e}", (approx - exact).abs());
            }
        }
    }

    #[test]
    fn mean_diagonal_error_equals_discarded_energy() {
        let b = reference_basis(20);
        let g = b.grid();
        let p = KernelParams::default();
        let phis = b.phis();
        let mean_err: f64 = (0..g.len())
            .map(|a| p.sigma2 - (0..b.n()).map(|k| b.lambdas()[k] * phis[(a, k)].powi(2)).sum::<f64>())
            .sum::<f64>()
            / g.len() as f64;
        let discarded: f64 = b.spectrum()[b.n()..].iter().sum();
        assert!((mean_err - discarded).abs() < 1e-12, "{mean_err} vs {discarded}");
    }

    #[test]
    fn deterministic_basis() {
        let a = reference_basis(20);
        let b = reference_basis(20);
        assert_eq!(a.phis(), b.phis());
        assert_eq!(a.lambdas(), b.lambdas());
    }

    #[test]
    fn synthesis_examples() {
        let b = reference_basis(20);
        let zero = b.synthesize(&ThetaVector::zeros(20)).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let y1 = b.synthesize(&ThetaVector::unit(20, 0)).unwrap();
        let s = b.lambdas()[0].sqrt();
        for (c, &v) in y1.values().iter().enumerate() {
            assert_relative_eq!(v, s * b.phis()[(c, 0)], epsilon = 1e-14);
        }
        assert!(b.synthesize(&[0.0; 19]).is_err());
    }

    #[test]
    fn synthesis_is_linear() {
        let b = reference_basis(20);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ta: Vec<f64> = (0..20).map(|_| StandardNormal.sample(&mut rng)).collect();
        let tb: Vec<f64> = (0..20).map(|_| StandardNormal.sample(&mut rng)).collect();
        let sum: Vec<f64> = ta.iter().zip(&tb).map(|(a, b)| a + b).collect();
        let ya = b.synthesize(&ta).unwrap();
        let yb = b.synthesize(&tb).unwrap();
        let ys = b.synthesize(&sum).unwrap();
        for c in 0..256 {
            assert!((ys.values()[c] - ya.values()[c] - yb.values()[c]).abs() <= 1e-12);
        }
    }

    #[test]
    fn empirical_variance_matches_model() {
        let b = reference_basis(20);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 10_000;
        let mut sum = vec![0.0; 256];
        let mut sum2 = vec![0.0; 256];
        for _ in 0..draws {
            let t: Vec<f64> = (0..20).map(|_| StandardNormal.sample(&mut rng)).collect();
            let y = b.synthesize(&t).unwrap();
            for (c, &v) in y.values().iter().enumerate() {
                sum[c] += v;
                sum2[c] += v * v;
            }
        }
        for c in 0..256 {
            let mean = sum[c] / draws as f64;
            let var = sum2[c] / draws as f64 - mean * mean;
            let model: f64 = (0..20)
                .map(|k| b.lambdas()[k] * b.phis()[(c, k)].powi(2))
                .sum();
            assert!((var - model).abs() <= 0.1 * model, "cell {c}: {var} vs {model}");
        }
    }
}
