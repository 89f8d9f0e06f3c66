//! Anisotropic squared-exponential covariance kernel
//! `R(a, b) = sigma2 * exp(-(ax - bx)^2 / (2 lx^2) - (ay - by)^2 / (2 ly^2))`
//! and its collocation matrix over grid cell centers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::KleError;
use crate::grid::Grid2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub sigma2: f64,
    pub lx: f64,
    pub ly: f64,
}

impl KernelParams {
    pub fn new(sigma2: f64, lx: f64, ly: f64) -> Result<Self, KleError> {
        let p = Self { sigma2, lx, ly };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), KleError> {
        for (name, v) in [("sigma2", self.sigma2), ("lx", self.lx), ("ly", self.ly)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(KleError::Argument(format!(
                    "kernel parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            sigma2: 1.0,
            lx: 0.4,
            ly: 0.8,
        }
    }
}

pub fn kernel(a: [f64; 2], b: [f64; 2], params: &KernelParams) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    params.sigma2
        * (-(dx * dx) / (2.0 * params.lx * params.lx) - (dy * dy) / (2.0 * params.ly * params.ly))
            .exp()
}

/// Dense `N x N` covariance between all cell centers, `N = nx * ny`.
/// Each unordered pair is evaluated once so the result is exactly symmetric.
pub fn assemble_covariance(grid: &Grid2D, params: &KernelParams) -> DMatrix<f64> {
    let centers = grid.centers();
    let n = centers.len();
    let mut r = DMatrix::zeros(n, n);
    for a in 0..n {
        r[(a, a)] = params.sigma2;
        for b in (a + 1)..n {
            let v = kernel(centers[a], centers[b], params);
            r[(a, b)] = v;
            r[(b, a)] = v;
        }
    }
    r
}
