//! Flow-based upscaling of fine permeability to a coarse grid.
//!
//! Each coarse block is solved in isolation twice: a unit pressure drop in
//! x with no-flow top and bottom, then the same in y. The directional
//! effective permeability is `Q L / (W dp)` and the coarse cell stores the
//! log of their geometric mean.

use super::{solve_layout, BoundaryConditions, Layout};
use crate::error::DarcyError;
use crate::grid::{Grid2D, ScalarField};

/// Effective `(k_x, k_y)` of an `nx x ny` block with cell sizes `hx x hy`.
/// `k` is row-major with `j` outer, like grid fields.
pub fn block_effective_perm(nx: usize, ny: usize, hx: f64, hy: f64, k: &[f64]) -> Result<(f64, f64), DarcyError> {
    let layout = Layout { nx, ny, hx, hy };
    let (width, height) = (nx as f64 * hx, ny as f64 * hy);

    let px = solve_layout(layout, k, &BoundaryConditions::left_to_right(1.0, 0.0), None)?;
    let qx: f64 = (0..ny)
        .map(|j| {
            let c = j * nx + nx - 1;
            2.0 * k[c] * hy / hx * px[c]
        })
        .sum();

    let py = solve_layout(layout, k, &BoundaryConditions::bottom_to_top(1.0, 0.0), None)?;
    let qy: f64 = (0..nx)
        .map(|i| {
            let c = (ny - 1) * nx + i;
            2.0 * k[c] * hx / hy * py[c]
        })
        .sum();

    Ok((qx * width / height, qy * height / width))
}

fn ratios(fine: &Grid2D, coarse: &Grid2D) -> Result<(usize, usize), DarcyError> {
    if fine.nx() % coarse.nx() != 0 || fine.ny() % coarse.ny() != 0 {
        return Err(DarcyError::Argument(format!(
            "fine grid {}x{} is not an integer refinement of coarse grid {}x{}",
            fine.nx(),
            fine.ny(),
            coarse.nx(),
            coarse.ny()
        )));
    }
    Ok((fine.nx() / coarse.nx(), fine.ny() / coarse.ny()))
}

/// Coarse log-permeability from fine log-permeability.
pub fn upscale(fine_logperm: &ScalarField, coarse: &Grid2D) -> Result<ScalarField, DarcyError> {
    let fine = fine_logperm.grid();
    let (rx, ry) = ratios(&fine, coarse)?;
    let k = fine_logperm.exp();
    let mut block = vec![0.0; rx * ry];
    let mut out = Vec::with_capacity(coarse.len());
    for bj in 0..coarse.ny() {
        for bi in 0..coarse.nx() {
            for lj in 0..ry {
                for li in 0..rx {
                    block[lj * rx + li] = k[fine.index(bi * rx + li, bj * ry + lj)];
                }
            }
            let (kx, ky) = if block.iter().all(|&v| v == block[0]) {
                (block[0], block[0])
            } else {
                block_effective_perm(rx, ry, fine.hx(), fine.hy(), &block)?
            };
            out.push(0.5 * (kx.ln() + ky.ln()));
        }
    }
    ScalarField::new(*coarse, out).map_err(|e| DarcyError::Argument(e.to_string()))
}

/// Piecewise-constant injection of a coarse field onto a fine grid.
pub fn prolong(coarse_field: &ScalarField, fine: &Grid2D) -> Result<ScalarField, DarcyError> {
    let coarse = coarse_field.grid();
    let (rx, ry) = ratios(fine, &coarse)?;
    let values = (0..fine.len())
        .map(|c| {
            let (i, j) = fine.ij(c);
            coarse_field.get(i / rx, j / ry)
        })
        .collect();
    ScalarField::new(*fine, values).map_err(|e| DarcyError::Argument(e.to_string()))
}
