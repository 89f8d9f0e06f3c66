//! Two-point flux approximation (TPFA) finite volumes for
//! `v = -k grad p, div v = f` on cell-centered grids.
//!
//! Interior face transmissibilities use the harmonic mean of the two
//! adjacent permeabilities; Dirichlet faces use the half-cell distance to
//! the boundary. The assembled system is SPD whenever at least one boundary
//! face is Dirichlet and is solved by banded Cholesky.

mod banded;
mod upscale;

pub use upscale::{block_effective_perm, prolong, upscale};

use serde::{Deserialize, Serialize};

use crate::error::DarcyError;
use crate::grid::{Grid2D, ObservationMask, ScalarField};
use banded::BandedSpd;

/// Relative residual the linear solve must reach.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    /// Prescribed pressure.
    Dirichlet(f64),
    /// Prescribed outward normal velocity `v . n`.
    Neumann(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub left: Boundary,
    pub right: Boundary,
    pub bottom: Boundary,
    pub top: Boundary,
}

impl BoundaryConditions {
    /// Pressure drop `high -> low` from left to right, no flow top and bottom.
    pub fn left_to_right(high: f64, low: f64) -> Self {
        Self {
            left: Boundary::Dirichlet(high),
            right: Boundary::Dirichlet(low),
            bottom: Boundary::Neumann(0.0),
            top: Boundary::Neumann(0.0),
        }
    }

    /// Pressure drop bottom to top, no flow left and right.
    pub fn bottom_to_top(high: f64, low: f64) -> Self {
        Self {
            left: Boundary::Neumann(0.0),
            right: Boundary::Neumann(0.0),
            bottom: Boundary::Dirichlet(high),
            top: Boundary::Dirichlet(low),
        }
    }

    pub fn side(&self, side: Side) -> Boundary {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
            Side::Bottom => self.bottom,
            Side::Top => self.top,
        }
    }

    fn dirichlet_range(&self) -> Option<(f64, f64)> {
        [self.left, self.right, self.bottom, self.top]
            .iter()
            .filter_map(|b| match b {
                Boundary::Dirichlet(g) => Some(*g),
                Boundary::Neumann(_) => None,
            })
            .fold(None, |acc, g| match acc {
                None => Some((g, g)),
                Some((lo, hi)) => Some((lo.min(g), hi.max(g))),
            })
    }
}

impl Default for BoundaryConditions {
    fn default() -> Self {
        Self::left_to_right(1.0, 0.0)
    }
}

/// Rectangular cell layout; the global solver uses the unit square, upscaling
/// uses sub-blocks with the fine cell sizes.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Layout {
    fn of(grid: &Grid2D) -> Self {
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            hx: grid.hx(),
            hy: grid.hy(),
        }
    }

    fn len(&self) -> usize {
        self.nx * self.ny
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Five-point operator: `diag`, east and north couplings, boundary
/// transmissibilities, and right-hand side.
struct System {
    diag: Vec<f64>,
    east: Vec<f64>,
    north: Vec<f64>,
    rhs: Vec<f64>,
}

/// Transmissibilities of a layout: interior x-faces, interior y-faces and
/// the half-cell boundary faces.
struct Transmissibility<'a> {
    layout: Layout,
    k: &'a [f64],
}

impl Transmissibility<'_> {
    fn east(&self, c: usize) -> f64 {
        let l = &self.layout;
        l.hy / l.hx * harmonic(self.k[c], self.k[c + 1])
    }

    fn north(&self, c: usize) -> f64 {
        let l = &self.layout;
        l.hx / l.hy * harmonic(self.k[c], self.k[c + l.nx])
    }

    fn boundary(&self, c: usize, side: Side) -> (f64, f64) {
        let l = &self.layout;
        // (transmissibility, face length)
        match side {
            Side::Left | Side::Right => (2.0 * self.k[c] * l.hy / l.hx, l.hy),
            Side::Bottom | Side::Top => (2.0 * self.k[c] * l.hx / l.hy, l.hx),
        }
    }
}

fn boundary_sides(layout: &Layout, c: usize) -> impl Iterator<Item = Side> {
    let (i, j) = (c % layout.nx, c / layout.nx);
    [
        (i == 0, Side::Left),
        (i + 1 == layout.nx, Side::Right),
        (j == 0, Side::Bottom),
        (j + 1 == layout.ny, Side::Top),
    ]
    .into_iter()
    .filter_map(|(on, s)| on.then_some(s))
}

fn assemble(layout: Layout, k: &[f64], bc: &BoundaryConditions, source: Option<&[f64]>) -> System {
    let n = layout.len();
    let t = Transmissibility { layout, k };
    let area = layout.hx * layout.hy;
    let mut sys = System {
        diag: vec![0.0; n],
        east: vec![0.0; n],
        north: vec![0.0; n],
        rhs: source.map_or_else(|| vec![0.0; n], |f| f.iter().map(|v| v * area).collect()),
    };
    for c in 0..n {
        let (i, j) = (c % layout.nx, c / layout.nx);
        if i + 1 < layout.nx {
            let te = t.east(c);
            sys.east[c] = te;
            sys.diag[c] += te;
            sys.diag[c + 1] += te;
        }
        if j + 1 < layout.ny {
            let tn = t.north(c);
            sys.north[c] = tn;
            sys.diag[c] += tn;
            sys.diag[c + layout.nx] += tn;
        }
        for side in boundary_sides(&layout, c) {
            let (tb, len) = t.boundary(c, side);
            match bc.side(side) {
                Boundary::Dirichlet(g) => {
                    sys.diag[c] += tb;
                    sys.rhs[c] += tb * g;
                }
                Boundary::Neumann(gv) => sys.rhs[c] -= gv * len,
            }
        }
    }
    sys
}

impl System {
    fn apply(&self, nx: usize, p: &[f64]) -> Vec<f64> {
        let n = p.len();
        let mut out: Vec<f64> = self.diag.iter().zip(p).map(|(d, v)| d * v).collect();
        for c in 0..n {
            if self.east[c] != 0.0 {
                out[c] -= self.east[c] * p[c + 1];
                out[c + 1] -= self.east[c] * p[c];
            }
            if self.north[c] != 0.0 {
                out[c] -= self.north[c] * p[c + nx];
                out[c + nx] -= self.north[c] * p[c];
            }
        }
        out
    }
}

fn check_perm(k: &[f64]) -> Result<(), DarcyError> {
    if let Some((c, v)) = k.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(DarcyError::Argument(format!(
            "permeability at cell {c} is {v}; must be finite and positive"
        )));
    }
    Ok(())
}

pub(crate) fn solve_layout(
    layout: Layout,
    k: &[f64],
    bc: &BoundaryConditions,
    source: Option<&[f64]>,
) -> Result<Vec<f64>, DarcyError> {
    check_perm(k)?;
    let n = layout.len();
    let sys = assemble(layout, k, bc, source);
    let mut band = BandedSpd::zeros(n, layout.nx);
    for c in 0..n {
        band.add(c, c, sys.diag[c]);
        if sys.east[c] != 0.0 {
            band.add(c + 1, c, -sys.east[c]);
        }
        if sys.north[c] != 0.0 {
            band.add(c + layout.nx, c, -sys.north[c]);
        }
    }
    let p = band.factor()?.solve(&sys.rhs);
    let ap = sys.apply(layout.nx, &p);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r: Vec<f64> = sys.rhs.iter().zip(&ap).map(|(b, a)| b - a).collect();
    let scale = norm(&sys.rhs).max(f64::MIN_POSITIVE);
    let residual = norm(&r) / scale;
    if norm(&sys.rhs) > 0.0 && residual > RESIDUAL_TOLERANCE {
        return Err(DarcyError::Residual {
            residual,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(DarcyError::Singular("solution is not finite".into()));
    }
    Ok(p)
}

/// A solved pressure field with the data needed to recover fluxes.
#[derive(Debug, Clone)]
pub struct PressureField {
    pressure: ScalarField,
    perm: Vec<f64>,
    bc: BoundaryConditions,
    source: Option<Vec<f64>>,
}

impl PressureField {
    pub fn field(&self) -> &ScalarField {
        &self.pressure
    }

    pub fn into_field(self) -> ScalarField {
        self.pressure
    }

    pub fn grid(&self) -> Grid2D {
        self.pressure.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.pressure.values()
    }

    fn trans(&self) -> Transmissibility<'_> {
        Transmissibility {
            layout: Layout::of(&self.grid()),
            k: &self.perm,
        }
    }

    /// Outward fluxes (integrated over the face) of cell `c` through its
    /// left, right, bottom and top faces.
    pub fn outward_fluxes(&self, c: usize) -> [f64; 4] {
        let grid = self.grid();
        let t = self.trans();
        let p = self.values();
        let (i, j) = grid.ij(c);
        let (nx, ny) = (grid.nx(), grid.ny());
        let face = |side: Side, neighbor: Option<usize>| -> f64 {
            match neighbor {
                Some(d) => {
                    let tr = match side {
                        Side::Left => t.east(d),
                        Side::Right => t.east(c),
                        Side::Bottom => t.north(d),
                        Side::Top => t.north(c),
                    };
                    tr * (p[c] - p[d])
                }
                None => {
                    let (tb, len) = t.boundary(c, side);
                    match self.bc.side(side) {
                        Boundary::Dirichlet(g) => tb * (p[c] - g),
                        Boundary::Neumann(gv) => gv * len,
                    }
                }
            }
        };
        [
            face(Side::Left, (i > 0).then(|| c - 1)),
            face(Side::Right, (i + 1 < nx).then(|| c + 1)),
            face(Side::Bottom, (j > 0).then(|| c - nx)),
            face(Side::Top, (j + 1 < ny).then(|| c + nx)),
        ]
    }

    /// Net outward flux of cell `c` minus its source, i.e. the discrete
    /// conservation defect.
    pub fn cell_imbalance(&self, c: usize) -> f64 {
        let area = self.grid().cell_area();
        let f = self.source.as_ref().map_or(0.0, |s| s[c]);
        self.outward_fluxes(c).iter().sum::<f64>() - f * area
    }

    /// Total outward flux through one side of the domain.
    pub fn boundary_flux(&self, side: Side) -> f64 {
        let grid = self.grid();
        let (nx, ny) = (grid.nx(), grid.ny());
        let cells: Vec<usize> = match side {
            Side::Left => (0..ny).map(|j| grid.index(0, j)).collect(),
            Side::Right => (0..ny).map(|j| grid.index(nx - 1, j)).collect(),
            Side::Bottom => (0..nx).map(|i| grid.index(i, 0)).collect(),
            Side::Top => (0..nx).map(|i| grid.index(i, ny - 1)).collect(),
        };
        let slot = match side {
            Side::Left => 0,
            Side::Right => 1,
            Side::Bottom => 2,
            Side::Top => 3,
        };
        cells.iter().map(|&c| self.outward_fluxes(c)[slot]).sum()
    }

    /// `[min, max]` of the Dirichlet data, if any.
    pub fn dirichlet_range(&self) -> Option<(f64, f64)> {
        self.bc.dirichlet_range()
    }
}

/// Solves for pressure given log-permeability (`k = exp(logperm)`).
pub fn solve_pressure(
    logperm: &ScalarField,
    bc: &BoundaryConditions,
    source: Option<&ScalarField>,
) -> Result<PressureField, DarcyError> {
    let grid = logperm.grid();
    if let Some(f) = source {
        if f.grid() != grid {
            return Err(DarcyError::Argument("source is on a different grid".into()));
        }
    }
    let perm = logperm.exp();
    solve_perm(grid, perm, bc, source.map(|f| f.values().to_vec()))
}

/// Same as [`solve_pressure`] but takes permeability directly.
pub fn solve_perm(
    grid: Grid2D,
    perm: Vec<f64>,
    bc: &BoundaryConditions,
    source: Option<Vec<f64>>,
) -> Result<PressureField, DarcyError> {
    if perm.len() != grid.len() {
        return Err(DarcyError::Argument(format!(
            "{} permeability values for {} cells",
            perm.len(),
            grid.len()
        )));
    }
    let p = solve_layout(Layout::of(&grid), &perm, bc, source.as_deref())?;
    let pressure = ScalarField::new(grid, p).map_err(|e| DarcyError::Singular(e.to_string()))?;
    Ok(PressureField {
        pressure,
        perm,
        bc: *bc,
        source,
    })
}

/// Pressure values at the masked cells, in mask order.
pub fn observe_pressure(p: &ScalarField, mask: &ObservationMask) -> Result<Vec<f64>, DarcyError> {
    if p.grid() != mask.grid() {
        return Err(DarcyError::Argument(format!(
            "pressure grid {}x{} does not match mask grid {}x{}",
            p.grid().nx(),
            p.grid().ny(),
            mask.grid().nx(),
            mask.grid().ny()
        )));
    }
    Ok(mask.cells().iter().map(|&c| p.values()[c]).collect())
}
