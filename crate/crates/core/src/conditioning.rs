//! Conditioning by nullspace projection.
//!
//! Rows of the data matrix `A` evaluate the scaled KLE modes at the
//! measurement cells, so `A theta` is the KLE perturbation at those cells.
//! Projecting `theta` onto `N(A)` yields the closest coefficient vector whose
//! perturbation vanishes there; adding it to the kriged surface gives a field
//! that reproduces every measurement.

use nalgebra::{DMatrix, SVD};

use crate::error::ConditioningError;
use crate::grid::ScalarField;
use crate::kle::{combine, KleBasis, ThetaVector};
use crate::kriging::{snap_to_cells, MeasurementSet};

/// Relative singular-value threshold for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    a: DMatrix<f64>,
    cells: Vec<usize>,
}

impl DataMatrix {
    /// Wraps an arbitrary `m x n` matrix (no measurement cells attached).
    pub fn from_matrix(a: DMatrix<f64>) -> Result<Self, ConditioningError> {
        let (m, n) = a.shape();
        if m >= n {
            return Err(ConditioningError::NoNullspace { m, n });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(ConditioningError::Shape("data matrix has non-finite entries".into()));
        }
        Ok(Self { a, cells: Vec::new() })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Measurement cells, one per row (empty for [`DataMatrix::from_matrix`]).
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }
}

/// `A[i, j] = sqrt(lambda_j) * phi_j(cell of measurement i)`.
pub fn build_data_matrix(basis: &KleBasis, ms: &MeasurementSet) -> Result<DataMatrix, ConditioningError> {
    let grid = basis.grid();
    let cells = snap_to_cells(ms, &grid).map_err(|e| ConditioningError::Shape(e.to_string()))?;
    let (m, n) = (cells.len(), basis.n());
    if m >= n {
        return Err(ConditioningError::NoNullspace { m, n });
    }
    let scaled = basis.scaled_modes();
    let a = DMatrix::from_fn(m, n, |i, j| scaled[(cells[i], j)]);
    Ok(DataMatrix { a, cells })
}

/// Orthonormal basis `Q` of `N(A)`; the projector is `P = Q Q^T`, applied
/// as two thin products and never formed.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    q: DMatrix<f64>,
    rank: usize,
    singular_values: Vec<f64>,
}

impl Projector {
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn nullity(&self) -> usize {
        self.q.ncols()
    }

    /// Singular values of `A`, descending (length `min(m, n)`).
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Coordinates `Q^T theta` along the nullspace basis.
    pub fn coordinates(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.nullity())
            .map(|k| self.q.column(k).iter().zip(theta).map(|(q, t)| q * t).sum())
            .collect()
    }

    /// `P` as a dense matrix, for inspection and tests.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.q * self.q.transpose()
    }
}

pub fn nullspace_basis(data: &DataMatrix) -> Projector {
    let (m, n) = data.a.shape();
    // Pad to square so the SVD returns a complete set of right singular vectors.
    let mut square = DMatrix::zeros(n, n);
    square.view_mut((0, 0), (m, n)).copy_from(&data.a);
    let svd = SVD::new(square, false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma_max = svd.singular_values[order[0]];
    let rank = if sigma_max > 0.0 {
        order
            .iter()
            .filter(|&&k| svd.singular_values[k] > RANK_TOLERANCE * sigma_max)
            .count()
    } else {
        0
    };
    let singular_values = order.iter().take(m).map(|&k| svd.singular_values[k]).collect();

    let nullity = n - rank;
    let mut q = DMatrix::zeros(n, nullity);
    for (col, &k) in order[rank..].iter().enumerate() {
        let row = v_t.row(k);
        let mut pivot = 0;
        for r in 1..n {
            if row[r].abs() > row[pivot].abs() {
                pivot = r;
            }
        }
        let sign = if row[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            q[(r, col)] = sign * row[r];
        }
    }
    Projector {
        q,
        rank,
        singular_values,
    }
}

/// `theta_hat = Q (Q^T theta)`.
pub fn project(theta: &[f64], proj: &Projector) -> Result<ThetaVector, ConditioningError> {
    if theta.len() != proj.n() {
        return Err(ConditioningError::Shape(format!(
            "theta has length {}, projector acts on {}",
            theta.len(),
            proj.n()
        )));
    }
    let coords = proj.coordinates(theta);
    Ok(ThetaVector::from_vec_unchecked(combine(&proj.q, &coords)))
}

/// `Y = Yk + sum_i sqrt(lambda_i) phi_i theta_hat_i` with `theta_hat = P theta`.
pub fn synthesize_conditioned(
    basis: &KleBasis,
    kriged: &ScalarField,
    theta: &[f64],
    proj: &Projector,
) -> Result<ScalarField, ConditioningError> {
    if kriged.grid() != basis.grid() {
        return Err(ConditioningError::Shape("kriged surface is on a different grid".into()));
    }
    if proj.n() != basis.n() {
        return Err(ConditioningError::Shape(format!(
            "projector acts on {} modes, basis has {}",
            proj.n(),
            basis.n()
        )));
    }
    let hat = project(theta, proj)?;
    add_perturbation(basis, kriged, &hat)
}

/// `Yk + sum_i sqrt(lambda_i) phi_i theta_i` for an already projected `theta`.
pub(crate) fn add_perturbation(
    basis: &KleBasis,
    kriged: &ScalarField,
    theta_hat: &[f64],
) -> Result<ScalarField, ConditioningError> {
    let pert = basis
        .synthesize(theta_hat)
        .map_err(|e| ConditioningError::Shape(e.to_string()))?;
    let values = kriged
        .values()
        .iter()
        .zip(pert.values())
        .map(|(k, p)| k + p)
        .collect();
    ScalarField::new(kriged.grid(), values).map_err(|e| ConditioningError::Shape(e.to_string()))
}
