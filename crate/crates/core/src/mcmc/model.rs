//! Everything a chain needs to evaluate a proposal: the KLE basis, optional
//! conditioning data, both forward grids and the reference observations.

use crate::conditioning::{add_perturbation, build_data_matrix, nullspace_basis, project, Projector};
use crate::covariance::KernelParams;
use crate::darcy::{observe_pressure, solve_pressure, upscale, BoundaryConditions};
use crate::error::{Error, McmcError};
use crate::grid::{Grid2D, ObservationMask, ScalarField};
use crate::kle::KleBasis;
use crate::kriging::{krige, MeasurementSet};

use super::likelihood::log_likelihood;
use super::LikelihoodParams;

/// Kriged mean and nullspace projector for conditioned sampling.
#[derive(Debug, Clone)]
pub struct Conditioning {
    pub kriged: ScalarField,
    pub projector: Projector,
    /// Fine-grid cells holding the measurements, in measurement order.
    pub cells: Vec<usize>,
    pub values: Vec<f64>,
}

impl Conditioning {
    /// Kriges `ms` on the basis grid and builds the nullspace of its data matrix.
    pub fn from_measurements(basis: &KleBasis, ms: &MeasurementSet, params: &KernelParams) -> Result<Self, Error> {
        let kriged = krige(ms, params, &basis.grid())?;
        let data = build_data_matrix(basis, ms)?;
        let projector = nullspace_basis(&data);
        Ok(Self {
            kriged,
            projector,
            cells: data.cells().to_vec(),
            values: ms.values().to_vec(),
        })
    }
}

/// Shared, read-only inversion setup.
#[derive(Debug, Clone)]
pub struct InversionModel {
    pub basis: KleBasis,
    pub conditioning: Option<Conditioning>,
    pub coarse: Grid2D,
    pub bc: BoundaryConditions,
    pub likelihood: LikelihoodParams,
    fine_mask: ObservationMask,
    coarse_mask: ObservationMask,
    ref_fine: Vec<f64>,
    ref_coarse: Vec<f64>,
}

/// A synthesized proposal and the coefficients it came from.
pub struct Evaluated {
    pub field: ScalarField,
    pub projected: Option<Vec<f64>>,
}

impl InversionModel {
    /// Builds the model and the reference data: the reference log-permeability
    /// is solved on the fine grid, and upscaled and solved on the coarse grid.
    pub fn new(
        basis: KleBasis,
        conditioning: Option<Conditioning>,
        coarse: Grid2D,
        bc: BoundaryConditions,
        likelihood: LikelihoodParams,
        reference: &ScalarField,
    ) -> Result<Self, Error> {
        let fine = basis.grid();
        if reference.grid() != fine {
            return Err(McmcError::Argument("reference field is not on the KLE grid".into()).into());
        }
        likelihood.validate()?;
        let fine_mask = ObservationMask::chessboard(fine);
        let coarse_mask = ObservationMask::chessboard(coarse);
        let ref_fine = observe_pressure(solve_pressure(reference, &bc, None)?.field(), &fine_mask)?;
        let ref_coarse_perm = upscale(reference, &coarse)?;
        let ref_coarse = observe_pressure(solve_pressure(&ref_coarse_perm, &bc, None)?.field(), &coarse_mask)?;
        Ok(Self {
            basis,
            conditioning,
            coarse,
            bc,
            likelihood,
            fine_mask,
            coarse_mask,
            ref_fine,
            ref_coarse,
        })
    }

    pub fn fine(&self) -> Grid2D {
        self.basis.grid()
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn reference_fine(&self) -> &[f64] {
        &self.ref_fine
    }

    pub fn reference_coarse(&self) -> &[f64] {
        &self.ref_coarse
    }

    pub fn fine_mask(&self) -> &ObservationMask {
        &self.fine_mask
    }

    pub fn coarse_mask(&self) -> &ObservationMask {
        &self.coarse_mask
    }

    /// Log-permeability for `theta`; conditioned fields project first.
    pub fn field(&self, theta: &[f64], conditioned: bool) -> Result<Evaluated, Error> {
        if conditioned {
            let cond = self
                .conditioning
                .as_ref()
                .ok_or_else(|| McmcError::Argument("conditioned sampling needs measurements".into()))?;
            let hat = project(theta, &cond.projector)?;
            let field = add_perturbation(&self.basis, &cond.kriged, &hat)?;
            Ok(Evaluated {
                field,
                projected: Some(hat.into_inner()),
            })
        } else {
            Ok(Evaluated {
                field: self.basis.synthesize(theta)?,
                projected: None,
            })
        }
    }

    pub fn coarse_loglik(&self, fine_logperm: &ScalarField) -> Result<f64, Error> {
        let coarse_perm = upscale(fine_logperm, &self.coarse)?;
        let p = solve_pressure(&coarse_perm, &self.bc, None)?;
        let obs = observe_pressure(p.field(), &self.coarse_mask)?;
        Ok(log_likelihood(&obs, &self.ref_coarse, self.likelihood.sigma_c2)?)
    }

    pub fn fine_loglik(&self, fine_logperm: &ScalarField) -> Result<f64, Error> {
        let p = solve_pressure(fine_logperm, &self.bc, None)?;
        let obs = observe_pressure(p.field(), &self.fine_mask)?;
        Ok(log_likelihood(&obs, &self.ref_fine, self.likelihood.sigma_f2)?)
    }
}
