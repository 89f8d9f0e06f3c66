//! Simple kriging (known zero mean) of sparse log-permeability measurements.
//!
//! The kriged surface `Yk(x) = k(x)^T K^-1 y` interpolates the data exactly
//! and is used as the conditional mean that the conditioned KLE perturbs.
//! Measurements are always evaluated at the center of the cell they snap to.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::covariance::{kernel, KernelParams};
use crate::error::KrigingError;
use crate::grid::{fmt_real, Grid2D, ScalarField};

/// Condition number above which the Gram matrix is rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    locations: Vec<[f64; 2]>,
    values: Vec<f64>,
}

impl MeasurementSet {
    pub fn new(locations: Vec<[f64; 2]>, values: Vec<f64>) -> Result<Self, KrigingError> {
        if locations.is_empty() {
            return Err(KrigingError::Argument("at least one measurement is required".into()));
        }
        if locations.len() != values.len() {
            return Err(KrigingError::Argument(format!(
                "{} locations but {} values",
                locations.len(),
                values.len()
            )));
        }
        for (i, (p, v)) in locations.iter().zip(&values).enumerate() {
            if !(p[0].is_finite() && p[1].is_finite() && v.is_finite()) {
                return Err(KrigingError::Argument(format!("measurement {i} is not finite")));
            }
            if !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]) {
                return Err(KrigingError::Argument(format!(
                    "measurement {i} at ({}, {}) lies outside the unit square",
                    p[0], p[1]
                )));
            }
        }
        for a in 0..locations.len() {
            for b in (a + 1)..locations.len() {
                if locations[a] == locations[b] {
                    return Err(KrigingError::Argument(format!(
                        "measurements {a} and {b} share a location"
                    )));
                }
            }
        }
        Ok(Self { locations, values })
    }

    /// Measurements of `field` at the given points (read at their snapped cells).
    pub fn sample(field: &ScalarField, locations: Vec<[f64; 2]>) -> Result<Self, KrigingError> {
        let grid = field.grid();
        let values = locations
            .iter()
            .map(|&p| field.values()[grid.nearest_cell(p)])
            .collect();
        Self::new(locations, values)
    }

    /// Default 3x3 measurement lattice at x, y in {0.25, 0.5, 0.75}.
    pub fn default_lattice() -> Vec<[f64; 2]> {
        let coords = [0.25, 0.5, 0.75];
        coords
            .iter()
            .flat_map(|&y| coords.iter().map(move |&x| [x, y]))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn locations(&self) -> &[[f64; 2]] {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            locations: self.locations.clone(),
            values: self.values.iter().map(|v| v * alpha).collect(),
        }
    }
}

/// Reads a `x,y,value` CSV with a header line.
pub fn read_measurements_csv(path: impl AsRef<Path>) -> Result<MeasurementSet, KrigingError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| KrigingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |line: usize, msg: String| KrigingError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    match lines.next() {
        Some((_, header)) if header.replace(' ', "") == "x,y,value" => {}
        Some((n, header)) => return Err(parse_err(n, format!("expected header `x,y,value`, got `{header}`"))),
        None => return Err(parse_err(1, "empty measurements file".into())),
    }
    let mut locations = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split(',').map(str::trim).collect();
        if toks.len() != 3 {
            return Err(parse_err(lineno, format!("expected 3 columns, got {}", toks.len())));
        }
        let nums = toks
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| parse_err(lineno, format!("non-numeric token `{t}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        locations.push([nums[0], nums[1]]);
        values.push(nums[2]);
    }
    MeasurementSet::new(locations, values)
}

pub fn write_measurements_csv(ms: &MeasurementSet, path: impl AsRef<Path>) -> Result<(), KrigingError> {
    let path = path.as_ref();
    let io = |source| KrigingError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = String::from("x,y,value\n");
    for (p, v) in ms.locations.iter().zip(&ms.values) {
        out.push_str(&format!("{},{},{}\n", p[0], p[1], fmt_real(*v)));
    }
    fs::File::create(path).and_then(|mut f| f.write_all(out.as_bytes())).map_err(io)
}

/// Nearest cell per measurement; two measurements in one cell is an error.
pub fn snap_to_cells(ms: &MeasurementSet, grid: &Grid2D) -> Result<Vec<usize>, KrigingError> {
    let cells: Vec<usize> = ms.locations.iter().map(|&p| grid.nearest_cell(p)).collect();
    for a in 0..cells.len() {
        for b in (a + 1)..cells.len() {
            if cells[a] == cells[b] {
                return Err(KrigingError::Collision {
                    first: a,
                    second: b,
                    cell: cells[a],
                });
            }
        }
    }
    Ok(cells)
}

/// Fitted simple-kriging interpolant.
#[derive(Debug, Clone)]
pub struct SimpleKriging {
    points: Vec<[f64; 2]>,
    params: KernelParams,
    gram_inv: DMatrix<f64>,
    dual: DVector<f64>,
}

impl SimpleKriging {
    pub fn fit(points: Vec<[f64; 2]>, values: &[f64], params: KernelParams) -> Result<Self, KrigingError> {
        let m = points.len();
        if m == 0 || values.len() != m {
            return Err(KrigingError::Argument("need one value per point".into()));
        }
        let gram = DMatrix::from_fn(m, m, |a, b| kernel(points[a], points[b], &params));
        let sv = gram.clone().singular_values();
        let (hi, lo) = sv
            .iter()
            .fold((0.0f64, f64::INFINITY), |(h, l), &s| (h.max(s), l.min(s)));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition > MAX_CONDITION {
            let (first, second) = closest_pair(&points);
            return Err(KrigingError::IllConditioned {
                condition,
                first,
                second,
            });
        }
        let chol = gram.clone().cholesky().ok_or_else(|| {
            let (first, second) = closest_pair(&points);
            KrigingError::IllConditioned {
                condition,
                first,
                second,
            }
        })?;
        let gram_inv = chol.inverse();
        let y = DVector::from_column_slice(values);
        let mut dual = chol.solve(&y);
        // One refinement step to push the interpolation residual to roundoff.
        let residual = &y - &gram * &dual;
        dual += chol.solve(&residual);
        Ok(Self {
            points,
            params,
            gram_inv,
            dual,
        })
    }

    fn kvec(&self, x: [f64; 2]) -> DVector<f64> {
        DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|&p| kernel(x, p, &self.params)),
        )
    }

    /// Kriging weights `K^-1 k(x)`.
    pub fn weights(&self, x: [f64; 2]) -> Vec<f64> {
        (&self.gram_inv * self.kvec(x)).iter().copied().collect()
    }

    pub fn predict(&self, x: [f64; 2]) -> f64 {
        self.kvec(x).dot(&self.dual)
    }
}

fn closest_pair(points: &[[f64; 2]]) -> (usize, usize) {
    let mut best = (0, 0, f64::INFINITY);
    for a in 0..points.len() {
        for b in (a + 1)..points.len() {
            let d = (points[a][0] - points[b][0]).hypot(points[a][1] - points[b][1]);
            if d < best.2 {
                best = (a, b, d);
            }
        }
    }
    (best.0, best.1)
}

/// Kriged surface over every cell center of `grid`.
pub fn krige(ms: &MeasurementSet, params: &KernelParams, grid: &Grid2D) -> Result<ScalarField, KrigingError> {
    let cells = snap_to_cells(ms, grid)?;
    let points = cells.iter().map(|&c| grid.center(c)).collect();
    let model = SimpleKriging::fit(points, ms.values(), *params)?;
    let values = (0..grid.len()).map(|c| model.predict(grid.center(c))).collect();
    ScalarField::new(*grid, values).map_err(|e| KrigingError::Argument(e.to_string()))
}
