//! Cell-centered grids on the unit square, scalar fields over them, and
//! field file formats.
//!
//! Cells are indexed row-major with `j` (the y index) outer:
//! `index = j * nx + i`. Cell `(i, j)` has center `((i + 1/2) hx, (j + 1/2) hy)`.
//!
//! Field CSV files hold `ny` lines of `nx` comma-separated reals. Line 1 is
//! row `j = 0` (the bottom of the domain). Values are written with 17
//! significant digits so a write/read cycle is exact.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::GridError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize) -> Result<Self, GridError> {
        if nx == 0 || ny == 0 {
            return Err(GridError::Dimension { nx, ny });
        }
        Ok(Self { nx, ny })
    }

    /// Signed variant for callers holding untrusted integers (config, CLI).
    pub fn from_signed(nx: i64, ny: i64) -> Result<Self, GridError> {
        if nx <= 0 || ny <= 0 {
            return Err(GridError::Dimension {
                nx: nx.max(0) as usize,
                ny: ny.max(0) as usize,
            });
        }
        Self::new(nx as usize, ny as usize)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        1.0 / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    pub fn ij(&self, index: usize) -> (usize, usize) {
        debug_assert!(index < self.len());
        (index % self.nx, index / self.nx)
    }

    pub fn center(&self, index: usize) -> [f64; 2] {
        let (i, j) = self.ij(index);
        [(i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy()]
    }

    pub fn centers(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|c| self.center(c)).collect()
    }

    /// Cell whose center is nearest to `p`. Points exactly halfway between
    /// two centers go to the upper cell; points outside the square clamp to
    /// the boundary cells.
    pub fn nearest_cell(&self, p: [f64; 2]) -> usize {
        let snap = |x: f64, n: usize| -> usize {
            let k = (x * n as f64).floor();
            if k < 0.0 {
                0
            } else {
                (k as usize).min(n - 1)
            }
        };
        self.index(snap(p[0], self.nx), snap(p[1], self.ny))
    }
}

/// One finite real per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Length {
                nx: grid.nx,
                ny: grid.ny,
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { index, value });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        assert!(value.is_finite());
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Builds a field from a function of the cell center.
    pub fn from_fn(grid: Grid2D, mut f: impl FnMut([f64; 2]) -> f64) -> Result<Self, GridError> {
        let values = (0..grid.len()).map(|c| f(grid.center(c))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cellwise `exp`, e.g. log-permeability to permeability.
    pub fn exp(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.exp()).collect()
    }
}

/// A fixed, ordered subset of cells at which a field is observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    grid: Grid2D,
    cells: Vec<usize>,
}

impl ObservationMask {
    /// Cells with `(i + j)` even, in increasing cell-index order.
    pub fn chessboard(grid: Grid2D) -> Self {
        let cells = (0..grid.len())
            .filter(|&c| {
                let (i, j) = grid.ij(c);
                (i + j) % 2 == 0
            })
            .collect();
        Self { grid, cells }
    }

    pub fn from_cells(grid: Grid2D, cells: Vec<usize>) -> Result<Self, GridError> {
        if let Some(&bad) = cells.iter().find(|&&c| c >= grid.len()) {
            return Err(GridError::Length {
                nx: grid.nx,
                ny: grid.ny,
                expected: grid.len(),
                got: bad + 1,
            });
        }
        Ok(Self { grid, cells })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GridError + '_ {
    move |source| GridError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Formats a real with 17 significant digits.
pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_field_csv(field: &ScalarField, path: impl AsRef<Path>) -> Result<(), GridError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let nx = field.grid.nx;
    for row in field.values.chunks(nx) {
        let line: Vec<String> = row.iter().map(|&v| fmt_real(v)).collect();
        writeln!(out, "{}", line.join(",")).map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// Reads a field CSV, inferring the grid from the file shape.
pub fn read_field_csv(path: impl AsRef<Path>) -> Result<ScalarField, GridError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let parse_err = |line: usize, msg: String| GridError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut nx = None;
    let mut values = Vec::new();
    let mut ny = 0;
    for (lineno, line) in text.lines().enumerate().map(|(k, l)| (k + 1, l.trim())) {
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<f64>()
                    .map_err(|_| parse_err(lineno, format!("non-numeric token `{tok}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        match nx {
            None => nx = Some(row.len()),
            Some(n) if n != row.len() => {
                return Err(parse_err(
                    lineno,
                    format!("row has {} values, expected {n}", row.len()),
                ))
            }
            Some(_) => {}
        }
        values.extend(row);
        ny += 1;
    }
    let nx = nx.ok_or_else(|| parse_err(1, "empty field file".into()))?;
    let grid = Grid2D::new(nx, ny)?;
    ScalarField::new(grid, values)
}

/// Reads a field CSV and checks it matches `grid`.
pub fn read_field_csv_on(path: impl AsRef<Path>, grid: Grid2D) -> Result<ScalarField, GridError> {
    let field = read_field_csv(path)?;
    if field.grid != grid {
        return Err(GridError::Mismatch {
            expected: (grid.nx, grid.ny),
            got: (field.grid.nx, field.grid.ny),
        });
    }
    Ok(field)
}

/// Pixel values for a PGM rendering: min-max scaled to 0..=255, or 128
/// everywhere for a constant field. Row-major with the top image row
/// holding the highest `j`.
pub fn pgm_pixels(field: &ScalarField) -> Vec<u8> {
    let (lo, hi) = (field.min(), field.max());
    let grid = field.grid;
    let mut pixels = Vec::with_capacity(grid.len());
    for j in (0..grid.ny).rev() {
        for i in 0..grid.nx {
            let v = field.get(i, j);
            let px = if hi > lo {
                ((v - lo) / (hi - lo) * 255.0).round() as u8
            } else {
                128
            };
            pixels.push(px);
        }
    }
    pixels
}

/// Writes an ASCII (P2) graymap with one pixel per cell.
pub fn write_field_pgm(field: &ScalarField, path: impl AsRef<Path>) -> Result<(), GridError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let grid = field.grid;
    writeln!(out, "P2\n{} {}\n255", grid.nx, grid.ny).map_err(io_err(path))?;
    for row in pgm_pixels(field).chunks(grid.nx) {
        let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
        writeln!(out, "{}", line.join(" ")).map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_cell_grid() {
        let g = Grid2D::new(1, 1).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.center(0), [0.5, 0.5]);
    }

    #[test]
    fn fine_and_coarse_grids() {
        let g = Grid2D::new(16, 16).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.hx(), 0.0625);
        assert_eq!(g.hy(), 0.0625);
        assert_eq!(Grid2D::new(8, 8).unwrap().len(), 64);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(Grid2D::new(0, 3), Err(GridError::Dimension { .. })));
        assert!(matches!(Grid2D::new(3, 0), Err(GridError::Dimension { .. })));
        assert!(Grid2D::from_signed(-2, 4).is_err());
    }

    #[test]
    fn index_mapping_is_bijective() {
        for nx in 1..=64 {
            for ny in 1..=64 {
                let g = Grid2D::new(nx, ny).unwrap();
                let mut seen = vec![false; g.len()];
                for j in 0..ny {
                    for i in 0..nx {
                        let c = g.index(i, j);
                        assert!(!seen[c]);
                        seen[c] = true;
                        assert_eq!(g.ij(c), (i, j));
                    }
                }
                assert!(seen.iter().all(|&s| s));
            }
        }
    }

    #[test]
    fn centers_strictly_inside() {
        let g = Grid2D::new(7, 5).unwrap();
        for [x, y] in g.centers() {
            assert!(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0);
        }
    }

    #[test]
    fn chessboard_examples() {
        let g = Grid2D::new(2, 2).unwrap();
        let m = ObservationMask::chessboard(g);
        assert_eq!(m.cells(), &[g.index(0, 0), g.index(1, 1)]);
        assert_eq!(ObservationMask::chessboard(Grid2D::new(3, 3).unwrap()).len(), 5);
    }

    #[test]
    fn chessboard_16_by_enumeration() {
        let g = Grid2D::new(16, 16).unwrap();
        let mut count = 0;
        for i in 0..16 {
            for j in 0..16 {
                if (i + j) % 2 == 0 {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 128);
        assert_eq!(ObservationMask::chessboard(g).len(), count);
    }

    #[test]
    fn chessboard_ceil_half() {
        for nx in 1..=20 {
            for ny in 1..=20 {
                let g = Grid2D::new(nx, ny).unwrap();
                assert_eq!(ObservationMask::chessboard(g).len(), (nx * ny).div_ceil(2));
            }
        }
    }

    #[test]
    fn nearest_cell_examples() {
        let g = Grid2D::new(1, 1).unwrap();
        assert_eq!(g.nearest_cell([0.5, 0.5]), 0);
        let g = Grid2D::new(16, 16).unwrap();
        assert_eq!(g.nearest_cell([0.03, 0.03]), g.index(0, 0));
        assert_eq!(g.nearest_cell([0.25, 0.75]), g.index(4, 12));
        assert_eq!(g.nearest_cell([1.0, 0.0]), g.index(15, 0));
    }

    #[test]
    fn field_rejects_bad_input() {
        let g = Grid2D::new(2, 2).unwrap();
        assert!(matches!(
            ScalarField::new(g, vec![0.0; 3]),
            Err(GridError::Length { .. })
        ));
        assert!(matches!(
            ScalarField::new(g, vec![0.0, f64::NAN, 0.0, 0.0]),
            Err(GridError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn csv_shape_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        // 2 rows of 3 values: nx = 3, ny = 2.
        fs::write(&path, "1,2,3\n4,5,6\n").unwrap();
        let err = read_field_csv_on(&path, Grid2D::new(2, 3).unwrap()).unwrap_err();
        assert!(matches!(err, GridError::Mismatch { .. }));
        assert!(read_field_csv_on(&path, Grid2D::new(3, 2).unwrap()).is_ok());
    }

    #[test]
    fn csv_parse_errors_carry_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        fs::write(&path, "1,2\n3\n").unwrap();
        match read_field_csv(&path).unwrap_err() {
            GridError::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
        fs::write(&path, "1,2\n3,abc\n").unwrap();
        match read_field_csv(&path).unwrap_err() {
            GridError::Parse { line, msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("abc"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn csv_constant_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.csv");
        let g = Grid2D::new(3, 2).unwrap();
        write_field_csv(&ScalarField::zeros(g), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        for tok in text.lines().flat_map(|l| l.split(',')) {
            assert_eq!(tok.parse::<f64>().unwrap(), 0.0);
        }
    }

    #[test]
    fn pgm_scaling() {
        let g = Grid2D::new(2, 1).unwrap();
        let f = ScalarField::new(g, vec![0.0, 1.0]).unwrap();
        assert_eq!(pgm_pixels(&f), vec![0, 255]);
        let c = ScalarField::constant(Grid2D::new(3, 3).unwrap(), 4.2);
        assert!(pgm_pixels(&c).iter().all(|&p| p == 128));
    }

    #[test]
    fn pgm_file_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let g = Grid2D::new(16, 16).unwrap();
        let f = ScalarField::from_fn(g, |[x, y]| x + 2.0 * y).unwrap();
        write_field_pgm(&f, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("P2"));
        assert_eq!(lines.next(), Some("16 16"));
        assert_eq!(lines.next(), Some("255"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 16);
        assert!(rows.iter().all(|r| r.split(' ').count() == 16));
    }

    proptest! {
        #[test]
        fn csv_round_trip_exact(
            nx in 1usize..6,
            ny in 1usize..6,
            seed in proptest::collection::vec(-1e6f64..1e6, 36),
        ) {
            let g = Grid2D::new(nx, ny).unwrap();
            let values: Vec<f64> = seed[..g.len()].iter().map(|v| v / 3.0).collect();
            let f = ScalarField::new(g, values).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("f.csv");
            write_field_csv(&f, &path).unwrap();
            let back = read_field_csv_on(&path, g).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
