//! Uniform cell-centered grids and real-valued fields on them.
//!
//! Cell `(i, j)` has its center at `origin + spacing * (i, j)`; values are
//! stored row-major with `i` running fastest.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Smallest admissible cell count along either axis.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    spacing: f64,
    origin: [f64; 2],
}

impl Grid {
    pub fn new(nx: usize, ny: usize, spacing: f64, origin: [f64; 2]) -> Result<Self> {
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "{nx}x{ny} cells, at least {MIN_CELLS} per axis required"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing {spacing}")));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite origin".into()));
        }
        Ok(Self { nx, ny, spacing, origin })
    }

    /// Square grid of `n x n` cells tiling the box `[lo, hi]^2` (cell centers
    /// sit half a cell inside the box edges).
    pub fn square(n: usize, lo: f64, hi: f64) -> Result<Self> {
        let spacing = (hi - lo) / n as f64;
        Self::new(n, n, spacing, [lo + 0.5 * spacing, lo + 0.5 * spacing])
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    /// World position of the center of cell `(i, j)`.
    #[inline]
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + self.spacing * i as f64,
            self.origin[1] + self.spacing * j as f64,
        ]
    }

    /// Fractional cell coordinates of a world point.
    #[inline]
    pub fn to_cell(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.origin[0]) / self.spacing,
            (p[1] - self.origin[1]) / self.spacing,
        ]
    }

    /// Bounding box of the cell centers, `[xmin, ymin, xmax, ymax]`.
    pub fn center_bounds(&self) -> [f64; 4] {
        let hi = self.point(self.nx - 1, self.ny - 1);
        [self.origin[0], self.origin[1], hi[0], hi[1]]
    }

    /// Same grid shifted by an integer number of cells.
    pub fn translated(&self, di: i64, dj: i64) -> Self {
        Self {
            origin: [
                self.origin[0] + self.spacing * di as f64,
                self.origin[1] + self.spacing * dj as f64,
            ],
            ..*self
        }
    }
}

/// One finite real per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx(),
                grid.ny()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField(bad));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 2]) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                values.push(f(grid.point(i, j)));
            }
        }
        Self::new(grid, values)
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Bilinear interpolation at a world point; points outside the cell-center
    /// box are clamped onto it.
    pub fn sample(&self, p: [f64; 2]) -> f64 {
        self.sample_cell(self.grid.to_cell(p))
    }

    /// Bilinear interpolation at fractional cell coordinates.
    pub fn sample_cell(&self, c: [f64; 2]) -> f64 {
        let [fx, fy] = c;
        let nx = self.grid.nx();
        let ny = self.grid.ny();
        let fx = fx.clamp(0.0, (nx - 1) as f64);
        let fy = fy.clamp(0.0, (ny - 1) as f64);
        let i = (fx.floor() as usize).min(nx - 2);
        let j = (fy.floor() as usize).min(ny - 2);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let v00 = self.at(i, j);
        let v10 = self.at(i + 1, j);
        let v01 = self.at(i, j + 1);
        let v11 = self.at(i + 1, j + 1);
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }

    /// Flat little-endian binary: `nx`, `ny` as u64, `spacing`, `origin.x`,
    /// `origin.y` as f64, then the row-major f64 values.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&(self.grid.nx() as u64).to_le_bytes())?;
        out.write_all(&(self.grid.ny() as u64).to_le_bytes())?;
        out.write_all(&self.grid.spacing().to_le_bytes())?;
        out.write_all(&self.grid.origin()[0].to_le_bytes())?;
        out.write_all(&self.grid.origin()[1].to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |input: &mut R| -> Result<[u8; 8]> {
            input.read_exact(&mut word)?;
            Ok(word)
        };
        let nx = u64::from_le_bytes(next(&mut input)?) as usize;
        let ny = u64::from_le_bytes(next(&mut input)?) as usize;
        let spacing = f64::from_le_bytes(next(&mut input)?);
        let ox = f64::from_le_bytes(next(&mut input)?);
        let oy = f64::from_le_bytes(next(&mut input)?);
        let grid = Grid::new(nx, ny, spacing, [ox, oy])?;
        let mut buf = vec![0u8; 8 * grid.len()];
        input
            .read_exact(&mut buf)
            .map_err(|e| Error::Format(format!("truncated field payload: {e}")))?;
        let values = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::new(grid, values)
    }

    /// 16-bit binary PGM, values mapped linearly from `[min, max]` onto
    /// `[0, 65535]`. The top image row is the largest `y`.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        let (lo, hi) = (self.min(), self.max());
        let scale = if hi > lo { 65535.0 / (hi - lo) } else { 0.0 };
        write!(out, "P5\n{} {}\n65535\n", self.grid.nx(), self.grid.ny())?;
        let mut buf = Vec::with_capacity(2 * self.values.len());
        for j in (0..self.grid.ny()).rev() {
            for i in 0..self.grid.nx() {
                let level = ((self.at(i, j) - lo) * scale).round().clamp(0.0, 65535.0) as u16;
                buf.extend_from_slice(&level.to_be_bytes());
            }
        }
        out.write_all(&buf)?;
        Ok(())
    }
}
