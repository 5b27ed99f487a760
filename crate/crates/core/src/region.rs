//! Regions of the plane represented by a level-set field on the grid.

use std::sync::OnceLock;

use crate::boundary::marching::{self, Segment, Stitched};
use crate::boundary::Contour;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};

/// Loops whose enclosed area is below this many squared cells are kept in the
/// indicator and in area/perimeter, but excluded from curvature diagnostics.
/// Islands of one to three cells fall under it.
pub const DEGENERATE_LOOP_AREA: f64 = 2.0;

#[derive(Debug)]
struct Boundary {
    stitched: Stitched,
    /// Signed area in squared cell units.
    area: f64,
    /// Length in cell units.
    length: f64,
}

/// The set `{phi <= 0}` of a sampled level-set function. The boundary is the
/// marching-squares contour of `phi`, and area and perimeter are always
/// measured on that contour.
#[derive(Debug)]
pub struct Region {
    phi: GridField,
    boundary: OnceLock<Boundary>,
}

impl Clone for Region {
    fn clone(&self) -> Self {
        Self::from_level_set(self.phi.clone())
    }
}

impl Region {
    pub fn from_level_set(phi: GridField) -> Self {
        Self { phi, boundary: OnceLock::new() }
    }

    /// Region from an analytic level-set function sampled at cell centers.
    pub fn from_fn(grid: Grid, f: impl FnMut([f64; 2]) -> f64) -> Result<Self> {
        Ok(Self::from_level_set(GridField::from_fn(grid, f)?))
    }

    /// Region from a cell indicator. The contour runs through the midpoints
    /// between inside and outside cell centers.
    pub fn from_indicator(grid: Grid, indicator: &[bool]) -> Result<Self> {
        if indicator.len() != grid.len() {
            return Err(Error::InvalidArgument("indicator length does not match grid".into()));
        }
        let h = 0.5 * grid.spacing();
        let values = indicator.iter().map(|&b| if b { -h } else { h }).collect();
        Ok(Self::from_level_set(GridField::from_parts(grid, values)))
    }

    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }

    pub fn level_set(&self) -> &GridField {
        &self.phi
    }

    #[inline]
    pub fn contains_cell(&self, idx: usize) -> bool {
        self.phi.values()[idx] <= 0.0
    }

    pub fn indicator(&self) -> Vec<bool> {
        self.phi.values().iter().map(|&v| v <= 0.0).collect()
    }

    pub fn cell_count(&self) -> usize {
        self.phi.values().iter().filter(|&&v| v <= 0.0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_count() == 0
    }

    pub fn is_full(&self) -> bool {
        self.cell_count() == self.grid().len()
    }

    fn boundary(&self) -> &Boundary {
        self.boundary.get_or_init(|| {
            let segs = marching::segments(&self.phi, 0.0);
            let stitched = marching::stitch(&self.phi, &segs);
            let area = stitched.loops.iter().map(|l| marching::polygon_area(l)).sum();
            let length = stitched.loops.iter().map(|l| marching::polygon_length(l)).sum();
            Boundary { stitched, area, length }
        })
    }

    /// True when part of the boundary runs into the edge of the domain.
    pub fn is_clipped(&self) -> bool {
        self.boundary().stitched.open_chains > 0
    }

    /// Enclosed area: shoelace over the closed contour loops (holes count
    /// negatively). For a clipped region the cell-by-cell reconstruction of
    /// the same piecewise-linear set is returned instead.
    pub fn area(&self) -> f64 {
        let s2 = self.grid().spacing().powi(2);
        let b = self.boundary();
        if b.stitched.open_chains > 0 {
            marching::sublevel_area_cells(&self.phi, 0.0) * s2
        } else {
            b.area * s2
        }
    }

    /// Total length of the closed contour loops.
    pub fn perimeter(&self) -> f64 {
        self.boundary().length * self.grid().spacing()
    }

    /// All closed boundary loops, including degenerate islands.
    pub fn contours(&self) -> Result<Vec<Contour>> {
        let b = self.boundary();
        if b.stitched.open_chains > 0 {
            return Err(Error::BoundaryClipped);
        }
        Ok(b.stitched.loops.iter().map(|l| Contour::from_cell_points(*self.grid(), l.clone())).collect())
    }

    /// Closed loops used for curvature diagnostics (degenerate islands dropped).
    pub fn diagnostic_contours(&self) -> Result<Vec<Contour>> {
        let b = self.boundary();
        if b.stitched.open_chains > 0 {
            return Err(Error::BoundaryClipped);
        }
        Ok(b
            .stitched
            .loops
            .iter()
            .filter(|l| marching::polygon_area(l).abs() >= DEGENERATE_LOOP_AREA)
            .map(|l| Contour::from_cell_points(*self.grid(), l.clone()))
            .collect())
    }

    pub fn loop_count(&self) -> usize {
        self.boundary().stitched.loops.len()
    }

    /// Every boundary segment in cell units, whether or not it belongs to a
    /// closed loop.
    pub(crate) fn boundary_segments(&self) -> Vec<Segment> {
        marching::segments(&self.phi, 0.0)
    }

    /// Same region on a grid whose origin moved by whole cells.
    pub fn translated_grid(&self, di: i64, dj: i64) -> Self {
        let grid = self.grid().translated(di, dj);
        Self::from_level_set(GridField::from_parts(grid, self.phi.values().to_vec()))
    }
}

/// Area of `{field <= level}` in world units, reconstructed cell by cell.
pub fn sublevel_area(field: &GridField, level: f64) -> f64 {
    marching::sublevel_area_cells(field, level) * field.grid().spacing().powi(2)
}
