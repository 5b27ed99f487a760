//! Analytic initial sets, rasterized as level sets and dilated to a target
//! area.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::region::Region;

/// Minimum distance, in cells, between the shape and the domain edge.
pub const DOMAIN_MARGIN_CELLS: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    Disk,
    /// Semi-axes `aspect : 1` before area normalization.
    Ellipse { aspect: f64 },
    /// Two disks of radius `lobe_radius` centered at `(+-separation, 0)`,
    /// joined by a bar of half-width `neck_half_width`.
    Dumbbell { lobe_radius: f64, separation: f64, neck_half_width: f64 },
    /// `r(theta) = 1 + amplitude cos(lobes theta)`.
    Star { amplitude: f64, lobes: u32 },
    /// `r(theta) = 1 + sum amp_k cos(k theta + phase_k)`.
    FourierDisk { modes: Vec<FourierMode> },
    /// Axis-aligned rectangle with the given side ratio `width : 1`.
    Rectangle { aspect: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierMode {
    pub k: u32,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub kind: ShapeKind,
    pub center: [f64; 2],
    /// Counter-clockwise rotation in radians.
    pub rotation: f64,
}

impl Shape {
    pub fn new(kind: ShapeKind) -> Self {
        Self { kind, center: [0.0, 0.0], rotation: 0.0 }
    }

    /// Level-set function of the unit-scale shape in its own frame, close to
    /// a signed distance near the boundary.
    fn unit_level(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            ShapeKind::Disk => x.hypot(y) - 1.0,
            ShapeKind::Ellipse { aspect } => {
                let (a, b) = (*aspect, 1.0);
                let g = (x / a).powi(2) + (y / b).powi(2) - 1.0;
                let grad = (2.0 * x / (a * a)).hypot(2.0 * y / (b * b));
                if grad > 1e-12 {
                    g / grad
                } else {
                    -b
                }
            }
            ShapeKind::Dumbbell { lobe_radius, separation, neck_half_width } => {
                let d1 = (x + separation).hypot(y) - lobe_radius;
                let d2 = (x - separation).hypot(y) - lobe_radius;
                let neck = box_distance(x, y, *separation, *neck_half_width);
                d1.min(d2).min(neck)
            }
            ShapeKind::Star { amplitude, lobes } => {
                let k = *lobes as f64;
                radial_level(x, y, |th| 1.0 + amplitude * (k * th).cos(), |th| -amplitude * k * (k * th).sin())
            }
            ShapeKind::FourierDisk { modes } => radial_level(
                x,
                y,
                |th| 1.0 + modes.iter().map(|m| m.amplitude * (m.k as f64 * th + m.phase).cos()).sum::<f64>(),
                |th| {
                    -modes
                        .iter()
                        .map(|m| m.amplitude * m.k as f64 * (m.k as f64 * th + m.phase).sin())
                        .sum::<f64>()
                },
            ),
            ShapeKind::Rectangle { aspect } => box_distance(x, y, 0.5 * aspect, 0.5),
        }
    }

    /// Level set of the shape dilated by `scale`, in world coordinates.
    pub fn level(&self, p: [f64; 2], scale: f64) -> f64 {
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        let (c, s) = (self.rotation.cos(), self.rotation.sin());
        let (x, y) = (c * dx + s * dy, -s * dx + c * dy);
        scale * self.unit_level(x / scale, y / scale)
    }
}

fn box_distance(x: f64, y: f64, hx: f64, hy: f64) -> f64 {
    let qx = x.abs() - hx;
    let qy = y.abs() - hy;
    qx.max(0.0).hypot(qy.max(0.0)) + qx.max(qy).min(0.0)
}

/// `(r - R(theta)) / sqrt(1 + (R'/r)^2)`: first-order distance to a
/// star-shaped radial graph.
fn radial_level(x: f64, y: f64, radius: impl Fn(f64) -> f64, slope: impl Fn(f64) -> f64) -> f64 {
    let r = x.hypot(y);
    let th = y.atan2(x);
    let g = r - radius(th);
    if r < 1e-12 {
        return g;
    }
    g / (1.0 + (slope(th) / r).powi(2)).sqrt()
}

/// Rasterizes `shape` on `grid` and dilates it uniformly about its center so
/// that its contour area is `v` (relative error below 1e-9).
pub fn generate_initial(grid: &Grid, shape: &Shape, v: f64) -> Result<Region> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidArgument(format!("target area {v}")));
    }
    let area_at = |scale: f64| -> Result<(f64, Region)> {
        let r = Region::from_fn(*grid, |p| shape.level(p, scale))?;
        Ok((r.area(), r))
    };
    // bracket the scale
    let [x0, y0, x1, y1] = grid.center_bounds();
    let box_area = (x1 - x0) * (y1 - y0);
    if v >= box_area {
        return Err(Error::ShapeOutOfDomain);
    }
    let mut lo = 1e-3;
    let mut hi = 1.0;
    while area_at(hi)?.0 < v {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::ShapeOutOfDomain);
        }
    }
    while area_at(lo)?.0 > v {
        lo *= 0.5;
        if lo < 1e-9 {
            return Err(Error::InvalidArgument("target area below grid resolution".into()));
        }
    }
    let mut best: Option<(f64, Region)> = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (a, region) = area_at(mid)?;
        let err = (a - v).abs();
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, region));
        }
        if err <= 1e-10 * v || hi - lo <= 1e-15 * hi {
            break;
        }
        if a < v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (_, region) = best.expect("at least one bisection step");
    check_margin(&region)?;
    Ok(region)
}

fn check_margin(region: &Region) -> Result<()> {
    let g = region.grid();
    let m = DOMAIN_MARGIN_CELLS;
    let hi = [(g.nx() - 1) as f64, (g.ny() - 1) as f64];
    let contours = region.contours().map_err(|_| Error::ShapeOutOfDomain)?;
    let inside = |c: [f64; 2]| c[0] >= m && c[1] >= m && c[0] <= hi[0] - m && c[1] <= hi[1] - m;
    if contours.iter().all(|c| c.vertices().iter().all(|&p| inside(g.to_cell(p)))) {
        Ok(())
    } else {
        Err(Error::ShapeOutOfDomain)
    }
}

/// Area of the unit disk, the default target volume.
pub const UNIT_DISK_AREA: f64 = PI;
