//! Sub-grid boundary extraction and boundary diagnostics: curvature,
//! Gauss–Bonnet totals, distance to the best-fitting disk, and radial graphs.

pub(crate) mod marching;

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};
use crate::optimize::nelder_mead;

/// Minimum vertex count for curvature estimation.
pub const MIN_CURVATURE_VERTICES: usize = 16;
/// Number of rays used for radial graphs.
pub const RADIAL_SAMPLES: usize = 512;
/// Evaluation budget of the best-disk center search.
pub const DISK_FIT_EVALS: usize = 200;

/// A closed polyline, positively oriented when it bounds its region on the
/// left. Vertices are kept in cell units internally.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    grid: Grid,
    pts: Vec<[f64; 2]>,
}

impl Contour {
    pub(crate) fn from_cell_points(grid: Grid, pts: Vec<[f64; 2]>) -> Self {
        Self { grid, pts }
    }

    /// Contour from world-coordinate vertices (closed implicitly).
    pub fn from_world(grid: Grid, vertices: &[[f64; 2]]) -> Self {
        let pts = vertices.iter().map(|&p| grid.to_cell(p)).collect();
        Self { grid, pts }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub(crate) fn cell_points(&self) -> &[[f64; 2]] {
        &self.pts
    }

    fn to_world(&self, p: [f64; 2]) -> [f64; 2] {
        let o = self.grid.origin();
        let s = self.grid.spacing();
        [o[0] + s * p[0], o[1] + s * p[1]]
    }

    pub fn vertex(&self, k: usize) -> [f64; 2] {
        self.to_world(self.pts[k])
    }

    pub fn vertices(&self) -> Vec<[f64; 2]> {
        self.pts.iter().map(|&p| self.to_world(p)).collect()
    }

    /// Shoelace area, positive for counter-clockwise loops.
    pub fn signed_area(&self) -> f64 {
        marching::polygon_area(&self.pts) * self.grid.spacing().powi(2)
    }

    pub fn length(&self) -> f64 {
        marching::polygon_length(&self.pts) * self.grid.spacing()
    }

    pub fn is_positively_oriented(&self) -> bool {
        marching::polygon_area(&self.pts) > 0.0
    }

    /// Area centroid in cell units.
    fn centroid_cells(&self) -> [f64; 2] {
        let n = self.pts.len();
        let o = self.pts[0];
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for k in 0..n {
            let p = [self.pts[k][0] - o[0], self.pts[k][1] - o[1]];
            let q = [self.pts[(k + 1) % n][0] - o[0], self.pts[(k + 1) % n][1] - o[1]];
            let cross = p[0] * q[1] - q[0] * p[1];
            a += cross;
            cx += (p[0] + q[0]) * cross;
            cy += (p[1] + q[1]) * cross;
        }
        if a.abs() < 1e-300 {
            let m = self.pts.iter().fold([0.0, 0.0], |s, p| [s[0] + p[0], s[1] + p[1]]);
            return [m[0] / n as f64, m[1] / n as f64];
        }
        [o[0] + cx / (3.0 * a), o[1] + cy / (3.0 * a)]
    }

    pub fn centroid(&self) -> [f64; 2] {
        self.to_world(self.centroid_cells())
    }

    /// Arclength weight of each vertex: half of each adjacent edge (cell units).
    fn weights_cells(&self) -> Vec<f64> {
        let n = self.pts.len();
        let edge: Vec<f64> = (0..n)
            .map(|k| {
                let (a, b) = (self.pts[k], self.pts[(k + 1) % n]);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .collect();
        (0..n).map(|k| 0.5 * (edge[k] + edge[(k + n - 1) % n])).collect()
    }
}

/// Marching-squares contours of `{field <= level}`.
pub fn extract_contours(field: &GridField, level: f64) -> Result<Vec<Contour>> {
    let segs = marching::segments(field, level);
    let stitched = marching::stitch(field, &segs);
    if stitched.open_chains > 0 {
        return Err(Error::BoundaryClipped);
    }
    Ok(stitched
        .loops
        .into_iter()
        .map(|pts| Contour::from_cell_points(*field.grid(), pts))
        .collect())
}

/// Per-vertex curvature and its summary statistics (world units).
#[derive(Debug, Clone)]
pub struct CurvatureProfile {
    pub kappa: Vec<f64>,
    /// Arclength weight per vertex; they sum to the contour length.
    pub weights: Vec<f64>,
    /// Outward unit normal per vertex.
    pub normals: Vec<[f64; 2]>,
    /// Arclength average of curvature.
    pub mean: f64,
    /// `||kappa - mean||` in L2 of arclength.
    pub l2_deviation: f64,
    /// Integral of curvature against arclength.
    pub total: f64,
    pub length: f64,
}

impl CurvatureProfile {
    /// `||kappa - c||` in L2 of arclength.
    pub fn l2_distance_to(&self, c: f64) -> f64 {
        self.kappa.iter().zip(&self.weights).map(|(k, w)| (k - c).powi(2) * w).sum::<f64>().sqrt()
    }
}

/// Signed curvature of the circle fitted to points given in a local frame
/// whose x axis is the tangent and y axis the left normal. Lines give 0.
fn fit_local_circle(local: &[[f64; 2]]) -> f64 {
    // y = a (x^2 + y^2) + b x + d, least squares
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for p in local {
        let row = [p[0] * p[0] + p[1] * p[1], p[0], 1.0];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += row[r] * row[c];
            }
            rhs[r] += row[r] * p[1];
        }
    }
    let Some([a, b, d]) = solve3(m, rhs) else {
        return 0.0;
    };
    let disc = b * b + 1.0 - 4.0 * a * d;
    if disc > 0.0 {
        2.0 * a / disc.sqrt()
    } else {
        2.0 * a
    }
}

pub(crate) fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    if d.abs() <= 1e-14 * scale.powi(3) {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for row in 0..3 {
            mk[row][k] = r[row];
        }
        *o = det(&mk) / d;
    }
    Some(out)
}

/// Curvature by least-squares circle fits over a centered arclength window of
/// length `max(6 * spacing, length / 128)`.
pub fn curvature_profile(contour: &Contour) -> Result<CurvatureProfile> {
    let n = contour.len();
    if n < MIN_CURVATURE_VERTICES {
        return Err(Error::TooFewVertices(n, MIN_CURVATURE_VERTICES));
    }
    let s = contour.grid.spacing();
    let pts = &contour.pts;
    let weights_c = contour.weights_cells();
    let length_c: f64 = weights_c.iter().sum();
    let half_window = 0.5 * (6.0f64).max(length_c / 128.0);
    let edge: Vec<f64> = (0..n)
        .map(|k| {
            let (a, b) = (pts[k], pts[(k + 1) % n]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .collect();
    let max_side = (n - 1) / 2;

    let mut kappa = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut local = Vec::new();
    for i in 0..n {
        let prev = pts[(i + n - 1) % n];
        let next = pts[(i + 1) % n];
        let (tx, ty) = (next[0] - prev[0], next[1] - prev[1]);
        let tn = tx.hypot(ty).max(1e-300);
        let t = [tx / tn, ty / tn];
        let nl = [-t[1], t[0]];
        normals.push([t[1], -t[0]]);

        local.clear();
        local.push([0.0, 0.0]);
        let add = |q: [f64; 2], local: &mut Vec<[f64; 2]>| {
            let d = [q[0] - pts[i][0], q[1] - pts[i][1]];
            local.push([d[0] * t[0] + d[1] * t[1], d[0] * nl[0] + d[1] * nl[1]]);
        };
        let mut acc = 0.0;
        let mut k = 0;
        while k < max_side {
            acc += edge[(i + k) % n];
            k += 1;
            if acc > half_window && k > 2 {
                break;
            }
            add(pts[(i + k) % n], &mut local);
        }
        let mut acc = 0.0;
        let mut k = 0;
        while k < max_side {
            k += 1;
            acc += edge[(i + n - k) % n];
            if acc > half_window && k > 2 {
                break;
            }
            add(pts[(i + n - k) % n], &mut local);
        }
        kappa.push(fit_local_circle(&local) / s);
    }

    let weights: Vec<f64> = weights_c.iter().map(|w| w * s).collect();
    let length = length_c * s;
    let total: f64 = kappa.iter().zip(&weights).map(|(k, w)| k * w).sum();
    let mean = total / length;
    let l2_deviation = kappa.iter().zip(&weights).map(|(k, w)| (k - mean).powi(2) * w).sum::<f64>().sqrt();
    Ok(CurvatureProfile { kappa, weights, normals, mean, l2_deviation, total, length })
}

/// Curvature statistics pooled over several contours: the mean is taken over
/// the union, as for a region with several boundary components.
#[derive(Debug, Clone)]
pub struct PooledCurvature {
    pub profiles: Vec<CurvatureProfile>,
    pub mean: f64,
    pub l2_deviation: f64,
    pub length: f64,
}

impl PooledCurvature {
    pub fn new(contours: &[Contour]) -> Result<Self> {
        let profiles = contours.iter().map(curvature_profile).collect::<Result<Vec<_>>>()?;
        let length: f64 = profiles.iter().map(|p| p.length).sum();
        let total: f64 = profiles.iter().map(|p| p.total).sum();
        let mean = if length > 0.0 { total / length } else { 0.0 };
        let mut pooled = Self { profiles, mean, l2_deviation: 0.0, length };
        pooled.l2_deviation = pooled.l2_distance_to(mean);
        Ok(pooled)
    }

    pub fn l2_distance_to(&self, c: f64) -> f64 {
        self.profiles
            .iter()
            .map(|p| p.kappa.iter().zip(&p.weights).map(|(k, w)| (k - c).powi(2) * w).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

/// Center and sup-distance of the disk of area `v` that best fits the union
/// of the contours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskFit {
    pub center: [f64; 2],
    pub radius: f64,
    pub value: f64,
}

/// `min_c max_x | |x - c| - r |` over contour vertices, `r = sqrt(v / pi)`,
/// by a simplex search seeded at the area centroid of the union.
pub fn hausdorff_to_disk(contours: &[Contour], v: f64) -> Result<DiskFit> {
    let Some(first) = contours.first() else {
        return Err(Error::InvalidArgument("no contours".into()));
    };
    let grid = first.grid;
    let s = grid.spacing();
    let r_cells = (v / PI).sqrt() / s;
    let pts: Vec<[f64; 2]> = contours.iter().flat_map(|c| c.pts.iter().copied()).collect();

    // area-weighted centroid of all loops
    let (mut wx, mut wy, mut wa) = (0.0, 0.0, 0.0);
    for c in contours {
        let a = marching::polygon_area(&c.pts);
        let ctr = c.centroid_cells();
        wx += a * ctr[0];
        wy += a * ctr[1];
        wa += a;
    }
    let seed = if wa.abs() > 1e-12 {
        [wx / wa, wy / wa]
    } else {
        contours[0].centroid_cells()
    };

    let objective = |c: &[f64]| -> f64 {
        pts.iter()
            .map(|p| ((p[0] - c[0]).hypot(p[1] - c[1]) - r_cells).abs())
            .fold(0.0, f64::max)
    };
    let step = (0.1 * r_cells).max(1.0);
    let (c, val) = nelder_mead(objective, &seed, &[step, step], DISK_FIT_EVALS);
    let o = grid.origin();
    Ok(DiskFit {
        center: [o[0] + s * c[0], o[1] + s * c[1]],
        radius: r_cells * s,
        value: val * s,
    })
}

/// Radial graph `g` with `boundary = { (r + g(theta)) (cos, sin) + center }`,
/// `r` the radius of the disk with the contour's area, sampled at
/// [`RADIAL_SAMPLES`] equispaced angles.
pub fn radial_graph(contour: &Contour, center: [f64; 2]) -> Result<Vec<f64>> {
    radial_graph_with(contour, center, RADIAL_SAMPLES)
}

pub fn radial_graph_with(contour: &Contour, center: [f64; 2], samples: usize) -> Result<Vec<f64>> {
    let s = contour.grid.spacing();
    let c = contour.grid.to_cell(center);
    let r_cells = (marching::polygon_area(&contour.pts).abs() / PI).sqrt();
    let n = contour.pts.len();
    let mut out = Vec::with_capacity(samples);
    for k in 0..samples {
        let th = 2.0 * PI * k as f64 / samples as f64;
        let u = [th.cos(), th.sin()];
        let mut hits = 0;
        let mut rho = 0.0;
        for e in 0..n {
            let a = contour.pts[e];
            let b = contour.pts[(e + 1) % n];
            let d = [b[0] - a[0], b[1] - a[1]];
            // c + rho u = a + t d
            let den = u[0] * d[1] - u[1] * d[0];
            if den.abs() < 1e-300 {
                continue;
            }
            let w = [a[0] - c[0], a[1] - c[1]];
            let rr = (w[0] * d[1] - w[1] * d[0]) / den;
            let t = (w[0] * u[1] - w[1] * u[0]) / den;
            if (0.0..1.0).contains(&t) && rr > 0.0 {
                hits += 1;
                rho = rr;
            }
        }
        if hits != 1 {
            return Err(Error::NotStarShaped);
        }
        out.push((rho - r_cells) * s);
    }
    Ok(out)
}

/// Symmetric Hausdorff distance between two boundaries, each given as a union
/// of closed polylines on the same grid.
pub fn hausdorff_between(a: &[Contour], b: &[Contour]) -> f64 {
    let s = a.first().or(b.first()).map_or(1.0, |c| c.grid.spacing());
    directed(a, b).max(directed(b, a)) * s
}

fn directed(from: &[Contour], to: &[Contour]) -> f64 {
    let mut worst: f64 = 0.0;
    for c in from {
        for &p in &c.pts {
            let mut best = f64::INFINITY;
            for t in to {
                let n = t.pts.len();
                for k in 0..n {
                    best = best.min(crate::distance::point_segment_distance(p, t.pts[k], t.pts[(k + 1) % n]));
                }
            }
            worst = worst.max(best);
        }
    }
    worst
}

/// Writes `contour,x,y,kappa,arclength` rows, arclength cumulative per contour.
pub fn write_contours_csv<W: Write>(mut out: W, contours: &[Contour]) -> Result<()> {
    writeln!(out, "contour,x,y,kappa,arclength")?;
    for (ci, c) in contours.iter().enumerate() {
        let kappa = curvature_profile(c).map(|p| p.kappa).unwrap_or_else(|_| vec![f64::NAN; c.len()]);
        let mut arc = 0.0;
        let verts = c.vertices();
        for (k, p) in verts.iter().enumerate() {
            if k > 0 {
                let q = verts[k - 1];
                arc += (p[0] - q[0]).hypot(p[1] - q[1]);
            }
            writeln!(out, "{ci},{},{},{},{}", p[0], p[1], kappa[k], arc)?;
        }
    }
    Ok(())
}
