//! Signed distance to the sub-grid contour of a region.
//!
//! Cells within [`BAND`] cells of the contour get the exact distance to the
//! segment soup. Every other cell looks up its nearest band cell through a
//! separable squared-distance transform and measures the exact distance to the
//! segments recorded there.

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::region::Region;

/// Width, in cells, of the band where distances are computed directly.
const BAND: f64 = 2.0;

/// Signed distance, negative inside, to the interpolated boundary of `region`.
pub fn signed_distance(region: &Region) -> Result<GridField> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if region.is_full() {
        return Err(Error::FullRegion);
    }
    let grid = *region.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let segs = region.boundary_segments();
    if segs.is_empty() {
        // every cell on one side but the contour degenerated to points; fall
        // back to the indicator interface
        return Err(Error::EmptyRegion);
    }

    let mut best = vec![f64::INFINITY; nx * ny];
    let mut owner = vec![usize::MAX; nx * ny];
    let reach = BAND.ceil() as i64;
    for (id, seg) in segs.iter().enumerate() {
        let lo_x = (seg.a[0].min(seg.b[0]).floor() as i64 - reach).max(0);
        let hi_x = (seg.a[0].max(seg.b[0]).ceil() as i64 + reach).min(nx as i64 - 1);
        let lo_y = (seg.a[1].min(seg.b[1]).floor() as i64 - reach).max(0);
        let hi_y = (seg.a[1].max(seg.b[1]).ceil() as i64 + reach).min(ny as i64 - 1);
        for j in lo_y..=hi_y {
            for i in lo_x..=hi_x {
                let d = point_segment_distance([i as f64, j as f64], seg.a, seg.b);
                let idx = j as usize * nx + i as usize;
                if d < best[idx] {
                    best[idx] = d;
                    owner[idx] = id;
                }
            }
        }
    }

    let seeds: Vec<bool> = best.iter().map(|&d| d <= BAND).collect();
    let nearest = feature_transform(&seeds, nx, ny);

    let phi = region.level_set().values();
    let s = grid.spacing();
    let mut out = vec![0.0; nx * ny];
    for idx in 0..nx * ny {
        let d = if seeds[idx] {
            best[idx]
        } else {
            let q = nearest[idx];
            let (qi, qj) = (q % nx, q / nx);
            let p = [(idx % nx) as f64, (idx / nx) as f64];
            let mut d = f64::INFINITY;
            for dj in -2i64..=2 {
                for di in -2i64..=2 {
                    let (ci, cj) = (qi as i64 + di, qj as i64 + dj);
                    if ci < 0 || cj < 0 || ci >= nx as i64 || cj >= ny as i64 {
                        continue;
                    }
                    let c = cj as usize * nx + ci as usize;
                    if seeds[c] {
                        let seg = &segs[owner[c]];
                        d = d.min(point_segment_distance(p, seg.a, seg.b));
                    }
                }
            }
            d
        };
        out[idx] = if phi[idx] <= 0.0 { -d * s } else { d * s };
    }
    Ok(GridField::from_parts(grid, out))
}

pub(crate) fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let w = [p[0] - a[0], p[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 { ((w[0] * d[0] + w[1] * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (w[0] - t * d[0]).hypot(w[1] - t * d[1])
}

/// Index of the nearest seed cell (Euclidean, between cell centers) for every
/// cell, by two passes of the lower-envelope-of-parabolas transform.
fn feature_transform(seeds: &[bool], nx: usize, ny: usize) -> Vec<usize> {
    // pass 1: along x within each row; nearest seed column per cell
    let mut col = vec![None; nx * ny];
    let mut f = vec![None; nx.max(ny)];
    let mut arg = vec![None; nx.max(ny)];
    let mut env = Envelope::new(nx.max(ny));
    for j in 0..ny {
        for i in 0..nx {
            f[i] = seeds[j * nx + i].then_some(0.0);
        }
        env.run(&f[..nx], &mut arg[..nx]);
        col[j * nx..(j + 1) * nx].copy_from_slice(&arg[..nx]);
    }
    // pass 2: along y using the row results as costs
    let mut out = vec![0usize; nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            f[j] = col[j * nx + i].map(|c| (c as f64 - i as f64).powi(2));
        }
        env.run(&f[..ny], &mut arg[..ny]);
        for j in 0..ny {
            let jj = arg[j].expect("at least one seed");
            out[j * nx + i] = jj * nx + col[jj * nx + i].expect("finite cost row");
        }
    }
    out
}

/// Scratch space for the 1D squared-distance lower envelope.
struct Envelope {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Self { v: vec![0; n], z: vec![0.0; n + 1] }
    }

    /// For each `q`, the `p` minimizing `(q - p)^2 + f[p]` over defined `f[p]`.
    fn run(&mut self, f: &[Option<f64>], arg: &mut [Option<usize>]) {
        let (v, z) = (&mut self.v, &mut self.z);
        let mut k: Option<usize> = None;
        for (q, fq) in f.iter().enumerate() {
            let Some(fq) = *fq else { continue };
            let Some(mut kk) = k else {
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                k = Some(0);
                continue;
            };
            loop {
                let p = v[kk];
                let fp = f[p].expect("envelope holds defined entries");
                let sx = ((fq + (q * q) as f64) - (fp + (p * p) as f64)) / (2.0 * (q - p) as f64);
                if sx <= z[kk] && kk > 0 {
                    kk -= 1;
                    continue;
                }
                if sx <= z[kk] {
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                } else {
                    kk += 1;
                    v[kk] = q;
                    z[kk] = sx;
                    z[kk + 1] = f64::INFINITY;
                }
                break;
            }
            k = Some(kk);
        }
        if k.is_none() {
            arg.iter_mut().for_each(|a| *a = None);
            return;
        }
        let mut kk = 0;
        for (q, a) in arg.iter_mut().enumerate().take(f.len()) {
            while z[kk + 1] < q as f64 {
                kk += 1;
            }
            *a = Some(v[kk]);
        }
    }
}
