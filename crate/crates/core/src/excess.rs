//! Caloric frames, the excess of a flow window against a shifted caloric
//! subgraph, sub/supergraph functions, their parabolic rescalings, and
//! frame fitting across scales.
//!
//! Orientation: `omega` is the outward normal, the region lies below the
//! graph `(x - x0) . omega = P + Lambda`, so a disk of radius `R` has
//! `A = -1/R` at every boundary point. The time argument of `P` is measured
//! from the anchor time `t0`.

use std::f64::consts::PI;
use std::io::Write;

use crate::boundary::{curvature_profile, marching::Segment};
use crate::error::{Error, Result};
use crate::mms::FlowTrace;
use crate::optimize::nelder_mead;
use crate::region::Region;

/// Evaluation budget of [`fit_frame`].
pub const FIT_EVALS: usize = 400;
/// Smallest spatial radius, in cells, accepted by [`fit_frame`].
pub const MIN_FIT_CELLS: f64 = 2.0;
/// Height-to-radius ratio of the default cylinder.
pub const DEFAULT_HEIGHT_RATIO: f64 = 2.0;

/// `(x0, omega, A, c)`, defining `P(y, tau) = A y^2 / 2 + b tau + c` with
/// `b = A` on the line orthogonal to `omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaloricFrame {
    pub x0: [f64; 2],
    omega: [f64; 2],
    pub a: f64,
    pub c: f64,
}

impl CaloricFrame {
    pub fn new(x0: [f64; 2], omega: [f64; 2], a: f64, c: f64) -> Result<Self> {
        let n = omega[0].hypot(omega[1]);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidArgument("direction must be a nonzero vector".into()));
        }
        Ok(Self { x0, omega: [omega[0] / n, omega[1] / n], a, c })
    }

    pub fn from_angle(x0: [f64; 2], angle: f64, a: f64, c: f64) -> Self {
        Self { x0, omega: [angle.cos(), angle.sin()], a, c }
    }

    pub fn omega(&self) -> [f64; 2] {
        self.omega
    }

    pub fn angle(&self) -> f64 {
        self.omega[1].atan2(self.omega[0])
    }

    /// Trace of `A`; recomputed, never stored.
    pub fn b(&self) -> f64 {
        self.a
    }

    /// Unit base direction `e`, with `(e, omega)` positively oriented.
    pub fn base(&self) -> [f64; 2] {
        [self.omega[1], -self.omega[0]]
    }

    /// Base and height coordinates `(y, z)` of a point.
    pub fn local(&self, p: [f64; 2]) -> (f64, f64) {
        let d = [p[0] - self.x0[0], p[1] - self.x0[1]];
        let e = self.base();
        (d[0] * e[0] + d[1] * e[1], d[0] * self.omega[0] + d[1] * self.omega[1])
    }

    pub fn point(&self, y: f64, z: f64) -> [f64; 2] {
        let e = self.base();
        [self.x0[0] + y * e[0] + z * self.omega[0], self.x0[1] + y * e[1] + z * self.omega[1]]
    }

    /// `P(y, tau)` with `tau = t - t0`.
    pub fn p(&self, y: f64, tau: f64) -> f64 {
        0.5 * self.a * y * y + self.b() * tau + self.c
    }
}

/// `{ |y| < rho, |z| < r1 }` in the frame's coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub rho: f64,
    pub r1: f64,
}

impl Cylinder {
    pub fn new(rho: f64, r1: f64) -> Result<Self> {
        if !(rho > 0.0 && r1 > 0.0) {
            return Err(Error::InvalidArgument(format!("cylinder radii {rho}, {r1}")));
        }
        Ok(Self { rho, r1 })
    }

    /// Cylinder with the default height `2 rho`.
    pub fn with_radius(rho: f64) -> Result<Self> {
        Self::new(rho, DEFAULT_HEIGHT_RATIO * rho)
    }
}

/// `Lambda(t_k)` around an anchor step `k0`, with `Lambda(t_k0) = 0` and
/// `Lambda(t_k) - Lambda(t_{k-1}) = lambda_k h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSeries {
    pub h: f64,
    pub k0: usize,
    lambdas: Vec<f64>,
    values: Vec<f64>,
}

impl LambdaSeries {
    /// From the per-step multipliers `lambdas[k]` (index 0 is unused by the
    /// accumulation).
    pub fn from_lambdas(lambdas: &[f64], h: f64, k0: usize) -> Result<Self> {
        if k0 >= lambdas.len() {
            return Err(Error::NotOnLattice(k0 as f64 * h));
        }
        let mut values = vec![0.0; lambdas.len()];
        for k in k0 + 1..lambdas.len() {
            values[k] = values[k - 1] + lambdas[k] * h;
        }
        for k in (0..k0).rev() {
            values[k] = values[k + 1] - lambdas[k + 1] * h;
        }
        Ok(Self { h, k0, lambdas: lambdas.to_vec(), values })
    }

    pub fn t0(&self) -> f64 {
        self.k0 as f64 * self.h
    }

    pub fn at(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn lambda(&self, k: usize) -> f64 {
        self.lambdas[k]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `h * sum_{j = k+1}^{k0} |lambda_j|`, the accumulated `|lambda|` from
    /// `t_k` to `t0` (zero for `k >= k0`).
    pub fn abs_accumulated(&self, k: usize) -> f64 {
        if k >= self.k0 {
            return 0.0;
        }
        self.lambdas[k + 1..=self.k0].iter().map(|l| l.abs() * self.h).sum()
    }
}

/// Step index of `t` on a lattice of spacing `h`.
pub fn lattice_step(t: f64, h: f64) -> Result<usize> {
    let k = (t / h).round();
    if k < 0.0 || (k * h - t).abs() > 1e-9 * h.max(t.abs()) {
        return Err(Error::NotOnLattice(t));
    }
    Ok(k as usize)
}

pub fn lambda_accumulate(trace: &FlowTrace, t0: f64) -> Result<LambdaSeries> {
    let k0 = lattice_step(t0, trace.h)?;
    if k0 >= trace.records.len() {
        return Err(Error::NotOnLattice(t0));
    }
    LambdaSeries::from_lambdas(&trace.lambdas(), trace.h, k0)
}

/// One time level of a window: step index and region.
pub type Slice<'a> = (usize, &'a Region);

/// Boundary segments of one time slice near the anchor.
type SegmentSlice = (usize, Vec<([f64; 2], [f64; 2])>);

fn check_inside(region: &Region, frame: &CaloricFrame, cyl: &Cylinder) -> Result<()> {
    let [x0, y0, x1, y1] = region.grid().center_bounds();
    for (sy, sz) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
        let p = frame.point(sy * cyl.rho, sz * cyl.r1);
        if p[0] < x0 || p[0] > x1 || p[1] < y0 || p[1] > y1 {
            return Err(Error::CylinderOutsideDomain);
        }
    }
    Ok(())
}

/// Excess of one region at step `k` against the frame. Samples are the cell
/// centers of the symmetric difference inside the cylinder and the contour
/// crossings of equispaced fibers (about two per cell); every crossing lies
/// in the closure of the symmetric difference.
pub fn excess_at(region: &Region, k: usize, frame: &CaloricFrame, cyl: &Cylinder, lambda: &LambdaSeries) -> Result<f64> {
    check_inside(region, frame, cyl)?;
    let g = region.grid();
    let tau = (k as f64 - lambda.k0 as f64) * lambda.h;
    let shift = lambda.at(k);
    // bounding box of the cylinder in cells
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for (sy, sz) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
        let c = g.to_cell(frame.point(sy * cyl.rho, sz * cyl.r1));
        for d in 0..2 {
            lo[d] = lo[d].min(c[d]);
            hi[d] = hi[d].max(c[d]);
        }
    }
    let i0 = lo[0].floor().max(0.0) as usize;
    let j0 = lo[1].floor().max(0.0) as usize;
    let i1 = (hi[0].ceil() as usize).min(g.nx() - 1);
    let j1 = (hi[1].ceil() as usize).min(g.ny() - 1);
    let mut worst: f64 = 0.0;
    for j in j0..=j1 {
        for i in i0..=i1 {
            let (y, z) = frame.local(g.point(i, j));
            if y.abs() >= cyl.rho || z.abs() >= cyl.r1 {
                continue;
            }
            let graph = frame.p(y, tau) + shift;
            let in_p = z < graph;
            if in_p != region.contains_cell(g.index(i, j)) {
                worst = worst.max((z - graph).abs());
            }
        }
    }
    let ys = base_samples(cyl.rho, default_base_count(cyl.rho, g.spacing()));
    let (lo, hi) = fiber_extremes(&world_segments(region), frame, cyl, &ys);
    for (i, y) in ys.iter().enumerate() {
        if lo[i].is_finite() {
            let graph = frame.p(*y, tau) + shift;
            worst = worst.max((lo[i] - graph).abs()).max((hi[i] - graph).abs());
        }
    }
    Ok(worst)
}

/// Maximum of [`excess_at`] over a window of regions.
pub fn excess(slices: &[Slice<'_>], frame: &CaloricFrame, cyl: &Cylinder, lambda: &LambdaSeries) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &(k, region) in slices {
        worst = worst.max(excess_at(region, k, frame, cyl, lambda)?);
    }
    Ok(worst)
}

/// Boundary segments of a region in world coordinates.
fn world_segments(region: &Region) -> Vec<([f64; 2], [f64; 2])> {
    let g = region.grid();
    let o = g.origin();
    let s = g.spacing();
    let w = |p: [f64; 2]| [o[0] + s * p[0], o[1] + s * p[1]];
    region.boundary_segments().iter().map(|seg: &Segment| (w(seg.a), w(seg.b))).collect()
}

/// Equispaced base samples strictly inside `(-rho, rho)`.
pub fn base_samples(rho: f64, n: usize) -> Vec<f64> {
    let step = 2.0 * rho / n as f64;
    (0..n).map(|i| -rho + (i as f64 + 0.5) * step).collect()
}

/// Default number of base samples: about two per cell, at least 16.
pub fn default_base_count(rho: f64, spacing: f64) -> usize {
    ((4.0 * rho / spacing).ceil() as usize).max(16)
}

/// Lowest and highest boundary heights on every fiber `y = const` of the
/// cylinder.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgraphs {
    pub y: Vec<f64>,
    pub u_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
}

/// Extreme crossing heights per fiber; infinite where a fiber has none.
fn fiber_extremes(
    segs: &[([f64; 2], [f64; 2])],
    frame: &CaloricFrame,
    cyl: &Cylinder,
    ys: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; ys.len()];
    let mut hi = vec![f64::NEG_INFINITY; ys.len()];
    let step = if ys.len() > 1 { ys[1] - ys[0] } else { 1.0 };
    for &(a, b) in segs {
        let (ya, za) = frame.local(a);
        let (yb, zb) = frame.local(b);
        if (ya.abs() >= cyl.rho && yb.abs() >= cyl.rho && ya * yb > 0.0) || ya == yb {
            continue;
        }
        let (ymin, ymax) = if ya < yb { (ya, yb) } else { (yb, ya) };
        let first = (((ymin - ys[0]) / step).floor().max(0.0)) as usize;
        for (i, &y) in ys.iter().enumerate().skip(first) {
            if y > ymax {
                break;
            }
            if y < ymin {
                continue;
            }
            let t = (y - ya) / (yb - ya);
            let z = za + t * (zb - za);
            if z.abs() < cyl.r1 {
                lo[i] = lo[i].min(z);
                hi[i] = hi[i].max(z);
            }
        }
    }
    (lo, hi)
}

fn fiber_heights(
    segs: &[([f64; 2], [f64; 2])],
    frame: &CaloricFrame,
    cyl: &Cylinder,
    ys: &[f64],
) -> Result<Subgraphs> {
    let (lo, hi) = fiber_extremes(segs, frame, cyl, ys);
    if let Some(i) = lo.iter().position(|v| !v.is_finite()) {
        return Err(Error::EmptyFiber(ys[i]));
    }
    Ok(Subgraphs { y: ys.to_vec(), u_minus: lo, u_plus: hi })
}

/// `u_-` and `u_+` at `n` equispaced base samples of the cylinder.
pub fn subgraphs(region: &Region, frame: &CaloricFrame, cyl: &Cylinder, n: usize) -> Result<Subgraphs> {
    let segs = world_segments(region);
    fiber_heights(&segs, frame, cyl, &base_samples(cyl.rho, n))
}

/// `v_r^-` and `v_r^+` on the rescaled lattice of `Q_1^-`.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledWindow {
    pub r: f64,
    pub alpha: f64,
    /// Rescaled base coordinates `y / r`.
    pub y: Vec<f64>,
    /// Steps of the window, increasing.
    pub steps: Vec<usize>,
    /// Rescaled times `(t_k - t0) / r^2`.
    pub times: Vec<f64>,
    /// `[time][sample]`.
    pub v_minus: Vec<Vec<f64>>,
    pub v_plus: Vec<Vec<f64>>,
}

/// Steps `k` with `t_k` in `(t0 - r^2, t0]`.
pub fn window_steps(k0: usize, h: f64, r: f64) -> Vec<usize> {
    (0..=k0).filter(|&k| (k0 - k) as f64 * h < r * r * (1.0 - 1e-12)).collect()
}

/// Evaluates `v_r^+-(y, t_k) = (u_+-(r y, t_k) - P(r y, t_k) - Lambda(t_k)) / r^(2 + alpha)`.
pub fn rescale_v(
    slices: &[Slice<'_>],
    frame: &CaloricFrame,
    r: f64,
    cyl: &Cylinder,
    lambda: &LambdaSeries,
    alpha: f64,
    n: usize,
) -> Result<RescaledWindow> {
    let scale = r.powf(2.0 + alpha);
    let mut out = RescaledWindow {
        r,
        alpha,
        y: base_samples(cyl.rho, n).iter().map(|y| y / r).collect(),
        steps: Vec::new(),
        times: Vec::new(),
        v_minus: Vec::new(),
        v_plus: Vec::new(),
    };
    let mut sorted: Vec<Slice<'_>> = slices.to_vec();
    sorted.sort_by_key(|s| s.0);
    for (k, region) in sorted {
        let tau = (k as f64 - lambda.k0 as f64) * lambda.h;
        let sg = subgraphs(region, frame, cyl, n)?;
        let shift = lambda.at(k);
        let f = |u: &[f64]| -> Vec<f64> {
            u.iter().zip(&sg.y).map(|(u, y)| (u - frame.p(*y, tau) - shift) / scale).collect()
        };
        out.v_minus.push(f(&sg.u_minus));
        out.v_plus.push(f(&sg.u_plus));
        out.steps.push(k);
        out.times.push(tau / (r * r));
    }
    Ok(out)
}

/// `w_r^- = v_r^- - g` and `w_r^+ = v_r^+ + g` with
/// `g(t_k) = r^(-2 alpha) h sum_{j=k+1}^{k0} |lambda_j|`.
pub fn perturb_w(v: &RescaledWindow, lambda: &LambdaSeries) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let factor = v.r.powf(-2.0 * v.alpha);
    let mut wm = Vec::with_capacity(v.steps.len());
    let mut wp = Vec::with_capacity(v.steps.len());
    for (ti, &k) in v.steps.iter().enumerate() {
        let g = factor * lambda.abs_accumulated(k);
        wm.push(v.v_minus[ti].iter().map(|x| x - g).collect());
        wp.push(v.v_plus[ti].iter().map(|x| x + g).collect());
    }
    (wm, wp)
}

/// `sup v+ - inf v-` over the lattice samples in `B_rho(y) x (t - rho^2, t]`.
pub fn oscillation(v: &RescaledWindow, center: (f64, f64), rho: f64) -> Result<f64> {
    let (yc, tc) = center;
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    for (ti, &t) in v.times.iter().enumerate() {
        if !(t > tc - rho * rho && t <= tc + 1e-12) {
            continue;
        }
        for (yi, &y) in v.y.iter().enumerate() {
            if (y - yc).abs() < rho {
                sup = sup.max(v.v_plus[ti][yi]);
                inf = inf.min(v.v_minus[ti][yi]);
            }
        }
    }
    if !sup.is_finite() {
        return Err(Error::InvalidArgument(format!("subcylinder of radius {rho} holds no samples")));
    }
    Ok(sup - inf)
}

/// A fitted frame with its cell-sampled excess and the contour-height
/// surrogate that was minimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameFit {
    pub frame: CaloricFrame,
    pub excess: f64,
    pub height_defect: f64,
}

/// Nearest boundary point of `region` to `p`, with the outward normal and
/// curvature of the contour there.
pub fn boundary_anchor(region: &Region, p: [f64; 2]) -> Result<([f64; 2], [f64; 2], f64)> {
    let contours = region.diagnostic_contours()?;
    let mut best: Option<(f64, [f64; 2], [f64; 2], f64)> = None;
    for c in &contours {
        let prof = curvature_profile(c)?;
        for (k, v) in c.vertices().iter().enumerate() {
            let d = (v[0] - p[0]).hypot(v[1] - p[1]);
            if best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, *v, prof.normals[k], prof.kappa[k]));
            }
        }
    }
    let (_, x, n, k) = best.ok_or(Error::EmptyRegion)?;
    Ok((x, n, k))
}

/// Nearest point of the boundary segment soup of `region` to `p`.
pub fn nearest_boundary_point(region: &Region, p: [f64; 2]) -> Result<[f64; 2]> {
    let mut best: Option<(f64, [f64; 2])> = None;
    for (a, b) in world_segments(region) {
        let d = [b[0] - a[0], b[1] - a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let q = [a[0] + t * d[0], a[1] + t * d[1]];
        let dist = (q[0] - p[0]).hypot(q[1] - p[1]);
        if best.is_none_or(|b| dist < b.0) {
            best = Some((dist, q));
        }
    }
    best.map(|b| b.1).ok_or(Error::EmptyRegion)
}

/// Largest `|u_+- - P - Lambda|` over the window's fibers.
fn height_defect(
    window: &[SegmentSlice],
    frame: &CaloricFrame,
    cyl: &Cylinder,
    lambda: &LambdaSeries,
    ys: &[f64],
) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, segs) in window {
        let tau = (*k as f64 - lambda.k0 as f64) * lambda.h;
        let shift = lambda.at(*k);
        match fiber_heights(segs, frame, cyl, ys) {
            Ok(sg) => {
                for (i, y) in sg.y.iter().enumerate() {
                    let g = frame.p(*y, tau) + shift;
                    worst = worst.max((sg.u_minus[i] - g).abs()).max((sg.u_plus[i] - g).abs());
                }
            }
            Err(_) => return f64::INFINITY,
        }
    }
    worst
}

/// Fits `(angle of omega, A, c)` on a window whose last slice contains `x0`
/// on its boundary. `x0` is snapped to the nearest boundary point of the
/// last slice (a contour vertex when no seed is given). Without a seed,
/// `omega` starts at the outward normal, `A` at minus the curvature, and `c`
/// at 0.
pub fn fit_frame(
    slices: &[Slice<'_>],
    x0: [f64; 2],
    cyl: &Cylinder,
    lambda: &LambdaSeries,
    seed: Option<&CaloricFrame>,
) -> Result<FrameFit> {
    let last = slices.iter().max_by_key(|s| s.0).ok_or_else(|| Error::InvalidArgument("empty window".into()))?;
    let spacing = last.1.grid().spacing();
    if cyl.rho < MIN_FIT_CELLS * spacing * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "radius {} below {MIN_FIT_CELLS} cells",
            cyl.rho
        )));
    }
    let seed = match seed {
        Some(f) => CaloricFrame { x0: nearest_boundary_point(last.1, x0)?, ..*f },
        None => {
            let (anchor, normal, kappa) = boundary_anchor(last.1, x0)?;
            CaloricFrame::new(anchor, normal, -kappa, 0.0)?
        }
    };
    let anchor = seed.x0;
    for (_, region) in slices {
        check_inside(region, &seed, cyl)?;
    }

    let reach = cyl.rho.hypot(cyl.r1) + 2.0 * spacing;
    let window: Vec<SegmentSlice> = slices
        .iter()
        .map(|(k, region)| {
            let segs = world_segments(region)
                .into_iter()
                .filter(|(a, b)| {
                    let d = |p: [f64; 2]| (p[0] - anchor[0]).hypot(p[1] - anchor[1]);
                    d(*a).min(d(*b)) <= reach
                })
                .collect();
            (*k, segs)
        })
        .collect();
    let ys = base_samples(cyl.rho, default_base_count(cyl.rho, spacing));

    let theta0 = seed.angle();
    let build = |x: &[f64]| CaloricFrame::from_angle(anchor, theta0 + x[0], x[1], x[2]);
    let objective = |x: &[f64]| height_defect(&window, &build(x), cyl, lambda, &ys);
    let steps = [
        0.05 * spacing / cyl.rho,
        0.1 * seed.a.abs().max(1.0),
        0.1 * spacing,
    ];
    let (x, defect) = nelder_mead(objective, &[0.0, seed.a, seed.c], &steps, FIT_EVALS);
    let frame = build(&x);
    let e = excess(slices, &frame, cyl, lambda)?;
    Ok(FrameFit { frame, excess: e, height_defect: defect })
}

/// One scale of a decay probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayLevel {
    pub r: f64,
    pub fit: FrameFit,
    /// `excess / r^(2 + alpha)`.
    pub excess_ratio: f64,
    /// Ratios against the next finer level (NaN for the last level):
    /// `|dA| / r^alpha`, `|d omega| / r^(1 + alpha)`, `|dc| / r^(2 + alpha)`.
    pub d_a: f64,
    pub d_omega: f64,
    pub d_c: f64,
}

/// Refits frames at radii `sigma^j r`, `j = 0..=depth`, over the windows
/// `(t0 - r_j^2, t0]`. Each radius must be at least `c0 sqrt(h)`.
#[allow(clippy::too_many_arguments)]
pub fn decay_probe(
    trace: &FlowTrace,
    x0: [f64; 2],
    t0: f64,
    r: f64,
    sigma: f64,
    alpha: f64,
    depth: usize,
    c0: f64,
) -> Result<Vec<DecayLevel>> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidArgument(format!("sigma {sigma}")));
    }
    let lambda = lambda_accumulate(trace, t0)?;
    let cutoff = c0 * trace.h.sqrt();
    let radii: Vec<f64> = (0..=depth).map(|j| r * sigma.powi(j as i32)).collect();
    if let Some(&bad) = radii.iter().find(|&&rj| rj < cutoff * (1.0 - 1e-9)) {
        return Err(Error::ScaleBelowParabolicCutoff { r: bad, cutoff });
    }
    let mut levels: Vec<DecayLevel> = Vec::with_capacity(radii.len());
    let mut seed: Option<CaloricFrame> = None;
    for &rj in &radii {
        let steps = window_steps(lambda.k0, trace.h, rj);
        let mut slices = Vec::with_capacity(steps.len());
        for k in steps {
            let region = trace
                .region_at(k)
                .ok_or_else(|| Error::InvalidArgument(format!("region at step {k} was not kept")))?;
            slices.push((k, region));
        }
        let cyl = Cylinder::with_radius(rj)?;
        let fit = fit_frame(&slices, x0, &cyl, &lambda, seed.as_ref())?;
        seed = Some(fit.frame);
        levels.push(DecayLevel {
            r: rj,
            fit,
            excess_ratio: fit.excess / rj.powf(2.0 + alpha),
            d_a: f64::NAN,
            d_omega: f64::NAN,
            d_c: f64::NAN,
        });
    }
    for j in 0..levels.len().saturating_sub(1) {
        let (a, b) = (levels[j].fit.frame, levels[j + 1].fit.frame);
        let rj = levels[j].r;
        let mut dth = (a.angle() - b.angle()).abs() % (2.0 * PI);
        if dth > PI {
            dth = 2.0 * PI - dth;
        }
        levels[j].d_a = (a.a - b.a).abs() / rj.powf(alpha);
        levels[j].d_omega = dth / rj.powf(1.0 + alpha);
        levels[j].d_c = (a.c - b.c).abs() / rj.powf(2.0 + alpha);
    }
    Ok(levels)
}

/// Writes `x,y,scale,excess,excess_ratio,dA,domega,dc` rows, one block per
/// probe point.
pub fn write_decay_csv<W: Write>(mut out: W, probes: &[([f64; 2], Vec<DecayLevel>)]) -> Result<()> {
    writeln!(out, "x,y,scale,excess,excess_ratio,dA,domega,dc")?;
    for (p, levels) in probes {
        for l in levels {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                p[0], p[1], l.r, l.fit.excess, l.excess_ratio, l.d_a, l.d_omega, l.d_c
            )?;
        }
    }
    Ok(())
}
