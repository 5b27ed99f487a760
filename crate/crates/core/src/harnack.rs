//! Parabola contact analysis on discrete-in-time space-time fields.
//!
//! A parabola `p(x, t) = a (t - tau) - a |x - xi|^2 / 2` touches `w` from
//! below at `(y, t_k)` when `w >= p` on every earlier slice of the window and
//! `w - p` attains a nonpositive minimum over the base at `y` on slice `k`.

use std::collections::BTreeSet;
use std::io::Write;

use crate::error::{Error, Result};

/// Regular base lattice: `nx` points along x, `ny` along y (`ny = 1` for a
/// one-dimensional base).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseLattice {
    pub nx: usize,
    pub ny: usize,
    pub origin: [f64; 2],
    pub spacing: f64,
}

impl BaseLattice {
    pub fn line(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n < 2 || hi <= lo {
            return Err(Error::InvalidGrid(format!("base line of {n} points on [{lo}, {hi}]")));
        }
        Ok(Self { nx: n, ny: 1, origin: [lo, 0.0], spacing: (hi - lo) / (n - 1) as f64 })
    }

    pub fn square(n: usize, lo: f64, hi: f64) -> Result<Self> {
        let l = Self::line(n, lo, hi)?;
        Ok(Self { ny: n, origin: [lo, lo], ..l })
    }

    pub fn dim(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        let (i, j) = (idx % self.nx, idx / self.nx);
        let y = if self.ny == 1 { 0.0 } else { self.origin[1] + j as f64 * self.spacing };
        [self.origin[0] + i as f64 * self.spacing, y]
    }

    /// Measure of one lattice cell, `spacing^dim`.
    pub fn cell_measure(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }
}

/// Values `w(y, t_k)` on a base lattice at times `t_k = t_first + k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    base: BaseLattice,
    t_first: f64,
    dt: f64,
    values: Vec<Vec<f64>>,
}

impl SpaceTimeField {
    pub fn new(base: BaseLattice, t_first: f64, dt: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step {dt}")));
        }
        for slice in &values {
            if slice.len() != base.len() {
                return Err(Error::InvalidGrid("slice length does not match the base".into()));
            }
            if let Some(i) = slice.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteField(i));
            }
        }
        Ok(Self { base, t_first, dt, values })
    }

    pub fn from_fn(base: BaseLattice, t_first: f64, dt: f64, slices: usize, f: impl Fn([f64; 2], f64) -> f64) -> Result<Self> {
        let values = (0..slices)
            .map(|k| {
                let t = t_first + k as f64 * dt;
                (0..base.len()).map(|i| f(base.point(i), t)).collect()
            })
            .collect();
        Self::new(base, t_first, dt, values)
    }

    pub fn base(&self) -> &BaseLattice {
        &self.base
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn slices(&self) -> usize {
        self.values.len()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_first + k as f64 * self.dt
    }

    pub fn at(&self, k: usize, idx: usize) -> f64 {
        self.values[k][idx]
    }

    /// The field plus a constant.
    pub fn shifted(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|s| s.iter().map(|v| v + c).collect()).collect(), ..self.clone() }
    }

    /// Central-difference spatial gradient at an interior lattice point.
    pub fn gradient(&self, k: usize, idx: usize) -> Option<[f64; 2]> {
        let b = &self.base;
        let (i, j) = (idx % b.nx, idx / b.nx);
        if i == 0 || i + 1 == b.nx || (b.ny > 1 && (j == 0 || j + 1 == b.ny)) {
            return None;
        }
        let s = &self.values[k];
        let gx = (s[idx + 1] - s[idx - 1]) / (2.0 * b.spacing);
        let gy = if b.ny > 1 { (s[idx + b.nx] - s[idx - b.nx]) / (2.0 * b.spacing) } else { 0.0 };
        Some([gx, gy])
    }

    /// Smallest second difference along the lattice axes over all interior
    /// points of the slices in `window`.
    pub fn min_second_difference(&self, window: Window) -> f64 {
        let b = &self.base;
        let s2 = b.spacing * b.spacing;
        let mut worst = f64::INFINITY;
        for k in window.range() {
            let s = &self.values[k];
            for idx in 0..b.len() {
                let (i, j) = (idx % b.nx, idx / b.nx);
                if i > 0 && i + 1 < b.nx {
                    worst = worst.min((s[idx + 1] - 2.0 * s[idx] + s[idx - 1]) / s2);
                }
                if b.ny > 1 && j > 0 && j + 1 < b.ny {
                    worst = worst.min((s[idx + b.nx] - 2.0 * s[idx] + s[idx - b.nx]) / s2);
                }
            }
        }
        worst
    }
}

/// Inclusive range of slice indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub first: usize,
    pub last: usize,
}

impl Window {
    pub fn new(first: usize, last: usize) -> Self {
        Self { first, last }
    }

    pub fn all(w: &SpaceTimeField) -> Self {
        Self { first: 0, last: w.slices().saturating_sub(1) }
    }

    pub fn range(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }

    fn check(&self, w: &SpaceTimeField) -> Result<()> {
        if self.first > self.last || self.last >= w.slices() {
            return Err(Error::InvalidArgument(format!("window {}..={} outside {} slices", self.first, self.last, w.slices())));
        }
        Ok(())
    }
}

/// `p(x, t) = a (t - tau) - a |x - xi|^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parabola {
    pub xi: [f64; 2],
    pub tau: f64,
    pub a: f64,
}

impl Parabola {
    pub fn new(xi: [f64; 2], tau: f64, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("parabola opening {a}")));
        }
        Ok(Self { xi, tau, a })
    }

    pub fn eval(&self, x: [f64; 2], t: f64) -> f64 {
        let d2 = (x[0] - self.xi[0]).powi(2) + (x[1] - self.xi[1]).powi(2);
        self.a * (t - self.tau) - 0.5 * self.a * d2
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        [-self.a * (x[0] - self.xi[0]), -self.a * (x[1] - self.xi[1])]
    }
}

/// The parabola equal to `p1 + p2`.
pub fn parabola_sum(p1: &Parabola, p2: &Parabola) -> Parabola {
    let a = p1.a + p2.a;
    let (w1, w2) = (p1.a / a, p2.a / a);
    let xi = [w1 * p1.xi[0] + w2 * p2.xi[0], w1 * p1.xi[1] + w2 * p2.xi[1]];
    let n2 = |v: [f64; 2]| v[0] * v[0] + v[1] * v[1];
    let tau = w1 * p1.tau + w2 * p2.tau + 0.5 * w1 * n2(p1.xi) + 0.5 * w2 * n2(p2.xi) - 0.5 * n2(xi);
    Parabola { xi, tau, a }
}

/// A contact of a (possibly shifted) parabola.
#[derive(Debug, Clone, PartialEq)]
pub struct Touch {
    pub k: usize,
    /// First minimizing lattice index.
    pub idx: usize,
    /// Every minimizing lattice index on slice `k`.
    pub ties: Vec<usize>,
    /// Constant added to the parabola.
    pub shift: f64,
}

impl Touch {
    pub fn tie(&self) -> bool {
        self.ties.len() > 1
    }
}

/// Relative tolerance for ties in the minimum of `w - p`.
pub const TIE_RTOL: f64 = 1e-12;

fn slice_min(w: &SpaceTimeField, p: &Parabola, k: usize) -> (f64, f64) {
    let t = w.time(k);
    let mut m = f64::INFINITY;
    let mut scale: f64 = 1.0;
    for (idx, v) in w.values[k].iter().enumerate() {
        let pv = p.eval(w.base.point(idx), t);
        scale = scale.max(v.abs()).max(pv.abs());
        m = m.min(v - pv);
    }
    (m, scale)
}

fn ties_at(w: &SpaceTimeField, p: &Parabola, k: usize, level: f64, tol: f64) -> Vec<usize> {
    let t = w.time(k);
    (0..w.base.len()).filter(|&idx| w.values[k][idx] - p.eval(w.base.point(idx), t) <= level + tol).collect()
}

/// Lowers (or raises) `p` by the canonical shift `c* = min_k min_y (w - p)`
/// and reports where `p + c*` touches `w` from below: the first slice
/// attaining `c*`, with every tied minimizer.
pub fn touches_from_below(w: &SpaceTimeField, p: &Parabola, window: Window) -> Result<Touch> {
    window.check(w)?;
    let mins: Vec<(f64, f64)> = window.range().map(|k| slice_min(w, p, k)).collect();
    let c = mins.iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
    let scale = mins.iter().map(|m| m.1).fold(1.0, f64::max);
    let tol = TIE_RTOL * scale;
    let off = mins.iter().position(|m| m.0 <= c + tol).expect("nonempty window");
    let k = window.first + off;
    let ties = ties_at(w, p, k, c, tol);
    Ok(Touch { k, idx: ties[0], ties, shift: c })
}

/// Contact of the unshifted parabola: the first slice where `min (w - p) <= 0`,
/// if any.
pub fn touch_unshifted(w: &SpaceTimeField, p: &Parabola, window: Window) -> Result<Option<Touch>> {
    window.check(w)?;
    for k in window.range() {
        let (m, _) = slice_min(w, p, k);
        if m <= 0.0 {
            // exact minimizers only: the definition asks for equality with the min
            let ties = ties_at(w, p, k, m, 0.0);
            return Ok(Some(Touch { k, idx: ties[0], ties, shift: 0.0 }));
        }
    }
    Ok(None)
}

/// Contact points `(k, lattice index)`, each standing for the space-time cell
/// `[y] x [t_k, t_{k+1})`, with the centers that produced them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContactSet {
    pub points: BTreeSet<(usize, usize)>,
    /// `(center, touch)` per touching center.
    pub touches: Vec<(Parabola, Touch)>,
    /// Centers tried.
    pub tried: usize,
}

impl ContactSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// `sum_k dt * H^n(projection of slice k)`.
    pub fn measure(&self, w: &SpaceTimeField) -> f64 {
        self.points.len() as f64 * w.dt * w.base.cell_measure()
    }

    /// Membership of a continuous time `t` at lattice index `idx`, with the
    /// half-open convention `t_k <= t < t_{k+1}`.
    pub fn contains(&self, w: &SpaceTimeField, idx: usize, t: f64) -> bool {
        let kf = ((t - w.t_first) / w.dt).floor();
        kf >= 0.0 && self.points.contains(&(kf as usize, idx))
    }

    /// `|A ∩ Q_rho^-(y, t)| / |Q_rho^-|`, with `Q_rho^-(y, t) = B_rho(y) x (t - rho^2, t]`
    /// measured on lattice cells.
    pub fn density_in(&self, w: &SpaceTimeField, y: [f64; 2], t: f64, rho: f64) -> f64 {
        let b = &w.base;
        let in_ball = |idx: usize| {
            let p = b.point(idx);
            (p[0] - y[0]).hypot(p[1] - y[1]) < rho
        };
        let in_time = |k: usize| {
            let tk = w.time(k);
            tk > t - rho * rho && tk <= t
        };
        let total = (0..w.slices()).filter(|&k| in_time(k)).count() * (0..b.len()).filter(|&i| in_ball(i)).count();
        if total == 0 {
            return f64::NAN;
        }
        let hit = self.points.iter().filter(|&&(k, i)| in_time(k) && in_ball(i)).count();
        hit as f64 / total as f64
    }

    /// Writes `xi,tau,a,y,t_k,shift,tie_flag` rows (two `xi`/`y` columns
    /// for a planar base).
    pub fn write_csv<W: Write>(&self, mut out: W, w: &SpaceTimeField) -> Result<()> {
        let two = w.base.dim() == 2;
        if two {
            writeln!(out, "xi_x,xi_y,tau,a,y_x,y_y,t_k,shift,tie_flag")?;
        } else {
            writeln!(out, "xi,tau,a,y,t_k,shift,tie_flag")?;
        }
        for (p, t) in &self.touches {
            for &idx in &t.ties {
                let y = w.base.point(idx);
                let tie = u8::from(t.tie());
                if two {
                    writeln!(out, "{},{},{},{},{},{},{},{},{tie}", p.xi[0], p.xi[1], p.tau, p.a, y[0], y[1], w.time(t.k), t.shift)?;
                } else {
                    writeln!(out, "{},{},{},{},{},{},{tie}", p.xi[0], p.tau, p.a, y[0], w.time(t.k), t.shift)?;
                }
            }
        }
        Ok(())
    }
}

/// Union over the centers `(xi, tau)` of the contacts of the unshifted
/// parabolas with opening `a`.
pub fn contact_set(a: f64, centers: &[([f64; 2], f64)], w: &SpaceTimeField, window: Window) -> Result<ContactSet> {
    let mut set = ContactSet { tried: centers.len(), ..ContactSet::default() };
    for &(xi, tau) in centers {
        let p = Parabola::new(xi, tau, a)?;
        if let Some(t) = touch_unshifted(w, &p, window)? {
            for &idx in &t.ties {
                set.points.insert((t.k, idx));
            }
            set.touches.push((p, t));
        }
    }
    Ok(set)
}

/// Axis-aligned box of centers: `xi` in `[lo, hi]` (per base dimension) and
/// `tau` in `[tau_lo, tau_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub tau_lo: f64,
    pub tau_hi: f64,
}

impl CenterBox {
    pub fn measure(&self, dim: usize) -> f64 {
        let space: f64 = (0..dim).map(|d| self.hi[d] - self.lo[d]).product();
        space * (self.tau_hi - self.tau_lo)
    }

    /// First `n` points of the Halton sequence mapped into the box.
    pub fn halton(&self, dim: usize, n: usize) -> Vec<([f64; 2], f64)> {
        const BASES: [u64; 3] = [2, 3, 5];
        (1..=n as u64)
            .map(|i| {
                let u: Vec<f64> = BASES.iter().take(dim + 1).map(|&b| radical_inverse(i, b)).collect();
                let mut xi = [0.0; 2];
                for d in 0..dim {
                    xi[d] = self.lo[d] + u[d] * (self.hi[d] - self.lo[d]);
                }
                (xi, self.tau_lo + u[dim] * (self.tau_hi - self.tau_lo))
            })
            .collect()
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbpReport {
    /// `|G_touch| / |A|`, with `|G_touch|` the box measure times the
    /// fraction of sampled centers that touch.
    pub ratio: f64,
    /// `|G| / |A|` with the full box measure.
    pub box_ratio: f64,
    pub g_measure: f64,
    pub touching_fraction: f64,
    pub a_measure: f64,
    /// Set when some second difference of `w` in the window lies below
    /// `-a`, outside the regime of the measure estimate.
    pub outside_regime: bool,
    pub contacts: ContactSet,
}

pub fn abp_ratio(a: f64, g: &CenterBox, w: &SpaceTimeField, window: Window, n_samples: usize) -> Result<AbpReport> {
    let dim = w.base.dim();
    let centers = g.halton(dim, n_samples);
    let contacts = contact_set(a, &centers, w, window)?;
    if contacts.is_empty() {
        return Err(Error::EmptyContactSet);
    }
    let a_measure = contacts.measure(w);
    let g_measure = g.measure(dim);
    let touching_fraction = contacts.touches.len() as f64 / n_samples as f64;
    Ok(AbpReport {
        ratio: g_measure * touching_fraction / a_measure,
        box_ratio: g_measure / a_measure,
        g_measure,
        touching_fraction,
        a_measure,
        outside_regime: w.min_second_difference(window) < -a,
        contacts,
    })
}

/// Discrete caloric polynomial in one space variable plus one-sided convex
/// bumps: `c0 + c1 y + c2 (y^2/2 + t) + sum_j b_j max(0, y - y_j)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CaloricBumps {
    pub c: [f64; 3],
    /// `(y_j, b_j)` with `b_j >= 0`.
    pub bumps: Vec<(f64, f64)>,
}

impl CaloricBumps {
    pub fn eval(&self, y: f64, t: f64) -> f64 {
        let [c0, c1, c2] = self.c;
        c0 + c1 * y + c2 * (0.5 * y * y + t) + self.bumps.iter().map(|&(yj, b)| b * (y - yj).max(0.0).powi(2)).sum::<f64>()
    }

    /// Samples the field on `n` equispaced base points spanning `[-1, 1]` and
    /// `n` slices at `t = -1 + k/n`, `k = 1..=n`.
    pub fn field(&self, n: usize) -> Result<SpaceTimeField> {
        let base = BaseLattice::line(n, -1.0, 1.0)?;
        let dt = 1.0 / n as f64;
        SpaceTimeField::from_fn(base, -1.0 + dt, dt, n, |p, t| self.eval(p[0], t))
    }
}

/// Writes `y,t,rho,density` rows.
pub fn write_density_csv<W: Write>(mut out: W, rows: &[([f64; 2], f64, f64, f64)]) -> Result<()> {
    writeln!(out, "y,t,rho,density")?;
    for (y, t, rho, d) in rows {
        writeln!(out, "{},{},{},{}", y[0], t, rho, d)?;
    }
    Ok(())
}
