//! The volume-constrained minimizing-movement step and the flow driver.
//!
//! A step solves the total-variation proximal problem on the signed distance
//! of the current set; every sub-level set `{w <= s}` minimizes
//! `P(F) + 1/h int_F (d_E - s)`, so the volume constraint becomes a scalar
//! root-find for `s`, and the multiplier is `s / h`.

use std::io::Write;

use crate::boundary::{hausdorff_to_disk, Contour, PooledCurvature};
use crate::distance::signed_distance;
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::region::{sublevel_area, Region};
use crate::rof::{rof_solve_from, RofProblem, WarmStart};

/// Regions smaller than this many cells are considered to have vanished.
pub const VANISH_CELLS: f64 = 9.0;
/// Column order of the trace CSV.
pub const TRACE_COLUMNS: [&str; 13] = [
    "step",
    "t",
    "lambda",
    "area",
    "perimeter",
    "kappa_dev",
    "kappa_lambda_dev",
    "hausdorff",
    "el_residual_median",
    "n_contours",
    "tie_measure",
    "solver_gap",
    "solver_iters",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Constrained,
    Unconstrained,
}

#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    /// Relative duality-gap tolerance of the proximal solve.
    pub solver_tol: f64,
    pub max_iter: usize,
    /// Relative volume tolerance of the threshold search.
    pub vol_tol: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { solver_tol: 1e-7, max_iter: 20_000, vol_tol: 1e-6 }
    }
}

/// Output of one minimizing-movement step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub next: Region,
    pub lambda: f64,
    pub threshold: f64,
    pub w: GridField,
    /// Signed distance of the input set.
    pub distance: GridField,
    /// Area of the cells whose value of `w` ties with the threshold.
    pub tie_measure: f64,
    pub solver_gap: f64,
    pub solver_energy: f64,
    pub solver_iters: usize,
    pub solver_converged: bool,
    /// Final dual field, reusable as a warm start.
    pub dual: Vec<[f64; 2]>,
}

impl StepResult {
    /// Warm start for the following step: `w - threshold` and the dual field.
    pub fn warm_start(&self) -> (Vec<f64>, Vec<[f64; 2]>) {
        let w = self.w.values().iter().map(|v| v - self.threshold).collect();
        (w, self.dual.clone())
    }
}

/// Smallest admissible time step on a grid of this spacing.
pub fn min_time_step(spacing: f64) -> f64 {
    (2.0 * spacing).powi(2)
}

pub fn mms_step(e: &Region, h: f64, v: f64, mode: Mode, opts: &StepOptions) -> Result<StepResult> {
    mms_step_warm(e, h, v, mode, opts, None)
}

/// One step, optionally warm-started from the previous step.
pub fn mms_step_warm(
    e: &Region,
    h: f64,
    v: f64,
    mode: Mode,
    opts: &StepOptions,
    warm: Option<WarmStart<'_>>,
) -> Result<StepResult> {
    let grid = *e.grid();
    let s = grid.spacing();
    let min_h = min_time_step(s);
    if !(h >= min_h) {
        return Err(Error::ResolutionViolation { h, min_h });
    }
    if mode == Mode::Constrained && !(v > 0.0) {
        return Err(Error::InvalidArgument(format!("target volume {v}")));
    }
    let min_area = VANISH_CELLS * s * s;
    let area = e.area();
    if e.is_empty() || area < min_area {
        return Err(Error::Vanished { area, min_area });
    }

    let distance = signed_distance(e)?;
    let problem = RofProblem::new(distance, h)?;
    let sol = rof_solve_from(&problem, opts.solver_tol, opts.max_iter, warm)?;
    let w = sol.w;

    let threshold = match mode {
        Mode::Unconstrained => 0.0,
        Mode::Constrained => volume_threshold(&w, v, opts.vol_tol),
    };
    let lambda = match mode {
        Mode::Unconstrained => 0.0,
        Mode::Constrained => threshold / h,
    };

    let tie_eps = 1e-12 * (1.0 + threshold.abs()).max(w.max().abs());
    let ties = w.values().iter().filter(|&&x| (x - threshold).abs() <= tie_eps).count();
    let tie_measure = ties as f64 * s * s;

    let shifted = GridField::from_parts(grid, w.values().iter().map(|x| x - threshold).collect());
    let next = Region::from_level_set(shifted);
    let next_area = next.area();
    if next.is_empty() || next_area < min_area {
        return Err(Error::Vanished { area: next_area, min_area });
    }
    Ok(StepResult {
        next,
        lambda,
        threshold,
        w,
        distance: problem.d,
        tie_measure,
        solver_gap: sol.gap,
        solver_energy: sol.energy,
        solver_iters: sol.iterations,
        solver_converged: sol.converged,
        dual: sol.p,
    })
}

/// Level `s` with `|{w <= s}| = v`, by bisection on `[min w, max w]`.
fn volume_threshold(w: &GridField, v: f64, vol_tol: f64) -> f64 {
    let (mut lo, mut hi) = (w.min(), w.max());
    let target = 0.1 * vol_tol * v;
    let mut best = (f64::INFINITY, 0.5 * (lo + hi));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let a = sublevel_area(w, mid);
        let err = (a - v).abs();
        if err < best.0 {
            best = (err, mid);
        }
        if err <= target || mid <= lo || mid >= hi {
            break;
        }
        if a < v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best.1
}

/// `|d_E / h + kappa - lambda|` at every vertex of the (non-degenerate)
/// boundary of the step's output, `d_E` interpolated bilinearly.
pub fn el_residual(result: &StepResult, h: f64) -> Result<Vec<f64>> {
    let (terms, _) = el_terms(result, h)?;
    Ok(terms.into_iter().map(|t| (t - result.lambda).abs()).collect())
}

/// `d_E / h + kappa` per vertex together with arclength weights.
fn el_terms(result: &StepResult, h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let contours = result.next.diagnostic_contours()?;
    let pooled = PooledCurvature::new(&contours)?;
    let mut terms = Vec::new();
    let mut weights = Vec::new();
    for (c, prof) in contours.iter().zip(&pooled.profiles) {
        for (k, p) in c.cell_points().iter().enumerate() {
            terms.push(result.distance.sample_cell(*p) / h + prof.kappa[k]);
            weights.push(prof.weights[k]);
        }
    }
    Ok((terms, weights))
}

/// Two estimates of the multiplier: the threshold one, and the
/// length-weighted boundary mean of `d_E / h + kappa`.
pub fn lambda_cross_check(result: &StepResult, h: f64) -> Result<(f64, f64)> {
    let (terms, weights) = el_terms(result, h)?;
    let total: f64 = weights.iter().sum();
    let mean = terms.iter().zip(&weights).map(|(t, w)| t * w).sum::<f64>() / total;
    Ok((result.lambda, mean))
}

/// Largest `|d|` over the vertices of the given contours.
pub fn max_on_contours(d: &GridField, contours: &[Contour]) -> f64 {
    contours
        .iter()
        .flat_map(|c| c.cell_points().iter().map(|p| d.sample_cell(*p).abs()))
        .fold(0.0, f64::max)
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Empirical quantile by linear interpolation, `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let x = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let i = x.floor() as usize;
    let j = (i + 1).min(v.len() - 1);
    v[i] + (x - i as f64) * (v[j] - v[i])
}

/// Diagnostics of one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub lambda: f64,
    pub area: f64,
    pub perimeter: f64,
    pub kappa_dev: f64,
    pub kappa_lambda_dev: f64,
    pub hausdorff: f64,
    pub el_residual_median: f64,
    pub n_contours: usize,
    pub tie_measure: f64,
    pub solver_gap: f64,
    pub solver_iters: usize,
    /// Relative solver gap `gap / (1 + energy)`.
    pub solver_rel_gap: f64,
    /// `max |d_{E_{k-1}}|` over the boundary of `E_k`.
    pub max_prev_distance: f64,
    /// 99th percentile of `|kappa|`.
    pub kappa_p99: f64,
    /// `int kappa ds` of each non-degenerate contour.
    pub total_curvatures: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct FlowOptions {
    pub step: StepOptions,
    /// Keep a region snapshot every this many steps (0: only the first and
    /// last).
    pub snapshot_every: usize,
    /// Also keep the last this many regions.
    pub keep_last: usize,
}

/// Time series of a run plus selected regions.
#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub h: f64,
    pub v: f64,
    pub mode: Mode,
    pub records: Vec<StepRecord>,
    /// `(step, region)` pairs, step-sorted.
    pub snapshots: Vec<(usize, Region)>,
    /// The most recent regions, `(step, region)`, step-sorted.
    pub recent: Vec<(usize, Region)>,
    /// Set when the run stopped before the requested number of steps.
    pub truncated: Option<String>,
}

impl FlowTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lambda).collect()
    }

    pub fn final_region(&self) -> Option<&Region> {
        self.recent.last().or(self.snapshots.last()).map(|(_, r)| r)
    }

    /// Region at `step`, if it was kept.
    pub fn region_at(&self, step: usize) -> Option<&Region> {
        self.recent
            .iter()
            .chain(&self.snapshots)
            .find(|(k, _)| *k == step)
            .map(|(_, r)| r)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", TRACE_COLUMNS.join(","))?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.step,
                r.t,
                r.lambda,
                r.area,
                r.perimeter,
                r.kappa_dev,
                r.kappa_lambda_dev,
                r.hausdorff,
                r.el_residual_median,
                r.n_contours,
                r.tie_measure,
                r.solver_gap,
                r.solver_iters
            )?;
        }
        Ok(())
    }
}

/// Record for time level `k` without step-specific data.
fn level_record(
    step: usize,
    h: f64,
    region: &Region,
    lambda: f64,
    hausdorff_volume: f64,
) -> Result<(StepRecord, PooledCurvature, Vec<Contour>)> {
    let contours = region.diagnostic_contours()?;
    let pooled = PooledCurvature::new(&contours)?;
    let hausdorff = hausdorff_to_disk(&contours, hausdorff_volume)?.value;
    let abs_k: Vec<f64> = pooled.profiles.iter().flat_map(|p| p.kappa.iter().map(|k| k.abs())).collect();
    let record = StepRecord {
        step,
        t: step as f64 * h,
        lambda,
        area: region.area(),
        perimeter: region.perimeter(),
        kappa_dev: pooled.l2_deviation,
        kappa_lambda_dev: pooled.l2_distance_to(lambda),
        hausdorff,
        el_residual_median: f64::NAN,
        n_contours: region.loop_count(),
        tie_measure: 0.0,
        solver_gap: 0.0,
        solver_iters: 0,
        solver_rel_gap: 0.0,
        max_prev_distance: f64::NAN,
        kappa_p99: quantile(&abs_k, 0.99),
        total_curvatures: pooled.profiles.iter().map(|p| p.total).collect(),
    };
    Ok((record, pooled, contours))
}

/// Iterates [`mms_step`] from `e0`. At step 0 the multiplier column holds the
/// mean curvature of `e0` in constrained mode and 0 otherwise.
pub fn run_flow(e0: &Region, h: f64, steps: usize, v: f64, mode: Mode, opts: &FlowOptions) -> Result<FlowTrace> {
    run_flow_with(e0, h, steps, v, mode, opts, |_, _| {})
}

/// [`run_flow`] with a callback invoked after every completed step.
pub fn run_flow_with(
    e0: &Region,
    h: f64,
    steps: usize,
    v: f64,
    mode: Mode,
    opts: &FlowOptions,
    mut on_step: impl FnMut(&StepRecord, &Region),
) -> Result<FlowTrace> {
    let s = e0.grid().spacing();
    let min_h = min_time_step(s);
    if !(h >= min_h) {
        return Err(Error::ResolutionViolation { h, min_h });
    }
    let disk_volume = |area: f64| if mode == Mode::Constrained { v } else { area };
    let (mut rec0, pooled0, _) = level_record(0, h, e0, 0.0, disk_volume(e0.area()))?;
    if mode == Mode::Constrained {
        rec0.lambda = pooled0.mean;
        rec0.kappa_lambda_dev = pooled0.l2_distance_to(pooled0.mean);
    }
    on_step(&rec0, e0);
    let mut trace = FlowTrace {
        h,
        v,
        mode,
        records: vec![rec0],
        snapshots: vec![(0, e0.clone())],
        recent: Vec::new(),
        truncated: None,
    };
    let keep = |trace: &mut FlowTrace, k: usize, region: &Region| {
        if opts.keep_last > 0 {
            trace.recent.push((k, region.clone()));
            if trace.recent.len() > opts.keep_last {
                trace.recent.remove(0);
            }
        }
    };
    keep(&mut trace, 0, e0);

    let mut current = e0.clone();
    let mut warm: Option<(Vec<f64>, Vec<[f64; 2]>)> = None;
    for k in 1..=steps {
        let ws = warm.as_ref().map(|(w, p)| WarmStart { w, p });
        let result = match mms_step_warm(&current, h, v, mode, &opts.step, ws) {
            Ok(r) => r,
            Err(Error::Vanished { area, min_area }) => {
                trace.truncated = Some(format!("vanished at step {k}: area {area:.3e} < {min_area:.3e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let (mut rec, pooled, contours) =
            level_record(k, h, &result.next, result.lambda, disk_volume(result.next.area()))?;
        let mut residuals = Vec::new();
        for (c, prof) in contours.iter().zip(&pooled.profiles) {
            for (i, p) in c.cell_points().iter().enumerate() {
                residuals.push((result.distance.sample_cell(*p) / h + prof.kappa[i] - result.lambda).abs());
            }
        }
        rec.el_residual_median = median(&residuals);
        rec.tie_measure = result.tie_measure;
        rec.solver_gap = result.solver_gap;
        rec.solver_iters = result.solver_iters;
        rec.solver_rel_gap = result.solver_gap / (1.0 + result.solver_energy.abs());
        rec.max_prev_distance = max_on_contours(&result.distance, &result.next.contours()?);
        on_step(&rec, &result.next);
        trace.records.push(rec);

        warm = Some(result.warm_start());
        current = result.next;
        if opts.snapshot_every > 0 && k % opts.snapshot_every == 0 {
            trace.snapshots.push((k, current.clone()));
        }
        keep(&mut trace, k, &current);
    }
    let last = trace.records.last().map_or(0, |r| r.step);
    if trace.snapshots.last().map(|(k, _)| *k) != Some(last) {
        trace.snapshots.push((last, current));
    }
    Ok(trace)
}
