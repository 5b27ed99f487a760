//! Total-variation proximal problem
//! `min_w  TV(w) + 1/(2 theta) * int (w - d)^2`
//! solved by a first-order primal-dual iteration with over-relaxation.
//!
//! Internally the problem is scaled to unit cell differences:
//! `min_w sum |D w| + mu/2 * sum (w - d)^2` with `mu = spacing / theta`, which
//! equals the physical energy divided by `spacing`.

use crate::error::{Error, Result};
use crate::grid::GridField;

/// Gap and energy are evaluated after the first iteration and then every this
/// many iterations.
pub const CHECK_EVERY: usize = 10;
/// Squared operator norm bound of the unit forward-difference gradient.
const L2: f64 = 8.0;
/// Primal step relative to the balanced choice `1 / sqrt(L2 * mu)`.
const TAU_SCALE: f64 = 0.05;
/// Dual feasibility slack.
const DUAL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RofProblem {
    pub d: GridField,
    pub theta: f64,
}

impl RofProblem {
    pub fn new(d: GridField, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidArgument(format!("fidelity weight {theta}")));
        }
        Ok(Self { d, theta })
    }

    fn mu(&self) -> f64 {
        self.d.grid().spacing() / self.theta
    }
}

/// Energies recorded at one evaluation point (physical units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub iteration: usize,
    pub primal: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct RofSolution {
    pub w: GridField,
    /// Dual field, one vector per cell, `|p| <= 1`.
    pub p: Vec<[f64; 2]>,
    pub gap: f64,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<Checkpoint>,
}

/// Starting point for a warm-started solve.
#[derive(Debug, Clone, Copy)]
pub struct WarmStart<'a> {
    pub w: &'a [f64],
    pub p: &'a [[f64; 2]],
}

/// Solve to `gap <= tol * (1 + |energy|)` or `max_iter` iterations, starting
/// from `w = d, p = 0`.
pub fn rof_solve(problem: &RofProblem, tol: f64, max_iter: usize) -> Result<RofSolution> {
    rof_solve_from(problem, tol, max_iter, None)
}

/// Like [`rof_solve`], optionally warm-started. The returned primal and dual
/// iterates are the best ones seen at checkpoints, so the reported energy is
/// nonincreasing and the gap is an upper bound for both.
pub fn rof_solve_from(
    problem: &RofProblem,
    tol: f64,
    max_iter: usize,
    warm: Option<WarmStart<'_>>,
) -> Result<RofSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol}")));
    }
    let grid = *problem.d.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let n = nx * ny;
    let s = grid.spacing();
    let d = problem.d.values();
    let mu = problem.mu();

    let (mut w, mut px, mut py) = match warm {
        Some(ws) => {
            if ws.w.len() != n || ws.p.len() != n {
                return Err(Error::InvalidArgument("warm start size mismatch".into()));
            }
            let mut px = Vec::with_capacity(n);
            let mut py = Vec::with_capacity(n);
            for q in ws.p {
                let norm = q[0].hypot(q[1]).max(1.0);
                px.push(q[0] / norm);
                py.push(q[1] / norm);
            }
            (ws.w.to_vec(), px, py)
        }
        None => (d.to_vec(), vec![0.0; n], vec![0.0; n]),
    };
    // boundary faces carry no flux
    for j in 0..ny {
        px[j * nx + nx - 1] = 0.0;
    }
    for i in 0..nx {
        py[(ny - 1) * nx + i] = 0.0;
    }

    // tau * sigma * L2 = 1; the datum is close to primal optimal, so most of
    // the work is on the dual side and a large dual step pays off
    let tau = TAU_SCALE / (L2 * mu).sqrt();
    let sigma = 1.0 / (L2 * tau);

    let mut wbar = w.clone();
    let mut w_old = vec![0.0; n];
    let mut div = vec![0.0; n];

    let mut best_w = w.clone();
    let mut best_primal = primal_unit(&w, d, mu, nx, ny);
    let mut best_p: (Vec<f64>, Vec<f64>) = (px.clone(), py.clone());
    let mut best_dual = f64::NEG_INFINITY;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        // dual ascent and projection onto the unit ball
        for j in 0..ny {
            let row = j * nx;
            for i in 0..nx {
                let k = row + i;
                let gx = if i + 1 < nx { wbar[k + 1] - wbar[k] } else { 0.0 };
                let gy = if j + 1 < ny { wbar[k + nx] - wbar[k] } else { 0.0 };
                let qx = px[k] + sigma * gx;
                let qy = py[k] + sigma * gy;
                let norm = (qx * qx + qy * qy).sqrt().max(1.0);
                px[k] = qx / norm;
                py[k] = qy / norm;
            }
        }
        divergence(&px, &py, nx, ny, &mut div);
        // primal proximal step, then over-relaxation
        w_old.copy_from_slice(&w);
        let a = 1.0 / (1.0 + tau * mu);
        for k in 0..n {
            w[k] = (w[k] + tau * div[k] + tau * mu * d[k]) * a;
            wbar[k] = 2.0 * w[k] - w_old[k];
        }

        if iterations == 1 || iterations % CHECK_EVERY == 0 || iterations == max_iter {
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(iterations));
            }
            let primal = primal_unit(&w, d, mu, nx, ny);
            if primal < best_primal {
                best_primal = primal;
                best_w.copy_from_slice(&w);
            }
            let dual = dual_unit(&div, d, mu);
            if dual > best_dual {
                best_dual = dual;
                best_p.0.copy_from_slice(&px);
                best_p.1.copy_from_slice(&py);
            }
            gap = ((best_primal - best_dual) * s).max(0.0);
            let energy = best_primal * s;
            history.push(Checkpoint { iteration: iterations, primal: energy, gap });
            if gap <= tol * (1.0 + energy.abs()) {
                converged = true;
                break;
            }
        }
    }

    let p = best_p.0.iter().zip(&best_p.1).map(|(&x, &y)| [x, y]).collect();
    Ok(RofSolution {
        w: GridField::from_parts(grid, best_w),
        p,
        gap,
        energy: best_primal * s,
        iterations,
        converged,
        history,
    })
}

/// `div p`, the negative adjoint of the forward-difference gradient.
fn divergence(px: &[f64], py: &[f64], nx: usize, ny: usize, out: &mut [f64]) {
    for j in 0..ny {
        let row = j * nx;
        for i in 0..nx {
            let k = row + i;
            let mut v = 0.0;
            if i + 1 < nx {
                v += px[k];
            }
            if i > 0 {
                v -= px[k - 1];
            }
            if j + 1 < ny {
                v += py[k];
            }
            if j > 0 {
                v -= py[k - nx];
            }
            out[k] = v;
        }
    }
}

fn tv_unit(w: &[f64], nx: usize, ny: usize) -> f64 {
    let mut acc = 0.0;
    for j in 0..ny {
        let row = j * nx;
        for i in 0..nx {
            let k = row + i;
            let gx = if i + 1 < nx { w[k + 1] - w[k] } else { 0.0 };
            let gy = if j + 1 < ny { w[k + nx] - w[k] } else { 0.0 };
            acc += (gx * gx + gy * gy).sqrt();
        }
    }
    acc
}

fn primal_unit(w: &[f64], d: &[f64], mu: f64, nx: usize, ny: usize) -> f64 {
    let fid: f64 = w.iter().zip(d).map(|(a, b)| (a - b) * (a - b)).sum();
    tv_unit(w, nx, ny) + 0.5 * mu * fid
}

/// Dual objective `<d, -div p> - |div p|^2 / (2 mu)`.
fn dual_unit(div: &[f64], d: &[f64], mu: f64) -> f64 {
    let mut lin = 0.0;
    let mut sq = 0.0;
    for (g, v) in div.iter().zip(d) {
        lin -= g * v;
        sq += g * g;
    }
    lin - sq / (2.0 * mu)
}

/// Isotropic total variation of a field (physical units).
pub fn total_variation(w: &GridField) -> f64 {
    let g = w.grid();
    tv_unit(w.values(), g.nx(), g.ny()) * g.spacing()
}

/// Physical primal energy `TV(w) + 1/(2 theta) int (w - d)^2`.
pub fn primal_energy(w: &GridField, problem: &RofProblem) -> f64 {
    let g = w.grid();
    primal_unit(w.values(), problem.d.values(), problem.mu(), g.nx(), g.ny()) * g.spacing()
}

/// Primal energy of `w` minus the dual energy of `p`.
pub fn duality_gap(w: &GridField, p: &[[f64; 2]], problem: &RofProblem) -> Result<f64> {
    let g = *problem.d.grid();
    let (nx, ny) = (g.nx(), g.ny());
    if w.values().len() != g.len() || p.len() != g.len() {
        return Err(Error::InvalidArgument("field sizes differ".into()));
    }
    let worst = p.iter().map(|q| q[0].hypot(q[1])).fold(0.0, f64::max);
    if worst > 1.0 + DUAL_SLACK {
        return Err(Error::DualInfeasible(worst));
    }
    let px: Vec<f64> = p.iter().map(|q| q[0]).collect();
    let py: Vec<f64> = p.iter().map(|q| q[1]).collect();
    let mut div = vec![0.0; g.len()];
    divergence(&px, &py, nx, ny, &mut div);
    let mu = problem.mu();
    let primal = primal_unit(w.values(), problem.d.values(), mu, nx, ny);
    Ok((primal - dual_unit(&div, problem.d.values(), mu)) * g.spacing())
}
