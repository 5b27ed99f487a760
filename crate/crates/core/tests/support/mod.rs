//! Reference solvers shared by integration tests.
#![allow(dead_code)]

/// Exact solution of `min_x 1/2 sum (x - y)^2 + lambda sum |x_{k+1} - x_k|`
/// by the direct taut-string algorithm of Condat.
pub fn tv1d_denoise(input: &[f64], lambda: f64) -> Vec<f64> {
    let n = input.len();
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    let (mut k, mut k0, mut kplus, mut kminus) = (0usize, 0usize, 0usize, 0usize);
    let (mut umin, mut umax) = (lambda, -lambda);
    let (mut vmin, mut vmax) = (input[0] - lambda, input[0] + lambda);
    let twolambda = 2.0 * lambda;
    let minlambda = -lambda;
    loop {
        while k == n - 1 {
            if umin < 0.0 {
                loop {
                    out[k0] = vmin;
                    k0 += 1;
                    if k0 > kminus {
                        break;
                    }
                }
                k = k0;
                kminus = k0;
                vmin = input[k0];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                loop {
                    out[k0] = vmax;
                    k0 += 1;
                    if k0 > kplus {
                        break;
                    }
                }
                k = k0;
                kplus = k0;
                vmax = input[k0];
                umax = minlambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                while k0 <= k {
                    out[k0] = vmin;
                    k0 += 1;
                }
                return out;
            }
        }
        umin += input[k + 1] - vmin;
        if umin < minlambda {
            loop {
                out[k0] = vmin;
                k0 += 1;
                if k0 > kminus {
                    break;
                }
            }
            k = k0;
            kplus = k0;
            kminus = k0;
            vmin = input[k0];
            vmax = vmin + twolambda;
            umin = lambda;
            umax = minlambda;
            continue;
        }
        umax += input[k + 1] - vmax;
        if umax > lambda {
            loop {
                out[k0] = vmax;
                k0 += 1;
                if k0 > kplus {
                    break;
                }
            }
            k = k0;
            kplus = k0;
            kminus = k0;
            vmax = input[k0];
            vmin = vmax - twolambda;
            umin = lambda;
            umax = minlambda;
            continue;
        }
        k += 1;
        if umin >= lambda {
            kminus = k;
            vmin += (umin - lambda) / (kminus - k0 + 1) as f64;
            umin = lambda;
        }
        if umax <= minlambda {
            kplus = k;
            vmax += (umax + lambda) / (kplus - k0 + 1) as f64;
            umax = minlambda;
        }
    }
}

/// Largest violation of the optimality conditions of the 1D problem: the
/// running residual `r_k = sum_{i<=k} (y_i - x_i)` must lie in
/// `[-lambda, lambda]`, equal `-lambda sign(x_{k+1} - x_k)` across jumps, and
/// vanish at the end.
pub fn tv1d_kkt_violation(y: &[f64], x: &[f64], lambda: f64) -> f64 {
    let n = y.len();
    let mut r = 0.0;
    let mut worst: f64 = 0.0;
    for k in 0..n {
        r += y[k] - x[k];
        if k + 1 == n {
            worst = worst.max(r.abs());
        } else {
            let jump = x[k + 1] - x[k];
            if jump.abs() > 1e-12 {
                worst = worst.max((r + lambda * jump.signum()).abs());
            } else {
                worst = worst.max(r.abs() - lambda);
            }
        }
    }
    worst
}

/// Forward differences with zero on the last row and column.
fn grad(w: &[f64], nx: usize, ny: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; w.len()];
    let mut gy = vec![0.0; w.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if i + 1 < nx {
                gx[k] = w[k + 1] - w[k];
            }
            if j + 1 < ny {
                gy[k] = w[k + nx] - w[k];
            }
        }
    }
    (gx, gy)
}

/// Negative adjoint of `grad`.
fn div(px: &[f64], py: &[f64], nx: usize, ny: usize) -> Vec<f64> {
    let mut out = vec![0.0; px.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
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
    out
}

/// `sum |grad w| + mu/2 sum (w - d)^2` with isotropic cell gradients.
pub fn unit_energy(w: &[f64], d: &[f64], mu: f64, nx: usize, ny: usize) -> f64 {
    let (gx, gy) = grad(w, nx, ny);
    let tv: f64 = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).sum();
    tv + 0.5 * mu * w.iter().zip(d).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
}

/// Accelerated projected gradient ascent on the dual of the unit problem,
/// run until the duality gap falls below `gap_tol`. Returns `(w, gap)`.
pub fn fista_dual(d: &[f64], mu: f64, nx: usize, ny: usize, gap_tol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = d.len();
    let step = mu / 8.0;
    let (mut px, mut py) = (vec![0.0; n], vec![0.0; n]);
    let (mut qx, mut qy) = (px.clone(), py.clone());
    let mut t = 1.0f64;
    let primal_of = |px: &[f64], py: &[f64]| -> Vec<f64> {
        div(px, py, nx, ny).iter().zip(d).map(|(v, d)| d + v / mu).collect()
    };
    let dual_of = |px: &[f64], py: &[f64]| -> f64 {
        let dv = div(px, py, nx, ny);
        -dv.iter().zip(d).map(|(a, b)| a * b).sum::<f64>() - dv.iter().map(|a| a * a).sum::<f64>() / (2.0 * mu)
    };
    let mut gap = f64::INFINITY;
    for it in 0..max_iter {
        let w = primal_of(&qx, &qy);
        let (gx, gy) = grad(&w, nx, ny);
        let (ox, oy) = (px.clone(), py.clone());
        for k in 0..n {
            let (a, b) = (qx[k] + step * gx[k], qy[k] + step * gy[k]);
            let nrm = a.hypot(b).max(1.0);
            px[k] = a / nrm;
            py[k] = b / nrm;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / tn;
        t = tn;
        for k in 0..n {
            qx[k] = px[k] + beta * (px[k] - ox[k]);
            qy[k] = py[k] + beta * (py[k] - oy[k]);
        }
        if it % 50 == 0 {
            let w = primal_of(&px, &py);
            gap = unit_energy(&w, d, mu, nx, ny) - dual_of(&px, &py);
            if gap <= gap_tol {
                return (w, gap);
            }
        }
    }
    (primal_of(&px, &py), gap)
}
