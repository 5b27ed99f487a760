//! Derivative-free minimization used for disk and frame fitting.

/// Nelder–Mead simplex search with a hard evaluation budget.
///
/// Deterministic: the initial simplex is `x0` plus one axis step per
/// coordinate, and ties between equal objective values are broken by the
/// lexicographic order of the points.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], steps: &[f64], max_evals: usize) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(steps.len(), n);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for k in 0..n {
        let mut x = x0.to_vec();
        x[k] += steps[k];
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    let order = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| {
        a.1.total_cmp(&b.1).then_with(|| {
            a.0.iter()
                .zip(&b.0)
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    };

    while evals < max_evals {
        simplex.sort_by(order);
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = simplex
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if (worst - best).abs() <= 1e-15 * (1.0 + best.abs()) && spread < 1e-13 {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for k in 0..n {
                centroid[k] += x[k] / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            (0..n).map(|k| centroid[k] + t * (simplex[n].0[k] - centroid[k])).collect()
        };

        let xr = along(-1.0);
        let vr = eval(&xr, &mut evals);
        if vr < simplex[0].1 {
            let xe = along(-2.0);
            let ve = eval(&xe, &mut evals);
            simplex[n] = if ve < vr { (xe, ve) } else { (xr, vr) };
            continue;
        }
        if vr < simplex[n - 1].1 {
            simplex[n] = (xr, vr);
            continue;
        }
        let (xc, vc) = if vr < simplex[n].1 {
            let xc = along(-0.5);
            let vc = eval(&xc, &mut evals);
            (xc, vc)
        } else {
            let xc = along(0.5);
            let vc = eval(&xc, &mut evals);
            (xc, vc)
        };
        if vc < simplex[n].1.min(vr) {
            simplex[n] = (xc, vc);
            continue;
        }
        // shrink toward the best vertex
        let best_x = simplex[0].0.clone();
        for item in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = (0..n).map(|k| best_x[k] + 0.5 * (item.0[k] - best_x[k])).collect();
            let v = eval(&x, &mut evals);
            *item = (x, v);
        }
    }
    simplex.sort_by(order);
    let (x, v) = simplex.swap_remove(0);
    (x, v)
}
