//! A priori estimates of a flow trace and the good/bad time sets.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::Result;
use crate::intervals::{density_set, IntervalSet};
use crate::mms::FlowTrace;

/// Quantities bounded by the a priori estimates of the scheme. Constants
/// are left to the caller; nothing here passes or fails.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriReport {
    /// `(step, max_{boundary of E_k} |d_{E_{k-1}}| / sqrt(h))` for `k >= 1`.
    pub distance_ratio: Vec<(usize, f64)>,
    pub max_distance_ratio: f64,
    /// `sum_k h ||kappa_k - lambda_k||^2_{L^2}` over steps `1..=N`.
    pub dissipation: f64,
    /// `P(E_0) - P(E_N)`.
    pub perimeter_drop: f64,
    /// `dissipation / perimeter_drop`; NaN when the drop is not positive.
    pub dissipation_ratio: f64,
    /// `(T1, T2, sum_{t_k in (T1, T2]} h lambda_k^2 / (T2 - T1 + 1))` over
    /// consecutive unit windows.
    pub lambda_windows: Vec<(f64, f64, f64)>,
    /// Set when the trace is too short for windowed quantities.
    pub too_short: bool,
}

pub fn apriori_report(trace: &FlowTrace) -> AprioriReport {
    let h = trace.h;
    let recs = &trace.records;
    let distance_ratio: Vec<(usize, f64)> =
        recs.iter().skip(1).map(|r| (r.step, r.max_prev_distance / h.sqrt())).collect();
    let max_distance_ratio = distance_ratio.iter().map(|d| d.1).filter(|v| v.is_finite()).fold(f64::NAN, f64::max);
    let dissipation: f64 = recs.iter().skip(1).map(|r| h * r.kappa_lambda_dev.powi(2)).sum();
    let perimeter_drop = match (recs.first(), recs.last()) {
        (Some(a), Some(b)) => a.perimeter - b.perimeter,
        _ => 0.0,
    };
    let dissipation_ratio = if perimeter_drop > 0.0 { dissipation / perimeter_drop } else { f64::NAN };

    let too_short = recs.len() < 2;
    let mut lambda_windows = Vec::new();
    if !too_short {
        let t_end = recs[recs.len() - 1].t;
        let mut t1 = 0.0;
        while t1 < t_end {
            let t2 = (t1 + 1.0).min(t_end);
            let sum: f64 = recs
                .iter()
                .skip(1)
                .filter(|r| r.t > t1 && r.t <= t2 + 1e-12 * h)
                .map(|r| h * r.lambda * r.lambda)
                .sum();
            lambda_windows.push((t1, t2, sum / (t2 - t1 + 1.0)));
            t1 = t2;
        }
    }
    AprioriReport {
        distance_ratio,
        max_distance_ratio,
        dissipation,
        perimeter_drop,
        dissipation_ratio,
        lambda_windows,
        too_short,
    }
}

impl AprioriReport {
    /// Writes one row per step with the distance ratio and the running
    /// dissipation and perimeter drop.
    pub fn write_csv<W: Write>(&self, mut out: W, trace: &FlowTrace) -> Result<()> {
        writeln!(out, "step,t,distance_ratio,cumulative_dissipation,perimeter_drop")?;
        let mut acc = 0.0;
        let p0 = trace.records.first().map_or(f64::NAN, |r| r.perimeter);
        for (r, (_, ratio)) in trace.records.iter().skip(1).zip(&self.distance_ratio) {
            acc += trace.h * r.kappa_lambda_dev.powi(2);
            writeln!(out, "{},{},{},{},{}", r.step, r.t, ratio, acc, p0 - r.perimeter)?;
        }
        Ok(())
    }
}

/// Bad times, their maximal-density set, and the perimeter side condition.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodTimes {
    /// Union of step intervals `[t_k, t_{k+1}]` in `[T, T_end]` whose
    /// curvature deviation exceeds the level.
    pub gamma: IntervalSet,
    /// Times `t >= T + 1` whose left density in `gamma` at some scale
    /// reaches `sqrt(|gamma|)`.
    pub sigma: IntervalSet,
    /// `(step, P(E at t_k - 1) <= (2 pi sqrt 2 - delta0) r)` with
    /// `|E| = pi r^2`, for steps with `t_k >= 1`.
    pub perimeter_condition: Vec<(usize, bool)>,
}

pub fn good_times(trace: &FlowTrace, t_start: f64, eps0: f64, delta0: f64) -> Result<GoodTimes> {
    let h = trace.h;
    let recs = &trace.records;
    let t_end = recs.last().map_or(0.0, |r| r.t);
    let gamma = IntervalSet::new(recs.iter().filter_map(|r| {
        let (a, b) = (r.t.max(t_start), (r.t + h).min(t_end));
        (b > a && r.kappa_dev > eps0).then_some((a, b))
    }));
    let m = gamma.measure();
    // with |gamma| > 1 the threshold exceeds any density
    let sigma = if gamma.is_empty() || m > 1.0 {
        IntervalSet::empty()
    } else {
        clip_from(&density_set(&gamma, m.sqrt())?, t_start + 1.0)
    };
    let lag = (1.0 / h).round() as usize;
    let perimeter_condition = recs
        .iter()
        .filter(|r| r.step >= lag)
        .map(|r| {
            let past = &recs[r.step - lag];
            let radius = (past.area / PI).sqrt();
            (r.step, past.perimeter <= (2.0 * PI * 2f64.sqrt() - delta0) * radius)
        })
        .collect();
    Ok(GoodTimes { gamma, sigma, perimeter_condition })
}

fn clip_from(s: &IntervalSet, t: f64) -> IntervalSet {
    s.intersection(&IntervalSet::single(t, f64::MAX))
}

impl GoodTimes {
    /// Writes `set,start,end` rows for both sets.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "set,start,end")?;
        for (name, set) in [("gamma", &self.gamma), ("sigma", &self.sigma)] {
            for (a, b) in set.intervals() {
                writeln!(out, "{name},{a},{b}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::mms::{run_flow, FlowOptions, Mode, StepRecord};
    use crate::region::Region;

    fn synthetic(devs: &[f64], h: f64) -> FlowTrace {
        let g = Grid::square(32, -2.0, 2.0).unwrap();
        let e0 = Region::from_fn(g, |p| p[0].hypot(p[1]) - 1.0).unwrap();
        let mut tr = run_flow(&e0, 0.1, 0, PI, Mode::Constrained, &FlowOptions::default()).unwrap();
        tr.h = h;
        let template: StepRecord = tr.records[0].clone();
        tr.records = devs
            .iter()
            .enumerate()
            .map(|(k, &d)| StepRecord { step: k, t: k as f64 * h, kappa_dev: d, ..template.clone() })
            .collect();
        tr
    }

    #[test]
    fn below_level_everywhere_gives_empty_sets() {
        let tr = synthetic(&[0.01; 300], 0.01);
        let gt = good_times(&tr, 0.0, 0.1, 0.1).unwrap();
        assert!(gt.gamma.is_empty() && gt.sigma.is_empty());
        let gt = good_times(&synthetic(&[5.0; 300], 0.01), 0.0, f64::INFINITY, 0.1).unwrap();
        assert!(gt.gamma.is_empty() && gt.sigma.is_empty());
    }

    #[test]
    fn single_bad_burst() {
        let h = 0.01;
        let mut devs = vec![0.0; 400];
        for d in devs.iter_mut().skip(150).take(4) {
            *d = 1.0;
        }
        let gt = good_times(&synthetic(&devs, h), 0.5, 0.5, 0.1).unwrap();
        assert_eq!(gt.gamma.len(), 1);
        let sigma = gt.gamma.measure();
        assert!((sigma - 0.04).abs() < 1e-12);
        let (a, b) = gt.sigma.intervals()[0];
        assert!((a - 1.5).abs() < 1e-12 && (b - (1.5 + sigma.sqrt())).abs() < 1e-12, "{a} {b}");
        // the perimeter condition holds for a disk
        assert!(gt.perimeter_condition.iter().all(|c| c.1));
        assert_eq!(gt.perimeter_condition[0].0, 100);
    }

    #[test]
    fn stationary_disk_report() {
        let g = Grid::square(64, -2.0, 2.0).unwrap();
        let s = g.spacing();
        let e0 = Region::from_fn(g, |p| p[0].hypot(p[1]) - 1.0).unwrap();
        let h = 4.0 * s * s;
        let tr = run_flow(&e0, h, 10, e0.area(), Mode::Constrained, &FlowOptions::default()).unwrap();
        let rep = apriori_report(&tr);
        assert!(!rep.too_short);
        assert!(rep.max_distance_ratio <= s / h.sqrt(), "{}", rep.max_distance_ratio);
        assert!(rep.perimeter_drop.abs() < 1e-2 && rep.dissipation < 1e-2);
        let one = run_flow(&e0, h, 0, e0.area(), Mode::Constrained, &FlowOptions::default()).unwrap();
        let rep = apriori_report(&one);
        assert!(rep.too_short && rep.lambda_windows.is_empty() && rep.distance_ratio.is_empty());
    }
}
