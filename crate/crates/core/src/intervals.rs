//! Finite unions of closed intervals on the real line and the exact
//! maximal-density set of such a union.

use std::io::Write;

use crate::error::{Error, Result};

/// Sorted, disjoint closed intervals of positive length. Touching intervals
/// are merged.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet {
    ivs: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Normalizes arbitrary intervals: drops empty or degenerate ones, sorts,
    /// and merges overlaps.
    pub fn new(intervals: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut ivs: Vec<(f64, f64)> = intervals.into_iter().filter(|(a, b)| b > a).collect();
        ivs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(ivs.len());
        for (a, b) in ivs {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Self { ivs: out }
    }

    pub fn single(a: f64, b: f64) -> Self {
        Self::new([(a, b)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.ivs
    }

    pub fn is_empty(&self) -> bool {
        self.ivs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ivs.len()
    }

    pub fn measure(&self) -> f64 {
        self.ivs.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        let i = self.ivs.partition_point(|iv| iv.1 < x);
        i < self.ivs.len() && self.ivs[i].0 <= x
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::new(self.ivs.iter().chain(&other.ivs).copied())
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.ivs.len() && j < other.ivs.len() {
            let (a0, a1) = self.ivs[i];
            let (b0, b1) = other.ivs[j];
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi > lo {
                out.push((lo, hi));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { ivs: out }
    }

    /// `|[a, b] ∩ self|`.
    pub fn measure_in(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.ivs.iter().map(|&(x, y)| (y.min(b) - x.max(a)).max(0.0)).sum()
    }

    /// Cumulative measure `|(-inf, y] ∩ self|`.
    pub fn cumulative(&self, y: f64) -> f64 {
        self.ivs.iter().map(|&(a, b)| (b.min(y) - a).max(0.0)).sum()
    }

    /// All interval endpoints, sorted.
    pub fn endpoints(&self) -> Vec<f64> {
        self.ivs.iter().flat_map(|&(a, b)| [a, b]).collect()
    }

    /// Writes `start,end` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "start,end")?;
        for (a, b) in &self.ivs {
            writeln!(out, "{a},{b}")?;
        }
        Ok(())
    }
}

/// `sup_{r in (0,1)} |[x - r, x] ∩ gamma| / r`.
pub fn left_density(gamma: &IntervalSet, x: f64) -> f64 {
    // On each piece between candidate radii the ratio is monotone, so the
    // sup sits at a piece end: r -> 0+, r = x - e for an endpoint e, or r -> 1.
    let fx = gamma.cumulative(x);
    let eps_density = if gamma.ivs.iter().any(|&(a, b)| a < x && x <= b) { 1.0 } else { 0.0 };
    let mut best: f64 = eps_density;
    for e in gamma.endpoints() {
        let r = x - e;
        if r > 0.0 && r < 1.0 {
            best = best.max((fx - gamma.cumulative(e)) / r);
        }
    }
    best.max(fx - gamma.cumulative(x - 1.0))
}

/// Solution set of `l(x) >= 0` on `[lo, hi]` for affine `l` given by its
/// values at the ends.
fn affine_nonneg(lo: f64, hi: f64, vlo: f64, vhi: f64) -> Option<(f64, f64)> {
    match (vlo >= 0.0, vhi >= 0.0) {
        (true, true) => Some((lo, hi)),
        (false, false) => None,
        (true, false) => Some((lo, lo + (hi - lo) * vlo / (vlo - vhi))),
        (false, true) => Some((lo + (hi - lo) * vlo / (vlo - vhi), hi)),
    }
}

/// Solution set of `g(x) >= 0` on `[lo, hi]` for a function affine between
/// the sorted breakpoints `knots`.
fn piecewise_nonneg(lo: f64, hi: f64, knots: &[f64], g: impl Fn(f64) -> f64, out: &mut Vec<(f64, f64)>) {
    let mut pts = vec![lo];
    pts.extend(knots.iter().copied().filter(|&k| k > lo && k < hi));
    pts.push(hi);
    for w in pts.windows(2) {
        if w[1] > w[0] {
            if let Some(iv) = affine_nonneg(w[0], w[1], g(w[0]), g(w[1])) {
                out.push(iv);
            }
        }
    }
}

/// `{x : sup_{r in (0,1)} |[x - r, x] ∩ gamma| / r >= theta}` for
/// `theta in (0, 1]`, exact up to endpoints.
pub fn density_set(gamma: &IntervalSet, theta: f64) -> Result<IntervalSet> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("density threshold {theta}")));
    }
    if gamma.is_empty() {
        return Ok(IntervalSet::empty());
    }
    let ends = gamma.endpoints();
    let g = |x: f64| gamma.cumulative(x) - theta * x;
    // small radii: density 1 on gamma itself
    let mut pieces: Vec<(f64, f64)> = gamma.ivs.clone();
    // radius x - e for each endpoint e
    for &e in &ends {
        let ge = g(e);
        piecewise_nonneg(e, e + 1.0, &ends, |x| g(x) - ge, &mut pieces);
    }
    // radius -> 1
    let shifted: Vec<f64> = {
        let mut k: Vec<f64> = ends.iter().flat_map(|&e| [e, e + 1.0]).collect();
        k.sort_by(f64::total_cmp);
        k
    };
    let (lo, hi) = (ends[0], ends[ends.len() - 1] + 1.0);
    piecewise_nonneg(lo, hi, &shifted, |x| gamma.cumulative(x) - gamma.cumulative(x - 1.0) - theta, &mut pieces);
    Ok(IntervalSet::new(pieces))
}

/// The set of points whose left density in `gamma` reaches `sqrt(|gamma|)`.
pub fn maximal_density_set(gamma: &IntervalSet) -> Result<IntervalSet> {
    let m = gamma.measure();
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::MeasureOutOfRange(m));
    }
    density_set(gamma, m.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_set(raw: &[(f64, f64)]) -> IntervalSet {
        IntervalSet::new(raw.iter().map(|&(a, l)| (a, a + l)))
    }

    /// Membership by scanning `r` over a uniform grid of `n` radii.
    fn brute_density(gamma: &IntervalSet, x: f64, n: usize) -> f64 {
        (1..n).map(|i| i as f64 / n as f64).map(|r| gamma.measure_in(x - r, x) / r).fold(0.0, f64::max)
    }

    #[test]
    fn normalization_and_algebra() {
        let s = IntervalSet::new([(3.0, 4.0), (0.0, 1.0), (0.5, 2.0), (5.0, 5.0), (2.0, 2.5)]);
        assert_eq!(s.intervals(), &[(0.0, 2.5), (3.0, 4.0)]);
        assert_eq!(s.measure(), 3.5);
        assert!(s.contains(2.5) && !s.contains(2.7));
        let t = IntervalSet::new([(1.0, 3.5)]);
        assert_eq!(s.intersection(&t).intervals(), &[(1.0, 2.5), (3.0, 3.5)]);
        assert_eq!(s.union(&t).intervals(), &[(0.0, 4.0)]);
        assert_eq!(s.measure_in(2.0, 3.5), 1.0);
    }

    #[test]
    fn single_interval_closed_form() {
        for sigma in [1e-4, 0.01, 0.09, 0.25, 0.5, 0.81] {
            let gamma = IntervalSet::single(0.0, sigma);
            let out = maximal_density_set(&gamma).unwrap();
            // exact up to rounding of the affine root
            assert_eq!(out.len(), 1);
            let (a, b) = out.intervals()[0];
            assert_eq!(a, 0.0);
            assert!((b - sigma.sqrt()).abs() <= 4.0 * f64::EPSILON * sigma.sqrt(), "sigma {sigma}: {b}");
            assert!(out.measure() <= 3.0 * sigma.sqrt());
        }
    }

    #[test]
    fn single_interval_against_brute_force() {
        let sigma = 0.04;
        let gamma = IntervalSet::single(1.0, 1.0 + sigma);
        let out = maximal_density_set(&gamma).unwrap();
        let theta = sigma.sqrt();
        for i in 0..400 {
            let x = 0.9 + i as f64 * 0.003;
            let d = brute_density(&gamma, x, 10_000);
            if (d - theta).abs() > 1e-3 {
                assert_eq!(out.contains(x), d >= theta, "x {x} d {d}");
            }
        }
    }

    #[test]
    fn measure_out_of_range() {
        assert!(matches!(maximal_density_set(&IntervalSet::single(0.0, 1.0)), Err(Error::MeasureOutOfRange(_))));
        assert!(matches!(maximal_density_set(&IntervalSet::empty()), Err(Error::MeasureOutOfRange(_))));
        assert!(density_set(&IntervalSet::empty(), 0.5).unwrap().is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inclusion_exclusion(a in prop::collection::vec((0u32..400, 1u32..40), 0..8),
                               b in prop::collection::vec((0u32..400, 1u32..40), 0..8)) {
            // endpoints on a lattice of 1/64 are exact in binary
            let f = |v: &Vec<(u32, u32)>| random_set(&v.iter().map(|&(x, l)| (x as f64 / 64.0, l as f64 / 64.0)).collect::<Vec<_>>());
            let (sa, sb) = (f(&a), f(&b));
            prop_assert_eq!(sa.union(&sb).measure() + sa.intersection(&sb).measure(), sa.measure() + sb.measure());
        }

        #[test]
        fn exact_matches_brute_force(raw in prop::collection::vec((0.0f64..3.0, 0.001f64..0.08), 1..5),
                                     probes in prop::collection::vec(-0.5f64..4.5, 40)) {
            let gamma = random_set(&raw);
            prop_assume!(gamma.measure() < 1.0);
            let out = maximal_density_set(&gamma).unwrap();
            let theta = gamma.measure().sqrt();
            for x in probes {
                let exact = left_density(&gamma, x);
                let brute = brute_density(&gamma, x, 10_000);
                prop_assert!(exact >= brute - 1e-9);
                prop_assert!(exact - brute <= 2e-3 * (1.0 + exact));
                if (exact - theta).abs() > 1e-9 {
                    prop_assert_eq!(out.contains(x), exact >= theta, "x {} exact {} theta {}", x, exact, theta);
                }
            }
        }

        #[test]
        fn density_set_monotone_in_gamma(raw in prop::collection::vec((0.0f64..3.0, 0.001f64..0.2), 1..5),
                                         extra in prop::collection::vec((0.0f64..3.0, 0.001f64..0.2), 1..3),
                                         theta in 0.05f64..1.0) {
            let g = random_set(&raw);
            let big = g.union(&random_set(&extra));
            let small = density_set(&g, theta).unwrap();
            let large = density_set(&big, theta).unwrap();
            prop_assert!((small.intersection(&large).measure() - small.measure()).abs() <= 1e-9);
        }
    }
}
