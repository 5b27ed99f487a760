//! Fixtures shared by the benchmarks.

use flatflow::shapes::{generate_initial, Shape, ShapeKind};
use flatflow::{Grid, Region};

/// 2:1 ellipse of area pi on an `n x n` grid over `[-2, 2]^2`.
pub fn ellipse(n: usize) -> Region {
    let grid = Grid::square(n, -2.0, 2.0).expect("valid grid");
    generate_initial(&grid, &Shape::new(ShapeKind::Ellipse { aspect: 2.0 }), std::f64::consts::PI)
        .expect("ellipse fits")
}

/// Smallest admissible step, `4 spacing^2`.
pub fn step(region: &Region) -> f64 {
    let s = region.grid().spacing();
    4.0 * s * s
}
