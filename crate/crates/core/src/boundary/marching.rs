//! Marching squares on the dual grid of cell centers.
//!
//! A sample is inside when `value <= level`. Crossings are placed by linear
//! interpolation along dual edges; ambiguous (saddle) dual cells are resolved
//! with the average of their four corners. Segments are oriented so the
//! inside lies to their left, which makes outer boundaries counter-clockwise
//! and holes clockwise. All coordinates here are in cell units: the center of
//! cell `(i, j)` is the point `(i, j)`.

use crate::grid::GridField;

/// Crossing on the dual edge with the given id.
///
/// Horizontal edge `(i, j)-(i+1, j)` has id `2 * (j * nx + i)`, vertical edge
/// `(i, j)-(i, j+1)` has id `2 * (j * nx + i) + 1`.
type EdgeId = usize;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment {
    pub from: EdgeId,
    pub to: EdgeId,
    pub a: [f64; 2],
    pub b: [f64; 2],
}

/// Result of stitching segments into chains.
#[derive(Debug, Clone, Default)]
pub(crate) struct Stitched {
    /// Closed loops, first vertex not repeated, consecutive duplicates removed.
    pub loops: Vec<Vec<[f64; 2]>>,
    /// Number of chains that start or end on the edge of the dual grid.
    pub open_chains: usize,
}

#[inline]
fn inside(v: f64, level: f64) -> bool {
    v <= level
}

#[inline]
fn edge_point(field: &GridField, level: f64, edge: EdgeId) -> [f64; 2] {
    let nx = field.grid().nx();
    let cell = edge / 2;
    let (i, j) = (cell % nx, cell / nx);
    let va = field.at(i, j);
    let vb = if edge % 2 == 0 { field.at(i + 1, j) } else { field.at(i, j + 1) };
    let t = if vb == va { 0.5 } else { ((level - va) / (vb - va)).clamp(0.0, 1.0) };
    if edge % 2 == 0 {
        [i as f64 + t, j as f64]
    } else {
        [i as f64, j as f64 + t]
    }
}

/// Visits every dual cell that the level set crosses and emits its oriented
/// segments.
pub(crate) fn segments(field: &GridField, level: f64) -> Vec<Segment> {
    let grid = field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v = [field.at(i, j), field.at(i + 1, j), field.at(i + 1, j + 1), field.at(i, j + 1)];
            let ins = v.map(|x| inside(x, level));
            let count = ins.iter().filter(|&&b| b).count();
            if count == 0 || count == 4 {
                continue;
            }
            // Dual edges in counter-clockwise walk order: bottom, right, top, left.
            let edges = [
                2 * (j * nx + i),
                2 * (j * nx + i + 1) + 1,
                2 * ((j + 1) * nx + i),
                2 * (j * nx + i) + 1,
            ];
            // Walking corner k -> corner k+1 crosses edge k.
            let mut leave = [usize::MAX; 2];
            let mut enter = [usize::MAX; 2];
            let (mut nl, mut ne) = (0, 0);
            for k in 0..4 {
                let (a, b) = (ins[k], ins[(k + 1) % 4]);
                if a && !b {
                    leave[nl] = k;
                    nl += 1;
                } else if !a && b {
                    enter[ne] = k;
                    ne += 1;
                }
            }
            let mut emit = |from: usize, to: usize| {
                let (fe, te) = (edges[from], edges[to]);
                out.push(Segment {
                    from: fe,
                    to: te,
                    a: edge_point(field, level, fe),
                    b: edge_point(field, level, te),
                });
            };
            if nl == 1 {
                emit(leave[0], enter[0]);
                continue;
            }
            // Saddle: leaves at k = l0, l1 and enters in between.
            let center_inside = inside(0.25 * (v[0] + v[1] + v[2] + v[3]), level);
            let next_enter = |l: usize| -> usize {
                // first entering edge after l in counter-clockwise order
                (1..4).map(|d| (l + d) % 4).find(|k| enter.contains(k)).expect("saddle has two enters")
            };
            let prev_enter = |l: usize| -> usize {
                (1..4).map(|d| (l + 4 - d) % 4).find(|k| enter.contains(k)).expect("saddle has two enters")
            };
            for &l in &leave {
                let e = if center_inside { next_enter(l) } else { prev_enter(l) };
                emit(l, e);
            }
        }
    }
    out
}

fn push_dedup(chain: &mut Vec<[f64; 2]>, p: [f64; 2]) {
    if chain.last() != Some(&p) {
        chain.push(p);
    }
}

/// Joins oriented segments into chains by matching shared dual edges.
pub(crate) fn stitch(field: &GridField, segs: &[Segment]) -> Stitched {
    let nx = field.grid().nx();
    let ny = field.grid().ny();
    let mut starting_at = vec![u32::MAX; 2 * nx * ny];
    let mut ending_at = vec![u32::MAX; 2 * nx * ny];
    for (k, s) in segs.iter().enumerate() {
        starting_at[s.from] = k as u32;
        ending_at[s.to] = k as u32;
    }
    let mut used = vec![false; segs.len()];
    let mut result = Stitched::default();

    // Open chains first: segments whose start edge has no predecessor.
    for k in 0..segs.len() {
        if used[k] || ending_at[segs[k].from] != u32::MAX {
            continue;
        }
        let mut cur = k;
        loop {
            used[cur] = true;
            let nxt = starting_at[segs[cur].to];
            if nxt == u32::MAX || used[nxt as usize] {
                break;
            }
            cur = nxt as usize;
        }
        result.open_chains += 1;
    }

    for k in 0..segs.len() {
        if used[k] {
            continue;
        }
        let mut chain = Vec::new();
        let mut cur = k;
        let mut closed = false;
        loop {
            used[cur] = true;
            push_dedup(&mut chain, segs[cur].a);
            let nxt = starting_at[segs[cur].to];
            if nxt == u32::MAX {
                push_dedup(&mut chain, segs[cur].b);
                break;
            }
            let nxt = nxt as usize;
            if nxt == k {
                closed = true;
                break;
            }
            if used[nxt] {
                break;
            }
            cur = nxt;
        }
        if !closed {
            result.open_chains += 1;
            continue;
        }
        while chain.len() > 1 && chain.first() == chain.last() {
            chain.pop();
        }
        if chain.len() >= 3 {
            result.loops.push(chain);
        }
    }
    result
}

/// Area of the part of the unit square where the bilinear-free (edge-linear)
/// marching-squares reconstruction is inside, for corner values
/// `[bottom-left, bottom-right, top-right, top-left]`.
fn unit_cell_inside_area(v: [f64; 4], level: f64) -> f64 {
    let ins = v.map(|x| inside(x, level));
    let count = ins.iter().filter(|&&b| b).count();
    if count == 0 {
        return 0.0;
    }
    if count == 4 {
        return 1.0;
    }
    const CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let crossing = |k: usize| -> [f64; 2] {
        let (a, b) = (k, (k + 1) % 4);
        let t = if v[b] == v[a] { 0.5 } else { ((level - v[a]) / (v[b] - v[a])).clamp(0.0, 1.0) };
        let (pa, pb) = (CORNERS[a], CORNERS[b]);
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    };
    let saddle = count == 2 && ins[0] == ins[2];
    if saddle && !inside(0.25 * (v[0] + v[1] + v[2] + v[3]), level) {
        // two separate inside corners
        let mut area = 0.0;
        for k in 0..4 {
            if ins[k] {
                let p_next = crossing(k);
                let p_prev = crossing((k + 3) % 4);
                area += polygon_area(&[CORNERS[k], p_next, p_prev]);
            }
        }
        return area;
    }
    let mut poly = Vec::with_capacity(8);
    for k in 0..4 {
        if ins[k] {
            poly.push(CORNERS[k]);
        }
        if ins[k] != ins[(k + 1) % 4] {
            poly.push(crossing(k));
        }
    }
    polygon_area(&poly)
}

/// Area of `{field <= level}` as reconstructed by marching squares, summed
/// cell by cell (valid also when the set touches the domain edge). Returned
/// in squared cell units.
pub(crate) fn sublevel_area_cells(field: &GridField, level: f64) -> f64 {
    let grid = field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let vals = field.values();
    let mut total = 0.0;
    for j in 0..ny - 1 {
        let mut row = 0.0;
        let r0 = &vals[j * nx..(j + 1) * nx];
        let r1 = &vals[(j + 1) * nx..(j + 2) * nx];
        for i in 0..nx - 1 {
            let v = [r0[i], r0[i + 1], r1[i + 1], r1[i]];
            let mx = v[0].max(v[1]).max(v[2]).max(v[3]);
            if mx <= level {
                row += 1.0;
                continue;
            }
            let mn = v[0].min(v[1]).min(v[2]).min(v[3]);
            if mn > level {
                continue;
            }
            row += unit_cell_inside_area(v, level);
        }
        total += row;
    }
    total
}

/// Signed shoelace area (positive for counter-clockwise loops).
pub(crate) fn polygon_area(pts: &[[f64; 2]]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let o = pts[0];
    let mut acc = 0.0;
    for k in 1..pts.len() - 1 {
        let a = [pts[k][0] - o[0], pts[k][1] - o[1]];
        let b = [pts[k + 1][0] - o[0], pts[k + 1][1] - o[1]];
        acc += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * acc
}

pub(crate) fn polygon_length(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|k| {
            let (a, b) = (pts[k], pts[(k + 1) % n]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn unit_cell_areas() {
        assert_eq!(unit_cell_inside_area([-1.0, 1.0, 1.0, 1.0], 0.0), 0.125);
        assert_eq!(unit_cell_inside_area([-1.0, -1.0, 1.0, 1.0], 0.0), 0.5);
        assert_eq!(unit_cell_inside_area([1.0, -1.0, -1.0, -1.0], 0.0), 0.875);
        // saddle, center outside: two corner triangles
        assert_eq!(unit_cell_inside_area([-1.0, 2.0, -1.0, 2.0], 0.0), 2.0 * 0.5 * (1.0 / 3.0) * (1.0 / 3.0));
    }

    #[test]
    fn cellwise_area_matches_loops() {
        let g = Grid::square(48, -1.0, 1.0).unwrap();
        let f = GridField::from_fn(g, |p| {
            let r = p[0].hypot(p[1]);
            let th = p[1].atan2(p[0]);
            r - 0.6 * (1.0 + 0.25 * (3.0 * th).cos())
        })
        .unwrap();
        let segs = segments(&f, 0.0);
        let st = stitch(&f, &segs);
        assert_eq!(st.open_chains, 0);
        assert_eq!(st.loops.len(), 1);
        let shoelace: f64 = st.loops.iter().map(|l| polygon_area(l)).sum();
        let cellwise = sublevel_area_cells(&f, 0.0);
        assert!(shoelace > 0.0);
        assert!((shoelace - cellwise).abs() < 1e-9 * cellwise, "{shoelace} vs {cellwise}");
    }

    #[test]
    fn holes_are_clockwise() {
        let g = Grid::square(64, -1.0, 1.0).unwrap();
        // annulus 0.3 < r < 0.7
        let f = GridField::from_fn(g, |p| {
            let r = p[0].hypot(p[1]);
            (r - 0.5).abs() - 0.2
        })
        .unwrap();
        let st = stitch(&f, &segments(&f, 0.0));
        assert_eq!(st.loops.len(), 2);
        let mut areas: Vec<f64> = st.loops.iter().map(|l| polygon_area(l)).collect();
        areas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(areas[0] < 0.0 && areas[1] > 0.0);
        let total: f64 = areas.iter().sum();
        assert!((total - sublevel_area_cells(&f, 0.0)).abs() < 1e-9 * total);
    }

    #[test]
    fn open_chains_are_detected() {
        let g = Grid::square(16, -1.0, 1.0).unwrap();
        let f = GridField::from_fn(g, |p| p[0] * p[1]).unwrap();
        let st = stitch(&f, &segments(&f, 0.0));
        assert!(st.open_chains > 0);
    }
}
