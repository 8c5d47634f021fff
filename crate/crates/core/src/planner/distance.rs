//! Exact Euclidean distance transform (Felzenszwalb & Huttenlocher two-pass
//! lower-envelope algorithm) over blocked grid cells.

use super::PlannerError;
use crate::world_map::OccupancyGrid;

/// Per-cell distance (m) from the cell center to the nearest blocked cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    resolution: f64,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }
}

const INF: f64 = 1e20;

/// 1-D squared distance transform of a sampled function (in place via `out`).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64);
            // z[0] is -inf, so k never underflows
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate().take(n) {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Blocked (occupied or unknown) cells read 0. With no blocked cells every
/// value is the grid diagonal.
pub fn distance_field(grid: &OccupancyGrid) -> Result<DistanceField, PlannerError> {
    let (w, h) = (grid.width(), grid.height());
    if grid.count(crate::world_map::Cell::Free) == 0 {
        return Err(PlannerError::AllOccupied);
    }
    let cap = grid.diagonal();
    let mut sq: Vec<f64> = (0..w * h)
        .map(|i| if grid.is_blocked(i % w, i / w) { 0.0 } else { INF })
        .collect();

    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for col in 0..w {
        for row in 0..h {
            f[row] = sq[row * w + col];
        }
        edt_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for row in 0..h {
            sq[row * w + col] = out[row];
        }
    }
    for row in 0..h {
        f[..w].copy_from_slice(&sq[row * w..(row + 1) * w]);
        edt_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        sq[row * w..(row + 1) * w].copy_from_slice(&out[..w]);
    }

    let res = grid.resolution();
    let values = sq
        .into_iter()
        .map(|d2| if d2 >= INF * 0.5 { cap } else { (d2.sqrt() * res).min(cap) })
        .collect();
    Ok(DistanceField {
        width: w,
        height: h,
        resolution: res,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world_map::Cell;
    use proptest::prelude::*;

    fn brute(grid: &OccupancyGrid) -> Vec<f64> {
        let (w, h) = (grid.width(), grid.height());
        let occ: Vec<(usize, usize)> = (0..w * h)
            .filter(|i| grid.is_blocked(i % w, i / w))
            .map(|i| (i % w, i / w))
            .collect();
        (0..w * h)
            .map(|i| {
                let (c, r) = (i % w, i / w);
                occ.iter()
                    .map(|&(oc, or)| (c as f64 - oc as f64).hypot(r as f64 - or as f64))
                    .fold(f64::INFINITY, f64::min)
                    * grid.resolution()
            })
            .map(|d| d.min(grid.diagonal()))
            .collect()
    }

    #[test]
    fn all_free_is_capped_at_diagonal() {
        let g = OccupancyGrid::empty(7, 5, 0.5).unwrap();
        let d = distance_field(&g).unwrap();
        assert!(d.values().iter().all(|v| *v == g.diagonal()));
    }

    #[test]
    fn all_occupied_is_an_error() {
        let g = OccupancyGrid::new(3, 3, 1.0, Default::default(), Cell::Occupied).unwrap();
        assert_eq!(distance_field(&g), Err(PlannerError::AllOccupied));
    }

    #[test]
    fn single_obstacle_exhaustive_9x9() {
        for oc in 0..9 {
            for or in 0..9 {
                let mut g = OccupancyGrid::empty(9, 9, 0.25).unwrap();
                g.set(oc, or, Cell::Occupied);
                let d = distance_field(&g).unwrap();
                assert_eq!(d.get(oc, or), 0.0);
                for (a, b) in d.values().iter().zip(brute(&g)) {
                    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force(bits in proptest::collection::vec(proptest::bool::weighted(0.15), 13 * 11)) {
            let cells: Vec<Cell> = bits.iter().map(|b| if *b { Cell::Occupied } else { Cell::Free }).collect();
            prop_assume!(cells.iter().any(|c| *c == Cell::Free));
            let g = OccupancyGrid::from_cells(13, 11, 0.5, Default::default(), cells).unwrap();
            let d = distance_field(&g).unwrap();
            for (a, b) in d.values().iter().zip(brute(&g)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
