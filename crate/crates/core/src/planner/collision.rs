use crate::world_map::{Cell, OccupancyGrid};

/// Disk footprint check. The disk occupies its containing cell plus every
/// cell whose center lies within `radius`; all of them must be in bounds and free.
pub fn pose_is_free(grid: &OccupancyGrid, x: f64, y: f64, radius: f64) -> bool {
    let (fc, fr) = grid.world_to_cell_f(x, y);
    let (c0, r0) = (fc.floor() as i64, fr.floor() as i64);
    if grid.get_signed(c0, r0) != Some(Cell::Free) {
        return false;
    }
    if radius <= 0.0 {
        return true;
    }
    let res = grid.resolution();
    let span = (radius / res).ceil() as i64 + 1;
    let r2 = (radius / res) * (radius / res);
    for dr in -span..=span {
        for dc in -span..=span {
            let (c, r) = (c0 + dc, r0 + dr);
            let (ccx, ccy) = (c as f64 + 0.5, r as f64 + 0.5);
            let d2 = (ccx - fc).powi(2) + (ccy - fr).powi(2);
            if d2 <= r2 && grid.get_signed(c, r) != Some(Cell::Free) {
                return false;
            }
        }
    }
    true
}

/// Samples the straight segment at half-cell spacing, endpoints included.
pub fn segment_is_free(grid: &OccupancyGrid, x0: f64, y0: f64, x1: f64, y1: f64, radius: f64) -> bool {
    let len = (x1 - x0).hypot(y1 - y0);
    let n = ((len / (0.5 * grid.resolution())).ceil() as usize).max(1);
    (0..=n).all(|i| {
        let t = i as f64 / n as f64;
        pose_is_free(grid, x0 + t * (x1 - x0), y0 + t * (y1 - y0), radius)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn footprint_sees_neighbouring_obstacle() {
        let mut g = OccupancyGrid::empty(10, 10, 0.5).unwrap();
        g.set(5, 5, Cell::Occupied);
        let (cx, cy) = g.cell_center(5, 5);
        assert!(!pose_is_free(&g, cx, cy, 0.0));
        assert!(pose_is_free(&g, cx + 1.0, cy, 0.0));
        assert!(!pose_is_free(&g, cx + 1.0, cy, 1.0));
        assert!(pose_is_free(&g, cx + 1.0, cy, 0.9));
    }

    #[test]
    fn outside_grid_is_blocked() {
        let g = OccupancyGrid::empty(4, 4, 1.0).unwrap();
        assert!(!pose_is_free(&g, -0.1, 1.0, 0.0));
        assert!(!pose_is_free(&g, 0.2, 0.5, 0.8));
        assert!(pose_is_free(&g, 0.6, 0.6, 0.8));
        assert!(pose_is_free(&g, 2.0, 2.0, 0.8));
    }

    #[test]
    fn unknown_blocks() {
        let mut g = OccupancyGrid::empty(4, 4, 1.0).unwrap();
        g.set(2, 2, Cell::Unknown);
        assert!(!pose_is_free(&g, 2.5, 2.5, 0.0));
    }

    #[test]
    fn segment_through_wall() {
        let mut g = OccupancyGrid::empty(10, 3, 1.0).unwrap();
        g.set(5, 1, Cell::Occupied);
        assert!(!segment_is_free(&g, 1.5, 1.5, 8.5, 1.5, 0.0));
        assert!(segment_is_free(&g, 1.5, 1.5, 4.5, 1.5, 0.0));
    }
}
