use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::mask::BinaryMask;
use crate::geometry::Pose2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Free,
    Occupied,
    Unknown,
}

impl Cell {
    /// ROS map convention: 0 free, 100 occupied, -1 unknown.
    pub fn code(self) -> i8 {
        match self {
            Cell::Free => 0,
            Cell::Occupied => 100,
            Cell::Unknown => -1,
        }
    }

    pub fn from_code(code: i8) -> Option<Cell> {
        match code {
            0 => Some(Cell::Free),
            100 => Some(Cell::Occupied),
            -1 => Some(Cell::Unknown),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("resolution must be positive and finite, got {0}")]
    BadResolution(f64),
    #[error("grid dimensions must be positive")]
    EmptyGrid,
    #[error("cell count {got} does not match {width}x{height}")]
    CellCount {
        width: usize,
        height: usize,
        got: usize,
    },
    #[error("unknown cell code {0}")]
    BadCellCode(i8),
}

/// Rasterized world. Cell `(col, row)` covers the square whose lower-left
/// corner sits at `origin + (col, row) * resolution` in the grid frame; rows
/// grow along +y, matching image row order.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2,
    cells: Vec<Cell>,
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2,
        fill: Cell,
    ) -> Result<Self, GridError> {
        Self::from_cells(width, height, resolution, origin, vec![fill; width * height])
    }

    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2,
        cells: Vec<Cell>,
    ) -> Result<Self, GridError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(GridError::BadResolution(resolution));
        }
        if width == 0 || height == 0 {
            return Err(GridError::EmptyGrid);
        }
        if cells.len() != width * height {
            return Err(GridError::CellCount {
                width,
                height,
                got: cells.len(),
            });
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cells,
        })
    }

    /// All-free grid anchored at the local origin.
    pub fn empty(width: usize, height: usize, resolution: f64) -> Result<Self, GridError> {
        Self::new(width, height, resolution, Pose2::default(), Cell::Free)
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

    pub fn origin(&self) -> Pose2 {
        self.origin
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> Cell {
        self.cells[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, cell: Cell) {
        self.cells[row * self.width + col] = cell;
    }

    /// Cell lookup with signed indices; outside the raster reads as `None`.
    #[inline]
    pub fn get_signed(&self, col: i64, row: i64) -> Option<Cell> {
        if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
            None
        } else {
            Some(self.get(col as usize, row as usize))
        }
    }

    /// Planner view: anything not known to be free blocks motion.
    #[inline]
    pub fn is_blocked(&self, col: usize, row: usize) -> bool {
        self.get(col, row) != Cell::Free
    }

    pub fn count(&self, kind: Cell) -> usize {
        self.cells.iter().filter(|c| **c == kind).count()
    }

    /// World point expressed in the grid frame (meters, unrotated).
    #[inline]
    pub fn world_to_grid_frame(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.origin.x, y - self.origin.y);
        if self.origin.theta == 0.0 {
            return (dx, dy);
        }
        let (s, c) = self.origin.theta.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Fractional cell coordinates of a world point.
    #[inline]
    pub fn world_to_cell_f(&self, x: f64, y: f64) -> (f64, f64) {
        let (gx, gy) = self.world_to_grid_frame(x, y);
        (gx / self.resolution, gy / self.resolution)
    }

    /// Cell containing a world point, or `None` outside the grid.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (fc, fr) = self.world_to_cell_f(x, y);
        let (c, r) = (fc.floor(), fr.floor());
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            None
        } else {
            Some((c as usize, r as usize))
        }
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        let gx = (col as f64 + 0.5) * self.resolution;
        let gy = (row as f64 + 0.5) * self.resolution;
        if self.origin.theta == 0.0 {
            return (self.origin.x + gx, self.origin.y + gy);
        }
        let (s, c) = self.origin.theta.sin_cos();
        (
            self.origin.x + c * gx - s * gy,
            self.origin.y + s * gx + c * gy,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.world_to_cell(x, y).is_some()
    }

    /// Length of the grid diagonal in meters.
    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64) * self.resolution
    }

    /// Marks every cell whose center lies in the axis-aligned world rectangle.
    pub fn fill_rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, cell: Cell) {
        let (xl, xh) = (x0.min(x1), x0.max(x1));
        let (yl, yh) = (y0.min(y1), y0.max(y1));
        for row in 0..self.height {
            for col in 0..self.width {
                let (cx, cy) = self.cell_center(col, row);
                if cx >= xl && cx <= xh && cy >= yl && cy <= yh {
                    self.set(col, row, cell);
                }
            }
        }
    }

    /// Mask of cells that are not free.
    pub fn blocked_mask(&self) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |c, r| self.is_blocked(c, r))
    }
}

/// Set pixels become `Occupied`, all others `Free`. Indices map one to one.
pub fn to_grid(mask: &BinaryMask, resolution: f64, origin: Pose2) -> Result<OccupancyGrid, GridError> {
    let cells = mask
        .bits()
        .iter()
        .map(|b| if *b { Cell::Occupied } else { Cell::Free })
        .collect();
    OccupancyGrid::from_cells(mask.width(), mask.height(), resolution, origin, cells)
}

#[derive(Serialize, Deserialize)]
struct GridFile {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2,
    /// Run-length pairs `[cell_code, run_length]` over the row-major raster.
    cells: Vec<(i8, u32)>,
}

fn run_length_encode(cells: &[Cell]) -> Vec<(i8, u32)> {
    let mut runs: Vec<(i8, u32)> = Vec::new();
    for c in cells {
        match runs.last_mut() {
            Some((code, n)) if *code == c.code() && *n < u32::MAX => *n += 1,
            _ => runs.push((c.code(), 1)),
        }
    }
    runs
}

impl Serialize for OccupancyGrid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GridFile {
            width: self.width,
            height: self.height,
            resolution: self.resolution,
            origin: self.origin,
            cells: run_length_encode(&self.cells),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OccupancyGrid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let f = GridFile::deserialize(d)?;
        let total = f.width.checked_mul(f.height).ok_or_else(|| D::Error::custom("grid too large"))?;
        let mut cells = Vec::with_capacity(total);
        for (code, n) in f.cells {
            let cell = Cell::from_code(code).ok_or_else(|| D::Error::custom(GridError::BadCellCode(code)))?;
            if cells.len() + n as usize > total {
                return Err(D::Error::custom("run lengths exceed grid size"));
            }
            cells.extend(std::iter::repeat(cell).take(n as usize));
        }
        OccupancyGrid::from_cells(f.width, f.height, f.resolution, f.origin, cells).map_err(D::Error::custom)
    }
}
