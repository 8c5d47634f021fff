//! Map ingestion: grayscale imagery to occupancy grid, plus the geodetic
//! tangent frame shared by every other module.

mod edges;
mod geo;
mod grid;
mod mask;
mod morphology;
mod pgm;

pub use edges::{extract_edges, extract_edges_with, CannyConfig};
pub use geo::{GeoPoint, LocalFrame, EARTH_RADIUS_M};
pub use grid::{to_grid, Cell, GridError, OccupancyGrid};
pub use mask::BinaryMask;
pub use morphology::{dilate, erode};
pub use pgm::{load_pgm, write_pgm, write_pgm_ascii, GrayImage, PgmError};

use serde::{Deserialize, Serialize};

use crate::geometry::Pose2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub canny: CannyConfig,
    /// Erosion radius applied to free space, in cells.
    pub erode_radius: usize,
    /// Meters per cell.
    pub resolution: f64,
    pub origin: Pose2,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            canny: CannyConfig::default(),
            erode_radius: 1,
            resolution: 0.5,
            origin: Pose2::default(),
        }
    }
}

/// Edge extraction, free-space erosion, rasterization.
///
/// Erosion acts on the free-space complement of the edge map, so each edge
/// pixel grows into an obstacle band `2 * erode_radius + 1` cells wide.
pub fn preprocess(img: &GrayImage, cfg: &PreprocessConfig) -> Result<OccupancyGrid, GridError> {
    let edges = extract_edges_with(img, &cfg.canny);
    let free = erode(&edges.invert(), cfg.erode_radius);
    to_grid(&free.invert(), cfg.resolution, cfg.origin)
}
