pub mod bridge;
pub mod geometry;
pub mod localization;
pub mod mission;
pub mod world_map;
pub mod planner;
pub mod power;
pub mod rng;
pub mod sampler;
pub mod sim;
pub mod telemetry;
pub mod vehicle;
