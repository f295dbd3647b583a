//! File formats: PFM depth maps, PLY/CSV point clouds, calibration JSON, and
//! external confidence-map indexes.

pub mod calib;
pub mod cloud;
pub mod confidence;
pub mod pfm;

pub use calib::{read_calib, write_calib};
pub use cloud::{read_cloud, write_cloud};
pub use pfm::{read_depth_pfm, write_depth_pfm};
