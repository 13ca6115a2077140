//! Back-projection of per-view 2D features onto triangle meshes and few-shot
//! keypoint detection by soft assignment.

pub mod geometry;
pub mod raster;
pub mod views;
pub mod features;
pub mod keypoints;
pub mod evaluation;
pub mod fixtures;
