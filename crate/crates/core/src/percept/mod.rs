//! Deterministic sensor preprocessing: per-channel image normalization with
//! area downscaling, and LiDAR voxelization with RSU identifiers.

mod image;
mod voxel;

pub use image::{
    normalize_images, normalize_view, resize_area, resized_dim, ChannelStats, FloatRaster, NormalizedImageStack,
    SIGMA_FLOOR,
};
pub use voxel::{voxelize, GridConfig, VoxelGrid};

use crate::geometry::Vec3;
use crate::scene::{SceneConfig, SceneState};

/// RSU antenna positions expressed in vehicle `v`'s LiDAR frame.
pub fn rsus_in_ego_frame(state: &SceneState, v: usize, cfg: &SceneConfig) -> Vec<Vec3> {
    let ego = &state.vehicle_poses[v];
    let origin = ego.position + Vec3::new(0.0, 0.0, cfg.lidar_sensor_height);
    state
        .rsu_poses
        .iter()
        .map(|&r| crate::scene::world_to_ego(r - origin, ego.heading))
        .collect()
}
