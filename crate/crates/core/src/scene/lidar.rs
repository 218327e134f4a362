use serde::{Deserialize, Serialize};

use super::{SceneConfig, SceneError, SceneState};
use crate::geometry::{Aabb, Vec3};

/// Point cloud in the ego vehicle's right-handed frame: x forward, y left,
/// z up, origin at the sensor.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LidarCloud {
    pub points: Vec<Vec3>,
}

/// Ray directions in the sensor frame, elevation-major.
fn ray_directions(cfg: &SceneConfig) -> impl Iterator<Item = Vec3> + '_ {
    let [e_lo, e_hi] = cfg.lidar_elevation_deg;
    let channels = cfg.lidar_channels;
    let steps = cfg.lidar_azimuth_steps;
    (0..channels).flat_map(move |c| {
        let e = if channels == 1 {
            0.5 * (e_lo + e_hi)
        } else {
            e_lo + (e_hi - e_lo) * c as f64 / (channels - 1) as f64
        }
        .to_radians();
        (0..steps).map(move |a| {
            let az = std::f64::consts::TAU * a as f64 / steps as f64;
            Vec3::new(e.cos() * az.cos(), e.cos() * az.sin(), e.sin())
        })
    })
}

/// Rotates an ego-frame vector into the world frame for a vehicle heading.
pub(crate) fn ego_to_world(v: Vec3, heading: f64) -> Vec3 {
    let (s, c) = heading.sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

pub fn world_to_ego(v: Vec3, heading: f64) -> Vec3 {
    ego_to_world(v, -heading)
}

/// Casts the configured ray fan from vehicle `vehicle` against buildings, the
/// other vehicles and the ground plane. At most one return per ray.
pub fn render_lidar(state: &SceneState, vehicle: usize, cfg: &SceneConfig) -> Result<LidarCloud, SceneError> {
    let ego = state.vehicle_poses.get(vehicle).ok_or(SceneError::IndexOutOfRange {
        kind: "vehicle",
        index: vehicle,
        count: state.vehicle_poses.len(),
    })?;
    let origin = ego.position + Vec3::new(0.0, 0.0, cfg.lidar_sensor_height);
    let range = cfg.lidar_range;

    // only boxes whose footprint comes within range can produce returns
    let near = |b: &Aabb| {
        let dx = (b.min.x - origin.x).max(origin.x - b.max.x).max(0.0);
        let dy = (b.min.y - origin.y).max(origin.y - b.max.y).max(0.0);
        dx * dx + dy * dy <= range * range
    };
    let mut targets: Vec<Aabb> = state.buildings.iter().copied().filter(near).collect();
    targets.extend(
        state
            .vehicle_poses
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != vehicle)
            .map(|(_, v)| v.bounding_box(cfg.vehicle_size))
            .filter(near),
    );

    let mut points = Vec::new();
    for dir_ego in ray_directions(cfg) {
        let dir = ego_to_world(dir_ego, ego.heading);
        let mut best = range;
        let mut hit = false;
        if dir.z < 0.0 {
            let t = -origin.z / dir.z;
            if t <= best {
                best = t;
                hit = true;
            }
        }
        for b in &targets {
            if let Some(t) = b.ray_hit(origin, dir, 0.0, best) {
                if t <= best {
                    best = t;
                    hit = true;
                }
            }
        }
        if hit {
            points.push(dir_ego * best);
        }
    }
    Ok(LidarCloud { points })
}
