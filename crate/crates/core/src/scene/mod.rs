//! Synthetic low-altitude scenes and raw sensor observations.

mod camera;
mod config;
mod failure;
mod lidar;
mod monitor;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Vec3};
use crate::rng;

pub use camera::{project_to_view, render_uav_images, CameraView, ImageStack, Raster, CHANNELS, VIEW_COUNT};
pub use config::SceneConfig;
pub use failure::apply_sensor_failure;
pub use lidar::{render_lidar, world_to_ego, LidarCloud};
pub use monitor::{count_lanes, uav_footprint, MonitorVector};

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
    #[error(
        "no free lane corridor: corridor half-width {corridor_half_width} m vs area half-height \
         {area_half_height} m at building density {building_density}"
    )]
    NoFreeCorridor {
        corridor_half_width: f64,
        area_half_height: f64,
        building_density: f64,
    },
    #[error("UAV footprints overlap: footprint {footprint} m exceeds station cell {cell} m")]
    FootprintOverlap { footprint: f64, cell: f64 },
    #[error("{kind} index {index} out of range ({count} available)")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        count: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehiclePose {
    /// Ground-contact centre of the vehicle.
    pub position: Vec3,
    /// Heading in radians, 0 along +x.
    pub heading: f64,
    /// 1-based lane number.
    pub lane_id: usize,
    /// Constant lane-following speed, m/s.
    pub speed: f64,
}

impl VehiclePose {
    pub fn bounding_box(&self, size: [f64; 3]) -> Aabb {
        // headings are axis-aligned (0 or π), so the box stays axis-aligned
        let c = self.position;
        Aabb::footprint(c.x, c.y, 0.5 * size[0], 0.5 * size[1], size[2])
    }
}

/// Geometric snapshot of the world at one timestep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub timestep: u64,
    pub vehicle_poses: Vec<VehiclePose>,
    pub uav_poses: Vec<Vec3>,
    pub rsu_poses: Vec<Vec3>,
    pub buildings: Vec<Aabb>,
}

impl SceneState {
    pub fn vehicle_boxes(&self, cfg: &SceneConfig) -> Vec<Aabb> {
        self.vehicle_poses
            .iter()
            .map(|v| v.bounding_box(cfg.vehicle_size))
            .collect()
    }

    /// Antenna position of vehicle `v`.
    pub fn vehicle_antenna(&self, v: usize, cfg: &SceneConfig) -> Vec3 {
        self.vehicle_poses[v].position + Vec3::new(0.0, 0.0, cfg.vehicle_antenna_height)
    }

    /// True when the straight segment `a → b` crosses a building.
    pub fn is_blocked(&self, a: Vec3, b: Vec3) -> bool {
        self.buildings.iter().any(|bld| bld.blocks_segment(a, b))
    }
}

/// Static part of a scene: everything that depends on the seed only.
struct Layout {
    buildings: Vec<Aabb>,
    rsus: Vec<Vec3>,
    uav_bases: Vec<(Vec3, f64)>,
    vehicles: Vec<(usize, f64, f64)>,
}

fn layout(cfg: &SceneConfig) -> Layout {
    let [len_x, len_y] = cfg.area;
    let mut rng = rng::stream(&[cfg.rng_seed, rng::TAG_LAYOUT]);

    let rsu_spacing = len_x / cfg.num_rsus as f64;
    let rsus: Vec<Vec3> = (0..cfg.num_rsus)
        .map(|k| {
            let x = -0.5 * len_x + (k as f64 + 0.5) * rsu_spacing + rng.gen_range(-0.15..=0.15) * rsu_spacing;
            let side = if k % 2 == 0 { 1.0 } else { -1.0 };
            Vec3::new(x, side * cfg.rsu_setback, cfg.rsu_height)
        })
        .collect();

    let mut buildings = Vec::new();
    let first_row = cfg.road_half_width() + cfg.sidewalk;
    let cell = cfg.building_cell;
    let cols = (len_x / cell).floor() as usize;
    let rows = ((0.5 * len_y - first_row) / cell).floor() as usize;
    for side in [-1.0, 1.0] {
        for row in 0..rows {
            for col in 0..cols {
                // draw every cell's numbers so the layout of one cell does not
                // depend on whether its neighbours were occupied
                let occupied = rng.gen::<f64>() < cfg.building_density;
                let fx = rng.gen_range(0.6..=0.85);
                let fy = rng.gen_range(0.6..=0.85);
                let jx = rng.gen_range(-1.0..=1.0);
                let jy = rng.gen_range(-1.0..=1.0);
                let h = rng.gen_range(cfg.building_height_range[0]..=cfg.building_height_range[1]);
                if !occupied {
                    continue;
                }
                let (hx, hy) = (0.5 * cell * fx, 0.5 * cell * fy);
                let cx = -0.5 * len_x + (col as f64 + 0.5) * cell + jx * (0.5 * cell - hx);
                let cy_abs = first_row + (row as f64 + 0.5) * cell + jy * (0.5 * cell - hy);
                let b = Aabb::footprint(cx, side * cy_abs, hx, hy, h);
                let clear_of_rsus = rsus.iter().all(|r| {
                    let margin = 1.0;
                    !(r.x > b.min.x - margin
                        && r.x < b.max.x + margin
                        && r.y > b.min.y - margin
                        && r.y < b.max.y + margin)
                });
                if clear_of_rsus {
                    buildings.push(b);
                }
            }
        }
    }

    let mut urng = rng::stream(&[cfg.rng_seed, rng::TAG_UAVS]);
    let station = len_x / cfg.num_uavs as f64;
    let uav_bases = (0..cfg.num_uavs)
        .map(|m| {
            let alt = urng.gen_range(cfg.uav_altitude_range[0]..=cfg.uav_altitude_range[1]);
            let (half_x, _) = cfg.footprint_half_extent(alt);
            let slack = (0.5 * station - half_x - cfg.uav_orbit_radius).max(0.0);
            let x = -0.5 * len_x + (m as f64 + 0.5) * station + urng.gen_range(-1.0..=1.0) * 0.5 * slack;
            let y = urng.gen_range(-1.0..=1.0);
            let phase = urng.gen_range(0.0..std::f64::consts::TAU);
            (Vec3::new(x, y, alt), phase)
        })
        .collect();

    let mut vrng = rng::stream(&[cfg.rng_seed, rng::TAG_VEHICLES]);
    let vehicles = (0..cfg.num_vehicles)
        .map(|_| {
            let lane = vrng.gen_range(1..=cfg.num_lanes);
            let x0 = vrng.gen_range(-0.5 * len_x..0.5 * len_x);
            let speed = vrng.gen_range(cfg.speed_range[0]..=cfg.speed_range[1]);
            (lane, x0, speed)
        })
        .collect();

    Layout {
        buildings,
        rsus,
        uav_bases,
        vehicles,
    }
}

/// Wraps `x` into `[-len/2, len/2)`.
fn wrap(x: f64, len: f64) -> f64 {
    let half = 0.5 * len;
    (x + half).rem_euclid(len) - half
}

/// Per-vehicle `(lane_id, initial x, speed)` drawn from the seed.
pub fn vehicle_table(cfg: &SceneConfig) -> Vec<(usize, f64, f64)> {
    layout(cfg).vehicles
}

pub fn generate_scene(cfg: &SceneConfig, timestep: u64) -> Result<SceneState, SceneError> {
    cfg.validate()?;
    let lay = layout(cfg);
    let t = timestep as f64 * cfg.timestep_s;

    let vehicle_poses = lay
        .vehicles
        .iter()
        .map(|&(lane, x0, speed)| {
            let dir = cfg.lane_direction(lane);
            let x = wrap(x0 + dir * speed * t, cfg.area[0]);
            VehiclePose {
                position: Vec3::new(x, cfg.lane_center(lane), 0.0),
                heading: if dir > 0.0 { 0.0 } else { std::f64::consts::PI },
                lane_id: lane,
                speed,
            }
        })
        .collect();

    let omega = if cfg.uav_orbit_period_s > 0.0 {
        std::f64::consts::TAU / cfg.uav_orbit_period_s
    } else {
        0.0
    };
    let uav_poses = lay
        .uav_bases
        .iter()
        .map(|&(base, phase)| {
            let a = omega * t + phase;
            base + Vec3::new(cfg.uav_orbit_radius * a.cos(), cfg.uav_orbit_radius * a.sin(), 0.0)
        })
        .collect();

    Ok(SceneState {
        timestep,
        vehicle_poses,
        uav_poses,
        rsu_poses: lay.rsus,
        buildings: lay.buildings,
    })
}
