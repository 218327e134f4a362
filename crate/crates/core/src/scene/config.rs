use serde::{Deserialize, Serialize};

use super::SceneError;

/// Geometry and sensor parameters of the synthetic low-altitude scenario.
///
/// The road runs along the x axis through the middle of the area; lanes are
/// numbered from the most negative y upwards. Buildings sit on jittered grid
/// cells on both sides of the road, RSUs stand behind the first building
/// row, and UAVs hover above the road at evenly spaced stations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub num_rsus: usize,
    pub num_uavs: usize,
    pub num_vehicles: usize,
    pub num_lanes: usize,
    /// Extent along x (road direction) and y, meters.
    pub area: [f64; 2],
    /// Probability that a building cell holds a building.
    pub building_density: f64,
    pub uav_altitude_range: [f64; 2],
    pub lidar_range: f64,
    /// Camera raster size as `[width, height]` pixels.
    pub image_resolution: [usize; 2],
    pub rng_seed: u64,

    /// Spacing between consecutive timesteps, seconds.
    pub timestep_s: f64,
    pub speed_range: [f64; 2],
    pub lane_width: f64,
    /// Clear strip between the outer lane edge and the first building row.
    pub sidewalk: f64,
    pub building_cell: f64,
    pub building_height_range: [f64; 2],
    pub rsu_height: f64,
    /// Lateral distance of the RSU masts from the road centre line.
    pub rsu_setback: f64,
    pub vehicle_size: [f64; 3],
    /// Height of the vehicle's antenna above ground.
    pub vehicle_antenna_height: f64,
    pub lidar_sensor_height: f64,
    pub lidar_channels: usize,
    pub lidar_azimuth_steps: usize,
    pub lidar_elevation_deg: [f64; 2],
    /// Horizontal field of view shared by the five UAV cameras.
    pub camera_fov_deg: f64,
    /// Downward tilt of the four side cameras.
    pub side_camera_pitch_deg: f64,
    /// Distance at which the depth channel fades to zero.
    pub camera_depth_range: f64,
    pub uav_orbit_radius: f64,
    pub uav_orbit_period_s: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            num_rsus: 4,
            num_uavs: 6,
            num_vehicles: 8,
            num_lanes: 4,
            area: [240.0, 120.0],
            building_density: 0.6,
            uav_altitude_range: [30.0, 38.0],
            lidar_range: 60.0,
            image_resolution: [160, 160],
            rng_seed: 7,
            timestep_s: 0.05,
            speed_range: [8.0, 14.0],
            lane_width: 4.0,
            sidewalk: 3.0,
            building_cell: 16.0,
            building_height_range: [8.0, 30.0],
            rsu_height: 12.0,
            rsu_setback: 34.0,
            vehicle_size: [4.5, 1.9, 1.5],
            vehicle_antenna_height: 1.5,
            lidar_sensor_height: 1.8,
            lidar_channels: 16,
            lidar_azimuth_steps: 180,
            lidar_elevation_deg: [-25.0, 10.0],
            camera_fov_deg: 40.0,
            side_camera_pitch_deg: 45.0,
            camera_depth_range: 120.0,
            uav_orbit_radius: 2.0,
            uav_orbit_period_s: 20.0,
        }
    }
}

impl SceneConfig {
    pub fn road_half_width(&self) -> f64 {
        0.5 * self.num_lanes as f64 * self.lane_width
    }

    /// y coordinate of the centre line of lane `lane_id` (1-based).
    pub fn lane_center(&self, lane_id: usize) -> f64 {
        -self.road_half_width() + (lane_id as f64 - 0.5) * self.lane_width
    }

    /// Travel direction of a lane: +1 along +x for lanes south of the centre line.
    pub fn lane_direction(&self, lane_id: usize) -> f64 {
        if self.lane_center(lane_id) <= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Ground half-extents `(along x, along y)` of the downward camera footprint
    /// at the given altitude.
    pub fn footprint_half_extent(&self, altitude: f64) -> (f64, f64) {
        let tan_h = (self.camera_fov_deg.to_radians() * 0.5).tan();
        let [w, h] = self.image_resolution;
        let tan_v = tan_h * h as f64 / w as f64;
        // image "up" is world +x for the nadir camera, so rows span x
        (altitude * tan_v, altitude * tan_h)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let invalid = |msg: String| Err(SceneError::InvalidConfig(msg));
        for (name, v) in [
            ("num_rsus", self.num_rsus),
            ("num_uavs", self.num_uavs),
            ("num_vehicles", self.num_vehicles),
            ("num_lanes", self.num_lanes),
            ("lidar_channels", self.lidar_channels),
            ("lidar_azimuth_steps", self.lidar_azimuth_steps),
        ] {
            if v == 0 {
                return invalid(format!("{name} must be at least 1"));
            }
        }
        if !(self.area[0] > 0.0 && self.area[1] > 0.0) {
            return invalid("area dimensions must be positive".into());
        }
        if self.image_resolution[0] == 0 || self.image_resolution[1] == 0 {
            return invalid("image_resolution must be positive in both axes".into());
        }
        if !(0.0..=1.0).contains(&self.building_density) {
            return invalid("building_density must lie in [0, 1]".into());
        }
        for (name, [lo, hi]) in [
            ("uav_altitude_range", self.uav_altitude_range),
            ("speed_range", self.speed_range),
            ("building_height_range", self.building_height_range),
        ] {
            if !(lo > 0.0 && lo <= hi) {
                return invalid(format!("{name} must satisfy 0 < lo <= hi"));
            }
        }
        if self.lidar_elevation_deg[0] >= self.lidar_elevation_deg[1] {
            return invalid("lidar_elevation_deg must be increasing".into());
        }
        if !(self.lidar_range > 0.0 && self.timestep_s >= 0.0 && self.lane_width > 0.0) {
            return invalid("lidar_range and lane_width must be positive".into());
        }
        if !(self.camera_fov_deg > 0.0 && self.camera_fov_deg < 170.0) {
            return invalid("camera_fov_deg must lie in (0, 170)".into());
        }
        if self.building_cell <= 0.0 || self.camera_depth_range <= 0.0 {
            return invalid("building_cell and camera_depth_range must be positive".into());
        }

        let corridor = self.road_half_width() + self.sidewalk;
        if corridor >= 0.5 * self.area[1] || self.building_density >= 1.0 {
            return Err(SceneError::NoFreeCorridor {
                corridor_half_width: corridor,
                area_half_height: 0.5 * self.area[1],
                building_density: self.building_density,
            });
        }
        if self.rsu_setback <= corridor || self.rsu_setback >= 0.5 * self.area[1] {
            return invalid("rsu_setback must place RSUs between the road corridor and the area edge".into());
        }

        // UAV stations split the road into equal cells; footprints must stay
        // inside their own cell so that no vehicle is counted twice.
        let cell = self.area[0] / self.num_uavs as f64;
        let (half_x, _) = self.footprint_half_extent(self.uav_altitude_range[1]);
        if 2.0 * (half_x + self.uav_orbit_radius) > cell {
            return Err(SceneError::FootprintOverlap {
                footprint: 2.0 * (half_x + self.uav_orbit_radius),
                cell,
            });
        }
        Ok(())
    }
}
