use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::scene::LidarCloud;

/// Extent and resolution of the ego-centred occupancy grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Lower corner in the ego frame, meters.
    pub min: [f64; 3],
    /// Upper corner in the ego frame, meters (exclusive).
    pub max: [f64; 3],
    pub shape: [usize; 3],
}

impl Default for GridConfig {
    fn default() -> Self {
        // ±40 m around the vehicle; z from just below the ground under the
        // sensor to 16 m above it.
        Self {
            min: [-40.0, -40.0, -2.0],
            max: [40.0, 40.0, 14.0],
            shape: [32, 32, 8],
        }
    }
}

impl GridConfig {
    pub fn voxel_size(&self) -> [f64; 3] {
        std::array::from_fn(|a| (self.max[a] - self.min[a]) / self.shape[a] as f64)
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<(), String> {
        for a in 0..3 {
            if self.shape[a] == 0 || self.max[a] <= self.min[a] {
                return Err(format!("grid axis {a} must have positive extent and shape"));
            }
        }
        Ok(())
    }

    /// Voxel index of a point under half-open `[lo, hi)` bins, or `None`
    /// outside the extent.
    pub fn locate(&self, p: Vec3) -> Option<[usize; 3]> {
        let size = self.voxel_size();
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let v = p.axis(a);
            if v < self.min[a] || v >= self.max[a] {
                return None;
            }
            let i = ((v - self.min[a]) / size[a]).floor() as usize;
            if i >= self.shape[a] {
                return None;
            }
            idx[a] = i;
        }
        Some(idx)
    }

    pub fn flat(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.shape[1] + idx[1]) * self.shape[2] + idx[2]
    }
}

/// Dense occupancy grid: 1 occupied, 0 empty, `-k` for a voxel holding RSU k
/// (1-based).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub shape: [usize; 3],
    pub data: Vec<i8>,
}

impl VoxelGrid {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Self {
            shape,
            data: vec![0; shape.iter().product()],
        }
    }

    pub fn get(&self, idx: [usize; 3]) -> i8 {
        self.data[(idx[0] * self.shape[1] + idx[1]) * self.shape[2] + idx[2]]
    }

    pub fn negative_count(&self) -> usize {
        self.data.iter().filter(|&&v| v < 0).count()
    }
}

/// Binary occupancy from the cloud, then RSU identifiers overwrite whatever
/// their voxel holds. `rsu_positions` must already be in the ego frame.
pub fn voxelize(cloud: &LidarCloud, rsu_positions: &[Vec3], grid: &GridConfig) -> VoxelGrid {
    let mut out = VoxelGrid::zeros(grid.shape);
    for p in &cloud.points {
        if let Some(idx) = grid.locate(*p) {
            out.data[grid.flat(idx)] = 1;
        }
    }
    for (k, r) in rsu_positions.iter().enumerate() {
        let Some(idx) = grid.locate(*r) else { continue };
        let cell = &mut out.data[grid.flat(idx)];
        if *cell < 0 {
            log::warn!("RSU {} shares voxel {:?} with RSU {}; keeping the lower index", k + 1, idx, -*cell);
            continue;
        }
        *cell = -((k + 1) as i8);
    }
    out
}
