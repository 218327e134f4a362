use serde::{Deserialize, Serialize};

use super::{SceneConfig, SceneError, SceneState};

/// Vehicles per lane inside one UAV's surveillance footprint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorVector {
    pub counts: Vec<u32>,
}

impl MonitorVector {
    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }
}

/// Ground rectangle seen by the downward camera of a UAV, as corner points
/// `(x, y)` in counter-clockwise order.
pub fn uav_footprint(state: &SceneState, uav: usize, cfg: &SceneConfig) -> Result<[(f64, f64); 4], SceneError> {
    let p = *state.uav_poses.get(uav).ok_or(SceneError::IndexOutOfRange {
        kind: "uav",
        index: uav,
        count: state.uav_poses.len(),
    })?;
    let (hx, hy) = cfg.footprint_half_extent(p.z);
    Ok([
        (p.x - hx, p.y - hy),
        (p.x + hx, p.y - hy),
        (p.x + hx, p.y + hy),
        (p.x - hx, p.y + hy),
    ])
}

/// Counts vehicles by lane whose centre lies in the half-open footprint
/// `[x - hx, x + hx) × [y - hy, y + hy)`.
pub fn count_lanes(state: &SceneState, uav: usize, cfg: &SceneConfig) -> Result<MonitorVector, SceneError> {
    let [(x0, y0), _, (x1, y1), _] = uav_footprint(state, uav, cfg)?;
    let mut counts = vec![0u32; cfg.num_lanes];
    for v in &state.vehicle_poses {
        let p = v.position;
        if p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1 {
            counts[v.lane_id - 1] += 1;
        }
    }
    Ok(MonitorVector { counts })
}
