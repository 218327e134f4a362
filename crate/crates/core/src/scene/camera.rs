//! UAV camera rasters. Each view is a pinhole projection of the scene's boxes
//! drawn back to front; pixel values encode object class and proximity rather
//! than appearance.

use serde::{Deserialize, Serialize};

use super::{SceneConfig, SceneError, SceneState};
use crate::geometry::{Aabb, Vec3};

pub const VIEW_COUNT: usize = 5;
pub const CHANNELS: usize = 3;

const NEAR_PLANE: f64 = 0.1;
const VEHICLE_CHANNEL: usize = 0;
const BUILDING_CHANNEL: usize = 1;
const DEPTH_CHANNEL: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CameraView {
    Front,
    Back,
    Left,
    Right,
    Down,
}

impl CameraView {
    pub const ALL: [CameraView; VIEW_COUNT] = [
        CameraView::Front,
        CameraView::Back,
        CameraView::Left,
        CameraView::Right,
        CameraView::Down,
    ];
}

/// Channel-major raster with values in `[0, 255]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Raster {
    pub fn blank(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0; width * height * channels],
        }
    }

    pub fn get(&self, c: usize, row: usize, col: usize) -> u8 {
        self.data[(c * self.height + row) * self.width + col]
    }

    fn set(&mut self, c: usize, row: usize, col: usize, v: u8) {
        self.data[(c * self.height + row) * self.width + col] = v;
    }

    pub fn channel(&self, c: usize) -> &[u8] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }
}

/// The five views of one UAV in [`CameraView::ALL`] order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageStack {
    pub views: Vec<Raster>,
}

struct Camera {
    pos: Vec3,
    forward: Vec3,
    right: Vec3,
    down: Vec3,
    focal: f64,
    width: usize,
    height: usize,
}

impl Camera {
    fn new(pos: Vec3, view: CameraView, cfg: &SceneConfig) -> Self {
        let [width, height] = cfg.image_resolution;
        let focal = 0.5 * width as f64 / (0.5 * cfg.camera_fov_deg.to_radians()).tan();
        let (forward, right, down) = match view {
            CameraView::Down => (Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, -1.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)),
            side => {
                let (hx, hy) = match side {
                    CameraView::Front => (1.0, 0.0),
                    CameraView::Back => (-1.0, 0.0),
                    CameraView::Left => (0.0, 1.0),
                    _ => (0.0, -1.0),
                };
                let p = cfg.side_camera_pitch_deg.to_radians();
                let f = Vec3::new(p.cos() * hx, p.cos() * hy, -p.sin());
                let r = Vec3::new(f.y, -f.x, 0.0).normalized();
                (f, r, f.cross(r))
            }
        };
        Self {
            pos,
            forward,
            right,
            down,
            focal,
            width,
            height,
        }
    }

    fn to_camera(&self, p: Vec3) -> Vec3 {
        let rel = p - self.pos;
        Vec3::new(rel.dot(self.right), rel.dot(self.down), rel.dot(self.forward))
    }

    fn project_camera(&self, c: Vec3) -> (f64, f64) {
        (
            0.5 * self.width as f64 + self.focal * c.x / c.z,
            0.5 * self.height as f64 + self.focal * c.y / c.z,
        )
    }

    /// Screen-space outline of the part of `b` in front of the near plane.
    fn outline(&self, b: &Aabb) -> Vec<(f64, f64)> {
        let cam: Vec<Vec3> = b.corners().iter().map(|&p| self.to_camera(p)).collect();
        let mut verts = Vec::with_capacity(12);
        for c in &cam {
            if c.z >= NEAR_PLANE {
                verts.push(self.project_camera(*c));
            }
        }
        for &(i, j) in Aabb::EDGES.iter() {
            let (a, b) = (cam[i], cam[j]);
            if (a.z >= NEAR_PLANE) != (b.z >= NEAR_PLANE) {
                let t = (NEAR_PLANE - a.z) / (b.z - a.z);
                verts.push(self.project_camera(a + (b - a) * t));
            }
        }
        convex_hull(verts)
    }
}

/// Andrew's monotone chain; returns the hull counter-clockwise in a y-up
/// sense (orientation is irrelevant for the fill test below).
fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if pts.len() < 3 {
        return pts;
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn fill_polygon(raster: &mut Raster, hull: &[(f64, f64)], values: [u8; CHANNELS]) {
    if hull.len() < 3 {
        return;
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y) in hull {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let col_lo = (x0 - 0.5).ceil().max(0.0) as usize;
    let row_lo = (y0 - 0.5).ceil().max(0.0) as usize;
    let col_hi = ((x1 - 0.5).floor().min(raster.width as f64 - 1.0)).max(-1.0);
    let row_hi = ((y1 - 0.5).floor().min(raster.height as f64 - 1.0)).max(-1.0);
    if col_hi < 0.0 || row_hi < 0.0 {
        return;
    }
    let (col_hi, row_hi) = (col_hi as usize, row_hi as usize);
    let n = hull.len();
    for row in row_lo..=row_hi {
        let py = row as f64 + 0.5;
        for col in col_lo..=col_hi {
            let px = col as f64 + 0.5;
            let mut inside = true;
            for i in 0..n {
                let (ax, ay) = hull[i];
                let (bx, by) = hull[(i + 1) % n];
                if (bx - ax) * (py - ay) - (by - ay) * (px - ax) < 0.0 {
                    inside = false;
                    break;
                }
            }
            if inside {
                for (c, &v) in values.iter().enumerate() {
                    raster.set(c, row, col, v);
                }
            }
        }
    }
}

/// Continuous pixel coordinates `(col, row)` of a world point in one of a
/// UAV's views, or `None` when the point is behind the camera.
pub fn project_to_view(cfg: &SceneConfig, uav_pos: Vec3, view: CameraView, p: Vec3) -> Option<(f64, f64)> {
    let cam = Camera::new(uav_pos, view, cfg);
    let c = cam.to_camera(p);
    (c.z >= NEAR_PLANE).then(|| cam.project_camera(c))
}

pub fn render_uav_images(state: &SceneState, uav: usize, cfg: &SceneConfig) -> Result<ImageStack, SceneError> {
    let pos = *state.uav_poses.get(uav).ok_or(SceneError::IndexOutOfRange {
        kind: "uav",
        index: uav,
        count: state.uav_poses.len(),
    })?;
    let mut objects: Vec<(Aabb, usize)> = state.buildings.iter().map(|b| (*b, BUILDING_CHANNEL)).collect();
    objects.extend(state.vehicle_boxes(cfg).into_iter().map(|b| (b, VEHICLE_CHANNEL)));
    // painter's order: farthest first, index breaks ties
    let mut order: Vec<(f64, usize)> = objects
        .iter()
        .enumerate()
        .map(|(i, (b, _))| ((b.center() - pos).norm(), i))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let [width, height] = cfg.image_resolution;
    let views = CameraView::ALL
        .iter()
        .map(|&view| {
            let cam = Camera::new(pos, view, cfg);
            let mut raster = Raster::blank(width, height, CHANNELS);
            for &(dist, i) in &order {
                let (b, class) = &objects[i];
                let hull = cam.outline(b);
                let mut values = [0u8; CHANNELS];
                values[*class] = 255;
                values[DEPTH_CHANNEL] = (255.0 * (1.0 - dist / cfg.camera_depth_range)).clamp(0.0, 255.0).round() as u8;
                fill_polygon(&mut raster, &hull, values);
            }
            raster
        })
        .collect();
    Ok(ImageStack { views })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::VehiclePose;

    fn scene_with(vehicles: Vec<VehiclePose>, uav: Vec3) -> SceneState {
        SceneState {
            timestep: 0,
            vehicle_poses: vehicles,
            uav_poses: vec![uav],
            rsu_poses: vec![],
            buildings: vec![],
        }
    }

    fn vehicle_at(x: f64, y: f64) -> VehiclePose {
        VehiclePose {
            position: Vec3::new(x, y, 0.0),
            heading: 0.0,
            lane_id: 1,
            speed: 10.0,
        }
    }

    #[test]
    fn empty_scene_is_uniform_background() {
        let cfg = SceneConfig::default();
        let stack = render_uav_images(&scene_with(vec![], Vec3::new(0.0, 0.0, 35.0)), 0, &cfg).unwrap();
        assert_eq!(stack.views.len(), VIEW_COUNT);
        for v in &stack.views {
            assert!(v.data.iter().all(|&p| p == 0));
        }
    }

    #[test]
    fn vehicle_below_uav_lands_at_image_center() {
        let cfg = SceneConfig::default();
        let stack = render_uav_images(&scene_with(vec![vehicle_at(0.0, 0.0)], Vec3::new(0.0, 0.0, 35.0)), 0, &cfg).unwrap();
        let down = &stack.views[4];
        let (w, h) = (down.width, down.height);
        assert_eq!(down.get(VEHICLE_CHANNEL, h / 2, w / 2), 255);
        assert_eq!(down.get(VEHICLE_CHANNEL, 0, 0), 0);
    }

    fn centroid(r: &Raster) -> (f64, f64) {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for row in 0..r.height {
            for col in 0..r.width {
                if r.get(VEHICLE_CHANNEL, row, col) > 0 {
                    sx += col as f64 + 0.5;
                    sy += row as f64 + 0.5;
                    n += 1.0;
                }
            }
        }
        (sx / n, sy / n)
    }

    #[test]
    fn blob_centroid_matches_pinhole_projection() {
        let cfg = SceneConfig::default();
        let uav = Vec3::new(0.0, 0.0, 35.0);
        for (dx, dy) in [(6.0, 0.0), (-4.0, 5.0), (3.0, -7.5)] {
            let v = vehicle_at(dx, dy);
            let stack = render_uav_images(&scene_with(vec![v.clone()], uav), 0, &cfg).unwrap();
            let (cx, cy) = centroid(&stack.views[4]);
            // closed-form nadir pinhole: f = (W/2)/tan(fov/2), image up = +x, image right = -y
            let f = 0.5 * cfg.image_resolution[0] as f64 / (0.5 * cfg.camera_fov_deg.to_radians()).tan();
            let depth = uav.z - 0.5 * cfg.vehicle_size[2];
            let col = 0.5 * cfg.image_resolution[0] as f64 + f * (-dy) / depth;
            let row = 0.5 * cfg.image_resolution[1] as f64 + f * (-dx) / depth;
            assert!((cx - col).abs() < 1.0 && (cy - row).abs() < 1.0, "({cx},{cy}) vs ({col},{row})");
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let cfg = SceneConfig::default();
        let s = crate::scene::generate_scene(&cfg, 3).unwrap();
        assert_eq!(render_uav_images(&s, 2, &cfg).unwrap(), render_uav_images(&s, 2, &cfg).unwrap());
    }

    #[test]
    fn hull_of_square() {
        let h = convex_hull(vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)]);
        assert_eq!(h.len(), 4);
    }
}
