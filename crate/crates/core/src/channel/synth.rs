use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;

use super::array::steering_from_sine;
use super::ArrayConfig;
use crate::geometry::Vec3;
use crate::rng;
use crate::scene::{SceneConfig, SceneState};

/// All channels of one snapshot. Arrays lie along the world x axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    /// `[v][k]`, length N_r.
    pub h_user_rsu: Vec<Vec<Array1<Complex64>>>,
    /// `[m][k]`, N_r × N_u.
    pub h_uav_rsu: Vec<Vec<Array2<Complex64>>>,
    /// `[v][m]`, length N_u.
    pub h_user_uav: Vec<Vec<Array1<Complex64>>>,
}

impl ChannelSet {
    pub fn num_users(&self) -> usize {
        self.h_user_rsu.len()
    }

    pub fn num_uavs(&self) -> usize {
        self.h_uav_rsu.len()
    }

    pub fn num_rsus(&self) -> usize {
        self.h_uav_rsu.first().map_or_else(|| self.h_user_rsu.first().map_or(0, Vec::len), Vec::len)
    }
}

const LINK_USER_RSU: u64 = 0;
const LINK_UAV_RSU: u64 = 1;
const LINK_USER_UAV: u64 = 2;

/// Free-space amplitude and carrier phase of a link, attenuated and given a
/// random phase when `blocked`.
pub(crate) fn link_gain(from: Vec3, to: Vec3, blocked: bool, cfg: &ArrayConfig, nlos_phase: f64) -> Complex64 {
    let lambda = cfg.wavelength();
    let d = (to - from).norm().max(1e-3);
    let amp = lambda / (4.0 * std::f64::consts::PI * d);
    if blocked {
        Complex64::from_polar(amp * 10f64.powf(-cfg.nlos_attenuation_db / 20.0), nlos_phase)
    } else {
        Complex64::from_polar(amp, -std::f64::consts::TAU * d / lambda)
    }
}

/// Sine of the angle between the x-aligned array axis' broadside and the
/// direction `from → to`.
fn sine_towards(from: Vec3, to: Vec3) -> f64 {
    let d = to - from;
    let n = d.norm();
    if n == 0.0 {
        0.0
    } else {
        d.x / n
    }
}

fn nlos_phase(seed: u64, timestep: u64, kind: u64, a: usize, b: usize) -> f64 {
    rng::stream(&[seed, rng::TAG_NLOS_PHASE, timestep, kind, a as u64, b as u64]).gen_range(0.0..std::f64::consts::TAU)
}

/// Line-of-sight geometric channels. A link whose straight segment crosses a
/// building keeps its steering structure but loses `nlos_attenuation_db` and
/// takes a seeded uniform phase.
pub fn synthesize_channels(state: &SceneState, scene: &SceneConfig, cfg: &ArrayConfig) -> ChannelSet {
    let seed = scene.rng_seed;
    let t = state.timestep;
    let (n_r, n_u, s) = (cfg.rsu_antennas, cfg.uav_antennas, cfg.element_spacing);
    let users: Vec<Vec3> = (0..state.vehicle_poses.len()).map(|v| state.vehicle_antenna(v, scene)).collect();

    let h_user_rsu = users
        .iter()
        .enumerate()
        .map(|(v, &u)| {
            state
                .rsu_poses
                .iter()
                .enumerate()
                .map(|(k, &r)| {
                    let blocked = state.is_blocked(r, u);
                    let g = link_gain(r, u, blocked, cfg, if blocked { nlos_phase(seed, t, LINK_USER_RSU, v, k) } else { 0.0 });
                    steering_from_sine(sine_towards(r, u), n_r, s).mapv(|a| a * g)
                })
                .collect()
        })
        .collect();

    let h_uav_rsu = state
        .uav_poses
        .iter()
        .enumerate()
        .map(|(m, &p)| {
            state
                .rsu_poses
                .iter()
                .enumerate()
                .map(|(k, &r)| {
                    let blocked = state.is_blocked(r, p);
                    let g = link_gain(r, p, blocked, cfg, if blocked { nlos_phase(seed, t, LINK_UAV_RSU, m, k) } else { 0.0 });
                    let a_r = steering_from_sine(sine_towards(r, p), n_r, s);
                    let a_u = steering_from_sine(sine_towards(p, r), n_u, s);
                    Array2::from_shape_fn((n_r, n_u), |(i, j)| g * a_r[i] * a_u[j])
                })
                .collect()
        })
        .collect();

    let h_user_uav = users
        .iter()
        .enumerate()
        .map(|(v, &u)| {
            state
                .uav_poses
                .iter()
                .enumerate()
                .map(|(m, &p)| {
                    let blocked = state.is_blocked(p, u);
                    let g = link_gain(p, u, blocked, cfg, if blocked { nlos_phase(seed, t, LINK_USER_UAV, v, m) } else { 0.0 });
                    steering_from_sine(sine_towards(p, u), n_u, s).mapv(|a| a * g)
                })
                .collect()
        })
        .collect();

    ChannelSet {
        h_user_rsu,
        h_uav_rsu,
        h_user_uav,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::steering_vector;
    use crate::geometry::Aabb;
    use crate::scene::VehiclePose;

    fn scene_with(vehicle: Vec3, rsu: Vec3, buildings: Vec<Aabb>) -> SceneState {
        SceneState {
            timestep: 3,
            vehicle_poses: vec![VehiclePose {
                position: vehicle,
                heading: 0.0,
                lane_id: 1,
                speed: 10.0,
            }],
            uav_poses: vec![Vec3::new(0.0, 0.0, 35.0)],
            rsu_poses: vec![rsu],
            buildings,
        }
    }

    fn power(h: &Array1<Complex64>) -> f64 {
        h.iter().map(|z| z.norm_sqr()).sum()
    }

    #[test]
    fn broadside_user_is_parallel_to_broadside_steering() {
        let scene = SceneConfig::default();
        let cfg = ArrayConfig::default();
        let s = scene_with(Vec3::new(0.0, -20.0, 0.0), Vec3::new(0.0, 20.0, 1.5), vec![]);
        let h = &synthesize_channels(&s, &scene, &cfg).h_user_rsu[0][0];
        let a = steering_vector(0.0, cfg.rsu_antennas, cfg.element_spacing);
        let inner: Complex64 = a.iter().zip(h).map(|(x, y)| x.conj() * y).sum();
        assert!((inner.norm() - power(h).sqrt() * (cfg.rsu_antennas as f64).sqrt()).abs() < 1e-9 * inner.norm());
    }

    #[test]
    fn doubling_distance_quarters_power() {
        let scene = SceneConfig::default();
        let cfg = ArrayConfig::default();
        let near = scene_with(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 20.0, 1.5), vec![]);
        let far = scene_with(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 40.0, 1.5), vec![]);
        let p1 = power(&synthesize_channels(&near, &scene, &cfg).h_user_rsu[0][0]);
        let p2 = power(&synthesize_channels(&far, &scene, &cfg).h_user_rsu[0][0]);
        assert!((p2 / p1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn blockage_costs_the_configured_attenuation() {
        let scene = SceneConfig::default();
        let cfg = ArrayConfig::default();
        let wall = Aabb::new(Vec3::new(-5.0, 9.0, 0.0), Vec3::new(5.0, 11.0, 20.0));
        let open = scene_with(Vec3::ZERO, Vec3::new(0.0, 20.0, 1.5), vec![]);
        let shadowed = scene_with(Vec3::ZERO, Vec3::new(0.0, 20.0, 1.5), vec![wall]);
        let p_open = power(&synthesize_channels(&open, &scene, &cfg).h_user_rsu[0][0]);
        let p_blocked = power(&synthesize_channels(&shadowed, &scene, &cfg).h_user_rsu[0][0]);
        let ratio_db = 10.0 * (p_open / p_blocked).log10();
        assert!((ratio_db - cfg.nlos_attenuation_db).abs() < 1e-9);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let scene = SceneConfig::default();
        let cfg = ArrayConfig {
            rsu_antennas: 16,
            uav_antennas: 8,
            ..ArrayConfig::default()
        };
        let s = crate::scene::generate_scene(&scene, 12).unwrap();
        assert_eq!(synthesize_channels(&s, &scene, &cfg), synthesize_channels(&s, &scene, &cfg));
    }
}
