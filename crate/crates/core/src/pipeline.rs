//! Dataset generation: scene, channels and oracle labels, sensor rendering
//! and preprocessing, packed into snapshot records.

use rayon::prelude::*;

use crate::channel::{evaluate_snapshot, ChannelError, Codebook};
use crate::config::RunConfig;
use crate::dataset::{DatasetHeader, ImageTensor, SampleRecord, UavObservation, VehicleObservation, FORMAT_VERSION};
use crate::percept::{normalize_images, rsus_in_ego_frame, voxelize};
use crate::scene::{apply_sensor_failure, count_lanes, generate_scene, render_lidar, render_uav_images, SceneError, VIEW_COUNT};

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// One snapshot at `timestep`.
pub fn generate_record(cfg: &RunConfig, timestep: u64, rsu_cb: &Codebook, uav_cb: &Codebook) -> Result<SampleRecord, GenerateError> {
    let scene = &cfg.scene;
    let state = generate_scene(scene, timestep)?;
    let links = evaluate_snapshot(&state, scene, &cfg.array, rsu_cb, uav_cb)?;
    let mut vehicles = Vec::with_capacity(links.len());
    for (v, l) in links.into_iter().enumerate() {
        let cloud = render_lidar(&state, v, scene)?;
        let voxels = voxelize(&cloud, &rsus_in_ego_frame(&state, v, scene), &cfg.grid);
        vehicles.push(VehicleObservation {
            lidar_present: true,
            voxels,
            relays: l.relays,
            rates: l.rates.rates,
            backhaul: l.backhaul,
            access: l.access,
            label: l.label,
        });
    }
    let [c, h, w] = cfg.image_shape();
    let mut uavs = Vec::with_capacity(scene.num_uavs);
    for m in 0..scene.num_uavs {
        let stack = normalize_images(&render_uav_images(&state, m, scene)?, cfg.preprocess.image_resize_fraction);
        let mut images = ImageTensor::zeros(c, h, w);
        for (i, view) in stack.views.iter().enumerate() {
            for (dst, &src) in images.view_mut(i).iter_mut().zip(&view.data) {
                *dst = src as f32;
            }
        }
        uavs.push(UavObservation {
            present: true,
            view_present: [true; VIEW_COUNT],
            images,
            counts: count_lanes(&state, m, scene)?.counts,
        });
    }
    let rec = SampleRecord {
        timestep,
        vehicles,
        uavs,
    };
    Ok(if cfg.preprocess.failure_rate > 0.0 {
        apply_sensor_failure(&rec, cfg.preprocess.failure_rate, scene.rng_seed)
    } else {
        rec
    })
}

pub fn dataset_header(cfg: &RunConfig, num_records: u64) -> DatasetHeader {
    let [c, h, w] = cfg.image_shape();
    DatasetHeader {
        version: FORMAT_VERSION,
        num_rsus: cfg.scene.num_rsus as u32,
        num_uavs: cfg.scene.num_uavs as u32,
        num_vehicles: cfg.scene.num_vehicles as u32,
        num_lanes: cfg.scene.num_lanes as u32,
        relays: cfg.array.relays as u32,
        num_links: cfg.num_links() as u32,
        grid_shape: cfg.grid.shape.map(|d| d as u32),
        image_shape: [VIEW_COUNT as u32, c as u32, h as u32, w as u32],
        rng_seed: cfg.scene.rng_seed,
        config_hash: cfg.generation_hash(),
        num_records,
    }
}

/// Snapshots `0..num_snapshots`, generated in parallel and kept in
/// timestep order.
pub fn generate_dataset(cfg: &RunConfig, num_snapshots: u64) -> Result<(DatasetHeader, Vec<SampleRecord>), GenerateError> {
    let (rsu_cb, uav_cb) = (cfg.array.rsu_codebook(), cfg.array.uav_codebook());
    let records = (0..num_snapshots)
        .into_par_iter()
        .map(|t| generate_record(cfg, t, &rsu_cb, &uav_cb))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((dataset_header(cfg, num_snapshots), records))
}

/// Label histogram over canonical link indices with the direct share.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelSummary {
    pub histogram: Vec<usize>,
    pub direct: usize,
    pub indirect: usize,
}

impl LabelSummary {
    pub fn new(records: &[SampleRecord], num_rsus: usize, num_links: usize) -> Self {
        let mut histogram = vec![0; num_links];
        for v in records.iter().flat_map(|r| &r.vehicles) {
            histogram[v.label] += 1;
        }
        let direct = histogram[..num_rsus.min(num_links)].iter().sum();
        let indirect = histogram.iter().sum::<usize>() - direct;
        Self {
            histogram,
            direct,
            indirect,
        }
    }

    pub fn indirect_fraction(&self) -> f64 {
        let n = self.direct + self.indirect;
        if n == 0 {
            0.0
        } else {
            self.indirect as f64 / n as f64
        }
    }

    /// True when either class holds fewer than 5% of the samples.
    pub fn is_degenerate(&self) -> bool {
        let f = self.indirect_fraction();
        self.direct + self.indirect > 0 && !(0.05..=0.95).contains(&f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_run() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.scene.num_vehicles = 3;
        cfg.scene.image_resolution = [40, 40];
        cfg.scene.lidar_azimuth_steps = 60;
        cfg.scene.lidar_channels = 8;
        cfg.array.rsu_antennas = 16;
        cfg.array.uav_antennas = 8;
        cfg
    }

    #[test]
    fn records_agree_with_header() {
        let cfg = small_run();
        let (h, recs) = generate_dataset(&cfg, 3).unwrap();
        assert_eq!(h.num_links, 20);
        for (i, r) in recs.iter().enumerate() {
            h.check(i, r).unwrap();
            assert!(r.vehicles.iter().all(|v| v.rates.len() == 20));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small_run();
        assert_eq!(generate_dataset(&cfg, 2).unwrap(), generate_dataset(&cfg, 2).unwrap());
    }

    #[test]
    fn zero_snapshots_gives_empty_dataset() {
        let (h, recs) = generate_dataset(&small_run(), 0).unwrap();
        assert_eq!(h.num_records, 0);
        assert!(recs.is_empty());
    }

    #[test]
    fn label_summary_counts_classes() {
        let mut r = crate::dataset::tests::toy_record(0);
        r.vehicles[0].label = 0;
        r.vehicles[1].label = 3;
        let s = LabelSummary::new(&[r], 2, 4);
        assert_eq!((s.direct, s.indirect), (1, 1));
        assert_eq!(s.histogram, vec![1, 0, 0, 1]);
        assert!(!s.is_degenerate());
        assert!(LabelSummary::new(&[], 2, 4).indirect_fraction() == 0.0);
    }
}
