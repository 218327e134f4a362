use rand::Rng;

use crate::dataset::SampleRecord;
use crate::rng;

/// Independently drops each vehicle's LiDAR block and each UAV's image block
/// with probability `failure_rate`. A dropped block is zeroed and flagged
/// absent; labels and lane counts are left alone.
pub fn apply_sensor_failure(record: &SampleRecord, failure_rate: f64, rng_seed: u64) -> SampleRecord {
    let mut out = record.clone();
    let p = failure_rate.clamp(0.0, 1.0);
    let mut r = rng::stream(&[rng_seed, rng::TAG_FAILURE, record.timestep]);
    for v in &mut out.vehicles {
        if r.gen::<f64>() < p {
            v.lidar_present = false;
            v.voxels.data.fill(0);
        }
    }
    for u in &mut out.uavs {
        if r.gen::<f64>() < p {
            u.present = false;
            u.view_present = [false; super::VIEW_COUNT];
            u.images.data.fill(0.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::toy_record;

    #[test]
    fn zero_rate_is_identity() {
        let r = toy_record(3);
        assert_eq!(apply_sensor_failure(&r, 0.0, 1), r);
    }

    #[test]
    fn unit_rate_drops_everything_but_keeps_labels() {
        let r = toy_record(3);
        let f = apply_sensor_failure(&r, 1.0, 1);
        assert!(f.vehicles.iter().all(|v| !v.lidar_present && v.voxels.data.iter().all(|&x| x == 0)));
        assert!(f.uavs.iter().all(|u| !u.present && u.images.data.iter().all(|&x| x == 0.0)));
        for (a, b) in r.vehicles.iter().zip(&f.vehicles) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.rates, b.rates);
        }
        for (a, b) in r.uavs.iter().zip(&f.uavs) {
            assert_eq!(a.counts, b.counts);
        }
    }

    #[test]
    fn ten_percent_over_ten_thousand_blocks() {
        // 2500 records × 4 blocks; binomial sd = sqrt(0.09 / 10⁴) = 0.003
        let mut missing = 0usize;
        let mut total = 0usize;
        for t in 0..2500 {
            let f = apply_sensor_failure(&toy_record(t), 0.1, 42);
            missing += f.vehicles.iter().filter(|v| !v.lidar_present).count();
            missing += f.uavs.iter().filter(|u| !u.present).count();
            total += f.vehicles.len() + f.uavs.len();
        }
        assert_eq!(total, 10_000);
        let frac = missing as f64 / total as f64;
        assert!((frac - 0.10).abs() <= 0.01, "{frac}");
    }

    #[test]
    fn deterministic_given_seed() {
        let r = toy_record(8);
        assert_eq!(apply_sensor_failure(&r, 0.5, 5), apply_sensor_failure(&r, 0.5, 5));
    }
}
