use rayon::prelude::*;

use super::{outage_curve, rate_ratio, EvalError, InspectionReport, MetricTable};
use crate::channel::oracle_best_link;
use crate::channel::RateSet;
use crate::dataset::SampleRecord;
use crate::nnet::{Graph, UapNet};
use crate::scene::VIEW_COUNT;
use crate::train::{predict_record, AgentMask, Variant};

/// A link-selection policy evaluated on the test set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Best link from ground-truth rates over every link.
    Oracle,
    /// Best link from ground-truth rates over direct links only.
    DirectOracle,
    Model(Variant),
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Oracle => "oracle",
            Scheme::DirectOracle => "direct-oracle",
            Scheme::Model(v) => v.name(),
        }
    }
}

/// Agents hidden in one robustness level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dropout {
    pub missing_uavs: usize,
    pub missing_views: usize,
}

fn num_rsus(rec: &SampleRecord) -> usize {
    rec.vehicles.first().map_or(0, |v| v.rates.len() / (1 + v.relays.len()))
}

/// Chosen link for every vehicle of the listed records, in record order.
pub fn predict_links<F>(net: Option<&UapNet>, scheme: Scheme, records: &[SampleRecord], idx: &[usize], mask: F) -> Result<Vec<usize>, EvalError>
where
    F: Fn(&SampleRecord) -> AgentMask + Sync,
{
    let per_record = idx
        .par_iter()
        .map(|&r| -> Result<Vec<usize>, EvalError> {
            let rec = &records[r];
            match scheme {
                Scheme::Oracle => Ok(rec.vehicles.iter().map(|v| v.label).collect()),
                Scheme::DirectOracle => {
                    let k = num_rsus(rec);
                    Ok(rec
                        .vehicles
                        .iter()
                        .map(|v| oracle_best_link(&RateSet { rates: v.rates[..k].to_vec() }))
                        .collect())
                }
                Scheme::Model(_) => {
                    let net = net.expect("model scheme needs a network");
                    Ok(predict_record(net, rec, &mask(rec))?)
                }
            }
        })
        .collect::<Vec<_>>();
    let mut out = Vec::new();
    for p in per_record {
        out.extend(p?);
    }
    Ok(out)
}

fn rate_sets<'a>(records: &'a [SampleRecord], idx: &[usize]) -> Vec<&'a [f64]> {
    idx.iter().flat_map(|&r| records[r].vehicles.iter().map(|v| v.rates.as_slice())).collect()
}

/// Rate achieved by each prediction.
pub fn achieved_rates(records: &[SampleRecord], idx: &[usize], predictions: &[usize]) -> Vec<f64> {
    rate_sets(records, idx).iter().zip(predictions).map(|(r, &p)| r[p]).collect()
}

fn scheme_outcome(
    net: Option<&UapNet>,
    scheme: Scheme,
    records: &[SampleRecord],
    idx: &[usize],
) -> Result<(Vec<f64>, f64), EvalError> {
    let variant = match scheme {
        Scheme::Model(v) => v,
        _ => Variant::Uap,
    };
    let preds = predict_links(net, scheme, records, idx, |_| AgentMask::full(variant))?;
    let ratio = rate_ratio(&preds, &rate_sets(records, idx))?;
    Ok((achieved_rates(records, idx, &preds), ratio))
}

/// Outage curves of the model, when given, and of the two ground-truth
/// policies.
pub fn outage_study(
    net: Option<&UapNet>,
    records: &[SampleRecord],
    idx: &[usize],
    thresholds: &[f64],
    bandwidth_hz: Option<f64>,
) -> Result<MetricTable, EvalError> {
    let mut cols = vec!["threshold", "outage", "rate_ratio"];
    if bandwidth_hz.is_some() {
        cols.push("threshold_mbps");
    }
    let mut table = MetricTable::new("outage", &cols);
    for scheme in [Scheme::Model(Variant::Uap), Scheme::Oracle, Scheme::DirectOracle] {
        if scheme == Scheme::Model(Variant::Uap) && net.is_none() {
            continue;
        }
        let (rates, ratio) = scheme_outcome(net, scheme, records, idx)?;
        let curve = outage_curve(&rates, thresholds, scheme.name())?;
        for (&t, &p) in curve.thresholds.iter().zip(&curve.probabilities) {
            let mut row = vec![t, p, ratio];
            if let Some(bw) = bandwidth_hz {
                row.push(t * bw / 1e6);
            }
            table.push(scheme.name(), row);
        }
    }
    Ok(table)
}

/// Rate ratio with relay slots or views hidden, averaged over dropout
/// seeds. The same agents are hidden for every scheme sharing a seed.
pub fn robustness_sweep(
    net: &UapNet,
    variant: Variant,
    records: &[SampleRecord],
    idx: &[usize],
    levels: &[Dropout],
    seeds: &[u64],
) -> Result<MetricTable, EvalError> {
    if idx.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let relays = records[idx[0]].vehicles.first().map_or(0, |v| v.relays.len());
    let mut table = MetricTable::new("robustness", &["missing_uavs", "missing_views", "rate_ratio_mean", "rate_ratio_sd"]);
    let sets = rate_sets(records, idx);
    for lv in levels {
        if lv.missing_uavs > relays {
            return Err(EvalError::Dropout {
                what: "UAVs",
                requested: lv.missing_uavs,
                available: relays,
            });
        }
        if lv.missing_views > VIEW_COUNT {
            return Err(EvalError::Dropout {
                what: "views",
                requested: lv.missing_views,
                available: VIEW_COUNT,
            });
        }
        let mut ratios = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let preds = predict_links(Some(net), Scheme::Model(variant), records, idx, |rec| {
                AgentMask::dropout(variant, rec, lv.missing_uavs, lv.missing_views, seed)
            })?;
            ratios.push(rate_ratio(&preds, &sets)?);
        }
        let n = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / n;
        let sd = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
        table.push(variant.name(), vec![lv.missing_uavs as f64, lv.missing_views as f64, mean, sd]);
    }
    Ok(table)
}

/// Outage curves and rate ratios of the ground-truth policies and of the
/// single-modality models that are supplied.
pub fn run_baselines(
    records: &[SampleRecord],
    idx: &[usize],
    thresholds: &[f64],
    rgb_only: Option<&UapNet>,
    lidar_only: Option<&UapNet>,
) -> Result<MetricTable, EvalError> {
    let mut table = MetricTable::new("baselines", &["threshold", "outage", "rate_ratio"]);
    let schemes = [
        (Scheme::Oracle, None),
        (Scheme::DirectOracle, None),
        (Scheme::Model(Variant::RgbOnly), rgb_only),
        (Scheme::Model(Variant::LidarOnly), lidar_only),
    ];
    for (scheme, net) in schemes {
        if matches!(scheme, Scheme::Model(_)) && net.is_none() {
            continue;
        }
        let (rates, ratio) = scheme_outcome(net, scheme, records, idx)?;
        let curve = outage_curve(&rates, thresholds, scheme.name())?;
        for (&t, &p) in curve.thresholds.iter().zip(&curve.probabilities) {
            table.push(scheme.name(), vec![t, p, ratio]);
        }
    }
    Ok(table)
}

/// Lane-count predictions of the inspection head for every present UAV.
pub fn inspection_study(net: &UapNet, records: &[SampleRecord], idx: &[usize]) -> Result<(InspectionReport, MetricTable), EvalError> {
    let per_record = idx
        .par_iter()
        .map(|&r| -> Result<Vec<(Vec<f64>, Vec<f64>)>, EvalError> {
            let mut out = Vec::new();
            for u in &records[r].uavs {
                if !u.present || !u.view_present.iter().any(|&p| p) {
                    continue;
                }
                let mut g = Graph::inference(&net.store);
                let x = net.ufe_forward(&mut g, &u.images, &u.view_present)?;
                let d = net.tih_forward(&mut g, x)?;
                out.push((g.value(d).to_vec(), u.counts.iter().map(|&c| c as f64).collect()));
            }
            Ok(out)
        })
        .collect::<Vec<_>>();
    let (mut preds, mut truths) = (Vec::new(), Vec::new());
    for p in per_record {
        for (a, b) in p? {
            preds.push(a);
            truths.push(b);
        }
    }
    let report = InspectionReport::new(&preds, &truths)?;
    let mut table = MetricTable::new("inspection", &["sample", "mistaken", "missed", "abs_error"]);
    for (i, (p, d)) in preds.iter().zip(&truths).enumerate() {
        let err = p.iter().zip(d).map(|(a, b)| (super::round_count(*a) - b).abs()).sum::<f64>() / d.len() as f64;
        table.push("sample", vec![i as f64, report.mistaken[i], report.missed[i], err]);
    }
    table.push(
        "mean",
        vec![preds.len() as f64, report.mean_mistaken(), report.mean_missed(), report.mean_abs_error],
    );
    Ok((report, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::tests::{random_records, small_model};

    #[test]
    fn oracle_ratio_is_one_and_dominates() {
        let recs = random_records(6, 3, 1);
        let idx: Vec<usize> = (0..6).collect();
        let th: Vec<f64> = (0..10).map(|i| i as f64 * 0.25).collect();
        let t = run_baselines(&recs, &idx, &th, None, None).unwrap();
        assert_eq!(t.series("oracle", "rate_ratio")[0], 1.0);
        let a = t.series("oracle", "outage");
        let b = t.series("direct-oracle", "outage");
        assert!(a.iter().zip(&b).all(|(x, y)| x <= y));
    }

    #[test]
    fn zero_dropout_matches_plain_prediction_and_lidar_only_mask() {
        let recs = random_records(4, 2, 2);
        let idx: Vec<usize> = (0..4).collect();
        let net = UapNet::new(small_model()).unwrap();
        let levels = [
            Dropout {
                missing_uavs: 0,
                missing_views: 0,
            },
            Dropout {
                missing_uavs: 2,
                missing_views: 0,
            },
        ];
        let sweep = robustness_sweep(&net, Variant::Uap, &recs, &idx, &levels, &[1, 2]).unwrap();
        let (_, plain) = scheme_outcome(Some(&net), Scheme::Model(Variant::Uap), &recs, &idx).unwrap();
        assert_eq!(sweep.rows[0].values[2], plain);
        assert_eq!(sweep.rows[0].values[3], 0.0);
        // every relay hidden leaves exactly the LiDAR-only model
        let (_, lidar) = scheme_outcome(Some(&net), Scheme::Model(Variant::LidarOnly), &recs, &idx).unwrap();
        assert_eq!(sweep.rows[1].values[2], lidar);
        let too_many = [Dropout {
            missing_uavs: 3,
            missing_views: 0,
        }];
        assert!(matches!(robustness_sweep(&net, Variant::Uap, &recs, &idx, &too_many, &[1]), Err(EvalError::Dropout { .. })));
    }

    #[test]
    fn inspection_table_has_a_row_per_uav() {
        let recs = random_records(3, 1, 3);
        let net = UapNet::new(small_model()).unwrap();
        let (report, table) = inspection_study(&net, &recs, &[0, 1, 2]).unwrap();
        assert_eq!(report.mistaken.len(), 9);
        assert_eq!(table.rows.len(), 10);
    }
}
