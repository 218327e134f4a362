use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleRecord;
use crate::nnet::{seq_for_slot, AgentToken, AgentType, Graph, NnetError, UapNet, Var, SEQ_LIDAR};
use crate::rng;
use crate::scene::VIEW_COUNT;

/// Which agent tokens a model sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// LiDAR and every relay UAV.
    Uap,
    /// Relay UAV images only.
    RgbOnly,
    /// Vehicle LiDAR only.
    LidarOnly,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Uap, Variant::RgbOnly, Variant::LidarOnly];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Uap => "uap",
            Variant::RgbOnly => "rgb-only",
            Variant::LidarOnly => "lidar-only",
        }
    }
}

/// Agents hidden on top of what a record already reports missing.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentMask {
    pub variant: Variant,
    /// Relay slots whose tokens are marked absent.
    pub dropped_slots: Vec<usize>,
    /// `[uav][view]` views fed as zeros.
    pub dropped_views: Vec<[bool; VIEW_COUNT]>,
}

impl AgentMask {
    pub fn full(variant: Variant) -> Self {
        Self {
            variant,
            dropped_slots: Vec::new(),
            dropped_views: Vec::new(),
        }
    }

    /// Hides `missing_uavs` relay slots, or `missing_views` views of every
    /// UAV, chosen by a stream keyed on the record timestep.
    pub fn dropout(variant: Variant, rec: &SampleRecord, missing_uavs: usize, missing_views: usize, seed: u64) -> Self {
        let mut r = rng::stream(&[seed, rng::TAG_DROPOUT, rec.timestep, missing_uavs as u64, missing_views as u64]);
        let relays = rec.vehicles.first().map_or(0, |v| v.relays.len());
        let mut slots: Vec<usize> = (0..relays).collect();
        slots.shuffle(&mut r);
        slots.truncate(missing_uavs);
        slots.sort_unstable();
        let dropped_views = rec
            .uavs
            .iter()
            .map(|_| {
                let mut views: Vec<usize> = (0..VIEW_COUNT).collect();
                views.shuffle(&mut r);
                let mut d = [false; VIEW_COUNT];
                for &v in views.iter().take(missing_views) {
                    d[v] = true;
                }
                d
            })
            .collect();
        Self {
            variant,
            dropped_slots: slots,
            dropped_views,
        }
    }

    fn views(&self, rec: &SampleRecord, m: usize) -> [bool; VIEW_COUNT] {
        let mut v = rec.uavs[m].view_present;
        if let Some(d) = self.dropped_views.get(m) {
            for (p, &drop) in v.iter_mut().zip(d) {
                *p &= !drop;
            }
        }
        v
    }
}

/// Handoff logits of the listed vehicles of one record. The image extractor
/// runs once per UAV and is shared by every vehicle of the record.
pub fn record_logits(
    net: &UapNet,
    g: &mut Graph<'_>,
    rec: &SampleRecord,
    vehicles: &[usize],
    mask: &AgentMask,
) -> Result<Vec<Var>, NnetError> {
    let use_lidar = mask.variant != Variant::RgbOnly;
    let use_rgb = mask.variant != Variant::LidarOnly;
    let mut ufe: HashMap<usize, Var> = HashMap::new();
    let mut out = Vec::with_capacity(vehicles.len());
    for &v in vehicles {
        let veh = &rec.vehicles[v];
        let mut tokens = Vec::with_capacity(1 + veh.relays.len());
        if use_lidar && veh.lidar_present {
            let x = net.vfe_forward(g, &veh.voxels)?;
            tokens.push(AgentToken {
                agent: AgentType::Lidar,
                seq: SEQ_LIDAR,
                present: true,
                feature: x,
            });
        }
        if use_rgb {
            for (slot, &m) in veh.relays.iter().enumerate() {
                let views = mask.views(rec, m);
                let present = rec.uavs[m].present && views.iter().any(|&p| p) && !mask.dropped_slots.contains(&slot);
                if !present {
                    continue;
                }
                let x = match ufe.get(&m) {
                    Some(&x) => x,
                    None => {
                        let x = net.ufe_forward(g, &rec.uavs[m].images, &views)?;
                        ufe.insert(m, x);
                        x
                    }
                };
                tokens.push(AgentToken {
                    agent: AgentType::Rgb,
                    seq: seq_for_slot(slot),
                    present: true,
                    feature: x,
                });
            }
        }
        let fused = net.acaf_fuse(g, &tokens)?;
        out.push(net.handoff_logits(g, fused.h)?);
    }
    Ok(out)
}

/// Predicted link index for every vehicle of `rec`.
pub fn predict_record(net: &UapNet, rec: &SampleRecord, mask: &AgentMask) -> Result<Vec<usize>, NnetError> {
    let mut g = Graph::inference(&net.store);
    let all: Vec<usize> = (0..rec.vehicles.len()).collect();
    let logits = record_logits(net, &mut g, rec, &all, mask)?;
    Ok(logits.iter().map(|&l| argmax(g.value(l))).collect())
}

/// First index of the maximum.
pub fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}
