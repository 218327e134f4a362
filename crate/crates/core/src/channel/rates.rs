use ndarray::Array1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::array::{argmax_first, beamform_matrix, beamform_vector, Codebook};
use super::{synthesize_channels, ArrayConfig, ChannelError, ChannelSet};
use crate::scene::{SceneConfig, SceneState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkKind {
    Direct,
    Indirect,
}

/// One candidate link. `relay` is the slot within the user's relay set, not
/// the UAV index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkIndex {
    pub kind: LinkKind,
    pub rsu: usize,
    pub relay: Option<usize>,
}

impl LinkIndex {
    /// Canonical order: the K direct links, then `(slot, rsu)` row-major.
    pub fn canonical(&self, num_rsus: usize) -> usize {
        match self.relay {
            None => self.rsu,
            Some(slot) => num_rsus * (1 + slot) + self.rsu,
        }
    }

    pub fn from_canonical(index: usize, num_rsus: usize, num_relays: usize) -> Option<Self> {
        if num_rsus == 0 || index >= num_rsus * (num_relays + 1) {
            return None;
        }
        Some(if index < num_rsus {
            Self {
                kind: LinkKind::Direct,
                rsu: index,
                relay: None,
            }
        } else {
            Self {
                kind: LinkKind::Indirect,
                rsu: index % num_rsus,
                relay: Some(index / num_rsus - 1),
            }
        })
    }
}

/// Achievable rates (bits/s/Hz) in canonical link order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub rates: Vec<f64>,
}

/// Codebook beams of one snapshot: `direct[v][k]` from RSU k to user v,
/// `backhaul[m][k]` from RSU k to UAV m, `access[v][m]` from UAV m to user v.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamSet {
    pub direct: Vec<Vec<Array1<Complex64>>>,
    pub backhaul: Vec<Vec<Array1<Complex64>>>,
    pub access: Vec<Vec<Array1<Complex64>>>,
}

impl BeamSet {
    pub fn select(ch: &ChannelSet, rsu_codebook: &Codebook, uav_codebook: &Codebook) -> Self {
        let pick_vec = |h: &Array1<Complex64>, cb: &Codebook| cb.codeword(beamform_vector(h.view(), cb)).to_owned();
        Self {
            direct: ch.h_user_rsu.iter().map(|row| row.iter().map(|h| pick_vec(h, rsu_codebook)).collect()).collect(),
            backhaul: ch
                .h_uav_rsu
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|h| rsu_codebook.codeword(beamform_matrix(h.view(), rsu_codebook)).to_owned())
                        .collect()
                })
                .collect(),
            access: ch.h_user_uav.iter().map(|row| row.iter().map(|h| pick_vec(h, uav_codebook)).collect()).collect(),
        }
    }
}

fn inner(h: &Array1<Complex64>, w: &Array1<Complex64>) -> Complex64 {
    h.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

fn rate_from(signal: f64, interference: f64, cfg: &ArrayConfig) -> f64 {
    let p = cfg.tx_power;
    (1.0 + p * signal / (p * interference + cfg.noise_power)).log2()
}

/// RSU `k` to user `v`; every other user's beam from the same RSU interferes.
pub fn direct_rate(v: usize, k: usize, ch: &ChannelSet, beams: &BeamSet, cfg: &ArrayConfig) -> f64 {
    let h = &ch.h_user_rsu[v][k];
    let signal = inner(h, &beams.direct[v][k]).norm_sqr();
    let interference: f64 = (0..beams.direct.len())
        .filter(|&i| i != v)
        .map(|i| inner(h, &beams.direct[i][k]).norm_sqr())
        .sum();
    rate_from(signal, interference, cfg)
}

/// RSU `k` to UAV `m` with matched-filter combining at the UAV. Beams that
/// RSU `k` aims at the other UAVs in `co_relays` interfere.
pub fn backhaul_rate(m: usize, k: usize, ch: &ChannelSet, beams: &BeamSet, co_relays: &[usize], cfg: &ArrayConfig) -> f64 {
    let h = &ch.h_uav_rsu[m][k];
    let hh = h.t().mapv(|z| z.conj());
    let received = hh.dot(&beams.backhaul[m][k]);
    let signal: f64 = received.iter().map(|z| z.norm_sqr()).sum();
    if signal == 0.0 {
        return 0.0;
    }
    let combiner = received.mapv(|z| z / signal.sqrt());
    let interference: f64 = co_relays
        .iter()
        .filter(|&&j| j != m)
        .map(|&j| inner(&combiner, &hh.dot(&beams.backhaul[j][k])).norm_sqr())
        .sum();
    rate_from(signal, interference, cfg)
}

/// UAV `m` to user `v`; beams of the other users that `m` relays for
/// interfere.
pub fn access_rate(v: usize, m: usize, ch: &ChannelSet, beams: &BeamSet, relays: &[Vec<usize>], cfg: &ArrayConfig) -> f64 {
    let h = &ch.h_user_uav[v][m];
    let signal = inner(h, &beams.access[v][m]).norm_sqr();
    let interference: f64 = (0..beams.access.len())
        .filter(|&i| i != v && relays[i].contains(&m))
        .map(|i| inner(h, &beams.access[i][m]).norm_sqr())
        .sum();
    rate_from(signal, interference, cfg)
}

/// Decode-and-forward rate of RSU `k` → UAV `m` → user `v`.
pub fn relay_rate(
    v: usize,
    m: usize,
    k: usize,
    ch: &ChannelSet,
    beams: &BeamSet,
    relays: &[Vec<usize>],
    cfg: &ArrayConfig,
) -> f64 {
    let tau = cfg.backhaul_fraction;
    let rb = backhaul_rate(m, k, ch, beams, &relays[v], cfg);
    let ra = access_rate(v, m, ch, beams, relays, cfg);
    (tau * rb).min((1.0 - tau) * ra)
}

/// The `count` UAVs with the best interference-free backhaul to any RSU,
/// highest score first with ties to the lower index, then listed in
/// ascending UAV order. Every user receives the same set.
pub fn select_relays(ch: &ChannelSet, beams: &BeamSet, cfg: &ArrayConfig, count: usize) -> Result<Vec<Vec<usize>>, ChannelError> {
    let m_total = ch.num_uavs();
    if count > m_total {
        return Err(ChannelError::TooManyRelays {
            count,
            available: m_total,
        });
    }
    let score: Vec<f64> = (0..m_total)
        .map(|m| {
            (0..ch.num_rsus())
                .map(|k| backhaul_rate(m, k, ch, beams, &[], cfg))
                .fold(0.0, f64::max)
        })
        .collect();
    let mut order: Vec<usize> = (0..m_total).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    let mut chosen = order[..count].to_vec();
    chosen.sort_unstable();
    Ok(vec![chosen; ch.num_users()])
}

pub fn enumerate_rates(v: usize, ch: &ChannelSet, beams: &BeamSet, relays: &[Vec<usize>], cfg: &ArrayConfig) -> RateSet {
    let k_total = ch.num_rsus();
    let mut rates: Vec<f64> = (0..k_total).map(|k| direct_rate(v, k, ch, beams, cfg)).collect();
    for &m in &relays[v] {
        rates.extend((0..k_total).map(|k| relay_rate(v, m, k, ch, beams, relays, cfg)));
    }
    RateSet { rates }
}

/// Canonical index of the best rate; ties go to the lowest index.
pub fn oracle_best_link(rates: &RateSet) -> usize {
    argmax_first(rates.rates.iter().copied())
}

/// Per-user link data for one snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotLinks {
    /// UAV indices in slot order.
    pub relays: Vec<usize>,
    pub rates: RateSet,
    /// `[slot][k]`, the backhaul leg used by each indirect link.
    pub backhaul: Vec<Vec<f64>>,
    /// `[slot]`, the access leg used by each indirect link.
    pub access: Vec<f64>,
    pub label: usize,
}

/// Channels, beams, relay sets, rate sets and oracle labels of every user in
/// a snapshot.
pub fn evaluate_snapshot(
    state: &SceneState,
    scene: &SceneConfig,
    cfg: &ArrayConfig,
    rsu_codebook: &Codebook,
    uav_codebook: &Codebook,
) -> Result<Vec<SnapshotLinks>, ChannelError> {
    cfg.validate()?;
    let ch = synthesize_channels(state, scene, cfg);
    let beams = BeamSet::select(&ch, rsu_codebook, uav_codebook);
    snapshot_links(&ch, &beams, cfg)
}

/// Relay sets, rate sets and labels for given channels and beams. Backhaul
/// legs are computed once per distinct relay set.
pub fn snapshot_links(ch: &ChannelSet, beams: &BeamSet, cfg: &ArrayConfig) -> Result<Vec<SnapshotLinks>, ChannelError> {
    let relays = select_relays(ch, beams, cfg, cfg.relays)?;
    let tau = cfg.backhaul_fraction;
    let mut legs: Vec<(&[usize], Vec<Vec<f64>>)> = Vec::new();
    Ok((0..ch.num_users())
        .map(|v| {
            let set = relays[v].as_slice();
            let backhaul = match legs.iter().find(|(r, _)| *r == set) {
                Some((_, b)) => b.clone(),
                None => {
                    let b: Vec<Vec<f64>> = set
                        .iter()
                        .map(|&m| (0..ch.num_rsus()).map(|k| backhaul_rate(m, k, ch, beams, set, cfg)).collect())
                        .collect();
                    legs.push((set, b.clone()));
                    b
                }
            };
            let access: Vec<f64> = set.iter().map(|&m| access_rate(v, m, ch, beams, &relays, cfg)).collect();
            let mut rates: Vec<f64> = (0..ch.num_rsus()).map(|k| direct_rate(v, k, ch, beams, cfg)).collect();
            for (bh, &ra) in backhaul.iter().zip(&access) {
                rates.extend(bh.iter().map(|&rb| (tau * rb).min((1.0 - tau) * ra)));
            }
            let rates = RateSet { rates };
            let label = oracle_best_link(&rates);
            SnapshotLinks {
                relays: set.to_vec(),
                rates,
                backhaul,
                access,
                label,
            }
        })
        .collect())
}
