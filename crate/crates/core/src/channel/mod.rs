//! Channels, codebook beamforming, achievable rates of direct and
//! decode-and-forward relayed links, and the best-link oracle.

mod array;
mod rates;
mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use array::{beamform_matrix, beamform_vector, steering_vector, Codebook};
pub use rates::{
    access_rate, backhaul_rate, direct_rate, enumerate_rates, evaluate_snapshot, oracle_best_link, relay_rate, snapshot_links,
    select_relays, BeamSet, LinkIndex, LinkKind, RateSet, SnapshotLinks,
};
pub use synth::{synthesize_channels, ChannelSet};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("invalid array config: {0}")]
    InvalidConfig(String),
    #[error("cannot select {count} relays from {available} UAVs")]
    TooManyRelays { count: usize, available: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub rsu_antennas: usize,
    pub uav_antennas: usize,
    /// Hz.
    pub carrier_freq: f64,
    /// Wavelengths.
    pub element_spacing: f64,
    /// Codewords per array; twice the element count when unset.
    pub codebook_size: Option<usize>,
    /// σ², W.
    pub noise_power: f64,
    /// Per-beam transmit power, W.
    pub tx_power: f64,
    /// τ, the time share of the backhaul hop.
    pub backhaul_fraction: f64,
    /// Extra loss on links that cross a building, dB.
    pub nlos_attenuation_db: f64,
    /// Relay UAVs offered to every user.
    pub relays: usize,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            rsu_antennas: 128,
            uav_antennas: 32,
            carrier_freq: 28e9,
            element_spacing: 0.5,
            codebook_size: None,
            noise_power: 2e-12,
            tx_power: 1e-3,
            backhaul_fraction: 0.5,
            nlos_attenuation_db: 25.0,
            relays: 4,
        }
    }
}

impl ArrayConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    pub fn rsu_codebook_size(&self) -> usize {
        self.codebook_size.unwrap_or(2 * self.rsu_antennas)
    }

    pub fn uav_codebook_size(&self) -> usize {
        self.codebook_size.unwrap_or(2 * self.uav_antennas)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |m: &str| Err(ChannelError::InvalidConfig(m.to_string()));
        if self.rsu_antennas == 0 || self.uav_antennas == 0 {
            return bad("antenna counts must be at least 1");
        }
        if self.codebook_size == Some(0) {
            return bad("codebook_size must be at least 1");
        }
        if !(self.carrier_freq > 0.0) || !(self.element_spacing > 0.0) {
            return bad("carrier_freq and element_spacing must be positive");
        }
        if !(self.noise_power > 0.0) || !(self.tx_power >= 0.0) {
            return bad("noise_power must be positive and tx_power non-negative");
        }
        if !(0.0..=1.0).contains(&self.backhaul_fraction) {
            return bad("backhaul_fraction must lie in [0, 1]");
        }
        if !self.nlos_attenuation_db.is_finite() || self.nlos_attenuation_db < 0.0 {
            return bad("nlos_attenuation_db must be finite and non-negative");
        }
        Ok(())
    }

    pub fn rsu_codebook(&self) -> Codebook {
        Codebook::uniform(self.rsu_antennas, self.rsu_codebook_size(), self.element_spacing)
    }

    pub fn uav_codebook(&self) -> Codebook {
        Codebook::uniform(self.uav_antennas, self.uav_codebook_size(), self.element_spacing)
    }
}
