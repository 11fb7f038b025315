//! Experiment configuration, read from TOML.
//!
//! Every key has a default, so an empty file is a valid configuration. See
//! `configs/example.toml` for the full schema with comments.

use std::path::{Path, PathBuf};

use afsim_core::alamouti::Modulation;
use afsim_core::channel::Topology;
use afsim_core::link::Configuration;
use afsim_core::ofdm::ReceiverConfig;
use afsim_core::rf::{FrontEndConfig, Oscillator};
use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub sweep: SweepSection,
    pub link: LinkSection,
    pub topology: TopologySection,
    pub channel: ChannelSection,
    pub source: NodeSection,
    pub relay: NodeSection,
    pub destination: NodeSection,
    pub cfo_demo: CfoDemoSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output: None,
            sweep: SweepSection::default(),
            link: LinkSection::default(),
            topology: TopologySection::default(),
            channel: ChannelSection::default(),
            source: NodeSection::default(),
            relay: NodeSection::default(),
            destination: NodeSection::default(),
            cfo_demo: CfoDemoSection::default(),
        }
    }
}

/// Inclusive power range in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl PowerRange {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        ensure!(
            self.start.is_finite() && self.stop.is_finite() && self.step.is_finite(),
            "{name}: range must be finite"
        );
        ensure!(self.step > 0.0 && self.stop >= self.start, "{name}: need step > 0 and stop >= start");
        ensure!(self.values().len() <= 10_000, "{name}: too many points");
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub configurations: Vec<String>,
    pub modulations: Vec<String>,
    pub source_power_db: PowerRange,
    /// Relay transmit powers. Empty means the relay transmits at the
    /// source's power (per-node peak-power constraint).
    pub relay_power_db: Vec<f64>,
    pub packets_per_point: usize,
    /// A point stops early once this many bit errors are seen (checked at
    /// batch boundaries, so results do not depend on scheduling).
    pub max_bit_errors: usize,
    pub batch: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            configurations: vec!["siso".into(), "af1x1x1".into()],
            modulations: vec!["bpsk".into()],
            source_power_db: PowerRange {
                start: -40.0,
                stop: 0.0,
                step: 4.0,
            },
            relay_power_db: Vec::new(),
            packets_per_point: 2000,
            max_bit_errors: 500,
            batch: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    pub payload_symbols: usize,
    /// Receiver noise per complex sample at relay and destination.
    pub noise_power_db: f64,
    /// Gain of the source-destination link; the other links are relative to
    /// it through the topology.
    pub reference_gain_db: f64,
    pub lead_in: usize,
    pub adc_bits: u32,
    pub energy_threshold: f64,
    pub corr_threshold: f64,
    pub preamble_shift: usize,
    pub destination_hears_slot1: bool,
}

impl Default for LinkSection {
    fn default() -> Self {
        let rx = ReceiverConfig::default();
        Self {
            payload_symbols: 20,
            noise_power_db: -70.0,
            reference_gain_db: -30.0,
            lead_in: 96,
            adc_bits: FrontEndConfig::default().adc_bits,
            energy_threshold: rx.energy_threshold,
            corr_threshold: rx.corr_threshold,
            preamble_shift: 4,
            destination_hears_slot1: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySection {
    pub d_sd: f64,
    /// Relay position along the source-destination line, 0..1.
    pub relay_fraction: f64,
    pub path_loss_exponent: f64,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self {
            d_sd: 1.0,
            relay_fraction: 0.5,
            path_loss_exponent: 3.0,
        }
    }
}

impl TopologySection {
    pub fn topology(&self) -> Topology {
        Topology {
            d_sd: self.d_sd,
            d_sr: self.d_sd * self.relay_fraction,
            d_rd: self.d_sd * (1.0 - self.relay_fraction),
            path_loss_exponent: self.path_loss_exponent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModel {
    /// Unit-gain flat channel; only noise varies.
    Awgn,
    /// Quasi-static Rayleigh taps, redrawn per packet.
    Rayleigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub model: ChannelModel,
    pub taps: usize,
    pub decay_db_per_tap: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            model: ChannelModel::Rayleigh,
            taps: 1,
            decay_db_per_tap: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NodeSection {
    /// Carrier offset from nominal, Hz.
    pub cfo_hz: f64,
    pub drift_hz_per_s: f64,
    /// Relay only: slot-2 transmission lag in samples.
    pub arrival_offset: usize,
}

impl Default for NodeSection {
    fn default() -> Self {
        Self {
            cfo_hz: 0.0,
            drift_hz_per_s: 0.0,
            arrival_offset: 0,
        }
    }
}

impl NodeSection {
    pub fn oscillator(&self) -> Oscillator {
        Oscillator::new(0.0, self.cfo_hz).with_drift(self.drift_hz_per_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CfoDemoSection {
    pub carrier_hz: f64,
    pub oversample: usize,
    /// Node 1 carrier minus relay carrier, Hz.
    pub offset_hz: f64,
    pub samples: usize,
    pub short_delay_s: f64,
    pub long_delay_s: f64,
    /// Relay drift applied in the long-delay case.
    pub drift_hz_per_s: f64,
}

impl Default for CfoDemoSection {
    fn default() -> Self {
        Self {
            carrier_hz: 25e6,
            oversample: 16,
            offset_hz: 50e3,
            samples: 1024,
            short_delay_s: 10e-3,
            long_delay_s: 120.0,
            drift_hz_per_s: 0.1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        ensure!(s.packets_per_point >= 1, "sweep.packets_per_point must be at least 1");
        ensure!(s.batch >= 1, "sweep.batch must be at least 1");
        s.source_power_db.validate("sweep.source_power_db")?;
        ensure!(
            s.relay_power_db.iter().all(|p| p.is_finite()),
            "sweep.relay_power_db must be finite"
        );
        self.configurations()?;
        self.modulations()?;
        ensure!(
            self.link.payload_symbols >= 2 && self.link.payload_symbols % 2 == 0,
            "link.payload_symbols must be even and positive"
        );
        ensure!((4..=16).contains(&self.link.adc_bits), "link.adc_bits must be in 4..=16");
        ensure!(self.link.noise_power_db.is_finite(), "link.noise_power_db must be finite");
        ensure!(
            self.link.preamble_shift < 16,
            "link.preamble_shift must be below 16"
        );
        ensure!(
            self.relay.arrival_offset <= 64,
            "relay.arrival_offset above 64 samples is outside the model"
        );
        ensure!(
            self.topology.relay_fraction > 0.0 && self.topology.relay_fraction < 1.0,
            "topology.relay_fraction must be inside (0, 1)"
        );
        ensure!(self.topology.d_sd > 0.0, "topology.d_sd must be positive");
        ensure!(self.channel.taps >= 1, "channel.taps must be at least 1");
        ensure!(self.cfo_demo.samples >= 256, "cfo_demo.samples must be at least 256");
        Ok(())
    }

    pub fn configurations(&self) -> Result<Vec<Configuration>> {
        if self.sweep.configurations.is_empty() {
            bail!("sweep.configurations is empty");
        }
        self.sweep
            .configurations
            .iter()
            .map(|c| c.parse().map_err(anyhow::Error::msg))
            .collect()
    }

    pub fn modulations(&self) -> Result<Vec<Modulation>> {
        if self.sweep.modulations.is_empty() {
            bail!("sweep.modulations is empty");
        }
        self.sweep
            .modulations
            .iter()
            .map(|m| m.parse().map_err(anyhow::Error::msg))
            .collect()
    }

    /// First 16 hex digits of SHA-256 over the canonical TOML form.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("configuration serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("sed = 3").is_err());
        assert!(ExperimentConfig::from_toml("[link]\nnoise = 1").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ExperimentConfig::from_toml("[sweep]\npackets_per_point = 0").is_err());
        assert!(ExperimentConfig::from_toml("[sweep]\nconfigurations = [\"mimo\"]").is_err());
        assert!(
            ExperimentConfig::from_toml("[sweep]\nsource_power_db = { start = 0, stop = -1, step = 1 }").is_err()
        );
        assert!(ExperimentConfig::from_toml("[link]\npayload_symbols = 3").is_err());
    }

    #[test]
    fn power_range_is_inclusive() {
        let r = PowerRange {
            start: -10.0,
            stop: 0.0,
            step: 2.5,
        };
        assert_eq!(r.values(), vec![-10.0, -7.5, -5.0, -2.5, 0.0]);
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn shipped_example_parses() {
        let text = include_str!("../../../configs/example.toml");
        ExperimentConfig::from_toml(text).unwrap();
    }
}
