//! Monte Carlo BER sweeps.

use std::fmt::Write as _;
use std::path::Path;

use afsim_core::alamouti::Modulation;
use afsim_core::channel::{path_gain, rayleigh_taps, ChannelSpec, Link, Tap};
use afsim_core::link::{run_link, Configuration, LinkChannels, LinkParams};
use afsim_core::ofdm::ReceiverConfig;
use afsim_core::rf::FrontEndConfig;
use afsim_core::signal::RngStream;
use anyhow::{Context, Result};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{ChannelModel, ExperimentConfig};
use crate::stats::wilson_halfwidth;

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub configuration: Configuration,
    pub modulation: Modulation,
    /// Index into the source power axis; packets at the same index share
    /// channel draws across configurations and modulations.
    pub power_index: usize,
    pub src_power_db: f64,
    pub relay_power_db: Option<f64>,
}

/// Aggregated result of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub configuration: String,
    pub modulation: String,
    pub src_power_db: f64,
    pub relay_power_db: Option<f64>,
    pub packets: usize,
    pub bits: usize,
    pub bit_errors: usize,
    pub sync_failures: usize,
    pub ber: f64,
    pub ci_halfwidth: f64,
}

impl BerPoint {
    pub fn total_power_db(&self) -> f64 {
        match self.relay_power_db {
            Some(r) if r.is_finite() => {
                10.0 * (10f64.powf(self.src_power_db / 10.0) + 10f64.powf(r / 10.0)).log10()
            }
            _ => self.src_power_db,
        }
    }
}

/// Grid in configuration order: configurations, then modulations, then
/// source powers, then relay powers.
pub fn grid(cfg: &ExperimentConfig) -> Result<Vec<GridPoint>> {
    let mut out = Vec::new();
    let powers = cfg.sweep.source_power_db.values();
    for configuration in cfg.configurations()? {
        for modulation in cfg.modulations()? {
            for (power_index, &src) in powers.iter().enumerate() {
                let relays: Vec<Option<f64>> = match configuration {
                    Configuration::Af1x1x1 if cfg.sweep.relay_power_db.is_empty() => vec![Some(src)],
                    Configuration::Af1x1x1 => cfg.sweep.relay_power_db.iter().map(|&r| Some(r)).collect(),
                    _ => vec![None],
                };
                for relay_power_db in relays {
                    out.push(GridPoint {
                        configuration,
                        modulation,
                        power_index,
                        src_power_db: src,
                        relay_power_db,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Link parameters for one grid point.
pub fn link_params(cfg: &ExperimentConfig, point: &GridPoint) -> LinkParams {
    let mut p = LinkParams::new(point.configuration, point.modulation, point.src_power_db);
    let l = &cfg.link;
    p.payload_symbols = l.payload_symbols;
    p.noise_power_db = l.noise_power_db;
    p.lead_in = l.lead_in;
    p.preamble_shift = l.preamble_shift;
    p.destination_hears_slot1 = l.destination_hears_slot1;
    p.relay_offset = cfg.relay.arrival_offset;
    p.source.osc = cfg.source.oscillator();
    p.relay.osc = cfg.relay.oscillator();
    p.destination.osc = cfg.destination.oscillator();
    p.relay.tx_power_db = point.relay_power_db.unwrap_or(f64::NEG_INFINITY);
    let fe = FrontEndConfig {
        adc_bits: l.adc_bits,
        ..FrontEndConfig::default()
    };
    p.relay.fe = fe;
    p.destination.fe = fe;
    p.receiver = ReceiverConfig {
        energy_threshold: l.energy_threshold,
        corr_threshold: l.corr_threshold,
        max_timing_slip: l.preamble_shift,
        front_end: Some(fe),
        ..ReceiverConfig::default()
    };
    p
}

fn draw_channel(cfg: &ExperimentConfig, gain_db: f64, rng: &mut RngStream) -> Result<ChannelSpec> {
    let c = &cfg.channel;
    let taps = match c.model {
        ChannelModel::Awgn => vec![Tap::new(0, Complex64::new(1.0, 0.0))],
        ChannelModel::Rayleigh => rayleigh_taps(c.taps, c.decay_db_per_tap, rng)?,
    };
    Ok(ChannelSpec::new(gain_db, taps, 0.0, 0)?)
}

/// Channels for one packet. All four links are always drawn, in a fixed
/// order, so every configuration sees the same realization.
pub fn draw_channels(cfg: &ExperimentConfig, rng: &mut RngStream) -> Result<LinkChannels> {
    let topo = cfg.topology.topology();
    let g = |link| cfg.link.reference_gain_db + path_gain(&topo, link);
    Ok(LinkChannels {
        sd: draw_channel(cfg, g(Link::SourceDestination), rng)?,
        sd_b: draw_channel(cfg, g(Link::SourceDestination), rng)?,
        sr: draw_channel(cfg, g(Link::SourceRelay), rng)?,
        rd: draw_channel(cfg, g(Link::RelayDestination), rng)?,
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    bits: usize,
    errors: usize,
    missed: usize,
}

fn run_packet(cfg: &ExperimentConfig, params: &LinkParams, point: &GridPoint, packet: usize) -> Result<Tally> {
    let root = RngStream::new(cfg.seed)
        .split(point.power_index as u64)
        .split(packet as u64);
    let channels = draw_channels(cfg, &mut root.split(0))?;
    let mut rng = root.split(1);
    let bits = rng.bits(params.payload_bits());
    let r = run_link(params, &channels, &bits, &mut rng)?;
    Ok(Tally {
        bits: r.bits,
        errors: r.bit_errors,
        missed: usize::from(!r.detected),
    })
}

/// Run one grid point. Packets run in parallel in fixed batches; the
/// early-stop check happens between batches, so the result is the same for
/// any number of workers.
pub fn run_point(cfg: &ExperimentConfig, point: &GridPoint) -> Result<BerPoint> {
    let params = link_params(cfg, point);
    let s = &cfg.sweep;
    let mut total = Tally::default();
    let mut packets = 0;
    while packets < s.packets_per_point && total.errors < s.max_bit_errors.max(1) {
        let end = (packets + s.batch).min(s.packets_per_point);
        let batch: Vec<Tally> = (packets..end)
            .into_par_iter()
            .map(|i| run_packet(cfg, &params, point, i))
            .collect::<Result<_>>()?;
        for t in batch {
            total.bits += t.bits;
            total.errors += t.errors;
            total.missed += t.missed;
        }
        packets = end;
    }
    let ber = if total.bits == 0 {
        0.0
    } else {
        total.errors as f64 / total.bits as f64
    };
    Ok(BerPoint {
        configuration: point.configuration.name().to_string(),
        modulation: point.modulation.name().to_string(),
        src_power_db: point.src_power_db,
        relay_power_db: point.relay_power_db,
        packets,
        bits: total.bits,
        bit_errors: total.errors,
        sync_failures: total.missed,
        ber,
        ci_halfwidth: wilson_halfwidth(total.errors, total.bits),
    })
}

/// All grid points, in grid order.
pub fn sweep_ber(cfg: &ExperimentConfig) -> Result<Vec<BerPoint>> {
    grid(cfg)?.iter().map(|p| run_point(cfg, p)).collect()
}

/// Run `f` on a pool with `workers` threads (0 = rayon's default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")?;
    Ok(pool.install(f))
}

pub const CSV_HEADER: &str =
    "config_hash,configuration,modulation,src_power_db,relay_power_db,packets,bits,bit_errors,ber,ci_halfwidth,sync_failures";

/// Sweep rows as CSV. Missing relay power is an empty field.
pub fn to_csv(config_hash: &str, rows: &[BerPoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let relay = r.relay_power_db.map(|v| format!("{v:.2}")).unwrap_or_default();
        writeln!(
            out,
            "{config_hash},{},{},{:.2},{relay},{},{},{},{:.6e},{:.6e},{}",
            r.configuration, r.modulation, r.src_power_db, r.packets, r.bits, r.bit_errors, r.ber, r.ci_halfwidth,
            r.sync_failures
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
