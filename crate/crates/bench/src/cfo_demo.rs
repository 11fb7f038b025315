//! Passband relay loopback: node 1 sends a constant, the relay downconverts
//! and stores it, then sends it back after a wait. The phase seen at the
//! relay ramps with the offset; the phase back at node 1 stays flat because
//! both conversions at each node share one oscillator.
//!
//! Long waits are not synthesized sample by sample. The oscillators are
//! advanced analytically over the wait, drift included.

use std::fmt::Write as _;

use afsim_core::ofdm::PhyParams;
use afsim_core::rf::{downconvert, upconvert, Oscillator};
use afsim_core::signal::{linear_fit_slope, unwrap, SampleBuffer};
use anyhow::Result;
use num_complex::Complex64;

use crate::config::CfoDemoSection;

/// Baseband samples dropped at each end to skip filter transients.
const EDGE: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct CfoTrace {
    pub case: String,
    pub delay_s: f64,
    pub drift_hz_per_s: f64,
    pub relay_phase: Vec<f64>,
    pub return_phase: Vec<f64>,
    /// Fitted slopes, rad/sample.
    pub relay_slope: f64,
    pub return_slope: f64,
    /// `2πΔ/fs`.
    pub expected_relay_slope: f64,
    /// `2π·drift·delay/fs`: the relay frequency change accumulated over the
    /// wait.
    pub expected_return_slope: f64,
}

fn steady_phase(x: &SampleBuffer) -> Vec<f64> {
    unwrap(x.samples[EDGE..x.len() - EDGE].iter().map(|v| v.arg()))
}

/// Offset of one trace's phase: node 1 has carrier `carrier_hz`, the relay
/// `carrier_hz - offset_hz` plus drift.
pub fn loopback(demo: &CfoDemoSection, case: &str, delay_s: f64, drift_hz_per_s: f64) -> Result<CfoTrace> {
    let fs = PhyParams::SAMPLE_RATE;
    let cutoff = afsim_core::rf::FrontEndConfig::default().lpf_cutoff_hz;
    let node1 = Oscillator::new(demo.carrier_hz, 0.0);
    let relay = Oscillator::new(demo.carrier_hz, -demo.offset_hz).with_drift(drift_hz_per_s);
    let x = SampleBuffer::new(vec![Complex64::new(1.0, 0.0); demo.samples], fs)?;

    let out = upconvert(&x, &node1, demo.oversample, cutoff)?;
    let at_relay = downconvert(&out, &relay, fs, cutoff)?;
    let back = upconvert(&at_relay, &relay.advanced(delay_s), demo.oversample, cutoff)?;
    let at_node1 = downconvert(&back, &node1.advanced(delay_s), fs, cutoff)?;

    let relay_phase = steady_phase(&at_relay);
    let return_phase = steady_phase(&at_node1);
    Ok(CfoTrace {
        case: case.to_string(),
        delay_s,
        drift_hz_per_s,
        relay_slope: linear_fit_slope(&relay_phase),
        return_slope: linear_fit_slope(&return_phase),
        relay_phase,
        return_phase,
        expected_relay_slope: std::f64::consts::TAU * demo.offset_hz / fs,
        expected_return_slope: std::f64::consts::TAU * drift_hz_per_s * delay_s / fs,
    })
}

/// Short wait without drift, long wait with drift.
pub fn cfo_demo(demo: &CfoDemoSection) -> Result<Vec<CfoTrace>> {
    Ok(vec![
        loopback(demo, "short", demo.short_delay_s, 0.0)?,
        loopback(demo, "long", demo.long_delay_s, demo.drift_hz_per_s)?,
    ])
}

pub fn traces_csv(config_hash: &str, traces: &[CfoTrace]) -> String {
    let mut out = String::new();
    for t in traces {
        writeln!(
            out,
            "# case={} delay_s={} drift_hz_per_s={} relay_slope={:.9e} expected={:.9e} return_slope={:.9e} expected={:.9e} (wait advanced analytically)",
            t.case, t.delay_s, t.drift_hz_per_s, t.relay_slope, t.expected_relay_slope, t.return_slope, t.expected_return_slope
        )
        .expect("writing to a String cannot fail");
    }
    out.push_str("config_hash,case,sample,relay_phase_rad,return_phase_rad\n");
    for t in traces {
        for (i, (r, b)) in t.relay_phase.iter().zip(&t.return_phase).enumerate() {
            writeln!(out, "{config_hash},{},{},{:.9e},{:.9e}", t.case, i + EDGE, r, b)
                .expect("writing to a String cannot fail");
        }
    }
    out
}

/// Frequency offset (Hz) that the destination measures on a relayed
/// constant, for source, relay and destination carrier offsets relative to
/// `carrier_hz`. Expected: `source_hz - destination_hz`, whatever the relay.
pub fn relayed_offset(
    carrier_hz: f64,
    oversample: usize,
    source_hz: f64,
    relay_hz: f64,
    destination_hz: f64,
    samples: usize,
    delay_s: f64,
) -> Result<f64> {
    let fs = PhyParams::SAMPLE_RATE;
    let cutoff = afsim_core::rf::FrontEndConfig::default().lpf_cutoff_hz;
    let s = Oscillator::new(carrier_hz, source_hz);
    let r = Oscillator::new(carrier_hz, relay_hz);
    let d = Oscillator::new(carrier_hz, destination_hz);
    let x = SampleBuffer::new(vec![Complex64::new(1.0, 0.0); samples], fs)?;
    let at_relay = downconvert(&upconvert(&x, &s, oversample, cutoff)?, &r, fs, cutoff)?;
    let at_dest = downconvert(
        &upconvert(&at_relay, &r.advanced(delay_s), oversample, cutoff)?,
        &d.advanced(delay_s),
        fs,
        cutoff,
    )?;
    Ok(linear_fit_slope(&steady_phase(&at_dest)) * fs / std::f64::consts::TAU)
}
