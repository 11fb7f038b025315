//! Direct-conversion transmitter and receiver models.
//!
//! Two forms are provided. The passband form works on real-valued signals at
//! an oversampled rate with scaled-down carriers, and is what the relay CFO
//! cancellation is checked against. The equivalent-baseband form applies the
//! carrier mismatch between two oscillators as a complex rotation, and is what
//! the BER simulations use once the two forms have been shown to agree.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{PassbandBuffer, SampleBuffer};

/// A node's local carrier: nominal frequency plus a fixed offset and a slow
/// linear drift. Transmit and receive paths of one node share it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oscillator {
    pub nominal_hz: f64,
    pub offset_hz: f64,
    pub drift_hz_per_s: f64,
    pub phase0: f64,
}

impl Oscillator {
    pub fn new(nominal_hz: f64, offset_hz: f64) -> Self {
        Self {
            nominal_hz,
            offset_hz,
            drift_hz_per_s: 0.0,
            phase0: 0.0,
        }
    }

    pub fn with_drift(mut self, drift_hz_per_s: f64) -> Self {
        self.drift_hz_per_s = drift_hz_per_s;
        self
    }

    pub fn with_phase(mut self, phase0: f64) -> Self {
        self.phase0 = phase0;
        self
    }

    /// Carrier frequency excluding drift.
    pub fn carrier_hz(&self) -> f64 {
        self.nominal_hz + self.offset_hz
    }

    pub fn frequency_at(&self, t: f64) -> f64 {
        self.carrier_hz() + self.drift_hz_per_s * t
    }

    /// Integral of 2π·f(t) from 0 to `t`, plus `phase0`.
    pub fn phase_at(&self, t: f64) -> f64 {
        self.phase0 + TAU * (self.carrier_hz() * t + 0.5 * self.drift_hz_per_s * t * t)
    }

    /// The same oscillator observed `dt` seconds later, re-based so that its
    /// time origin is the new instant. Phase and frequency stay continuous.
    pub fn advanced(&self, dt: f64) -> Oscillator {
        let cycles =
            self.carrier_hz() * dt + 0.5 * self.drift_hz_per_s * dt * dt + self.phase0 / TAU;
        Oscillator {
            nominal_hz: self.nominal_hz,
            offset_hz: self.offset_hz + self.drift_hz_per_s * dt,
            drift_hz_per_s: self.drift_hz_per_s,
            phase0: TAU * (cycles - cycles.floor()),
        }
    }

    /// `phase_at(t) - other.phase_at(t)`, computed without forming the large
    /// absolute carrier phases.
    pub fn phase_difference(&self, other: &Oscillator, t: f64) -> f64 {
        let df = (self.nominal_hz - other.nominal_hz) + (self.offset_hz - other.offset_hz);
        let dd = self.drift_hz_per_s - other.drift_hz_per_s;
        (self.phase0 - other.phase0) + TAU * (df * t + 0.5 * dd * t * t)
    }
}

/// Analog front-end settings of one radio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontEndConfig {
    pub adc_bits: u32,
    pub adc_full_scale: f64,
    pub tx_power_db: f64,
    pub rx_gain_db: f64,
    pub lpf_cutoff_hz: f64,
}

impl Default for FrontEndConfig {
    fn default() -> Self {
        Self {
            adc_bits: 14,
            adc_full_scale: 1.0,
            tx_power_db: 0.0,
            rx_gain_db: 0.0,
            lpf_cutoff_hz: 6.25e6,
        }
    }
}

impl FrontEndConfig {
    pub const MIN_RX_GAIN_DB: f64 = 0.0;
    pub const MAX_RX_GAIN_DB: f64 = 60.0;

    pub fn validate(&self) -> Result<()> {
        if !(4..=16).contains(&self.adc_bits) {
            return Err(Error::param("adc_bits", format!("{} not in [4, 16]", self.adc_bits)));
        }
        if !(self.adc_full_scale > 0.0) {
            return Err(Error::param("adc_full_scale", "must be positive"));
        }
        if !(-40.0..=0.0).contains(&self.tx_power_db) {
            return Err(Error::param(
                "tx_power_db",
                format!("{} dB not in [-40, 0] dB of peak", self.tx_power_db),
            ));
        }
        if !(Self::MIN_RX_GAIN_DB..=Self::MAX_RX_GAIN_DB).contains(&self.rx_gain_db) {
            return Err(Error::param(
                "rx_gain_db",
                format!("{} dB not in [0, 60] dB", self.rx_gain_db),
            ));
        }
        if !(self.lpf_cutoff_hz > 0.0) {
            return Err(Error::param("lpf_cutoff_hz", "must be positive"));
        }
        Ok(())
    }
}

/// Linear-phase windowed-sinc low-pass filter (Hamming window, odd length).
///
/// Filtering is done in "same" mode: the known group delay of `(len - 1) / 2`
/// samples is removed, so output sample `n` lines up with input sample `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lowpass {
    taps: Vec<f64>,
}

impl Lowpass {
    pub const DEFAULT_TAPS: usize = 513;

    /// Unit DC gain filter with the given cutoff.
    pub fn design(cutoff_hz: f64, sample_rate: f64, num_taps: usize) -> Result<Self> {
        if num_taps < 65 || num_taps % 2 == 0 {
            return Err(Error::param("num_taps", format!("need an odd count >= 65, got {num_taps}")));
        }
        if !(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0) {
            return Err(Error::param(
                "cutoff_hz",
                format!("{cutoff_hz} Hz not inside (0, {}) Hz", sample_rate / 2.0),
            ));
        }
        let fc = cutoff_hz / sample_rate;
        let center = (num_taps - 1) as f64 / 2.0;
        let mut taps: Vec<f64> = (0..num_taps)
            .map(|i| {
                let n = i as f64 - center;
                let sinc = if n == 0.0 {
                    2.0 * fc
                } else {
                    (TAU * fc * n).sin() / (PI * n)
                };
                let w = 0.54 - 0.46 * (TAU * i as f64 / (num_taps - 1) as f64).cos();
                sinc * w
            })
            .collect();
        for i in 0..num_taps / 2 {
            taps[num_taps - 1 - i] = taps[i];
        }
        let dc: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= dc);
        Ok(Self { taps })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn group_delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Filter with `gain`, evaluating only every `step`-th output sample.
    pub fn filter_decimate(&self, x: &[Complex64], gain: f64, step: usize) -> Vec<Complex64> {
        let d = self.group_delay() as isize;
        let len = x.len() as isize;
        (0..x.len())
            .step_by(step.max(1))
            .map(|n| {
                let mut acc = Complex64::new(0.0, 0.0);
                let lo = (n as isize + d - len + 1).max(0) as usize;
                let hi = ((n as isize + d) as usize).min(self.taps.len() - 1);
                for k in lo..=hi {
                    acc += x[(n as isize + d - k as isize) as usize] * self.taps[k];
                }
                acc * gain
            })
            .collect()
    }

    pub fn filter(&self, x: &[Complex64], gain: f64) -> Vec<Complex64> {
        self.filter_decimate(x, gain, 1)
    }
}

/// Upconversion: `Re(x)cos(φ(t)) - Im(x)sin(φ(t))` at `oversample` times the
/// baseband rate. Baseband samples are interpolated by zero-stuffing followed
/// by the front end's low-pass filter (cutoff `lpf_cutoff_hz`).
pub fn upconvert(
    bb: &SampleBuffer,
    osc: &Oscillator,
    oversample: usize,
    lpf_cutoff_hz: f64,
) -> Result<PassbandBuffer> {
    let bb_rate = bb.sample_rate();
    let rate = bb_rate * oversample as f64;
    let top = osc.carrier_hz().abs() + bb_rate / 2.0;
    let min_oversample = 4 * (osc.carrier_hz().abs() / bb_rate).ceil() as usize;
    if top >= rate / 2.0 || oversample < min_oversample.max(2) {
        return Err(Error::Nyquist {
            carrier: osc.carrier_hz(),
            bandwidth: bb_rate,
            rate,
        });
    }
    let lpf = Lowpass::design(lpf_cutoff_hz, rate, Lowpass::DEFAULT_TAPS)?;
    let mut stuffed = vec![Complex64::new(0.0, 0.0); bb.len() * oversample];
    for (i, s) in bb.samples.iter().enumerate() {
        stuffed[i * oversample] = *s;
    }
    let interp = lpf.filter(&stuffed, oversample as f64);
    let samples = interp
        .iter()
        .enumerate()
        .map(|(m, x)| {
            let phi = osc.phase_at(m as f64 / rate);
            x.re * phi.cos() - x.im * phi.sin()
        })
        .collect();
    PassbandBuffer::new(samples, rate)
}

/// Downconversion: mix with the local carrier, low-pass with gain 2 and
/// decimate to `out_rate`.
///
/// The mixer uses `e^{-jφ(t)}` so that a transmitter and receiver sharing one
/// oscillator reproduce the input, and a receiver whose carrier sits `Δ` above
/// the transmitter's sees the input rotated by `e^{-j2πΔt}`.
pub fn downconvert(
    rf: &PassbandBuffer,
    osc: &Oscillator,
    out_rate: f64,
    lpf_cutoff_hz: f64,
) -> Result<SampleBuffer> {
    let ratio = rf.sample_rate() / out_rate;
    let step = ratio.round() as usize;
    if step == 0 || (ratio - step as f64).abs() > 1e-9 * ratio {
        return Err(Error::RateMismatch {
            a: rf.sample_rate(),
            b: out_rate,
        });
    }
    let rate = rf.sample_rate();
    let mixed: Vec<Complex64> = rf
        .samples
        .iter()
        .enumerate()
        .map(|(m, &v)| v * Complex64::from_polar(1.0, -osc.phase_at(m as f64 / rate)))
        .collect();
    let lpf = Lowpass::design(lpf_cutoff_hz, rate, Lowpass::DEFAULT_TAPS)?;
    SampleBuffer::new(lpf.filter_decimate(&mixed, 2.0, step), out_rate)
}

/// Equivalent-baseband carrier offset: sample `n` is rotated by
/// `2π·delta_hz·n/fs + phase0`.
pub fn apply_cfo(bb: &SampleBuffer, delta_hz: f64, phase0: f64) -> Result<SampleBuffer> {
    let fs = bb.sample_rate();
    if delta_hz.abs() >= fs / 2.0 {
        return Err(Error::param(
            "delta_hz",
            format!("|{delta_hz}| Hz must be below half the sample rate"),
        ));
    }
    let w = TAU * delta_hz / fs;
    Ok(bb.with_samples(
        bb.samples
            .iter()
            .enumerate()
            .map(|(n, s)| s * Complex64::from_polar(1.0, w * n as f64 + phase0))
            .collect(),
    ))
}

/// Equivalent baseband of `Tx(tx) -> Rx(rx)`: sample `n`, taken at absolute
/// time `t0 + n/fs`, is rotated by `φ_tx(t) - φ_rx(t)`. Includes drift.
pub fn carrier_mismatch(
    bb: &SampleBuffer,
    tx: &Oscillator,
    rx: &Oscillator,
    t0: f64,
) -> SampleBuffer {
    let fs = bb.sample_rate();
    bb.with_samples(
        bb.samples
            .iter()
            .enumerate()
            .map(|(n, s)| s * Complex64::from_polar(1.0, tx.phase_difference(rx, t0 + n as f64 / fs)))
            .collect(),
    )
}

/// Two's-complement ADC model: `2^bits` uniform levels with step
/// `full_scale / 2^(bits-1)`, zero included, clipping at the rails.
pub fn quantize(bb: &SampleBuffer, cfg: &FrontEndConfig) -> SampleBuffer {
    let q = Quantizer::new(cfg.adc_bits, cfg.adc_full_scale);
    bb.with_samples(bb.samples.iter().map(|s| q.apply(*s)).collect())
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Quantizer {
    step: f64,
    lo: f64,
    hi: f64,
}

impl Quantizer {
    pub(crate) fn new(bits: u32, full_scale: f64) -> Self {
        let half = (1u64 << (bits - 1)) as f64;
        Self {
            step: full_scale / half,
            lo: -half,
            hi: half - 1.0,
        }
    }

    fn rail(&self, v: f64) -> f64 {
        (v / self.step).round().clamp(self.lo, self.hi) * self.step
    }

    pub(crate) fn apply(&self, s: Complex64) -> Complex64 {
        Complex64::new(self.rail(s.re), self.rail(s.im))
    }
}

/// Amplitude scaling by `10^(gain_db/20)`.
pub fn scale_power(bb: &SampleBuffer, gain_db: f64) -> SampleBuffer {
    let g = db_to_amplitude(gain_db);
    bb.with_samples(bb.samples.iter().map(|s| s * g).collect())
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn power_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}
