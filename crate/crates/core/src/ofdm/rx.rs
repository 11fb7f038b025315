use std::f64::consts::TAU;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use num_complex::Complex64;

use super::{Phy, PhyParams};
use crate::alamouti::{combine, detect, ChannelPair, Modulation};
use crate::error::{Error, Result};
use crate::link::agc;
use crate::rf::{db_to_amplitude, FrontEndConfig, Quantizer};
use crate::signal::SampleBuffer;

/// Length of the RSSI averaging window.
pub const RSSI_WINDOW: usize = 16;
/// Leading samples used for the noise-floor estimate.
pub const FLOOR_WINDOW: usize = 64;

/// Outcome of LTS synchronization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    pub detected: bool,
    /// First sample of the frame (start of the STS).
    pub start_index: usize,
    pub cfo_estimate_hz: f64,
    pub rssi_window_power: f64,
    /// Normalized correlation at the two LTS peaks.
    pub peak_metric: (f64, f64),
    /// Per-sample noise variance from the mismatch between the two LTS
    /// repetitions.
    pub noise_power: f64,
}

impl SyncResult {
    fn missed(rssi: f64) -> Self {
        Self {
            detected: false,
            start_index: 0,
            cfo_estimate_hz: 0.0,
            rssi_window_power: rssi,
            peak_metric: (0.0, 0.0),
            noise_power: 0.0,
        }
    }
}

fn window_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// Mean power of the leading [`FLOOR_WINDOW`] samples (fewer if the buffer is
/// shorter). The receiver assumes it starts listening before a packet lands.
pub fn noise_floor(rx: &SampleBuffer) -> f64 {
    window_power(&rx.samples[..rx.len().min(FLOOR_WINDOW)])
}

/// RSSI trigger: the first index `n` at which the power of the 16 samples
/// ending at `n` exceeds `energy_threshold` times the noise floor.
pub fn detect_packet(rx: &SampleBuffer, energy_threshold: f64) -> Option<usize> {
    detect_packet_from(rx, energy_threshold, noise_floor(rx), 0)
}

/// [`detect_packet`] against a given floor, considering only windows that
/// start at or after `from`.
pub fn detect_packet_from(rx: &SampleBuffer, energy_threshold: f64, floor: f64, from: usize) -> Option<usize> {
    let x = &rx.samples;
    if x.len() < from + RSSI_WINDOW {
        return None;
    }
    let limit = energy_threshold * floor * RSSI_WINDOW as f64;
    let mut acc: f64 = x[from..from + RSSI_WINDOW].iter().map(|v| v.norm_sqr()).sum();
    let mut end = from + RSSI_WINDOW - 1;
    loop {
        if acc > limit && acc > 0.0 {
            return Some(end);
        }
        end += 1;
        if end >= x.len() {
            return None;
        }
        acc += x[end].norm_sqr() - x[end - RSSI_WINDOW].norm_sqr();
        // the running sum can drift slightly negative on silence
        acc = acc.max(0.0);
    }
}

/// Normalized correlation of `x[n..n+64]` against the LTS base.
fn lts_correlation(x: &[Complex64], n: usize, base: &[Complex64]) -> f64 {
    let seg = &x[n..n + PhyParams::N_FFT];
    let energy: f64 = seg.iter().map(|v| v.norm_sqr()).sum();
    if energy == 0.0 {
        return 0.0;
    }
    let dot: Complex64 = seg.iter().zip(base).map(|(r, l)| r * l.conj()).sum();
    dot.norm() / (energy * PhyParams::N_FFT as f64).sqrt()
}

/// Smallest path, relative to the strongest, that timing will follow. Above
/// the LTS correlation sidelobes: about 0.2 of the peak, 0.3 with half a
/// subcarrier of CFO.
const FIRST_PATH_FLOOR: f64 = 0.35;

/// How far before the strongest path an earlier one is looked for: the
/// cyclic prefix plus the default stream-B preamble advance, which puts that
/// stream's LTS ahead of its payload.
const FIRST_PATH_LOOKBACK: usize = PhyParams::CP_LEN + 4;

/// Search `[candidate, candidate + window)` for the first LTS repetition.
///
/// The metric is the sum of the normalized correlations at `n` and `n + 64`;
/// both must reach `threshold`. Among offsets up to `FIRST_PATH_LOOKBACK` before the
/// strongest, the earliest whose metric is at least 0.35 of the peak is chosen,
/// so timing follows the first arriving path.
pub fn sync_lts(rx: &SampleBuffer, candidate: usize, window: usize, threshold: f64) -> SyncResult {
    let x = &rx.samples;
    let n = PhyParams::N_FFT;
    let rssi = window_power(&x[candidate.min(x.len())..(candidate + RSSI_WINDOW).min(x.len())]);
    if x.len() < candidate + 2 * n {
        return SyncResult::missed(rssi);
    }
    let last = (candidate + window).min(x.len() - 2 * n + 1);
    if last <= candidate {
        return SyncResult::missed(rssi);
    }
    let base = Phy::shared().lts_base();
    let c: Vec<f64> = (candidate..last + n).map(|i| lts_correlation(x, i, base)).collect();
    let joint = |p: usize| c[p - candidate] + c[p - candidate + n];
    let mut best = candidate;
    for p in candidate..last {
        if joint(p) > joint(best) {
            best = p;
        }
    }
    let peaks = (c[best - candidate], c[best - candidate + n]);
    if peaks.0 < threshold || peaks.1 < threshold {
        return SyncResult::missed(rssi);
    }
    let floor = FIRST_PATH_FLOOR * joint(best);
    let earliest = (best.saturating_sub(FIRST_PATH_LOOKBACK).max(candidate)..best)
        .find(|&p| joint(p) >= floor)
        .unwrap_or(best);
    let Some(start) = earliest.checked_sub(PhyParams::lts_body_offset()) else {
        return SyncResult::missed(rssi);
    };

    let (first, second) = (&x[earliest..earliest + n], &x[earliest + n..earliest + 2 * n]);
    let lag: Complex64 = first.iter().zip(second).map(|(a, b)| a.conj() * b).sum();
    let psi = lag.arg();
    let rot = Complex64::from_polar(1.0, psi);
    let noise = first
        .iter()
        .zip(second)
        .map(|(a, b)| (b - a * rot).norm_sqr())
        .sum::<f64>()
        / (2 * n) as f64;
    SyncResult {
        detected: true,
        start_index: start,
        cfo_estimate_hz: psi * rx.sample_rate() / (TAU * n as f64),
        rssi_window_power: rssi,
        peak_metric: peaks,
        noise_power: noise,
    }
}

/// Remove the estimated CFO, with zero phase at the frame start.
pub fn correct_cfo(rx: &SampleBuffer, sync: &SyncResult) -> SampleBuffer {
    let w = -TAU * sync.cfo_estimate_hz / rx.sample_rate();
    let s = sync.start_index as f64;
    rx.with_samples(
        rx.samples
            .iter()
            .enumerate()
            .map(|(i, v)| v * Complex64::from_polar(1.0, w * (i as f64 - s)))
            .collect(),
    )
}

/// Per-bin channel estimates for both streams (indexed by FFT bin; unused
/// bins are zero).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimates {
    pub bins: Vec<ChannelPair>,
}

impl ChannelEstimates {
    pub fn at(&self, k: i32) -> ChannelPair {
        self.bins[PhyParams::bin(k)]
    }

    /// Mean `|hA|²` and `|hB|²` over the used bins.
    pub fn stream_energy(&self) -> (f64, f64) {
        let used = Phy::shared().used_subcarriers();
        let (mut a, mut b) = (0.0, 0.0);
        for &k in used {
            let h = self.at(k);
            a += h.h_a.norm_sqr();
            b += h.h_b.norm_sqr();
        }
        (a / used.len() as f64, b / used.len() as f64)
    }

    /// Re-fit each stream with as few delay taps as the noise allows, given
    /// the per-bin estimation noise. A delay is kept while its correlation
    /// with the remaining residual exceeds `ratio` times the noise. With
    /// `noise_per_bin = 0` the estimates are unchanged.
    ///
    /// Returns the kept delays with their tap power summed over both
    /// streams, in increasing delay.
    pub fn prune_taps(&mut self, noise_per_bin: f64, ratio: f64) -> Vec<(i32, f64)> {
        let basis = DelayBasis::shared();
        let used = Phy::shared().used_subcarriers();
        let column = |pick: fn(&ChannelPair) -> Complex64| {
            let y = DVector::from_iterator(used.len(), used.iter().map(|&k| pick(&self.at(k))));
            basis.sparse_fit(&y, noise_per_bin, ratio)
        };
        let (ha, taps_a) = column(|h| h.h_a);
        let (hb, taps_b) = column(|h| h.h_b);
        for (i, &k) in used.iter().enumerate() {
            self.bins[PhyParams::bin(k)] = ChannelPair::new(ha[i], hb[i]);
        }
        let mut power = vec![0.0; basis.delays.len()];
        for (d, g) in taps_a.into_iter().chain(taps_b) {
            power[d] += g.norm_sqr();
        }
        basis
            .delays
            .iter()
            .zip(power)
            .filter(|&(_, p)| p > 0.0)
            .map(|(&d, p)| (d, p))
            .collect()
    }

    /// Zero a stream whose estimate is indistinguishable from noise: mean
    /// energy below `ratio` times the per-bin noise. A silent training
    /// position then contributes nothing to combining instead of noise.
    /// The stronger stream is always kept, since a packet was detected.
    pub fn suppress_absent(&mut self, noise_per_bin: f64, ratio: f64) {
        let (ea, eb) = self.stream_energy();
        let zero = Complex64::new(0.0, 0.0);
        let limit = ratio * noise_per_bin;
        let drop_a = ea <= limit && ea < eb;
        let drop_b = eb <= limit && eb <= ea;
        for h in &mut self.bins {
            if drop_a {
                h.h_a = zero;
            }
            if drop_b {
                h.h_b = zero;
            }
        }
    }
}

/// Delays, in samples relative to the FFT window, that the estimator allows
/// the channel to occupy. Early timing (e.g. a lock on the advanced second
/// preamble) shows up as extra positive delay, hence the asymmetry.
const EST_DELAY_MIN: i32 = -2;
const EST_DELAY_MAX: i32 = PhyParams::CP_LEN as i32 + 4;

/// Taps below this fraction of the strongest do not hold the timing back.
const FIRST_TAP_FRACTION: f64 = 0.1;

/// Samples the frame start can move later so that the first significant tap
/// of `profile` sits at delay 0, capped at `max`. Zero if a significant tap
/// is already at or before delay 0.
pub fn timing_slip(profile: &[(i32, f64)], max: usize) -> usize {
    let strongest = profile.iter().map(|&(_, p)| p).fold(0.0, f64::max);
    profile
        .iter()
        .find(|&&(_, p)| p >= FIRST_TAP_FRACTION * strongest && p > 0.0)
        .map_or(0, |&(d, _)| usize::try_from(d).unwrap_or(0).min(max))
}

/// Delay-domain basis of the used subcarriers: `F[k, d] = e^{-j2πkd/64}`
/// for `d` in `EST_DELAY_MIN..=EST_DELAY_MAX`.
struct DelayBasis {
    delays: Vec<i32>,
    f: DMatrix<Complex64>,
    /// Orthogonal projection onto the span of `f`.
    proj: DMatrix<Complex64>,
    /// Tap coefficients of that projection.
    pinv: DMatrix<Complex64>,
}

impl DelayBasis {
    fn shared() -> &'static DelayBasis {
        static B: OnceLock<DelayBasis> = OnceLock::new();
        B.get_or_init(|| {
            let used = Phy::shared().used_subcarriers();
            let delays: Vec<i32> = (EST_DELAY_MIN..=EST_DELAY_MAX).collect();
            let n = PhyParams::N_FFT as f64;
            let f = DMatrix::from_fn(used.len(), delays.len(), |r, c| {
                Complex64::from_polar(1.0, -TAU * f64::from(used[r] * delays[c]) / n)
            });
            let gram_inv = (f.adjoint() * &f)
                .try_inverse()
                .expect("delay basis has full column rank");
            let pinv = gram_inv * f.adjoint();
            let proj = &f * &pinv;
            DelayBasis { delays, f, proj, pinv }
        })
    }

    /// Least-squares fit of `y` on the columns in `picked`: fitted values
    /// and tap coefficients.
    fn fit(&self, picked: &[usize], y: &DVector<Complex64>) -> (DVector<Complex64>, DVector<Complex64>) {
        let fs = self.f.select_columns(picked);
        let g = (fs.adjoint() * &fs)
            .cholesky()
            .expect("distinct delay columns are independent")
            .solve(&(fs.adjoint() * y));
        (fs * &g, g)
    }

    /// Greedy sparse fit: add the delay best matching the residual until
    /// its normalized correlation drops below `ratio` times the per-bin
    /// noise. With zero noise every delay is eventually taken and the result
    /// is the plain projection. Returns the fit and `(column, coefficient)`
    /// per kept delay.
    fn sparse_fit(
        &self,
        y: &DVector<Complex64>,
        noise_per_bin: f64,
        ratio: f64,
    ) -> (DVector<Complex64>, Vec<(usize, Complex64)>) {
        let rows = self.f.nrows() as f64;
        let mut picked: Vec<usize> = Vec::new();
        let mut fit = DVector::zeros(y.len());
        let mut coeffs = DVector::zeros(0);
        while picked.len() < self.f.ncols() {
            let resid = y - &fit;
            let (best, corr) = (0..self.f.ncols())
                .filter(|d| !picked.contains(d))
                .map(|d| (d, self.f.column(d).dotc(&resid).norm_sqr() / rows))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("an unpicked delay remains");
            if corr < ratio * noise_per_bin {
                break;
            }
            picked.push(best);
            (fit, coeffs) = self.fit(&picked, y);
        }
        if picked.len() == self.f.ncols() {
            let g = &self.pinv * y;
            return (&self.proj * y, g.iter().copied().enumerate().collect());
        }
        (fit, picked.into_iter().zip(coeffs.iter().copied()).collect())
    }
}

/// Channel estimates from the two training positions of a slot-2 frame
/// starting at `start`. The per-bin least-squares values `Y[k]/T[k]` are
/// projected onto channels whose delay spread fits the cyclic prefix, which
/// leaves such channels unchanged and removes most of the estimation noise.
pub fn estimate_channels(rx: &SampleBuffer, start: usize) -> Result<ChannelEstimates> {
    let phy = Phy::shared();
    let first = start + PhyParams::preamble_len(true);
    let needed = first + 2 * PhyParams::TRAINING_LEN;
    if rx.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: rx.len(),
        });
    }
    let t = phy.training_freq();
    let ls_at = |pos: usize| {
        let at = first + pos * PhyParams::TRAINING_LEN + PhyParams::CP_LEN;
        let mut y = phy.fft(&rx.samples[at..at + PhyParams::N_FFT]);
        for &k in phy.used_subcarriers() {
            let b = PhyParams::bin(k);
            y[b] /= t[b];
        }
        y
    };
    let used = phy.used_subcarriers();
    let basis = DelayBasis::shared();
    let project = |raw: Vec<Complex64>| {
        &basis.proj * DVector::from_iterator(used.len(), used.iter().map(|&k| raw[PhyParams::bin(k)]))
    };
    let (ha, hb) = (project(ls_at(0)), project(ls_at(1)));
    let zero = Complex64::new(0.0, 0.0);
    let mut bins = vec![ChannelPair::new(zero, zero); PhyParams::N_FFT];
    for (i, &k) in used.iter().enumerate() {
        bins[PhyParams::bin(k)] = ChannelPair::new(ha[i], hb[i]);
    }
    Ok(ChannelEstimates { bins })
}

/// Per-symbol quality figures from the payload.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// RMS error vector of the equalized data symbols, relative to unit
    /// constellation energy.
    pub evm: Vec<f64>,
    /// Common phase removed by pilot tracking, radians.
    pub residual_phase: Vec<f64>,
}

impl Diagnostics {
    pub fn mean_evm(&self) -> f64 {
        if self.evm.is_empty() {
            return 0.0;
        }
        (self.evm.iter().map(|e| e * e).sum::<f64>() / self.evm.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demodulated {
    pub bits: Vec<u8>,
    /// Bits that could not be decided (both channel estimates zero). They are
    /// emitted as 0 and should be counted as errors.
    pub erased: Vec<bool>,
    pub diagnostics: Diagnostics,
}

impl Demodulated {
    pub fn erased_bits(&self) -> usize {
        self.erased.iter().filter(|&&e| e).count()
    }

    /// Errors against `reference`, erasures included.
    pub fn bit_errors(&self, reference: &[u8]) -> usize {
        self.bits
            .iter()
            .zip(&self.erased)
            .zip(reference)
            .filter(|((b, e), r)| **e || b != r)
            .count()
    }
}

/// Payload demodulation: CFO correction, CP removal, FFT, pilot phase
/// tracking, Alamouti combining and hard decisions.
pub fn demodulate(
    rx: &SampleBuffer,
    sync: &SyncResult,
    h: &ChannelEstimates,
    modulation: Modulation,
    payload_symbols: usize,
) -> Result<Demodulated> {
    if !sync.detected {
        return Err(Error::NotSynchronized);
    }
    if payload_symbols % 2 != 0 {
        return Err(Error::param("payload_symbols", "must be even"));
    }
    let phy = Phy::shared();
    let first = sync.start_index + PhyParams::preamble_len(true) + 2 * PhyParams::TRAINING_LEN;
    let needed = first + payload_symbols * PhyParams::SYMBOL_LEN;
    if rx.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: rx.len(),
        });
    }
    let corrected = correct_cfo(rx, sync);
    let pilot_ref: Vec<(usize, ChannelPair)> = PhyParams::PILOT_CARRIERS
        .iter()
        .map(|&k| (PhyParams::bin(k), h.at(k)))
        .collect();

    let mut symbols = Vec::with_capacity(payload_symbols);
    let mut diagnostics = Diagnostics::default();
    for s in 0..payload_symbols {
        let at = first + s * PhyParams::SYMBOL_LEN + PhyParams::CP_LEN;
        let mut y = phy.fft(&corrected.samples[at..at + PhyParams::N_FFT]);
        let acc: Complex64 = pilot_ref
            .iter()
            .enumerate()
            .map(|(i, (bin, c))| y[*bin] * (c.h_a * phy.pilot(s, i) + c.h_b * phy.pilot_b(s, i)).conj())
            .sum();
        let theta = if acc.norm() > 0.0 { acc.arg() } else { 0.0 };
        let derot = Complex64::from_polar(1.0, -theta);
        y.iter_mut().for_each(|v| *v *= derot);
        diagnostics.residual_phase.push(theta);
        symbols.push(y);
    }

    let data = phy.data_subcarriers();
    let bps = modulation.bits_per_symbol();
    let mut bits = vec![0u8; payload_symbols * data.len() * bps];
    let mut erased = vec![false; bits.len()];
    let mut err2 = vec![0.0; payload_symbols];
    for m in 0..payload_symbols / 2 {
        for (d, &k) in data.iter().enumerate() {
            let bin = PhyParams::bin(k);
            let ch = h.bins[bin];
            let scale = ch.gain();
            let (x0, x1) = combine(symbols[2 * m][bin], symbols[2 * m + 1][bin], ch);
            for (t, x) in [(2 * m, x0), (2 * m + 1, x1)] {
                let at = (t * data.len() + d) * bps;
                match detect(x, scale, modulation) {
                    Some(label) => {
                        for j in 0..bps {
                            bits[at + j] = (label >> (bps - 1 - j)) & 1;
                        }
                        err2[t] += (x / scale - modulation.point(label)).norm_sqr();
                    }
                    None => {
                        erased[at..at + bps].iter_mut().for_each(|e| *e = true);
                        err2[t] += 1.0;
                    }
                }
            }
        }
    }
    diagnostics.evm = err2.iter().map(|e| (e / data.len() as f64).sqrt()).collect();
    Ok(Demodulated {
        bits,
        erased,
        diagnostics,
    })
}

/// Receiver tuning. Identical for every link configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverConfig {
    /// RSSI trigger level relative to the noise floor (linear).
    pub energy_threshold: f64,
    /// Minimum normalized LTS correlation at both peaks.
    pub corr_threshold: f64,
    /// Samples searched for the LTS after a trigger.
    pub sync_window: usize,
    /// Samples skipped after a failed sync before searching again.
    pub retry_step: usize,
    /// Channel taps weaker than this multiple of their noise variance are
    /// dropped.
    pub tap_threshold: f64,
    /// Stream presence test level, relative to per-bin noise.
    pub presence_ratio: f64,
    /// Largest move of the frame start toward the first channel tap. A lock
    /// on a preamble sent with a cyclic advance starts that many samples
    /// early.
    pub max_timing_slip: usize,
    /// ADC model; `None` bypasses AGC and quantization.
    pub front_end: Option<FrontEndConfig>,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            energy_threshold: 2.5,
            corr_threshold: 0.35,
            sync_window: 320,
            retry_step: 160,
            tap_threshold: 8.0,
            presence_ratio: 0.5,
            max_timing_slip: 4,
            front_end: Some(FrontEndConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    pub sync: SyncResult,
    pub agc_gain_db: f64,
    pub estimates: Option<ChannelEstimates>,
    pub payload: Option<Demodulated>,
}

/// The packet receiver. It knows nothing about who transmitted the frame.
#[derive(Debug, Clone, Default)]
pub struct Receiver {
    pub config: ReceiverConfig,
}

impl Receiver {
    pub fn new(config: ReceiverConfig) -> Self {
        Self { config }
    }

    /// Trigger, gain control, digitize, synchronize, estimate and demodulate
    /// the first packet in `rx` that passes LTS sync.
    pub fn receive(&self, rx: &SampleBuffer, modulation: Modulation, payload_symbols: usize) -> Result<Reception> {
        let cfg = &self.config;
        let floor = noise_floor(rx);
        let mut from = 0;
        let mut last = SyncResult::missed(0.0);
        let mut gain_db = 0.0;
        while let Some(hit) = detect_packet_from(rx, cfg.energy_threshold, floor, from) {
            let trigger = self.retrigger(rx, hit);
            let digital = match &cfg.front_end {
                Some(fe) => {
                    let end = (trigger + 2 * RSSI_WINDOW).min(rx.len());
                    gain_db = agc(&rx.samples[trigger..end], fe);
                    digitize(rx, gain_db, fe)
                }
                None => rx.clone(),
            };
            let search = trigger.saturating_sub(2 * RSSI_WINDOW);
            last = sync_lts(&digital, search, cfg.sync_window, cfg.corr_threshold);
            // A lock too late for the whole frame to fit is a false lock.
            let frame_len = PhyParams::preamble_len(true)
                + 2 * PhyParams::TRAINING_LEN
                + payload_symbols * PhyParams::SYMBOL_LEN;
            if last.detected && last.start_index + frame_len > rx.len() {
                last.detected = false;
            }
            if last.detected {
                let bin_noise = Phy::bin_noise(last.noise_power);
                let estimate = |sync: &SyncResult| -> Result<(ChannelEstimates, Vec<(i32, f64)>)> {
                    let mut h = estimate_channels(&correct_cfo(&digital, sync), sync.start_index)?;
                    let profile = h.prune_taps(bin_noise, cfg.tap_threshold);
                    Ok((h, profile))
                };
                let (mut h, mut profile) = estimate(&last)?;
                // An early window overruns the prefix on the latest taps, so
                // the first estimate may not show the whole slip.
                let mut budget = cfg.max_timing_slip;
                loop {
                    let slip = timing_slip(&profile, budget);
                    if slip == 0 || last.start_index + slip + frame_len > rx.len() {
                        break;
                    }
                    last.start_index += slip;
                    budget -= slip;
                    (h, profile) = estimate(&last)?;
                }
                h.suppress_absent(bin_noise, cfg.presence_ratio);
                let payload = demodulate(&digital, &last, &h, modulation, payload_symbols)?;
                return Ok(Reception {
                    sync: last,
                    agc_gain_db: gain_db,
                    estimates: Some(h),
                    payload: Some(payload),
                });
            }
            from = hit + cfg.retry_step;
        }
        Ok(Reception {
            sync: last,
            agc_gain_db: gain_db,
            estimates: None,
            payload: None,
        })
    }

    /// Move the trigger forward if the power jumps by more than 6 dB within
    /// the following STS duration, i.e. the first trigger was on noise.
    fn retrigger(&self, rx: &SampleBuffer, mut at: usize) -> usize {
        let x = &rx.samples;
        for _ in 0..4 {
            let end = (at + 2 * RSSI_WINDOW).min(x.len());
            let level = window_power(&x[at..end]);
            let stop = (at + PhyParams::STS_LEN).min(x.len());
            let jump = (end..stop.saturating_sub(RSSI_WINDOW))
                .step_by(RSSI_WINDOW / 2)
                .find(|&i| window_power(&x[i..i + RSSI_WINDOW]) > 4.0 * level);
            match jump {
                Some(i) => at = i,
                None => break,
            }
        }
        at
    }
}

fn digitize(rx: &SampleBuffer, gain_db: f64, fe: &FrontEndConfig) -> SampleBuffer {
    let g = db_to_amplitude(gain_db);
    let q = Quantizer::new(fe.adc_bits, fe.adc_full_scale);
    rx.with_samples(rx.samples.iter().map(|v| q.apply(v * g)).collect())
}
