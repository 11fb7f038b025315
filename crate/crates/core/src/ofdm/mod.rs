//! Alamouti-OFDM physical layer.
//!
//! 64-point FFT at 12.5 Msps with a 16-sample cyclic prefix. 52 subcarriers
//! are used (±1..=±26): 48 carry data and 4 (±7, ±21) carry pilots. Preambles
//! follow 802.11a: ten repetitions of a 16-sample short training sequence
//! (STS), then a 32-sample cyclic prefix and two repetitions of a 64-sample
//! long training sequence (LTS). Channel training symbols reuse the LTS
//! frequency-domain values on all 52 used bins, with a 16-sample prefix.
//!
//! Slot-2 frame layout, in samples:
//!
//! ```text
//! | STS 160 | LTS 160 | training A 80 | training B 80 | payload 80·N |
//! ```
//!
//! Stream A puts its training symbol in the first position and leaves the
//! second silent; stream B does the opposite, so the two estimates never
//! overlap. A slot-1 frame has the same layout without the LTS.

mod rx;
pub(crate) mod tx;

use std::f64::consts::TAU;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub use rx::{
    correct_cfo, demodulate, detect_packet, detect_packet_from, estimate_channels, noise_floor, sync_lts, timing_slip,
    ChannelEstimates, Demodulated, Diagnostics, Reception, Receiver, ReceiverConfig, SyncResult,
};
pub use tx::{build_preamble, modulate, FrameRole, FrameSpec};

/// Fixed numerology of the PHY.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhyParams;

impl PhyParams {
    pub const N_FFT: usize = 64;
    pub const CP_LEN: usize = 16;
    pub const SYMBOL_LEN: usize = Self::N_FFT + Self::CP_LEN;
    pub const N_DATA: usize = 48;
    pub const N_USED: usize = 52;
    pub const PILOT_CARRIERS: [i32; 4] = [-21, -7, 7, 21];
    pub const PILOT_BASE: [f64; 4] = [1.0, 1.0, 1.0, -1.0];
    /// Stream B's pilots are stream A's times this cover, which is
    /// orthogonal to the all-ones cover so the pilot energy seen by phase
    /// tracking does not depend on how the two channels add up.
    pub const PILOT_COVER_B: [f64; 4] = [1.0, -1.0, 1.0, -1.0];
    pub const SAMPLE_RATE: f64 = 12.5e6;
    pub const STS_PERIOD: usize = 16;
    pub const STS_REPS: usize = 10;
    pub const STS_LEN: usize = Self::STS_PERIOD * Self::STS_REPS;
    pub const LTS_CP: usize = 32;
    pub const LTS_LEN: usize = Self::LTS_CP + 2 * Self::N_FFT;
    pub const TRAINING_LEN: usize = Self::SYMBOL_LEN;

    pub fn subcarrier_spacing() -> f64 {
        Self::SAMPLE_RATE / Self::N_FFT as f64
    }

    pub fn cp_duration() -> f64 {
        Self::CP_LEN as f64 / Self::SAMPLE_RATE
    }

    pub fn symbol_duration() -> f64 {
        Self::SYMBOL_LEN as f64 / Self::SAMPLE_RATE
    }

    /// Uncoded bit rate in bit/s.
    pub fn raw_bit_rate(bits_per_symbol: usize) -> f64 {
        (Self::N_DATA * bits_per_symbol) as f64 / Self::symbol_duration()
    }

    /// FFT bin of a signed subcarrier index.
    pub fn bin(k: i32) -> usize {
        k.rem_euclid(Self::N_FFT as i32) as usize
    }

    /// Preamble length with or without the LTS.
    pub fn preamble_len(include_lts: bool) -> usize {
        Self::STS_LEN + if include_lts { Self::LTS_LEN } else { 0 }
    }

    /// Offset of a slot-2 frame's first LTS repetition body from frame start.
    pub fn lts_body_offset() -> usize {
        Self::STS_LEN + Self::LTS_CP
    }
}

/// 802.11a short training values on subcarriers -26..=26, before the
/// sqrt(13/6) scaling.
const STS_FREQ: [(i32, f64, f64); 12] = [
    (-24, 1.0, 1.0),
    (-20, -1.0, -1.0),
    (-16, 1.0, 1.0),
    (-12, -1.0, -1.0),
    (-8, -1.0, -1.0),
    (-4, 1.0, 1.0),
    (4, -1.0, -1.0),
    (8, -1.0, -1.0),
    (12, 1.0, 1.0),
    (16, 1.0, 1.0),
    (20, 1.0, 1.0),
    (24, 1.0, 1.0),
];

/// 802.11a long training values on subcarriers -26..=26 (DC is 0).
const LTS_FREQ: [i8; 53] = [
    1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 0, 1, -1, -1, 1,
    1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1,
];

/// Shared transforms and reference sequences.
pub struct Phy {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Used subcarriers in ascending signed order.
    used: Vec<i32>,
    /// Data subcarriers in ascending signed order.
    data: Vec<i32>,
    sts_freq: Vec<Complex64>,
    lts_freq: Vec<Complex64>,
    lts_time: Vec<Complex64>,
    pilot_polarity: Vec<f64>,
}

impl std::fmt::Debug for Phy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Phy").finish_non_exhaustive()
    }
}

impl Phy {
    fn new() -> Self {
        let mut planner = FftPlanner::new();
        let n = PhyParams::N_FFT;
        let used: Vec<i32> = (-26..=26).filter(|&k| k != 0).collect();
        let data: Vec<i32> = used
            .iter()
            .copied()
            .filter(|k| !PhyParams::PILOT_CARRIERS.contains(k))
            .collect();
        let mut sts_freq = vec![Complex64::new(0.0, 0.0); n];
        let s = (13.0f64 / 6.0).sqrt();
        for &(k, re, im) in &STS_FREQ {
            sts_freq[PhyParams::bin(k)] = Complex64::new(re, im) * s;
        }
        let mut lts_freq = vec![Complex64::new(0.0, 0.0); n];
        for (i, &v) in LTS_FREQ.iter().enumerate() {
            lts_freq[PhyParams::bin(i as i32 - 26)] = Complex64::new(f64::from(v), 0.0);
        }
        let mut phy = Self {
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            used,
            data,
            sts_freq,
            lts_freq,
            lts_time: Vec::new(),
            pilot_polarity: pilot_polarity(),
        };
        phy.lts_time = phy.ifft(&phy.lts_freq);
        phy
    }

    /// Process-wide instance; the tables are immutable.
    pub fn shared() -> &'static Phy {
        static PHY: OnceLock<Phy> = OnceLock::new();
        PHY.get_or_init(Phy::new)
    }

    pub fn used_subcarriers(&self) -> &[i32] {
        &self.used
    }

    pub fn data_subcarriers(&self) -> &[i32] {
        &self.data
    }

    /// Known training value on every used bin (indexed by FFT bin).
    pub fn training_freq(&self) -> &[Complex64] {
        &self.lts_freq
    }

    pub fn sts_freq(&self) -> &[Complex64] {
        &self.sts_freq
    }

    /// One period of the 64-sample long training sequence.
    pub fn lts_base(&self) -> &[Complex64] {
        &self.lts_time
    }

    /// Pilot value for payload symbol `symbol` on pilot `i`.
    pub fn pilot(&self, symbol: usize, i: usize) -> f64 {
        PhyParams::PILOT_BASE[i] * self.pilot_polarity[symbol % self.pilot_polarity.len()]
    }

    /// Stream B pilot for payload symbol `symbol` on pilot `i`.
    pub fn pilot_b(&self, symbol: usize, i: usize) -> f64 {
        self.pilot(symbol, i) * PhyParams::PILOT_COVER_B[i]
    }

    /// Frequency -> time, scaled so that unit-energy values on all 52 used
    /// bins give unit average sample power.
    pub fn ifft(&self, freq: &[Complex64]) -> Vec<Complex64> {
        let mut buf = freq.to_vec();
        self.inv.process(&mut buf);
        let s = 1.0 / (PhyParams::N_USED as f64).sqrt();
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }

    /// Time -> frequency, the exact inverse of [`Phy::ifft`].
    pub fn fft(&self, time: &[Complex64]) -> Vec<Complex64> {
        let mut buf = time.to_vec();
        self.fwd.process(&mut buf);
        let s = (PhyParams::N_USED as f64).sqrt() / PhyParams::N_FFT as f64;
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }

    /// Noise variance per bin after [`Phy::fft`] for white noise of
    /// `time_variance` per sample.
    pub fn bin_noise(time_variance: f64) -> f64 {
        time_variance * PhyParams::N_USED as f64 / PhyParams::N_FFT as f64
    }

    /// Time-domain symbol with cyclic prefix of length `cp`, optionally
    /// cyclically advanced by `shift` samples (shift applied as a phase ramp).
    pub(crate) fn symbol(&self, freq: &[Complex64], cp: usize, shift: usize) -> Vec<Complex64> {
        let time = if shift == 0 {
            self.ifft(freq)
        } else {
            let n = PhyParams::N_FFT as f64;
            let ramped: Vec<Complex64> = freq
                .iter()
                .enumerate()
                .map(|(b, v)| v * Complex64::from_polar(1.0, TAU * b as f64 * shift as f64 / n))
                .collect();
            self.ifft(&ramped)
        };
        let n = time.len();
        let mut out = Vec::with_capacity(n + cp);
        out.extend_from_slice(&time[n - cp..]);
        out.extend_from_slice(&time);
        out
    }
}

/// Length-127 pilot polarity from the `x^7 + x^4 + 1` scrambler seeded with
/// all ones; bit 0 maps to +1.
fn pilot_polarity() -> Vec<f64> {
    let mut state: u8 = 0x7f;
    (0..127)
        .map(|_| {
            let b = ((state >> 6) ^ (state >> 3)) & 1;
            state = ((state << 1) | b) & 0x7f;
            if b == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerology() {
        assert!((PhyParams::cp_duration() - 1.28e-6).abs() < 1e-15);
        assert!((PhyParams::symbol_duration() - 6.4e-6).abs() < 1e-15);
        assert!((PhyParams::raw_bit_rate(1) - 7.5e6).abs() < 1e-6);
        assert!((PhyParams::raw_bit_rate(2) - 15e6).abs() < 1e-6);
        assert!((PhyParams::subcarrier_spacing() - 195_312.5).abs() < 1e-9);
        let phy = Phy::shared();
        assert_eq!(phy.used_subcarriers().len(), PhyParams::N_USED);
        assert_eq!(phy.data_subcarriers().len(), PhyParams::N_DATA);
    }

    #[test]
    fn fft_inverts_ifft() {
        let phy = Phy::shared();
        let x = phy.ifft(phy.training_freq());
        let back = phy.fft(&x);
        for (a, b) in back.iter().zip(phy.training_freq()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn sequences_have_unit_power() {
        let phy = Phy::shared();
        let p = |v: &[Complex64]| v.iter().map(|s| s.norm_sqr()).sum::<f64>() / v.len() as f64;
        assert!((p(phy.lts_base()) - 1.0).abs() < 1e-12);
        assert!((p(&phy.ifft(phy.sts_freq())) - 1.0).abs() < 1e-12);
        assert_eq!(phy.sts_freq()[0], Complex64::new(0.0, 0.0));
        assert_eq!(phy.training_freq()[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn pilot_polarity_is_maximal_length() {
        let p = pilot_polarity();
        assert_eq!(p.len(), 127);
        // m-sequence balance: 64 ones (-1) and 63 zeros (+1)
        assert_eq!(p.iter().filter(|&&v| v < 0.0).count(), 64);
        assert_eq!(&p[..4], &[1.0, 1.0, 1.0, 1.0]);
    }
}
