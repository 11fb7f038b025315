//! Sample containers, deterministic randomness and basic measurements.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Complex baseband samples tagged with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    pub samples: Vec<Complex64>,
    sample_rate: f64,
}

impl SampleBuffer {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        check_rate(sample_rate)?;
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); len], sample_rate)
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same rate, different samples.
    pub fn with_samples(&self, samples: Vec<Complex64>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}

/// Real-valued passband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PassbandBuffer {
    pub samples: Vec<f64>,
    sample_rate: f64,
}

impl PassbandBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        check_rate(sample_rate)?;
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn check_rate(sample_rate: f64) -> Result<()> {
    if sample_rate.is_finite() && sample_rate > 0.0 {
        Ok(())
    } else {
        Err(Error::param("sample_rate", format!("must be positive, got {sample_rate}")))
    }
}

/// Seeded ChaCha stream that can be split into independent child streams.
///
/// Children are keyed by `(seed, index)` only, so the stream handed to packet
/// `i` does not depend on how many values the parent has already produced.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn split(&self, index: u64) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019))))
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Circularly-symmetric complex Gaussian with `E|z|^2 = variance`.
    pub fn complex_normal(&mut self, variance: f64) -> Complex64 {
        let s = (variance / 2.0).sqrt();
        Complex64::new(s * self.standard_normal(), s * self.standard_normal())
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.random_range(lo..=hi)
    }

    pub fn bits(&mut self, n: usize) -> Vec<u8> {
        (0..n).map(|_| (self.rng.next_u32() & 1) as u8).collect()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mean-square amplitude.
pub fn power(buf: &SampleBuffer) -> Result<f64> {
    mean_power(&buf.samples)
}

pub(crate) fn mean_power(samples: &[Complex64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    Ok(samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64)
}

/// Least-squares slope (radians/sample) of the unwrapped phase.
///
/// Multiply by `sample_rate / 2π` to get a frequency offset in Hz.
pub fn phase_slope(buf: &SampleBuffer) -> Result<f64> {
    let s = &buf.samples;
    if s.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: s.len(),
        });
    }
    if let Some(index) = s.iter().position(|z| z.norm_sqr() == 0.0) {
        return Err(Error::ZeroMagnitude { index });
    }
    let phase = unwrap(s.iter().map(|z| z.arg()));
    Ok(linear_fit_slope(&phase))
}

/// Unwrap a phase sequence by removing jumps larger than π.
pub fn unwrap(phases: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for p in phases {
        if let Some(q) = prev {
            let d = p - q;
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        prev = Some(p);
        out.push(p + offset);
    }
    out
}

/// Slope of the least-squares line through `(n, y[n])`.
pub fn linear_fit_slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxy += dx * (v - mean_y);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Adds circularly-symmetric complex Gaussian noise of the given variance.
pub fn awgn(buf: &SampleBuffer, noise_power: f64, rng: &mut RngStream) -> Result<SampleBuffer> {
    if !(noise_power >= 0.0) || !noise_power.is_finite() {
        return Err(Error::param(
            "noise_power",
            format!("must be finite and non-negative, got {noise_power}"),
        ));
    }
    if noise_power == 0.0 {
        return Ok(buf.clone());
    }
    let samples = buf
        .samples
        .iter()
        .map(|s| s + rng.complex_normal(noise_power))
        .collect();
    Ok(buf.with_samples(samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};
    use rand::RngCore;

    const FS: f64 = 12.5e6;

    fn buf(v: Vec<Complex64>) -> SampleBuffer {
        SampleBuffer::new(v, FS).unwrap()
    }

    fn tone(freq_per_sample: f64, n: usize, phase: f64) -> SampleBuffer {
        buf((0..n)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * freq_per_sample * k as f64 + phase))
            .collect())
    }

    #[test]
    fn power_examples() {
        assert_eq!(power(&SampleBuffer::zeros(16, FS).unwrap()).unwrap(), 0.0);
        assert_eq!(power(&buf(vec![Complex64::new(1.0, 0.0); 8])).unwrap(), 1.0);
        assert_eq!(power(&buf(vec![Complex64::new(3.0, 4.0)])).unwrap(), 25.0);
        assert_eq!(power(&buf(vec![])), Err(Error::EmptyBuffer));
    }

    #[test]
    fn rejects_bad_rate() {
        assert!(SampleBuffer::new(vec![], 0.0).is_err());
        assert!(PassbandBuffer::new(vec![], -1.0).is_err());
    }

    #[test]
    fn phase_slope_examples() {
        assert_eq!(phase_slope(&buf(vec![Complex64::new(1.0, 0.0); 10])).unwrap(), 0.0);
        let s = phase_slope(&tone(0.01, 100, 0.0)).unwrap();
        assert!((s - 2.0 * PI * 0.01).abs() < 1e-9);
        let mut z = tone(0.01, 10, 0.0);
        z.samples[3] = Complex64::new(0.0, 0.0);
        assert_eq!(phase_slope(&z), Err(Error::ZeroMagnitude { index: 3 }));
        assert!(phase_slope(&buf(vec![Complex64::new(1.0, 0.0)])).is_err());
    }

    #[test]
    fn phase_slope_unwraps_fast_ramps() {
        // 0.4 cycles/sample wraps almost every sample
        let s = phase_slope(&tone(0.4, 500, 1.0)).unwrap();
        assert!((s - 2.0 * PI * 0.4).abs() < 1e-9);
        let s = phase_slope(&tone(-0.3, 500, -2.0)).unwrap();
        assert!((s + 2.0 * PI * 0.3).abs() < 1e-9);
    }

    #[test]
    fn awgn_zero_noise_is_identity() {
        let x = tone(0.1, 64, 0.0);
        let mut rng = RngStream::new(1);
        assert_eq!(awgn(&x, 0.0, &mut rng).unwrap(), x);
        assert!(awgn(&x, -1.0, &mut rng).is_err());
    }

    #[test]
    fn awgn_variance_matches_over_a_million_samples() {
        let x = SampleBuffer::zeros(1_000_000, FS).unwrap();
        let y = awgn(&x, 1.0, &mut RngStream::new(7)).unwrap();
        let p = power(&y).unwrap();
        assert!((p - 1.0).abs() < 0.01, "measured {p}");
    }

    #[test]
    fn awgn_powers_add() {
        let x = SampleBuffer::zeros(1_000_000, FS).unwrap();
        let mut rng = RngStream::new(3);
        let y = awgn(&awgn(&x, 0.5, &mut rng).unwrap(), 1.5, &mut rng).unwrap();
        let p = power(&y).unwrap();
        assert!((p - 2.0).abs() < 0.02 * 2.0, "measured {p}");
    }

    #[test]
    fn same_seed_same_noise() {
        let x = SampleBuffer::zeros(256, FS).unwrap();
        let a = awgn(&x, 1.0, &mut RngStream::new(42)).unwrap();
        let b = awgn(&x, 1.0, &mut RngStream::new(42)).unwrap();
        assert_eq!(a, b);
        let c = awgn(&x, 1.0, &mut RngStream::new(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_streams_are_stable_and_distinct() {
        let root = RngStream::new(9);
        let mut used = root.clone();
        for _ in 0..10 {
            used.standard_normal();
        }
        let mut a = root.split(3);
        let mut b = used.split(3);
        assert_eq!(a.next_u64(), b.next_u64());
        let mut c = root.split(4);
        assert_ne!(root.split(3).next_u64(), c.next_u64());
    }

    proptest! {
        #[test]
        fn power_invariant_under_unit_rotation(
            theta in -PI..PI,
            v in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..64),
        ) {
            let x = buf(v.iter().map(|&(a, b)| Complex64::new(a, b)).collect());
            let r = Complex64::from_polar(1.0, theta);
            let y = x.with_samples(x.samples.iter().map(|s| s * r).collect());
            let (px, py) = (power(&x).unwrap(), power(&y).unwrap());
            prop_assert!((px - py).abs() <= 1e-12 * px.max(1.0));
        }

        #[test]
        fn phase_slope_ignores_constant_rotation(
            theta in -PI..PI,
            f in -0.2f64..0.2,
            n in 2usize..200,
        ) {
            let x = tone(f, n, 0.0);
            let y = tone(f, n, theta);
            let (a, b) = (phase_slope(&x).unwrap(), phase_slope(&y).unwrap());
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
