//! Path loss, multipath taps, arrival offsets and superposition.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rf::db_to_amplitude;
use crate::signal::{awgn, RngStream, SampleBuffer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay: usize,
    pub coeff: Complex64,
}

impl Tap {
    pub fn new(delay: usize, coeff: Complex64) -> Self {
        Self { delay, coeff }
    }
}

/// One link between two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub path_gain_db: f64,
    taps: Vec<Tap>,
    pub noise_power: f64,
    pub arrival_offset: usize,
}

impl ChannelSpec {
    /// Taps are used as given. Fading draws from [`rayleigh_taps`] carry unit
    /// power on average; use [`ChannelSpec::normalized`] for fixed profiles.
    pub fn new(path_gain_db: f64, taps: Vec<Tap>, noise_power: f64, arrival_offset: usize) -> Result<Self> {
        if taps.is_empty() || taps.iter().any(|t| !t.coeff.re.is_finite() || !t.coeff.im.is_finite()) {
            return Err(Error::param("taps", "need at least one finite tap"));
        }
        if !(noise_power >= 0.0) || !noise_power.is_finite() {
            return Err(Error::param("noise_power", "must be finite and non-negative"));
        }
        Ok(Self {
            path_gain_db,
            taps,
            noise_power,
            arrival_offset,
        })
    }

    /// Like [`ChannelSpec::new`] but rescales the taps to unit total power so
    /// `path_gain_db` alone sets the received power.
    pub fn normalized(path_gain_db: f64, taps: Vec<Tap>, noise_power: f64, arrival_offset: usize) -> Result<Self> {
        let energy: f64 = taps.iter().map(|t| t.coeff.norm_sqr()).sum();
        if !(energy > 0.0) {
            return Err(Error::param("taps", "total tap power must be non-zero"));
        }
        let norm = energy.sqrt();
        let taps = taps.into_iter().map(|t| Tap::new(t.delay, t.coeff / norm)).collect();
        Self::new(path_gain_db, taps, noise_power, arrival_offset)
    }

    /// Noiseless single unit tap.
    pub fn identity() -> Self {
        Self::flat(0.0, Complex64::new(1.0, 0.0))
    }

    pub fn flat(path_gain_db: f64, coeff: Complex64) -> Self {
        Self::new(path_gain_db, vec![Tap::new(0, coeff)], 0.0, 0).expect("finite tap")
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn max_delay(&self) -> usize {
        self.taps.iter().map(|t| t.delay).max().unwrap_or(0)
    }

    /// Largest delay, arrival offset included.
    pub fn span(&self) -> usize {
        self.max_delay() + self.arrival_offset
    }

    /// Impulse response after path gain, arrival offset included.
    pub fn impulse_response(&self) -> Vec<Complex64> {
        let g = db_to_amplitude(self.path_gain_db);
        let mut h = vec![Complex64::new(0.0, 0.0); self.span() + 1];
        for t in &self.taps {
            h[t.delay + self.arrival_offset] += t.coeff * g;
        }
        h
    }
}

/// Delay, convolve, scale and add noise. The output grows by the channel span.
pub fn propagate(tx: &SampleBuffer, ch: &ChannelSpec, rng: &mut RngStream) -> Result<SampleBuffer> {
    let h = ch.impulse_response();
    let out = convolve(&tx.samples, &h);
    awgn(&tx.with_samples(out), ch.noise_power, rng)
}

pub(crate) fn convolve(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    if x.is_empty() {
        return vec![Complex64::new(0.0, 0.0); h.len().saturating_sub(1)];
    }
    let mut y = vec![Complex64::new(0.0, 0.0); x.len() + h.len() - 1];
    for (d, &c) in h.iter().enumerate() {
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (i, &v) in x.iter().enumerate() {
            y[i + d] += v * c;
        }
    }
    y
}

/// Element-wise sum, zero-padding the shorter buffer.
pub fn superpose(a: &SampleBuffer, b: &SampleBuffer) -> Result<SampleBuffer> {
    if a.sample_rate() != b.sample_rate() {
        return Err(Error::RateMismatch {
            a: a.sample_rate(),
            b: b.sample_rate(),
        });
    }
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut out = long.samples.clone();
    for (o, s) in out.iter_mut().zip(&short.samples) {
        *o += s;
    }
    Ok(a.with_samples(out))
}

/// I.i.d. complex Gaussian taps at delays `0..n_taps` with an exponential
/// power profile whose expected total power is 1.
pub fn rayleigh_taps(n_taps: usize, decay_db_per_tap: f64, rng: &mut RngStream) -> Result<Vec<Tap>> {
    if n_taps == 0 {
        return Err(Error::param("n_taps", "must be at least 1"));
    }
    let profile: Vec<f64> = (0..n_taps)
        .map(|i| 10f64.powf(-decay_db_per_tap * i as f64 / 10.0))
        .collect();
    let total: f64 = profile.iter().sum();
    Ok(profile
        .iter()
        .enumerate()
        .map(|(i, p)| Tap::new(i, rng.complex_normal(p / total)))
        .collect())
}
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    SourceDestination,
    SourceRelay,
    RelayDestination,
}

/// Node geometry for the log-distance path-loss model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Topology {
    pub d_sd: f64,
    pub d_sr: f64,
    pub d_rd: f64,
    pub path_loss_exponent: f64,
}

impl Topology {
    /// Relay half-way between source and destination.
    pub fn midway(d_sd: f64, path_loss_exponent: f64) -> Self {
        Self {
            d_sd,
            d_sr: d_sd / 2.0,
            d_rd: d_sd / 2.0,
            path_loss_exponent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_sd > 0.0 && self.d_sr > 0.0 && self.d_rd > 0.0) {
            return Err(Error::param("topology", "all distances must be positive"));
        }
        Ok(())
    }
}

/// Gain of `link` relative to the source-destination distance.
pub fn path_gain(topology: &Topology, link: Link) -> f64 {
    let d = match link {
        Link::SourceDestination => topology.d_sd,
        Link::SourceRelay => topology.d_sr,
        Link::RelayDestination => topology.d_rd,
    };
    -10.0 * topology.path_loss_exponent * (d / topology.d_sd).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::power;
    use proptest::prelude::*;

    const FS: f64 = 12.5e6;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn noise(n: usize, seed: u64) -> SampleBuffer {
        awgn(&SampleBuffer::zeros(n, FS).unwrap(), 1.0, &mut RngStream::new(seed)).unwrap()
    }

    /// Textbook O(N·M) convolution, independent of `convolve`.
    fn naive(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
        let n = x.len() + h.len() - 1;
        (0..n)
            .map(|k| {
                let mut acc = c(0.0, 0.0);
                for (j, hj) in h.iter().enumerate() {
                    if k >= j && k - j < x.len() {
                        acc += x[k - j] * hj;
                    }
                }
                acc
            })
            .collect()
    }

    #[test]
    fn identity_channel_is_exact() {
        let x = noise(100, 1);
        let y = propagate(&x, &ChannelSpec::identity(), &mut RngStream::new(0)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn unit_tap_at_delay_five_shifts() {
        let x = noise(50, 2);
        let ch = ChannelSpec::new(0.0, vec![Tap::new(5, c(1.0, 0.0))], 0.0, 0).unwrap();
        let y = propagate(&x, &ch, &mut RngStream::new(0)).unwrap();
        assert_eq!(y.len(), 55);
        assert!(y.samples[..5].iter().all(|s| *s == c(0.0, 0.0)));
        assert_eq!(&y.samples[5..], &x.samples[..]);
    }

    #[test]
    fn two_tap_channel_matches_naive_convolution() {
        let x = noise(200, 3);
        let taps = vec![Tap::new(0, c(0.8, -0.1)), Tap::new(3, c(-0.2, 0.5))];
        let ch = ChannelSpec::new(-4.0, taps, 0.0, 2).unwrap();
        let y = propagate(&x, &ch, &mut RngStream::new(0)).unwrap();
        let g = db_to_amplitude(-4.0);
        let mut h = vec![c(0.0, 0.0); 6];
        h[2] = c(0.8, -0.1) * g;
        h[5] = c(-0.2, 0.5) * g;
        let expect = naive(&x.samples, &h);
        assert_eq!(y.len(), 200 + 2 + 3);
        for (a, b) in y.samples.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn normalized_taps_have_unit_power() {
        let ch = ChannelSpec::normalized(0.0, vec![Tap::new(0, c(3.0, 0.0)), Tap::new(1, c(0.0, 4.0))], 0.0, 0)
            .unwrap();
        let e: f64 = ch.taps().iter().map(|t| t.coeff.norm_sqr()).sum();
        assert!((e - 1.0).abs() < 1e-12);
        assert!(ChannelSpec::normalized(0.0, vec![Tap::new(0, c(0.0, 0.0))], 0.0, 0).is_err());
        assert!(ChannelSpec::new(0.0, vec![], 0.0, 0).is_err());
    }

    #[test]
    fn superpose_examples() {
        let x = noise(64, 4);
        let z = SampleBuffer::zeros(10, FS).unwrap();
        assert_eq!(superpose(&x, &z).unwrap(), x);
        let neg = x.with_samples(x.samples.iter().map(|s| -s).collect());
        assert!(superpose(&x, &neg).unwrap().samples.iter().all(|s| s.norm() == 0.0));
        let other = SampleBuffer::zeros(4, 1e6).unwrap();
        assert!(matches!(superpose(&x, &other), Err(Error::RateMismatch { .. })));
    }

    #[test]
    fn superposed_independent_noise_doubles_power() {
        let p = power(&superpose(&noise(1_000_000, 5), &noise(1_000_000, 6)).unwrap()).unwrap();
        assert!((p - 2.0).abs() < 0.04, "power {p}");
    }

    #[test]
    fn single_rayleigh_tap_has_unit_mean_power() {
        let mut rng = RngStream::new(11);
        let n = 100_000;
        let mut sum = 0.0;
        let mut below_median = 0;
        for _ in 0..n {
            let t = rayleigh_taps(1, 3.0, &mut rng).unwrap();
            let p = t[0].coeff.norm_sqr();
            sum += p;
            if p < std::f64::consts::LN_2 {
                below_median += 1;
            }
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        // exponential power: median ln 2
        assert!((below_median as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn flat_profile_gives_equal_tap_power() {
        let mut rng = RngStream::new(12);
        let mut acc = [0.0; 3];
        for _ in 0..50_000 {
            for (a, t) in acc.iter_mut().zip(rayleigh_taps(3, 0.0, &mut rng).unwrap()) {
                *a += t.coeff.norm_sqr();
            }
        }
        for a in acc {
            assert!((a / 50_000.0 - 1.0 / 3.0).abs() < 0.01);
        }
        assert!(rayleigh_taps(0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn rayleigh_taps_are_seeded() {
        let a = rayleigh_taps(2, 3.0, &mut RngStream::new(8)).unwrap();
        let b = rayleigh_taps(2, 3.0, &mut RngStream::new(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn path_gain_examples() {
        let t2 = Topology::midway(10.0, 2.0);
        assert_eq!(path_gain(&t2, Link::SourceDestination), 0.0);
        assert!((path_gain(&t2, Link::SourceRelay) - 6.0206).abs() < 1e-3);
        let t3 = Topology::midway(10.0, 3.0);
        assert!((path_gain(&t3, Link::RelayDestination) - 9.0309).abs() < 1e-3);
        assert!(Topology { d_sr: 0.0, ..t3 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn superpose_commutes_and_associates(
            a in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 0..20),
            b in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 0..20),
            d in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 0..20),
        ) {
            let mk = |v: &Vec<(f64, f64)>| SampleBuffer::new(v.iter().map(|&(x, y)| c(x, y)).collect(), FS).unwrap();
            let (a, b, d) = (mk(&a), mk(&b), mk(&d));
            prop_assert_eq!(superpose(&a, &b).unwrap(), superpose(&b, &a).unwrap());
            let l = superpose(&superpose(&a, &b).unwrap(), &d).unwrap();
            let r = superpose(&a, &superpose(&b, &d).unwrap()).unwrap();
            for (x, y) in l.samples.iter().zip(&r.samples) {
                prop_assert!((x - y).norm() < 1e-12);
            }
        }
    }
}
