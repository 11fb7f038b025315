//! Alamouti space-time block code over symbol pairs.
//!
//! Per subcarrier, two data symbols are sent over two symbol periods on two
//! streams:
//!
//! | stream | t0   | t1    |
//! |--------|------|-------|
//! | A      | x0   | -x1*  |
//! | B      | x1   | x0*   |
//!
//! The receiver combines `r0 = hA·x0 + hB·x1 + n0` and
//! `r1 = -hA·x1* + hB·x0* + n1` linearly to recover both symbols scaled by
//! `|hA|² + |hB|²`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

/// Unit average energy constellations with a fixed Gray labeling.
///
/// A label packs the symbol's bits MSB first: BPSK `b0`, QPSK `(b0 << 1) | b1`.
/// BPSK maps `b -> 1 - 2b`; QPSK maps `(b0, b1) -> ((1 - 2b0) + j(1 - 2b1))/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Bpsk,
    Qpsk,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
        }
    }

    pub fn labels(self) -> std::ops::Range<u8> {
        0..(1u8 << self.bits_per_symbol())
    }

    pub fn point(self, label: u8) -> Complex64 {
        let sign = |b: u8| 1.0 - 2.0 * f64::from(b & 1);
        match self {
            Modulation::Bpsk => Complex64::new(sign(label), 0.0),
            Modulation::Qpsk => Complex64::new(sign(label >> 1), sign(label)) * FRAC_1_SQRT_2,
        }
    }

    /// Label for the first `bits_per_symbol` entries of `bits`.
    pub fn label(self, bits: &[u8]) -> u8 {
        bits[..self.bits_per_symbol()]
            .iter()
            .fold(0u8, |acc, b| (acc << 1) | (b & 1))
    }

    pub fn push_bits(self, label: u8, out: &mut Vec<u8>) {
        for i in (0..self.bits_per_symbol()).rev() {
            out.push((label >> i) & 1);
        }
    }

    /// Nearest point. Ties on a decision boundary go to the rail whose bit is 0.
    pub fn slice(self, z: Complex64) -> u8 {
        let bit = |v: f64| u8::from(v < 0.0);
        match self {
            Modulation::Bpsk => bit(z.re),
            Modulation::Qpsk => (bit(z.re) << 1) | bit(z.im),
        }
    }
}

impl std::str::FromStr for Modulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Modulation::Bpsk),
            "qpsk" => Ok(Modulation::Qpsk),
            other => Err(format!("unknown modulation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolPair {
    pub x0: Complex64,
    pub x1: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPair {
    pub h_a: Complex64,
    pub h_b: Complex64,
}

impl ChannelPair {
    pub fn new(h_a: Complex64, h_b: Complex64) -> Self {
        Self { h_a, h_b }
    }

    /// `|hA|² + |hB|²`.
    pub fn gain(&self) -> f64 {
        self.h_a.norm_sqr() + self.h_b.norm_sqr()
    }

    /// Noiseless received pair for the given symbols.
    pub fn receive(&self, p: SymbolPair) -> (Complex64, Complex64) {
        let (a, b) = encode(p);
        (self.h_a * a[0] + self.h_b * b[0], self.h_a * a[1] + self.h_b * b[1])
    }
}

/// Stream A `[x0, -x1*]`, stream B `[x1, x0*]`.
pub fn encode(p: SymbolPair) -> ([Complex64; 2], [Complex64; 2]) {
    ([p.x0, -p.x1.conj()], [p.x1, p.x0.conj()])
}

/// `x̃0 = hA*·r0 + hB·r1*`, `x̃1 = hB*·r0 - hA·r1*`.
pub fn combine(r0: Complex64, r1: Complex64, h: ChannelPair) -> (Complex64, Complex64) {
    (
        h.h_a.conj() * r0 + h.h_b * r1.conj(),
        h.h_b.conj() * r0 - h.h_a * r1.conj(),
    )
}

/// Hard decision on a combined symbol. `None` is an erasure: both channels
/// are exactly zero so there is nothing to decide on.
pub fn detect(combined: Complex64, scale: f64, modulation: Modulation) -> Option<u8> {
    if !(scale > 0.0) {
        return None;
    }
    Some(modulation.slice(combined / scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::RngStream;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn encode_examples() {
        let (a, b) = encode(SymbolPair {
            x0: c(1.0, 0.0),
            x1: c(-1.0, 0.0),
        });
        assert_eq!(a, [c(1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(b, [c(-1.0, 0.0), c(1.0, 0.0)]);

        let (a, b) = encode(SymbolPair {
            x0: c(0.0, 0.0),
            x1: c(0.0, 0.0),
        });
        assert!(a.iter().chain(&b).all(|v| v.norm() == 0.0));

        let (a, b) = encode(SymbolPair {
            x0: c(0.0, 1.0),
            x1: c(1.0, 0.0),
        });
        assert_eq!(a, [c(0.0, 1.0), c(-1.0, 0.0)]);
        assert_eq!(b, [c(1.0, 0.0), c(0.0, -1.0)]);
    }

    #[test]
    fn single_antenna_degenerate_combining() {
        let p = SymbolPair {
            x0: c(0.3, -0.7),
            x1: c(-0.5, 0.2),
        };
        let h = ChannelPair::new(c(1.0, 0.0), c(0.0, 0.0));
        let (r0, r1) = h.receive(p);
        assert_eq!((r0, r1), (p.x0, -p.x1.conj()));
        assert_eq!(combine(r0, r1, h), (p.x0, p.x1));
    }

    #[test]
    fn combining_scales_by_total_channel_gain() {
        let mut rng = RngStream::new(1);
        for _ in 0..10_000 {
            let p = SymbolPair {
                x0: rng.complex_normal(1.0),
                x1: rng.complex_normal(1.0),
            };
            let h = ChannelPair::new(rng.complex_normal(1.0), rng.complex_normal(1.0));
            let (r0, r1) = h.receive(p);
            let (y0, y1) = combine(r0, r1, h);
            let g = h.gain();
            assert!((y0 - p.x0 * g).norm() <= 1e-12 * g * p.x0.norm().max(1.0));
            assert!((y1 - p.x1 * g).norm() <= 1e-12 * g * p.x1.norm().max(1.0));
        }
    }

    #[test]
    fn no_cross_talk_between_symbols() {
        // Feeding x1 alone must leave nothing in the x0 output, and vice versa.
        let mut rng = RngStream::new(2);
        for _ in 0..1000 {
            let h = ChannelPair::new(rng.complex_normal(1.0), rng.complex_normal(1.0));
            let x = rng.complex_normal(1.0);
            let zero = c(0.0, 0.0);
            let (r0, r1) = h.receive(SymbolPair { x0: zero, x1: x });
            assert!(combine(r0, r1, h).0.norm() < 1e-12);
            let (r0, r1) = h.receive(SymbolPair { x0: x, x1: zero });
            assert!(combine(r0, r1, h).1.norm() < 1e-12);
        }
    }

    #[test]
    fn detect_examples() {
        assert_eq!(detect(c(2.0, 0.0), 2.0, Modulation::Bpsk), Some(0));
        assert_eq!(detect(c(-0.1, 5.0), 1.0, Modulation::Bpsk), Some(1));
        assert_eq!(detect(c(0.0, 0.0), 1.0, Modulation::Bpsk), Some(0));
        assert_eq!(detect(c(0.0, 0.0), 1.0, Modulation::Qpsk), Some(0));
        assert_eq!(detect(c(1.0, 1.0), 0.0, Modulation::Qpsk), None);
    }

    #[test]
    fn gray_map_round_trip() {
        for m in [Modulation::Bpsk, Modulation::Qpsk] {
            for label in m.labels() {
                let mut bits = Vec::new();
                m.push_bits(label, &mut bits);
                assert_eq!(m.label(&bits), label);
                assert_eq!(detect(m.point(label) * 3.0, 3.0, m), Some(label));
                assert!((m.point(label).norm_sqr() - 1.0).abs() < 1e-15);
            }
        }
        let q = Modulation::Qpsk;
        assert_eq!(q.label(&[0, 1]), 1);
        assert_eq!(q.point(1), c(1.0, -1.0) * FRAC_1_SQRT_2);
        assert_eq!(q.point(2), c(-1.0, 1.0) * FRAC_1_SQRT_2);
    }

    #[test]
    fn swapping_streams_swaps_symbols() {
        // (r0, -r1) under swapped channels is the code carrying (x1, x0).
        let mut rng = RngStream::new(3);
        let m = Modulation::Qpsk;
        for _ in 0..500 {
            let (l0, l1) = (rng.range_inclusive(0, 3) as u8, rng.range_inclusive(0, 3) as u8);
            let h = ChannelPair::new(rng.complex_normal(1.0), rng.complex_normal(1.0));
            let (n0, n1) = (rng.complex_normal(0.05), rng.complex_normal(0.05));
            let p = SymbolPair { x0: m.point(l0), x1: m.point(l1) };
            let (r0, r1) = h.receive(p);
            let (y0, y1) = combine(r0 + n0, r1 + n1, h);

            let swapped_h = ChannelPair::new(h.h_b, h.h_a);
            let (s0, s1) = combine(r0 + n0, -(r1 + n1), swapped_h);
            let g = h.gain();
            assert_eq!(detect(y0, g, m), detect(s1, g, m));
            assert_eq!(detect(y1, g, m), detect(s0, g, m));
        }
    }
}
