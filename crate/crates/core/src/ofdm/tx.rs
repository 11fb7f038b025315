use num_complex::Complex64;

use super::{Phy, PhyParams};
use crate::alamouti::{encode, Modulation, SymbolPair};
use crate::error::{Error, Result};
use crate::signal::SampleBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameRole {
    /// Source broadcast in the first slot; carries no LTS, so only a
    /// scheduled receiver (the relay) picks it up.
    SourceSlot1,
    /// Source transmission in the second slot, also used for direct links.
    SourceSlot2,
    /// Relay replay in the second slot.
    RelaySlot2,
}

/// Layout of one transmitted frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameSpec {
    pub role: FrameRole,
    pub include_lts: bool,
    pub payload_symbols: usize,
    /// Cyclic shift (samples) applied to stream B's preamble. Nonzero only
    /// when both streams leave one node, so the identical preambles do not
    /// add up coherently into a flat fade.
    pub stream_b_preamble_shift: usize,
}

impl FrameSpec {
    pub fn new(role: FrameRole, payload_symbols: usize) -> Self {
        Self {
            role,
            include_lts: role != FrameRole::SourceSlot1,
            payload_symbols,
            stream_b_preamble_shift: 0,
        }
    }

    pub fn with_preamble_shift(mut self, shift: usize) -> Self {
        self.stream_b_preamble_shift = shift;
        self
    }

    /// Training position (0 or 1) that carries stream `b`'s training symbol
    /// (`false` = stream A). The other position is silent on that stream.
    pub fn training_position(stream_b: bool) -> usize {
        usize::from(stream_b)
    }

    pub fn preamble_len(&self) -> usize {
        PhyParams::preamble_len(self.include_lts)
    }

    pub fn training_offset(&self, position: usize) -> usize {
        self.preamble_len() + position * PhyParams::TRAINING_LEN
    }

    pub fn payload_offset(&self) -> usize {
        self.training_offset(2)
    }

    pub fn frame_len(&self) -> usize {
        self.payload_offset() + self.payload_symbols * PhyParams::SYMBOL_LEN
    }

    pub fn payload_bits(&self, modulation: Modulation) -> usize {
        self.payload_symbols * PhyParams::N_DATA * modulation.bits_per_symbol()
    }

    pub fn validate(&self) -> Result<()> {
        if self.payload_symbols == 0 || self.payload_symbols % 2 != 0 {
            return Err(Error::param(
                "payload_symbols",
                format!("{} must be positive and even", self.payload_symbols),
            ));
        }
        if self.stream_b_preamble_shift >= PhyParams::STS_PERIOD {
            return Err(Error::param("stream_b_preamble_shift", "must be below 16"));
        }
        if self.role == FrameRole::SourceSlot1 && self.include_lts {
            return Err(Error::param("include_lts", "slot-1 frames carry no LTS"));
        }
        Ok(())
    }
}

/// STS followed, when `spec.include_lts`, by the LTS. Stream A's version.
pub fn build_preamble(spec: &FrameSpec) -> SampleBuffer {
    let s = preamble(Phy::shared(), spec.include_lts, 0);
    SampleBuffer::new(s, PhyParams::SAMPLE_RATE).expect("constant rate is valid")
}

pub(crate) fn preamble(phy: &Phy, include_lts: bool, shift: usize) -> Vec<Complex64> {
    let n = PhyParams::N_FFT;
    let sts = phy.symbol(phy.sts_freq(), 0, shift);
    let mut out: Vec<Complex64> = (0..PhyParams::STS_LEN).map(|i| sts[i % n]).collect();
    if include_lts {
        out.extend(phy.symbol(phy.training_freq(), PhyParams::LTS_CP, shift));
        let base = out[out.len() - n..].to_vec();
        out.extend(base);
    }
    out
}

/// Map `bits` onto an Alamouti-coded payload and frame both streams.
///
/// Bits fill data subcarriers in ascending order, symbol by symbol. For each
/// subcarrier, payload symbols `2m` and `2m+1` form one code pair. Stream B's
/// pilots carry an orthogonal cover. Stream A's training symbol sits in position 0 and
/// stream B's in position 1.
pub fn modulate(bits: &[u8], modulation: Modulation, spec: &FrameSpec) -> Result<(SampleBuffer, SampleBuffer)> {
    spec.validate()?;
    let expected = spec.payload_bits(modulation);
    if bits.len() != expected {
        return Err(Error::BitCount {
            expected,
            got: bits.len(),
        });
    }
    let phy = Phy::shared();
    let n = PhyParams::N_FFT;
    let bps = modulation.bits_per_symbol();
    let data = phy.data_subcarriers();
    let zero = Complex64::new(0.0, 0.0);

    let mut a = preamble(phy, spec.include_lts, 0);
    let mut b = preamble(phy, spec.include_lts, spec.stream_b_preamble_shift);
    let training = phy.symbol(phy.training_freq(), PhyParams::CP_LEN, 0);
    let silence = vec![zero; PhyParams::TRAINING_LEN];
    a.extend_from_slice(&training);
    a.extend_from_slice(&silence);
    b.extend_from_slice(&silence);
    b.extend_from_slice(&training);

    let point = |sym: usize, d: usize| {
        let at = (sym * PhyParams::N_DATA + d) * bps;
        modulation.point(modulation.label(&bits[at..at + bps]))
    };
    for m in 0..spec.payload_symbols / 2 {
        let mut fa = [vec![zero; n], vec![zero; n]];
        let mut fb = [vec![zero; n], vec![zero; n]];
        for (d, &k) in data.iter().enumerate() {
            let (sa, sb) = encode(SymbolPair {
                x0: point(2 * m, d),
                x1: point(2 * m + 1, d),
            });
            let bin = PhyParams::bin(k);
            for t in 0..2 {
                fa[t][bin] = sa[t];
                fb[t][bin] = sb[t];
            }
        }
        for t in 0..2 {
            for (i, &k) in PhyParams::PILOT_CARRIERS.iter().enumerate() {
                fa[t][PhyParams::bin(k)] = Complex64::new(phy.pilot(2 * m + t, i), 0.0);
                fb[t][PhyParams::bin(k)] = Complex64::new(phy.pilot_b(2 * m + t, i), 0.0);
            }
            a.extend(phy.symbol(&fa[t], PhyParams::CP_LEN, 0));
            b.extend(phy.symbol(&fb[t], PhyParams::CP_LEN, 0));
        }
    }
    let rate = PhyParams::SAMPLE_RATE;
    Ok((SampleBuffer::new(a, rate)?, SampleBuffer::new(b, rate)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::RngStream;

    #[test]
    fn slot1_preamble_is_sts_only_and_16_periodic() {
        let p = build_preamble(&FrameSpec::new(FrameRole::SourceSlot1, 2));
        assert_eq!(p.len(), 160);
        for i in 16..160 {
            assert!((p.samples[i] - p.samples[i - 16]).norm() < 1e-12);
        }
    }

    #[test]
    fn slot2_preamble_has_two_and_a_half_lts_periods() {
        let p = build_preamble(&FrameSpec::new(FrameRole::SourceSlot2, 2));
        assert_eq!(p.len(), 320);
        let lts = &p.samples[160..];
        let base = Phy::shared().lts_base();
        for i in 0..64 {
            assert!((lts[32 + i] - base[i]).norm() < 1e-12);
            assert!((lts[96 + i] - base[i]).norm() < 1e-12);
        }
        for i in 0..32 {
            assert!((lts[i] - base[32 + i]).norm() < 1e-12);
        }
        assert_eq!(
            p.len(),
            build_preamble(&FrameSpec::new(FrameRole::RelaySlot2, 2)).len()
        );
    }

    #[test]
    fn lts_periodic_autocorrelation_sidelobes() {
        // independent oracle: direct circular correlation of the base sequence
        let base = Phy::shared().lts_base();
        let corr = |lag: usize| -> f64 {
            (0..64)
                .map(|i| base[(i + lag) % 64] * base[i].conj())
                .sum::<Complex64>()
                .norm()
        };
        let peak = corr(0);
        let side = (1..64).map(corr).fold(0.0, f64::max);
        let psl_db = 20.0 * (peak / side).log10();
        assert!(psl_db >= 10.0, "peak-to-sidelobe {psl_db} dB");
    }

    #[test]
    fn payload_symbol_lengths() {
        let spec = FrameSpec::new(FrameRole::SourceSlot2, 10);
        let m = Modulation::Qpsk;
        let mut rng = RngStream::new(4);
        let (a, b) = modulate(&rng.bits(spec.payload_bits(m)), m, &spec).unwrap();
        assert_eq!(a.len(), 320 + 160 + 800);
        assert_eq!(b.len(), a.len());
        assert_eq!(spec.frame_len(), a.len());
    }

    #[test]
    fn bit_count_and_pairing_are_checked() {
        let spec = FrameSpec::new(FrameRole::SourceSlot2, 2);
        assert!(matches!(
            modulate(&[0; 10], Modulation::Bpsk, &spec),
            Err(Error::BitCount { expected: 96, got: 10 })
        ));
        let odd = FrameSpec::new(FrameRole::SourceSlot2, 3);
        assert!(modulate(&[0; 144], Modulation::Bpsk, &odd).is_err());
    }

    #[test]
    fn energy_only_in_used_bins() {
        let spec = FrameSpec::new(FrameRole::SourceSlot2, 4);
        let m = Modulation::Qpsk;
        let mut rng = RngStream::new(8);
        let (a, b) = modulate(&rng.bits(spec.payload_bits(m)), m, &spec).unwrap();
        let phy = Phy::shared();
        for s in [&a, &b] {
            for sym in 0..4 {
                let at = spec.payload_offset() + sym * 80 + 16;
                let f = phy.fft(&s.samples[at..at + 64]);
                for (bin, v) in f.iter().enumerate() {
                    let k = if bin >= 32 { bin as i32 - 64 } else { bin as i32 };
                    let used = k != 0 && k.abs() <= 26;
                    if used {
                        assert!((v.norm() - 1.0).abs() < 1e-9);
                    } else {
                        assert!(v.norm() < 1e-12, "bin {k}");
                    }
                }
            }
        }
    }

    #[test]
    fn training_positions_are_disjoint() {
        let spec = FrameSpec::new(FrameRole::SourceSlot2, 2);
        let m = Modulation::Bpsk;
        let (a, b) = modulate(&vec![0; spec.payload_bits(m)], m, &spec).unwrap();
        let energy = |s: &SampleBuffer, pos: usize| {
            let at = spec.training_offset(pos);
            s.samples[at..at + 80].iter().map(|v| v.norm_sqr()).sum::<f64>()
        };
        assert!(energy(&a, 0) > 70.0 && energy(&a, 1) == 0.0);
        assert!(energy(&b, 1) > 70.0 && energy(&b, 0) == 0.0);
    }
}
