//! Two-slot amplify-and-forward protocol and the direct-link references.
//!
//! Slot 1: the source sends stream A (no LTS); the relay, triggered by the
//! schedule, captures the raw ADC samples. Slot 2: the source sends stream B
//! while the relay replays its capture behind a fresh preamble. The
//! destination runs one [`Receiver`] regardless of configuration.

use num_complex::Complex64;

use crate::alamouti::Modulation;
use crate::channel::{propagate, superpose, ChannelSpec};
use crate::error::{Error, Result};
use crate::ofdm::tx::preamble;
use crate::ofdm::{modulate, FrameRole, FrameSpec, Phy, PhyParams, Receiver, ReceiverConfig, SyncResult};
use crate::rf::{carrier_mismatch, db_to_amplitude, db_to_power, power_to_db, FrontEndConfig, Oscillator, Quantizer};
use crate::signal::{awgn, RngStream, SampleBuffer};

/// AGC averaging length: 2.56 µs of STS.
pub const AGC_WINDOW: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Source,
    Relay,
    Destination,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeConfig {
    pub role: Role,
    pub osc: Oscillator,
    pub fe: FrontEndConfig,
    pub tx_power_db: f64,
}

impl NodeConfig {
    pub fn new(role: Role, osc: Oscillator, tx_power_db: f64) -> Self {
        Self {
            role,
            osc,
            fe: FrontEndConfig::default(),
            tx_power_db,
        }
    }
}

/// Post-gain power the AGC aims for: a quarter of ADC full scale, RMS.
pub fn agc_target_power(fe: &FrontEndConfig) -> f64 {
    (fe.adc_full_scale / 4.0).powi(2)
}

/// Receive gain in whole dB that brings the first [`AGC_WINDOW`] samples to
/// the target power, clamped to the amplifier range. Silence gets maximum
/// gain.
pub fn agc(sts_rx: &[Complex64], fe: &FrontEndConfig) -> f64 {
    let n = sts_rx.len().min(AGC_WINDOW);
    let p = if n == 0 {
        0.0
    } else {
        sts_rx[..n].iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64
    };
    if !(p > 0.0) {
        return FrontEndConfig::MAX_RX_GAIN_DB;
    }
    (power_to_db(agc_target_power(fe)) - power_to_db(p))
        .round()
        .clamp(FrontEndConfig::MIN_RX_GAIN_DB, FrontEndConfig::MAX_RX_GAIN_DB)
}

/// What the relay keeps between slots.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayState {
    /// Post-ADC samples from the scheduled frame start onward, unmodified.
    pub capture: SampleBuffer,
    pub agc_gain_db: f64,
    /// Scale applied on the way back to the DAC.
    pub digital_gain: f64,
    /// Converts the ADC-domain capture to unit transmit power: the inverse
    /// of the AGC target amplitude.
    pub dac_scale: f64,
    /// Slot-1 frame length the schedule promised.
    pub expected_len: usize,
}

/// Relay front end settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relay {
    pub fe: FrontEndConfig,
    /// `false` skips the ADC model (ideal capture).
    pub quantize: bool,
    /// Extra samples captured past the nominal frame end.
    pub capture_margin: usize,
}

impl Default for Relay {
    fn default() -> Self {
        Self {
            fe: FrontEndConfig::default(),
            quantize: true,
            capture_margin: 16,
        }
    }
}

impl Relay {
    /// Capture a slot-1 frame that the schedule says begins at `trigger`.
    /// Gain comes from the AGC over the first STS samples.
    pub fn capture(&self, rx: &SampleBuffer, trigger: usize, frame: &FrameSpec) -> Result<RelayState> {
        let end = (trigger + AGC_WINDOW).min(rx.len());
        let gain = agc(&rx.samples[trigger.min(end)..end], &self.fe);
        self.capture_with_gain(rx, trigger, frame, gain)
    }

    /// [`Relay::capture`] with a fixed receive gain.
    pub fn capture_with_gain(
        &self,
        rx: &SampleBuffer,
        trigger: usize,
        frame: &FrameSpec,
        gain_db: f64,
    ) -> Result<RelayState> {
        let expected_len = frame.frame_len();
        let end = (trigger + expected_len + self.capture_margin).min(rx.len());
        if end < trigger + expected_len {
            return Err(Error::TooShort {
                needed: trigger + expected_len,
                got: rx.len(),
            });
        }
        let g = db_to_amplitude(gain_db);
        let q = Quantizer::new(self.fe.adc_bits, self.fe.adc_full_scale);
        let samples = rx.samples[trigger..end]
            .iter()
            .map(|v| if self.quantize { q.apply(v * g) } else { v * g })
            .collect();
        Ok(RelayState {
            capture: rx.with_samples(samples),
            agc_gain_db: gain_db,
            digital_gain: 1.0,
            dac_scale: 1.0 / agc_target_power(&self.fe).sqrt(),
            expected_len,
        })
    }
}

/// Slot-2 relay waveform at unit reference power: the stored STS+LTS followed
/// by the capture from the end of the captured STS onward. The captured
/// training symbol lands in training position 0 and the payload lines up
/// with the source's slot-2 frame. Nothing is demodulated.
pub fn run_relay(state: &RelayState) -> Result<SampleBuffer> {
    if state.capture.len() < state.expected_len {
        return Err(Error::TooShort {
            needed: state.expected_len,
            got: state.capture.len(),
        });
    }
    let mut out = preamble(Phy::shared(), true, 0);
    let k = state.digital_gain * state.dac_scale;
    out.extend(state.capture.samples[PhyParams::STS_LEN..].iter().map(|v| v * k));
    Ok(state.capture.with_samples(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Configuration {
    /// One source antenna, no relay.
    Siso,
    /// Two co-located source antennas sending both Alamouti streams.
    Miso2x1,
    /// Source plus amplify-and-forward relay.
    Af1x1x1,
}

impl Configuration {
    pub fn name(self) -> &'static str {
        match self {
            Configuration::Siso => "siso",
            Configuration::Miso2x1 => "miso2x1",
            Configuration::Af1x1x1 => "af1x1x1",
        }
    }
}

impl std::str::FromStr for Configuration {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "siso" => Ok(Configuration::Siso),
            "miso2x1" | "miso" => Ok(Configuration::Miso2x1),
            "af1x1x1" | "af" => Ok(Configuration::Af1x1x1),
            other => Err(format!("unknown configuration `{other}`")),
        }
    }
}

/// Everything about one packet exchange except the channels and payload.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    pub configuration: Configuration,
    pub modulation: Modulation,
    pub payload_symbols: usize,
    pub source: NodeConfig,
    pub relay: NodeConfig,
    pub destination: NodeConfig,
    /// Receiver noise per complex sample, in dB, at relay and destination.
    pub noise_power_db: f64,
    /// Silence before each frame at a listening receiver.
    pub lead_in: usize,
    /// Relay slot-2 transmission lag behind the source, in samples.
    pub relay_offset: usize,
    /// Cyclic advance of the stream-B preamble whenever two transmitters send
    /// a preamble at once (2x1 and relay-aided). Without it the two copies
    /// can cancel at the destination. A lock on the advanced copy is early
    /// by this much; the receiver's `max_timing_slip` should cover it.
    pub preamble_shift: usize,
    pub relay_quantize: bool,
    pub receiver: ReceiverConfig,
    /// Also hand the destination the slot-1 transmission, which it must
    /// ignore.
    pub destination_hears_slot1: bool,
}

impl LinkParams {
    pub fn new(configuration: Configuration, modulation: Modulation, tx_power_db: f64) -> Self {
        Self {
            configuration,
            modulation,
            payload_symbols: 20,
            source: NodeConfig::new(Role::Source, Oscillator::new(0.0, 0.0), tx_power_db),
            relay: NodeConfig::new(Role::Relay, Oscillator::new(0.0, 0.0), tx_power_db),
            destination: NodeConfig::new(Role::Destination, Oscillator::new(0.0, 0.0), 0.0),
            noise_power_db: f64::NEG_INFINITY,
            lead_in: 96,
            relay_offset: 0,
            preamble_shift: 4,
            relay_quantize: true,
            receiver: ReceiverConfig::default(),
            destination_hears_slot1: false,
        }
    }

    pub fn payload_bits(&self) -> usize {
        FrameSpec::new(FrameRole::SourceSlot2, self.payload_symbols).payload_bits(self.modulation)
    }

    fn noise_power(&self) -> f64 {
        db_to_power(self.noise_power_db)
    }

    /// Absolute start of slot 2, seconds after the start of slot 1.
    pub fn slot2_time(&self) -> f64 {
        let slot1 = FrameSpec::new(FrameRole::SourceSlot1, self.payload_symbols).frame_len();
        (2 * self.lead_in + slot1 + 2 * PhyParams::STS_LEN) as f64 / PhyParams::SAMPLE_RATE
    }
}

/// Channels of one packet. `sd_b` is the second source antenna's channel to
/// the destination (2x1 only).
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChannels {
    pub sd: ChannelSpec,
    pub sd_b: ChannelSpec,
    pub sr: ChannelSpec,
    pub rd: ChannelSpec,
}

impl LinkChannels {
    pub fn identity() -> Self {
        Self {
            sd: ChannelSpec::identity(),
            sd_b: ChannelSpec::identity(),
            sr: ChannelSpec::identity(),
            rd: ChannelSpec::identity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketResult {
    pub detected: bool,
    pub bits: usize,
    pub bit_errors: usize,
    pub sync: SyncResult,
    /// Mean payload EVM (RMS over symbols); NaN without sync.
    pub evm: f64,
    /// Detected bits; empty without sync.
    pub decoded: Vec<u8>,
    /// Mean per-bin `|hA|²`, `|hB|²` after the presence test.
    pub channel_energy: Option<(f64, f64)>,
}

fn tx_waveform(bb: &SampleBuffer, power_db: f64) -> SampleBuffer {
    let g = db_to_amplitude(power_db);
    bb.with_samples(bb.samples.iter().map(|v| v * g).collect())
}

fn delayed(bb: &SampleBuffer, lead: usize) -> SampleBuffer {
    let mut s = vec![Complex64::new(0.0, 0.0); lead];
    s.extend_from_slice(&bb.samples);
    bb.with_samples(s)
}

/// Waveform after `ch` as seen by a receiver with oscillator `rx`, for a
/// transmission starting at absolute time `t0` and placed `lead` samples
/// into the receive buffer.
fn over_the_air(
    tx: &SampleBuffer,
    tx_osc: &Oscillator,
    rx_osc: &Oscillator,
    t0: f64,
    ch: &ChannelSpec,
    lead: usize,
    rng: &mut RngStream,
) -> Result<SampleBuffer> {
    let rotated = carrier_mismatch(tx, tx_osc, rx_osc, t0);
    Ok(delayed(&propagate(&rotated, ch, rng)?, lead))
}

fn padded(bb: SampleBuffer, len: usize) -> SampleBuffer {
    let mut s = bb.samples.clone();
    s.resize(len.max(s.len()), Complex64::new(0.0, 0.0));
    bb.with_samples(s)
}

/// Execute the slot schedule for one packet and count bit errors at the
/// destination. A missed packet counts every bit as an error.
pub fn run_link(params: &LinkParams, channels: &LinkChannels, payload_bits: &[u8], rng: &mut RngStream) -> Result<PacketResult> {
    let m = params.modulation;
    let n_sym = params.payload_symbols;
    let lead = params.lead_in;
    let noise = params.noise_power();
    let tail = 2 * PhyParams::CP_LEN + params.relay_offset;
    let src = &params.source;
    let dst = &params.destination;
    let t2 = params.slot2_time();

    let slot1_frame = FrameSpec::new(FrameRole::SourceSlot1, n_sym);
    let mut slot2_frame = FrameSpec::new(FrameRole::SourceSlot2, n_sym);
    if params.configuration != Configuration::Siso {
        slot2_frame = slot2_frame.with_preamble_shift(params.preamble_shift);
    }
    let (a2, b2) = modulate(payload_bits, m, &slot2_frame)?;
    let slot2_len = lead + slot2_frame.frame_len() + tail;

    let mut slot1_at_destination = None;
    let at_destination = match params.configuration {
        Configuration::Siso => {
            let a = tx_waveform(&a2, src.tx_power_db);
            over_the_air(&a, &src.osc, &dst.osc, t2, &channels.sd, lead, rng)?
        }
        Configuration::Miso2x1 => {
            let p = src.tx_power_db - power_to_db(2.0);
            let a = tx_waveform(&a2, p);
            let b = tx_waveform(&b2, p);
            let ra = over_the_air(&a, &src.osc, &dst.osc, t2, &channels.sd, lead, rng)?;
            let rb = over_the_air(&b, &src.osc, &dst.osc, t2, &channels.sd_b, lead, rng)?;
            superpose(&ra, &rb)?
        }
        Configuration::Af1x1x1 => {
            let (a1, _) = modulate(payload_bits, m, &slot1_frame)?;
            let a1 = tx_waveform(&a1, src.tx_power_db);
            let t1 = 0.0;
            let relay = Relay {
                fe: params.relay.fe,
                quantize: params.relay_quantize,
                ..Relay::default()
            };
            let at_relay = over_the_air(&a1, &src.osc, &params.relay.osc, t1, &channels.sr, lead, rng)?;
            let at_relay = awgn(
                &padded(at_relay, lead + slot1_frame.frame_len() + relay.capture_margin + tail),
                noise,
                rng,
            )?;
            let state = relay.capture(&at_relay, lead, &slot1_frame)?;
            let replay = tx_waveform(&run_relay(&state)?, params.relay.tx_power_db);
            let t_relay = t2 + params.relay_offset as f64 / PhyParams::SAMPLE_RATE;
            let from_relay = over_the_air(
                &replay,
                &params.relay.osc,
                &dst.osc,
                t_relay,
                &channels.rd,
                lead + params.relay_offset,
                rng,
            )?;
            let b = tx_waveform(&b2, src.tx_power_db);
            let direct = over_the_air(&b, &src.osc, &dst.osc, t2, &channels.sd, lead, rng)?;
            if params.destination_hears_slot1 {
                slot1_at_destination = Some(over_the_air(&a1, &src.osc, &dst.osc, t1, &channels.sd, lead, rng)?);
            }
            superpose(&direct, &from_relay)?
        }
    };
    let mut rx = padded(at_destination, slot2_len);
    if let Some(s1) = slot1_at_destination {
        let gap = PhyParams::STS_LEN;
        let mut first = padded(s1, lead + slot1_frame.frame_len() + gap);
        first.samples.extend_from_slice(&rx.samples);
        rx = first;
    }
    let rx = awgn(&rx, noise, rng)?;

    let receiver = Receiver::new(params.receiver);
    let reception = receiver.receive(&rx, m, n_sym)?;
    let bits = payload_bits.len();
    let channel_energy = reception.estimates.as_ref().map(|h| h.stream_energy());
    Ok(match reception.payload {
        Some(p) => {
            let bit_errors = p.bit_errors(payload_bits);
            PacketResult {
                detected: true,
                bits,
                bit_errors,
                sync: reception.sync,
                evm: p.diagnostics.mean_evm(),
                decoded: p.bits,
                channel_energy,
            }
        }
        None => PacketResult {
            detected: false,
            bits,
            bit_errors: bits,
            sync: reception.sync,
            evm: f64::NAN,
            decoded: Vec::new(),
            channel_energy,
        },
    })
}
