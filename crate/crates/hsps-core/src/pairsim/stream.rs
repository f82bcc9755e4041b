//! Time-tag streams: seeded Monte-Carlo generation matching the click
//! model, and the binary/CSV serialization formats.
//!
//! Pulses are partitioned into fixed-size blocks simulated with
//! independently derived seeds (`derive_seed(master, block_index)`), so
//! blocks may run concurrently with output identical to a sequential run.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{auto_n_max, pair_number_distribution, ChannelModel, SourceModel};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Pulses per independently seeded simulation block.
pub const BLOCK_PULSES: u64 = 1 << 16;

/// Magic bytes of the binary tag-stream format.
pub const TAGSTREAM_MAGIC: &[u8; 8] = b"HSPSTAG1";

/// Version written into the binary header.
pub const TAGSTREAM_VERSION: u32 = 1;

/// Detector channel of an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Channel {
    Signal = 0,
    Idler1 = 1,
    Idler2 = 2,
}

impl Channel {
    pub fn from_u8(value: u8) -> Result<Self> {
        match value {
            0 => Ok(Channel::Signal),
            1 => Ok(Channel::Idler1),
            2 => Ok(Channel::Idler2),
            other => Err(Error::Config(format!("invalid channel byte {other}"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Channel::Signal => "S",
            Channel::Idler1 => "I1",
            Channel::Idler2 => "I2",
        }
    }
}

/// One detector click.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagEvent {
    pub channel: Channel,
    pub timestamp_ps: i64,
}

/// Stream metadata. The binary format persists only the repetition rate,
/// event count and seed; the duration of a loaded stream is reconstructed
/// as (last pulse index + 1) * repetition period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagHeader {
    pub repetition_rate_hz: f64,
    pub duration_s: f64,
    pub seed: u64,
    #[serde(default)]
    pub n_pulses: Option<u64>,
    #[serde(default)]
    pub source: Option<SourceModel>,
    #[serde(default)]
    pub channel_model: Option<ChannelModel>,
}

/// Timestamped detector events across the three channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagStream {
    pub header: TagHeader,
    /// Sorted by (timestamp, channel); per-channel timestamps are then
    /// non-decreasing.
    pub events: Vec<TagEvent>,
}

impl TagStream {
    /// Enforce the canonical event order.
    pub fn normalize(&mut self) {
        self.events
            .sort_unstable_by_key(|e| (e.timestamp_ps, e.channel as u8));
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Per-pulse sampler shared by the stream generator and the tally.
struct PulseSampler {
    cumulative: Vec<f64>,
    q_s: f64,
    idler_path: f64,
    splitter: f64,
    det_i1: f64,
    det_i2: f64,
    noise: [f64; 3],
    jitter_sigma_ps: f64,
    tau_ps: f64,
}

#[derive(Clone, Copy, Default)]
struct PulseClicks {
    s: Option<i64>,
    i1: Option<i64>,
    i2: Option<i64>,
}

impl PulseSampler {
    fn new(source: &SourceModel, channel: &ChannelModel) -> Result<Self> {
        source.validate()?;
        channel.validate()?;
        let n_max = auto_n_max(source)?;
        let distribution = pair_number_distribution(source, n_max)?;
        let mut cumulative = Vec::with_capacity(distribution.len());
        let mut acc = 0.0;
        for p in &distribution {
            acc += p;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(Self {
            cumulative,
            q_s: channel.q_signal(),
            idler_path: channel.idler_transmission,
            splitter: channel.splitter_ratio,
            det_i1: channel.det_eff_i1,
            det_i2: channel.det_eff_i2,
            noise: channel.noise_probs(),
            jitter_sigma_ps: source.pulse_jitter_sigma_ps,
            tau_ps: source.repetition_time_ps(),
        })
    }

    fn sample_pair_count(&self, rng: &mut ChaCha12Rng) -> usize {
        let u: f64 = rng.gen();
        self.cumulative.partition_point(|&c| c < u)
    }

    /// Sample one pulse. Draw order per pulse: pair count; per pair the
    /// signal Bernoulli, then idler path / splitter / detector
    /// Bernoullis; then per detector the noise Bernoulli (only when its
    /// probability is nonzero), one jitter normal per photon click and
    /// one uniform per noise click. Photon clicks sit at the pulse time
    /// plus Gaussian jitter; noise clicks are uniform over the period;
    /// a threshold detector firing on both reports the earlier time.
    fn sample_pulse(&self, rng: &mut ChaCha12Rng, pulse_index: u64) -> PulseClicks {
        let base_ps = (pulse_index as f64) * self.tau_ps;
        let n = self.sample_pair_count(rng);
        let (mut s_hit, mut i1_hit, mut i2_hit) = (false, false, false);
        for _ in 0..n {
            if rng.gen::<f64>() < self.q_s {
                s_hit = true;
            }
            if rng.gen::<f64>() < self.idler_path {
                if rng.gen::<f64>() < self.splitter {
                    if rng.gen::<f64>() < self.det_i1 {
                        i1_hit = true;
                    }
                } else if rng.gen::<f64>() < self.det_i2 {
                    i2_hit = true;
                }
            }
        }
        let mut clicks = PulseClicks::default();
        for (slot, photon_hit, noise_prob) in [
            (0usize, s_hit, self.noise[0]),
            (1, i1_hit, self.noise[1]),
            (2, i2_hit, self.noise[2]),
        ] {
            let noise_hit = noise_prob > 0.0 && rng.gen::<f64>() < noise_prob;
            if !(photon_hit || noise_hit) {
                continue;
            }
            let photon_time = if photon_hit {
                let jitter: f64 =
                    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
                        * self.jitter_sigma_ps;
                Some((base_ps + jitter).round() as i64)
            } else {
                None
            };
            let noise_time = if noise_hit {
                Some((base_ps + rng.gen::<f64>() * self.tau_ps).floor() as i64)
            } else {
                None
            };
            let time = match (photon_time, noise_time) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => unreachable!(),
            };
            match slot {
                0 => clicks.s = Some(time),
                1 => clicks.i1 = Some(time),
                _ => clicks.i2 = Some(time),
            }
        }
        clicks
    }
}

fn block_ranges(n_pulses: u64) -> Vec<(u64, u64, u64)> {
    let mut ranges = Vec::new();
    let mut start = 0;
    let mut index = 0;
    while start < n_pulses {
        let end = (start + BLOCK_PULSES).min(n_pulses);
        ranges.push((index, start, end));
        start = end;
        index += 1;
    }
    ranges
}

fn simulate_block(
    sampler: &PulseSampler,
    master_seed: u64,
    block: (u64, u64, u64),
) -> Vec<TagEvent> {
    let (block_index, start, end) = block;
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(master_seed, block_index));
    let mut events = Vec::new();
    for pulse in start..end {
        let clicks = sampler.sample_pulse(&mut rng, pulse);
        if let Some(t) = clicks.s {
            events.push(TagEvent {
                channel: Channel::Signal,
                timestamp_ps: t,
            });
        }
        if let Some(t) = clicks.i1 {
            events.push(TagEvent {
                channel: Channel::Idler1,
                timestamp_ps: t,
            });
        }
        if let Some(t) = clicks.i2 {
            events.push(TagEvent {
                channel: Channel::Idler2,
                timestamp_ps: t,
            });
        }
    }
    events
}

fn assemble(
    source: &SourceModel,
    channel: &ChannelModel,
    n_pulses: u64,
    seed: u64,
    blocks: Vec<Vec<TagEvent>>,
) -> TagStream {
    let events: Vec<TagEvent> = blocks.into_iter().flatten().collect();
    let mut stream = TagStream {
        header: TagHeader {
            repetition_rate_hz: source.repetition_rate_hz,
            duration_s: (n_pulses as f64) / source.repetition_rate_hz,
            seed,
            n_pulses: Some(n_pulses),
            source: Some(*source),
            channel_model: Some(*channel),
        },
        events,
    };
    stream.normalize();
    stream
}

/// Simulate `n_pulses` pulses; blocks run in parallel. Deterministic for
/// a fixed seed, byte-identical to [`simulate_stream_sequential`].
pub fn simulate_stream(
    source: &SourceModel,
    channel: &ChannelModel,
    n_pulses: u64,
    seed: u64,
) -> Result<TagStream> {
    if n_pulses == 0 {
        return Err(Error::Config("n_pulses must be at least 1".into()));
    }
    let sampler = PulseSampler::new(source, channel)?;
    let blocks: Vec<Vec<TagEvent>> = block_ranges(n_pulses)
        .par_iter()
        .map(|&block| simulate_block(&sampler, seed, block))
        .collect();
    Ok(assemble(source, channel, n_pulses, seed, blocks))
}

/// Single-threaded reference path of [`simulate_stream`].
pub fn simulate_stream_sequential(
    source: &SourceModel,
    channel: &ChannelModel,
    n_pulses: u64,
    seed: u64,
) -> Result<TagStream> {
    if n_pulses == 0 {
        return Err(Error::Config("n_pulses must be at least 1".into()));
    }
    let sampler = PulseSampler::new(source, channel)?;
    let blocks: Vec<Vec<TagEvent>> = block_ranges(n_pulses)
        .iter()
        .map(|&block| simulate_block(&sampler, seed, block))
        .collect();
    Ok(assemble(source, channel, n_pulses, seed, blocks))
}

/// Monte-Carlo tallies of the seven joint click patterns.
#[derive(Clone, Copy, Debug, Default)]
pub struct ClickTally {
    pub n_pulses: u64,
    /// Counts in [`super::ClickProbabilities::LABELS`] order.
    pub counts: [u64; 7],
}

impl ClickTally {
    pub fn frequencies(&self) -> [f64; 7] {
        self.counts.map(|c| (c as f64) / (self.n_pulses as f64))
    }
}

/// Tally per-pulse click patterns over a simulated run. Draws exactly
/// the same random variates as [`simulate_stream`] (so the clicks ARE
/// the stream's clicks) but never materializes events, so arbitrarily
/// long runs use constant memory.
pub fn tally_clicks(
    source: &SourceModel,
    channel: &ChannelModel,
    n_pulses: u64,
    seed: u64,
) -> Result<ClickTally> {
    if n_pulses == 0 {
        return Err(Error::Config("n_pulses must be at least 1".into()));
    }
    let sampler = PulseSampler::new(source, channel)?;
    let counts = block_ranges(n_pulses)
        .par_iter()
        .map(|&(block_index, start, end)| {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, block_index));
            let mut counts = [0u64; 7];
            for pulse in start..end {
                let clicks = sampler.sample_pulse(&mut rng, pulse);
                let (s, i1, i2) = (clicks.s.is_some(), clicks.i1.is_some(), clicks.i2.is_some());
                counts[0] += s as u64;
                counts[1] += i1 as u64;
                counts[2] += i2 as u64;
                counts[3] += (s && i1) as u64;
                counts[4] += (s && i2) as u64;
                counts[5] += (i1 && i2) as u64;
                counts[6] += (s && i1 && i2) as u64;
            }
            counts
        })
        .reduce(
            || [0u64; 7],
            |mut acc, block| {
                for (a, b) in acc.iter_mut().zip(block) {
                    *a += b;
                }
                acc
            },
        );
    Ok(ClickTally { n_pulses, counts })
}

/// Write the pinned little-endian binary format: magic `HSPSTAG1`,
/// version u32, repetition_rate_hz f64, n_events u64, seed u64, then one
/// (channel u8, timestamp_ps i64) record per event.
pub fn write_binary<W: Write>(stream: &TagStream, writer: &mut W) -> Result<()> {
    writer.write_all(TAGSTREAM_MAGIC)?;
    writer.write_all(&TAGSTREAM_VERSION.to_le_bytes())?;
    writer.write_all(&stream.header.repetition_rate_hz.to_le_bytes())?;
    writer.write_all(&(stream.events.len() as u64).to_le_bytes())?;
    writer.write_all(&stream.header.seed.to_le_bytes())?;
    for event in &stream.events {
        writer.write_all(&[event.channel as u8])?;
        writer.write_all(&event.timestamp_ps.to_le_bytes())?;
    }
    Ok(())
}

/// Read the binary format; unsorted events are sorted transparently and
/// the duration is reconstructed from the last pulse index.
pub fn read_binary<R: Read>(reader: &mut R) -> Result<TagStream> {
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic)?;
    if &magic != TAGSTREAM_MAGIC {
        return Err(Error::Config("not a tag-stream file (bad magic)".into()));
    }
    let mut u32_buf = [0u8; 4];
    reader.read_exact(&mut u32_buf)?;
    let version = u32::from_le_bytes(u32_buf);
    if version != TAGSTREAM_VERSION {
        return Err(Error::Config(format!("unsupported tag-stream version {version}")));
    }
    let mut u64_buf = [0u8; 8];
    reader.read_exact(&mut u64_buf)?;
    let repetition_rate_hz = f64::from_le_bytes(u64_buf);
    reader.read_exact(&mut u64_buf)?;
    let n_events = u64::from_le_bytes(u64_buf);
    reader.read_exact(&mut u64_buf)?;
    let seed = u64::from_le_bytes(u64_buf);

    let mut events = Vec::with_capacity(n_events.min(1 << 24) as usize);
    for _ in 0..n_events {
        let mut record = [0u8; 9];
        reader.read_exact(&mut record)?;
        let channel = Channel::from_u8(record[0])?;
        let timestamp_ps = i64::from_le_bytes(record[1..9].try_into().expect("8 bytes"));
        events.push(TagEvent {
            channel,
            timestamp_ps,
        });
    }
    let mut stream = TagStream {
        header: TagHeader {
            repetition_rate_hz,
            duration_s: 0.0,
            seed,
            n_pulses: None,
            source: None,
            channel_model: None,
        },
        events,
    };
    stream.normalize();
    stream.header.duration_s = reconstructed_duration(&stream);
    stream.header.n_pulses = reconstructed_pulses(&stream);
    Ok(stream)
}

fn reconstructed_pulses(stream: &TagStream) -> Option<u64> {
    let last = stream.events.last()?;
    let tau = 1e12 / stream.header.repetition_rate_hz;
    Some(((last.timestamp_ps as f64 / tau).floor().max(0.0) as u64) + 1)
}

fn reconstructed_duration(stream: &TagStream) -> f64 {
    match reconstructed_pulses(stream) {
        Some(n) => (n as f64) / stream.header.repetition_rate_hz,
        None => 0.0,
    }
}

/// Write the CSV twin: `#` metadata comments, a `channel,timestamp_ps`
/// header row, then one integer pair per event (channel 0 = signal,
/// 1 = idler 1, 2 = idler 2).
pub fn write_csv<W: Write>(stream: &TagStream, writer: &mut W) -> Result<()> {
    writeln!(writer, "# repetition_rate_hz={}", stream.header.repetition_rate_hz)?;
    writeln!(writer, "# seed={}", stream.header.seed)?;
    writeln!(writer, "# duration_s={}", stream.header.duration_s)?;
    writeln!(writer, "channel,timestamp_ps")?;
    for event in &stream.events {
        writeln!(writer, "{},{}", event.channel as u8, event.timestamp_ps)?;
    }
    Ok(())
}

/// Read the CSV twin.
pub fn read_csv<R: Read>(reader: &mut R) -> Result<TagStream> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut repetition_rate_hz = 0.0;
    let mut seed = 0u64;
    let mut duration_s = None;
    let mut events = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            source_name: "tag-stream csv".into(),
            line: idx + 1,
            message,
        };
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "repetition_rate_hz" => {
                        repetition_rate_hz =
                            value.trim().parse().map_err(|_| err("bad rate".into()))?;
                    }
                    "seed" => seed = value.trim().parse().map_err(|_| err("bad seed".into()))?,
                    "duration_s" => {
                        duration_s =
                            Some(value.trim().parse().map_err(|_| err("bad duration".into()))?);
                    }
                    _ => {}
                }
            }
            continue;
        }
        if line == "channel,timestamp_ps" {
            saw_header = true;
            continue;
        }
        let (ch, ts) = line
            .split_once(',')
            .ok_or_else(|| err("expected channel,timestamp_ps".into()))?;
        let channel = Channel::from_u8(
            ch.trim()
                .parse()
                .map_err(|_| err(format!("bad channel {ch}")))?,
        )?;
        let timestamp_ps = ts
            .trim()
            .parse()
            .map_err(|_| err(format!("bad timestamp {ts}")))?;
        events.push(TagEvent {
            channel,
            timestamp_ps,
        });
    }
    if !saw_header && events.is_empty() && repetition_rate_hz == 0.0 {
        return Err(Error::Config("not a tag-stream CSV".into()));
    }
    if repetition_rate_hz <= 0.0 {
        return Err(Error::Config("tag-stream CSV missing repetition_rate_hz".into()));
    }
    let mut stream = TagStream {
        header: TagHeader {
            repetition_rate_hz,
            duration_s: 0.0,
            seed,
            n_pulses: None,
            source: None,
            channel_model: None,
        },
        events,
    };
    stream.normalize();
    stream.header.duration_s = duration_s.unwrap_or_else(|| reconstructed_duration(&stream));
    stream.header.n_pulses = reconstructed_pulses(&stream);
    Ok(stream)
}
