//! Windowed coincidence counting on time-tag streams and the derived
//! estimators: heralding efficiency, heralded g2(0), shifted
//! coincidence-to-accidental ratio and Klyshko-style transmission
//! inference.
//!
//! Two events coincide when their delay-corrected timestamps differ by at
//! most half the coincidence window. Matching is greedy earliest-first
//! with one partner per event, which is deterministic and independent of
//! event insertion order after the canonical sort. The heralded g2
//! estimator uses the dimensionless form with the squared coincidence
//! denominator, `4 R_s R_triple / (R_si1 + R_si2)^2`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairsim::TagStream;

/// Coincidence counting configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceConfig {
    /// Full coincidence window, ps.
    pub window_ps: i64,
    /// Per-channel delays added to timestamps before matching
    /// (signal, idler 1, idler 2).
    #[serde(default)]
    pub channel_delays_ps: [i64; 3],
    /// Pulse repetition period, ps; must exceed the window.
    pub repetition_time_ps: i64,
    /// Pulse shifts m for which accidental coincidences are counted.
    #[serde(default = "default_shifts")]
    pub shifts: Vec<u32>,
}

fn default_shifts() -> Vec<u32> {
    vec![1, 2]
}

impl CoincidenceConfig {
    /// Default 5 ns window for a given repetition period.
    pub fn for_repetition(repetition_time_ps: i64) -> Self {
        Self {
            window_ps: 5000,
            channel_delays_ps: [0; 3],
            repetition_time_ps,
            shifts: default_shifts(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_ps <= 0 {
            return Err(Error::Config("coincidence window must be positive".into()));
        }
        if self.repetition_time_ps <= self.window_ps {
            return Err(Error::Config(
                "repetition period must exceed the coincidence window".into(),
            ));
        }
        Ok(())
    }
}

/// Windowed singles, pairwise and triple coincidence tallies of a stream.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub duration_s: f64,
    /// Set when the input stream had no events.
    pub empty_warning: bool,
    /// Singles counts (signal, idler 1, idler 2).
    pub singles: [u64; 3],
    pub pairs_s_i1: u64,
    pub pairs_s_i2: u64,
    pub pairs_i1_i2: u64,
    pub triples: u64,
    /// Same-window signal/idler coincidences after shifting the idlers by
    /// m repetition periods, keyed by m (idler channels summed).
    pub shifted_pairs: BTreeMap<u32, u64>,
}

impl CountSummary {
    fn rate(&self, count: u64) -> f64 {
        if self.duration_s > 0.0 {
            (count as f64) / self.duration_s
        } else {
            0.0
        }
    }

    pub fn r_s(&self) -> f64 {
        self.rate(self.singles[0])
    }

    pub fn r_i1(&self) -> f64 {
        self.rate(self.singles[1])
    }

    pub fn r_i2(&self) -> f64 {
        self.rate(self.singles[2])
    }

    pub fn r_s_i1(&self) -> f64 {
        self.rate(self.pairs_s_i1)
    }

    pub fn r_s_i2(&self) -> f64 {
        self.rate(self.pairs_s_i2)
    }

    pub fn r_i1_i2(&self) -> f64 {
        self.rate(self.pairs_i1_i2)
    }

    pub fn r_triples(&self) -> f64 {
        self.rate(self.triples)
    }

    /// Combined signal/idler coincidence count (both idler detectors).
    pub fn pairs_s_i(&self) -> u64 {
        self.pairs_s_i1 + self.pairs_s_i2
    }
}

/// Greedy earliest-first matching of two sorted timestamp lists; each
/// event participates in at most one coincidence.
fn greedy_pairs(a: &[i64], b: &[i64], window_ps: i64) -> u64 {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let delta = a[i] - b[j];
        if 2 * delta.abs() <= window_ps {
            count += 1;
            i += 1;
            j += 1;
        } else if a[i] < b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    count
}

/// Greedy triple matching: a triple coincides when all three pairwise
/// separations are within the window.
fn greedy_triples(s: &[i64], i1: &[i64], i2: &[i64], window_ps: i64) -> u64 {
    let (mut a, mut b, mut c, mut count) = (0, 0, 0, 0);
    while a < s.len() && b < i1.len() && c < i2.len() {
        let (ts, t1, t2) = (s[a], i1[b], i2[c]);
        let max = ts.max(t1).max(t2);
        let min = ts.min(t1).min(t2);
        if 2 * (max - min) <= window_ps {
            count += 1;
            a += 1;
            b += 1;
            c += 1;
        } else if ts == min {
            a += 1;
        } else if t1 == min {
            b += 1;
        } else {
            c += 1;
        }
    }
    count
}

/// Count singles, pairwise and triple coincidences, and pulse-shifted
/// accidentals. Unsorted input is sorted transparently; an empty stream
/// yields a zero summary with `empty_warning` set.
pub fn count(stream: &TagStream, config: &CoincidenceConfig) -> Result<CountSummary> {
    config.validate()?;

    let mut by_channel: [Vec<i64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for event in &stream.events {
        let idx = event.channel as usize;
        by_channel[idx].push(event.timestamp_ps + config.channel_delays_ps[idx]);
    }
    for list in &mut by_channel {
        list.sort_unstable();
    }
    let [s, i1, i2] = by_channel;

    let mut summary = CountSummary {
        duration_s: stream.header.duration_s,
        empty_warning: stream.events.is_empty(),
        singles: [s.len() as u64, i1.len() as u64, i2.len() as u64],
        pairs_s_i1: greedy_pairs(&s, &i1, config.window_ps),
        pairs_s_i2: greedy_pairs(&s, &i2, config.window_ps),
        pairs_i1_i2: greedy_pairs(&i1, &i2, config.window_ps),
        triples: greedy_triples(&s, &i1, &i2, config.window_ps),
        shifted_pairs: BTreeMap::new(),
    };

    // one partner per event: pairwise counts can never exceed the
    // constituent singles
    assert!(summary.pairs_s_i1 <= summary.singles[0].min(summary.singles[1]));
    assert!(summary.pairs_s_i2 <= summary.singles[0].min(summary.singles[2]));
    assert!(summary.pairs_i1_i2 <= summary.singles[1].min(summary.singles[2]));

    for &m in &config.shifts {
        let offset = (m as i64) * config.repetition_time_ps;
        let shift = |list: &[i64]| -> Vec<i64> { list.iter().map(|t| t + offset).collect() };
        let shifted = greedy_pairs(&s, &shift(&i1), config.window_ps)
            + greedy_pairs(&s, &shift(&i2), config.window_ps);
        summary.shifted_pairs.insert(m, shifted);
    }
    Ok(summary)
}

/// Heralding efficiency, `(R_si1 + R_si2) / (R_s * det_eff_idler)`: the
/// detector-corrected probability of an idler photon given a signal
/// click. Values above 1 indicate pathological input.
pub fn heralding_efficiency(summary: &CountSummary, det_eff_idler: f64) -> Result<f64> {
    if !(det_eff_idler > 0.0 && det_eff_idler <= 1.0) {
        return Err(Error::Domain(format!(
            "idler detector efficiency {det_eff_idler} outside (0, 1]"
        )));
    }
    if summary.singles[0] == 0 {
        return Err(Error::UndefinedMetric(
            "heralding efficiency needs a nonzero signal rate".into(),
        ));
    }
    Ok((summary.pairs_s_i() as f64) / ((summary.singles[0] as f64) * det_eff_idler))
}

/// Heralded second-order autocorrelation at zero delay,
/// `4 R_s R_triple / (R_si1 + R_si2)^2` (dimensionless form).
pub fn heralded_g2(summary: &CountSummary) -> Result<f64> {
    let coincidences = summary.pairs_s_i();
    if coincidences == 0 {
        return Err(Error::UndefinedMetric(
            "heralded g2 needs nonzero signal/idler coincidences".into(),
        ));
    }
    let numerator = 4.0 * (summary.singles[0] as f64) * (summary.triples as f64);
    Ok(numerator / ((coincidences as f64) * (coincidences as f64)))
}

/// Shifted coincidence-to-accidental ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CarEstimate {
    Finite(f64),
    /// No accidentals were observed; carries the same-pulse count for
    /// context.
    Unbounded { same_pulse_pairs: u64 },
}

impl CarEstimate {
    pub fn as_f64(&self) -> f64 {
        match self {
            CarEstimate::Finite(v) => *v,
            CarEstimate::Unbounded { .. } => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for CarEstimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CarEstimate::Finite(v) => write!(f, "{v}"),
            CarEstimate::Unbounded { same_pulse_pairs } => {
                write!(f, "inf ({same_pulse_pairs} same-pulse pairs, 0 accidentals)")
            }
        }
    }
}

/// Coincidence-to-accidental ratio for a shift of m repetition periods:
/// same-pulse signal/idler coincidences over the m-pulse-shifted ones.
pub fn car_rep(summary: &CountSummary, m: u32) -> Result<CarEstimate> {
    let accidental = summary.shifted_pairs.get(&m).copied().ok_or_else(|| {
        Error::UndefinedMetric(format!("no shifted coincidences counted for m = {m}"))
    })?;
    let same_pulse = summary.pairs_s_i();
    if accidental == 0 {
        return Ok(CarEstimate::Unbounded {
            same_pulse_pairs: same_pulse,
        });
    }
    Ok(CarEstimate::Finite((same_pulse as f64) / (accidental as f64)))
}

/// Klyshko-style inversion of singles and coincidence rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlyshkoEstimate {
    /// Signal-arm efficiency product (path, filter and detector).
    pub signal_arm_efficiency: f64,
    /// Idler-arm efficiency product (path, filter and detector), with the
    /// splitter outputs summed back together.
    pub idler_arm_efficiency: f64,
    /// Inferred generated pair rate, Hz.
    pub pair_rate_hz: f64,
}

/// Invert `R_s = eta_s R`, `R_i = eta_i R`, `R_si = eta_s eta_i R`:
/// `eta_s = R_si / R_i`, `eta_i = R_si / R_s`, `R = R_s R_i / R_si`.
/// The idler rate sums both splitter outputs; recovered efficiencies
/// include the detector efficiencies, which the caller divides out.
pub fn klyshko_infer(summary: &CountSummary) -> Result<KlyshkoEstimate> {
    let n_s = summary.singles[0];
    let n_i = summary.singles[1] + summary.singles[2];
    let n_si = summary.pairs_s_i();
    if n_s == 0 || n_i == 0 || n_si == 0 {
        return Err(Error::UndefinedMetric(
            "Klyshko inversion needs nonzero singles and coincidences on both arms".into(),
        ));
    }
    if summary.duration_s <= 0.0 {
        return Err(Error::UndefinedMetric("stream duration is zero".into()));
    }
    Ok(KlyshkoEstimate {
        signal_arm_efficiency: (n_si as f64) / (n_i as f64),
        idler_arm_efficiency: (n_si as f64) / (n_s as f64),
        pair_rate_hz: (n_s as f64) * (n_i as f64) / ((n_si as f64) * summary.duration_s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairsim::{Channel, TagEvent, TagHeader, TagStream};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn stream_from(events: Vec<(Channel, i64)>, duration_s: f64) -> TagStream {
        TagStream {
            header: TagHeader {
                repetition_rate_hz: 1e7,
                duration_s,
                seed: 0,
                n_pulses: None,
                source: None,
                channel_model: None,
            },
            events: events
                .into_iter()
                .map(|(channel, timestamp_ps)| TagEvent {
                    channel,
                    timestamp_ps,
                })
                .collect(),
        }
    }

    fn config() -> CoincidenceConfig {
        CoincidenceConfig::for_repetition(100_000)
    }

    #[test]
    fn identical_timestamps_all_coincide() {
        let events: Vec<(Channel, i64)> = (0..100)
            .flat_map(|k| {
                let t = k * 100_000;
                [(Channel::Signal, t), (Channel::Idler1, t)]
            })
            .collect();
        let summary = count(&stream_from(events, 1e-5), &config()).unwrap();
        assert_eq!(summary.pairs_s_i1, 100);
        assert_eq!(summary.pairs_s_i2, 0);
    }

    #[test]
    fn window_boundary() {
        let make = |offset: i64| {
            stream_from(
                vec![(Channel::Signal, 1_000_000), (Channel::Idler1, 1_000_000 + offset)],
                1e-5,
            )
        };
        let at_edge = count(&make(2500), &config()).unwrap();
        assert_eq!(at_edge.pairs_s_i1, 1);
        let past_edge = count(&make(2501), &config()).unwrap();
        assert_eq!(past_edge.pairs_s_i1, 0);
    }

    #[test]
    fn empty_stream_zero_summary_with_warning() {
        let summary = count(&stream_from(vec![], 0.0), &config()).unwrap();
        assert!(summary.empty_warning);
        assert_eq!(summary.singles, [0, 0, 0]);
        assert_eq!(summary.pairs_s_i(), 0);
        assert!(heralding_efficiency(&summary, 0.85).is_err());
        assert!(heralded_g2(&summary).is_err());
        assert!(klyshko_infer(&summary).is_err());
    }

    #[test]
    fn insertion_order_irrelevant() {
        let mut events = vec![
            (Channel::Idler1, 200_500),
            (Channel::Signal, 100_000),
            (Channel::Idler1, 100_200),
            (Channel::Signal, 200_000),
            (Channel::Idler2, 100_100),
        ];
        let forward = count(&stream_from(events.clone(), 1e-5), &config()).unwrap();
        events.reverse();
        let backward = count(&stream_from(events, 1e-5), &config()).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn translation_invariance() {
        let base = vec![
            (Channel::Signal, 100_000),
            (Channel::Idler1, 100_030),
            (Channel::Idler2, 99_970),
            (Channel::Signal, 500_000),
            (Channel::Idler1, 503_000),
        ];
        let shifted: Vec<(Channel, i64)> =
            base.iter().map(|(c, t)| (*c, t + 777_777)).collect();
        let a = count(&stream_from(base, 1e-4), &config()).unwrap();
        let b = count(&stream_from(shifted, 1e-4), &config()).unwrap();
        assert_eq!(a.pairs_s_i1, b.pairs_s_i1);
        assert_eq!(a.pairs_s_i2, b.pairs_s_i2);
        assert_eq!(a.triples, b.triples);
        assert_eq!(a.shifted_pairs, b.shifted_pairs);
    }

    #[test]
    fn idler_relabel_swaps_pair_counts() {
        let events = vec![
            (Channel::Signal, 100_000),
            (Channel::Idler1, 100_030),
            (Channel::Signal, 200_000),
            (Channel::Idler2, 200_010),
            (Channel::Idler2, 300_000),
        ];
        let swapped: Vec<(Channel, i64)> = events
            .iter()
            .map(|(c, t)| {
                let c = match c {
                    Channel::Idler1 => Channel::Idler2,
                    Channel::Idler2 => Channel::Idler1,
                    Channel::Signal => Channel::Signal,
                };
                (c, *t)
            })
            .collect();
        let a = count(&stream_from(events, 1e-4), &config()).unwrap();
        let b = count(&stream_from(swapped, 1e-4), &config()).unwrap();
        assert_eq!(a.pairs_s_i1, b.pairs_s_i2);
        assert_eq!(a.pairs_s_i2, b.pairs_s_i1);
        assert_eq!(a.pairs_i1_i2, b.pairs_i1_i2);
        assert_eq!(a.triples, b.triples);
        assert_eq!(a.pairs_s_i(), b.pairs_s_i());
        // estimators built on summed idlers are invariant
        assert_eq!(
            heralded_g2(&a).ok(),
            heralded_g2(&b).ok()
        );
    }

    #[test]
    fn channel_delay_recovers_offset_pairs() {
        let events: Vec<(Channel, i64)> = (0..50)
            .flat_map(|k| {
                let t = k * 100_000;
                [(Channel::Signal, t), (Channel::Idler1, t + 40_000)]
            })
            .collect();
        let misaligned = count(&stream_from(events.clone(), 5e-6), &config()).unwrap();
        assert_eq!(misaligned.pairs_s_i1, 0);
        let mut cfg = config();
        cfg.channel_delays_ps = [40_000, 0, 0];
        let aligned = count(&stream_from(events, 5e-6), &cfg).unwrap();
        assert_eq!(aligned.pairs_s_i1, 50);
    }

    #[test]
    fn greedy_never_double_counts() {
        // one signal flanked by two idlers: only one pair may form
        let events = vec![
            (Channel::Idler1, 99_000),
            (Channel::Signal, 100_000),
            (Channel::Idler1, 101_000),
        ];
        let summary = count(&stream_from(events, 1e-5), &config()).unwrap();
        assert_eq!(summary.pairs_s_i1, 1);
    }

    #[test]
    fn triples_require_all_three_within_window() {
        let tight = vec![
            (Channel::Signal, 100_000),
            (Channel::Idler1, 101_000),
            (Channel::Idler2, 99_500),
        ];
        let summary = count(&stream_from(tight, 1e-5), &config()).unwrap();
        assert_eq!(summary.triples, 1);

        // s-i1 and s-i2 within window but i1-i2 spread beyond it
        let loose = vec![
            (Channel::Signal, 100_000),
            (Channel::Idler1, 102_400),
            (Channel::Idler2, 97_600),
        ];
        let summary = count(&stream_from(loose, 1e-5), &config()).unwrap();
        assert_eq!(summary.pairs_s_i1, 1);
        assert_eq!(summary.pairs_s_i2, 1);
        assert_eq!(summary.triples, 0);
    }

    #[test]
    fn shifted_pairs_count_neighboring_pulses() {
        // correlated pairs in every pulse: shifting by one period pairs
        // signal k with idler k+1, still present
        let events: Vec<(Channel, i64)> = (0..100)
            .flat_map(|k| {
                let t = k * 100_000;
                [(Channel::Signal, t), (Channel::Idler1, t)]
            })
            .collect();
        let summary = count(&stream_from(events, 1e-5), &config()).unwrap();
        assert_eq!(summary.shifted_pairs[&1], 99);
        assert_eq!(summary.shifted_pairs[&2], 98);
    }

    #[test]
    fn heralding_efficiency_examples() {
        // lossless, perfectly correlated: every signal heralds an idler
        let events: Vec<(Channel, i64)> = (0..100)
            .flat_map(|k| {
                let t = k * 100_000;
                [(Channel::Signal, t), (Channel::Idler1, t)]
            })
            .collect();
        let summary = count(&stream_from(events, 1e-5), &config()).unwrap();
        assert_eq!(heralding_efficiency(&summary, 1.0).unwrap(), 1.0);

        // doubling both coincidence counts doubles the estimate
        let mut doubled = summary.clone();
        doubled.pairs_s_i1 *= 2;
        assert_abs_diff_eq!(
            heralding_efficiency(&doubled, 1.0).unwrap(),
            2.0 * heralding_efficiency(&summary, 1.0).unwrap(),
            epsilon = 1e-12
        );

        // detector efficiency divides out
        assert_relative_eq!(
            heralding_efficiency(&summary, 0.85).unwrap(),
            1.0 / 0.85,
            max_relative = 1e-12
        );
    }

    #[test]
    fn heralded_g2_zero_without_triples() {
        let events = vec![
            (Channel::Signal, 100_000),
            (Channel::Idler1, 100_000),
        ];
        let summary = count(&stream_from(events, 1e-5), &config()).unwrap();
        assert_eq!(heralded_g2(&summary).unwrap(), 0.0);
    }

    #[test]
    fn car_infinite_marker_with_context() {
        let events = vec![
            (Channel::Signal, 100_000),
            (Channel::Idler1, 100_000),
        ];
        let summary = count(&stream_from(events, 1e-5), &config()).unwrap();
        match car_rep(&summary, 1).unwrap() {
            CarEstimate::Unbounded { same_pulse_pairs } => assert_eq!(same_pulse_pairs, 1),
            other => panic!("expected unbounded CAR, got {other}"),
        }
        assert!(car_rep(&summary, 5).is_err());
    }

    #[test]
    fn klyshko_symmetric_channels() {
        // equal correlated rates on both arms
        let events: Vec<(Channel, i64)> = (0..1000)
            .flat_map(|k| {
                let t = k * 100_000;
                [(Channel::Signal, t), (Channel::Idler1, t)]
            })
            .collect();
        let summary = count(&stream_from(events, 1e-4), &config()).unwrap();
        let estimate = klyshko_infer(&summary).unwrap();
        assert_relative_eq!(
            estimate.signal_arm_efficiency,
            estimate.idler_arm_efficiency,
            max_relative = 1e-12
        );
        assert_relative_eq!(estimate.pair_rate_hz, 1e7, max_relative = 1e-12);
    }
}
