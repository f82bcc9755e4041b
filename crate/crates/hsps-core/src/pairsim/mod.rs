//! Pulsed photon-pair source simulation: pair-number statistics, loss,
//! 50/50 splitting and threshold detection with dark counts, both as
//! exact per-pulse click probabilities (no sampling) and as seeded
//! Monte-Carlo time-tag streams.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod stream;
mod sweep;
pub use stream::{
    read_binary, read_csv, simulate_stream, simulate_stream_sequential, tally_clicks,
    write_binary, write_csv, Channel, ClickTally, TagEvent, TagHeader, TagStream, BLOCK_PULSES,
    TAGSTREAM_MAGIC, TAGSTREAM_VERSION,
};
pub use sweep::{power_sweep, SweepConfig, SweepPoint, SweepRow};

/// Maximum allowed truncation tail mass of the pair-number distribution.
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// Photon-number statistics of the pair source.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhotonStatistics {
    /// Single-mode thermal: P(n) = mu^n / (1 + mu)^(n+1).
    ThermalSingleMode,
    /// Poissonian (highly multimode limit): P(n) = e^-mu mu^n / n!.
    Poissonian,
}

/// Pulsed pair source.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    /// Mean generated pairs per pulse. Pump power enters only through
    /// this number (mu = kappa * P with a user-supplied kappa).
    pub mean_pairs_per_pulse: f64,
    pub statistics: PhotonStatistics,
    pub repetition_rate_hz: f64,
    #[serde(default)]
    pub pulse_jitter_sigma_ps: f64,
}

impl SourceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_pairs_per_pulse >= 0.0 && self.mean_pairs_per_pulse.is_finite()) {
            return Err(Error::Config("mean pairs per pulse must be >= 0".into()));
        }
        if !(self.repetition_rate_hz > 0.0) {
            return Err(Error::Config("repetition rate must be positive".into()));
        }
        if !(self.pulse_jitter_sigma_ps >= 0.0) {
            return Err(Error::Config("pulse jitter must be >= 0".into()));
        }
        Ok(())
    }

    /// Repetition period in picoseconds.
    pub fn repetition_time_ps(&self) -> f64 {
        1e12 / self.repetition_rate_hz
    }
}

/// Everything between the source and the three threshold detectors.
///
/// `signal_transmission` and `idler_transmission` are the full path
/// transmissions up to (not including) the detectors, i.e. the products
/// of module and filter efficiencies of each arm. Dark counts and the
/// uncorrelated background are independent per-window click probabilities
/// on each detector, OR-ed into the photon response.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub signal_transmission: f64,
    pub idler_transmission: f64,
    /// Fraction of idler photons routed to detector i1.
    #[serde(default = "default_splitter")]
    pub splitter_ratio: f64,
    pub det_eff_s: f64,
    pub det_eff_i1: f64,
    pub det_eff_i2: f64,
    #[serde(default)]
    pub dark_prob_s: f64,
    #[serde(default)]
    pub dark_prob_i1: f64,
    #[serde(default)]
    pub dark_prob_i2: f64,
    #[serde(default)]
    pub background_prob_s: f64,
    #[serde(default)]
    pub background_prob_i1: f64,
    #[serde(default)]
    pub background_prob_i2: f64,
}

fn default_splitter() -> f64 {
    0.5
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            signal_transmission: 1.0,
            idler_transmission: 1.0,
            splitter_ratio: 0.5,
            det_eff_s: 1.0,
            det_eff_i1: 1.0,
            det_eff_i2: 1.0,
            dark_prob_s: 0.0,
            dark_prob_i1: 0.0,
            dark_prob_i2: 0.0,
            background_prob_s: 0.0,
            background_prob_i1: 0.0,
            background_prob_i2: 0.0,
        }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("signal_transmission", self.signal_transmission),
            ("idler_transmission", self.idler_transmission),
            ("splitter_ratio", self.splitter_ratio),
            ("det_eff_s", self.det_eff_s),
            ("det_eff_i1", self.det_eff_i1),
            ("det_eff_i2", self.det_eff_i2),
            ("dark_prob_s", self.dark_prob_s),
            ("dark_prob_i1", self.dark_prob_i1),
            ("dark_prob_i2", self.dark_prob_i2),
            ("background_prob_s", self.background_prob_s),
            ("background_prob_i1", self.background_prob_i1),
            ("background_prob_i2", self.background_prob_i2),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
                return Err(Error::Config(format!("{name} = {value} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Per-pair probability that the signal photon fires its detector.
    pub fn q_signal(&self) -> f64 {
        self.signal_transmission * self.det_eff_s
    }

    /// Per-pair probability that the idler photon fires detector i1.
    pub fn q_idler1(&self) -> f64 {
        self.idler_transmission * self.splitter_ratio * self.det_eff_i1
    }

    /// Per-pair probability that the idler photon fires detector i2.
    pub fn q_idler2(&self) -> f64 {
        self.idler_transmission * (1.0 - self.splitter_ratio) * self.det_eff_i2
    }

    /// Combined per-window noise click probability of each detector
    /// (dark counts OR background).
    pub fn noise_probs(&self) -> [f64; 3] {
        let combine = |dark: f64, background: f64| 1.0 - (1.0 - dark) * (1.0 - background);
        [
            combine(self.dark_prob_s, self.background_prob_s),
            combine(self.dark_prob_i1, self.background_prob_i1),
            combine(self.dark_prob_i2, self.background_prob_i2),
        ]
    }
}

/// P(0..=n_max) of the pair-number distribution, renormalized after
/// verifying the truncated tail is below [`TAIL_TOLERANCE`].
pub fn pair_number_distribution(source: &SourceModel, n_max: usize) -> Result<Vec<f64>> {
    source.validate()?;
    if n_max < 1 {
        return Err(Error::Config("n_max must be at least 1".into()));
    }
    let mu = source.mean_pairs_per_pulse;
    let mut probabilities = Vec::with_capacity(n_max + 1);
    match source.statistics {
        PhotonStatistics::ThermalSingleMode => {
            let ratio = mu / (1.0 + mu);
            let mut p = 1.0 / (1.0 + mu);
            for _ in 0..=n_max {
                probabilities.push(p);
                p *= ratio;
            }
        }
        PhotonStatistics::Poissonian => {
            let mut p = (-mu).exp();
            for n in 0..=n_max {
                probabilities.push(p);
                p *= mu / ((n + 1) as f64);
            }
        }
    }
    let mass: f64 = probabilities.iter().sum();
    let tail = 1.0 - mass;
    if tail > TAIL_TOLERANCE {
        return Err(Error::Truncation {
            n_max,
            tail,
            limit: TAIL_TOLERANCE,
        });
    }
    for p in &mut probabilities {
        *p /= mass;
    }
    Ok(probabilities)
}

/// Smallest n_max whose truncated tail is below [`TAIL_TOLERANCE`].
pub fn auto_n_max(source: &SourceModel) -> Result<usize> {
    source.validate()?;
    const CAP: usize = 1_000_000;
    let mu = source.mean_pairs_per_pulse;
    if mu == 0.0 {
        return Ok(1);
    }
    match source.statistics {
        PhotonStatistics::ThermalSingleMode => {
            // tail after n_max is (mu/(1+mu))^(n_max+1)
            let ratio = mu / (1.0 + mu);
            let n = (TAIL_TOLERANCE.ln() / ratio.ln()).ceil() as usize;
            Ok(n.clamp(1, CAP))
        }
        PhotonStatistics::Poissonian => {
            let mut p = (-mu).exp();
            let mut cumulative = p;
            for n in 0..CAP {
                if 1.0 - cumulative < TAIL_TOLERANCE {
                    return Ok(n.max(1));
                }
                p *= mu / ((n + 1) as f64);
                cumulative += p;
            }
            Err(Error::Truncation {
                n_max: CAP,
                tail: 1.0 - cumulative,
                limit: TAIL_TOLERANCE,
            })
        }
    }
}

/// The seven joint click probabilities of one pulse window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClickProbabilities {
    pub p_s: f64,
    pub p_i1: f64,
    pub p_i2: f64,
    pub p_s_i1: f64,
    pub p_s_i2: f64,
    pub p_i1_i2: f64,
    pub p_s_i1_i2: f64,
}

impl ClickProbabilities {
    pub const LABELS: [&'static str; 7] =
        ["p_s", "p_i1", "p_i2", "p_s_i1", "p_s_i2", "p_i1_i2", "p_s_i1_i2"];

    pub fn as_array(&self) -> [f64; 7] {
        [
            self.p_s,
            self.p_i1,
            self.p_i2,
            self.p_s_i1,
            self.p_s_i2,
            self.p_i1_i2,
            self.p_s_i1_i2,
        ]
    }
}

/// Exact per-pulse click probabilities by enumeration over the truncated,
/// renormalized pair-number distribution.
///
/// Conditioned on n pairs, each signal photon fires its detector with
/// probability `q_s`, each idler photon fires i1 or i2 with mutually
/// exclusive probabilities `q_i1`, `q_i2`; the no-click joints are powers
/// of the per-pair survival factors, averaged over n, and detector noise
/// is OR-ed in independently. Inclusion-exclusion then yields all seven
/// joint click probabilities.
pub fn click_probabilities(
    source: &SourceModel,
    channel: &ChannelModel,
    n_max: usize,
) -> Result<ClickProbabilities> {
    channel.validate()?;
    let distribution = pair_number_distribution(source, n_max)?;
    let q_s = channel.q_signal();
    let q_i1 = channel.q_idler1();
    let q_i2 = channel.q_idler2();

    // E[x^n] over the truncated distribution.
    let mean_power = |x: f64| -> f64 {
        let mut acc = 0.0;
        let mut x_pow = 1.0;
        for p in &distribution {
            acc += p * x_pow;
            x_pow *= x;
        }
        acc
    };

    let a_s = mean_power(1.0 - q_s);
    let a_i1 = mean_power(1.0 - q_i1);
    let a_i2 = mean_power(1.0 - q_i2);
    let a_s_i1 = mean_power((1.0 - q_s) * (1.0 - q_i1));
    let a_s_i2 = mean_power((1.0 - q_s) * (1.0 - q_i2));
    let a_i1_i2 = mean_power(1.0 - q_i1 - q_i2);
    let a_s_i1_i2 = mean_power((1.0 - q_s) * (1.0 - q_i1 - q_i2));

    let [noise_s, noise_i1, noise_i2] = channel.noise_probs();
    let k_s = 1.0 - noise_s;
    let k_1 = 1.0 - noise_i1;
    let k_2 = 1.0 - noise_i2;

    Ok(ClickProbabilities {
        p_s: 1.0 - a_s * k_s,
        p_i1: 1.0 - a_i1 * k_1,
        p_i2: 1.0 - a_i2 * k_2,
        p_s_i1: 1.0 - a_s * k_s - a_i1 * k_1 + a_s_i1 * k_s * k_1,
        p_s_i2: 1.0 - a_s * k_s - a_i2 * k_2 + a_s_i2 * k_s * k_2,
        p_i1_i2: 1.0 - a_i1 * k_1 - a_i2 * k_2 + a_i1_i2 * k_1 * k_2,
        p_s_i1_i2: 1.0 - a_s * k_s - a_i1 * k_1 - a_i2 * k_2
            + a_s_i1 * k_s * k_1
            + a_s_i2 * k_s * k_2
            + a_i1_i2 * k_1 * k_2
            - a_s_i1_i2 * k_s * k_1 * k_2,
    })
}
