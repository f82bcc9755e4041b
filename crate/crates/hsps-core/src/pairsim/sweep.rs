//! Pump-power sweeps: one simulate + analyze run per point with derived
//! per-point seeds.
//!
//! The seed of point k is `derive_seed(master_seed, k)`, so a single
//! standalone run with that seed reproduces the point exactly.

use serde::{Deserialize, Serialize};

use super::{simulate_stream, ChannelModel, SourceModel};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::tagmetrics::{
    car_rep, count, heralded_g2, heralding_efficiency, CoincidenceConfig, CountSummary,
};

/// One sweep point: the mean pair number, optionally labeled with the
/// pump power it corresponds to (mu = kappa * power).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub power: Option<f64>,
    pub mu: f64,
}

/// Sweep definition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub points: Vec<SweepPoint>,
    pub n_pulses: u64,
    pub master_seed: u64,
}

impl SweepConfig {
    /// Points given directly in mean pairs per pulse.
    pub fn from_mu_values(mu: &[f64], n_pulses: u64, master_seed: u64) -> Self {
        Self {
            points: mu.iter().map(|&mu| SweepPoint { power: None, mu }).collect(),
            n_pulses,
            master_seed,
        }
    }

    /// Points given as pump powers with a linear brightness coefficient
    /// kappa (mean pairs per pulse per power unit).
    pub fn from_powers(powers: &[f64], kappa: f64, n_pulses: u64, master_seed: u64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::Config("kappa must be positive".into()));
        }
        Ok(Self {
            points: powers
                .iter()
                .map(|&p| SweepPoint {
                    power: Some(p),
                    mu: kappa * p,
                })
                .collect(),
            n_pulses,
            master_seed,
        })
    }
}

/// Per-point results. Metrics that are undefined on the realized counts
/// are NaN; an unbounded CAR is infinity.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub power: Option<f64>,
    pub mu: f64,
    pub seed: u64,
    pub summary: CountSummary,
    pub eta_h: f64,
    pub g2_h: f64,
    pub car_rep_1: f64,
    pub car_rep_2: f64,
}

/// Run simulate + count + estimators per sweep point.
///
/// The heralding efficiency divides out `channel.det_eff_i1`; for the
/// estimator to mean what it should, both idler detectors should be
/// configured with equal efficiency.
pub fn power_sweep(
    source_template: &SourceModel,
    channel: &ChannelModel,
    coincidence: &CoincidenceConfig,
    config: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if config.points.is_empty() {
        return Err(Error::Config("sweep needs at least one point".into()));
    }
    if config.n_pulses == 0 {
        return Err(Error::Config("sweep needs at least one pulse per point".into()));
    }
    for point in &config.points {
        if !(point.mu >= 0.0 && point.mu.is_finite()) {
            return Err(Error::Config(format!("invalid mean pair number {}", point.mu)));
        }
    }
    coincidence.validate()?;

    let mut rows = Vec::with_capacity(config.points.len());
    for (index, point) in config.points.iter().enumerate() {
        let seed = derive_seed(config.master_seed, index as u64);
        let mut source = *source_template;
        source.mean_pairs_per_pulse = point.mu;
        let stream = simulate_stream(&source, channel, config.n_pulses, seed)?;
        let summary = count(&stream, coincidence)?;
        let eta_h = heralding_efficiency(&summary, channel.det_eff_i1).unwrap_or(f64::NAN);
        let g2_h = heralded_g2(&summary).unwrap_or(f64::NAN);
        let car_1 = car_rep(&summary, 1).map(|c| c.as_f64()).unwrap_or(f64::NAN);
        let car_2 = car_rep(&summary, 2).map(|c| c.as_f64()).unwrap_or(f64::NAN);
        rows.push(SweepRow {
            power: point.power,
            mu: point.mu,
            seed,
            summary,
            eta_h,
            g2_h,
            car_rep_1: car_1,
            car_rep_2: car_2,
        });
    }
    Ok(rows)
}
