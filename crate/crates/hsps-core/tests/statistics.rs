//! Statistical cross-checks between the analytic click model, the
//! Monte-Carlo stream generator and the coincidence counter.

use hsps_core::pairsim::{
    auto_n_max, click_probabilities, simulate_stream, ChannelModel, PhotonStatistics, SourceModel,
};
use hsps_core::tagmetrics::{
    car_rep, count, heralded_g2, heralding_efficiency, CarEstimate, CoincidenceConfig,
};

fn source(mu: f64) -> SourceModel {
    SourceModel {
        mean_pairs_per_pulse: mu,
        statistics: PhotonStatistics::ThermalSingleMode,
        repetition_rate_hz: 1e7,
        pulse_jitter_sigma_ps: 43.0,
    }
}

fn module_channel() -> ChannelModel {
    ChannelModel {
        signal_transmission: 0.3,
        idler_transmission: 0.4,
        det_eff_s: 0.65,
        det_eff_i1: 0.85,
        det_eff_i2: 0.85,
        ..ChannelModel::default()
    }
}

fn config() -> CoincidenceConfig {
    CoincidenceConfig::for_repetition(100_000)
}

/// Windowed S-I1 coincidences of a simulated stream match the analytic
/// per-pulse prediction within 3 binomial standard errors.
#[test]
fn counted_coincidences_match_click_model() {
    let src = source(0.1);
    let channel = module_channel();
    let n: u64 = 1_000_000;
    let stream = simulate_stream(&src, &channel, n, 314).unwrap();
    let summary = count(&stream, &config()).unwrap();
    let p = click_probabilities(&src, &channel, auto_n_max(&src).unwrap()).unwrap();

    for (observed, predicted) in [
        (summary.pairs_s_i1, p.p_s_i1),
        (summary.pairs_s_i2, p.p_s_i2),
        (summary.triples, p.p_s_i1_i2),
        (summary.singles[0], p.p_s),
    ] {
        let sigma = ((predicted * (1.0 - predicted)) * (n as f64)).sqrt();
        let expected = predicted * (n as f64);
        assert!(
            ((observed as f64) - expected).abs() < 3.0 * sigma,
            "observed {observed}, expected {expected:.1} +- {sigma:.1}"
        );
    }
}

/// Uncorrelated noise clicks on every channel give CAR_rep(m) = 1 within
/// statistics for all configured shifts.
#[test]
fn uncorrelated_clicks_have_unit_car() {
    let src = source(0.0);
    let channel = ChannelModel {
        background_prob_s: 0.2,
        background_prob_i1: 0.15,
        background_prob_i2: 0.15,
        ..ChannelModel::default()
    };
    let stream = simulate_stream(&src, &channel, 10_000_000, 2718).unwrap();
    let summary = count(&stream, &config()).unwrap();
    for m in [1u32, 2] {
        let accidental = summary.shifted_pairs[&m] as f64;
        let car = match car_rep(&summary, m).unwrap() {
            CarEstimate::Finite(v) => v,
            other => panic!("expected finite CAR, got {other}"),
        };
        let sigma = car * (1.0 / (summary.pairs_s_i() as f64) + 1.0 / accidental).sqrt();
        assert!(
            (car - 1.0).abs() < 3.0 * sigma,
            "CAR_rep({m}) = {car} +- {sigma}"
        );
    }
}

/// Low-mu limits: heralded g2 vanishes, CAR is large, and the heralding
/// efficiency approaches the configured idler path transmission.
#[test]
fn low_mu_limits() {
    let src = source(1e-3);
    let channel = ChannelModel {
        signal_transmission: 1.0,
        idler_transmission: 0.4,
        det_eff_s: 0.65,
        det_eff_i1: 0.85,
        det_eff_i2: 0.85,
        ..ChannelModel::default()
    };
    let n: u64 = 20_000_000;
    let stream = simulate_stream(&src, &channel, n, 577).unwrap();
    let summary = count(&stream, &config()).unwrap();

    let eta_h = heralding_efficiency(&summary, 0.85).unwrap();
    let sigma = eta_h / (summary.pairs_s_i() as f64).sqrt();
    assert!(
        (eta_h - 0.4).abs() < 3.0 * sigma + 0.002,
        "eta_h = {eta_h} vs path 0.4 (sigma {sigma})"
    );

    let g2 = heralded_g2(&summary).unwrap();
    assert!(g2 < 0.02, "g2 = {g2} should collapse at mu = 1e-3");

    match car_rep(&summary, 1).unwrap() {
        CarEstimate::Finite(v) => assert!(v > 50.0, "CAR {v} should be large"),
        CarEstimate::Unbounded { .. } => {}
    }
}

/// The idler-relabel invariance holds on realistic simulated data.
#[test]
fn metrics_invariant_under_idler_relabel() {
    use hsps_core::pairsim::Channel;
    let stream = simulate_stream(&source(0.3), &module_channel(), 500_000, 99).unwrap();
    let mut swapped = stream.clone();
    for event in &mut swapped.events {
        event.channel = match event.channel {
            Channel::Idler1 => Channel::Idler2,
            Channel::Idler2 => Channel::Idler1,
            Channel::Signal => Channel::Signal,
        };
    }
    swapped.normalize();
    let a = count(&stream, &config()).unwrap();
    let b = count(&swapped, &config()).unwrap();
    assert_eq!(a.pairs_s_i(), b.pairs_s_i());
    assert_eq!(a.triples, b.triples);
    assert_eq!(heralded_g2(&a).unwrap(), heralded_g2(&b).unwrap());
    assert_eq!(
        heralding_efficiency(&a, 0.85).unwrap(),
        heralding_efficiency(&b, 0.85).unwrap()
    );
    assert_eq!(a.shifted_pairs, b.shifted_pairs);
}
