//! Quasi-phase-matching: phase-mismatch evaluation, wavelength/period
//! solves, SPDC spectra and the additive offset calibration of calculated
//! peak positions against a measured one.
//!
//! Guided modes are opaque labels carrying user-supplied effective-index
//! offsets on top of the bulk dispersion model; the toolkit does not
//! solve the transverse waveguide problem.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dispersion::SellmeierModel;
use crate::error::{Error, Result};

/// Default signal-wavelength search interval, um.
pub const DEFAULT_SEARCH_INTERVAL_UM: (f64, f64) = (0.6, 1.05);

/// Default bisection tolerance, um (much tighter than the documented
/// 1e-6 contract, so |delta_k| at the returned root stays below
/// 1e-9 rad/um and inverse-pair compositions hold to 1e-6).
pub const DEFAULT_SOLVE_TOLERANCE_UM: f64 = 1e-9;

/// Grid size of the sign-change scan that brackets roots before bisection.
const SIGN_SCAN_POINTS: usize = 2000;

/// A combination of guided pump/signal/idler modes, by label.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeCombo {
    pub pump: String,
    pub signal: String,
    pub idler: String,
}

impl ModeCombo {
    pub fn new(pump: &str, signal: &str, idler: &str) -> Self {
        Self {
            pump: pump.into(),
            signal: signal.into(),
            idler: idler.into(),
        }
    }

    /// All-fundamental combination; its offsets default to zero.
    pub fn fundamental() -> Self {
        Self::new("00", "00", "00")
    }
}

impl std::fmt::Display for ModeCombo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}", self.pump, self.signal, self.idler)
    }
}

/// Additive effective-index offsets for one mode combination.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeOffsets {
    #[serde(default)]
    pub pump: f64,
    #[serde(default)]
    pub signal: f64,
    #[serde(default)]
    pub idler: f64,
}

/// A quasi-phase-matched SPDC configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpmProcess {
    pub pump_wavelength_um: f64,
    pub poling_period_um: f64,
    pub crystal_length_mm: f64,
    pub temperature_c: f64,
    #[serde(default)]
    pub mode_offsets: BTreeMap<ModeCombo, ModeOffsets>,
}

impl QpmProcess {
    pub fn new(
        pump_wavelength_um: f64,
        poling_period_um: f64,
        crystal_length_mm: f64,
        temperature_c: f64,
    ) -> Result<Self> {
        let process = Self {
            pump_wavelength_um,
            poling_period_um,
            crystal_length_mm,
            temperature_c,
            mode_offsets: BTreeMap::new(),
        };
        process.validate()?;
        Ok(process)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pump_wavelength_um > 0.0) {
            return Err(Error::Config("pump wavelength must be positive".into()));
        }
        if !(self.poling_period_um > 0.0) {
            return Err(Error::Config("poling period must be positive".into()));
        }
        if !(self.crystal_length_mm > 0.0) {
            return Err(Error::Config("crystal length must be positive".into()));
        }
        Ok(())
    }

    /// Offsets of `combo`. The all-fundamental combination defaults to
    /// zero offsets; any other combination must be present in the map.
    pub fn offsets_for(&self, combo: &ModeCombo) -> Result<ModeOffsets> {
        match self.mode_offsets.get(combo) {
            Some(offsets) => Ok(*offsets),
            None if *combo == ModeCombo::fundamental() => Ok(ModeOffsets::default()),
            None => Err(Error::Config(format!("mode combination {combo} has no offsets"))),
        }
    }
}

/// Idler wavelength from energy conservation, 1/l_i = 1/l_p - 1/l_s.
pub fn idler_from_signal(pump_um: f64, signal_um: f64) -> Result<f64> {
    if !(pump_um > 0.0) {
        return Err(Error::Domain(format!("pump wavelength {pump_um} must be positive")));
    }
    if signal_um <= pump_um {
        return Err(Error::Domain(format!(
            "signal wavelength {signal_um} um must exceed pump {pump_um} um for a physical idler"
        )));
    }
    Ok(1.0 / (1.0 / pump_um - 1.0 / signal_um))
}

/// sin(x)/x with the removable singularity handled by series expansion.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Collinear phase mismatch of the quasi-phase-matched process,
/// `dk = 2 pi [(n_p+dn_p)/l_p - (n_s+dn_s)/l_s - (n_i+dn_i)/l_i - 1/L]`,
/// in rad/um.
pub fn phase_mismatch(
    process: &QpmProcess,
    model: &SellmeierModel,
    signal_um: f64,
    combo: &ModeCombo,
) -> Result<f64> {
    let offsets = process.offsets_for(combo)?;
    phase_mismatch_with_offsets(process, model, signal_um, &offsets)
}

fn phase_mismatch_with_offsets(
    process: &QpmProcess,
    model: &SellmeierModel,
    signal_um: f64,
    offsets: &ModeOffsets,
) -> Result<f64> {
    let pump_um = process.pump_wavelength_um;
    let idler_um = idler_from_signal(pump_um, signal_um)?;
    let t = process.temperature_c;
    let n_p = model.refractive_index(pump_um, t)? + offsets.pump;
    let n_s = model.refractive_index(signal_um, t)? + offsets.signal;
    let n_i = model.refractive_index(idler_um, t)? + offsets.idler;
    Ok(2.0 * PI
        * (n_p / pump_um - n_s / signal_um - n_i / idler_um - 1.0 / process.poling_period_um))
}

/// Signal wavelength solving `dk = 0` on the default search interval.
///
/// Scans for sign changes on a uniform grid first; if several roots
/// exist, the lowest-wavelength one is taken. Bisection then refines the
/// bracket below [`DEFAULT_SOLVE_TOLERANCE_UM`].
pub fn solve_phasematch(
    process: &QpmProcess,
    model: &SellmeierModel,
    combo: &ModeCombo,
) -> Result<f64> {
    solve_phasematch_in(
        process,
        model,
        combo,
        DEFAULT_SEARCH_INTERVAL_UM,
        DEFAULT_SOLVE_TOLERANCE_UM,
    )
}

/// [`solve_phasematch`] with an explicit interval and tolerance.
pub fn solve_phasematch_in(
    process: &QpmProcess,
    model: &SellmeierModel,
    combo: &ModeCombo,
    interval_um: (f64, f64),
    tolerance_um: f64,
) -> Result<f64> {
    let offsets = process.offsets_for(combo)?;
    let (lo, hi) = interval_um;
    if !(hi > lo) || !(tolerance_um > 0.0) {
        return Err(Error::Config("invalid search interval or tolerance".into()));
    }
    let f = |x: f64| phase_mismatch_with_offsets(process, model, x, &offsets);

    let mut prev_x = lo;
    let mut prev_y = f(prev_x)?;
    let mut bracket = None;
    for i in 1..=SIGN_SCAN_POINTS {
        let x = lo + (hi - lo) * (i as f64) / (SIGN_SCAN_POINTS as f64);
        let y = f(x)?;
        if prev_y == 0.0 {
            return Ok(prev_x);
        }
        if prev_y.signum() != y.signum() {
            bracket = Some((prev_x, x, prev_y));
            break;
        }
        prev_x = x;
        prev_y = y;
    }
    let (mut a, mut b, mut fa) = match bracket {
        Some(b) => b,
        None => {
            return Err(Error::NoPhasematch {
                lo,
                hi,
                dk_lo: f(lo)?,
                dk_hi: f(hi)?,
            });
        }
    };
    while b - a > tolerance_um {
        let mid = 0.5 * (a + b);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fa.signum() != fm.signum() {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

/// Poling period that phase-matches `signal_um` at `temperature_c`:
/// `L = 2 pi / (k_p - k_s - k_i)` with `k = 2 pi (n + dn) / l`.
pub fn solve_period(
    pump_um: f64,
    signal_um: f64,
    model: &SellmeierModel,
    temperature_c: f64,
    offsets: &ModeOffsets,
) -> Result<f64> {
    let idler_um = idler_from_signal(pump_um, signal_um)?;
    let n_p = model.refractive_index(pump_um, temperature_c)? + offsets.pump;
    let n_s = model.refractive_index(signal_um, temperature_c)? + offsets.signal;
    let n_i = model.refractive_index(idler_um, temperature_c)? + offsets.idler;
    let denom = n_p / pump_um - n_s / signal_um - n_i / idler_um;
    if !(denom > 0.0) {
        return Err(Error::Domain(format!(
            "wave-vector mismatch {denom:.6e} 1/um not positive; no finite poling period"
        )));
    }
    Ok(1.0 / denom)
}

/// A relative SPDC intensity spectrum over signal wavelength.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpdcSpectrum {
    /// (signal wavelength um, relative intensity), wavelengths increasing,
    /// normalized so the spectrum's maximum over the grid span is 1.
    pub samples: Vec<(f64, f64)>,
    /// Snapshot of the process the spectrum was computed for.
    pub process: QpmProcess,
}

/// Options for [`spdc_spectrum`].
#[derive(Clone, Debug, Default)]
pub struct SpectrumOptions {
    /// Pump line FWHM in nm; when set, the spectrum is averaged over a
    /// 5-point Gauss-Hermite quadrature across a Gaussian pump line.
    pub pump_fwhm_nm: Option<f64>,
    /// Additive background curve (wavelength um, intensity >= 0), linearly
    /// interpolated, treated as zero outside its tabulated range. Applied
    /// before normalization.
    pub background: Option<Vec<(f64, f64)>>,
}

/// 5-point Gauss-Hermite nodes/weights (weights pre-divided by sqrt(pi)).
const GAUSS_HERMITE_5: [(f64, f64); 5] = [
    (-2.020_182_870_456_085_6, 0.011_257_411_327_720_688),
    (-0.958_572_464_613_818_7, 0.222_075_922_005_612_86),
    (0.0, 0.533_333_333_333_333_3),
    (0.958_572_464_613_818_7, 0.222_075_922_005_612_86),
    (2.020_182_870_456_085_6, 0.011_257_411_327_720_688),
];

fn background_at(background: &[(f64, f64)], wavelength_um: f64) -> f64 {
    let first = match background.first() {
        Some(p) => p,
        None => return 0.0,
    };
    let last = background.last().expect("non-empty");
    if wavelength_um < first.0 || wavelength_um > last.0 {
        return 0.0;
    }
    let pos = background.partition_point(|(w, _)| *w <= wavelength_um);
    if pos == 0 {
        return first.1;
    }
    if pos == background.len() {
        return last.1;
    }
    let (w0, v0) = background[pos - 1];
    let (w1, v1) = background[pos];
    v0 + (wavelength_um - w0) / (w1 - w0) * (v1 - v0)
}

/// Weighted sum of sinc^2 phasematching curves over mode combinations,
/// normalized so the maximum of the underlying function over the grid
/// span is 1 (a dense internal scan locates it, so sample values do not
/// depend on the caller's grid resolution).
pub fn spdc_spectrum(
    process: &QpmProcess,
    model: &SellmeierModel,
    combos: &[(ModeCombo, f64)],
    grid_um: &[f64],
    options: &SpectrumOptions,
) -> Result<SpdcSpectrum> {
    if combos.is_empty() {
        return Err(Error::Config("spectrum needs at least one mode combination".into()));
    }
    if grid_um.len() < 2 {
        return Err(Error::Config("spectrum grid needs at least two wavelengths".into()));
    }
    for pair in grid_um.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Config("spectrum grid must be strictly increasing".into()));
        }
    }
    for (combo, weight) in combos {
        process.offsets_for(combo)?;
        if !(weight.is_finite() && *weight >= 0.0) {
            return Err(Error::Config(format!("weight of {combo} must be non-negative")));
        }
    }
    if let Some(bg) = &options.background {
        if bg.iter().any(|(_, v)| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("background intensities must be non-negative".into()));
        }
        for pair in bg.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::Config("background wavelengths must be increasing".into()));
            }
        }
    }
    if let Some(fwhm) = options.pump_fwhm_nm {
        if !(fwhm > 0.0) {
            return Err(Error::Config("pump FWHM must be positive".into()));
        }
    }

    let length_um = process.crystal_length_mm * 1000.0;
    let pump_sigma_um = options
        .pump_fwhm_nm
        .map(|fwhm| fwhm * 1e-3 / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt()));

    let intensity = |signal_um: f64| -> Result<f64> {
        let mut total = 0.0;
        for (combo, weight) in combos {
            let offsets = process.offsets_for(combo)?;
            let value = match pump_sigma_um {
                None => {
                    let dk = phase_mismatch_with_offsets(process, model, signal_um, &offsets)?;
                    let s = sinc(dk * length_um / 2.0);
                    s * s
                }
                Some(sigma) => {
                    let mut acc = 0.0;
                    for (node, w) in GAUSS_HERMITE_5 {
                        let mut shifted = process.clone();
                        shifted.pump_wavelength_um =
                            process.pump_wavelength_um + std::f64::consts::SQRT_2 * sigma * node;
                        let dk =
                            phase_mismatch_with_offsets(&shifted, model, signal_um, &offsets)?;
                        let s = sinc(dk * length_um / 2.0);
                        acc += w * s * s;
                    }
                    acc
                }
            };
            total += weight * value;
        }
        if let Some(bg) = &options.background {
            total += background_at(bg, signal_um);
        }
        Ok(total)
    };

    let values: Vec<f64> = grid_um
        .iter()
        .map(|&w| intensity(w))
        .collect::<Result<_>>()?;

    // Locate the function maximum over the grid span with a dense scan
    // plus golden-section refinement, so normalization does not couple to
    // the caller's grid.
    let (span_lo, span_hi) = (grid_um[0], *grid_um.last().expect("validated"));
    const SCAN: usize = 4000;
    let mut best_x = span_lo;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..=SCAN {
        let x = span_lo + (span_hi - span_lo) * (i as f64) / (SCAN as f64);
        let v = intensity(x)?;
        if v > best_v {
            best_v = v;
            best_x = x;
        }
    }
    let step = (span_hi - span_lo) / (SCAN as f64);
    let (mut a, mut b) = (
        (best_x - step).max(span_lo),
        (best_x + step).min(span_hi),
    );
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = intensity(x1)?;
    let mut f2 = intensity(x2)?;
    for _ in 0..60 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = intensity(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = intensity(x1)?;
        }
    }
    let peak = best_v.max(f1).max(f2).max(
        values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
    );
    if !(peak > 0.0) {
        return Err(Error::Domain("spectrum is identically zero on the grid".into()));
    }

    let samples = grid_um
        .iter()
        .zip(values)
        .map(|(&w, v)| (w, v / peak))
        .collect();
    Ok(SpdcSpectrum {
        samples,
        process: process.clone(),
    })
}

/// Calibrate calculated peak positions against a measured fundamental
/// peak: every mode combination's peak is displaced by the same
/// wavelength offset `measured - calculated(fundamental)`, which leaves
/// the spacings between combination peaks unchanged. The displacement is
/// realized as a signal-index offset per combination (the exact offset
/// that puts that combination's root at its displaced position), so the
/// result is an updated `mode_offsets` map.
pub fn calibrate_offset(
    measured_signal_um: f64,
    process: &QpmProcess,
    model: &SellmeierModel,
) -> Result<BTreeMap<ModeCombo, ModeOffsets>> {
    let (lo, hi) = DEFAULT_SEARCH_INTERVAL_UM;
    if !(measured_signal_um > lo && measured_signal_um < hi) {
        return Err(Error::Calibration(format!(
            "measured peak {measured_signal_um} um outside the search window [{lo}, {hi}] um"
        )));
    }
    let fundamental_root = solve_phasematch(process, model, &ModeCombo::fundamental())?;
    let displacement = measured_signal_um - fundamental_root;

    let mut combos: Vec<ModeCombo> = process.mode_offsets.keys().cloned().collect();
    if !combos.contains(&ModeCombo::fundamental()) {
        combos.push(ModeCombo::fundamental());
    }

    let mut updated = BTreeMap::new();
    for combo in combos {
        let root = solve_phasematch(process, model, &combo)?;
        let target = root + displacement;
        if !(target > lo && target < hi) {
            return Err(Error::Calibration(format!(
                "displaced peak of {combo} at {target} um leaves the search window [{lo}, {hi}] um"
            )));
        }
        // dk(target) - 2 pi x / target = 0 solves the required offset
        // exactly.
        let dk_target = phase_mismatch(process, model, target, &combo)?;
        let mut offsets = process.offsets_for(&combo)?;
        offsets.signal += target * dk_target / (2.0 * PI);
        updated.insert(combo, offsets);
    }

    let mut check = process.clone();
    check.mode_offsets = updated.clone();
    let root = solve_phasematch(&check, model, &ModeCombo::fundamental())?;
    if (root - measured_signal_um).abs() > 1e-6 {
        return Err(Error::Calibration(format!(
            "calibrated root {root} um does not reproduce the measured peak {measured_signal_um} um"
        )));
    }
    Ok(updated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};

    fn model() -> SellmeierModel {
        SellmeierModel::builtin_linbo3_e()
    }

    fn paper_process() -> QpmProcess {
        QpmProcess::new(0.532, 7.05, 15.0, 80.0).unwrap()
    }

    #[test]
    fn idler_golden_and_degenerate() {
        // 1/(1/532 - 1/810) nm = 430920/278 nm, exact rational arithmetic
        let idler = idler_from_signal(0.532, 0.810).unwrap();
        assert_abs_diff_eq!(idler, 1.550_071_942_446_043_2, epsilon = 1e-12);
        let degenerate = idler_from_signal(0.532, 1.064).unwrap();
        assert_abs_diff_eq!(degenerate, 1.064, epsilon = 1e-12);
        assert!(idler_from_signal(0.532, 0.5).is_err());
        assert!(idler_from_signal(0.532, 0.532).is_err());
    }

    #[test]
    fn idler_involution() {
        for signal in [0.62, 0.810, 0.95, 1.04] {
            let idler = idler_from_signal(0.532, signal).unwrap();
            let back = idler_from_signal(0.532, idler).unwrap();
            assert_abs_diff_eq!(back, signal, epsilon = 1e-12);
        }
    }

    #[test]
    fn energy_conservation_tight() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..200 {
            let signal: f64 = rng.gen_range(0.6..1.05);
            let idler = idler_from_signal(0.532, signal).unwrap();
            assert!((1.0 / 0.532 - 1.0 / signal - 1.0 / idler).abs() < 1e-12);
        }
    }

    #[test]
    fn sinc_peak_exact() {
        assert_eq!(sinc(0.0), 1.0);
        assert_abs_diff_eq!(sinc(1e-5), 1.0 - 1e-10 / 6.0, epsilon = 1e-18);
        assert_abs_diff_eq!(sinc(1.3), (1.3f64).sin() / 1.3, epsilon = 1e-15);
    }

    #[test]
    fn golden_phase_mismatch() {
        // Frozen from an independent high-precision evaluation.
        let dk = phase_mismatch(&paper_process(), &model(), 0.810, &ModeCombo::fundamental())
            .unwrap();
        assert_abs_diff_eq!(dk, -0.029_445_678_935_106, epsilon = 1e-9);
    }

    #[test]
    fn mismatch_linear_in_inverse_period() {
        let model = model();
        let combo = ModeCombo::fundamental();
        let mut p1 = paper_process();
        p1.poling_period_um = 6.9;
        let mut p2 = paper_process();
        p2.poling_period_um = 7.3;
        let d1 = phase_mismatch(&p1, &model, 0.82, &combo).unwrap();
        let d2 = phase_mismatch(&p2, &model, 0.82, &combo).unwrap();
        let expected = -2.0 * PI * (1.0 / 6.9 - 1.0 / 7.3);
        assert_relative_eq!(d1 - d2, expected, max_relative = 1e-12);
    }

    #[test]
    fn golden_fundamental_root() {
        // Frozen from an independent solve with the shipped coefficients.
        let root = solve_phasematch(&paper_process(), &model(), &ModeCombo::fundamental()).unwrap();
        assert_abs_diff_eq!(root, 0.855_328_844, epsilon = 1e-6);
        let dk = phase_mismatch(&paper_process(), &model(), root, &ModeCombo::fundamental())
            .unwrap();
        assert!(dk.abs() < 1e-9, "delta_k at the root is {dk}");
    }

    #[test]
    fn golden_period_solve() {
        let period = solve_period(0.532, 0.810, &model(), 80.0, &ModeOffsets::default()).unwrap();
        assert_abs_diff_eq!(period, 7.290_885_752_56, epsilon = 1e-6);
        assert!((6.3..=7.6).contains(&period));
    }

    #[test]
    fn constant_index_cannot_phasematch() {
        let toy = SellmeierModel::constant("toy", 2.0);
        let err = solve_period(0.532, 0.810, &toy, 25.0, &ModeOffsets::default()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn solver_pair_mutually_inverse() {
        let model = model();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        for _ in 0..100 {
            let signal: f64 = rng.gen_range(0.70..0.95);
            let temperature: f64 = rng.gen_range(25.0..100.0);
            let offsets = ModeOffsets {
                pump: rng.gen_range(-0.002..0.002),
                signal: rng.gen_range(-0.002..0.002),
                idler: rng.gen_range(-0.002..0.002),
            };
            let period = solve_period(0.532, signal, &model, temperature, &offsets).unwrap();
            let mut process = QpmProcess::new(0.532, period, 15.0, temperature).unwrap();
            let combo = ModeCombo::new("p", "s", "i");
            process.mode_offsets.insert(combo.clone(), offsets);
            let root = solve_phasematch(&process, &model, &combo).unwrap();
            assert_abs_diff_eq!(root, signal, epsilon = 1e-6);
        }
    }

    #[test]
    fn no_phasematch_error_carries_endpoints() {
        let mut process = paper_process();
        process.poling_period_um = 2.0; // far from any root on the window
        let err = solve_phasematch(&process, &model(), &ModeCombo::fundamental()).unwrap_err();
        match err {
            Error::NoPhasematch { dk_lo, dk_hi, .. } => {
                assert!(dk_lo.is_finite() && dk_hi.is_finite());
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn distinct_offsets_distinct_roots() {
        let model = model();
        let mut process = paper_process();
        let combo_a = ModeCombo::new("00", "00", "00");
        let combo_b = ModeCombo::new("00", "10", "00");
        process.mode_offsets.insert(
            combo_b.clone(),
            ModeOffsets {
                pump: 0.0,
                signal: 0.004,
                idler: 0.0,
            },
        );
        let root_a = solve_phasematch(&process, &model, &combo_a).unwrap();
        let root_b = solve_phasematch(&process, &model, &combo_b).unwrap();
        assert!((root_a - root_b).abs() > 1e-4);
    }

    #[test]
    fn unknown_combo_errors() {
        let err = phase_mismatch(
            &paper_process(),
            &model(),
            0.81,
            &ModeCombo::new("00", "99", "00"),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
        (0..points)
            .map(|i| lo + (hi - lo) * (i as f64) / ((points - 1) as f64))
            .collect()
    }

    #[test]
    fn spectrum_peaks_at_root() {
        let model = model();
        let process = paper_process();
        let combos = vec![(ModeCombo::fundamental(), 1.0)];
        let root = solve_phasematch(&process, &model, &ModeCombo::fundamental()).unwrap();
        let grid = uniform_grid(0.84, 0.87, 1001);
        let spectrum =
            spdc_spectrum(&process, &model, &combos, &grid, &SpectrumOptions::default()).unwrap();
        let (argmax, peak_value) = spectrum
            .samples
            .iter()
            .cloned()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let step = grid[1] - grid[0];
        assert!((argmax - root).abs() <= step, "argmax {argmax} vs root {root}");
        assert!(peak_value > 0.999 && peak_value <= 1.0 + 1e-12);
        assert!(spectrum.samples.iter().all(|(_, v)| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn spectrum_fwhm_halves_with_doubled_length() {
        let model = model();
        let combos = vec![(ModeCombo::fundamental(), 1.0)];
        let fwhm = |length_mm: f64| -> f64 {
            let mut process = paper_process();
            process.crystal_length_mm = length_mm;
            let grid = uniform_grid(0.8530, 0.8580, 4001);
            let s = spdc_spectrum(&process, &model, &combos, &grid, &SpectrumOptions::default())
                .unwrap();
            let above: Vec<f64> = s
                .samples
                .iter()
                .filter(|(_, v)| *v > 0.5)
                .map(|(w, _)| *w)
                .collect();
            above.last().unwrap() - above.first().unwrap()
        };
        let ratio = fwhm(15.0) / fwhm(30.0);
        assert!((ratio - 2.0).abs() < 0.1, "FWHM ratio {ratio}");
    }

    #[test]
    fn temperature_shift_direction_golden() {
        // Frozen direction for the shipped model: heating moves the
        // fundamental peak to shorter signal wavelengths.
        let model = model();
        let combo = ModeCombo::fundamental();
        let root = |t: f64| {
            let mut process = paper_process();
            process.temperature_c = t;
            solve_phasematch(&process, &model, &combo).unwrap()
        };
        let (r80, r90, r100) = (root(80.0), root(90.0), root(100.0));
        assert!(r90 < r80 && r100 < r90, "roots {r80}, {r90}, {r100}");
    }

    #[test]
    fn spectrum_grid_refinement_pointwise() {
        let model = model();
        let process = paper_process();
        let combos = vec![(ModeCombo::fundamental(), 1.0)];
        let coarse = uniform_grid(0.85, 0.86, 101);
        let fine = uniform_grid(0.85, 0.86, 401);
        let s_coarse =
            spdc_spectrum(&process, &model, &combos, &coarse, &SpectrumOptions::default()).unwrap();
        let s_fine =
            spdc_spectrum(&process, &model, &combos, &fine, &SpectrumOptions::default()).unwrap();
        for (w, v) in &s_coarse.samples {
            if let Some((_, vf)) = s_fine
                .samples
                .iter()
                .find(|(wf, _)| (wf - w).abs() < 1e-12)
            {
                assert_abs_diff_eq!(v, vf, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn spectrum_rejects_empty_combos() {
        let grid = uniform_grid(0.84, 0.87, 11);
        assert!(spdc_spectrum(
            &paper_process(),
            &model(),
            &[],
            &grid,
            &SpectrumOptions::default()
        )
        .is_err());
    }

    #[test]
    fn spectrum_pump_averaging_smooths_but_keeps_peak() {
        let model = model();
        let process = paper_process();
        let combos = vec![(ModeCombo::fundamental(), 1.0)];
        let grid = uniform_grid(0.853, 0.858, 501);
        let sharp =
            spdc_spectrum(&process, &model, &combos, &grid, &SpectrumOptions::default()).unwrap();
        let averaged = spdc_spectrum(
            &process,
            &model,
            &combos,
            &grid,
            &SpectrumOptions {
                pump_fwhm_nm: Some(0.19),
                background: None,
            },
        )
        .unwrap();
        let argmax = |s: &SpdcSpectrum| {
            s.samples
                .iter()
                .cloned()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap()
                .0
        };
        assert!((argmax(&sharp) - argmax(&averaged)).abs() < 2e-4);
    }

    #[test]
    fn background_added_before_normalization() {
        let model = model();
        let process = paper_process();
        let combos = vec![(ModeCombo::fundamental(), 1.0)];
        let grid = uniform_grid(0.84, 0.87, 301);
        let background = vec![(0.80, 0.25), (0.90, 0.25)];
        let s = spdc_spectrum(
            &process,
            &model,
            &combos,
            &grid,
            &SpectrumOptions {
                pump_fwhm_nm: None,
                background: Some(background),
            },
        )
        .unwrap();
        // far from the peak the normalized floor is 0.25 / 1.25
        let floor = s.samples.first().unwrap().1;
        assert_relative_eq!(floor, 0.25 / 1.25, max_relative = 1e-2);
    }

    #[test]
    fn calibration_identity_when_peak_matches() {
        let model = model();
        let process = paper_process();
        let root = solve_phasematch(&process, &model, &ModeCombo::fundamental()).unwrap();
        let dk = phase_mismatch(&process, &model, root, &ModeCombo::fundamental()).unwrap();
        let offsets = calibrate_offset(root, &process, &model).unwrap();
        let shift = offsets[&ModeCombo::fundamental()].signal;
        // residual delta_k at the numeric root bounds the offset
        assert!(shift.abs() <= root * dk.abs() / (2.0 * PI) + 1e-12);
        assert!(shift.abs() < 1e-7);
    }

    #[test]
    fn calibration_reaches_measured_peak() {
        let model = model();
        let mut process = paper_process();
        let offsets = calibrate_offset(0.810, &process, &model).unwrap();
        process.mode_offsets = offsets;
        let root = solve_phasematch(&process, &model, &ModeCombo::fundamental()).unwrap();
        assert_abs_diff_eq!(root, 0.810, epsilon = 1e-6);
    }

    #[test]
    fn calibration_preserves_peak_spacing() {
        let model = model();
        let mut process = paper_process();
        let other = ModeCombo::new("00", "10", "00");
        process.mode_offsets.insert(
            other.clone(),
            ModeOffsets {
                pump: 0.0,
                signal: 0.003,
                idler: 0.0,
            },
        );
        let root_f0 = solve_phasematch(&process, &model, &ModeCombo::fundamental()).unwrap();
        let root_o0 = solve_phasematch(&process, &model, &other).unwrap();
        let spacing_before = root_o0 - root_f0;

        let mut calibrated = process.clone();
        calibrated.mode_offsets = calibrate_offset(0.810, &process, &model).unwrap();
        let root_f1 = solve_phasematch(&calibrated, &model, &ModeCombo::fundamental()).unwrap();
        let root_o1 = solve_phasematch(&calibrated, &model, &other).unwrap();
        let spacing_after = root_o1 - root_f1;

        // spacing preserved to well below 0.1 nm
        assert!(
            (spacing_after - spacing_before).abs() < 1e-4,
            "spacing changed by {} um",
            (spacing_after - spacing_before).abs()
        );
        // and the displaced fundamental sits on the measured peak
        assert_abs_diff_eq!(root_f1, 0.810, epsilon = 1e-6);
    }

    #[test]
    fn calibration_outside_window_errors() {
        let err = calibrate_offset(1.3, &paper_process(), &model()).unwrap_err();
        assert!(matches!(err, Error::Calibration(_)));
    }
}
