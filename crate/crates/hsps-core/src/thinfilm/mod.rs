//! Transfer-matrix evaluation of dielectric layer stacks at normal
//! incidence with real (lossless) indices, conversion of
//! substrate-measured spectra between interface configurations, and
//! numerical thickness optimization.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dispersion::{resolve_material, MaterialIndex};
use crate::error::{Error, Result};

mod optimize;
pub use optimize::{
    optimize_stack, OptimizeConstraints, OptimizeOptions, OptimizeOutcome, TargetKind,
    TransmissionTarget,
};

/// Sanity bound on a single layer thickness, nm.
pub const MAX_LAYER_THICKNESS_NM: f64 = 10_000.0;

/// One dielectric layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub material: MaterialIndex,
    pub thickness_nm: f64,
}

/// An ordered dielectric stack between two semi-infinite media.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterStack {
    pub incident: MaterialIndex,
    pub exit: MaterialIndex,
    pub layers: Vec<Layer>,
    pub design_reference_nm: Option<f64>,
}

impl FilterStack {
    pub fn new(
        incident: MaterialIndex,
        exit: MaterialIndex,
        layers: Vec<Layer>,
    ) -> Result<Self> {
        let stack = Self {
            incident,
            exit,
            layers,
            design_reference_nm: None,
        };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, layer) in self.layers.iter().enumerate() {
            let t = layer.thickness_nm;
            if !(t.is_finite() && t >= 0.0 && t < MAX_LAYER_THICKNESS_NM) {
                return Err(Error::Config(format!(
                    "layer {} thickness {t} nm outside [0, {MAX_LAYER_THICKNESS_NM})",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Stack traversed from the other side (media swapped, layers
    /// reversed).
    pub fn reversed(&self) -> Self {
        Self {
            incident: self.exit.clone(),
            exit: self.incident.clone(),
            layers: self.layers.iter().rev().cloned().collect(),
            design_reference_nm: self.design_reference_nm,
        }
    }

    /// Power transmittance and reflectance at normal incidence.
    ///
    /// Characteristic-matrix product over the layers with phase thickness
    /// `delta_j = 2 pi n_j d_j / lambda`; the exit/incident flux factor is
    /// included, so `T + R = 1` for real indices.
    pub fn transmission(&self, wavelength_nm: f64) -> Result<(f64, f64)> {
        self.validate()?;
        let lam_um = wavelength_nm / 1000.0;
        let n_inc = self.incident.index_at(lam_um)?;
        let n_exit = self.exit.index_at(lam_um)?;

        // For lossless normal incidence the characteristic matrix stays in
        // the form [[a, i b], [i c, d]] with real a, b, c, d.
        let (mut a, mut b, mut c, mut d) = (1.0f64, 0.0f64, 0.0f64, 1.0f64);
        for layer in &self.layers {
            let n = layer.material.index_at(lam_um)?;
            let delta = 2.0 * PI * n * layer.thickness_nm / wavelength_nm;
            let (sin_d, cos_d) = delta.sin_cos();
            let (a2, b2, c2, d2) = (cos_d, sin_d / n, n * sin_d, cos_d);
            let (na, nb, nc, nd) = (
                a * a2 - b * c2,
                a * b2 + b * d2,
                c * a2 + d * c2,
                -c * b2 + d * d2,
            );
            a = na;
            b = nb;
            c = nc;
            d = nd;
        }
        // (B, C) = M (1, n_exit)^T with B = a + i b n_exit, C = d n_exit + i c
        let denom_re = n_inc * a + d * n_exit;
        let denom_im = n_inc * b * n_exit + c;
        let denom_sq = denom_re * denom_re + denom_im * denom_im;
        let num_re = n_inc * a - d * n_exit;
        let num_im = n_inc * b * n_exit - c;
        let reflectance = (num_re * num_re + num_im * num_im) / denom_sq;
        let transmittance = 4.0 * n_inc * n_exit / denom_sq;
        Ok((transmittance, reflectance))
    }

    /// Pointwise [`FilterStack::transmission`] over a wavelength grid.
    pub fn spectrum(&self, grid_nm: &[f64]) -> Result<TransmissionSpectrum> {
        if grid_nm.is_empty() {
            return Err(Error::Config("spectrum grid is empty".into()));
        }
        for pair in grid_nm.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::Config("spectrum grid must be strictly increasing".into()));
            }
        }
        let samples = grid_nm
            .iter()
            .map(|&w| {
                let (t, r) = self.transmission(w)?;
                Ok(SpectrumPoint {
                    wavelength_nm: w,
                    transmittance: t,
                    reflectance: r,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TransmissionSpectrum { samples })
    }

    /// Parse a stack file: `#` comments, `incident <material>`,
    /// `exit <material>`, optional `reference_wavelength_nm <v>`, then one
    /// `material thickness_nm` line per layer. Material names resolve
    /// against the builtin set, `const:<n>`, or `extra`.
    pub fn parse(
        text: &str,
        source_name: &str,
        extra: &BTreeMap<String, MaterialIndex>,
    ) -> Result<Self> {
        let mut incident = None;
        let mut exit = None;
        let mut reference = None;
        let mut layers = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                source_name: source_name.to_string(),
                line: idx + 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(err(format!("expected two fields, got {}", fields.len())));
            }
            match fields[0] {
                "incident" => incident = Some(resolve_material(fields[1], extra)?),
                "exit" => exit = Some(resolve_material(fields[1], extra)?),
                "reference_wavelength_nm" => {
                    reference = Some(
                        fields[1]
                            .parse()
                            .map_err(|_| err(format!("bad number {}", fields[1])))?,
                    );
                }
                material => {
                    let thickness: f64 = fields[1]
                        .parse()
                        .map_err(|_| err(format!("bad number {}", fields[1])))?;
                    layers.push(Layer {
                        material: resolve_material(material, extra)?,
                        thickness_nm: thickness,
                    });
                }
            }
        }
        let mut stack = FilterStack::new(
            incident.ok_or_else(|| Error::Parse {
                source_name: source_name.to_string(),
                line: 0,
                message: "missing incident medium".into(),
            })?,
            exit.ok_or_else(|| Error::Parse {
                source_name: source_name.to_string(),
                line: 0,
                message: "missing exit medium".into(),
            })?,
            layers,
        )?;
        stack.design_reference_nm = reference;
        Ok(stack)
    }

    pub fn from_file(path: &std::path::Path, extra: &BTreeMap<String, MaterialIndex>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string(), extra)
    }

    /// Render in the stack file format.
    pub fn to_file_text(&self, comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(comment) = comment {
            for line in comment.lines() {
                out.push_str("# ");
                out.push_str(line);
                out.push('\n');
            }
        }
        out.push_str(&format!("incident {}\n", self.incident.name()));
        out.push_str(&format!("exit {}\n", self.exit.name()));
        if let Some(reference) = self.design_reference_nm {
            out.push_str(&format!("reference_wavelength_nm {reference}\n"));
        }
        for layer in &self.layers {
            out.push_str(&format!("{} {:.4}\n", layer.material.name(), layer.thickness_nm));
        }
        out
    }
}

/// A sampled (T, R) spectrum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransmissionSpectrum {
    pub samples: Vec<SpectrumPoint>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub wavelength_nm: f64,
    pub transmittance: f64,
    pub reflectance: f64,
}

/// Ideal single-interface power transmission between two media.
pub fn fresnel_transmission(n1: f64, n2: f64) -> f64 {
    4.0 * n1 * n2 / ((n1 + n2) * (n1 + n2))
}

/// Convert a spectrum measured between one pair of media to the spectrum
/// the same stack would show between another pair, by dividing out the
/// measurement configuration's ideal-interface envelope and re-applying
/// the target configuration's (first-order incoherent single-interface
/// approximation; no substrate etalon fringes). T is clipped to [0, 1].
pub fn convert_substrate(
    measured: &TransmissionSpectrum,
    measurement_config: (&MaterialIndex, &MaterialIndex),
    target_config: (&MaterialIndex, &MaterialIndex),
) -> Result<TransmissionSpectrum> {
    let samples = measured
        .samples
        .iter()
        .map(|point| {
            let lam_um = point.wavelength_nm / 1000.0;
            let env_meas = fresnel_transmission(
                measurement_config.0.index_at(lam_um)?,
                measurement_config.1.index_at(lam_um)?,
            );
            if env_meas < 1e-6 {
                return Err(Error::Domain(format!(
                    "measurement envelope {env_meas:.3e} at {} nm is numerically degenerate",
                    point.wavelength_nm
                )));
            }
            let env_target = fresnel_transmission(
                target_config.0.index_at(lam_um)?,
                target_config.1.index_at(lam_um)?,
            );
            let t = (point.transmittance * env_target / env_meas).clamp(0.0, 1.0);
            Ok(SpectrumPoint {
                wavelength_nm: point.wavelength_nm,
                transmittance: t,
                reflectance: 1.0 - t,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransmissionSpectrum { samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{air, glass, sio2, tio2, MaterialIndex};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn constant(name: &str, n: f64) -> MaterialIndex {
        MaterialIndex::constant(name, n).unwrap()
    }

    #[test]
    fn bare_interface_fresnel() {
        let stack = FilterStack::new(air(), glass(), vec![]).unwrap();
        let (t, r) = stack.transmission(810.0).unwrap();
        assert_eq!(t, 0.96);
        assert_abs_diff_eq!(t + r, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn quarter_wave_antireflection() {
        let lam0 = 810.0;
        let n_f = (1.0f64 * 1.5).sqrt();
        let stack = FilterStack::new(
            air(),
            glass(),
            vec![Layer {
                material: constant("ar", n_f),
                thickness_nm: lam0 / (4.0 * n_f),
            }],
        )
        .unwrap();
        let (t, _) = stack.transmission(lam0).unwrap();
        assert_abs_diff_eq!(t, 1.0, epsilon = 1e-9);
    }

    /// Closed-form oracle for an (HL)^N H quarter-wave mirror:
    /// rho = (nH/nL)^(2N) nH^2/(n_inc n_sub), R = ((1-rho)/(1+rho))^2.
    #[test]
    fn quarter_wave_mirror_matches_closed_form() {
        let lam0 = 810.0;
        let (n_h, n_l, n_inc, n_sub) = (2.35, 1.45, 1.0, 1.5);
        let mut layers = Vec::new();
        for _ in 0..8 {
            layers.push(Layer {
                material: constant("h", n_h),
                thickness_nm: lam0 / (4.0 * n_h),
            });
            layers.push(Layer {
                material: constant("l", n_l),
                thickness_nm: lam0 / (4.0 * n_l),
            });
        }
        layers.push(Layer {
            material: constant("h", n_h),
            thickness_nm: lam0 / (4.0 * n_h),
        });
        let stack = FilterStack::new(constant("inc", n_inc), constant("sub", n_sub), layers).unwrap();
        let (_, r) = stack.transmission(lam0).unwrap();
        let rho = (n_h / n_l).powi(16) * n_h * n_h / (n_inc * n_sub);
        let r_closed = ((1.0 - rho) / (1.0 + rho)).powi(2);
        assert_abs_diff_eq!(r, r_closed, epsilon = 1e-6);
    }

    fn random_stack(rng: &mut impl Rng) -> FilterStack {
        let n_layers = rng.gen_range(0..30);
        let layers = (0..n_layers)
            .map(|i| Layer {
                material: constant(&format!("m{i}"), rng.gen_range(1.3..2.7)),
                thickness_nm: rng.gen_range(5.0..3000.0),
            })
            .collect();
        FilterStack::new(
            constant("inc", rng.gen_range(1.0..2.3)),
            constant("exit", rng.gen_range(1.0..2.3)),
            layers,
        )
        .unwrap()
    }

    #[test]
    fn energy_conservation_random_stacks() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(21);
        for _ in 0..100 {
            let stack = random_stack(&mut rng);
            let lam = rng.gen_range(400.0..1700.0);
            let (t, r) = stack.transmission(lam).unwrap();
            assert_abs_diff_eq!(t + r, 1.0, epsilon = 1e-9);
            assert!((0.0..=1.0).contains(&t));
        }
    }

    #[test]
    fn reciprocity() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(22);
        for _ in 0..100 {
            let stack = random_stack(&mut rng);
            let lam = rng.gen_range(400.0..1700.0);
            let (t, _) = stack.transmission(lam).unwrap();
            let (t_rev, _) = stack.reversed().transmission(lam).unwrap();
            assert_abs_diff_eq!(t, t_rev, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_thickness_layer_is_noop() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(23);
        for _ in 0..20 {
            let stack = random_stack(&mut rng);
            let lam = rng.gen_range(400.0..1700.0);
            let (t0, r0) = stack.transmission(lam).unwrap();
            let mut padded = stack.clone();
            let pos = rng.gen_range(0..=padded.layers.len());
            padded.layers.insert(
                pos,
                Layer {
                    material: constant("ghost", 1.9),
                    thickness_nm: 0.0,
                },
            );
            let (t1, r1) = padded.transmission(lam).unwrap();
            assert_abs_diff_eq!(t0, t1, epsilon = 1e-12);
            assert_abs_diff_eq!(r0, r1, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_layers_match_bare_interface() {
        let stack = FilterStack::new(
            constant("m", 1.5),
            constant("m", 1.5),
            vec![Layer {
                material: constant("m", 1.5),
                thickness_nm: 700.0,
            }],
        )
        .unwrap();
        let (t, _) = stack.transmission(810.0).unwrap();
        assert_abs_diff_eq!(t, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn spectrum_grid_refinement_pointwise() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(24);
        let stack = random_stack(&mut rng);
        let coarse: Vec<f64> = (0..51).map(|i| 600.0 + 10.0 * i as f64).collect();
        let fine: Vec<f64> = (0..101).map(|i| 600.0 + 5.0 * i as f64).collect();
        let sc = stack.spectrum(&coarse).unwrap();
        let sf = stack.spectrum(&fine).unwrap();
        for p in &sc.samples {
            let q = sf
                .samples
                .iter()
                .find(|q| (q.wavelength_nm - p.wavelength_nm).abs() < 1e-9)
                .unwrap();
            assert_eq!(p.transmittance.to_bits(), q.transmittance.to_bits());
        }
    }

    #[test]
    fn out_of_table_wavelength_is_range_error() {
        let stack = FilterStack::new(
            air(),
            glass(),
            vec![Layer {
                material: tio2(),
                thickness_nm: 100.0,
            }],
        )
        .unwrap();
        assert!(matches!(
            stack.transmission(300.0),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn convert_identity_and_round_trip() {
        let measured = TransmissionSpectrum {
            samples: vec![
                SpectrumPoint {
                    wavelength_nm: 600.0,
                    transmittance: 0.83,
                    reflectance: 0.17,
                },
                SpectrumPoint {
                    wavelength_nm: 810.0,
                    transmittance: 0.51,
                    reflectance: 0.49,
                },
            ],
        };
        let (a, g) = (air(), glass());
        let identity = convert_substrate(&measured, (&a, &g), (&a, &g)).unwrap();
        for (p, q) in measured.samples.iter().zip(&identity.samples) {
            assert_abs_diff_eq!(p.transmittance, q.transmittance, epsilon = 1e-15);
        }
        let ln = constant("crystal", 2.18);
        let poly = constant("board", 1.48);
        let converted = convert_substrate(&measured, (&a, &g), (&ln, &poly)).unwrap();
        let back = convert_substrate(&converted, (&ln, &poly), (&a, &g)).unwrap();
        for (p, q) in measured.samples.iter().zip(&back.samples) {
            assert_abs_diff_eq!(p.transmittance, q.transmittance, epsilon = 1e-9);
        }
    }

    #[test]
    fn convert_bare_glass_to_index_matched() {
        let measured = TransmissionSpectrum {
            samples: vec![SpectrumPoint {
                wavelength_nm: 810.0,
                transmittance: 0.96,
                reflectance: 0.04,
            }],
        };
        let (a, g) = (air(), glass());
        let matched = constant("matched", 1.0);
        let converted = convert_substrate(&measured, (&a, &g), (&matched, &matched)).unwrap();
        assert_abs_diff_eq!(converted.samples[0].transmittance, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shipped_demo_stack_parses_and_peaks_near_design() {
        let extra = BTreeMap::new();
        let stack = FilterStack::parse(
            crate::data::NARROWBAND_810_STACK,
            "narrowband_810_demo.stack",
            &extra,
        )
        .unwrap();
        assert_eq!(stack.layers.len(), 23);
        assert!(stack.layers.iter().all(|l| l.thickness_nm > 0.0));
        let grid: Vec<f64> = (0..=2000).map(|i| 700.0 + 0.1 * i as f64).collect();
        let spectrum = stack.spectrum(&grid).unwrap();
        let peak = spectrum
            .samples
            .iter()
            .max_by(|a, b| a.transmittance.total_cmp(&b.transmittance))
            .unwrap();
        assert!(
            (peak.wavelength_nm - 810.0).abs() <= 2.0,
            "peak at {} nm",
            peak.wavelength_nm
        );
        assert!(peak.transmittance > 0.9);
    }

    #[test]
    fn stack_file_round_trip() {
        let extra = BTreeMap::new();
        let stack = FilterStack::new(
            sio2(),
            tio2(),
            vec![Layer {
                material: constant("const:1.7", 1.7),
                thickness_nm: 123.4567,
            }],
        )
        .unwrap();
        let text = stack.to_file_text(Some("round trip"));
        let parsed = FilterStack::parse(&text, "round_trip", &extra).unwrap();
        assert_eq!(parsed.layers.len(), 1);
        assert_abs_diff_eq!(parsed.layers[0].thickness_nm, 123.4567, epsilon = 1e-9);
        assert_eq!(parsed.incident.name(), "sio2");
    }
}
