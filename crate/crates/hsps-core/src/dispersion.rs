//! Refractive-index models: temperature-dependent Sellmeier forms and
//! named material indices (constants, models, tabulated data).
//!
//! Coefficients are shipped as structured text files, one named
//! coefficient per line, with the source citation and validity ranges in
//! the header (see `data/linbo3_ne_jundt1997.sellmeier`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Central-difference step for [`SellmeierModel::group_index`], in um.
/// Chosen to balance truncation against double-precision rounding.
pub const GROUP_INDEX_STEP_UM: f64 = 1e-4;

/// Functional form of a Sellmeier coefficient set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SellmeierForm {
    /// Wavelength- and temperature-independent index; coefficient `n`.
    Constant,
    /// Two-pole temperature-dependent form
    /// `n^2 = a1 + b1 f + (a2 + b2 f)/(l^2 - (a3 + b3 f)^2)
    ///      + (a4 + b4 f)/(l^2 - a5^2) - a6 l^2`,
    /// `f = (T - t_ref)(T + t_offset)`, wavelength in um, T in deg C.
    ThermalTwoPole,
}

/// A named, range-validated refractive-index model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SellmeierModel {
    name: String,
    form: SellmeierForm,
    coefficients: BTreeMap<String, f64>,
    wavelength_range_um: (f64, f64),
    temperature_range_c: (f64, f64),
}

const THERMAL_TWO_POLE_KEYS: &[&str] = &[
    "a1", "a2", "a3", "a4", "a5", "a6", "b1", "b2", "b3", "b4", "t_ref", "t_offset",
];

impl SellmeierModel {
    pub fn new(
        name: impl Into<String>,
        form: SellmeierForm,
        coefficients: BTreeMap<String, f64>,
        wavelength_range_um: (f64, f64),
        temperature_range_c: (f64, f64),
    ) -> Result<Self> {
        let required: &[&str] = match form {
            SellmeierForm::Constant => &["n"],
            SellmeierForm::ThermalTwoPole => THERMAL_TWO_POLE_KEYS,
        };
        for key in required {
            match coefficients.get(*key) {
                Some(v) if v.is_finite() => {}
                Some(_) => {
                    return Err(Error::Config(format!("coefficient {key} is not finite")));
                }
                None => {
                    return Err(Error::Config(format!("missing coefficient {key}")));
                }
            }
        }
        if wavelength_range_um.0 <= 0.0 || wavelength_range_um.1 <= wavelength_range_um.0 {
            return Err(Error::Config("invalid wavelength range".into()));
        }
        if temperature_range_c.1 <= temperature_range_c.0 {
            return Err(Error::Config("invalid temperature range".into()));
        }
        Ok(Self {
            name: name.into(),
            form,
            coefficients,
            wavelength_range_um,
            temperature_range_c,
        })
    }

    /// A wavelength- and temperature-independent model, mostly for tests
    /// and degenerate configurations.
    pub fn constant(name: impl Into<String>, n: f64) -> Self {
        let mut coefficients = BTreeMap::new();
        coefficients.insert("n".to_string(), n);
        Self {
            name: name.into(),
            form: SellmeierForm::Constant,
            coefficients,
            wavelength_range_um: (f64::MIN_POSITIVE, f64::MAX),
            temperature_range_c: (f64::MIN, f64::MAX),
        }
    }

    /// The shipped extraordinary-axis model for congruent lithium niobate.
    pub fn builtin_linbo3_e() -> Self {
        Self::parse(crate::data::LINBO3_E_SELLMEIER, "linbo3_ne_jundt1997.sellmeier")
            .expect("embedded Sellmeier file is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn wavelength_range_um(&self) -> (f64, f64) {
        self.wavelength_range_um
    }

    pub fn temperature_range_c(&self) -> (f64, f64) {
        self.temperature_range_c
    }

    fn check_ranges(&self, wavelength_um: f64, temperature_c: f64) -> Result<()> {
        let (wl, wh) = self.wavelength_range_um;
        if !(wavelength_um >= wl && wavelength_um <= wh) {
            return Err(Error::out_of_range("wavelength", wavelength_um, (wl, wh), "um"));
        }
        let (tl, th) = self.temperature_range_c;
        if !(temperature_c >= tl && temperature_c <= th) {
            return Err(Error::out_of_range(
                "temperature",
                temperature_c,
                (tl, th),
                "degC",
            ));
        }
        Ok(())
    }

    fn coeff(&self, key: &str) -> f64 {
        self.coefficients[key]
    }

    /// n(wavelength, temperature). Pure; errors name the violated bound.
    pub fn refractive_index(&self, wavelength_um: f64, temperature_c: f64) -> Result<f64> {
        self.check_ranges(wavelength_um, temperature_c)?;
        let n = match self.form {
            SellmeierForm::Constant => self.coeff("n"),
            SellmeierForm::ThermalTwoPole => {
                let f = (temperature_c - self.coeff("t_ref")) * (temperature_c + self.coeff("t_offset"));
                let l2 = wavelength_um * wavelength_um;
                let pole1 = self.coeff("a3") + self.coeff("b3") * f;
                let n2 = self.coeff("a1")
                    + self.coeff("b1") * f
                    + (self.coeff("a2") + self.coeff("b2") * f) / (l2 - pole1 * pole1)
                    + (self.coeff("a4") + self.coeff("b4") * f)
                        / (l2 - self.coeff("a5") * self.coeff("a5"))
                    - self.coeff("a6") * l2;
                if n2 <= 0.0 {
                    return Err(Error::Domain(format!(
                        "n^2 = {n2} not positive at {wavelength_um} um, {temperature_c} degC"
                    )));
                }
                n2.sqrt()
            }
        };
        if !n.is_finite() {
            return Err(Error::Domain(format!(
                "refractive index not finite at {wavelength_um} um, {temperature_c} degC"
            )));
        }
        Ok(n)
    }

    /// Group index n_g = n - wavelength * dn/dwavelength, by central
    /// difference with step [`GROUP_INDEX_STEP_UM`]. The wavelength must
    /// sit at least one step inside the valid range.
    pub fn group_index(&self, wavelength_um: f64, temperature_c: f64) -> Result<f64> {
        let h = GROUP_INDEX_STEP_UM;
        let (wl, wh) = self.wavelength_range_um;
        let inner = (
            if wl == f64::MIN_POSITIVE { wl } else { wl + h },
            if wh == f64::MAX { wh } else { wh - h },
        );
        if !(wavelength_um >= inner.0 && wavelength_um <= inner.1) {
            return Err(Error::out_of_range(
                "wavelength (group-index derivative neighborhood)",
                wavelength_um,
                inner,
                "um",
            ));
        }
        let n = self.refractive_index(wavelength_um, temperature_c)?;
        let n_plus = self.refractive_index(wavelength_um + h, temperature_c)?;
        let n_minus = self.refractive_index(wavelength_um - h, temperature_c)?;
        Ok(n - wavelength_um * (n_plus - n_minus) / (2.0 * h))
    }

    /// Parse a coefficient file: `#` comments, then `key value` lines with
    /// `name`, `form`, `valid_wavelength_um lo hi`, `valid_temperature_c lo hi`
    /// and one line per named coefficient.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut name = None;
        let mut form = None;
        let mut wavelength_range = None;
        let mut temperature_range = None;
        let mut coefficients = BTreeMap::new();

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
            let mut fields = line.split_whitespace();
            let key = fields.next().expect("non-empty line");
            let rest: Vec<&str> = fields.collect();
            match key {
                "name" => {
                    name = Some(
                        rest.first()
                            .ok_or_else(|| err("missing model name".into()))?
                            .to_string(),
                    );
                }
                "form" => {
                    form = Some(match rest.first().copied() {
                        Some("constant") => SellmeierForm::Constant,
                        Some("thermal_two_pole") => SellmeierForm::ThermalTwoPole,
                        other => {
                            return Err(err(format!("unknown form {other:?}")));
                        }
                    });
                }
                "valid_wavelength_um" | "valid_temperature_c" => {
                    if rest.len() != 2 {
                        return Err(err(format!("{key} expects two values")));
                    }
                    let lo: f64 = rest[0]
                        .parse()
                        .map_err(|_| err(format!("bad number {}", rest[0])))?;
                    let hi: f64 = rest[1]
                        .parse()
                        .map_err(|_| err(format!("bad number {}", rest[1])))?;
                    if key == "valid_wavelength_um" {
                        wavelength_range = Some((lo, hi));
                    } else {
                        temperature_range = Some((lo, hi));
                    }
                }
                _ => {
                    if rest.len() != 1 {
                        return Err(err(format!("coefficient {key} expects one value")));
                    }
                    let value: f64 = rest[0]
                        .parse()
                        .map_err(|_| err(format!("bad number {}", rest[0])))?;
                    coefficients.insert(key.to_string(), value);
                }
            }
        }

        let missing = |what: &str| Error::Parse {
            source_name: source_name.to_string(),
            line: 0,
            message: format!("missing {what}"),
        };
        Self::new(
            name.ok_or_else(|| missing("name"))?,
            form.ok_or_else(|| missing("form"))?,
            coefficients,
            wavelength_range.ok_or_else(|| missing("valid_wavelength_um"))?,
            temperature_range.ok_or_else(|| missing("valid_temperature_c"))?,
        )
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// A named material index: a constant, a Sellmeier model evaluated at a
/// fixed temperature, or a tabulated (wavelength, n) list with linear
/// (monotone-preserving) interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialIndex {
    name: String,
    model: IndexModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum IndexModel {
    Constant(f64),
    Sellmeier {
        model: SellmeierModel,
        temperature_c: f64,
    },
    Table(Vec<(f64, f64)>),
}

impl MaterialIndex {
    pub fn constant(name: impl Into<String>, n: f64) -> Result<Self> {
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Config(format!("constant index must be positive, got {n}")));
        }
        Ok(Self {
            name: name.into(),
            model: IndexModel::Constant(n),
        })
    }

    pub fn from_sellmeier(model: SellmeierModel, temperature_c: f64) -> Self {
        Self {
            name: model.name().to_string(),
            model: IndexModel::Sellmeier { model, temperature_c },
        }
    }

    pub fn from_table(name: impl Into<String>, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Config("index table needs at least two points".into()));
        }
        for pair in points.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::Config(
                    "index table wavelengths must be strictly increasing".into(),
                ));
            }
        }
        if points.iter().any(|(_, n)| !n.is_finite() || *n <= 0.0) {
            return Err(Error::Config("index table values must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            model: IndexModel::Table(points),
        })
    }

    /// Parse a two-column `wavelength_um n` table with `#` comments.
    pub fn parse_table(text: &str, name: impl Into<String>, source_name: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    source_name: source_name.to_string(),
                    line: idx + 1,
                    message: format!("expected two columns, got {}", fields.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Parse {
                    source_name: source_name.to_string(),
                    line: idx + 1,
                    message: format!("bad number {s}"),
                })
            };
            points.push((parse(fields[0])?, parse(fields[1])?));
        }
        Self::from_table(name, points)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// n at `wavelength_um`; queries outside a table range are errors.
    pub fn index_at(&self, wavelength_um: f64) -> Result<f64> {
        match &self.model {
            IndexModel::Constant(n) => Ok(*n),
            IndexModel::Sellmeier { model, temperature_c } => {
                model.refractive_index(wavelength_um, *temperature_c)
            }
            IndexModel::Table(points) => {
                let first = points.first().expect("validated");
                let last = points.last().expect("validated");
                if wavelength_um < first.0 || wavelength_um > last.0 {
                    return Err(Error::out_of_range(
                        format!("wavelength for material {}", self.name),
                        wavelength_um,
                        (first.0, last.0),
                        "um",
                    ));
                }
                let pos = points.partition_point(|(w, _)| *w <= wavelength_um);
                if pos == 0 {
                    return Ok(first.1);
                }
                if pos == points.len() {
                    return Ok(last.1);
                }
                let (w0, n0) = points[pos - 1];
                let (w1, n1) = points[pos];
                let t = (wavelength_um - w0) / (w1 - w0);
                Ok(n0 + t * (n1 - n0))
            }
        }
    }
}

/// Vacuum/air, n = 1.
pub fn air() -> MaterialIndex {
    MaterialIndex::constant("air", 1.0).expect("valid")
}

/// Generic measurement glass, n = 1.5.
pub fn glass() -> MaterialIndex {
    MaterialIndex::constant("glass", 1.5).expect("valid")
}

/// Polymer board waveguide material, nominal n = 1.48.
pub fn polymer() -> MaterialIndex {
    MaterialIndex::constant("polymer", 1.48).expect("valid")
}

/// TiO2 from the shipped table.
pub fn tio2() -> MaterialIndex {
    MaterialIndex::parse_table(crate::data::TIO2_TABLE, "tio2", "tio2_devore1951.table")
        .expect("embedded table is valid")
}

/// SiO2 (fused silica) from the shipped table.
pub fn sio2() -> MaterialIndex {
    MaterialIndex::parse_table(crate::data::SIO2_TABLE, "sio2", "sio2_malitson1965.table")
        .expect("embedded table is valid")
}

/// Resolve a material by name: builtin names, `const:<n>`, or an entry of
/// `extra`.
pub fn resolve_material(
    name: &str,
    extra: &BTreeMap<String, MaterialIndex>,
) -> Result<MaterialIndex> {
    if let Some(found) = extra.get(name) {
        return Ok(found.clone());
    }
    if let Some(value) = name.strip_prefix("const:") {
        let n: f64 = value
            .parse()
            .map_err(|_| Error::Config(format!("bad constant index {value}")))?;
        return MaterialIndex::constant(name, n);
    }
    match name {
        "air" => Ok(air()),
        "glass" => Ok(glass()),
        "polymer" => Ok(polymer()),
        "tio2" => Ok(tio2()),
        "sio2" => Ok(sio2()),
        other => Err(Error::Config(format!("unknown material {other}"))),
    }
}
