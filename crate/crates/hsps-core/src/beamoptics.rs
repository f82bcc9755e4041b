//! Gaussian mode-overlap coupling efficiencies and dB loss budgets.
//!
//! Modes are aligned, centered elliptical Gaussians characterized by the
//! two 1/e^2 intensity mode-field diameters; transverse misalignment and
//! tilt are not modeled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An elliptical Gaussian mode field (1/e^2 intensity diameters, um).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMode {
    pub mfd_x_um: f64,
    pub mfd_y_um: f64,
}

impl GaussianMode {
    pub fn new(mfd_x_um: f64, mfd_y_um: f64) -> Result<Self> {
        if !(mfd_x_um.is_finite() && mfd_x_um > 0.0 && mfd_y_um.is_finite() && mfd_y_um > 0.0) {
            return Err(Error::Config(format!(
                "mode-field diameters must be positive, got {mfd_x_um} x {mfd_y_um}"
            )));
        }
        Ok(Self { mfd_x_um, mfd_y_um })
    }

    pub fn circular(mfd_um: f64) -> Result<Self> {
        Self::new(mfd_um, mfd_um)
    }
}

/// Power coupling between two aligned elliptical Gaussian modes:
/// `eta = 4 / [(wax/wbx + wbx/wax) * (way/wby + wby/way)]`,
/// the closed form of the normalized squared amplitude-overlap integral.
/// Symmetric in its arguments; 1 exactly for identical modes.
pub fn overlap_efficiency(a: &GaussianMode, b: &GaussianMode) -> f64 {
    let rx = a.mfd_x_um / b.mfd_x_um + b.mfd_x_um / a.mfd_x_um;
    let ry = a.mfd_y_um / b.mfd_y_um + b.mfd_y_um / a.mfd_y_um;
    4.0 / (rx * ry)
}

/// Power efficiency to loss in dB, `-10 log10(eta)`.
pub fn efficiency_to_db(efficiency: f64) -> Result<f64> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::Domain(format!(
            "efficiency {efficiency} outside (0, 1]"
        )));
    }
    Ok(-10.0 * efficiency.log10())
}

/// Loss in dB back to power efficiency.
pub fn db_to_efficiency(loss_db: f64) -> Result<f64> {
    if !(loss_db >= 0.0) {
        return Err(Error::Domain(format!("loss {loss_db} dB must be non-negative")));
    }
    Ok(10f64.powf(-loss_db / 10.0))
}

/// One labeled loss contribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossEntry {
    pub label: String,
    pub loss_db: f64,
}

/// An ordered list of non-negative dB losses along one optical path.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub wavelength_nm: Option<f64>,
    pub entries: Vec<LossEntry>,
}

impl LossBudget {
    pub fn push(&mut self, label: impl Into<String>, loss_db: f64) -> Result<()> {
        if !(loss_db.is_finite() && loss_db >= 0.0) {
            return Err(Error::Config(format!("loss must be non-negative dB, got {loss_db}")));
        }
        self.entries.push(LossEntry {
            label: label.into(),
            loss_db,
        });
        Ok(())
    }

    /// Sum of all entries, dB.
    pub fn total_db(&self) -> f64 {
        self.entries.iter().map(|e| e.loss_db).sum()
    }

    /// Linear power transmission of the whole path.
    pub fn transmission(&self) -> f64 {
        10f64.powf(-self.total_db() / 10.0)
    }

    /// Parse a budget file: `#` comments, an optional `wavelength_nm <v>`
    /// line, and one `label loss_dB` pair per line.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut budget = LossBudget::default();
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
                return Err(err(format!("expected `label loss_dB`, got {} fields", fields.len())));
            }
            let value: f64 = fields[1]
                .parse()
                .map_err(|_| err(format!("bad number {}", fields[1])))?;
            if fields[0] == "wavelength_nm" {
                budget.wavelength_nm = Some(value);
            } else {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(err(format!("loss must be non-negative dB, got {value}")));
                }
                budget.entries.push(LossEntry {
                    label: fields[0].to_string(),
                    loss_db: value,
                });
            }
        }
        Ok(budget)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }
}
