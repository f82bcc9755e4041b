//! Scenario files: one structured TOML document with named sections
//! describing everything a run needs. Parsing is strict; unknown keys
//! abort before any computation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::Deserialize;

use hsps_core::dispersion::{resolve_material, MaterialIndex, SellmeierModel};
use hsps_core::pairsim::{ChannelModel, SourceModel};
use hsps_core::qpm::{ModeCombo, ModeOffsets, QpmProcess};
use hsps_core::tagmetrics::CoincidenceConfig;
use hsps_core::thinfilm::{FilterStack, TargetKind, TransmissionTarget};

/// Parsed scenario plus the raw text it came from (for hashing).
#[derive(Debug)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub hash_hex: String,
    pub base_dir: PathBuf,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Master seed for stochastic operations.
    pub seed: Option<u64>,
    pub dispersion: Option<DispersionSection>,
    pub process: Option<ProcessSection>,
    pub calibration: Option<CalibrationSection>,
    pub spectrum: Option<SpectrumSection>,
    #[serde(default)]
    pub modes: Vec<ModeEntry>,
    #[serde(default)]
    pub coupling: Vec<CouplingEntry>,
    pub budget: Option<BudgetSection>,
    #[serde(default)]
    pub materials: BTreeMap<String, MaterialSpec>,
    pub coating: Option<CoatingSection>,
    pub optimizer: Option<OptimizerSection>,
    pub source: Option<SourceModel>,
    pub channel: Option<ChannelModel>,
    pub coincidence: Option<CoincidenceSection>,
    pub simulate: Option<SimulateSection>,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSection {
    /// `builtin:<asset>` or a file path (relative to the scenario file).
    pub model: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSection {
    pub pump_wavelength_um: f64,
    pub poling_period_um: f64,
    pub crystal_length_mm: f64,
    pub temperature_c: f64,
    #[serde(default)]
    pub mode_combos: Vec<ModeComboEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeComboEntry {
    pub pump: String,
    pub signal: String,
    pub idler: String,
    #[serde(default)]
    pub dn_pump: f64,
    #[serde(default)]
    pub dn_signal: f64,
    #[serde(default)]
    pub dn_idler: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub measured_peak_nm: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub lambda_min_nm: f64,
    pub lambda_max_nm: f64,
    pub points: usize,
    pub pump_fwhm_nm: Option<f64>,
    /// Optional additive background: CSV of `wavelength_nm,intensity`.
    pub background_csv: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub name: String,
    pub mfd_x_um: f64,
    pub mfd_y_um: f64,
    pub wavelength_nm: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingEntry {
    pub a: String,
    pub b: String,
    pub label: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    /// `builtin:<asset>` or file paths.
    pub files: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum MaterialSpec {
    Constant { n: f64 },
    Table { table: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoatingSection {
    /// Stack files to evaluate (`builtin:<asset>` or paths).
    pub stacks: Vec<String>,
    pub lambda_min_nm: f64,
    pub lambda_max_nm: f64,
    pub points: usize,
    pub convert: Option<ConvertSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvertSection {
    pub measured_incident: String,
    pub measured_exit: String,
    pub target_incident: String,
    pub target_exit: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub seed_design: String,
    pub materials: Vec<String>,
    pub max_layers: usize,
    pub thickness_min_nm: f64,
    pub thickness_max_nm: f64,
    #[serde(default)]
    pub restarts: usize,
    /// Mandatory RNG seed for the stochastic restarts.
    pub rng_seed: u64,
    pub targets: Vec<TargetEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetEntry {
    pub wavelength_nm: f64,
    /// `equal`, `at_most` or `at_least`.
    pub kind: String,
    pub value: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoincidenceSection {
    #[serde(default = "default_window")]
    pub window_ps: i64,
    #[serde(default)]
    pub channel_delays_ps: Option<[i64; 3]>,
    pub repetition_time_ps: Option<i64>,
    #[serde(default)]
    pub shifts: Option<Vec<u32>>,
}

fn default_window() -> i64 {
    5000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n_pulses: u64,
    #[serde(default)]
    pub emit_csv: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub n_pulses: u64,
    pub mu: Option<Vec<f64>>,
    pub powers: Option<Vec<f64>>,
    /// Mean pairs per pulse per power unit, for power-labeled sweeps.
    pub kappa: Option<f64>,
}

impl Scenario {
    /// Parse with strict keys from TOML text, after applying overrides.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> anyhow::Result<Self> {
        let mut value: toml::Value = text.parse().context("scenario is not valid TOML")?;
        for (path, raw) in overrides {
            apply_override(&mut value, path, raw)?;
        }
        let scenario: Scenario = value
            .try_into()
            .map_err(|e| anyhow!("scenario rejected: {e}"))?;
        Ok(scenario)
    }
}

/// Apply one `--set section.key=value` override onto the TOML tree.
fn apply_override(root: &mut toml::Value, path: &str, raw: &str) -> anyhow::Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("bad override path {path:?}");
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| anyhow!("override path {path:?} crosses a non-table"))?;
        node = table
            .entry((*part).to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| anyhow!("override path {path:?} crosses a non-table"))?;
    let leaf = parts.last().expect("non-empty");
    let parsed: toml::Value = if let Ok(i) = raw.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = raw.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = raw.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(raw.to_string())
    };
    table.insert((*leaf).to_string(), parsed);
    Ok(())
}

/// Resolve `builtin:<asset>` or a path relative to the scenario file.
pub fn resolve_text(reference: &str, base_dir: &Path) -> anyhow::Result<(String, String)> {
    if let Some(asset) = reference.strip_prefix("builtin:") {
        let text = hsps_core::data::builtin_asset(asset)
            .ok_or_else(|| anyhow!("unknown builtin asset {asset:?}"))?;
        return Ok((text.to_string(), format!("builtin:{asset}")));
    }
    let path = base_dir.join(reference);
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    Ok((text, path.display().to_string()))
}

impl LoadedScenario {
    pub fn dispersion_model(&self) -> anyhow::Result<SellmeierModel> {
        let section = self
            .scenario
            .dispersion
            .as_ref()
            .ok_or_else(|| anyhow!("scenario has no [dispersion] section"))?;
        let (text, name) = resolve_text(&section.model, &self.base_dir)?;
        Ok(SellmeierModel::parse(&text, &name)?)
    }

    pub fn process(&self) -> anyhow::Result<(QpmProcess, Vec<(ModeCombo, f64)>)> {
        let section = self
            .scenario
            .process
            .as_ref()
            .ok_or_else(|| anyhow!("scenario has no [process] section"))?;
        let mut process = QpmProcess::new(
            section.pump_wavelength_um,
            section.poling_period_um,
            section.crystal_length_mm,
            section.temperature_c,
        )?;
        let mut combos = Vec::new();
        for entry in &section.mode_combos {
            let combo = ModeCombo::new(&entry.pump, &entry.signal, &entry.idler);
            process.mode_offsets.insert(
                combo.clone(),
                ModeOffsets {
                    pump: entry.dn_pump,
                    signal: entry.dn_signal,
                    idler: entry.dn_idler,
                },
            );
            combos.push((combo, entry.weight));
        }
        if combos.is_empty() {
            combos.push((ModeCombo::fundamental(), 1.0));
        }
        Ok((process, combos))
    }

    pub fn material_registry(&self) -> anyhow::Result<BTreeMap<String, MaterialIndex>> {
        let mut registry = BTreeMap::new();
        for (name, spec) in &self.scenario.materials {
            let material = match spec {
                MaterialSpec::Constant { n } => MaterialIndex::constant(name.clone(), *n)?,
                MaterialSpec::Table { table } => {
                    let (text, source) = resolve_text(table, &self.base_dir)?;
                    MaterialIndex::parse_table(&text, name.clone(), &source)?
                }
            };
            registry.insert(name.clone(), material);
        }
        Ok(registry)
    }

    pub fn material(&self, name: &str) -> anyhow::Result<MaterialIndex> {
        let registry = self.material_registry()?;
        Ok(resolve_material(name, &registry)?)
    }

    pub fn stack(&self, reference: &str) -> anyhow::Result<(FilterStack, String)> {
        let registry = self.material_registry()?;
        let (text, name) = resolve_text(reference, &self.base_dir)?;
        Ok((FilterStack::parse(&text, &name, &registry)?, name))
    }

    pub fn coincidence_config(&self) -> anyhow::Result<CoincidenceConfig> {
        let repetition_from_source = self
            .scenario
            .source
            .as_ref()
            .map(|s| s.repetition_time_ps().round() as i64);
        let section = self.scenario.coincidence.as_ref();
        let repetition_time_ps = section
            .and_then(|s| s.repetition_time_ps)
            .or(repetition_from_source)
            .ok_or_else(|| {
                anyhow!("no repetition period: set [coincidence].repetition_time_ps or [source]")
            })?;
        let mut config = CoincidenceConfig::for_repetition(repetition_time_ps);
        if let Some(section) = section {
            config.window_ps = section.window_ps;
            if let Some(delays) = section.channel_delays_ps {
                config.channel_delays_ps = delays;
            }
            if let Some(shifts) = &section.shifts {
                config.shifts = shifts.clone();
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn optimizer_targets(&self) -> anyhow::Result<Vec<TransmissionTarget>> {
        let section = self
            .scenario
            .optimizer
            .as_ref()
            .ok_or_else(|| anyhow!("scenario has no [optimizer] section"))?;
        section
            .targets
            .iter()
            .map(|t| {
                let kind = match t.kind.as_str() {
                    "equal" => TargetKind::Equal,
                    "at_most" => TargetKind::AtMost,
                    "at_least" => TargetKind::AtLeast,
                    other => bail!("unknown target kind {other:?} (use equal/at_most/at_least)"),
                };
                Ok(TransmissionTarget {
                    wavelength_nm: t.wavelength_nm,
                    kind,
                    value: t.value,
                    weight: t.weight,
                })
            })
            .collect()
    }

    /// Master seed; mandatory for stochastic operations.
    pub fn require_seed(&self) -> anyhow::Result<u64> {
        self.scenario
            .seed
            .ok_or_else(|| anyhow!("a master seed is required: set `seed` or pass --seed"))
    }
}
