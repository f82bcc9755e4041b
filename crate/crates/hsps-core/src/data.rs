//! Embedded copies of the shipped data files.
//!
//! The same files live under `crates/hsps-core/data/` and are the
//! authoritative, versioned source; these constants let library users and
//! the CLI resolve them without a filesystem path.

/// Temperature-dependent Sellmeier coefficients, LiNbO3 extraordinary axis.
pub const LINBO3_E_SELLMEIER: &str = include_str!("../data/linbo3_ne_jundt1997.sellmeier");

/// TiO2 refractive index table.
pub const TIO2_TABLE: &str = include_str!("../data/tio2_devore1951.table");

/// SiO2 (fused silica) refractive index table.
pub const SIO2_TABLE: &str = include_str!("../data/sio2_malitson1965.table");

/// Idler-arm (1550 nm) module loss budget.
pub const MODULE_1550_BUDGET: &str = include_str!("../data/module_1550.budget");

/// Signal-arm (810 nm) module loss budget.
pub const MODULE_810_BUDGET: &str = include_str!("../data/module_810.budget");

/// Demonstration narrowband transmission filter centered at 810 nm.
pub const NARROWBAND_810_STACK: &str = include_str!("../data/narrowband_810_demo.stack");

/// Look up an embedded asset by its file name.
pub fn builtin_asset(name: &str) -> Option<&'static str> {
    match name {
        "linbo3_ne_jundt1997.sellmeier" => Some(LINBO3_E_SELLMEIER),
        "tio2_devore1951.table" => Some(TIO2_TABLE),
        "sio2_malitson1965.table" => Some(SIO2_TABLE),
        "module_1550.budget" => Some(MODULE_1550_BUDGET),
        "module_810.budget" => Some(MODULE_810_BUDGET),
        "narrowband_810_demo.stack" => Some(NARROWBAND_810_STACK),
        _ => None,
    }
}
