//! Scenario files: a TOML description of the source plus scan grids.
//!
//! ```toml
//! schema_version = 1
//!
//! [crystal]
//! material = "KTP"
//! pump_nm = 532.0
//! signal_nm = 810.0
//! temperature_c = 111.0
//! length_mm = 4.5
//! # poling_period_um = 9.6     # solved from the wavelengths when absent
//! # x_axis = "X"               # axis seen by the H pair
//! # z_axis = "Z"               # axis seen by the V pair
//! # axes = { pump = "Z", signal = "Z", idler = "Z" }
//!
//! [filters.idler]              # optional; [filters.signal] likewise
//! fwhm_nm = 10.0
//! # center_nm = 1550.08        # defaults to the arm wavelength
//!
//! [plate]                      # optional
//! material = "calcite"
//! # thickness_mm = 0.86        # solved for full compensation when absent
//! # arm = "idler"
//! # temperature_c = 20.0
//!
//! [integration]                # optional
//! half_width_sigmas = 8.0
//! tolerance = 1e-6
//!
//! [scan]                       # grids: a list or { start, stop, count }
//! lengths_mm = { start = 0.0, stop = 200.0, count = 201 }
//! # thicknesses_mm = [0.8, 0.9]
//!
//! [spectrum]                   # optional, used by `pm`
//! signal_nm = { start = 805.0, stop = 815.0, count = 401 }
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::coherence::{
    solve_plate_thickness, Arm, FilterSpec, IntegrationControl, PlateSpec, SourceConfig,
};
use crate::error::{Error, Result};
use crate::materials::{Axis, MaterialRegistry};
use crate::phasematch::{solve_poling_period_for, InteractionAxes, QpmConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Scenario files shipped with the crate, by file name.
pub const BUNDLED_SCENARIOS: &[(&str, &str)] = &[
    ("length_scan_ktp.cfg", include_str!("../scenarios/length_scan_ktp.cfg")),
    ("length_scan_ln.cfg", include_str!("../scenarios/length_scan_ln.cfg")),
    ("compensation_map.cfg", include_str!("../scenarios/compensation_map.cfg")),
    (
        "single_point.cfg",
        include_str!("../scenarios/single_point.cfg"),
    ),
];

/// Either explicit values or `count` evenly spaced points from `start` to
/// `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let values = match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => {
                    let step = (stop - start) / (*n - 1) as f64;
                    (0..*n)
                        .map(|k| {
                            if k == n - 1 {
                                *stop
                            } else {
                                start + step * k as f64
                            }
                        })
                        .collect()
                }
            },
        };
        if values.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!("grid value {v} is not finite")));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSection {
    pub material: String,
    pub pump_nm: f64,
    pub signal_nm: f64,
    pub temperature_c: f64,
    pub length_mm: f64,
    #[serde(default)]
    pub poling_period_um: Option<f64>,
    #[serde(default = "default_x")]
    pub x_axis: Axis,
    #[serde(default = "default_z")]
    pub z_axis: Axis,
    #[serde(default)]
    pub axes: InteractionAxes,
}

fn default_x() -> Axis {
    Axis::X
}

fn default_z() -> Axis {
    Axis::Z
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub fwhm_nm: f64,
    #[serde(default)]
    pub center_nm: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiltersSection {
    #[serde(default)]
    pub signal: Option<FilterSection>,
    #[serde(default)]
    pub idler: Option<FilterSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateSection {
    pub material: String,
    #[serde(default)]
    pub thickness_mm: Option<f64>,
    #[serde(default = "default_arm")]
    pub arm: Arm,
    #[serde(default = "default_plate_temperature")]
    pub temperature_c: f64,
}

fn default_arm() -> Arm {
    Arm::Idler
}

fn default_plate_temperature() -> f64 {
    20.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(default)]
    pub lengths_mm: Option<Grid>,
    #[serde(default)]
    pub thicknesses_mm: Option<Grid>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub signal_nm: Grid,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub crystal: CrystalSection,
    #[serde(default)]
    pub filters: FiltersSection,
    #[serde(default)]
    pub plate: Option<PlateSection>,
    #[serde(default)]
    pub integration: IntegrationControl,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub spectrum: Option<SpectrumSection>,
}

impl Scenario {
    pub fn from_toml_str(text: &str, context: &str) -> Result<Self> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| Error::parse(context, e.to_string().trim_end()))?;
        if scenario.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "{context}: unsupported schema_version {} (expected {SCHEMA_VERSION})",
                scenario.schema_version
            )));
        }
        Ok(scenario)
    }

    /// Reads a scenario file. A path that does not exist but matches the
    /// name of a bundled scenario loads the bundled copy.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            if let Some((name, text)) = BUNDLED_SCENARIOS
                .iter()
                .find(|(name, _)| Path::new(name) == path)
            {
                return Self::from_toml_str(text, name);
            }
        }
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Crystal configuration with the poling period filled in.
    pub fn qpm_config(&self, registry: &MaterialRegistry) -> Result<QpmConfig> {
        let c = &self.crystal;
        let mut config = QpmConfig::new(
            &c.material,
            c.pump_nm,
            c.signal_nm,
            c.poling_period_um.unwrap_or(f64::INFINITY),
            c.length_mm,
            c.temperature_c,
        )?;
        config.axes = c.axes;
        if c.poling_period_um.is_none() {
            config.poling_period_um = solve_poling_period_for(registry, &config)?;
        }
        Ok(config)
    }

    /// Full source configuration. A plate without a thickness is given the
    /// compensating thickness for the configured crystal length.
    pub fn source_config(&self, registry: &MaterialRegistry) -> Result<SourceConfig> {
        let crystal = self.qpm_config(registry)?;
        let filter = |section: &Option<FilterSection>, default_center: f64| {
            section.as_ref().map(|f| FilterSpec {
                center_nm: f.center_nm.unwrap_or(default_center),
                fwhm_nm: f.fwhm_nm,
            })
        };
        let mut config = SourceConfig::new(crystal);
        config.x_axis = self.crystal.x_axis;
        config.z_axis = self.crystal.z_axis;
        config.signal_filter = filter(&self.filters.signal, config.crystal.signal_nm);
        config.idler_filter = filter(&self.filters.idler, config.crystal.idler_nm);
        config.control = self.integration;
        if let Some(p) = &self.plate {
            config.plate = Some(PlateSpec {
                material: p.material.clone(),
                thickness_mm: p.thickness_mm.unwrap_or(0.0),
                arm: p.arm,
                temperature_c: p.temperature_c,
            });
            if p.thickness_mm.is_none() {
                let d = solve_plate_thickness(registry, &config)?;
                config = config.with_thickness(d)?;
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Crystal lengths to scan; the configured length when no grid is given.
    pub fn lengths(&self) -> Result<Vec<f64>> {
        match &self.scan.lengths_mm {
            Some(g) => g
                .values()
                .map_err(|e| Error::Config(format!("scan.lengths_mm: {e}"))),
            None => Ok(vec![self.crystal.length_mm]),
        }
    }

    pub fn thicknesses(&self) -> Result<Option<Vec<f64>>> {
        self.scan
            .thicknesses_mm
            .as_ref()
            .map(|g| {
                g.values()
                    .map_err(|e| Error::Config(format!("scan.thicknesses_mm: {e}")))
            })
            .transpose()
    }

    pub fn spectrum_grid(&self) -> Result<Option<Vec<f64>>> {
        self.spectrum
            .as_ref()
            .map(|s| {
                s.signal_nm
                    .values()
                    .map_err(|e| Error::Config(format!("spectrum.signal_nm: {e}")))
            })
            .transpose()
    }
}
