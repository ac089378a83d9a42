//! Principal-axis dispersion models and the registry that holds them.
//!
//! Every model maps a vacuum wavelength (µm) and a temperature (°C) to a
//! refractive index. The group index `n − λ dn/dλ` is evaluated from the
//! analytic derivative of the selected functional form, never by finite
//! differences.
//!
//! Models are loaded from a TOML document; see `data/materials.toml` for the
//! bundled set and the coefficient layout of each form.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Bound, Error, Result};

/// Bundled dispersion data, compiled into the library.
pub const BUNDLED_MATERIALS: &str = include_str!("../data/materials.toml");

const SCHEMA_VERSION: u32 = 1;

/// Principal optical axis (biaxial crystals) or ordinary/extraordinary
/// polarization (uniaxial crystals).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
    #[serde(rename = "o", alias = "ordinary")]
    Ordinary,
    #[serde(rename = "e", alias = "extraordinary")]
    Extraordinary,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
            Axis::Ordinary => "o",
            Axis::Extraordinary => "e",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" | "x" => Ok(Axis::X),
            "Y" | "y" => Ok(Axis::Y),
            "Z" | "z" => Ok(Axis::Z),
            "o" | "ordinary" => Ok(Axis::Ordinary),
            "e" | "extraordinary" => Ok(Axis::Extraordinary),
            other => Err(Error::parse("axis", format!("unknown axis {other:?}"))),
        }
    }
}

/// Functional form tag of a dispersion model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DispersionForm {
    /// `n = c0`
    Constant,
    /// `n² = A + Σ B_k λ²/(λ² − C_k) − D λ²`, coefficients `[A, D, B1, C1, ...]`
    Sellmeier,
    /// `n² = A + Σ B_k/(λ² − C_k) − D λ²`, coefficients `[A, D, B1, C1, ...]`
    Pole,
    /// `n = Σ a_k λ^(−2k)`
    Cauchy,
    /// Temperature-parametric extended Sellmeier with
    /// `f = (T − t0)(T + t1)`, coefficients `[a1..a6, b1..b4, t0, t1]`.
    Jundt,
}

impl DispersionForm {
    fn check_coefficients(self, c: &[f64]) -> std::result::Result<(), String> {
        let ok = match self {
            DispersionForm::Constant => c.len() == 1,
            DispersionForm::Sellmeier | DispersionForm::Pole => {
                c.len() >= 2 && c.len().is_multiple_of(2)
            }
            DispersionForm::Cauchy => !c.is_empty(),
            DispersionForm::Jundt => c.len() == 12,
        };
        if ok {
            Ok(())
        } else {
            Err(format!(
                "form {self:?} does not accept {} coefficients",
                c.len()
            ))
        }
    }
}

fn default_reference_temperature() -> f64 {
    25.0
}

/// One dispersion model for one (material, axis) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SellmeierModel {
    pub material: String,
    pub axis: Axis,
    pub form: DispersionForm,
    pub coefficients: Vec<f64>,
    /// Coefficients of `dn/dT = Σ t_k λ^(−k)` in 1/°C.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal_coefficients: Option<Vec<f64>>,
    #[serde(default = "default_reference_temperature")]
    pub reference_temperature: f64,
    /// Valid vacuum wavelengths, µm.
    pub wavelength_range: [f64; 2],
    /// Valid temperatures, °C.
    pub temperature_range: [f64; 2],
    /// Wavelength interval over which `n` decreases monotonically.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_dispersion_range: Option<[f64; 2]>,
    #[serde(default)]
    pub source: String,
}

impl SellmeierModel {
    /// A wavelength-independent model valid over all practical wavelengths
    /// and temperatures.
    pub fn constant(material: &str, axis: Axis, index: f64) -> Self {
        Self {
            material: material.to_string(),
            axis,
            form: DispersionForm::Constant,
            coefficients: vec![index],
            thermal_coefficients: None,
            reference_temperature: default_reference_temperature(),
            wavelength_range: [0.01, 100.0],
            temperature_range: [-273.15, 1000.0],
            normal_dispersion_range: None,
            source: "synthetic constant index".to_string(),
        }
    }

    /// Vacuum, `n = 1`.
    pub fn vacuum(axis: Axis) -> Self {
        Self::constant("vacuum", axis, 1.0)
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.material, self.axis)
    }

    /// Checks the model's internal consistency (coefficient count, ranges).
    pub fn validate(&self) -> std::result::Result<(), String> {
        self.form.check_coefficients(&self.coefficients)?;
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err("coefficients must be finite".into());
        }
        if let Some(t) = &self.thermal_coefficients {
            if self.form == DispersionForm::Jundt {
                return Err("thermal_coefficients cannot be combined with the jundt form".into());
            }
            if t.is_empty() || t.iter().any(|c| !c.is_finite()) {
                return Err(
                    "thermal_coefficients must be a non-empty list of finite numbers".into(),
                );
            }
        }
        let [lo, hi] = self.wavelength_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(format!("invalid wavelength_range [{lo}, {hi}]"));
        }
        let [tlo, thi] = self.temperature_range;
        if !(thi > tlo && tlo.is_finite() && thi.is_finite()) {
            return Err(format!("invalid temperature_range [{tlo}, {thi}]"));
        }
        if let Some([a, b]) = self.normal_dispersion_range {
            if !(a >= lo && b <= hi && b > a) {
                return Err(format!(
                    "normal_dispersion_range [{a}, {b}] must lie inside wavelength_range"
                ));
            }
        }
        if !self.reference_temperature.is_finite() {
            return Err("reference_temperature must be finite".into());
        }
        Ok(())
    }

    fn check_range(&self, wavelength_um: f64, temperature_c: f64) -> Result<()> {
        let range_error = |quantity, value, bound, limit| Error::OutOfRange {
            model: self.label(),
            quantity,
            value,
            bound,
            limit,
        };
        let [lo, hi] = self.wavelength_range;
        if !(wavelength_um >= lo) {
            return Err(range_error(
                "wavelength [um]",
                wavelength_um,
                Bound::Lower,
                lo,
            ));
        }
        if !(wavelength_um <= hi) {
            return Err(range_error(
                "wavelength [um]",
                wavelength_um,
                Bound::Upper,
                hi,
            ));
        }
        let [tlo, thi] = self.temperature_range;
        if !(temperature_c >= tlo) {
            return Err(range_error(
                "temperature [C]",
                temperature_c,
                Bound::Lower,
                tlo,
            ));
        }
        if !(temperature_c <= thi) {
            return Err(range_error(
                "temperature [C]",
                temperature_c,
                Bound::Upper,
                thi,
            ));
        }
        Ok(())
    }

    /// Refractive index at vacuum wavelength `wavelength_um` (µm) and
    /// temperature `temperature_c` (°C).
    pub fn refractive_index(&self, wavelength_um: f64, temperature_c: f64) -> Result<f64> {
        Ok(self.index_and_slope(wavelength_um, temperature_c)?.0)
    }

    /// Group index `n − λ dn/dλ`.
    pub fn group_index(&self, wavelength_um: f64, temperature_c: f64) -> Result<f64> {
        let (n, slope) = self.index_and_slope(wavelength_um, temperature_c)?;
        Ok(n - wavelength_um * slope)
    }

    /// `dn/dλ` in 1/µm.
    pub fn dn_dlambda(&self, wavelength_um: f64, temperature_c: f64) -> Result<f64> {
        Ok(self.index_and_slope(wavelength_um, temperature_c)?.1)
    }

    fn index_and_slope(&self, wavelength_um: f64, temperature_c: f64) -> Result<(f64, f64)> {
        self.check_range(wavelength_um, temperature_c)?;
        let l = wavelength_um;
        let l2 = l * l;
        let c = &self.coefficients;

        let (mut n, mut slope) = match self.form {
            DispersionForm::Constant => (c[0], 0.0),
            DispersionForm::Cauchy => {
                let mut n = 0.0;
                let mut dn = 0.0;
                for (k, a) in c.iter().enumerate() {
                    let p = -2.0 * k as f64;
                    n += a * l.powf(p);
                    dn += a * p * l.powf(p - 1.0);
                }
                (n, dn)
            }
            DispersionForm::Sellmeier | DispersionForm::Pole => {
                let (a, d) = (c[0], c[1]);
                let mut s = a - d * l2;
                let mut ds = -2.0 * d * l;
                for term in c[2..].chunks_exact(2) {
                    let (b, cc) = (term[0], term[1]);
                    let denom = l2 - cc;
                    if self.form == DispersionForm::Sellmeier {
                        s += b * l2 / denom;
                        ds += -2.0 * b * cc * l / (denom * denom);
                    } else {
                        s += b / denom;
                        ds += -2.0 * b * l / (denom * denom);
                    }
                }
                from_square(s, ds)
            }
            DispersionForm::Jundt => {
                let f = (temperature_c - c[10]) * (temperature_c + c[11]);
                let (a1, a2, a3, a4, a5, a6) = (c[0], c[1], c[2], c[3], c[4], c[5]);
                let (b1, b2, b3, b4) = (c[6], c[7], c[8], c[9]);
                let uv = a3 + b3 * f;
                let d1 = l2 - uv * uv;
                let d2 = l2 - a5 * a5;
                let (num1, num2) = (a2 + b2 * f, a4 + b4 * f);
                let mut s = a1 + b1 * f - a6 * l2;
                let mut ds = -2.0 * a6 * l;
                s += num1 / d1;
                ds += -2.0 * num1 * l / (d1 * d1);
                if num2 != 0.0 {
                    s += num2 / d2;
                    ds += -2.0 * num2 * l / (d2 * d2);
                }
                from_square(s, ds)
            }
        };

        if let Some(t) = &self.thermal_coefficients {
            let dt = temperature_c - self.reference_temperature;
            let mut dndt = 0.0;
            let mut ddndt = 0.0;
            for (k, tk) in t.iter().enumerate() {
                let p = -(k as f64);
                dndt += tk * l.powf(p);
                ddndt += tk * p * l.powf(p - 1.0);
            }
            n += dndt * dt;
            slope += ddndt * dt;
        }

        if !(n.is_finite() && slope.is_finite() && n >= 1.0) {
            return Err(Error::Domain(format!(
                "{} evaluates to a non-physical index {n} at {l} um, {temperature_c} C",
                self.label()
            )));
        }
        Ok((n, slope))
    }
}

/// `(n, dn/dλ)` from `n²` and `d(n²)/dλ`.
fn from_square(s: f64, ds: f64) -> (f64, f64) {
    let n = s.sqrt();
    (n, ds / (2.0 * n))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialDocument {
    schema_version: Option<u32>,
    #[serde(default)]
    model: Vec<SellmeierModel>,
}

/// Immutable lookup table from (material, axis) to dispersion model.
///
/// Material names compare case-insensitively.
#[derive(Debug, Clone, Default)]
pub struct MaterialRegistry {
    models: BTreeMap<(String, Axis), SellmeierModel>,
}

impl MaterialRegistry {
    pub fn from_models(models: impl IntoIterator<Item = SellmeierModel>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, model) in models.into_iter().enumerate() {
            model.validate().map_err(|msg| {
                Error::parse(format!("model #{} ({})", i + 1, model.label()), msg)
            })?;
            let key = (model.material.to_lowercase(), model.axis);
            if map.contains_key(&key) {
                return Err(Error::DuplicateModel {
                    material: model.material.clone(),
                    axis: model.axis.to_string(),
                });
            }
            map.insert(key, model);
        }
        Ok(Self { models: map })
    }

    /// Parses a material document.
    pub fn from_toml_str(text: &str, context: &str) -> Result<Self> {
        let doc: MaterialDocument =
            toml::from_str(text).map_err(|e| Error::parse(context, e.to_string().trim_end()))?;
        if let Some(v) = doc.schema_version {
            if v != SCHEMA_VERSION {
                return Err(Error::parse(
                    context,
                    format!("unsupported schema_version {v} (expected {SCHEMA_VERSION})"),
                ));
            }
        } else if !doc.model.is_empty() {
            return Err(Error::parse(context, "missing schema_version"));
        }
        Self::from_models(doc.model).map_err(|e| match e {
            Error::Parse {
                context: entry,
                message,
            } => Error::Parse {
                context: format!("{context}, {entry}"),
                message,
            },
            other => other,
        })
    }

    /// The compiled-in data set.
    pub fn bundled() -> Self {
        Self::from_toml_str(BUNDLED_MATERIALS, "bundled materials")
            .expect("bundled material data is valid")
    }

    pub fn get(&self, material: &str, axis: Axis) -> Result<&SellmeierModel> {
        self.models
            .get(&(material.to_lowercase(), axis))
            .ok_or_else(|| Error::UnknownModel {
                material: material.to_string(),
                axis: axis.to_string(),
            })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> impl Iterator<Item = &SellmeierModel> {
        self.models.values()
    }
}

/// Reads a material document from disk.
pub fn load_registry(path: impl AsRef<Path>) -> Result<MaterialRegistry> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    MaterialRegistry::from_toml_str(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ktp_z() -> SellmeierModel {
        MaterialRegistry::bundled()
            .get("KTP", Axis::Z)
            .unwrap()
            .clone()
    }

    #[test]
    fn vacuum_is_unity() {
        let m = SellmeierModel::vacuum(Axis::X);
        assert_eq!(m.refractive_index(0.81, 25.0).unwrap(), 1.0);
        assert_eq!(m.group_index(0.81, 25.0).unwrap(), 1.0);
    }

    #[test]
    fn constant_index_has_no_dispersion() {
        let m = SellmeierModel::constant("glass", Axis::X, 1.8);
        for l in [0.4, 0.81, 1.55, 3.0] {
            assert_eq!(m.refractive_index(l, 25.0).unwrap(), 1.8);
            assert_eq!(m.group_index(l, 25.0).unwrap(), 1.8);
        }
    }

    #[test]
    fn ktp_z_matches_hand_evaluation() {
        // n_z^2 = 2.12725 + 1.18431/(1 - 0.0514852/λ²) + 0.6603/(1 - 100.00507/λ²) - 0.00968956 λ²
        // at λ = 0.81 µm, T = 25 °C (no thermal shift), evaluated separately.
        let n = ktp_z().refractive_index(0.810, 25.0).unwrap();
        assert_relative_eq!(n, 1.844367226392699, epsilon = 1e-6);
    }

    #[test]
    fn group_index_matches_central_difference() {
        let m = ktp_z();
        let l = 0.810;
        let h = 1e-4; // 0.1 nm
        let fd = m.refractive_index(l, 25.0).unwrap()
            - l * (m.refractive_index(l + h, 25.0).unwrap()
                - m.refractive_index(l - h, 25.0).unwrap())
                / (2.0 * h);
        let ng = m.group_index(l, 25.0).unwrap();
        assert_relative_eq!(ng, fd, max_relative = 1e-6);
        assert!(ng > m.refractive_index(l, 25.0).unwrap());
    }

    #[test]
    fn out_of_range_names_the_bound() {
        let m = ktp_z();
        match m.refractive_index(0.2, 25.0) {
            Err(Error::OutOfRange { bound, limit, .. }) => {
                assert_eq!(bound, Bound::Lower);
                assert_eq!(limit, 0.40);
            }
            other => panic!("unexpected {other:?}"),
        }
        match m.refractive_index(0.81, 500.0) {
            Err(Error::OutOfRange {
                bound, quantity, ..
            }) => {
                assert_eq!(bound, Bound::Upper);
                assert!(quantity.starts_with("temperature"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(m.refractive_index(f64::NAN, 25.0).is_err());
    }

    #[test]
    fn bundled_registry_resolves_required_pairs() {
        let reg = MaterialRegistry::bundled();
        for (mat, axis) in [
            ("KTP", Axis::X),
            ("KTP", Axis::Z),
            ("LN", Axis::Z),
            ("LN", Axis::X),
            ("calcite", Axis::Ordinary),
            ("calcite", Axis::Extraordinary),
        ] {
            assert!(reg.get(mat, axis).is_ok(), "{mat}/{axis}");
        }
        assert!(reg.get("ktp", Axis::Z).is_ok());
    }

    #[test]
    fn empty_document_gives_empty_registry() {
        let reg = MaterialRegistry::from_toml_str("", "empty").unwrap();
        assert!(reg.is_empty());
        assert!(matches!(
            reg.get("KTP", Axis::Z),
            Err(Error::UnknownModel { .. })
        ));
    }

    #[test]
    fn duplicate_entries_are_rejected() {
        let text = r#"
schema_version = 1
[[model]]
material = "KTP"
axis = "Z"
form = "constant"
coefficients = [1.8]
wavelength_range = [0.4, 2.0]
temperature_range = [0.0, 100.0]
[[model]]
material = "ktp"
axis = "Z"
form = "constant"
coefficients = [1.9]
wavelength_range = [0.4, 2.0]
temperature_range = [0.0, 100.0]
"#;
        assert!(matches!(
            MaterialRegistry::from_toml_str(text, "dup"),
            Err(Error::DuplicateModel { .. })
        ));
    }

    #[test]
    fn schema_errors_carry_entry_context() {
        let text = r#"
schema_version = 1
[[model]]
material = "KTP"
axis = "Z"
form = "sellmeier"
coefficients = [1.8, 0.0, 1.0]
wavelength_range = [0.4, 2.0]
temperature_range = [0.0, 100.0]
"#;
        let err = MaterialRegistry::from_toml_str(text, "bad.toml").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("bad.toml") && msg.contains("model #1"),
            "{msg}"
        );

        let err =
            MaterialRegistry::from_toml_str("schema_version = 1\n[[model]]\nmaterial = 3\n", "x")
                .unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn lookups_are_pure() {
        let reg = MaterialRegistry::bundled();
        let a = reg.get("calcite", Axis::Ordinary).unwrap().clone();
        let b = reg.get("calcite", Axis::Ordinary).unwrap().clone();
        assert_eq!(a, b);
        assert_eq!(
            a.refractive_index(1.55, 20.0).unwrap(),
            b.refractive_index(1.55, 20.0).unwrap()
        );
    }
}
