//! Two-photon coherence between the |VV⟩ and |HH⟩ emissions of the crossed
//! crystal pair, optionally with a birefringent compensation plate.
//!
//! With `ε` the angular-frequency detuning (`ω_s = ω_0s + ε`,
//! `ω_i = ω_0i − ε`), the off-diagonal element is
//!
//! ```text
//! ρ₁₁₂₂ = ½ ∫ g(ε) e^{i(τ_X − κ)ε} sinc²(τ_Z ε/2) dε / ∫ g(ε) sinc²(τ_Z ε/2) dε
//! ```
//!
//! where `g = |A_s|²|A_i|²` is the product of the detector filter
//! intensities. Global phase prefactors are dropped; the magnitude is what
//! the visibility `V = 2|ρ₁₁₂₂|` measures.

use std::f64::consts::{LN_2, PI};

use nalgebra::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::{Axis, MaterialRegistry};
use crate::phasematch::{sinc, QpmConfig};
use crate::quadrature::{integrate, Tolerance};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Sinc² lobes kept on each side when no filter bounds the integral. The
/// truncated tail biases |ρ₁₁₂₂| by at most `1/(2π²·lobes)`.
pub const UNFILTERED_LOBES: f64 = 500.0;

const MAX_INITIAL_PANELS: usize = 50_000;

/// Angular frequency (rad/s) of a vacuum wavelength in nm.
pub fn angular_frequency(wavelength_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (wavelength_nm * 1e-9)
}

/// Which photon of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Signal,
    Idler,
}

impl Arm {
    /// `+1` for the signal (`ω_0s + ε`), `−1` for the idler (`ω_0i − ε`).
    pub fn detuning_sign(self) -> f64 {
        match self {
            Arm::Signal => 1.0,
            Arm::Idler => -1.0,
        }
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arm::Signal => "signal",
            Arm::Idler => "idler",
        })
    }
}

impl std::str::FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signal" => Ok(Arm::Signal),
            "idler" => Ok(Arm::Idler),
            other => Err(Error::parse(
                "arm",
                format!("expected signal or idler, got {other:?}"),
            )),
        }
    }
}

/// Gaussian detector filter, specified by intensity FWHM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub center_nm: f64,
    pub fwhm_nm: f64,
}

impl FilterSpec {
    pub fn new(center_nm: f64, fwhm_nm: f64) -> Result<Self> {
        let f = Self { center_nm, fwhm_nm };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center_nm.is_finite() && self.center_nm > 0.0) {
            return Err(Error::Config(format!(
                "filter center must be positive, got {}",
                self.center_nm
            )));
        }
        if !(self.fwhm_nm.is_finite() && self.fwhm_nm > 0.0) {
            return Err(Error::Config(format!(
                "filter bandwidth must be positive, got {}",
                self.fwhm_nm
            )));
        }
        Ok(())
    }

    /// Standard deviation of the intensity profile in wavelength, nm.
    pub fn sigma_nm(&self) -> f64 {
        self.fwhm_nm / (2.0 * (2.0 * LN_2).sqrt())
    }

    /// Field amplitude at a vacuum wavelength (nm).
    pub fn amplitude_at(&self, wavelength_nm: f64) -> f64 {
        let d = (wavelength_nm - self.center_nm) / self.fwhm_nm;
        (-2.0 * LN_2 * d * d).exp()
    }
}

/// Filter field amplitude seen by one photon at detuning `eps` (rad/s) from
/// the arm's center wavelength `arm_center_nm`.
///
/// The detuned wavelength is `2πc/(ω_0 ± ε)`, exact rather than linearized.
/// Detunings that push the frequency to zero or below get amplitude 0.
pub fn filter_amplitude(filter: &FilterSpec, arm: Arm, arm_center_nm: f64, eps: f64) -> f64 {
    let omega = angular_frequency(arm_center_nm) + arm.detuning_sign() * eps;
    if !(omega > 0.0) {
        return 0.0;
    }
    filter.amplitude_at(2.0 * PI * SPEED_OF_LIGHT / omega * 1e9)
}

/// Birefringent compensation plate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateSpec {
    pub material: String,
    pub thickness_mm: f64,
    #[serde(default = "default_plate_arm")]
    pub arm: Arm,
    #[serde(default = "default_plate_temperature")]
    pub temperature_c: f64,
}

fn default_plate_arm() -> Arm {
    Arm::Idler
}

fn default_plate_temperature() -> f64 {
    20.0
}

impl PlateSpec {
    /// Plate of `material` in the idler arm at 20 °C.
    pub fn new(material: &str, thickness_mm: f64) -> Self {
        Self {
            material: material.to_string(),
            thickness_mm,
            arm: default_plate_arm(),
            temperature_c: default_plate_temperature(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.thickness_mm.is_finite() && self.thickness_mm >= 0.0) {
            return Err(Error::Config(format!(
                "plate thickness must be non-negative, got {}",
                self.thickness_mm
            )));
        }
        if !self.temperature_c.is_finite() {
            return Err(Error::Config("plate temperature must be finite".into()));
        }
        Ok(())
    }
}

/// Quadrature settings for the coherence integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationControl {
    /// Half-width of the detuning window in filter standard deviations.
    #[serde(default = "default_half_width")]
    pub half_width_sigmas: f64,
    /// Relative tolerance on the integrals.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_segments")]
    pub max_segments: usize,
}

fn default_half_width() -> f64 {
    8.0
}

fn default_tolerance() -> f64 {
    1e-6
}

fn default_max_segments() -> usize {
    200_000
}

impl Default for IntegrationControl {
    fn default() -> Self {
        Self {
            half_width_sigmas: default_half_width(),
            tolerance: default_tolerance(),
            max_segments: default_max_segments(),
        }
    }
}

impl IntegrationControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width_sigmas >= 5.0 && self.half_width_sigmas.is_finite()) {
            return Err(Error::Config(format!(
                "integration half-width must be at least 5 filter sigmas, got {}",
                self.half_width_sigmas
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::Config(format!(
                "integration tolerance must lie in (0, 1), got {}",
                self.tolerance
            )));
        }
        if self.max_segments == 0 {
            return Err(Error::Config("max_segments must be positive".into()));
        }
        Ok(())
    }
}

/// Scale constants of the downconversion amplitude. They multiply numerator
/// and normalization alike and drop out of every reported quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConstants {
    pub chi2: f64,
    pub f1: f64,
    pub field: f64,
    pub hbar: f64,
}

impl Default for InteractionConstants {
    fn default() -> Self {
        Self {
            chi2: 1.0,
            f1: 1.0,
            field: 1.0,
            hbar: 1.0,
        }
    }
}

impl InteractionConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("chi2", self.chi2),
            ("f1", self.f1),
            ("field", self.field),
            ("hbar", self.hbar),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "interaction constant {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// `χ₂ f₁ E₀ / ħ`, the amplitude prefactor per unit length.
    pub fn coupling(&self) -> f64 {
        self.chi2 * self.f1 * self.field / self.hbar
    }
}

/// Full input of the coherence calculation.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub crystal: QpmConfig,
    /// Crystal axis seen by the H-polarized pair (first crystal's axis).
    pub x_axis: Axis,
    /// Crystal axis seen by the V-polarized pair.
    pub z_axis: Axis,
    /// `None` means the signal detector is unfiltered.
    pub signal_filter: Option<FilterSpec>,
    /// `None` means the idler detector is unfiltered.
    pub idler_filter: Option<FilterSpec>,
    pub plate: Option<PlateSpec>,
    pub control: IntegrationControl,
    pub interaction: InteractionConstants,
}

impl SourceConfig {
    pub fn new(crystal: QpmConfig) -> Self {
        Self {
            crystal,
            x_axis: Axis::X,
            z_axis: Axis::Z,
            signal_filter: None,
            idler_filter: None,
            plate: None,
            control: IntegrationControl::default(),
            interaction: InteractionConstants::default(),
        }
    }

    /// Adds an idler filter of the given FWHM centred on the idler.
    pub fn with_idler_filter(mut self, fwhm_nm: f64) -> Self {
        self.idler_filter = Some(FilterSpec {
            center_nm: self.crystal.idler_nm,
            fwhm_nm,
        });
        self
    }

    /// Adds a signal filter of the given FWHM centred on the signal.
    pub fn with_signal_filter(mut self, fwhm_nm: f64) -> Self {
        self.signal_filter = Some(FilterSpec {
            center_nm: self.crystal.signal_nm,
            fwhm_nm,
        });
        self
    }

    pub fn with_plate(mut self, plate: PlateSpec) -> Self {
        self.plate = Some(plate);
        self
    }

    pub fn with_length(mut self, length_mm: f64) -> Self {
        self.crystal.length_mm = length_mm;
        self
    }

    pub fn with_thickness(mut self, thickness_mm: f64) -> Result<Self> {
        match self.plate.as_mut() {
            Some(p) => p.thickness_mm = thickness_mm,
            None => return Err(Error::Config("no compensation plate configured".into())),
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.crystal.validate()?;
        for f in self.signal_filter.iter().chain(self.idler_filter.iter()) {
            f.validate()?;
        }
        if let Some(p) = &self.plate {
            p.validate()?;
        }
        self.control.validate()?;
        self.interaction.validate()
    }

    fn arm_filters(&self) -> ArmFilters {
        ArmFilters {
            signal_center_nm: self.crystal.signal_nm,
            idler_center_nm: self.crystal.idler_nm,
            signal: self.signal_filter,
            idler: self.idler_filter,
        }
    }
}

/// Delays entering the coherence integral, s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delays {
    pub tau_x: f64,
    pub tau_z: f64,
    pub kappa: f64,
}

/// Detector filters together with the pair's center wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmFilters {
    pub signal_center_nm: f64,
    pub idler_center_nm: f64,
    pub signal: Option<FilterSpec>,
    pub idler: Option<FilterSpec>,
}

impl ArmFilters {
    /// No filtering on either arm.
    pub fn flat(signal_center_nm: f64, idler_center_nm: f64) -> Self {
        Self {
            signal_center_nm,
            idler_center_nm,
            signal: None,
            idler: None,
        }
    }

    fn weight(&self, eps: f64) -> f64 {
        let mut w = 1.0;
        if let Some(f) = &self.signal {
            let a = filter_amplitude(f, Arm::Signal, self.signal_center_nm, eps);
            w *= a * a;
        }
        if let Some(f) = &self.idler {
            let a = filter_amplitude(f, Arm::Idler, self.idler_center_nm, eps);
            w *= a * a;
        }
        w
    }

    /// Detuning interval `±half_width_sigmas` around each filter centre,
    /// intersected over the filtered arms. `None` when no arm is filtered.
    fn window(&self, half_width_sigmas: f64) -> Result<Option<(f64, f64)>> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        let arms = [
            (Arm::Signal, self.signal, self.signal_center_nm),
            (Arm::Idler, self.idler, self.idler_center_nm),
        ];
        let mut any = false;
        for (arm, filter, center_nm) in arms {
            let Some(f) = filter else { continue };
            any = true;
            let omega0 = angular_frequency(center_nm);
            let reach = half_width_sigmas * f.sigma_nm();
            let short = f.center_nm - reach;
            let omega_hi = if short > 0.0 {
                angular_frequency(short)
            } else {
                f64::INFINITY
            };
            let omega_lo = angular_frequency(f.center_nm + reach);
            // ε = ±(ω − ω_0)
            let (a, b) = match arm {
                Arm::Signal => (omega_lo - omega0, omega_hi - omega0),
                Arm::Idler => (omega0 - omega_hi, omega0 - omega_lo),
            };
            lo = lo.max(a);
            hi = hi.min(b);
        }
        if !any {
            return Ok(None);
        }
        if !(hi > lo) {
            return Err(Error::Domain(
                "signal and idler filter passbands do not overlap".into(),
            ));
        }
        Ok(Some((lo, hi)))
    }
}

/// Quadrature bookkeeping for one coherence evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// Propagated error estimate on |ρ₁₁₂₂|.
    pub error_estimate: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceResult {
    /// Complex off-diagonal element, global phase dropped.
    pub rho: Complex<f64>,
    /// `2|ρ₁₁₂₂|`.
    pub visibility: f64,
    pub tau_x: f64,
    pub tau_z: f64,
    pub kappa: f64,
    /// Diagonal populations `ρ₁₁₁₁ = ρ₂₂₂₂`.
    pub population: f64,
    pub diagnostics: Diagnostics,
}

impl CoherenceResult {
    pub fn magnitude(&self) -> f64 {
        self.rho.norm()
    }
}

fn group_index(
    registry: &MaterialRegistry,
    material: &str,
    axis: Axis,
    wavelength_nm: f64,
    temperature_c: f64,
) -> Result<f64> {
    registry
        .get(material, axis)?
        .group_index(wavelength_nm * 1e-3, temperature_c)
}

/// Group-delay differences between signal and idler along the crystal's
/// X and Z axes, `τ = (n_g,s − n_g,i) L / c`, in seconds. Signs are kept.
pub fn group_delay_taus(registry: &MaterialRegistry, config: &SourceConfig) -> Result<(f64, f64)> {
    let c = &config.crystal;
    let m = c.material.as_str();
    let t = c.temperature_c;
    let scale = c.length_m() / SPEED_OF_LIGHT;
    let tau = |axis| -> Result<f64> {
        let ns = group_index(registry, m, axis, c.signal_nm, t)?;
        let ni = group_index(registry, m, axis, c.idler_nm, t)?;
        Ok((ns - ni) * scale)
    };
    Ok((tau(config.x_axis)?, tau(config.z_axis)?))
}

/// Group birefringence `n_g^o − n_g^e` of a plate material.
pub fn plate_group_birefringence(
    registry: &MaterialRegistry,
    material: &str,
    wavelength_nm: f64,
    temperature_c: f64,
) -> Result<f64> {
    let no = group_index(
        registry,
        material,
        Axis::Ordinary,
        wavelength_nm,
        temperature_c,
    )?;
    let ne = group_index(
        registry,
        material,
        Axis::Extraordinary,
        wavelength_nm,
        temperature_c,
    )?;
    Ok(no - ne)
}

/// Plate delay `κ = (n_g^o − n_g^e) d / c` in seconds for thickness `d` (mm).
pub fn plate_kappa(
    registry: &MaterialRegistry,
    material: &str,
    thickness_mm: f64,
    wavelength_nm: f64,
    temperature_c: f64,
) -> Result<f64> {
    if !(thickness_mm >= 0.0 && thickness_mm.is_finite()) {
        return Err(Error::Domain(format!(
            "plate thickness must be non-negative, got {thickness_mm}"
        )));
    }
    let dn = plate_group_birefringence(registry, material, wavelength_nm, temperature_c)?;
    Ok(dn * thickness_mm * 1e-3 / SPEED_OF_LIGHT)
}

/// The plate is assumed oriented to compensate, so the same κ applies
/// whichever arm it sits in.
fn config_kappa(registry: &MaterialRegistry, config: &SourceConfig) -> Result<f64> {
    match &config.plate {
        None => Ok(0.0),
        Some(p) => plate_kappa(
            registry,
            &p.material,
            p.thickness_mm,
            plate_wavelength(config, p.arm),
            p.temperature_c,
        ),
    }
}

fn plate_wavelength(config: &SourceConfig, arm: Arm) -> f64 {
    match arm {
        Arm::Signal => config.crystal.signal_nm,
        Arm::Idler => config.crystal.idler_nm,
    }
}

/// Evaluates the normalized coherence integral for given delays.
pub fn coherence_integral(
    delays: Delays,
    filters: &ArmFilters,
    control: &IntegrationControl,
) -> Result<CoherenceResult> {
    coherence_integral_scaled(delays, filters, control, 1.0)
}

fn coherence_integral_scaled(
    delays: Delays,
    filters: &ArmFilters,
    control: &IntegrationControl,
    weight_scale: f64,
) -> Result<CoherenceResult> {
    control.validate()?;
    let Delays {
        tau_x,
        tau_z,
        kappa,
    } = delays;
    for (name, v) in [("tau_x", tau_x), ("tau_z", tau_z), ("kappa", kappa)] {
        if !v.is_finite() {
            return Err(Error::Domain(format!("{name} is not finite")));
        }
    }
    let a = tau_x - kappa;
    let b = tau_z;

    let limit = 0.5
        * angular_frequency(filters.signal_center_nm)
            .min(angular_frequency(filters.idler_center_nm));
    let (mut lo, mut hi) = match filters.window(control.half_width_sigmas)? {
        Some(w) => w,
        None => {
            if b == 0.0 {
                return Err(Error::Domain(
                    "zero-length crystal without filters: the normalization diverges".into(),
                ));
            }
            let w = 2.0 * PI * UNFILTERED_LOBES / b.abs();
            (-w, w)
        }
    };
    lo = lo.max(-limit);
    hi = hi.min(limit);
    if !(hi > lo) {
        return Err(Error::Domain("empty detuning window".into()));
    }

    let freq = a.abs().max(b.abs());
    let panels = ((hi - lo) * freq / PI).ceil();
    let panels = if panels.is_finite() {
        (panels as usize).clamp(8, MAX_INITIAL_PANELS)
    } else {
        MAX_INITIAL_PANELS
    };

    let integrand = |eps: f64| {
        let s = sinc(0.5 * b * eps);
        let w = weight_scale * filters.weight(eps) * s * s;
        let (sin, cos) = (a * eps).sin_cos();
        [w * cos, w * sin, w]
    };
    let tol = Tolerance {
        relative: control.tolerance,
        absolute: 0.0,
        max_segments: control.max_segments,
    };
    let r = integrate(integrand, lo, hi, panels, tol)?;
    let [re, im, norm] = r.value;
    if !(norm > 0.0) {
        return Err(Error::Domain(
            "filter passbands leave no spectral weight in the detuning window".into(),
        ));
    }
    let rho = Complex::new(0.5 * re / norm, 0.5 * im / norm);
    let num = (re * re + im * im).sqrt();
    let error_estimate =
        0.5 * ((r.error[0] + r.error[1]) / norm + num * r.error[2] / (norm * norm));
    Ok(CoherenceResult {
        rho,
        visibility: 2.0 * rho.norm(),
        tau_x,
        tau_z,
        kappa,
        population: 0.5 * norm / norm,
        diagnostics: Diagnostics {
            error_estimate,
            nodes: r.evaluations,
        },
    })
}

/// ρ₁₁₂₂ for a full source configuration.
pub fn rho1122(registry: &MaterialRegistry, config: &SourceConfig) -> Result<CoherenceResult> {
    config.validate()?;
    let (tau_x, tau_z) = group_delay_taus(registry, config)?;
    let kappa = config_kappa(registry, config)?;
    let g = config.interaction.coupling() * config.crystal.length_m();
    let scale = if g > 0.0 { g * g } else { 1.0 };
    coherence_integral_scaled(
        Delays {
            tau_x,
            tau_z,
            kappa,
        },
        &config.arm_filters(),
        &config.control,
        scale,
    )
}

/// Infinite-length limit `½·max(0, 1 − |τ_X − κ|/|τ_Z|)` for flat filters.
pub fn asymptotic_rho(delays: Delays) -> Result<f64> {
    if delays.tau_z == 0.0 || !delays.tau_z.is_finite() {
        return Err(Error::Domain("tau_z must be nonzero and finite".into()));
    }
    let r = (delays.tau_x - delays.kappa).abs() / delays.tau_z.abs();
    Ok(0.5 * (1.0 - r).max(0.0))
}

/// [`asymptotic_rho`] for a configuration. The ratio `τ_X/τ_Z` does not
/// depend on the crystal length; the plate delay is taken as configured.
pub fn asymptotic_rho_for(registry: &MaterialRegistry, config: &SourceConfig) -> Result<f64> {
    config.validate()?;
    let (tau_x, tau_z) = group_delay_taus(registry, config)?;
    let kappa = config_kappa(registry, config)?;
    asymptotic_rho(Delays {
        tau_x,
        tau_z,
        kappa,
    })
}

/// Plate thickness (mm) for which `κ = τ_X`. Uses the configured plate
/// material, arm and temperature; the configured thickness is ignored.
pub fn solve_plate_thickness(registry: &MaterialRegistry, config: &SourceConfig) -> Result<f64> {
    config.validate()?;
    let plate = config
        .plate
        .as_ref()
        .ok_or_else(|| Error::Config("no compensation plate configured".into()))?;
    let (tau_x, _) = group_delay_taus(registry, config)?;
    let dn = plate_group_birefringence(
        registry,
        &plate.material,
        plate_wavelength(config, plate.arm),
        plate.temperature_c,
    )?;
    thickness_for_delay(tau_x, dn)
}

/// Thickness (mm) giving delay `tau` for a group birefringence `dn`.
pub fn thickness_for_delay(tau: f64, dn: f64) -> Result<f64> {
    if dn == 0.0 || !dn.is_finite() {
        return Err(Error::Solver(
            "plate material has no group birefringence at this wavelength".into(),
        ));
    }
    let d = tau * SPEED_OF_LIGHT / dn * 1e3;
    if d < 0.0 {
        return Err(Error::Solver(format!(
            "compensation needs a negative thickness ({d:.6} mm): crystal delay and plate birefringence have opposite signs"
        )));
    }
    Ok(d.abs())
}

/// One grid point of a coherence scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub length_mm: f64,
    /// Plate thickness, or `None` when the configuration has no plate.
    pub thickness_mm: Option<f64>,
    pub result: CoherenceResult,
}

/// Evaluates ρ₁₁₂₂ over crystal lengths and, optionally, plate thicknesses.
///
/// Rows are length-major and in input order. Points are computed in
/// parallel; the first failing point in that order is reported.
pub fn coherence_scan(
    registry: &MaterialRegistry,
    base: &SourceConfig,
    lengths_mm: &[f64],
    thicknesses_mm: Option<&[f64]>,
) -> Result<Vec<ScanPoint>> {
    if lengths_mm.is_empty() {
        return Err(Error::Config("length grid is empty".into()));
    }
    let mut grid = Vec::new();
    match thicknesses_mm {
        Some(ds) => {
            if ds.is_empty() {
                return Err(Error::Config("thickness grid is empty".into()));
            }
            if base.plate.is_none() {
                return Err(Error::Config(
                    "a thickness grid needs a compensation plate in the configuration".into(),
                ));
            }
            for &l in lengths_mm {
                for &d in ds {
                    grid.push((l, Some(d)));
                }
            }
        }
        None => {
            let d = base.plate.as_ref().map(|p| p.thickness_mm);
            grid.extend(lengths_mm.iter().map(|&l| (l, d)));
        }
    }

    let results: Vec<Result<ScanPoint>> = grid
        .par_iter()
        .map(|&(l, d)| {
            let mut config = base.clone().with_length(l);
            if let Some(d) = d {
                config = config.with_thickness(d)?;
            }
            let result = rho1122(registry, &config)?;
            Ok(ScanPoint {
                length_mm: l,
                thickness_mm: d,
                result,
            })
        })
        .collect();

    let mut out = Vec::with_capacity(results.len());
    for (r, &(l, d)) in results.into_iter().zip(&grid) {
        match r {
            Ok(p) => out.push(p),
            Err(e) => {
                let at = match d {
                    Some(d) => format!("L = {l} mm, d = {d} mm"),
                    None => format!("L = {l} mm"),
                };
                return Err(match e {
                    Error::Integration { .. } | Error::Solver(_) => {
                        Error::Solver(format!("scan point {at}: {e}"))
                    }
                    other => Error::Config(format!("scan point {at}: {other}")),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::SellmeierModel;
    use crate::phasematch::solve_poling_period;
    use approx::assert_relative_eq;

    fn ktp(length_mm: f64) -> SourceConfig {
        let reg = MaterialRegistry::bundled();
        let period = solve_poling_period(&reg, "KTP", 810.0, 532.0, 111.0).unwrap();
        SourceConfig::new(QpmConfig::new("KTP", 532.0, 810.0, period, length_mm, 111.0).unwrap())
    }

    #[test]
    fn filter_amplitude_center_and_half_power() {
        let f = FilterSpec::new(1550.0, 10.0).unwrap();
        assert_eq!(filter_amplitude(&f, Arm::Idler, 1550.0, 0.0), 1.0);
        // detuning that lands exactly on λ_c + Δλ/2
        let eps = angular_frequency(1550.0) - angular_frequency(1555.0);
        let a = filter_amplitude(&f, Arm::Idler, 1550.0, eps);
        assert_relative_eq!(a * a, 0.5, max_relative = 1e-12);
        // same detuning on the signal side moves to shorter wavelength
        let s = filter_amplitude(&f, Arm::Signal, 1550.0, eps);
        assert!(s < 1.0 && s != a);
    }

    #[test]
    fn filter_amplitude_is_symmetric_in_wavelength() {
        let f = FilterSpec::new(810.0, 2.0).unwrap();
        for d in [0.1, 0.7, 1.3, 4.0] {
            assert!((f.amplitude_at(810.0 + d) - f.amplitude_at(810.0 - d)).abs() < 1e-15);
        }
    }

    #[test]
    fn filter_amplitude_beyond_zero_frequency() {
        let f = FilterSpec::new(810.0, 2.0).unwrap();
        assert_eq!(filter_amplitude(&f, Arm::Idler, 810.0, 1e20), 0.0);
    }

    #[test]
    fn filter_validation() {
        assert!(FilterSpec::new(810.0, 0.0).is_err());
        assert!(FilterSpec::new(-1.0, 2.0).is_err());
    }

    #[test]
    fn taus_vanish_at_zero_length_and_scale_linearly() {
        let reg = MaterialRegistry::bundled();
        assert_eq!(group_delay_taus(&reg, &ktp(0.0)).unwrap(), (0.0, 0.0));
        let (x1, z1) = group_delay_taus(&reg, &ktp(4.5)).unwrap();
        let (x2, z2) = group_delay_taus(&reg, &ktp(9.0)).unwrap();
        assert_relative_eq!(x2, 2.0 * x1, max_relative = 1e-15);
        assert_relative_eq!(z2, 2.0 * z1, max_relative = 1e-15);
    }

    #[test]
    fn ktp_delay_ratio() {
        let reg = MaterialRegistry::bundled();
        let (x, z) = group_delay_taus(&reg, &ktp(4.5)).unwrap();
        assert!(x > 0.0 && z > 0.0);
        assert!((x / z - 0.594).abs() < 0.03, "{}", x / z);
    }

    #[test]
    fn plate_kappa_is_linear() {
        let reg = MaterialRegistry::bundled();
        assert_eq!(
            plate_kappa(&reg, "calcite", 0.0, 1550.0, 20.0).unwrap(),
            0.0
        );
        let k1 = plate_kappa(&reg, "calcite", 0.43, 1550.0, 20.0).unwrap();
        let k2 = plate_kappa(&reg, "calcite", 0.86, 1550.0, 20.0).unwrap();
        assert_relative_eq!(k2, 2.0 * k1, max_relative = 1e-15);
        assert!(plate_kappa(&reg, "calcite", -1.0, 1550.0, 20.0).is_err());
    }

    #[test]
    fn calcite_plate_matches_ktp_delay() {
        let reg = MaterialRegistry::bundled();
        let (tau_x, _) = group_delay_taus(&reg, &ktp(4.5)).unwrap();
        let k = plate_kappa(&reg, "calcite", 0.86, 1550.0719424460432, 20.0).unwrap();
        assert!((k / tau_x - 1.0).abs() < 0.12, "{}", k / tau_x);
    }

    #[test]
    fn asymptote_edges() {
        let d = |x, z, k| Delays {
            tau_x: x,
            tau_z: z,
            kappa: k,
        };
        assert_eq!(asymptotic_rho(d(0.0, 1.0, 0.0)).unwrap(), 0.5);
        assert_eq!(asymptotic_rho(d(1.0, 1.0, 0.0)).unwrap(), 0.0);
        assert_eq!(asymptotic_rho(d(3.0, 1.0, 0.0)).unwrap(), 0.0);
        assert_eq!(asymptotic_rho(d(1.0, 2.0, 1.0)).unwrap(), 0.5);
        assert_relative_eq!(asymptotic_rho(d(-0.5, 1.0, 0.0)).unwrap(), 0.25);
        assert!(matches!(
            asymptotic_rho(d(1.0, 0.0, 0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ktp_asymptote() {
        let reg = MaterialRegistry::bundled();
        let r = asymptotic_rho_for(&reg, &ktp(4.5)).unwrap();
        assert!((r - 0.203).abs() < 0.015, "{r}");
    }

    #[test]
    fn flat_filter_integral_matches_triangle() {
        let control = IntegrationControl::default();
        let filters = ArmFilters::flat(810.0, 1550.0);
        for (x, z, k) in [
            (0.0, 1e-12, 0.0),
            (0.6e-12, 1e-12, 0.0),
            (2e-12, 1e-12, 0.5e-12),
            (-0.3e-12, 2e-12, 0.4e-12),
            (1e-12, 1e-12, 0.0),
        ] {
            let delays = Delays {
                tau_x: x,
                tau_z: z,
                kappa: k,
            };
            let r = coherence_integral(delays, &filters, &control).unwrap();
            let want = asymptotic_rho(delays).unwrap();
            assert!(
                (r.magnitude() - want).abs() < 1e-3,
                "{x} {z} {k}: {} vs {want}",
                r.magnitude()
            );
            assert_eq!(r.population, 0.5);
            assert_eq!(r.visibility, 2.0 * r.rho.norm());
        }
    }

    #[test]
    fn short_crystal_is_fully_coherent() {
        let reg = MaterialRegistry::bundled();
        let r = rho1122(&reg, &ktp(1e-3).with_idler_filter(10.0)).unwrap();
        assert!(r.visibility > 0.999, "{}", r.visibility);
    }

    #[test]
    fn zero_length_without_filters_is_rejected() {
        let reg = MaterialRegistry::bundled();
        assert!(matches!(rho1122(&reg, &ktp(0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_length_with_filter_is_pure() {
        let reg = MaterialRegistry::bundled();
        let r = rho1122(&reg, &ktp(0.0).with_idler_filter(10.0)).unwrap();
        assert_relative_eq!(r.visibility, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn interaction_constants_cancel() {
        let reg = MaterialRegistry::bundled();
        let base = ktp(20.0).with_idler_filter(10.0);
        let mut scaled = base.clone();
        scaled.interaction = InteractionConstants {
            chi2: 7.0,
            f1: 0.3,
            field: 1e3,
            hbar: 1e-2,
        };
        let a = rho1122(&reg, &base).unwrap();
        let b = rho1122(&reg, &scaled).unwrap();
        assert_relative_eq!(a.visibility, b.visibility, max_relative = 1e-12);
    }

    #[test]
    fn compensated_ktp_is_pure() {
        let reg = MaterialRegistry::bundled();
        let mut config = ktp(4.5)
            .with_idler_filter(10.0)
            .with_plate(PlateSpec::new("calcite", 0.0));
        let d = solve_plate_thickness(&reg, &config).unwrap();
        assert!((d - 0.86).abs() < 0.1, "{d}");
        config = config.with_thickness(d).unwrap();
        let r = rho1122(&reg, &config).unwrap();
        assert!(r.visibility > 0.999, "{}", r.visibility);
        let k = config_kappa(&reg, &config).unwrap();
        assert_relative_eq!(k, r.tau_x, max_relative = 1e-9);
    }

    #[test]
    fn synthetic_plate_thickness() {
        let reg = MaterialRegistry::from_models([
            SellmeierModel::constant("slab", Axis::Ordinary, 1.7),
            SellmeierModel::constant("slab", Axis::Extraordinary, 1.6),
        ])
        .unwrap();
        let dn = plate_group_birefringence(&reg, "slab", 1550.0, 20.0).unwrap();
        let d = thickness_for_delay(1e-12, dn).unwrap();
        assert_relative_eq!(d, 2.99792458, max_relative = 1e-9);
        assert_eq!(thickness_for_delay(0.0, dn).unwrap(), 0.0);
        assert!(matches!(
            thickness_for_delay(1e-12, 0.0),
            Err(Error::Solver(_))
        ));
        assert!(thickness_for_delay(-1e-12, dn).is_err());
    }

    #[test]
    fn narrower_idler_filter_raises_visibility() {
        let reg = MaterialRegistry::bundled();
        let vs: Vec<f64> = [10.0, 5.0, 1.0]
            .iter()
            .map(|&w| {
                rho1122(&reg, &ktp(20.0).with_idler_filter(w))
                    .unwrap()
                    .visibility
            })
            .collect();
        assert!(vs[0] <= vs[1] && vs[1] <= vs[2], "{vs:?}");
    }

    #[test]
    fn non_overlapping_filters() {
        let reg = MaterialRegistry::bundled();
        let mut c = ktp(4.5).with_idler_filter(1.0);
        c.signal_filter = Some(FilterSpec::new(800.0, 0.5).unwrap());
        assert!(matches!(rho1122(&reg, &c), Err(Error::Domain(_))));
    }

    #[test]
    fn scan_single_point_matches_direct_call() {
        let reg = MaterialRegistry::bundled();
        let base = ktp(4.5).with_idler_filter(10.0);
        let rows = coherence_scan(&reg, &base, &[12.0], None).unwrap();
        let direct = rho1122(&reg, &base.clone().with_length(12.0)).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].result, direct);
        assert_eq!(rows[0].thickness_mm, None);
    }

    #[test]
    fn scan_keeps_input_order_and_reports_failures() {
        let reg = MaterialRegistry::bundled();
        let base = ktp(4.5)
            .with_idler_filter(10.0)
            .with_plate(PlateSpec::new("calcite", 0.0));
        let rows = coherence_scan(&reg, &base, &[30.0, 1.0], Some(&[0.5, 0.0])).unwrap();
        let coords: Vec<_> = rows.iter().map(|r| (r.length_mm, r.thickness_mm)).collect();
        assert_eq!(
            coords,
            vec![
                (30.0, Some(0.5)),
                (30.0, Some(0.0)),
                (1.0, Some(0.5)),
                (1.0, Some(0.0))
            ]
        );
        let err = coherence_scan(&reg, &base, &[1.0, -2.0], None).unwrap_err();
        assert!(err.to_string().contains("L = -2 mm"), "{err}");
        assert!(coherence_scan(&reg, &base, &[], None).is_err());
        assert!(coherence_scan(&reg, &ktp(4.5), &[1.0], Some(&[0.1])).is_err());
    }
}
