//! First-order quasi-phase matching along the crystal's propagation axis.
//!
//! Sign convention: `Δk = k_s + k_i − k_p + K` with `K = 2π/Λ` and
//! `k = 2π n(λ, T)/λ`. The grating compensates a negative bulk mismatch.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coherence::InteractionConstants;
use crate::error::{Error, Result};
use crate::materials::{Axis, MaterialRegistry};

/// Bisection bracket for the poling period, µm.
pub const POLING_BRACKET_UM: [f64; 2] = [1.0, 100.0];

/// Residual below which a mismatch counts as phase matched, 1/m.
pub const MISMATCH_TOLERANCE: f64 = 0.1;

/// Polarization axes of the three interacting fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionAxes {
    pub pump: Axis,
    pub signal: Axis,
    pub idler: Axis,
}

impl Default for InteractionAxes {
    fn default() -> Self {
        Self {
            pump: Axis::Z,
            signal: Axis::Z,
            idler: Axis::Z,
        }
    }
}

/// Geometry and operating point of one poled crystal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpmConfig {
    pub material: String,
    pub pump_nm: f64,
    pub signal_nm: f64,
    pub idler_nm: f64,
    /// Grating period in µm; `f64::INFINITY` means no grating.
    pub poling_period_um: f64,
    pub length_mm: f64,
    pub temperature_c: f64,
    pub axes: InteractionAxes,
}

impl QpmConfig {
    /// Builds a configuration with the idler fixed by energy conservation.
    pub fn new(
        material: &str,
        pump_nm: f64,
        signal_nm: f64,
        poling_period_um: f64,
        length_mm: f64,
        temperature_c: f64,
    ) -> Result<Self> {
        let idler_nm = idler_wavelength(pump_nm, signal_nm)?;
        Self::with_idler(
            material,
            pump_nm,
            signal_nm,
            idler_nm,
            poling_period_um,
            length_mm,
            temperature_c,
        )
    }

    /// Builds a configuration from all three wavelengths, checking that they
    /// conserve energy to a relative 1e-9.
    pub fn with_idler(
        material: &str,
        pump_nm: f64,
        signal_nm: f64,
        idler_nm: f64,
        poling_period_um: f64,
        length_mm: f64,
        temperature_c: f64,
    ) -> Result<Self> {
        let config = Self {
            material: material.to_string(),
            pump_nm,
            signal_nm,
            idler_nm,
            poling_period_um,
            length_mm,
            temperature_c,
            axes: InteractionAxes::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pump wavelength", self.pump_nm),
            ("signal wavelength", self.signal_nm),
            ("idler wavelength", self.idler_nm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let lhs = 1.0 / self.pump_nm;
        let rhs = 1.0 / self.signal_nm + 1.0 / self.idler_nm;
        if ((lhs - rhs) / lhs).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "wavelengths {} / {} / {} nm violate energy conservation",
                self.pump_nm, self.signal_nm, self.idler_nm
            )));
        }
        if !(self.poling_period_um > 0.0) {
            return Err(Error::Config(format!(
                "poling period must be positive, got {}",
                self.poling_period_um
            )));
        }
        if !(self.length_mm >= 0.0 && self.length_mm.is_finite()) {
            return Err(Error::Config(format!(
                "crystal length must be non-negative, got {}",
                self.length_mm
            )));
        }
        if !self.temperature_c.is_finite() {
            return Err(Error::Config("temperature must be finite".into()));
        }
        Ok(())
    }

    /// Grating wavevector `K = 2π/Λ`, 1/m.
    pub fn grating_wavevector(&self) -> f64 {
        2.0 * PI / (self.poling_period_um * 1e-6)
    }

    pub fn length_m(&self) -> f64 {
        self.length_mm * 1e-3
    }

    /// Same crystal with a different signal wavelength; the idler follows.
    pub fn retuned(&self, signal_nm: f64) -> Result<Self> {
        let mut out = self.clone();
        out.signal_nm = signal_nm;
        out.idler_nm = idler_wavelength(self.pump_nm, signal_nm)?;
        Ok(out)
    }
}

/// Idler wavelength (nm) from `1/λ_i = 1/λ_p − 1/λ_s`.
pub fn idler_wavelength(pump_nm: f64, signal_nm: f64) -> Result<f64> {
    if !(pump_nm > 0.0 && signal_nm > pump_nm && signal_nm.is_finite()) {
        return Err(Error::Domain(format!(
            "no downconversion for pump {pump_nm} nm and signal {signal_nm} nm"
        )));
    }
    Ok(pump_nm * signal_nm / (signal_nm - pump_nm))
}

/// Wavevector `2π n/λ` in 1/m.
fn wavevector(
    registry: &MaterialRegistry,
    material: &str,
    axis: Axis,
    wavelength_nm: f64,
    temperature_c: f64,
) -> Result<f64> {
    let n = registry
        .get(material, axis)?
        .refractive_index(wavelength_nm * 1e-3, temperature_c)?;
    Ok(2.0 * PI * n / (wavelength_nm * 1e-9))
}

/// `k_s + k_i − k_p`, the mismatch without grating, 1/m.
pub fn bulk_mismatch(registry: &MaterialRegistry, config: &QpmConfig) -> Result<f64> {
    let t = config.temperature_c;
    let m = config.material.as_str();
    let kp = wavevector(registry, m, config.axes.pump, config.pump_nm, t)?;
    let ks = wavevector(registry, m, config.axes.signal, config.signal_nm, t)?;
    let ki = wavevector(registry, m, config.axes.idler, config.idler_nm, t)?;
    Ok(ks + ki - kp)
}

/// Longitudinal mismatch `Δk_z = k_s + k_i − k_p + K`, 1/m.
pub fn qpm_mismatch(registry: &MaterialRegistry, config: &QpmConfig) -> Result<f64> {
    let k = if config.poling_period_um.is_infinite() {
        0.0
    } else {
        config.grating_wavevector()
    };
    Ok(bulk_mismatch(registry, config)? + k)
}

/// Poling period (µm) that phase-matches `signal_nm` for the given pump.
///
/// Returns `f64::INFINITY` when the bulk mismatch already vanishes (no
/// grating needed). Bisection over [`POLING_BRACKET_UM`].
pub fn solve_poling_period(
    registry: &MaterialRegistry,
    material: &str,
    signal_nm: f64,
    pump_nm: f64,
    temperature_c: f64,
) -> Result<f64> {
    let probe = QpmConfig::new(
        material,
        pump_nm,
        signal_nm,
        f64::INFINITY,
        1.0,
        temperature_c,
    )?;
    solve_poling_period_for(registry, &probe)
}

/// [`solve_poling_period`] for the wavelengths, temperature and axes of
/// `config`; its own poling period is ignored.
pub fn solve_poling_period_for(registry: &MaterialRegistry, config: &QpmConfig) -> Result<f64> {
    let signal_nm = config.signal_nm;
    let bulk = bulk_mismatch(registry, config)?;
    if bulk.abs() < MISMATCH_TOLERANCE {
        return Ok(f64::INFINITY);
    }
    let residual = |period_um: f64| bulk + 2.0 * PI / (period_um * 1e-6);

    let [mut lo, mut hi] = POLING_BRACKET_UM;
    let (r_lo, r_hi) = (residual(lo), residual(hi));
    if r_lo.signum() == r_hi.signum() {
        return Err(Error::Solver(format!(
            "no poling period in [{lo}, {hi}] um phase-matches {signal_nm} nm \
             (bulk mismatch {bulk:.6e} 1/m)"
        )));
    }
    // residual decreases monotonically with the period
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = residual(mid);
        if r.abs() < 1e-6 * MISMATCH_TOLERANCE || hi - lo < 1e-13 {
            return Ok(mid);
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Relative plane-wave downconversion intensity over a signal-wavelength
/// grid (nm), idler slaved to energy conservation. Values are normalized
/// to the phase-matched peak, so the result is `sinc²(L Δk_z / 2)`.
pub fn pm_spectrum(
    registry: &MaterialRegistry,
    config: &QpmConfig,
    signal_grid_nm: &[f64],
) -> Result<Vec<(f64, f64)>> {
    pm_spectrum_with(
        registry,
        config,
        signal_grid_nm,
        &InteractionConstants::default(),
    )
}

/// [`pm_spectrum`] with explicit interaction constants. The constants set
/// the absolute scale and cancel in the normalization.
pub fn pm_spectrum_with(
    registry: &MaterialRegistry,
    config: &QpmConfig,
    signal_grid_nm: &[f64],
    constants: &InteractionConstants,
) -> Result<Vec<(f64, f64)>> {
    constants.validate()?;
    let length = config.length_m();
    let amplitude = constants.coupling() * length;
    let peak = amplitude * amplitude;
    signal_grid_nm
        .iter()
        .map(|&ls| {
            let tuned = config.retuned(ls)?;
            let dk = qpm_mismatch(registry, &tuned)?;
            let raw = (amplitude * sinc(0.5 * length * dk)).powi(2);
            let value = if peak > 0.0 { raw / peak } else { 1.0 };
            Ok((ls, value))
        })
        .collect()
}

/// Signal wavelength (nm) at which the configured grating is exactly
/// phase-matched, searched outward from the configured signal wavelength.
pub fn phase_matched_signal(registry: &MaterialRegistry, config: &QpmConfig) -> Result<f64> {
    let mismatch = |ls: f64| -> Result<f64> { qpm_mismatch(registry, &config.retuned(ls)?) };
    let start = config.signal_nm;
    let f0 = mismatch(start)?;
    if f0 == 0.0 {
        return Ok(start);
    }
    let mut step = 0.01;
    let mut bracket = None;
    while step < 0.25 * (start - config.pump_nm) {
        for other in [start - step, start + step] {
            if other <= config.pump_nm {
                continue;
            }
            if let Ok(f) = mismatch(other) {
                if f.signum() != f0.signum() {
                    bracket = Some(if other < start {
                        (other, start)
                    } else {
                        (start, other)
                    });
                    break;
                }
            }
        }
        if bracket.is_some() {
            break;
        }
        step *= 2.0;
    }
    let (mut lo, mut hi) = bracket.ok_or_else(|| {
        Error::Solver(format!(
            "no phase-matched signal wavelength near {start} nm"
        ))
    })?;
    let f_lo = mismatch(lo)?;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let f = mismatch(mid)?;
        if f.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Full width at half maximum (nm, in signal wavelength) of the central
/// phase-matching peak.
pub fn spectrum_fwhm(registry: &MaterialRegistry, config: &QpmConfig) -> Result<f64> {
    let peak = phase_matched_signal(registry, config)?;
    let length = config.length_m();
    if length == 0.0 {
        return Err(Error::Domain(
            "zero-length crystal has no finite bandwidth".into(),
        ));
    }
    let excess = |ls: f64| -> Result<f64> {
        let dk = qpm_mismatch(registry, &config.retuned(ls)?)?;
        Ok(sinc(0.5 * length * dk).powi(2) - 0.5)
    };
    let mut edges = [0.0; 2];
    for (slot, dir) in edges.iter_mut().zip([-1.0, 1.0]) {
        let mut step = 0.01;
        let mut outer = peak + dir * step;
        while excess(outer)? > 0.0 {
            step *= 2.0;
            outer = peak + dir * step;
            if step > 0.25 * (peak - config.pump_nm) {
                return Err(Error::Solver("half-maximum point not bracketed".into()));
            }
        }
        let (mut inner, mut out) = (peak, outer);
        for _ in 0..100 {
            let mid = 0.5 * (inner + out);
            if excess(mid)? > 0.0 {
                inner = mid;
            } else {
                out = mid;
            }
            if (out - inner).abs() < 1e-10 {
                break;
            }
        }
        *slot = 0.5 * (inner + out);
    }
    Ok(edges[1] - edges[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::SellmeierModel;
    use approx::assert_relative_eq;

    fn constant_registry(n_pump: f64, n_down: f64) -> MaterialRegistry {
        let pump = SellmeierModel::constant("synthetic", Axis::Y, n_pump);
        let down = SellmeierModel::constant("synthetic", Axis::Z, n_down);
        MaterialRegistry::from_models([pump, down]).unwrap()
    }

    fn synthetic_config(signal_nm: f64, period_um: f64) -> QpmConfig {
        let mut c = QpmConfig::new("synthetic", 532.0, signal_nm, period_um, 4.5, 25.0).unwrap();
        c.axes.pump = Axis::Y;
        c
    }

    #[test]
    fn idler_from_energy_conservation() {
        assert_relative_eq!(
            idler_wavelength(532.0, 810.0).unwrap(),
            1550.0719424460432,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            idler_wavelength(532.0, 1064.0).unwrap(),
            1064.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            idler_wavelength(532.0, 500.0),
            Err(Error::Domain(_))
        ));
        assert!(idler_wavelength(532.0, 532.0).is_err());
    }

    #[test]
    fn config_rejects_inconsistent_wavelengths() {
        assert!(QpmConfig::with_idler("KTP", 532.0, 810.0, 1550.0, 9.6, 4.5, 111.0).is_err());
        assert!(
            QpmConfig::with_idler("KTP", 532.0, 810.0, 1550.0719424460432, 9.6, 4.5, 111.0).is_ok()
        );
        assert!(QpmConfig::new("KTP", 532.0, 810.0, -1.0, 4.5, 111.0).is_err());
        assert!(QpmConfig::new("KTP", 532.0, 810.0, 9.6, -4.5, 111.0).is_err());
    }

    #[test]
    fn infinite_period_gives_bulk_mismatch() {
        let reg = MaterialRegistry::bundled();
        let c = QpmConfig::new("KTP", 532.0, 810.0, f64::INFINITY, 4.5, 111.0).unwrap();
        assert_eq!(
            qpm_mismatch(&reg, &c).unwrap(),
            bulk_mismatch(&reg, &c).unwrap()
        );
    }

    #[test]
    fn synthetic_period_matches_closed_form() {
        let reg = constant_registry(1.9, 1.8);
        let period = solve_poling_period_for(&reg, &synthetic_config(810.0, 1.0)).unwrap();
        // k_p − k_s − k_i with constant indices, computed by hand:
        // 2π (1.9/532e-9 − 1.8/810e-9 − 1.8/λ_i), λ_i = 1/(1/532 − 1/810) nm
        let li = 1.0 / (1.0 / 532.0 - 1.0 / 810.0);
        let expected_um = 1e6 / (1.9 / 532e-9 - 1.8 / 810e-9 - 1.8 / (li * 1e-9));
        assert_relative_eq!(period, expected_um, max_relative = 1e-9);
    }

    #[test]
    fn degenerate_bulk_match_needs_no_grating() {
        let reg = constant_registry(1.8, 1.8);
        let period = solve_poling_period_for(&reg, &synthetic_config(1064.0, 1.0)).unwrap();
        assert!(period.is_infinite());
    }

    #[test]
    fn solver_reports_missing_root() {
        // pump index below the downconverted index: the grating cannot help
        let reg = constant_registry(1.7, 1.8);
        assert!(matches!(
            solve_poling_period_for(&reg, &synthetic_config(810.0, 1.0)),
            Err(Error::Solver(_))
        ));
    }

    #[test]
    fn spectrum_is_one_at_phase_matching_and_zero_at_first_node() {
        let reg = MaterialRegistry::bundled();
        let period = solve_poling_period(&reg, "KTP", 810.0, 532.0, 111.0).unwrap();
        let c = QpmConfig::new("KTP", 532.0, 810.0, period, 4.5, 111.0).unwrap();
        let peak = pm_spectrum(&reg, &c, &[810.0]).unwrap();
        assert_relative_eq!(peak[0].1, 1.0, epsilon = 1e-12);

        // first node of the sinc: L Δk/2 = π, located by bisection
        let length = c.length_m();
        let x = |ls: f64| 0.5 * length * qpm_mismatch(&reg, &c.retuned(ls).unwrap()).unwrap();
        let (mut lo, mut hi) = (810.0, 830.0);
        assert!(x(hi).abs() > PI);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if x(mid).abs() < PI {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let node = pm_spectrum(&reg, &c, &[0.5 * (lo + hi)]).unwrap()[0].1;
        assert!(node < 1e-12, "{node}");
    }

    #[test]
    fn spectrum_ignores_interaction_scale() {
        let reg = MaterialRegistry::bundled();
        let period = solve_poling_period(&reg, "KTP", 810.0, 532.0, 111.0).unwrap();
        let c = QpmConfig::new("KTP", 532.0, 810.0, period, 4.5, 111.0).unwrap();
        let grid: Vec<f64> = (0..41).map(|i| 800.0 + 0.5 * i as f64).collect();
        let a = pm_spectrum(&reg, &c, &grid).unwrap();
        let constants = InteractionConstants {
            chi2: 3.7,
            f1: 2.0 / PI,
            field: 12.0,
            hbar: 0.25,
        };
        let b = pm_spectrum_with(&reg, &c, &grid, &constants).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x.1, y.1, max_relative = 1e-12);
            assert!((0.0..=1.0).contains(&x.1));
        }
    }
}
