//! Closed-form statistics of the coincidence measurements.
//!
//! Angle convention: every `φ` here is a half-wave-plate angle. The analyzer
//! axis sits at `2φ`, which is why correlations go as `cos(4φ_s + 4φ_i)`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::coherence::SPEED_OF_LIGHT;
use crate::error::{Error, Result};

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("{name} = {v} is outside [0, 1]")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn check_nonnegative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!(
            "{name} must be non-negative, got {v}"
        )));
    }
    Ok(())
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::Domain(format!("{name} must be finite, got {v}")));
    }
    Ok(())
}

/// Half-wave-plate angles (rad) of the two CHSH measurement settings per
/// photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChshSettings {
    pub phi_s1: f64,
    pub phi_i1: f64,
    pub phi_s2: f64,
    pub phi_i2: f64,
}

impl Default for ChshSettings {
    fn default() -> Self {
        Self {
            phi_s1: -PI / 16.0,
            phi_i1: 0.0,
            phi_s2: PI / 16.0,
            phi_i2: PI / 8.0,
        }
    }
}

impl ChshSettings {
    pub fn validate(&self) -> Result<()> {
        for (n, v) in [
            ("phi_s1", self.phi_s1),
            ("phi_i1", self.phi_i1),
            ("phi_s2", self.phi_s2),
            ("phi_i2", self.phi_i2),
        ] {
            check_finite(n, v)?;
        }
        Ok(())
    }

    /// `(φ_s¹, φ_i¹), (φ_s¹, φ_i²), (φ_s², φ_i¹), (φ_s², φ_i²)`.
    pub fn pairs(&self) -> [(f64, f64); 4] {
        [
            (self.phi_s1, self.phi_i1),
            (self.phi_s1, self.phi_i2),
            (self.phi_s2, self.phi_i1),
            (self.phi_s2, self.phi_i2),
        ]
    }
}

/// Relative coincidence rate `½[1 + ij V cos(4φ_s + 4φ_i)]` for detector
/// outputs `i, j ∈ {+1, −1}`.
pub fn rate_function(i: i8, j: i8, visibility: f64, phi_s: f64, phi_i: f64) -> Result<f64> {
    if !matches!(i, 1 | -1) || !matches!(j, 1 | -1) {
        return Err(Error::Domain(format!(
            "detector outputs must be ±1, got ({i}, {j})"
        )));
    }
    check_unit("visibility", visibility)?;
    check_finite("phi_s", phi_s)?;
    check_finite("phi_i", phi_i)?;
    let ij = f64::from(i * j);
    Ok(0.5 * (1.0 + ij * visibility * (4.0 * phi_s + 4.0 * phi_i).cos()))
}

/// `E = V cos(4φ_s + 4φ_i)`.
pub fn correlation(visibility: f64, phi_s: f64, phi_i: f64) -> Result<f64> {
    check_unit("visibility", visibility)?;
    check_finite("phi_s", phi_s)?;
    check_finite("phi_i", phi_i)?;
    Ok(visibility * (4.0 * phi_s + 4.0 * phi_i).cos())
}

/// Correlation as the rate ratio `(R₊₊ + R₋₋ − R₊₋ − R₋₊)/(R₊₊ + R₋₋ + R₊₋ + R₋₊)`.
pub fn correlation_from_rates(visibility: f64, phi_s: f64, phi_i: f64) -> Result<f64> {
    let r = |i, j| rate_function(i, j, visibility, phi_s, phi_i);
    let (pp, mm, pm, mp) = (r(1, 1)?, r(-1, -1)?, r(1, -1)?, r(-1, 1)?);
    Ok((pp + mm - pm - mp) / (pp + mm + pm + mp))
}

/// `S = E₁₁ + E₁₂ + |E₂₁ − E₂₂|`.
pub fn chsh_s(e11: f64, e12: f64, e21: f64, e22: f64) -> Result<f64> {
    for (n, e) in [("E11", e11), ("E12", e12), ("E21", e21), ("E22", e22)] {
        if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&e) {
            return Err(Error::Domain(format!("{n} = {e} is outside [-1, 1]")));
        }
    }
    Ok(e11 + e12 + (e21 - e22).abs())
}

/// CHSH value at `settings` when the H/V-basis correlations (idler at
/// `φ_i¹`) carry visibility `v_hv` and the D/A-basis ones (idler at `φ_i²`)
/// carry `v_da`.
pub fn chsh_at(settings: &ChshSettings, v_hv: f64, v_da: f64) -> Result<f64> {
    settings.validate()?;
    let [p11, p12, p21, p22] = settings.pairs();
    let e = |(s, i): (f64, f64), v| correlation(v, s, i);
    chsh_s(e(p11, v_hv)?, e(p12, v_da)?, e(p21, v_hv)?, e(p22, v_da)?)
}

/// `S = √2 (V_HV + V_DA)`.
pub fn s_from_visibilities(v_hv: f64, v_da: f64) -> Result<f64> {
    check_unit("V_HV", v_hv)?;
    check_unit("V_DA", v_da)?;
    Ok(SQRT_2 * (v_hv + v_da))
}

/// Standard deviation of S, `2/√(2 R_max T_R)`.
pub fn sigma_s(peak_rate: f64, integration_time: f64) -> Result<f64> {
    check_positive("peak coincidence rate", peak_rate)?;
    check_positive("integration time", integration_time)?;
    Ok(2.0 / (2.0 * peak_rate * integration_time).sqrt())
}

/// Violation speed `x = (S − 2)√(2 R_max)/2` in s^(−1/2).
pub fn violation_speed(s: f64, peak_rate: f64) -> Result<f64> {
    check_finite("S", s)?;
    check_positive("peak coincidence rate", peak_rate)?;
    Ok((s - 2.0) * (2.0 * peak_rate).sqrt() / 2.0)
}

/// Peak rate implied by a measured S and violation speed.
pub fn implied_peak_rate(s: f64, speed: f64) -> Result<f64> {
    check_finite("S", s)?;
    check_finite("violation speed", speed)?;
    if s == 2.0 {
        return Err(Error::Domain("S = 2 carries no rate information".into()));
    }
    let root = 2.0 * speed / (s - 2.0);
    if root < 0.0 {
        return Err(Error::Domain(
            "S − 2 and the violation speed differ in sign".into(),
        ));
    }
    Ok(root * root / 2.0)
}

/// Mean pair number per gate `m = Δt β P λ/(hc)` and the probability of two
/// or more pairs, `1 − (1 + m)e^{−m}`.
///
/// `pump_power_w` in W, `pump_wavelength_m` in m.
pub fn multi_pair_probability(
    gate_s: f64,
    efficiency: f64,
    pump_power_w: f64,
    pump_wavelength_m: f64,
) -> Result<(f64, f64)> {
    check_positive("gate time", gate_s)?;
    check_nonnegative("conversion efficiency", efficiency)?;
    check_nonnegative("pump power", pump_power_w)?;
    check_positive("pump wavelength", pump_wavelength_m)?;
    let m = gate_s * efficiency * pump_power_w * pump_wavelength_m / (PLANCK * SPEED_OF_LIGHT);
    Ok((m, multi_pair_from_mean(m)?))
}

/// `1 − (1 + m)e^{−m}`.
pub fn multi_pair_from_mean(m: f64) -> Result<f64> {
    check_nonnegative("mean pair number", m)?;
    Ok(-(-m).exp_m1() - m * (-m).exp())
}

/// `γ_c = μ_{i|s} γ_s`.
pub fn pair_coupling(gamma_s: f64, mu: f64) -> Result<f64> {
    check_unit("gamma_s", gamma_s)?;
    check_unit("mu", mu)?;
    Ok(mu * gamma_s)
}

/// Frequency bandwidth (THz) of a wavelength band `Δλ` at `λ`, `cΔλ/λ²`.
pub fn bandwidth_thz(bandwidth_nm: f64, center_nm: f64) -> Result<f64> {
    check_positive("filter bandwidth", bandwidth_nm)?;
    check_positive("filter center", center_nm)?;
    Ok(SPEED_OF_LIGHT * bandwidth_nm * 1e-9 / (center_nm * 1e-9).powi(2) * 1e-12)
}

/// Fiber pair rate per THz of bandwidth and per mW of pump,
/// `R_c/(Δν·P_p)` in s⁻¹ THz⁻¹ mW⁻¹.
pub fn production_rate(
    pair_rate: f64,
    bandwidth_nm: f64,
    center_nm: f64,
    pump_mw: f64,
) -> Result<f64> {
    check_nonnegative("pair rate", pair_rate)?;
    check_positive("pump power", pump_mw)?;
    Ok(pair_rate / (bandwidth_thz(bandwidth_nm, center_nm)? * pump_mw))
}

/// Accidental coincidences `R_s (1 − e^{−R_i Δt})`: the chance that at
/// least one uncorrelated idler lands in a signal-triggered gate.
pub fn accidental_rate(signal_rate: f64, idler_rate: f64, gate_s: f64) -> Result<f64> {
    check_nonnegative("signal rate", signal_rate)?;
    check_nonnegative("idler rate", idler_rate)?;
    check_nonnegative("gate time", gate_s)?;
    Ok(signal_rate * -(-idler_rate * gate_s).exp_m1())
}

/// Wavelength resolution (nm) of timing-based spectroscopy, `λ²/(c Δt)`.
pub fn spectral_resolution(wavelength_nm: f64, gate_s: f64) -> Result<f64> {
    check_positive("wavelength", wavelength_nm)?;
    check_positive("gate time", gate_s)?;
    let l = wavelength_nm * 1e-9;
    Ok(l * l / (SPEED_OF_LIGHT * gate_s) * 1e9)
}

/// Measured rates and settings of one source configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRecord {
    pub pump_mw: f64,
    pub signal_rate: f64,
    pub idler_rate: f64,
    /// Pairs generated in the crystal, 1/s.
    pub generated_rate: f64,
    /// Pairs coupled into both fibers, 1/s.
    pub pair_rate: f64,
    #[serde(default)]
    pub gate_s: Option<f64>,
    #[serde(default)]
    pub gate_rate: Option<f64>,
    pub transmission_s: f64,
    pub transmission_i: f64,
    pub filter_bandwidth_nm: f64,
    pub filter_center_nm: f64,
}

impl CountRecord {
    pub fn validate(&self) -> Result<()> {
        check_positive("pump power", self.pump_mw)?;
        for (n, v) in [
            ("signal rate", self.signal_rate),
            ("idler rate", self.idler_rate),
            ("generated rate", self.generated_rate),
            ("pair rate", self.pair_rate),
        ] {
            check_nonnegative(n, v)?;
        }
        for (n, v) in [("gate time", self.gate_s), ("gate rate", self.gate_rate)] {
            if let Some(v) = v {
                check_nonnegative(n, v)?;
            }
        }
        for (n, t) in [
            ("signal transmission", self.transmission_s),
            ("idler transmission", self.transmission_i),
        ] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Domain(format!("{n} = {t} is outside (0, 1]")));
            }
        }
        check_positive("filter bandwidth", self.filter_bandwidth_nm)?;
        check_positive("filter center", self.filter_center_nm)
    }

    pub fn production_rate(&self) -> Result<f64> {
        self.validate()?;
        production_rate(
            self.pair_rate,
            self.filter_bandwidth_nm,
            self.filter_center_nm,
            self.pump_mw,
        )
    }

    /// Accidentals in the configured gate, or `None` without a gate.
    pub fn accidental_rate(&self) -> Result<Option<f64>> {
        self.validate()?;
        self.gate_s
            .map(|g| accidental_rate(self.signal_rate, self.idler_rate, g))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rate_function_examples() {
        assert_eq!(rate_function(1, 1, 1.0, 0.0, 0.0).unwrap(), 1.0);
        assert_eq!(rate_function(1, -1, 1.0, 0.0, 0.0).unwrap(), 0.0);
        assert!(rate_function(2, 1, 1.0, 0.0, 0.0).is_err());
        assert!(rate_function(1, 1, 1.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn correlation_examples() {
        assert_eq!(correlation(1.0, 0.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(
            correlation(1.0, PI / 16.0, 0.0).unwrap(),
            SQRT_2 / 2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn chsh_examples() {
        let s = ChshSettings::default();
        assert_relative_eq!(
            chsh_at(&s, 1.0, 1.0).unwrap(),
            2.0 * SQRT_2,
            epsilon = 1e-12
        );
        assert_eq!(chsh_s(0.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!(chsh_s(1.1, 0.0, 0.0, 0.0).is_err());
        assert_relative_eq!(
            chsh_at(&s, 0.95, 0.95).unwrap(),
            SQRT_2 * 1.9,
            epsilon = 1e-12
        );
    }

    #[test]
    fn visibility_threshold() {
        assert_relative_eq!(s_from_visibilities(1.0, 1.0).unwrap(), 2.0 * SQRT_2);
        assert!(s_from_visibilities(1.0, 0.41).unwrap() < 2.0);
        assert!(s_from_visibilities(1.0, 0.42).unwrap() > 2.0);
        assert!((s_from_visibilities(0.959, 0.903).unwrap() - 2.6283).abs() < 0.01);
        assert!(s_from_visibilities(1.1, 0.5).is_err());
    }

    #[test]
    fn sigma_and_speed() {
        assert_eq!(sigma_s(2.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(
            sigma_s(3.0, 8.0).unwrap(),
            sigma_s(3.0, 2.0).unwrap() / 2.0,
            epsilon = 1e-15
        );
        assert_eq!(violation_speed(2.0, 100.0).unwrap(), 0.0);
        assert!(violation_speed(1.9, 100.0).unwrap() < 0.0);
        assert!(sigma_s(0.0, 1.0).is_err());
        let r = implied_peak_rate(2.679, 56.0).unwrap();
        assert!((r - 1.36e4).abs() / 1.36e4 < 0.01, "{r}");
        assert_relative_eq!(
            violation_speed(2.679, r).unwrap(),
            56.0,
            max_relative = 1e-9
        );
        let x = 177.0 / 10f64.sqrt();
        assert!((55.0..=56.0).contains(&x));
    }

    #[test]
    fn multi_pair_example() {
        let (m, p) = multi_pair_probability(5e-9, 3e-10, 540e-6, 532e-9).unwrap();
        // the stated inputs give 2.17e-3, which rounds to 2e-3 at one figure
        assert_relative_eq!(
            m,
            5e-9 * 3e-10 * 540e-6 * 532e-9 / (PLANCK * SPEED_OF_LIGHT),
            max_relative = 1e-15
        );
        assert_eq!(format!("{m:.0e}"), "2e-3");
        assert_relative_eq!(p, m * m / 2.0, max_relative = 2.0 * m);
        let p2 = multi_pair_from_mean(2e-3).unwrap();
        assert!((p2 / 2e-6 - 1.0).abs() < 0.05, "{p2}");
        assert_eq!(multi_pair_from_mean(0.0).unwrap(), 0.0);
        assert!(multi_pair_probability(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn coupling_examples() {
        assert_eq!(pair_coupling(1.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(pair_coupling(0.46, 0.27).unwrap(), 0.1242, epsilon = 1e-12);
        assert_eq!(pair_coupling(0.3, 0.0).unwrap(), 0.0);
        assert!(pair_coupling(1.2, 0.5).is_err());
    }

    #[test]
    fn production_rate_examples() {
        let r1 = production_rate(274e3, 2.0, 810.0, 60.0).unwrap();
        assert!((r1 / 5.0e3 - 1.0).abs() < 0.03, "{r1}");
        let r3 = production_rate(27e3, 2.0, 810.0, 0.54).unwrap();
        assert!((r3 / 55e3 - 1.0).abs() < 0.03, "{r3}");
        let half = production_rate(27e3, 2.0, 810.0, 1.08).unwrap();
        assert_relative_eq!(half, r3 / 2.0, max_relative = 1e-15);
        assert_relative_eq!(bandwidth_thz(2.0, 810.0).unwrap(), 0.914, epsilon = 1e-3);
    }

    #[test]
    fn accidental_examples() {
        assert_eq!(accidental_rate(1e5, 0.0, 5e-9).unwrap(), 0.0);
        assert_relative_eq!(
            accidental_rate(1e5, 1e5, 5e-9).unwrap(),
            49.99,
            epsilon = 0.01
        );
        let (rs, ri, dt) = (2e3, 3e3, 1e-9);
        assert!((accidental_rate(rs, ri, dt).unwrap() / (rs * ri * dt) - 1.0).abs() < 0.01);
    }

    #[test]
    fn resolution_examples() {
        let r = spectral_resolution(1550.0, 1e-9).unwrap();
        assert!((r / 8e-3 - 1.0).abs() < 0.02, "{r}");
        assert_relative_eq!(
            spectral_resolution(1550.0, 2e-9).unwrap(),
            r / 2.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            spectral_resolution(810.0, 1e-9).unwrap(),
            2.19e-3,
            epsilon = 1e-5
        );
    }

    #[test]
    fn count_record_validation() {
        let mut rec = CountRecord {
            pump_mw: 60.0,
            signal_rate: 2.32e6,
            idler_rate: 2.39e6,
            generated_rate: 8.61e6,
            pair_rate: 274e3,
            gate_s: None,
            gate_rate: None,
            transmission_s: 1.0,
            transmission_i: 0.35,
            filter_bandwidth_nm: 2.0,
            filter_center_nm: 810.0,
        };
        assert!(rec.production_rate().is_ok());
        assert_eq!(rec.accidental_rate().unwrap(), None);
        rec.gate_s = Some(5e-9);
        assert!(rec.accidental_rate().unwrap().unwrap() > 0.0);
        rec.transmission_i = 0.0;
        assert!(rec.validate().is_err());
    }

    proptest! {
        #[test]
        fn rates_sum_to_two(v in 0.0f64..=1.0, s in -3.0f64..3.0, i in -3.0f64..3.0) {
            let total: f64 = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
                .iter()
                .map(|&(a, b)| rate_function(a, b, v, s, i).unwrap())
                .sum();
            prop_assert!((total - 2.0).abs() < 1e-12);
            let r = rate_function(1, 1, v, s, i).unwrap();
            prop_assert!(r >= (1.0 - v) / 2.0 - 1e-15 && r <= (1.0 + v) / 2.0 + 1e-15);
        }

        #[test]
        fn ratio_form_matches_closed_form(v in 0.0f64..=1.0, s in -3.0f64..3.0, i in -3.0f64..3.0) {
            let a = correlation_from_rates(v, s, i).unwrap();
            let b = correlation(v, s, i).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn chsh_matches_visibility_sum(vh in 0.0f64..=1.0, vd in 0.0f64..=1.0) {
            let a = chsh_at(&ChshSettings::default(), vh, vd).unwrap();
            let b = s_from_visibilities(vh, vd).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn speed_sigma_identity(s in 1.0f64..2.9, r in 1.0f64..1e6, t in 0.01f64..1e3) {
            let lhs = violation_speed(s, r).unwrap() * t.sqrt();
            let rhs = (s - 2.0) / sigma_s(r, t).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        }

        #[test]
        fn poisson_tail(logm in -6.0f64..0.0) {
            let m = 10f64.powf(logm);
            let closed = multi_pair_from_mean(m).unwrap();
            let mut term = (-m).exp() * m * m / 2.0;
            let mut series = 0.0;
            let mut n = 2.0;
            while term > 1e-30 {
                series += term;
                n += 1.0;
                term *= m / n;
            }
            prop_assert!((closed - series).abs() < 1e-12);
        }
    }
}
