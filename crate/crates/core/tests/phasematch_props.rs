use pairsource::materials::{Axis, MaterialRegistry};
use pairsource::phasematch::{
    idler_wavelength, phase_matched_signal, pm_spectrum, qpm_mismatch, solve_poling_period,
    spectrum_fwhm, QpmConfig, MISMATCH_TOLERANCE,
};
use proptest::prelude::*;

#[test]
fn solved_period_zeroes_mismatch_for_every_z_cut_material() {
    let reg = MaterialRegistry::bundled();
    let mut materials: Vec<(String, [f64; 2])> = reg
        .models()
        .filter(|m| m.axis == Axis::Z)
        .map(|m| (m.material.clone(), m.temperature_range))
        .collect();
    materials.sort_by(|a, b| a.0.cmp(&b.0));
    assert!(materials.len() >= 3);
    for (material, [t_lo, t_hi]) in materials {
        for k in 0..5 {
            let t = t_lo + (t_hi - t_lo) * k as f64 / 4.0;
            let period = solve_poling_period(&reg, &material, 810.0, 532.0, t).unwrap();
            assert!(
                (1.0..=100.0).contains(&period),
                "{material} at {t} C: {period}"
            );
            let config = QpmConfig::new(&material, 532.0, 810.0, period, 4.5, t).unwrap();
            let dk = qpm_mismatch(&reg, &config).unwrap();
            assert!(dk.abs() < MISMATCH_TOLERANCE, "{material} at {t} C: {dk}");
        }
    }
}

#[test]
fn grating_from_the_source_design_phase_matches_at_operating_temperature() {
    let reg = MaterialRegistry::bundled();
    let config = QpmConfig::new("KTP", 532.0, 810.0, 9.6, 4.5, 111.0).unwrap();
    let phase = qpm_mismatch(&reg, &config).unwrap().abs() * config.length_m() / 2.0;
    assert!(phase < 0.5, "|dk| L/2 = {phase} rad");
}

/// Half-maximum crossings found on a dense grid by linear interpolation.
fn dense_grid_fwhm(reg: &MaterialRegistry, config: &QpmConfig, peak: f64) -> f64 {
    let n = 40_001;
    let half_span = 10.0;
    let grid: Vec<f64> = (0..n)
        .map(|k| peak - half_span + 2.0 * half_span * k as f64 / (n - 1) as f64)
        .collect();
    let spectrum = pm_spectrum(reg, config, &grid).unwrap();
    let centre = n / 2;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> f64 {
        let mut prev = centre;
        for k in range {
            if spectrum[k].1 < 0.5 {
                let (x0, y0) = spectrum[prev];
                let (x1, y1) = spectrum[k];
                return x0 + (0.5 - y0) * (x1 - x0) / (y1 - y0);
            }
            prev = k;
        }
        panic!("no half-maximum crossing within ±{half_span} nm");
    };
    let right = crossing(&mut (centre..n));
    let left = crossing(&mut (0..=centre).rev());
    right - left
}

#[test]
fn fwhm_matches_dense_grid() {
    let reg = MaterialRegistry::bundled();
    let period = solve_poling_period(&reg, "KTP", 810.0, 532.0, 111.0).unwrap();
    for length in [2.0, 3.0, 4.5] {
        let config = QpmConfig::new("KTP", 532.0, 810.0, period, length, 111.0).unwrap();
        let peak = phase_matched_signal(&reg, &config).unwrap();
        let fwhm = spectrum_fwhm(&reg, &config).unwrap();
        let oracle = dense_grid_fwhm(&reg, &config, peak);
        assert!(
            ((fwhm - oracle) / oracle).abs() < 0.01,
            "L = {length}: {fwhm} vs {oracle}"
        );
    }
}

proptest! {
    #[test]
    fn idler_relation_is_an_involution(pump in 300.0f64..1000.0, ratio in 1.05f64..3.0) {
        let signal = pump * ratio;
        let idler = idler_wavelength(pump, signal).unwrap();
        let back = idler_wavelength(pump, idler).unwrap();
        prop_assert!(((back - signal) / signal).abs() < 1e-12);
        prop_assert!((1.0 / pump - 1.0 / signal - 1.0 / idler).abs() * pump < 1e-12);
    }

    #[test]
    fn spectrum_is_bounded_and_peaks_at_phase_matching(offset in -5.0f64..5.0) {
        let reg = MaterialRegistry::bundled();
        let period = solve_poling_period(&reg, "KTP", 810.0, 532.0, 111.0).unwrap();
        let config = QpmConfig::new("KTP", 532.0, 810.0, period, 4.5, 111.0).unwrap();
        let values = pm_spectrum(&reg, &config, &[810.0, 810.0 + offset]).unwrap();
        prop_assert!((values[0].1 - 1.0).abs() < 1e-9);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&values[1].1));
    }
}
