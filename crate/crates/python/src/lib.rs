//! Python bindings for the `pairsource` model.
//!
//! Errors caused by bad inputs raise `pairsource.InputError` (a
//! `ValueError`); solver and quadrature failures raise
//! `pairsource.NumericalError` (a `RuntimeError`).

use std::path::PathBuf;

use pairsource::coherence::{self, Delays};
use pairsource::experiment;
use pairsource::fixtures;
use pairsource::materials::{self, Axis};
use pairsource::phasematch::{self, QpmConfig};
use pairsource::quantum::{self, Matrix4c, C64 as Complex64};
use pairsource::scenario::Scenario;
use pairsource::tomography::{self, Method, Projector, TomographyEntry, TomographyRecord};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(pairsource, InputError, PyValueError);
create_exception!(pairsource, NumericalError, PyRuntimeError);

fn to_py(e: pairsource::Error) -> PyErr {
    if e.is_input_error() {
        InputError::new_err(e.to_string())
    } else {
        NumericalError::new_err(e.to_string())
    }
}

trait OrPyErr<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPyErr<T> for pairsource::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn parse<T: std::str::FromStr<Err = pairsource::Error>>(s: &str) -> PyResult<T> {
    s.parse().py_err()
}

/// Dispersion models keyed by material and axis.
#[pyclass(name = "MaterialRegistry", module = "pairsource")]
pub struct PyRegistry {
    inner: materials::MaterialRegistry,
}

#[pymethods]
impl PyRegistry {
    /// The bundled registry, or the models in `path`.
    #[new]
    #[pyo3(signature = (path=None))]
    fn new(path: Option<PathBuf>) -> PyResult<Self> {
        let inner = match path {
            Some(p) => materials::load_registry(p).py_err()?,
            None => materials::MaterialRegistry::bundled(),
        };
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(material, axis)` pairs.
    fn models(&self) -> Vec<(String, String)> {
        self.inner
            .models()
            .map(|m| (m.material.clone(), m.axis.to_string()))
            .collect()
    }

    fn refractive_index(
        &self,
        material: &str,
        axis: &str,
        wavelength_um: f64,
        temperature_c: f64,
    ) -> PyResult<f64> {
        let axis: Axis = parse(axis)?;
        self.inner
            .get(material, axis)
            .and_then(|m| m.refractive_index(wavelength_um, temperature_c))
            .py_err()
    }

    fn group_index(
        &self,
        material: &str,
        axis: &str,
        wavelength_um: f64,
        temperature_c: f64,
    ) -> PyResult<f64> {
        let axis: Axis = parse(axis)?;
        self.inner
            .get(material, axis)
            .and_then(|m| m.group_index(wavelength_um, temperature_c))
            .py_err()
    }

    fn __repr__(&self) -> String {
        format!("MaterialRegistry({} models)", self.inner.len())
    }
}

fn registry_or_bundled(registry: Option<&PyRegistry>) -> materials::MaterialRegistry {
    registry.map_or_else(materials::MaterialRegistry::bundled, |r| r.inner.clone())
}

#[pyfunction]
fn idler_wavelength(pump_nm: f64, signal_nm: f64) -> PyResult<f64> {
    phasematch::idler_wavelength(pump_nm, signal_nm).py_err()
}

/// Grating period (µm) phase-matching the given wavelengths, z-polarized fields.
#[pyfunction]
#[pyo3(signature = (material, signal_nm, pump_nm, temperature_c, registry=None))]
fn solve_poling_period(
    material: &str,
    signal_nm: f64,
    pump_nm: f64,
    temperature_c: f64,
    registry: Option<&PyRegistry>,
) -> PyResult<f64> {
    let reg = registry_or_bundled(registry);
    phasematch::solve_poling_period(&reg, material, signal_nm, pump_nm, temperature_c).py_err()
}

/// `[(signal_nm, intensity)]` normalized to the phase-matched peak.
#[pyfunction]
#[pyo3(signature = (material, pump_nm, signal_nm, poling_period_um, length_mm, temperature_c, grid_nm, registry=None))]
#[allow(clippy::too_many_arguments)]
fn pm_spectrum(
    material: &str,
    pump_nm: f64,
    signal_nm: f64,
    poling_period_um: f64,
    length_mm: f64,
    temperature_c: f64,
    grid_nm: Vec<f64>,
    registry: Option<&PyRegistry>,
) -> PyResult<Vec<(f64, f64)>> {
    let reg = registry_or_bundled(registry);
    let config = QpmConfig::new(
        material,
        pump_nm,
        signal_nm,
        poling_period_um,
        length_mm,
        temperature_c,
    )
    .py_err()?;
    phasematch::pm_spectrum(&reg, &config, &grid_nm).py_err()
}

/// `½·max(0, 1 − |τ_X − κ|/|τ_Z|)`.
#[pyfunction]
#[pyo3(signature = (tau_x, tau_z, kappa=0.0))]
fn asymptotic_rho(tau_x: f64, tau_z: f64, kappa: f64) -> PyResult<f64> {
    coherence::asymptotic_rho(Delays {
        tau_x,
        tau_z,
        kappa,
    })
    .py_err()
}

fn scan_rows<'py>(
    py: Python<'py>,
    points: &[coherence::ScanPoint],
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    points
        .iter()
        .map(|p| {
            let d = PyDict::new(py);
            let r = &p.result;
            d.set_item("length_mm", p.length_mm)?;
            d.set_item("thickness_mm", p.thickness_mm)?;
            d.set_item("rho", r.rho)?;
            d.set_item("visibility", r.visibility)?;
            d.set_item("tau_x", r.tau_x)?;
            d.set_item("tau_z", r.tau_z)?;
            d.set_item("kappa", r.kappa)?;
            d.set_item("error_estimate", r.diagnostics.error_estimate)?;
            Ok(d)
        })
        .collect()
}

/// Evaluates a scenario file (or bundled scenario name) over its grids.
/// One dict per grid point, length-major.
#[pyfunction]
#[pyo3(signature = (scenario, registry=None))]
fn coherence_scan<'py>(
    py: Python<'py>,
    scenario: PathBuf,
    registry: Option<&PyRegistry>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let reg = registry_or_bundled(registry);
    let sc = Scenario::load(&scenario).py_err()?;
    let base = sc.source_config(&reg).py_err()?;
    let lengths = sc.lengths().py_err()?;
    let ds = sc.thicknesses().py_err()?;
    let points = py
        .detach(|| coherence::coherence_scan(&reg, &base, &lengths, ds.as_deref()))
        .py_err()?;
    scan_rows(py, &points)
}

/// Plate thickness (mm) compensating the scenario's crystal at its configured length.
#[pyfunction]
#[pyo3(signature = (scenario, registry=None))]
fn solve_plate_thickness(scenario: PathBuf, registry: Option<&PyRegistry>) -> PyResult<f64> {
    let reg = registry_or_bundled(registry);
    let sc = Scenario::load(&scenario).py_err()?;
    let config = sc.source_config(&reg).py_err()?;
    coherence::solve_plate_thickness(&reg, &config).py_err()
}

/// Two-qubit density matrix in the (VV, VH, HV, HH) basis.
#[pyclass(name = "DensityMatrix", module = "pairsource")]
pub struct PyDensity {
    inner: quantum::DensityMatrix,
}

fn matrix_from_rows(rows: Vec<Vec<Complex64>>) -> PyResult<Matrix4c> {
    if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
        return Err(InputError::new_err("density matrix must be 4 x 4"));
    }
    Ok(Matrix4c::from_fn(|i, j| rows[i][j]))
}

#[pymethods]
impl PyDensity {
    /// Validates `rows`; `lenient` accepts rounded published matrices with
    /// small negative eigenvalues.
    #[new]
    #[pyo3(signature = (rows, lenient=false))]
    fn new(rows: Vec<Vec<Complex64>>, lenient: bool) -> PyResult<Self> {
        let m = matrix_from_rows(rows)?;
        let inner = if lenient {
            quantum::DensityMatrix::fixture(m)
        } else {
            quantum::DensityMatrix::new(m)
        }
        .py_err()?;
        Ok(Self { inner })
    }

    /// Loads a matrix file, or `rho_exp` / `bell_phi0` for the bundled ones.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = match path {
            "rho_exp" => fixtures::parse_density_fixture(fixtures::RHO_EXP, "rho_exp"),
            "bell_phi0" => fixtures::parse_density_fixture(fixtures::BELL_PHI0, "bell_phi0"),
            p => fixtures::load_density_fixture(p),
        }
        .py_err()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (phi=0.0))]
    fn bell(phi: f64) -> Self {
        Self {
            inner: quantum::bell_state(phi),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (visibility, phi=0.0))]
    fn mixed(visibility: f64, phi: f64) -> PyResult<Self> {
        Ok(Self {
            inner: quantum::visibility_mixed_state(visibility, phi).py_err()?,
        })
    }

    fn rows(&self) -> Vec<Vec<Complex64>> {
        let m = self.inner.matrix();
        (0..4)
            .map(|i| (0..4).map(|j| m[(i, j)]).collect())
            .collect()
    }

    /// Element by 1-based polarization labels, 1 = V, 2 = H.
    fn element(&self, i: usize, j: usize, k: usize, l: usize) -> PyResult<Complex64> {
        self.inner.element(i, j, k, l).py_err()
    }

    fn eigenvalues(&self) -> [f64; 4] {
        self.inner.eigenvalues()
    }

    fn purity(&self) -> f64 {
        self.inner.purity()
    }

    fn concurrence(&self) -> f64 {
        quantum::concurrence(&self.inner)
    }

    fn eof(&self) -> f64 {
        quantum::eof(&self.inner)
    }

    #[pyo3(signature = (phi=0.0))]
    fn fidelity(&self, phi: f64) -> f64 {
        quantum::fidelity(&self.inner, phi)
    }

    /// `(F, φ)` maximized over the Bell phase.
    fn max_fidelity(&self) -> (f64, f64) {
        quantum::max_fidelity(&self.inner)
    }

    /// CHSH value at the default analyzer angles.
    fn chsh(&self) -> PyResult<f64> {
        quantum::chsh_from_density(&self.inner, &experiment::ChshSettings::default()).py_err()
    }

    fn project_positive(&self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.project_positive().py_err()?,
        })
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(purity={:.6})", self.inner.purity())
    }
}

/// Synthetic tomography counts as `(signal, idler, counts, time_s)` tuples.
/// Poisson samples when `seed` is given, rounded expectations otherwise.
#[pyfunction]
#[pyo3(signature = (state, pairs, seed=None))]
fn simulate_counts(
    state: &PyDensity,
    pairs: f64,
    seed: Option<u64>,
) -> PyResult<Vec<(String, String, u64, f64)>> {
    let record =
        tomography::simulate_counts(&state.inner, &tomography::standard_settings(), pairs, seed)
            .py_err()?;
    Ok(record
        .entries
        .iter()
        .map(|e| {
            (
                e.signal.to_string(),
                e.idler.to_string(),
                e.counts,
                e.time_s,
            )
        })
        .collect())
}

/// Reconstructs a state from 16 `(signal, idler, counts, time_s)` tuples.
#[pyfunction]
#[pyo3(signature = (entries, method="linear"))]
fn reconstruct(entries: Vec<(String, String, u64, f64)>, method: &str) -> PyResult<PyDensity> {
    let method: Method = parse(method)?;
    let entries = entries
        .into_iter()
        .map(|(s, i, counts, time_s)| {
            Ok(TomographyEntry {
                signal: parse::<Projector>(&s)?,
                idler: parse::<Projector>(&i)?,
                counts,
                time_s,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let inner = tomography::reconstruct(&TomographyRecord { entries }, method).py_err()?;
    Ok(PyDensity { inner })
}

#[pyfunction]
fn correlation(visibility: f64, phi_s: f64, phi_i: f64) -> PyResult<f64> {
    experiment::correlation(visibility, phi_s, phi_i).py_err()
}

#[pyfunction]
fn s_from_visibilities(v_hv: f64, v_da: f64) -> PyResult<f64> {
    experiment::s_from_visibilities(v_hv, v_da).py_err()
}

#[pyfunction]
fn sigma_s(peak_rate: f64, integration_time: f64) -> PyResult<f64> {
    experiment::sigma_s(peak_rate, integration_time).py_err()
}

#[pyfunction]
fn violation_speed(s: f64, peak_rate: f64) -> PyResult<f64> {
    experiment::violation_speed(s, peak_rate).py_err()
}

#[pyfunction]
fn implied_peak_rate(s: f64, speed: f64) -> PyResult<f64> {
    experiment::implied_peak_rate(s, speed).py_err()
}

/// `(m, P(n ≥ 2))` for a gate (s), efficiency, pump power (W) and wavelength (m).
#[pyfunction]
fn multi_pair_probability(
    gate_s: f64,
    efficiency: f64,
    pump_power_w: f64,
    pump_wavelength_m: f64,
) -> PyResult<(f64, f64)> {
    experiment::multi_pair_probability(gate_s, efficiency, pump_power_w, pump_wavelength_m).py_err()
}

#[pyfunction]
fn production_rate(
    pair_rate: f64,
    bandwidth_nm: f64,
    center_nm: f64,
    pump_mw: f64,
) -> PyResult<f64> {
    experiment::production_rate(pair_rate, bandwidth_nm, center_nm, pump_mw).py_err()
}

#[pyfunction]
fn accidental_rate(signal_rate: f64, idler_rate: f64, gate_s: f64) -> PyResult<f64> {
    experiment::accidental_rate(signal_rate, idler_rate, gate_s).py_err()
}

/// Wavelength resolution (nm) of timing-based spectroscopy.
#[pyfunction]
fn spectral_resolution(wavelength_nm: f64, gate_s: f64) -> PyResult<f64> {
    experiment::spectral_resolution(wavelength_nm, gate_s).py_err()
}

/// Runs the command-line front end in-process; returns `(exit_code, stdout, stderr)`.
#[pyfunction]
fn run_cli(args: Vec<String>) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("pairsource".to_string()).chain(args);
    let code = pairsource::cli::main_with_args(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    )
}

#[pymodule]
#[pyo3(name = "pairsource")]
fn pairsource_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("InputError", py.get_type::<InputError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add_class::<PyRegistry>()?;
    m.add_class::<PyDensity>()?;
    m.add_function(wrap_pyfunction!(idler_wavelength, m)?)?;
    m.add_function(wrap_pyfunction!(solve_poling_period, m)?)?;
    m.add_function(wrap_pyfunction!(pm_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_rho, m)?)?;
    m.add_function(wrap_pyfunction!(coherence_scan, m)?)?;
    m.add_function(wrap_pyfunction!(solve_plate_thickness, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_counts, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(correlation, m)?)?;
    m.add_function(wrap_pyfunction!(s_from_visibilities, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_s, m)?)?;
    m.add_function(wrap_pyfunction!(violation_speed, m)?)?;
    m.add_function(wrap_pyfunction!(implied_peak_rate, m)?)?;
    m.add_function(wrap_pyfunction!(multi_pair_probability, m)?)?;
    m.add_function(wrap_pyfunction!(production_rate, m)?)?;
    m.add_function(wrap_pyfunction!(accidental_rate, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_resolution, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
