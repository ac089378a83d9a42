//! Two-qubit polarization tomography by linear inversion.
//!
//! The state is expanded as `ρ = Σ x_ab σ_a⊗σ_b` over the 16 Pauli products.
//! Each setting contributes one linear equation for the rate; the 16×16
//! real system is solved and the result normalized by its trace.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix2, SMatrix, SVector, Vector2};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{DensityMatrix, Matrix4c, C64};

/// Ratio of smallest to largest singular value below which a design is
/// treated as singular.
const CONDITION_LIMIT: f64 = 1e-10;

/// Single-photon projection state; (V, H) amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Projector {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Projector {
    pub fn state(self) -> Vector2<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (v, h) = match self {
            Projector::V => (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
            Projector::H => (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
            Projector::D => (C64::new(s, 0.0), C64::new(s, 0.0)),
            Projector::A => (C64::new(-s, 0.0), C64::new(s, 0.0)),
            Projector::R => (C64::new(0.0, -s), C64::new(s, 0.0)),
            Projector::L => (C64::new(0.0, s), C64::new(s, 0.0)),
        };
        Vector2::new(v, h)
    }
}

impl fmt::Display for Projector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Projector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" | "h" => Ok(Projector::H),
            "V" | "v" => Ok(Projector::V),
            "D" | "d" => Ok(Projector::D),
            "A" | "a" => Ok(Projector::A),
            "R" | "r" => Ok(Projector::R),
            "L" | "l" => Ok(Projector::L),
            other => Err(Error::parse(
                "projector",
                format!("unknown projector {other:?}"),
            )),
        }
    }
}

/// The 16 settings (signal, idler) of the standard two-qubit protocol.
pub fn standard_settings() -> Vec<(Projector, Projector)> {
    use Projector::*;
    vec![
        (H, H),
        (H, V),
        (V, V),
        (V, H),
        (R, H),
        (R, V),
        (D, V),
        (D, H),
        (D, R),
        (D, D),
        (R, D),
        (H, D),
        (V, D),
        (V, L),
        (H, L),
        (R, L),
    ]
}

/// One measured setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographyEntry {
    pub signal: Projector,
    pub idler: Projector,
    pub counts: u64,
    /// Acquisition time, s.
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TomographyRecord {
    pub entries: Vec<TomographyEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Exact inversion; the result may be slightly non-positive.
    Linear,
    /// Linear inversion followed by eigenvalue clipping and renormalization.
    Projected,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Method::Linear),
            "projected" | "likelihood-projected" => Ok(Method::Projected),
            other => Err(Error::parse(
                "method",
                format!("unknown reconstruction method {other:?}"),
            )),
        }
    }
}

fn pauli(k: usize) -> Matrix2<C64> {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match k {
        0 => Matrix2::new(one, z, z, one),
        1 => Matrix2::new(z, one, one, z),
        2 => Matrix2::new(z, -i, i, z),
        _ => Matrix2::new(one, z, z, -one),
    }
}

fn pauli_product(k: usize) -> Matrix4c {
    pauli(k / 4).kronecker(&pauli(k % 4))
}

type Design = SMatrix<f64, 16, 16>;

/// Row `k` of the design: `⟨ψ|σ_a⊗σ_b|ψ⟩` for `ψ = ψ_s ⊗ ψ_i`.
fn design_matrix(settings: &[(Projector, Projector)]) -> Result<Design> {
    if settings.len() != 16 {
        return Err(Error::Degenerate(format!(
            "expected 16 settings, got {}",
            settings.len()
        )));
    }
    let basis: Vec<Matrix4c> = (0..16).map(pauli_product).collect();
    let mut m = Design::zeros();
    for (row, (s, i)) in settings.iter().enumerate() {
        let psi = s.state().kronecker(&i.state());
        for (col, b) in basis.iter().enumerate() {
            m[(row, col)] = (psi.adjoint() * b * psi)[(0, 0)].re;
        }
    }
    let sv = m.singular_values();
    let (max, min) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(a, b), &x| (a.max(x), b.min(x)));
    if !(min > CONDITION_LIMIT * max) {
        return Err(Error::Degenerate(
            "settings are not informationally complete".into(),
        ));
    }
    Ok(m)
}

/// Checks that a list of settings is informationally complete.
pub fn check_settings(settings: &[(Projector, Projector)]) -> Result<()> {
    design_matrix(settings).map(|_| ())
}

impl TomographyRecord {
    pub fn settings(&self) -> Vec<(Projector, Projector)> {
        self.entries.iter().map(|e| (e.signal, e.idler)).collect()
    }

    /// Reads `signal,idler,counts,time_s` rows with a header line.
    pub fn from_csv_str(text: &str, context: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for (k, row) in reader.deserialize::<CsvRow>().enumerate() {
            let row = row.map_err(|e| Error::parse(context, format!("row {}: {e}", k + 1)))?;
            entries.push(TomographyEntry {
                signal: row.signal.parse()?,
                idler: row.idler.parse()?,
                counts: row.counts,
                time_s: row.time_s,
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_str(&text, &path.display().to_string())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("signal,idler,counts,time_s\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.signal, e.idler, e.counts, e.time_s
            ));
        }
        out
    }
}

#[derive(Deserialize)]
struct CsvRow {
    signal: String,
    idler: String,
    counts: u64,
    time_s: f64,
}

/// Reconstructs the state from a 16-setting record.
pub fn reconstruct(record: &TomographyRecord, method: Method) -> Result<DensityMatrix> {
    let design = design_matrix(&record.settings())?;
    let mut rates = SVector::<f64, 16>::zeros();
    let mut total = 0u64;
    for (k, e) in record.entries.iter().enumerate() {
        if !(e.time_s > 0.0 && e.time_s.is_finite()) {
            return Err(Error::Data(format!(
                "setting {}{} has acquisition time {}",
                e.signal, e.idler, e.time_s
            )));
        }
        rates[k] = e.counts as f64 / e.time_s;
        total += e.counts;
    }
    if total == 0 {
        return Err(Error::Data("no counts recorded".into()));
    }
    let x = design
        .lu()
        .solve(&rates)
        .ok_or_else(|| Error::Degenerate("design matrix is singular".into()))?;
    let mut m = Matrix4c::zeros();
    for (k, &xk) in x.iter().enumerate() {
        m += pauli_product(k).scale(xk);
    }
    let tr = m.trace().re;
    if !(tr > 0.0) {
        return Err(Error::Data("reconstruction has non-positive trace".into()));
    }
    let rho = DensityMatrix::structural(m.unscale(tr))?;
    match method {
        Method::Linear => Ok(rho),
        Method::Projected => rho.project_positive(),
    }
}

/// Expected coincidence rate fractions `⟨ψ|ρ|ψ⟩` for each setting.
pub fn expected_probabilities(
    rho: &DensityMatrix,
    settings: &[(Projector, Projector)],
) -> Vec<f64> {
    settings
        .iter()
        .map(|(s, i)| {
            let psi = s.state().kronecker(&i.state());
            (psi.adjoint() * rho.matrix() * psi)[(0, 0)].re.max(0.0)
        })
        .collect()
}

/// Synthetic record with `pairs` expected coincidences per setting at unit
/// projection probability and 1 s acquisitions. Without a seed the counts
/// are the rounded expectations; with a seed they are Poisson samples.
pub fn simulate_counts(
    rho: &DensityMatrix,
    settings: &[(Projector, Projector)],
    pairs: f64,
    seed: Option<u64>,
) -> Result<TomographyRecord> {
    if !(pairs > 0.0 && pairs.is_finite()) {
        return Err(Error::Domain(format!(
            "pair number must be positive, got {pairs}"
        )));
    }
    let mut rng = seed.map(StdRng::seed_from_u64);
    let probabilities = expected_probabilities(rho, settings);
    let mut entries = Vec::with_capacity(settings.len());
    for (&(signal, idler), p) in settings.iter().zip(probabilities) {
        let mean = pairs * p;
        let counts = match rng.as_mut() {
            None => mean.round() as u64,
            Some(r) if mean > 0.0 => Poisson::new(mean)
                .map_err(|e| Error::Domain(format!("Poisson mean {mean}: {e}")))?
                .sample(r) as u64,
            Some(_) => 0,
        };
        entries.push(TomographyEntry {
            signal,
            idler,
            counts,
            time_s: 1.0,
        });
    }
    Ok(TomographyRecord { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{bell_state, fidelity, random_density_matrix, visibility_mixed_state};
    use std::f64::consts::PI;

    fn max_diff(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
        (a.matrix() - b.matrix())
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()))
    }

    #[test]
    fn standard_settings_are_complete() {
        assert!(check_settings(&standard_settings()).is_ok());
        let mut bad = standard_settings();
        for s in bad.iter_mut() {
            s.1 = Projector::H;
        }
        assert!(matches!(check_settings(&bad), Err(Error::Degenerate(_))));
        assert!(check_settings(&standard_settings()[..15]).is_err());
    }

    #[test]
    fn noiseless_round_trips() {
        let settings = standard_settings();
        for rho in [
            bell_state(0.0),
            visibility_mixed_state(0.5, PI / 3.0).unwrap(),
        ] {
            let rec = simulate_counts(&rho, &settings, 1e10, None).unwrap();
            let back = reconstruct(&rec, Method::Linear).unwrap();
            assert!(max_diff(&rho, &back) < 1e-6);
        }
    }

    #[test]
    fn unequal_acquisition_times_are_normalized() {
        let rho = visibility_mixed_state(0.8, 0.3).unwrap();
        let mut rec = simulate_counts(&rho, &standard_settings(), 1e10, None).unwrap();
        for (k, e) in rec.entries.iter_mut().enumerate() {
            let t = 1.0 + k as f64;
            e.counts = (e.counts as f64 * t).round() as u64;
            e.time_s = t;
        }
        let back = reconstruct(&rec, Method::Linear).unwrap();
        assert!(max_diff(&rho, &back) < 1e-6);
    }

    #[test]
    fn poisson_counts_are_reproducible() {
        let truth = bell_state(0.0);
        let a = simulate_counts(&truth, &standard_settings(), 1e4, Some(7)).unwrap();
        let b = simulate_counts(&truth, &standard_settings(), 1e4, Some(7)).unwrap();
        let c = simulate_counts(&truth, &standard_settings(), 1e4, Some(8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn poisson_counts_give_high_fidelity() {
        // at 1e4 pairs per setting a single draw scatters by about 0.01 in
        // fidelity, so average over seeds
        let truth = bell_state(0.0);
        let n = 100;
        let mean = (0..n)
            .map(|seed| {
                let rec = simulate_counts(&truth, &standard_settings(), 1e4, Some(seed)).unwrap();
                fidelity(&reconstruct(&rec, Method::Linear).unwrap(), 0.0)
            })
            .sum::<f64>()
            / n as f64;
        assert!(mean > 0.99, "{mean}");

        let rec = simulate_counts(&truth, &standard_settings(), 1e6, Some(7)).unwrap();
        let rho = reconstruct(&rec, Method::Projected).unwrap();
        assert!(rho.is_positive());
        assert!(fidelity(&rho, 0.0) > 0.99, "{}", fidelity(&rho, 0.0));
    }

    #[test]
    fn zero_counts_are_rejected() {
        let mut rec = simulate_counts(&bell_state(0.0), &standard_settings(), 1e3, None).unwrap();
        for e in rec.entries.iter_mut() {
            e.counts = 0;
        }
        assert!(matches!(
            reconstruct(&rec, Method::Linear),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let rec = simulate_counts(&bell_state(0.0), &standard_settings(), 1e3, Some(1)).unwrap();
        let text = rec.to_csv_string();
        assert_eq!(TomographyRecord::from_csv_str(&text, "test").unwrap(), rec);
        assert!(
            TomographyRecord::from_csv_str("signal,idler,counts,time_s\nX,H,1,1\n", "t").is_err()
        );
    }

    #[test]
    fn random_states_round_trip() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..10 {
            let rho = random_density_matrix(&mut rng);
            let rec = simulate_counts(&rho, &standard_settings(), 1e11, None).unwrap();
            let back = reconstruct(&rec, Method::Linear).unwrap();
            assert!(max_diff(&rho, &back) < 1e-6);
        }
    }
}
