//! Plain-text data files: density matrices and measured rate tables.
//!
//! Density matrices are stored as two blocks of four rows, real part then
//! imaginary part, in the (VV, VH, HV, HH) basis:
//!
//! ```text
//! # comment
//! [real]
//! 0.5  0  0  0.5
//! ...
//! [imag]
//! 0    0  0  0
//! ...
//! ```
//!
//! Entries may be separated by whitespace or commas.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::CountRecord;
use crate::quantum::{DensityMatrix, Matrix4c};

pub const RHO_EXP: &str = include_str!("../data/rho_exp.txt");
pub const BELL_PHI0: &str = include_str!("../data/bell_phi0.txt");
pub const TABLE_RATES: &str = include_str!("../data/table_rates.csv");

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses the two-block text format into a raw matrix.
pub fn parse_matrix(text: &str, context: &str) -> Result<Matrix4c> {
    let mut real: Vec<[f64; 4]> = Vec::new();
    let mut imag: Vec<[f64; 4]> = Vec::new();
    let mut block: Option<bool> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = || format!("{context}:{}", lineno + 1);
        match line {
            "[real]" => {
                block = Some(true);
                continue;
            }
            "[imag]" => {
                block = Some(false);
                continue;
            }
            _ => {}
        }
        let target = match block {
            Some(true) => &mut real,
            Some(false) => &mut imag,
            None => return Err(Error::parse(at(), "data before a [real] or [imag] header")),
        };
        let values: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::parse(at(), format!("{s:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != 4 {
            return Err(Error::parse(
                at(),
                format!("expected 4 entries, found {}", values.len()),
            ));
        }
        if target.len() == 4 {
            return Err(Error::parse(at(), "more than 4 rows in block"));
        }
        target.push([values[0], values[1], values[2], values[3]]);
    }
    if real.len() != 4 || imag.len() != 4 {
        return Err(Error::parse(
            context,
            format!(
                "need 4 [real] and 4 [imag] rows, found {} and {}",
                real.len(),
                imag.len()
            ),
        ));
    }
    Ok(Matrix4c::from_fn(|i, j| {
        nalgebra::Complex::new(real[i][j], imag[i][j])
    }))
}

/// Parses and validates a density-matrix fixture with the lenient
/// eigenvalue tolerance used for rounded published matrices.
pub fn parse_density_fixture(text: &str, context: &str) -> Result<DensityMatrix> {
    DensityMatrix::fixture(parse_matrix(text, context)?)
        .map_err(|e| Error::Validation(format!("{context}: {e}")))
}

pub fn load_density_fixture(path: impl AsRef<Path>) -> Result<DensityMatrix> {
    let path = path.as_ref();
    parse_density_fixture(&read(path)?, &path.display().to_string())
}

/// Renders a matrix in the fixture format with 17 significant digits.
pub fn format_matrix(m: &Matrix4c) -> String {
    let mut out = String::from("[real]\n");
    for i in 0..4 {
        let row: Vec<String> = (0..4).map(|j| format!("{:.16e}", m[(i, j)].re)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out.push_str("[imag]\n");
    for i in 0..4 {
        let row: Vec<String> = (0..4).map(|j| format!("{:.16e}", m[(i, j)].im)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// One row of a measured efficiency and rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateRow {
    pub pump_mw: f64,
    pub gamma_s: f64,
    pub gamma_i: f64,
    /// Pair coupling as printed.
    pub gamma_c: f64,
    pub mu_is: f64,
    pub sigma: f64,
    pub r_s: f64,
    pub r_i: f64,
    pub r_p: f64,
    pub r_c: f64,
    pub beta: f64,
    /// Production rate as printed, s⁻¹ THz⁻¹ mW⁻¹.
    pub r_prod: f64,
    pub gate_ns: f64,
    pub gate_rate_hz: f64,
    pub pump_nm: f64,
    pub filter_nm: f64,
    pub filter_center_nm: f64,
}

impl RateRow {
    pub fn count_record(&self) -> CountRecord {
        CountRecord {
            pump_mw: self.pump_mw,
            signal_rate: self.r_s,
            idler_rate: self.r_i,
            generated_rate: self.r_p,
            pair_rate: self.r_c,
            gate_s: Some(self.gate_ns * 1e-9),
            gate_rate: Some(self.gate_rate_hz),
            transmission_s: 1.0,
            transmission_i: 1.0,
            filter_bandwidth_nm: self.filter_nm,
            filter_center_nm: self.filter_center_nm,
        }
    }
}

pub fn parse_rate_table(text: &str, context: &str) -> Result<Vec<RateRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, row) in reader.deserialize::<RateRow>().enumerate() {
        rows.push(row.map_err(|e| Error::parse(context, format!("row {}: {e}", k + 1)))?);
    }
    if rows.is_empty() {
        return Err(Error::parse(context, "no data rows"));
    }
    Ok(rows)
}

pub fn load_rate_table(path: impl AsRef<Path>) -> Result<Vec<RateRow>> {
    let path = path.as_ref();
    parse_rate_table(&read(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::bell_state;

    #[test]
    fn bundled_fixtures_parse() {
        let rho = parse_density_fixture(RHO_EXP, "rho_exp").unwrap();
        assert_eq!(rho.matrix()[(0, 3)].re, 0.4573);
        assert_eq!(rho.matrix()[(0, 3)].im, 0.0720);
        assert!(!rho.is_positive());
        let bell = parse_density_fixture(BELL_PHI0, "bell").unwrap();
        assert!((bell.matrix() - bell_state(0.0).matrix()).norm() < 1e-15);
        assert_eq!(parse_rate_table(TABLE_RATES, "table").unwrap().len(), 3);
    }

    #[test]
    fn matrix_format_round_trips() {
        let m = *bell_state(0.3).matrix();
        assert_eq!(parse_matrix(&format_matrix(&m), "x").unwrap(), m);
    }

    #[test]
    fn malformed_matrices_are_rejected() {
        assert!(parse_matrix("1 0 0 0\n", "x").is_err());
        assert!(parse_matrix("[real]\n1 0 0\n", "x").is_err());
        let err = parse_matrix("[real]\n1 0 0 zz\n", "f.txt").unwrap_err();
        assert!(err.to_string().contains("f.txt:2"), "{err}");
        let short = "[real]\n1 0 0 0\n0 0 0 0\n0 0 0 0\n0 0 0 0\n[imag]\n0 0 0 0\n";
        assert!(parse_matrix(short, "x").is_err());
    }

    #[test]
    fn non_hermitian_fixture_fails_validation() {
        let text = BELL_PHI0.replacen("0.5 0 0 0.5", "0.5 0.2 0 0.5", 1);
        assert!(matches!(
            parse_density_fixture(&text, "x"),
            Err(Error::Validation(_))
        ));
    }
}
