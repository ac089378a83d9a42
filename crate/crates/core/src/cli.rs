//! Command-line front end.
//!
//! Every command produces one or more named outputs. Tables are written as
//! CSV with numbers in `{:.16e}`; documents are JSON. With `--out DIR` each
//! output goes to its own file, otherwise all are printed to stdout.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use crate::coherence::{
    asymptotic_rho_for, coherence_scan, group_delay_taus, solve_plate_thickness,
};
use crate::error::{Error, Result};
use crate::experiment::{
    chsh_at, implied_peak_rate, multi_pair_probability, pair_coupling, production_rate, sigma_s,
    violation_speed, ChshSettings,
};
use crate::fixtures::{
    format_matrix, load_density_fixture, load_rate_table, parse_density_fixture, parse_rate_table,
    RateRow, BELL_PHI0, RHO_EXP, TABLE_RATES,
};
use crate::materials::{load_registry, MaterialRegistry};
use crate::phasematch::{idler_wavelength, phase_matched_signal, pm_spectrum, spectrum_fwhm};
use crate::quantum::{
    chsh_from_density, concurrence, eof_from_concurrence, fidelity, max_fidelity,
    visibility_mixed_state, DensityMatrix,
};
use crate::scenario::Scenario;
use crate::tomography::{
    reconstruct, simulate_counts, standard_settings, Method, TomographyRecord,
};

pub const DEFAULT_SEED: u64 = 1;

const SCENARIO_HELP: &str = "\
Scenario files (--scenario) are TOML:

  schema_version = 1
  [crystal]          material, pump_nm, signal_nm, temperature_c, length_mm,
                     optional poling_period_um (solved when absent),
                     x_axis / z_axis (default X / Z), axes = {pump, signal, idler}
  [filters.signal]   fwhm_nm, optional center_nm (default: the arm wavelength)
  [filters.idler]    same; either filter may be omitted
  [plate]            material, optional thickness_mm (solved when absent),
                     arm = signal|idler (default idler), temperature_c (default 20)
  [integration]      half_width_sigmas (>= 5), tolerance, max_segments
  [scan]             lengths_mm, thicknesses_mm
  [spectrum]         signal_nm
Grids are a list of values or { start, stop, count } with both ends included.
Bundled scenarios can be named directly: length_scan_ktp.cfg,
length_scan_ln.cfg, compensation_map.cfg, single_point.cfg.

Exit codes: 0 success, 1 numerical failure, 2 input error. Errors are printed
to stderr as one line of JSON.";

#[derive(Debug, Parser)]
#[command(
    name = "pairsource",
    version,
    about = "Coherence, phase matching and entanglement metrics of a two-crystal pair source",
    after_long_help = SCENARIO_HELP
)]
pub struct Cli {
    #[command(flatten)]
    pub run: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// CSV with a header row.
    Table,
    /// JSON.
    Doc,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Table => "csv",
            Format::Doc => "json",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Dispersion model file replacing the bundled materials.
    #[arg(long, global = true, value_name = "PATH")]
    pub materials: Option<PathBuf>,
    /// Scenario file or the name of a bundled scenario.
    #[arg(long, global = true, value_name = "PATH")]
    pub scenario: Option<PathBuf>,
    /// Directory receiving one file per output.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Seed for simulated counts.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Print a human-readable summary instead of the data on stdout.
    #[arg(long, global = true)]
    pub summary: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Visibility 2|ρ₁₁₂₂| and delays over the scenario's length grid.
    #[command(after_long_help = SCENARIO_HELP)]
    CoherenceScan,
    /// Visibility over crystal length and plate thickness, with the per-length optimum.
    #[command(after_long_help = SCENARIO_HELP)]
    CompensationMap,
    /// Entanglement metrics of a density matrix.
    #[command(after_long_help = SCENARIO_HELP)]
    Metrics {
        /// Matrix file, or `rho_exp` / `bell_phi0` for the bundled ones.
        #[arg(long, value_name = "PATH", default_value = "rho_exp")]
        fixture: String,
    },
    /// CHSH value and violation statistics.
    #[command(after_long_help = SCENARIO_HELP)]
    Chsh(ChshArgs),
    /// Derived quantities of a measured rate table.
    #[command(after_long_help = SCENARIO_HELP)]
    Rates {
        /// Rate table (CSV); the bundled table when absent.
        #[arg(long, value_name = "PATH")]
        table: Option<PathBuf>,
    },
    /// Poling period, phase-matching bandwidth and spectrum.
    #[command(after_long_help = SCENARIO_HELP)]
    Pm,
    /// Reconstruct a density matrix from counts, or from simulated counts.
    #[command(after_long_help = SCENARIO_HELP)]
    Tomography(TomographyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ChshArgs {
    /// Visibility in the H/V basis.
    #[arg(long)]
    pub v_hv: Option<f64>,
    /// Visibility in the D/A basis.
    #[arg(long)]
    pub v_da: Option<f64>,
    /// Measured CHSH value; overrides the visibilities.
    #[arg(long)]
    pub s_m: Option<f64>,
    /// Peak coincidence rate, 1/s.
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Violation speed, used to infer the peak rate when --r-max is absent.
    #[arg(long)]
    pub speed: Option<f64>,
    /// Integration time per setting, s.
    #[arg(long, default_value_t = 1.0)]
    pub t_r: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TomographyArgs {
    /// Count file (`signal,idler,counts,time_s`); simulated when absent.
    #[arg(long, value_name = "PATH")]
    pub counts: Option<PathBuf>,
    #[arg(long, default_value = "linear")]
    pub method: Method,
    /// Visibility of the simulated state.
    #[arg(long, default_value_t = 0.95)]
    pub visibility: f64,
    /// Bell phase of the simulated state, rad.
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,
    /// Expected coincidences per setting at unit projection probability.
    #[arg(long, default_value_t = 1e4)]
    pub pairs: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(n) => Value::from(*n),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

fn opt(x: Option<f64>) -> Cell {
    x.map_or(Cell::Empty, Cell::Num)
}

/// Rows with a fixed column order. A record is a single row rendered as a
/// JSON object rather than an array.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
    record: bool,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
            record: false,
        }
    }

    fn record(fields: Vec<(&'static str, Cell)>) -> Self {
        let (columns, row) = fields.into_iter().unzip();
        Self {
            columns,
            rows: vec![row],
            record: true,
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Table => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.columns).expect("in-memory write");
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::text))
                        .expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
            }
            Format::Doc => {
                let object = |row: &Vec<Cell>| {
                    let map: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(k, v)| (k.to_string(), v.json()))
                        .collect();
                    Value::Object(map)
                };
                let value = if self.record {
                    object(&self.rows[0])
                } else {
                    Value::Array(self.rows.iter().map(object).collect())
                };
                let mut s = serde_json::to_string_pretty(&value).expect("finite JSON");
                s.push('\n');
                s
            }
        }
    }
}

/// One file's worth of output.
pub struct Output {
    pub file_name: String,
    pub contents: String,
}

pub struct Report {
    pub outputs: Vec<Output>,
    pub summary: String,
}

impl Report {
    fn new(summary: String) -> Self {
        Self {
            outputs: Vec::new(),
            summary,
        }
    }

    fn table(mut self, name: &str, table: &Table, format: Format) -> Self {
        self.outputs.push(Output {
            file_name: format!("{name}.{}", format.extension()),
            contents: table.render(format),
        });
        self
    }

    fn raw(mut self, file_name: &str, contents: String) -> Self {
        self.outputs.push(Output {
            file_name: file_name.to_string(),
            contents,
        });
        self
    }
}

fn registry(run: &RunConfig) -> Result<MaterialRegistry> {
    match &run.materials {
        Some(p) => load_registry(p),
        None => Ok(MaterialRegistry::bundled()),
    }
}

fn scenario(run: &RunConfig) -> Result<Scenario> {
    let path = run
        .scenario
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --scenario".into()))?;
    Scenario::load(path)
}

fn scenario_name(run: &RunConfig) -> String {
    run.scenario
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

/// Runs one parsed command.
pub fn execute(cli: &Cli) -> Result<Report> {
    let run = &cli.run;
    match &cli.command {
        Command::CoherenceScan => cmd_coherence_scan(run),
        Command::CompensationMap => cmd_compensation_map(run),
        Command::Metrics { fixture } => cmd_metrics(run, fixture),
        Command::Chsh(args) => cmd_chsh(run, args),
        Command::Rates { table } => cmd_rates(run, table.as_deref()),
        Command::Pm => cmd_pm(run),
        Command::Tomography(args) => cmd_tomography(run, args),
    }
}

fn cmd_coherence_scan(run: &RunConfig) -> Result<Report> {
    let reg = registry(run)?;
    let sc = scenario(run)?;
    let base = sc.source_config(&reg)?;
    let lengths = sc.lengths()?;
    let points = coherence_scan(&reg, &base, &lengths, sc.thicknesses()?.as_deref())?;

    let mut table = Table::new(&[
        "length_mm",
        "thickness_mm",
        "visibility",
        "tau_x_s",
        "tau_z_s",
        "kappa_s",
        "rho_re",
        "rho_im",
    ]);
    for p in &points {
        let r = &p.result;
        table.push(vec![
            Cell::Num(p.length_mm),
            opt(p.thickness_mm),
            Cell::Num(r.visibility),
            Cell::Num(r.tau_x),
            Cell::Num(r.tau_z),
            Cell::Num(r.kappa),
            Cell::Num(r.rho.re),
            Cell::Num(r.rho.im),
        ]);
    }

    let vis: Vec<f64> = points.iter().map(|p| p.result.visibility).collect();
    let (lo, hi) = vis
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let last = points.last().expect("non-empty grid");
    let mut summary = format!(
        "scenario {}\npoints {}\nvisibility min {lo:.4} max {hi:.4}\nvisibility at L = {} mm: {:.4}\n",
        scenario_name(run),
        points.len(),
        last.length_mm,
        last.result.visibility
    );
    if base.plate.is_none() {
        let v = 2.0 * asymptotic_rho_for(&reg, &base)?;
        summary.push_str(&format!("long-crystal limit (flat filters): {v:.4}\n"));
    }
    Ok(Report::new(summary).table("coherence_scan", &table, run.format))
}

fn cmd_compensation_map(run: &RunConfig) -> Result<Report> {
    let reg = registry(run)?;
    let sc = scenario(run)?;
    let base = sc.source_config(&reg)?;
    let lengths = sc.lengths()?;
    let ds = sc
        .thicknesses()?
        .ok_or_else(|| Error::Config("compensation-map needs scan.thicknesses_mm".into()))?;
    let points = coherence_scan(&reg, &base, &lengths, Some(&ds))?;

    let mut grid = Table::new(&["length_mm", "thickness_mm", "visibility"]);
    for p in &points {
        grid.push(vec![
            Cell::Num(p.length_mm),
            opt(p.thickness_mm),
            Cell::Num(p.result.visibility),
        ]);
    }

    let mut ridge = Table::new(&[
        "length_mm",
        "thickness_mm",
        "visibility",
        "thickness_solved_mm",
        "tau_x_s",
        "kappa_s",
    ]);
    let mut summary = format!(
        "scenario {}\nlength_mm best_d_mm solved_d_mm visibility\n",
        scenario_name(run)
    );
    for row in points.chunks(ds.len()) {
        let best = row.iter().fold(&row[0], |b, p| {
            if p.result.visibility > b.result.visibility {
                p
            } else {
                b
            }
        });
        let solved = solve_plate_thickness(&reg, &base.clone().with_length(best.length_mm))?;
        ridge.push(vec![
            Cell::Num(best.length_mm),
            opt(best.thickness_mm),
            Cell::Num(best.result.visibility),
            Cell::Num(solved),
            Cell::Num(best.result.tau_x),
            Cell::Num(best.result.kappa),
        ]);
        summary.push_str(&format!(
            "{:9.3} {:9.4} {:11.4} {:.6}\n",
            best.length_mm,
            best.thickness_mm.unwrap_or(f64::NAN),
            solved,
            best.result.visibility
        ));
    }
    Ok(Report::new(summary)
        .table("compensation_map", &grid, run.format)
        .table("compensation_ridge", &ridge, run.format))
}

fn load_fixture(name: &str) -> Result<DensityMatrix> {
    let path = Path::new(name);
    if !path.exists() {
        match name {
            "rho_exp" | "rho_exp.txt" => return parse_density_fixture(RHO_EXP, "rho_exp"),
            "bell_phi0" | "bell_phi0.txt" => return parse_density_fixture(BELL_PHI0, "bell_phi0"),
            _ => {}
        }
    }
    load_density_fixture(path)
}

fn metrics_table(rho: &DensityMatrix) -> Result<Table> {
    let (f_max, phi) = max_fidelity(rho);
    let c = concurrence(rho);
    let r = rho.rho1122();
    Ok(Table::record(vec![
        ("visibility_estimate", Cell::Num(2.0 * r.norm())),
        ("visibility_real_part", Cell::Num(2.0 * r.re)),
        ("fidelity_max", Cell::Num(f_max)),
        ("fidelity_phase_rad", Cell::Num(phi)),
        ("fidelity_phase0", Cell::Num(fidelity(rho, 0.0))),
        ("concurrence", Cell::Num(c)),
        ("eof", Cell::Num(eof_from_concurrence(c))),
        (
            "chsh_s",
            Cell::Num(chsh_from_density(rho, &ChshSettings::default())?),
        ),
        ("purity", Cell::Num(rho.purity())),
        ("min_eigenvalue", Cell::Num(rho.min_eigenvalue())),
    ]))
}

fn metrics_summary(t: &Table) -> String {
    t.columns
        .iter()
        .zip(&t.rows[0])
        .map(|(k, v)| match v {
            Cell::Num(x) => format!("{k:20} {x:.5}\n"),
            other => format!("{k:20} {}\n", other.text()),
        })
        .collect()
}

fn cmd_metrics(run: &RunConfig, fixture: &str) -> Result<Report> {
    let rho = load_fixture(fixture)?;
    let table = metrics_table(&rho)?;
    let summary = format!("fixture {fixture}\n{}", metrics_summary(&table));
    Ok(Report::new(summary).table("metrics", &table, run.format))
}

fn cmd_chsh(run: &RunConfig, a: &ChshArgs) -> Result<Report> {
    let settings = ChshSettings::default();
    let s = match (a.s_m, a.v_hv, a.v_da) {
        (Some(s), _, _) => s,
        (None, Some(v_hv), Some(v_da)) => chsh_at(&settings, v_hv, v_da)?,
        _ => {
            return Err(Error::Config(
                "give --s-m, or both --v-hv and --v-da".into(),
            ))
        }
    };
    if !s.is_finite() {
        return Err(Error::Domain(format!("S = {s} is not finite")));
    }
    let peak = match (a.r_max, a.speed) {
        (Some(r), _) => Some(r),
        (None, Some(x)) => Some(implied_peak_rate(s, x)?),
        (None, None) => None,
    };
    let (sigma, speed, deviations) = match peak {
        Some(r) => {
            let sigma = sigma_s(r, a.t_r)?;
            (
                Some(sigma),
                Some(violation_speed(s, r)?),
                Some((s - 2.0) / sigma),
            )
        }
        None => (None, None, None),
    };
    let violated = s > 2.0;
    let table = Table::record(vec![
        ("s", Cell::Num(s)),
        ("sigma_s", opt(sigma)),
        ("speed", opt(speed)),
        ("deviations", opt(deviations)),
        ("peak_rate", opt(peak)),
        ("integration_time_s", Cell::Num(a.t_r)),
        ("violated", Cell::Bool(violated)),
    ]);
    let mut summary = format!(
        "S = {s:.4} ({})\n",
        if violated { "violated" } else { "not violated" }
    );
    if let (Some(sig), Some(x), Some(n)) = (sigma, speed, deviations) {
        summary.push_str(&format!(
            "sigma_S = {sig:.4e}, {n:.1} standard deviations in {} s, speed {x:.2} 1/sqrt(s)\n",
            a.t_r
        ));
    }
    Ok(Report::new(summary).table("chsh", &table, run.format))
}

fn rate_row(row: &RateRow) -> Result<Vec<Cell>> {
    row.count_record().validate()?;
    let (m, p) = multi_pair_probability(
        row.gate_ns * 1e-9,
        row.beta,
        row.pump_mw * 1e-3,
        row.pump_nm * 1e-9,
    )?;
    let prod = production_rate(row.r_c, row.filter_nm, row.filter_center_nm, row.pump_mw)?;
    let accidentals = row.count_record().accidental_rate()?;
    Ok(vec![
        Cell::Num(row.pump_mw),
        Cell::Num(m),
        Cell::Num(p),
        Cell::Num(prod),
        Cell::Num(row.r_prod),
        Cell::Num(pair_coupling(row.gamma_s, row.mu_is)?),
        Cell::Num(row.gamma_c),
        opt(accidentals),
    ])
}

fn cmd_rates(run: &RunConfig, table: Option<&Path>) -> Result<Report> {
    let rows = match table {
        Some(p) => load_rate_table(p)?,
        None => parse_rate_table(TABLE_RATES, "bundled rate table")?,
    };
    let mut out = Table::new(&[
        "row",
        "pump_mw",
        "mean_pairs_per_gate",
        "multi_pair_probability",
        "production_rate",
        "production_rate_printed",
        "gamma_c_formula",
        "gamma_c_printed",
        "accidental_rate",
    ]);
    let mut summary = String::from("row pump_mw m P(n>=2) R_prod (printed)\n");
    for (k, row) in rows.iter().enumerate() {
        let cells = rate_row(row).map_err(|e| match e {
            Error::Domain(m) => Error::Domain(format!("row {}: {m}", k + 1)),
            other => other,
        })?;
        summary.push_str(&format!(
            "{:3} {:7} {:.3e} {:.3e} {:.4e} ({:.2e})\n",
            k + 1,
            row.pump_mw,
            num(&cells[1]),
            num(&cells[2]),
            num(&cells[3]),
            row.r_prod
        ));
        let mut full = vec![Cell::Int(k as u64 + 1)];
        full.extend(cells);
        out.push(full);
    }
    Ok(Report::new(summary).table("rates", &out, run.format))
}

fn num(c: &Cell) -> f64 {
    match c {
        Cell::Num(x) => *x,
        _ => f64::NAN,
    }
}

fn cmd_pm(run: &RunConfig) -> Result<Report> {
    let reg = registry(run)?;
    let sc = scenario(run)?;
    let source = sc.source_config(&reg)?;
    let crystal = &source.crystal;
    let (tau_x, tau_z) = group_delay_taus(&reg, &source)?;
    let peak = phase_matched_signal(&reg, crystal)?;
    let fwhm = if crystal.length_mm > 0.0 {
        Some(spectrum_fwhm(&reg, crystal)?)
    } else {
        None
    };
    let solve = Table::record(vec![
        ("material", Cell::Text(crystal.material.clone())),
        ("temperature_c", Cell::Num(crystal.temperature_c)),
        ("length_mm", Cell::Num(crystal.length_mm)),
        ("pump_nm", Cell::Num(crystal.pump_nm)),
        ("signal_nm", Cell::Num(crystal.signal_nm)),
        ("idler_nm", Cell::Num(crystal.idler_nm)),
        ("poling_period_um", Cell::Num(crystal.poling_period_um)),
        ("phase_matched_signal_nm", Cell::Num(peak)),
        ("fwhm_nm", opt(fwhm)),
        ("tau_x_s", Cell::Num(tau_x)),
        ("tau_z_s", Cell::Num(tau_z)),
    ]);
    let summary = format!(
        "{} at {} C, L = {} mm\npoling period {:.4} um\nsignal {} nm, idler {:.3} nm\nphase-matched signal {:.4} nm, FWHM {}\n",
        crystal.material,
        crystal.temperature_c,
        crystal.length_mm,
        crystal.poling_period_um,
        crystal.signal_nm,
        crystal.idler_nm,
        peak,
        fwhm.map_or("n/a".into(), |w| format!("{w:.4} nm")),
    );
    let mut report = Report::new(summary).table("pm_solve", &solve, run.format);
    if let Some(grid) = sc.spectrum_grid()? {
        let mut spectrum = Table::new(&["signal_nm", "idler_nm", "intensity"]);
        for (ls, v) in pm_spectrum(&reg, crystal, &grid)? {
            spectrum.push(vec![
                Cell::Num(ls),
                Cell::Num(idler_wavelength(crystal.pump_nm, ls)?),
                Cell::Num(v),
            ]);
        }
        report = report.table("pm_spectrum", &spectrum, run.format);
    }
    Ok(report)
}

fn cmd_tomography(run: &RunConfig, a: &TomographyArgs) -> Result<Report> {
    let (record, source) = match &a.counts {
        Some(p) => (TomographyRecord::load(p)?, p.display().to_string()),
        None => {
            let state = visibility_mixed_state(a.visibility, a.phi)?;
            let record = simulate_counts(&state, &standard_settings(), a.pairs, Some(run.seed))?;
            let source = format!(
                "simulated V = {}, phi = {}, {} pairs, seed {}",
                a.visibility, a.phi, a.pairs, run.seed
            );
            (record, source)
        }
    };
    let rho = reconstruct(&record, a.method)?;
    let table = metrics_table(&rho)?;
    let summary = format!("{source}\n{}", metrics_summary(&table));
    let mut report = Report::new(summary).raw("tomography_rho.txt", format_matrix(rho.matrix()));
    if a.counts.is_none() {
        report = report.raw("tomography_counts.csv", record.to_csv_string());
    }
    Ok(report.table("tomography_metrics", &table, run.format))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a report to `--out` and/or stdout.
pub fn emit(report: &Report, run: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    if let Some(dir) = &run.out {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        for o in &report.outputs {
            write_file(&dir.join(&o.file_name), &o.contents)?;
        }
    }
    let io = |source| Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    };
    if run.summary {
        stdout.write_all(report.summary.as_bytes()).map_err(io)?;
    } else if run.out.is_none() {
        let many = report.outputs.len() > 1;
        for o in &report.outputs {
            if many {
                writeln!(stdout, "# {}", o.file_name).map_err(io)?;
            }
            stdout.write_all(o.contents.as_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

fn error_line(kind: &str, code: i32, message: &str) -> String {
    let mut map = Map::new();
    map.insert("error".into(), Value::from(kind));
    map.insert("exit_code".into(), Value::from(code));
    map.insert("message".into(), Value::from(message.trim_end()));
    Value::Object(map).to_string()
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                return 0;
            }
            let _ = writeln!(
                stderr,
                "{}",
                error_line("usage", 2, &e.render().to_string())
            );
            return 2;
        }
    };
    match execute(&cli).and_then(|r| emit(&r, &cli.run, stdout)) {
        Ok(()) => 0,
        Err(e) => {
            let code = if e.is_input_error() { 2 } else { 1 };
            let _ = writeln!(stderr, "{}", error_line(e.kind(), code, &e.to_string()));
            code
        }
    }
}
