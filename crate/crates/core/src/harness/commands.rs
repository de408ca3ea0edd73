//! The experiment commands behind the CLI. Each writes its artifacts under an
//! output directory and returns a key/value summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{Axis, DataConfig, RunConfig};
use super::io::{read_series, read_snapshot, write_atomic, write_series, write_snapshot};
use crate::conditions::{check_g1, check_h1, classify_regime, SampleRange};
use crate::error::{Error, Result};
use crate::format::format_number;
use crate::functionals::{
    energy_identity_residual, fit_blowup_ode, lower_bound_check, lp_gronwall_check,
    pointwise_bound_check, theta, EnergySample,
};
use crate::grid::RadialGrid;
use crate::initial_data::{
    check_membership, concentrated_family, constant_state, perturb_to_blowup, EtaFamilyParams,
    InitialData, PerturbationReport,
};
use crate::nonlinearity::{Family, NonlinearitySpec};
use crate::solver::{run, RunOutcome, Verdict};

pub const SERIES_FILE: &str = "series.csv";
pub const FINAL_FILE: &str = "final.csv";
pub const SNAPSHOT_INDEX: &str = "snapshots.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const CONDITIONS_FILE: &str = "conditions.txt";
pub const DATA_FILE: &str = "data.csv";
pub const MEMBERSHIP_FILE: &str = "membership.txt";
pub const ANALYSIS_FILE: &str = "analysis.txt";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Process exit status. Every command result maps to exactly one code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Completed,
    Blowup,
    Horizon,
    Steady,
    ConfigError,
    IoError,
    NumericalError,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Completed => 0,
            ExitStatus::Blowup => 10,
            ExitStatus::Horizon => 11,
            ExitStatus::Steady => 12,
            ExitStatus::ConfigError => 2,
            ExitStatus::IoError => 3,
            ExitStatus::NumericalError => 4,
        }
    }

    pub fn for_verdict(v: &Verdict) -> Self {
        match v {
            Verdict::FiniteTimeBlowup { .. } => ExitStatus::Blowup,
            Verdict::ReachedHorizon { .. } => ExitStatus::Horizon,
            Verdict::SteadyState { .. } => ExitStatus::Steady,
        }
    }

    pub fn for_error(e: &Error) -> Self {
        match e {
            Error::Io { .. } => ExitStatus::IoError,
            Error::Solver { .. }
            | Error::Singular { .. }
            | Error::Quadrature { .. }
            | Error::Analysis(_) => ExitStatus::NumericalError,
            Error::InvalidGrid(_)
            | Error::LengthMismatch { .. }
            | Error::OutOfRange { .. }
            | Error::InvalidNonlinearity(_)
            | Error::Hypothesis(_)
            | Error::InitialData(_)
            | Error::Config(_)
            | Error::Parse { .. } => ExitStatus::ConfigError,
        }
    }
}

/// Ordered `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(Vec<(String, String)>);

impl KeyValues {
    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.0.push((key.into(), value.into()));
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, format_number(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn render(&self) -> String {
        self.0.iter().fold(String::new(), |mut out, (k, v)| {
            let _ = writeln!(out, "{k} = {v}");
            out
        })
    }
}

/// Builds the initial data described by the config. Perturbations also return their report.
pub fn build_initial_data(
    cfg: &RunConfig,
    grid: &RadialGrid,
    spec: &NonlinearitySpec,
) -> Result<(InitialData, Option<PerturbationReport>)> {
    let (data, report) = match &cfg.data {
        DataConfig::Constant { u_star, v_star } => (constant_state(grid, *u_star, *v_star)?, None),
        DataConfig::Concentrated(params) => (concentrated_family(grid, params)?, None),
        DataConfig::File { path } => {
            let s = read_snapshot(path, grid)?;
            (InitialData::from_fields(grid, s.u, s.v)?, None)
        }
        DataConfig::Perturb {
            base,
            eps,
            p_dense,
            eta,
            gamma2,
        } => {
            let s = read_snapshot(base, grid)?;
            let base = InitialData::from_fields(grid, s.u, s.v)?;
            let params = EtaFamilyParams::new(base.m, *eta, *gamma2);
            let report = perturb_to_blowup(&base, *eps, *p_dense, &params, grid)?;
            (report.data.clone(), Some(report))
        }
    };
    Ok((data.with_energy(spec, grid)?, report))
}

pub struct SimulateResult {
    pub outcome: RunOutcome,
    pub summary: KeyValues,
    pub status: ExitStatus,
}

fn verdict_fields(kv: &mut KeyValues, v: &Verdict) {
    kv.push("verdict", v.name());
    match v {
        Verdict::FiniteTimeBlowup { t_star } => kv.num("t_star", *t_star),
        Verdict::ReachedHorizon { growth_factor } => kv.num("growth_factor", *growth_factor),
        Verdict::SteadyState { residual } => kv.num("residual", *residual),
    }
}

fn max_mass_drift(series: &[EnergySample], m: f64) -> f64 {
    series
        .iter()
        .map(|s| (s.mass_u - m).abs() / m)
        .fold(0.0, f64::max)
}

fn snapshot_name(k: usize) -> String {
    format!("{SNAPSHOT_DIR}/snap_{k:04}.csv")
}

/// Runs the solver and writes the series, the final state, any snapshots and a summary.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<SimulateResult> {
    let grid = cfg.build_grid()?;
    let spec = cfg.spec()?;
    let (data, _) = build_initial_data(cfg, &grid, &spec)?;
    let outcome = run(
        &data,
        &grid,
        &spec,
        &cfg.control,
        &cfg.monitors.solver_monitors(),
    )?;

    write_series(&out.join(SERIES_FILE), &outcome.series)?;
    write_snapshot(&out.join(FINAL_FILE), &outcome.final_state, &grid)?;
    if !outcome.snapshots.is_empty() {
        let mut index = String::from("index,t,file\n");
        for (k, s) in outcome.snapshots.iter().enumerate() {
            let name = snapshot_name(k);
            write_snapshot(&out.join(&name), s, &grid)?;
            let _ = writeln!(index, "{k},{},{name}", format_number(s.t));
        }
        write_atomic(&out.join(SNAPSHOT_INDEX), index.as_bytes())?;
    }

    let mut kv = KeyValues::default();
    verdict_fields(&mut kv, &outcome.verdict);
    kv.num("t_final", outcome.final_state.t);
    kv.num("sup_u_initial", data.u0.max());
    kv.num("sup_u_final", outcome.final_state.u.max());
    kv.num("mass_u0", data.m);
    kv.num("max_mass_drift", max_mass_drift(&outcome.series, data.m));
    if let Some(f0) = data.f0 {
        kv.num("F0", f0);
    }
    kv.push("transport", cfg.control.transport.name());
    kv.push("accepted_steps", outcome.stats.accepted.to_string());
    kv.push("rejected_steps", outcome.stats.rejected.to_string());
    kv.push("samples", outcome.series.len().to_string());
    kv.push("snapshots", outcome.snapshots.len().to_string());
    let status = ExitStatus::for_verdict(&outcome.verdict);
    kv.push("exit_code", status.code().to_string());
    write_atomic(&out.join(SUMMARY_FILE), kv.render().as_bytes())?;
    Ok(SimulateResult {
        outcome,
        summary: kv,
        status,
    })
}

/// Classifies the nonlinearity and, when the config fixes `alpha` or `(gamma, b)`,
/// checks G1 and H1 at those values.
pub fn check_conditions(cfg: &RunConfig, out: &Path) -> Result<String> {
    let spec = cfg.spec()?;
    let n = cfg.grid.n;
    let classification = classify_regime(&spec, n)?;
    let mut text = format!("regime = {}\n", classification.regime);
    for r in &classification.reports {
        text.push('\n');
        text.push_str(&r.to_key_value());
    }
    let cc = &cfg.conditions;
    if let Some(alpha) = cc.alpha {
        let range = cc.range.unwrap_or_else(|| SampleRange::default_g1(&spec));
        text.push('\n');
        text.push_str(&check_g1(&spec, alpha, n, &range)?.to_key_value());
    }
    if let (Some(gamma), Some(b)) = (cc.gamma, cc.b) {
        let range = cc.range.unwrap_or_else(|| SampleRange::default_for(&spec));
        text.push('\n');
        text.push_str(&check_h1(&spec, gamma, b, n, &range)?.to_key_value());
    }
    write_atomic(&out.join(CONDITIONS_FILE), text.as_bytes())?;
    Ok(text)
}

/// Writes the initial data as a snapshot and reports membership at `membership_k`.
pub fn make_data(cfg: &RunConfig, out: &Path) -> Result<KeyValues> {
    let grid = cfg.build_grid()?;
    let spec = cfg.spec()?;
    let (data, perturbation) = build_initial_data(cfg, &grid, &spec)?;
    write_snapshot(&out.join(DATA_FILE), &data.as_state(), &grid)?;
    let m = check_membership(&data, cfg.monitors.membership_k, &spec, &grid)?;
    let mut kv = KeyValues::default();
    kv.num("m", m.m);
    kv.num("A", m.a);
    kv.num("F0", m.f0);
    kv.num("K", m.k);
    kv.num("threshold", m.threshold);
    kv.push("member", m.member.to_string());
    if let Some(p) = perturbation {
        kv.num("dist_u", p.dist_u);
        kv.num("dist_v", p.dist_v);
        kv.num("spike_mass", p.spike_mass);
        kv.num("v_weight", p.v_weight);
    }
    write_atomic(&out.join(MEMBERSHIP_FILE), kv.render().as_bytes())?;
    Ok(kv)
}

fn read_snapshot_index(dir: &Path, grid: &RadialGrid) -> Result<Vec<crate::solver::State>> {
    let index = dir.join(SNAPSHOT_INDEX);
    if !index.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&index).map_err(|e| Error::io(&index, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            context: index.display().to_string(),
            message: e.to_string(),
        })?;
        let t: f64 = rec[1].trim().parse().map_err(|e| Error::Parse {
            context: index.display().to_string(),
            message: format!("`{}`: {e}", &rec[1]),
        })?;
        let mut state = read_snapshot(&dir.join(rec[2].trim()), grid)?;
        state.t = t;
        out.push(state);
    }
    Ok(out)
}

/// Runs every applicable fit on a finished run directory. A fit whose
/// preconditions fail is reported as `<section>.error` rather than aborting.
pub fn analyze(cfg: &RunConfig, run_dir: &Path, out: &Path) -> Result<KeyValues> {
    let grid = cfg.build_grid()?;
    let series = read_series(&run_dir.join(SERIES_FILE))?;
    let snapshots = read_snapshot_index(run_dir, &grid)?;
    let n = grid.dim();
    let mon = &cfg.monitors;
    let mut kv = KeyValues::default();
    kv.push("samples", series.len().to_string());
    kv.push("snapshots", snapshots.len().to_string());

    match energy_identity_residual(&series) {
        Ok(r) => {
            kv.num("energy.max_residual", r.max);
            kv.num("energy.mean_residual", r.mean);
        }
        Err(e) => kv.push("energy.error", e.to_string()),
    }
    let th = theta(n, mon.kappa)?;
    kv.num("kappa", mon.kappa);
    kv.num("theta", th);
    match lower_bound_check(&series, th) {
        Ok(inf) => kv.num("lower_bound.inf", inf),
        Err(e) => kv.push("lower_bound.error", e.to_string()),
    }
    match fit_blowup_ode(&series, th, mon.tail_fraction) {
        Ok(fit) => {
            kv.push("ode.consistent", fit.consistent.to_string());
            if let Some(reason) = &fit.reason {
                kv.push("ode.reason", reason.clone());
            }
            kv.num("ode.margin", fit.ode_margin);
            kv.num("ode.c3_fit", fit.c3_fit);
            kv.num("ode.c_fit", fit.c_fit);
            kv.num("ode.t_star_extrapolated", fit.t_star_extrapolated);
            kv.num("ode.fitted_exponent", fit.fitted_exponent);
            kv.num("ode.ode_exponent", fit.ode_exponent);
            kv.push("ode.tail_len", fit.tail_len.to_string());
        }
        Err(e) => kv.push("ode.error", e.to_string()),
    }
    match pointwise_bound_check(&series, &snapshots, &grid, mon.p_bound, mon.kappa) {
        Ok(p) => {
            kv.num("pointwise.p_bound", p.p_bound);
            kv.num("pointwise.c_fit", p.c_fit);
            kv.num("pointwise.c_growth_late", p.c_growth_late);
            kv.push("pointwise.bounded", p.bounded.to_string());
            kv.num("pointwise.b_fit", p.b_fit);
            kv.num("pointwise.m_fit", p.m_fit);
        }
        Err(e) => kv.push("pointwise.error", e.to_string()),
    }
    if let Some(p) = mon.lp_exponent {
        let gamma1 = match cfg.family {
            Family::DecayingSensitivity { gamma1, .. } => Some(gamma1),
            _ => None,
        };
        match lp_gronwall_check(&series, p, n, gamma1) {
            Ok(g) => {
                kv.num("gronwall.p", p);
                kv.num("gronwall.slope_fit", g.slope_fit);
                kv.num("gronwall.c_fit", g.c_fit);
                kv.num("gronwall.x_half", g.x_half);
                kv.num("gronwall.x_end", g.x_end);
                kv.push(
                    "gronwall.bounded_on_window",
                    g.bounded_on_window.to_string(),
                );
            }
            Err(e) => kv.push("gronwall.error", e.to_string()),
        }
    }
    write_atomic(&out.join(ANALYSIS_FILE), kv.render().as_bytes())?;
    Ok(kv)
}

/// One point of the sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub values: Vec<(String, f64)>,
}

/// Cartesian product of the axes, last axis varying fastest.
pub fn sweep_points(axes: &[Axis]) -> Vec<SweepPoint> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|prefix: Vec<(String, f64)>| {
                axis.values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push((axis.key.clone(), v));
                    p
                })
            })
            .collect();
    }
    points
        .into_iter()
        .enumerate()
        .map(|(index, values)| SweepPoint { index, values })
        .collect()
}

pub struct SweepRow {
    pub point: SweepPoint,
    pub dir: PathBuf,
    pub result: std::result::Result<KeyValues, String>,
    pub status: ExitStatus,
}

const SWEEP_COLUMNS: [&str; 8] = [
    "verdict",
    "t_star",
    "growth_factor",
    "t_final",
    "sup_u_final",
    "max_mass_drift",
    "accepted_steps",
    "F0",
];

/// Simulates every point of the product of `axes` on up to `workers` threads.
/// Each run writes into `run_<k>/`; `sweep.csv` holds one row per run.
pub fn sweep(
    template: &RunConfig,
    axes: &[Axis],
    workers: usize,
    out: &Path,
) -> Result<Vec<SweepRow>> {
    if axes.is_empty() {
        return Err(Error::Config("sweep needs at least one axis".into()));
    }
    let points = sweep_points(axes);
    let configs = points
        .iter()
        .map(|p| {
            p.values
                .iter()
                .try_fold(template.clone(), |cfg, (k, v)| cfg.with_override(k, *v))
        })
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .into_par_iter()
            .zip(configs.into_par_iter())
            .map(|(point, cfg)| {
                let dir = out.join(format!("run_{}", point.index));
                let (result, status) = match simulate(&cfg, &dir) {
                    Ok(r) => (Ok(r.summary), r.status),
                    Err(e) => (Err(e.to_string()), ExitStatus::for_error(&e)),
                };
                SweepRow {
                    point,
                    dir,
                    result,
                    status,
                }
            })
            .collect()
    });

    let mut csv = String::from("run");
    for a in axes {
        let _ = write!(csv, ",{}", a.key);
    }
    for c in SWEEP_COLUMNS {
        let _ = write!(csv, ",{c}");
    }
    csv.push_str(",exit_code,error\n");
    for row in &rows {
        let _ = write!(csv, "{}", row.point.index);
        for (_, v) in &row.point.values {
            let _ = write!(csv, ",{}", format_number(*v));
        }
        match &row.result {
            Ok(kv) => {
                for c in SWEEP_COLUMNS {
                    let _ = write!(csv, ",{}", kv.get(c).unwrap_or(""));
                }
                let _ = writeln!(csv, ",{},", row.status.code());
            }
            Err(msg) => {
                let _ = write!(csv, ",error");
                for _ in 1..SWEEP_COLUMNS.len() {
                    csv.push(',');
                }
                let _ = writeln!(csv, ",{},\"{}\"", row.status.code(), msg.replace('"', "'"));
            }
        }
    }
    write_atomic(&out.join(SWEEP_FILE), csv.as_bytes())?;
    Ok(rows)
}
