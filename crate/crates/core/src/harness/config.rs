//! Run configuration: a TOML document read as a flat map of dotted keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use toml::Value;

use crate::conditions::SampleRange;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::initial_data::EtaFamilyParams;
use crate::nonlinearity::{
    Family, NonlinearitySpec, Tabulation, DEFAULT_QUAD_TOL, DEFAULT_S0, DEFAULT_S_CAP,
};
use crate::solver::{Monitors, StepControl, Transport};

const KNOWN_KEYS: &[&str] = &[
    "grid.n",
    "grid.radius",
    "grid.cells",
    "nonlinearity.family",
    "nonlinearity.p",
    "nonlinearity.q",
    "nonlinearity.q_d",
    "nonlinearity.c_d",
    "nonlinearity.gamma1",
    "nonlinearity.d1",
    "nonlinearity.phi_table",
    "nonlinearity.beta_table",
    "nonlinearity.s0",
    "nonlinearity.quad_tol",
    "nonlinearity.s_cap",
    "data.kind",
    "data.u_star",
    "data.v_star",
    "data.m",
    "data.eta",
    "data.gamma2",
    "data.floor",
    "data.amplitude",
    "data.path",
    "data.base",
    "data.eps",
    "data.p_dense",
    "control.dt_init",
    "control.dt_min",
    "control.dt_max",
    "control.cfl_safety",
    "control.growth_cap",
    "control.sup_u_blowup",
    "control.t_end",
    "control.max_steps",
    "control.transport",
    "monitors.kappa",
    "monitors.p_bound",
    "monitors.lp_exponent",
    "monitors.sample_stride",
    "monitors.snapshot_times",
    "monitors.snapshot_stride",
    "monitors.steady_tol",
    "monitors.tail_fraction",
    "monitors.membership_k",
    "conditions.alpha",
    "conditions.gamma",
    "conditions.b",
    "conditions.s_lo",
    "conditions.s_hi",
    "conditions.samples",
    "output.dir",
    "sweep.axes",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub n: usize,
    pub radius: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataConfig {
    Constant {
        u_star: f64,
        v_star: f64,
    },
    Concentrated(EtaFamilyParams),
    File {
        path: PathBuf,
    },
    Perturb {
        base: PathBuf,
        eps: f64,
        p_dense: f64,
        eta: f64,
        gamma2: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    pub kappa: f64,
    pub p_bound: f64,
    pub lp_exponent: Option<f64>,
    pub sample_stride: usize,
    pub snapshot_times: Vec<f64>,
    pub snapshot_stride: usize,
    pub steady_tol: f64,
    pub tail_fraction: f64,
    pub membership_k: f64,
}

impl MonitorConfig {
    pub fn solver_monitors(&self) -> Monitors {
        Monitors {
            sample_stride: self.sample_stride,
            snapshot_times: self.snapshot_times.clone(),
            snapshot_stride: self.snapshot_stride,
            lp_exponent: self.lp_exponent,
            steady_tol: self.steady_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionsConfig {
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub b: Option<f64>,
    pub range: Option<SampleRange>,
}

/// One sweep axis: a config key and the values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<f64>,
}

impl Axis {
    /// Parses `key=v1,v2,...`.
    pub fn parse(text: &str) -> Result<Self> {
        let (key, list) = text.split_once('=').ok_or_else(|| {
            Error::Config(format!("sweep axis `{text}` must look like key=v1,v2"))
        })?;
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "sweep axis names unknown key `{key}`"
            )));
        }
        let values = list
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|e| Error::Parse {
                    context: format!("sweep axis {key}"),
                    message: format!("`{}`: {e}", v.trim()),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(Error::Config(format!("sweep axis `{key}` has no values")));
        }
        Ok(Axis { key, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub family: Family,
    pub s0: f64,
    pub quad_tol: f64,
    pub s_cap: f64,
    pub data: DataConfig,
    pub control: StepControl,
    pub monitors: MonitorConfig,
    pub conditions: ConditionsConfig,
    pub output_dir: Option<PathBuf>,
    pub sweep_axes: Vec<Axis>,
    entries: BTreeMap<String, Value>,
    base_dir: PathBuf,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

struct Reader<'a> {
    entries: &'a BTreeMap<String, Value>,
}

impl Reader<'_> {
    fn float(&self, key: &str) -> Result<Option<f64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(other) => Err(Error::Config(format!(
                "`{key}` must be a number, got {other}"
            ))),
        }
    }

    fn float_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.float(key)?.unwrap_or(default))
    }

    fn req_float(&self, key: &str) -> Result<f64> {
        self.float(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    fn count(&self, key: &str) -> Result<Option<u64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(Value::Float(x)) if *x >= 0.0 && x.fract() == 0.0 && *x < 9e15 => {
                Ok(Some(*x as u64))
            }
            Some(other) => Err(Error::Config(format!(
                "`{key}` must be a nonnegative integer, got {other}"
            ))),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(Error::Config(format!(
                "`{key}` must be a string, got {other}"
            ))),
        }
    }

    fn float_list(&self, key: &str) -> Result<Vec<f64>> {
        match self.entries.get(key) {
            None => Ok(Vec::new()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    other => Err(Error::Config(format!(
                        "`{key}` entries must be numbers, got {other}"
                    ))),
                })
                .collect(),
            Some(other) => Err(Error::Config(format!(
                "`{key}` must be an array, got {other}"
            ))),
        }
    }

    fn string_list(&self, key: &str) -> Result<Vec<String>> {
        match self.entries.get(key) {
            None => Ok(Vec::new()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    other => Err(Error::Config(format!(
                        "`{key}` entries must be strings, got {other}"
                    ))),
                })
                .collect(),
            Some(other) => Err(Error::Config(format!(
                "`{key}` must be an array, got {other}"
            ))),
        }
    }
}

fn hypothesis(msg: String) -> Error {
    Error::Config(msg)
}

impl RunConfig {
    /// Parses and validates a config; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            context: "config".into(),
            message: e.to_string(),
        })?;
        let mut entries = BTreeMap::new();
        flatten("", &table, &mut entries);
        Self::from_entries(entries, base_dir.to_path_buf())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    /// Copy with one numeric key replaced, revalidated.
    pub fn with_override(&self, key: &str, value: f64) -> Result<Self> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        let mut entries = self.entries.clone();
        let v = if value.fract() == 0.0
            && value.abs() < 9e15
            && matches!(entries.get(key), Some(Value::Integer(_)))
        {
            Value::Integer(value as i64)
        } else {
            Value::Float(value)
        };
        entries.insert(key.to_string(), v);
        Self::from_entries(entries, self.base_dir.clone())
    }

    fn from_entries(entries: BTreeMap<String, Value>, base_dir: PathBuf) -> Result<Self> {
        if let Some(k) = entries.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        let r = Reader { entries: &entries };

        let n = r
            .count("grid.n")?
            .ok_or_else(|| Error::Config("missing required key `grid.n`".into()))?
            as usize;
        let grid = GridConfig {
            n,
            radius: r.float_or("grid.radius", 1.0)?,
            cells: r.count("grid.cells")?.unwrap_or(400) as usize,
        };
        RadialGrid::new(grid.n, grid.radius, grid.cells)?;
        let nf = n as f64;

        let family_name = r
            .string("nonlinearity.family")?
            .unwrap_or_else(|| "semilinear".into());
        let family = match family_name.as_str() {
            "semilinear" => Family::Semilinear,
            "power_law" => Family::PowerLaw {
                p: r.req_float("nonlinearity.p")?,
                q: r.req_float("nonlinearity.q")?,
            },
            "diffusion_only" => Family::DiffusionOnly {
                q_d: r.req_float("nonlinearity.q_d")?,
                c_d: r.float_or("nonlinearity.c_d", 1.0)?,
            },
            "decaying_sensitivity" => Family::DecayingSensitivity {
                gamma1: r.req_float("nonlinearity.gamma1")?,
                d1: r.float_or("nonlinearity.d1", 1.0)?,
            },
            "tabulated" => {
                let phi = r.string("nonlinearity.phi_table")?.ok_or_else(|| {
                    Error::Config("tabulated family needs `nonlinearity.phi_table`".into())
                })?;
                let beta = r.string("nonlinearity.beta_table")?.ok_or_else(|| {
                    Error::Config("tabulated family needs `nonlinearity.beta_table`".into())
                })?;
                Family::Tabulated(Tabulation::from_files(
                    &base_dir.join(phi),
                    &base_dir.join(beta),
                )?)
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown nonlinearity family `{other}`"
                )))
            }
        };
        let s0 = r.float_or("nonlinearity.s0", DEFAULT_S0)?;
        let quad_tol = r.float_or("nonlinearity.quad_tol", DEFAULT_QUAD_TOL)?;
        let s_cap = r.float_or("nonlinearity.s_cap", DEFAULT_S_CAP)?;
        if let Family::DecayingSensitivity { gamma1, .. } = family {
            if !(gamma1 > nf) {
                return Err(hypothesis(format!(
                    "decay hypothesis needs gamma1 > n = {n}, got {gamma1}"
                )));
            }
        }

        let alpha = r.float("conditions.alpha")?;
        if let Some(a) = alpha {
            if !(a > 2.0 / nf) {
                return Err(hypothesis(format!(
                    "G1 needs alpha > 2/n = {}, got {a}",
                    2.0 / nf
                )));
            }
        }
        let gamma = r.float("conditions.gamma")?;
        if let Some(g) = gamma {
            let hi = (nf - 2.0) / nf;
            if !(g > 0.0 && g < hi) {
                return Err(hypothesis(format!(
                    "H1 needs gamma in (0, (n-2)/n) = (0, {hi}), got {g}"
                )));
            }
        }
        let b = r.float("conditions.b")?;
        if let Some(b) = b {
            if !(b > 0.0) {
                return Err(hypothesis(format!("H1 needs b > 0, got {b}")));
            }
        }
        let range = match (r.float("conditions.s_lo")?, r.float("conditions.s_hi")?) {
            (None, None) if r.count("conditions.samples")?.is_none() => None,
            (lo, hi) => Some(SampleRange::new(
                lo.unwrap_or((s0 * 1e-3).max(1e-6)),
                hi.unwrap_or(1e9f64.min(s_cap)),
                r.count("conditions.samples")?.unwrap_or(400) as usize,
            )?),
        };

        let kind = r.string("data.kind")?.unwrap_or_else(|| "constant".into());
        let gamma2_window = |gamma2: f64| -> Result<()> {
            if !(gamma2 > 0.0) {
                return Err(hypothesis(format!("gamma2 must be positive, got {gamma2}")));
            }
            if !(gamma2 < nf - 2.0) {
                return Err(hypothesis(format!(
                    "gamma2 must lie below the upper bound n-2 = {} of its admissible window ((1-alpha)n, n-2), got {gamma2}",
                    nf - 2.0
                )));
            }
            if let Some(a) = alpha {
                let lo = (1.0 - a) * nf;
                if !(gamma2 > lo) {
                    return Err(hypothesis(format!(
                        "gamma2 must exceed the lower bound (1-alpha)n = {lo} of its admissible window, got {gamma2}"
                    )));
                }
            }
            Ok(())
        };
        let data =
            match kind.as_str() {
                "constant" => DataConfig::Constant {
                    u_star: r.float_or("data.u_star", 1.0)?,
                    v_star: r.float_or("data.v_star", 1.0)?,
                },
                "concentrated" => {
                    let gamma2 = r.req_float("data.gamma2")?;
                    gamma2_window(gamma2)?;
                    DataConfig::Concentrated(EtaFamilyParams {
                        m: r.req_float("data.m")?,
                        eta: r.req_float("data.eta")?,
                        gamma2,
                        floor: r.float("data.floor")?,
                        amplitude: r.float_or("data.amplitude", 1.0)?,
                    })
                }
                "file" => DataConfig::File {
                    path: base_dir.join(
                        r.string("data.path")?
                            .ok_or_else(|| Error::Config("file data needs `data.path`".into()))?,
                    ),
                },
                "perturb" => {
                    let gamma2 = r.req_float("data.gamma2")?;
                    gamma2_window(gamma2)?;
                    let p_dense = r.req_float("data.p_dense")?;
                    let hi = 2.0 * nf / (nf + 2.0);
                    if !(p_dense > 1.0 && p_dense < hi) {
                        return Err(hypothesis(format!(
                            "p_dense must lie in (1, 2n/(n+2)) = (1, {hi}), got {p_dense}"
                        )));
                    }
                    if let Some(a) = alpha {
                        if !(p_dense > 2.0 - a) {
                            return Err(hypothesis(format!(
                                "p_dense must exceed 2 - alpha = {}, got {p_dense}",
                                2.0 - a
                            )));
                        }
                    }
                    DataConfig::Perturb {
                        base: base_dir.join(r.string("data.base")?.ok_or_else(|| {
                            Error::Config("perturb data needs `data.base`".into())
                        })?),
                        eps: r.req_float("data.eps")?,
                        p_dense,
                        eta: r.req_float("data.eta")?,
                        gamma2,
                    }
                }
                other => return Err(Error::Config(format!("unknown data kind `{other}`"))),
            };

        let defaults = StepControl::default();
        let transport = match r.string("control.transport")?.as_deref() {
            None | Some("explicit") => Transport::Explicit,
            Some("implicit") => Transport::LinearlyImplicit,
            Some(other) => return Err(Error::Config(format!("unknown transport `{other}`"))),
        };
        let control = StepControl {
            dt_init: r.float_or("control.dt_init", defaults.dt_init)?,
            dt_min: r.float_or("control.dt_min", defaults.dt_min)?,
            dt_max: r.float_or("control.dt_max", defaults.dt_max)?,
            cfl_safety: r.float_or("control.cfl_safety", defaults.cfl_safety)?,
            growth_cap: r.float_or("control.growth_cap", defaults.growth_cap)?,
            sup_u_blowup: r.float_or("control.sup_u_blowup", defaults.sup_u_blowup)?,
            t_end: r.float_or("control.t_end", defaults.t_end)?,
            max_steps: r.count("control.max_steps")?.unwrap_or(defaults.max_steps),
            transport,
        };
        control.validate()?;

        let kappa = r.float_or("monitors.kappa", nf - 2.0 + 0.5)?;
        if !(kappa > nf - 2.0) {
            return Err(hypothesis(format!(
                "kappa must exceed n-2 = {}, got {kappa}",
                nf - 2.0
            )));
        }
        let p_hi = nf / (nf - 1.0);
        let p_bound = r.float_or("monitors.p_bound", 0.5 * (1.0 + p_hi))?;
        if !(p_bound > 1.0 && p_bound < p_hi) {
            return Err(hypothesis(format!(
                "p_bound must lie in (1, n/(n-1)) = (1, {p_hi}), got {p_bound}"
            )));
        }
        let lp_exponent = r.float("monitors.lp_exponent")?;
        if let Some(p) = lp_exponent {
            if !(p > nf) {
                return Err(hypothesis(format!(
                    "L^p monitor needs p > n = {n}, got {p}"
                )));
            }
            if let Family::DecayingSensitivity { gamma1, .. } = family {
                if p > gamma1 {
                    return Err(hypothesis(format!(
                        "L^p monitor needs p <= gamma1 = {gamma1} for this family, got {p}"
                    )));
                }
            }
        }
        let tail_fraction = r.float_or("monitors.tail_fraction", 0.3)?;
        if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "tail_fraction must lie in (0, 1], got {tail_fraction}"
            )));
        }
        let membership_k = r.float_or("monitors.membership_k", 1.0)?;
        if !(membership_k > 0.0) {
            return Err(Error::Config(format!(
                "membership_k must be positive, got {membership_k}"
            )));
        }
        let sample_stride = r.count("monitors.sample_stride")?.unwrap_or(1) as usize;
        if sample_stride == 0 {
            return Err(Error::Config("sample_stride must be positive".into()));
        }
        let monitors = MonitorConfig {
            kappa,
            p_bound,
            lp_exponent,
            sample_stride,
            snapshot_times: r.float_list("monitors.snapshot_times")?,
            snapshot_stride: r.count("monitors.snapshot_stride")?.unwrap_or(0) as usize,
            steady_tol: r.float_or("monitors.steady_tol", 1e-10)?,
            tail_fraction,
            membership_k,
        };

        let sweep_axes = r
            .string_list("sweep.axes")?
            .iter()
            .map(|s| Axis::parse(s))
            .collect::<Result<Vec<_>>>()?;
        let output_dir = r.string("output.dir")?.map(|d| base_dir.join(d));

        let cfg = RunConfig {
            grid,
            family,
            s0,
            quad_tol,
            s_cap,
            data,
            control,
            monitors,
            conditions: ConditionsConfig {
                alpha,
                gamma,
                b,
                range,
            },
            output_dir,
            sweep_axes,
            entries,
            base_dir,
        };
        cfg.spec()?;
        Ok(cfg)
    }

    pub fn build_grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.grid.n, self.grid.radius, self.grid.cells)
    }

    pub fn spec(&self) -> Result<NonlinearitySpec> {
        NonlinearitySpec::with_settings(self.family.clone(), self.s0, self.quad_tol, self.s_cap)
    }

    /// The flattened `key = value` entries as given, sorted by key.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }
}
