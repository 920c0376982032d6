//! Run configuration: a TOML file with `[problem]`, `[weight1]`, `[weight2]`,
//! `[nonlinearity]`, `[numerics]`, `[output]` and optional `[sweep]` sections.
//!
//! ```toml
//! [problem]
//! n_dim = 3
//! a1 = 1.0
//! a2 = 1.0
//!
//! [weight1]
//! family = "constant"
//! c = 1.0
//!
//! [weight2]
//! family = "power_decay"
//! c = 0.01
//! sigma = 4.0
//!
//! [nonlinearity]
//! family = "power_pair"
//! alpha = 1.0
//! beta = 1.0
//!
//! [numerics]
//! r_max = 2.0
//!
//! [sweep]
//! "nonlinearity.alpha" = [0.5, 1.0, 3.0]
//! ```
//!
//! Any key can be overridden with `section.key=value`, where `value` is a TOML value.

use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;
use toml::{Table, Value};

use crate::grid::{Grading, RadialGrid, SampledFn};
use crate::model::{
    coupled_power, min_m, power_pair, Component, Envelope, NonlinearityPair, ProblemSpec, WeightFn,
};
use crate::solver::IterationConfig;
use crate::transforms::TailPolicy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{field}: {reason}")]
    Validation { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub n_dim: usize,
    pub a1: f64,
    pub a2: f64,
    pub eps: f64,
    pub m1: f64,
    pub m2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightConfig {
    Constant { c: f64 },
    PowerDecay { c: f64, sigma: f64 },
    Power { c: f64, k: f64 },
    Zero,
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearityKind {
    PowerPair,
    CoupledPower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearityConfig {
    pub family: NonlinearityKind,
    pub alpha: f64,
    pub beta: f64,
    pub c1bar: Option<f64>,
    pub c2bar: Option<f64>,
    /// `f̄₁(s) = s^e` when set.
    pub fbar1_exp: Option<f64>,
    pub fbar2_exp: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradingConfig {
    Uniform,
    Geometric { ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericsConfig {
    pub r_max: f64,
    /// Number of grid cells.
    pub grid_points: usize,
    pub grading: GradingConfig,
    pub tol: f64,
    pub max_iter: usize,
    pub tail_radius_start: f64,
    pub tail_doublings: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputConfig {
    pub csv_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
}

/// One `[sweep]` axis: a dotted key and the TOML values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub weights: [WeightConfig; 2],
    pub nonlinearity: NonlinearityConfig,
    pub numerics: NumericsConfig,
    pub output: OutputConfig,
    pub sweep: Vec<SweepAxis>,
}

const SECTIONS: [&str; 7] = [
    "problem",
    "weight1",
    "weight2",
    "nonlinearity",
    "numerics",
    "output",
    "sweep",
];

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_table(text: &str) -> Result<Table, ConfigError> {
    text.parse::<Table>().map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
        reason: e.message().to_string(),
    })
}

/// Parses and validates a configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with_overrides(text, &[])
}

/// As [`parse_config`], applying `section.key=value` overrides before validation.
pub fn parse_config_with_overrides(
    text: &str,
    overrides: &[String],
) -> Result<RunConfig, ConfigError> {
    let mut table = parse_table(text)?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    from_table(&table)
}

/// Splits `section.key=value` and parses `value` as a TOML value.
pub fn parse_override(spec: &str) -> Result<(String, Value), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| invalid(spec, "override must look like section.key=value"))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        // bare words such as `family=zero` are taken as strings
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key, value))
}

fn apply_override(table: &mut Table, spec: &str) -> Result<(), ConfigError> {
    let (key, value) = parse_override(spec)?;
    set_dotted(table, &key, value)
}

fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<(), ConfigError> {
    let (section, field) = key
        .split_once('.')
        .ok_or_else(|| invalid(key, "expected section.key"))?;
    if !SECTIONS.contains(&section) || section == "sweep" {
        return Err(invalid(key, format!("unknown section '{section}'")));
    }
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    let Value::Table(sec) = entry else {
        return Err(invalid(section, "must be a table"));
    };
    // switching families drops the parameters of the old one
    if field == "family" && sec.get("family") != Some(&value) {
        sec.clear();
    }
    sec.insert(field.to_string(), value);
    Ok(())
}

struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
    used: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'a str) -> Result<Self, ConfigError> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(invalid(name, "must be a [section]")),
        };
        Ok(Self {
            name,
            table,
            used: Vec::new(),
        })
    }

    fn field(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.push(key);
        self.table.and_then(|t| t.get(key))
    }

    fn opt_f64(&mut self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(v) => Err(invalid(
                &self.field(key),
                format!("expected a number, got {v}"),
            )),
        }
    }

    fn f64(&mut self, key: &'static str) -> Result<f64, ConfigError> {
        self.opt_f64(key)?
            .ok_or_else(|| invalid(&self.field(key), "missing"))
    }

    fn f64_or(&mut self, key: &'static str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn usize_or(&mut self, key: &'static str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(v) => Err(invalid(
                &self.field(key),
                format!("expected a nonnegative integer, got {v}"),
            )),
        }
    }

    fn opt_str(&mut self, key: &'static str) -> Result<Option<&'a str>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(invalid(
                &self.field(key),
                format!("expected a string, got {v}"),
            )),
        }
    }

    fn f64_list(&mut self, key: &'static str) -> Result<Vec<f64>, ConfigError> {
        match self.raw(key) {
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(invalid(&self.field(key), "expected numbers")),
                })
                .collect(),
            _ => Err(invalid(&self.field(key), "expected an array of numbers")),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some(t) = self.table {
            if let Some(k) = t.keys().find(|k| !self.used.contains(&k.as_str())) {
                return Err(invalid(&self.field(k), "unknown key"));
            }
        }
        Ok(())
    }
}

fn positive(field: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(field, format!("must be positive, got {x}")))
    }
}

fn nonnegative(field: &str, x: f64) -> Result<f64, ConfigError> {
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(field, format!("must be nonnegative, got {x}")))
    }
}

fn weight_from(root: &Table, name: &str) -> Result<WeightConfig, ConfigError> {
    let mut s = Section::new(root, name)?;
    if s.table.is_none() {
        return Err(invalid(name, "missing section"));
    }
    let fam = s
        .opt_str("family")?
        .ok_or_else(|| invalid(&format!("{name}.family"), "missing"))?;
    let f = |k: &str| format!("{name}.{k}");
    let w = match fam {
        "constant" => WeightConfig::Constant {
            c: nonnegative(&f("c"), s.f64("c")?)?,
        },
        "power_decay" => WeightConfig::PowerDecay {
            c: nonnegative(&f("c"), s.f64("c")?)?,
            sigma: nonnegative(&f("sigma"), s.f64("sigma")?)?,
        },
        "power" => WeightConfig::Power {
            c: nonnegative(&f("c"), s.f64("c")?)?,
            k: nonnegative(&f("k"), s.f64("k")?)?,
        },
        "zero" => WeightConfig::Zero,
        "tabulated" => {
            let radii = s.f64_list("radii")?;
            let values = s.f64_list("values")?;
            if radii.len() != values.len() {
                return Err(invalid(&f("values"), "must match radii in length"));
            }
            if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
                return Err(invalid(&f("values"), format!("negative sample {v}")));
            }
            RadialGrid::from_nodes(radii.clone())
                .map_err(|e| invalid(&f("radii"), e.to_string()))?;
            WeightConfig::Tabulated { radii, values }
        }
        other => return Err(invalid(&f("family"), format!("unknown family '{other}'"))),
    };
    s.finish()?;
    Ok(w)
}

fn from_table(root: &Table) -> Result<RunConfig, ConfigError> {
    if let Some(k) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(invalid(k, "unknown section"));
    }

    let mut p = Section::new(root, "problem")?;
    let n_dim = match p.raw("n_dim") {
        Some(Value::Integer(n)) if *n >= 3 => *n as usize,
        Some(Value::Integer(n)) => {
            return Err(invalid(
                "problem.n_dim",
                format!("N must be at least 3, got {n}"),
            ))
        }
        Some(v) => {
            return Err(invalid(
                "problem.n_dim",
                format!("expected an integer, got {v}"),
            ))
        }
        None => 3,
    };
    let a1 = positive("problem.a1", p.f64("a1")?)?;
    let a2 = positive("problem.a2", p.f64("a2")?)?;
    let eps = positive("problem.eps", p.f64_or("eps", 0.5)?)?;
    let m1 = p.f64_or("m1", min_m(a1))?;
    let m2 = p.f64_or("m2", min_m(a2))?;
    for (field, m, a) in [("problem.m1", m1, a1), ("problem.m2", m2, a2)] {
        if !(m >= min_m(a)) {
            return Err(invalid(
                field,
                format!("must be at least max(1, 1/a) = {}", min_m(a)),
            ));
        }
    }
    p.finish()?;

    let weights = [weight_from(root, "weight1")?, weight_from(root, "weight2")?];

    let mut n = Section::new(root, "nonlinearity")?;
    let family = match n.opt_str("family")?.unwrap_or("power_pair") {
        "power_pair" => NonlinearityKind::PowerPair,
        "coupled_power" => NonlinearityKind::CoupledPower,
        other => {
            return Err(invalid(
                "nonlinearity.family",
                format!("unknown family '{other}'"),
            ))
        }
    };
    let alpha = positive("nonlinearity.alpha", n.f64("alpha")?)?;
    let beta = positive("nonlinearity.beta", n.f64("beta")?)?;
    let mut opt_pos = |key: &'static str| -> Result<Option<f64>, ConfigError> {
        n.opt_f64(key)?
            .map(|x| positive(&format!("nonlinearity.{key}"), x))
            .transpose()
    };
    let nonlinearity = NonlinearityConfig {
        family,
        alpha,
        beta,
        c1bar: opt_pos("c1bar")?,
        c2bar: opt_pos("c2bar")?,
        fbar1_exp: opt_pos("fbar1_exp")?,
        fbar2_exp: opt_pos("fbar2_exp")?,
    };
    n.finish()?;

    let mut m = Section::new(root, "numerics")?;
    let r_max = positive("numerics.r_max", m.f64("r_max")?)?;
    let grid_points = m.usize_or("grid_points", 2048)?;
    if grid_points < crate::grid::MIN_CELLS {
        return Err(invalid(
            "numerics.grid_points",
            format!("at least {} cells are needed", crate::grid::MIN_CELLS),
        ));
    }
    let grading = match m.opt_str("grading")?.unwrap_or("uniform") {
        "uniform" => GradingConfig::Uniform,
        "geometric" => {
            let ratio = m.f64_or("ratio", 1.001)?;
            if !(ratio > 1.0 && ratio <= 1.2) {
                return Err(invalid("numerics.ratio", "must lie in (1, 1.2]"));
            }
            GradingConfig::Geometric { ratio }
        }
        other => {
            return Err(invalid(
                "numerics.grading",
                format!("unknown grading '{other}'"),
            ))
        }
    };
    let tol = positive("numerics.tol", m.f64_or("tol", 1e-10)?)?;
    let max_iter = m.usize_or("max_iter", 200)?;
    if max_iter == 0 {
        return Err(invalid("numerics.max_iter", "must be positive"));
    }
    let tail_radius_start = positive(
        "numerics.tail_radius_start",
        m.f64_or("tail_radius_start", 1.0)?,
    )?;
    let tail_doublings = m.usize_or("tail_doublings", 20)?;
    if !(3..=40).contains(&tail_doublings) {
        return Err(invalid("numerics.tail_doublings", "must lie in 3..=40"));
    }
    let numerics = NumericsConfig {
        r_max,
        grid_points,
        grading,
        tol,
        max_iter,
        tail_radius_start,
        tail_doublings,
    };
    m.finish()?;

    let mut o = Section::new(root, "output")?;
    let output = OutputConfig {
        csv_path: o.opt_str("csv_path")?.map(PathBuf::from),
        report_path: o.opt_str("report_path")?.map(PathBuf::from),
    };
    o.finish()?;

    let mut sweep = Vec::new();
    match root.get("sweep") {
        None => {}
        Some(Value::Table(t)) => {
            for (key, v) in t {
                let Value::Array(values) = v else {
                    return Err(invalid(&format!("sweep.{key}"), "expected an array"));
                };
                if values.is_empty() {
                    return Err(invalid(&format!("sweep.{key}"), "needs at least one value"));
                }
                sweep.push(SweepAxis {
                    key: key.clone(),
                    values: values.clone(),
                });
            }
        }
        Some(_) => return Err(invalid("sweep", "must be a [section]")),
    }

    let cfg = RunConfig {
        problem: ProblemConfig {
            n_dim,
            a1,
            a2,
            eps,
            m1,
            m2,
        },
        weights,
        nonlinearity,
        numerics,
        output,
        sweep,
    };
    // catch anything the model rejects (for example a bad tabulated weight)
    cfg.problem_spec()?;
    for axis in &cfg.sweep {
        let mut probe = cfg.to_table();
        probe.remove("sweep");
        for v in &axis.values {
            set_dotted(&mut probe, &axis.key, v.clone())?;
        }
    }
    Ok(cfg)
}

impl WeightConfig {
    fn to_table(&self) -> Table {
        let mut t = Table::new();
        let mut put = |k: &str, v: Value| {
            t.insert(k.to_string(), v);
        };
        match self {
            WeightConfig::Constant { c } => {
                put("family", "constant".into());
                put("c", (*c).into());
            }
            WeightConfig::PowerDecay { c, sigma } => {
                put("family", "power_decay".into());
                put("c", (*c).into());
                put("sigma", (*sigma).into());
            }
            WeightConfig::Power { c, k } => {
                put("family", "power".into());
                put("c", (*c).into());
                put("k", (*k).into());
            }
            WeightConfig::Zero => put("family", "zero".into()),
            WeightConfig::Tabulated { radii, values } => {
                put("family", "tabulated".into());
                put("radii", radii.clone().into());
                put("values", values.clone().into());
            }
        }
        t
    }

    pub fn build(&self) -> Result<WeightFn<f64>, ConfigError> {
        Ok(match self {
            WeightConfig::Constant { c } => WeightFn::Constant(*c),
            WeightConfig::PowerDecay { c, sigma } => WeightFn::PowerDecay {
                c: *c,
                sigma: *sigma,
            },
            WeightConfig::Power { c, k } => WeightFn::Power { c: *c, k: *k },
            WeightConfig::Zero => WeightFn::zero(),
            WeightConfig::Tabulated { radii, values } => {
                let grid = RadialGrid::from_nodes(radii.clone())
                    .map_err(|e| invalid("tabulated.radii", e.to_string()))?;
                let s = SampledFn::new(Arc::new(grid), values.clone())
                    .map_err(|e| invalid("tabulated.values", e.to_string()))?;
                WeightFn::Tabulated(s)
            }
        })
    }
}

impl RunConfig {
    /// Configuration as a TOML table with every default written out.
    pub fn to_table(&self) -> Table {
        let mut root = Table::new();
        let p = &self.problem;
        let mut problem = Table::new();
        problem.insert("n_dim".into(), (p.n_dim as i64).into());
        problem.insert("a1".into(), p.a1.into());
        problem.insert("a2".into(), p.a2.into());
        problem.insert("eps".into(), p.eps.into());
        problem.insert("m1".into(), p.m1.into());
        problem.insert("m2".into(), p.m2.into());
        root.insert("problem".into(), problem.into());
        root.insert("weight1".into(), self.weights[0].to_table().into());
        root.insert("weight2".into(), self.weights[1].to_table().into());

        let n = &self.nonlinearity;
        let mut nl = Table::new();
        let fam = match n.family {
            NonlinearityKind::PowerPair => "power_pair",
            NonlinearityKind::CoupledPower => "coupled_power",
        };
        nl.insert("family".into(), fam.into());
        nl.insert("alpha".into(), n.alpha.into());
        nl.insert("beta".into(), n.beta.into());
        for (k, v) in [
            ("c1bar", n.c1bar),
            ("c2bar", n.c2bar),
            ("fbar1_exp", n.fbar1_exp),
            ("fbar2_exp", n.fbar2_exp),
        ] {
            if let Some(v) = v {
                nl.insert(k.into(), v.into());
            }
        }
        root.insert("nonlinearity".into(), nl.into());

        let m = &self.numerics;
        let mut num = Table::new();
        num.insert("r_max".into(), m.r_max.into());
        num.insert("grid_points".into(), (m.grid_points as i64).into());
        match m.grading {
            GradingConfig::Uniform => {
                num.insert("grading".into(), "uniform".into());
            }
            GradingConfig::Geometric { ratio } => {
                num.insert("grading".into(), "geometric".into());
                num.insert("ratio".into(), ratio.into());
            }
        }
        num.insert("tol".into(), m.tol.into());
        num.insert("max_iter".into(), (m.max_iter as i64).into());
        num.insert("tail_radius_start".into(), m.tail_radius_start.into());
        num.insert("tail_doublings".into(), (m.tail_doublings as i64).into());
        root.insert("numerics".into(), num.into());

        let mut out = Table::new();
        if let Some(c) = &self.output.csv_path {
            out.insert("csv_path".into(), c.display().to_string().into());
        }
        if let Some(r) = &self.output.report_path {
            out.insert("report_path".into(), r.display().to_string().into());
        }
        root.insert("output".into(), out.into());

        if !self.sweep.is_empty() {
            let mut sw = Table::new();
            for axis in &self.sweep {
                sw.insert(axis.key.clone(), Value::Array(axis.values.clone()));
            }
            root.insert("sweep".into(), sw.into());
        }
        root
    }

    /// Normalized TOML text; `parse_config(&cfg.emit())` gives back `cfg`.
    pub fn emit(&self) -> String {
        self.to_table().to_string()
    }

    /// Copy with `section.key=value` overrides applied.
    pub fn with_overrides(&self, overrides: &[(String, Value)]) -> Result<Self, ConfigError> {
        let mut t = self.to_table();
        for (k, v) in overrides {
            set_dotted(&mut t, k, v.clone())?;
        }
        from_table(&t)
    }

    /// Every cell of the `[sweep]` Cartesian product, in row-major order
    /// (the last axis varies fastest). Without axes there is one empty cell.
    pub fn sweep_cells(&self) -> Vec<Vec<(String, Value)>> {
        let mut cells: Vec<Vec<(String, Value)>> = vec![Vec::new()];
        for axis in &self.sweep {
            cells = cells
                .into_iter()
                .flat_map(|cell| {
                    axis.values.iter().map(move |v| {
                        let mut c = cell.clone();
                        c.push((axis.key.clone(), v.clone()));
                        c
                    })
                })
                .collect();
        }
        cells
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec<f64>, ConfigError> {
        let n = &self.nonlinearity;
        let mut pair: NonlinearityPair<f64> = match n.family {
            NonlinearityKind::PowerPair => power_pair(n.alpha, n.beta),
            NonlinearityKind::CoupledPower => coupled_power(n.alpha, n.beta),
        }
        .map_err(|e| invalid("nonlinearity", e.to_string()))?;
        for (c, c_bar, exp) in [
            (Component::U, n.c1bar, n.fbar1_exp),
            (Component::V, n.c2bar, n.fbar2_exp),
        ] {
            if let Some(e) = exp {
                let cb = c_bar.unwrap_or(pair.envelope(c).c_bar);
                pair = pair.with_envelope(c, Envelope::power(cb, e));
            } else if let Some(cb) = c_bar {
                pair = pair.with_c_bar(c, cb);
            }
        }
        let p = &self.problem;
        let spec = ProblemSpec::new(
            p.n_dim,
            p.a1,
            p.a2,
            [self.weights[0].build()?, self.weights[1].build()?],
            pair,
        )
        .and_then(|s| s.with_eps(p.eps))
        .and_then(|s| s.with_m(Component::U, p.m1))
        .and_then(|s| s.with_m(Component::V, p.m2))
        .map_err(|e| invalid("problem", e.to_string()))?;
        Ok(spec)
    }

    pub fn grid(&self) -> Result<Arc<RadialGrid<f64>>, ConfigError> {
        let m = &self.numerics;
        let grading = match m.grading {
            GradingConfig::Uniform => Grading::Uniform,
            GradingConfig::Geometric { ratio } => Grading::Geometric(ratio),
        };
        RadialGrid::new(m.r_max, m.grid_points, grading)
            .map(Arc::new)
            .map_err(|e| invalid("numerics", e.to_string()))
    }

    pub fn tail_policy(&self) -> TailPolicy<f64> {
        TailPolicy {
            start: self.numerics.tail_radius_start,
            doublings: self.numerics.tail_doublings,
            ..TailPolicy::for_grid_cells(self.numerics.grid_points)
        }
    }

    pub fn iteration(&self) -> Result<IterationConfig<f64>, ConfigError> {
        let spec = self.problem_spec()?;
        Ok(IterationConfig::for_problem(&spec, self.numerics.tol)
            .with_max_iter(self.numerics.max_iter))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[problem]
n_dim = 3
a1 = 1.0
a2 = 1.0

[weight1]
family = "constant"
c = 1.0

[weight2]
family = "constant"
c = 1

[nonlinearity]
family = "power_pair"
alpha = 1.0
beta = 1.0

[numerics]
r_max = 2.0
"#;

    #[test]
    fn defaults_are_filled() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.problem.eps, 0.5);
        assert_eq!((c.problem.m1, c.problem.m2), (1.0, 1.0));
        assert_eq!(c.numerics.grid_points, 2048);
        assert_eq!(c.numerics.tol, 1e-10);
        assert_eq!(c.numerics.max_iter, 200);
        assert_eq!(c.weights[1], WeightConfig::Constant { c: 1.0 });
    }

    #[test]
    fn small_center_raises_default_m() {
        let c = parse_config(&MINIMAL.replace("a2 = 1.0", "a2 = 0.25")).unwrap();
        assert_eq!(c.problem.m2, 4.0);
    }

    #[test]
    fn validation_errors() {
        let e = parse_config(&MINIMAL.replace("n_dim = 3", "n_dim = 2")).unwrap_err();
        assert!(matches!(e, ConfigError::Validation { ref field, .. } if field == "problem.n_dim"));
        let e = parse_config(&MINIMAL.replace("a1 = 1.0", "a1 = 0")).unwrap_err();
        assert!(matches!(e, ConfigError::Validation { ref field, .. } if field == "problem.a1"));
        let e = parse_config(&MINIMAL.replace("r_max = 2.0", "r_max = -1.0")).unwrap_err();
        assert!(
            matches!(e, ConfigError::Validation { ref field, .. } if field == "numerics.r_max")
        );
        let e =
            parse_config(&MINIMAL.replace("alpha = 1.0", "alpha = 1.0\ngamma = 2")).unwrap_err();
        assert!(
            matches!(e, ConfigError::Validation { ref field, .. } if field == "nonlinearity.gamma")
        );
    }

    #[test]
    fn parse_error_has_line() {
        let e = parse_config("[problem]\nn_dim = 3\na1 = = 1\n").unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 3, .. }), "{e:?}");
    }

    #[test]
    fn overrides_apply() {
        let c = parse_config_with_overrides(
            MINIMAL,
            &[
                "weight1.family=zero".into(),
                "numerics.grid_points=64".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.weights[0], WeightConfig::Zero);
        assert_eq!(c.numerics.grid_points, 64);
        assert!(parse_config_with_overrides(MINIMAL, &["nope".into()]).is_err());
    }

    #[test]
    fn sweep_cells_in_order() {
        let text = format!(
            "{MINIMAL}\n[sweep]\n\"nonlinearity.alpha\" = [0.5, 3.0]\n\"problem.a1\" = [1.0, 2.0, 4.0]\n"
        );
        let c = parse_config(&text).unwrap();
        let cells = c.sweep_cells();
        assert_eq!(cells.len(), 6);
        let cell = c.with_overrides(&cells[5]).unwrap();
        assert_eq!(cell.nonlinearity.alpha, 3.0);
        assert_eq!(cell.problem.a1, 4.0);
        assert_eq!(parse_config(&c.emit()).unwrap(), c);
    }

    #[test]
    fn tabulated_weight_round_trip() {
        let radii: Vec<String> = (0..=16).map(|k| format!("{}", k as f64 * 0.25)).collect();
        let values: Vec<String> = (0..=16)
            .map(|k| format!("{}", 1.0 / (1.0 + k as f64)))
            .collect();
        let text = MINIMAL.replace(
            "[weight2]\nfamily = \"constant\"\nc = 1",
            &format!(
                "[weight2]\nfamily = \"tabulated\"\nradii = [{}]\nvalues = [{}]",
                radii.join(", "),
                values.join(", ")
            ),
        );
        let c = parse_config(&text).unwrap();
        assert!(matches!(c.weights[1], WeightConfig::Tabulated { .. }));
        assert_eq!(parse_config(&c.emit()).unwrap(), c);
        let w = c.weights[1].build().unwrap();
        assert!((w.eval(0.125) - 0.75).abs() < 1e-15);
    }
}
