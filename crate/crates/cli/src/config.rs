//! Experiment configuration.
//!
//! A config file is TOML whose tables and dotted keys are flattened into one
//! sorted map (`model.params.sigma`, `convergence.levels`, ...). Command-line
//! flags are applied on top, then every key the study understands is resolved
//! against its default. Unknown keys are rejected so that typos never pass
//! silently. The resolved map is what the summary echoes and what the config
//! hash covers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use svi_core::geometry::Retraction;
use svi_core::integrators::{ErrorNorm, Method, StepperConfig};
use svi_core::systems::{build, model_info, resolve_params, Model, ModelKind, Params};

use crate::error::{CliError, CliResult};

pub type Flat = BTreeMap<String, Value>;

/// Keys that locate or schedule a run without changing its results. They are
/// echoed in the summary but excluded from the config hash.
const UNHASHED: [&str; 2] = ["outputs", "threads"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Study {
    Simulate,
    Convergence,
    Temperature,
    Invariants,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Simulate => "simulate",
            Study::Convergence => "convergence",
            Study::Temperature => "temperature",
            Study::Invariants => "invariants",
        }
    }
}

/// Command-line overrides, applied after the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub set: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Config {
    pub study: Study,
    pub model: String,
    pub params: Params,
    pub integrators: Vec<Method>,
    pub seed: u64,
    pub outputs: PathBuf,
    pub threads: usize,
    pub retraction: Retraction,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub constraint_tol: f64,
    /// Step size; for convergence studies it is the finest tested step.
    pub h: f64,
    pub horizon: (f64, f64),
    pub paths: usize,
    pub record_every: usize,
    /// `initial.*` entries, every one a list of reals.
    pub initial: BTreeMap<String, Vec<f64>>,
    pub levels: (u32, u32),
    pub reference_offset: u32,
    pub norm: ErrorNorm,
    pub thermal: bool,
    pub samples: usize,
    pub fd_step: f64,
    pub symmetry: String,
    /// Every resolved key with its value.
    pub resolved: Flat,
}

impl Config {
    pub fn stepper(&self, h: f64) -> CliResult<StepperConfig> {
        let mut cfg = StepperConfig::new(h)?.with_retraction(self.retraction);
        cfg.newton_tol = self.newton_tol;
        cfg.newton_max_iter = self.newton_max_iter;
        cfg.constraint_tol = self.constraint_tol;
        Ok(cfg.validated()?)
    }

    /// Number of steps of size `h` covering the horizon.
    pub fn steps(&self) -> usize {
        ((self.horizon.1 - self.horizon.0) / self.h).round() as usize
    }

    pub fn initial(&self, key: &str) -> &[f64] {
        self.initial.get(key).map_or(&[], Vec::as_slice)
    }

    /// `key = value` lines of the resolved config, sorted by key.
    pub fn canonical(&self, include_unhashed: bool) -> String {
        let mut out = String::new();
        for (k, v) in &self.resolved {
            if include_unhashed || !UNHASHED.contains(&k.as_str()) {
                let _ = writeln!(out, "{} = {}", toml_key(k), v);
            }
        }
        out
    }

    /// SHA-256 of the canonical resolved config, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical(false).as_bytes()))
    }
}

/// Dotted keys are written bare when every segment is a bare TOML key.
fn toml_key(k: &str) -> String {
    let bare = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    k.split('.')
        .map(|seg| if bare(seg) { seg.to_string() } else { format!("{seg:?}") })
        .collect::<Vec<_>>()
        .join(".")
}

fn flatten(prefix: &str, table: &Table, out: &mut Flat) {
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

/// Parse config text. A top-level `results` table (present in summaries) is
/// ignored, so a summary file can be fed back as a config.
pub fn parse_flat(text: &str) -> CliResult<Flat> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::config("<file>", e.message().to_string()))?;
    table.remove("results");
    let mut flat = Flat::new();
    flatten("", &table, &mut flat);
    Ok(flat)
}

pub fn read_flat(path: Option<&Path>) -> CliResult<Flat> {
    match path {
        None => Ok(Flat::new()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            parse_flat(&text)
        }
    }
}

/// Parse the right-hand side of `--set key=value` as a TOML value, falling
/// back to a bare string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn apply_overrides(flat: &mut Flat, ov: &Overrides) -> CliResult<()> {
    for item in &ov.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::config(item.clone(), "expected --set key=value"))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(CliError::config(item.clone(), "empty key"));
        }
        flat.insert(key.to_string(), parse_value(v.trim()));
    }
    if let Some(seed) = ov.seed {
        let seed = i64::try_from(seed).map_err(|_| CliError::config("seed", "must not exceed 2^63 - 1"))?;
        flat.insert("seed".into(), Value::Integer(seed));
    }
    if let Some(out) = &ov.out {
        flat.insert("outputs".into(), Value::String(out.display().to_string()));
    }
    if let Some(t) = ov.threads {
        flat.insert("threads".into(), Value::Integer(t as i64));
    }
    Ok(())
}

/// Typed access to the flattened map that records every resolved value and
/// remembers which keys were consumed.
struct Reader {
    given: Flat,
    used: BTreeSet<String>,
    resolved: Flat,
}

fn type_name(v: &Value) -> &'static str {
    v.type_str()
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.used.insert(key.to_string());
        self.given.get(key).cloned()
    }

    fn as_float(key: &str, v: &Value) -> CliResult<f64> {
        match v {
            Value::Float(x) => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            other => Err(CliError::config(
                key,
                format!("expected a number, got {}", type_name(other)),
            )),
        }
    }

    fn float(&mut self, key: &str, default: f64) -> CliResult<f64> {
        let x = match self.take(key) {
            Some(v) => Self::as_float(key, &v)?,
            None => default,
        };
        if !x.is_finite() {
            return Err(CliError::config(key, "must be finite"));
        }
        self.resolved.insert(key.into(), Value::Float(x));
        Ok(x)
    }

    fn positive(&mut self, key: &str, default: f64) -> CliResult<f64> {
        let x = self.float(key, default)?;
        if x > 0.0 {
            Ok(x)
        } else {
            Err(CliError::config(key, format!("must be positive, got {x}")))
        }
    }

    fn int(&mut self, key: &str, default: i64, min: i64) -> CliResult<i64> {
        let i = match self.take(key) {
            Some(Value::Integer(i)) => i,
            Some(other) => {
                return Err(CliError::config(
                    key,
                    format!("expected an integer, got {}", type_name(&other)),
                ));
            }
            None => default,
        };
        if i < min {
            return Err(CliError::config(key, format!("must be at least {min}, got {i}")));
        }
        self.resolved.insert(key.into(), Value::Integer(i));
        Ok(i)
    }

    fn string(&mut self, key: &str, default: &str) -> CliResult<String> {
        let s = match self.take(key) {
            Some(Value::String(s)) => s,
            Some(other) => {
                return Err(CliError::config(
                    key,
                    format!("expected a string, got {}", type_name(&other)),
                ));
            }
            None => default.to_string(),
        };
        self.resolved.insert(key.into(), Value::String(s.clone()));
        Ok(s)
    }

    fn floats(&mut self, key: &str, default: &[f64], len: Option<usize>) -> CliResult<Vec<f64>> {
        let xs = match self.take(key) {
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| Self::as_float(key, v))
                .collect::<CliResult<Vec<_>>>()?,
            Some(v @ (Value::Float(_) | Value::Integer(_))) => vec![Self::as_float(key, &v)?],
            Some(other) => {
                return Err(CliError::config(
                    key,
                    format!("expected a list of numbers, got {}", type_name(&other)),
                ));
            }
            None => default.to_vec(),
        };
        if let Some(n) = len {
            if xs.len() != n {
                return Err(CliError::config(key, format!("expected {n} values, got {}", xs.len())));
            }
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(CliError::config(key, "values must be finite"));
        }
        self.resolved
            .insert(key.into(), Value::Array(xs.iter().map(|&x| Value::Float(x)).collect()));
        Ok(xs)
    }

    fn strings(&mut self, key: &str, default: &[&str]) -> CliResult<Vec<String>> {
        let xs: Vec<String> = match self.take(key) {
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    other => Err(CliError::config(
                        key,
                        format!("expected strings, got {}", type_name(other)),
                    )),
                })
                .collect::<CliResult<_>>()?,
            Some(Value::String(s)) => vec![s],
            Some(other) => {
                return Err(CliError::config(
                    key,
                    format!("expected a list of strings, got {}", type_name(&other)),
                ));
            }
            None => default.iter().map(|s| s.to_string()).collect(),
        };
        self.resolved.insert(
            key.into(),
            Value::Array(xs.iter().cloned().map(Value::String).collect()),
        );
        Ok(xs)
    }

    fn finish(self) -> CliResult<Flat> {
        if let Some(k) = self.given.keys().find(|k| !self.used.contains(*k)) {
            return Err(CliError::config(k.clone(), "unknown key for this study and model"));
        }
        Ok(self.resolved)
    }
}

struct StudyDefaults {
    model: &'static str,
    h: f64,
    horizon: [f64; 2],
    paths: usize,
}

fn study_defaults(study: Study) -> StudyDefaults {
    match study {
        Study::Simulate => StudyDefaults {
            model: "oscillator",
            h: 0.01,
            horizon: [0.0, 10.0],
            paths: 1,
        },
        Study::Convergence => StudyDefaults {
            model: "oscillator",
            h: 0.0,
            horizon: [0.0, 1.0],
            paths: 1000,
        },
        Study::Temperature => StudyDefaults {
            model: "ballistic_analog",
            h: 0.1,
            horizon: [0.0, 100.0],
            paths: 500,
        },
        Study::Invariants => StudyDefaults {
            model: "oscillator",
            h: 0.1,
            horizon: [0.0, 100.0],
            paths: 1,
        },
    }
}

/// Default `initial.*` entries for a model with resolved parameters.
fn initial_defaults(model: &str, params: &Params) -> Vec<(&'static str, Vec<f64>)> {
    let count = |k: &str| params.get(k).copied().unwrap_or(1.0).max(1.0) as usize;
    match model {
        "oscillator" => vec![("q", vec![1.0]), ("p", vec![0.0])],
        "constrained_pendulum" => vec![("theta", vec![0.3]), ("theta_dot", vec![0.0])],
        "ballistic_analog" => vec![("q", vec![0.5, 0.0]), ("p", vec![0.0, 0.0])],
        "two_body" => {
            let d = count("dims");
            let mut q = vec![0.5; d];
            q.extend(vec![-0.5; d]);
            vec![("q", q), ("p", vec![0.0; 2 * d])]
        }
        "lattice" => {
            let n = count("sites");
            let mut q = vec![0.0; n];
            q[0] = 0.1;
            vec![("q", q), ("p", vec![0.0; n])]
        }
        "rigid_pair" => {
            let k = count("bodies");
            let pick = |a: [f64; 3], b: [f64; 3]| -> Vec<f64> { [a, b].iter().take(k).flatten().copied().collect() };
            // a lone body sits at the origin so that body-frame runs, which
            // carry no translation, describe the same state
            let x = if k == 1 {
                vec![0.0; 3]
            } else {
                pick([0.5, 0.0, 0.0], [-0.5, 0.0, 0.0])
            };
            vec![
                ("x", x),
                ("v", vec![0.0; 3 * k]),
                ("rotvec", pick([0.3, 0.0, 0.0], [0.0, 0.0, 0.0])),
                ("omega", pick([0.2, -0.4, 0.6], [-0.3, 0.1, 0.2])),
            ]
        }
        _ => vec![],
    }
}

/// First symmetry the built model declares, or `none`.
fn declared_symmetry(model: &str, params: &Params) -> CliResult<String> {
    Ok(match build(model, params).map_err(model_error)? {
        Model::Vector(sys) => sys
            .symmetries()
            .first()
            .map_or_else(|| "none".into(), |s| s.name.clone()),
        Model::Rigid(sys) if sys.translation_invariant() => "translation".into(),
        Model::Rigid(_) => "none".into(),
    })
}

/// Parameter errors raised while building a model name their config key.
pub fn model_error(e: svi_core::Error) -> CliError {
    match e {
        svi_core::Error::InvalidParameter { name, reason } => {
            let field = if name.starts_with("model.") {
                name
            } else {
                format!("model.params.{name}")
            };
            CliError::config(field, reason)
        }
        other => CliError::NumericalFailure(other),
    }
}

fn parse_norm(key: &str, s: &str) -> CliResult<ErrorNorm> {
    ErrorNorm::parse(s).ok_or_else(|| {
        CliError::config(
            key,
            format!("expected phase_space, momentum or configuration, got `{s}`"),
        )
    })
}

/// Resolve `given` for `study`.
pub fn resolve(study: Study, given: Flat) -> CliResult<Config> {
    let defaults = study_defaults(study);
    let mut r = Reader {
        given,
        used: BTreeSet::new(),
        resolved: Flat::new(),
    };

    let declared = r.string("study", study.name())?;
    if declared != study.name() {
        return Err(CliError::config(
            "study",
            format!(
                "config declares `{declared}` but the `{}` subcommand was run",
                study.name()
            ),
        ));
    }

    let model = r.string("model.name", defaults.model)?;
    let info = model_info(&model).ok_or_else(|| CliError::UnknownModel(model.clone()))?;
    let mut given_params = Params::new();
    let param_keys: Vec<String> = r
        .given
        .keys()
        .filter(|k| k.starts_with("model.params."))
        .cloned()
        .collect();
    for key in param_keys {
        let v = r.take(&key).expect("key listed from the map");
        given_params.insert(key["model.params.".len()..].to_string(), Reader::as_float(&key, &v)?);
    }
    let params = resolve_params(&model, &given_params).map_err(model_error)?;
    for (k, v) in &params {
        r.resolved.insert(format!("model.params.{k}"), Value::Float(*v));
    }

    let default_integrators: &[&str] = match (study, info.kind, info.constrained) {
        (Study::Temperature, _, _) => &["svi", "eem", "iem"],
        (_, ModelKind::Rigid, _) => &["svi-rigid"],
        (_, _, true) => &["svi-constrained"],
        _ => &["svi"],
    };
    let integrators = r
        .strings("integrators", default_integrators)?
        .iter()
        .map(|s| Method::parse(s).ok_or_else(|| CliError::UnknownIntegrator(s.clone())))
        .collect::<CliResult<Vec<_>>>()?;
    if integrators.is_empty() {
        return Err(CliError::config("integrators", "at least one integrator is required"));
    }

    let seed = r.int("seed", 0, 0)? as u64;
    let outputs = PathBuf::from(r.string("outputs", "out")?);
    let threads = r.int("threads", 0, 0)? as usize;
    let retraction_name = r.string("retraction", Retraction::default().name())?;
    let retraction = Retraction::parse(&retraction_name).ok_or_else(|| {
        CliError::config(
            "retraction",
            format!("expected cayley or exponential, got `{retraction_name}`"),
        )
    })?;
    let newton_tol = r.positive("newton.tol", 1e-12)?;
    let newton_max_iter = r.int("newton.max_iter", 25, 1)? as usize;
    let constraint_tol = r.positive("constraint_tol", 1e-10)?;

    let horizon_v = r.floats("horizon", &defaults.horizon, Some(2))?;
    let horizon = (horizon_v[0], horizon_v[1]);
    if !(horizon.1 > horizon.0) {
        return Err(CliError::config("horizon", "end must exceed start"));
    }
    let length = horizon.1 - horizon.0;

    let mut cfg = Config {
        study,
        model: model.clone(),
        params: params.clone(),
        integrators,
        seed,
        outputs,
        threads,
        retraction,
        newton_tol,
        newton_max_iter,
        constraint_tol,
        h: defaults.h,
        horizon,
        paths: defaults.paths,
        record_every: 1,
        initial: BTreeMap::new(),
        levels: (4, 8),
        reference_offset: 4,
        norm: ErrorNorm::PhaseSpace,
        thermal: false,
        samples: 100,
        fd_step: 1e-5,
        symmetry: String::new(),
        resolved: Flat::new(),
    };

    if study == Study::Convergence {
        let lv = r.floats("convergence.levels", &[4.0, 8.0], Some(2))?;
        let as_level = |x: f64| -> CliResult<u32> {
            if (0.0..=30.0).contains(&x) && x.fract() == 0.0 {
                Ok(x as u32)
            } else {
                Err(CliError::config(
                    "convergence.levels",
                    format!("levels must be integers in 0..=30, got {x}"),
                ))
            }
        };
        cfg.levels = (as_level(lv[0])?, as_level(lv[1])?);
        if cfg.levels.0 > cfg.levels.1 {
            return Err(CliError::config(
                "convergence.levels",
                "coarsest level exceeds the finest",
            ));
        }
        cfg.reference_offset = r.int("convergence.reference_offset", 4, 4)? as u32;
        let norm = r.string("convergence.norm", ErrorNorm::PhaseSpace.name())?;
        cfg.norm = parse_norm("convergence.norm", &norm)?;
        cfg.paths = r.int("paths", defaults.paths as i64, 1)? as usize;
        // step sizes are the dyadic fractions horizon / 2^level
        cfg.h = length / (1u64 << cfg.levels.1) as f64;
    } else {
        cfg.h = r.positive("h", defaults.h)?;
        let ratio = length / cfg.h;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(CliError::config(
                "h",
                format!(
                    "step {} does not divide the horizon [{}, {}] into an integer number of steps",
                    cfg.h, horizon.0, horizon.1
                ),
            ));
        }
    }

    match study {
        Study::Simulate => {
            cfg.record_every = r.int("record_every", 1, 1)? as usize;
        }
        Study::Temperature => {
            cfg.paths = r.int("paths", defaults.paths as i64, 1)? as usize;
            cfg.record_every = r.int("record_every", 1, 1)? as usize;
            let init = r.string("temperature.initial", "thermal")?;
            cfg.thermal = match init.as_str() {
                "thermal" => true,
                "fixed" => false,
                other => {
                    return Err(CliError::config(
                        "temperature.initial",
                        format!("expected thermal or fixed, got `{other}`"),
                    ));
                }
            };
            if horizon.0 != 0.0 {
                return Err(CliError::config("horizon", "temperature studies start at t = 0"));
            }
        }
        Study::Invariants => {
            cfg.samples = r.int("invariants.samples", 100, 1)? as usize;
            cfg.fd_step = r.positive("invariants.fd_step", 1e-5)?;
            let default_sym = declared_symmetry(&model, &params)?;
            cfg.symmetry = r.string("invariants.symmetry", &default_sym)?;
        }
        Study::Convergence => {}
    }

    if !(study == Study::Temperature && cfg.thermal) {
        for (key, default) in initial_defaults(&model, &params) {
            let full = format!("initial.{key}");
            let v = r.floats(&full, &default, Some(default.len()))?;
            cfg.initial.insert(key.to_string(), v);
        }
    }

    cfg.resolved = r.finish()?;
    Ok(cfg)
}
