//! The four studies. Each one computes every output in memory and returns
//! it, so nothing reaches the disk unless the whole study succeeded.

use std::fmt::Write as _;

use toml::Value;

use svi_core::analysis::report::{
    convergence_summary, temperature_summary, write_convergence_csv, write_invariants_csv, write_temperature_csv,
    write_time_averaged_csv,
};
use svi_core::analysis::{
    check_momentum, check_momentum_rigid, check_symplectic, estimate_strong_order, temperature_study,
    ConvergenceOptions, InitialCondition, InvariantRow, TemperatureOptions,
};
use svi_core::ensemble::Execution;
use svi_core::geometry::{tau, Retraction, Rotation, Vec3};
use svi_core::integrators::{simulate_steps, Integrable, Method, Trajectory};
use svi_core::noise::BrownianPath;
use svi_core::systems::{
    build, pendulum_state, LieBodyState, LieBodySystem, LieState, MechSystem, Model, PhaseState, RigidBodySystem,
    Vector,
};

use crate::config::{model_error, Config, Study};
use crate::error::{CliError, CliResult};

/// Symplecticity defect allowed for the variational schemes.
const SYMPLECTIC_TOL: f64 = 1e-6;
/// Momentum drift allowed per unit of initial momentum (plus one).
const MOMENTUM_REL_TOL: f64 = 1e-12;
const LEGENDRE_REL_TOL: f64 = 1e-12;
const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Files and summary entries produced by one study.
#[derive(Debug, Default)]
pub struct Artifacts {
    /// `(file name, body)` pairs, bodies without the provenance header.
    pub files: Vec<(String, String)>,
    pub results: Vec<(String, Value)>,
}

impl Artifacts {
    fn result(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.results.push((key.into(), value.into()));
    }
}

/// A summary value written by the core as text, typed for TOML.
fn typed(s: &str) -> Value {
    if let Ok(i) = s.parse::<i64>() {
        Value::Integer(i)
    } else if let Ok(b) = s.parse::<bool>() {
        Value::Boolean(b)
    } else if let Ok(x) = s.parse::<f64>() {
        Value::Float(x)
    } else {
        Value::String(s.to_string())
    }
}

fn csv(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> String {
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("reports are UTF-8")
}

fn unsupported(method: Method, model: &str) -> CliError {
    CliError::config(
        "integrators",
        format!("`{method}` cannot integrate the `{model}` model"),
    )
}

/// Result key of `name` for `method`; unprefixed when only one method runs.
fn key(cfg: &Config, method: Method, name: &str) -> String {
    if cfg.integrators.len() == 1 {
        name.to_string()
    } else {
        format!("{}.{name}", method.name())
    }
}

fn file_name(cfg: &Config, stem: &str, method: Method) -> String {
    if cfg.integrators.len() == 1 {
        format!("{stem}.csv")
    } else {
        format!("{stem}_{}.csv", method.name().replace('-', "_"))
    }
}

/// What actually steps a given method on the configured model.
enum Target {
    Vector(MechSystem),
    Rigid(RigidBodySystem),
    Lie(LieBodySystem),
}

fn target(cfg: &Config, model: &Model, method: Method) -> CliResult<Target> {
    let t = match model {
        Model::Vector(sys) if sys.supports(method) => Target::Vector(sys.clone()),
        Model::Rigid(sys) if method == Method::SviLie && sys.body_count() == 1 => {
            Target::Lie(LieBodySystem::from_rigid(sys.clone())?)
        }
        Model::Rigid(sys) if sys.supports(method) => Target::Rigid(sys.clone()),
        _ => return Err(unsupported(method, &cfg.model)),
    };
    Ok(t)
}

fn vec3(xs: &[f64], body: usize) -> Vec3 {
    Vec3::new(xs[3 * body], xs[3 * body + 1], xs[3 * body + 2])
}

fn vector_state(cfg: &Config, sys: &MechSystem) -> PhaseState {
    if sys.constraint().is_some() {
        pendulum_state(
            sys,
            cfg.params["length"],
            cfg.initial("theta")[0],
            cfg.initial("theta_dot")[0],
        )
    } else {
        PhaseState::from_momentum(
            sys,
            Vector::from_column_slice(cfg.initial("q")),
            Vector::from_column_slice(cfg.initial("p")),
        )
    }
}

fn initial_rotation(cfg: &Config, body: usize) -> Rotation {
    tau(Retraction::Exponential, &vec3(cfg.initial("rotvec"), body))
}

fn rigid_states(cfg: &Config, sys: &RigidBodySystem) -> Vec<LieBodyState> {
    (0..sys.body_count())
        .map(|i| {
            sys.state_from_velocities(
                i,
                vec3(cfg.initial("x"), i),
                vec3(cfg.initial("v"), i),
                initial_rotation(cfg, i),
                vec3(cfg.initial("omega"), i),
            )
        })
        .collect()
}

/// Body-frame state from the spatial `initial.*` entries. The body-frame
/// model carries no translation, so the body must start at rest at the origin.
fn lie_state(cfg: &Config, sys: &LieBodySystem) -> CliResult<LieState> {
    for k in ["x", "v"] {
        if cfg.initial(k).iter().any(|&c| c != 0.0) {
            return Err(CliError::config(
                format!("initial.{k}"),
                "svi-lie integrates rotation only; the body must start at rest at the origin",
            ));
        }
    }
    let g = initial_rotation(cfg, 0);
    let xi = g.matrix().transpose() * vec3(cfg.initial("omega"), 0);
    Ok(sys.state(g, xi))
}

/// Spatial view of a body-frame state.
fn lie_to_spatial(s: &LieState) -> Vec<LieBodyState> {
    vec![LieBodyState {
        x: Vec3::zeros(),
        v: Vec3::zeros(),
        p: Vec3::zeros(),
        r: s.g,
        omega: s.g.rotate(&s.xi),
        pi: s.g.rotate(&s.mu),
    }]
}

fn join(out: &mut String, xs: impl IntoIterator<Item = String>) {
    for x in xs {
        let _ = write!(out, ",{x}");
    }
}

fn vector_csv(sys: &MechSystem, traj: &Trajectory<PhaseState>, t0: f64) -> String {
    let n = sys.dim();
    let m = sys.constraint().map_or(0, |c| c.count());
    let mut out = String::from("t");
    for name in ["q", "v", "p"] {
        join(&mut out, (0..n).map(|i| format!("{name}{i}")));
    }
    join(&mut out, (0..m).map(|i| format!("lambda{i}")));
    out.push('\n');
    for (k, (t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
        let _ = write!(out, "{:?}", t0 + t);
        for x in [&s.q, &s.v, &s.p] {
            join(&mut out, x.iter().map(|c| format!("{c:?}")));
        }
        if m > 0 {
            // the multiplier of the step that produced the state
            let lambda = k.checked_sub(1).and_then(|j| traj.multipliers.get(j));
            join(
                &mut out,
                (0..m).map(|i| lambda.map_or_else(|| "NaN".to_string(), |l| format!("{:?}", l[i]))),
            );
        }
        out.push('\n');
    }
    out
}

fn rigid_csv(times: &[f64], states: &[Vec<LieBodyState>], t0: f64) -> String {
    let bodies = states.first().map_or(0, Vec::len);
    let mut out = String::from("t");
    for name in ["x", "v", "p"] {
        join(
            &mut out,
            (0..bodies).flat_map(|b| (0..3).map(move |c| format!("{name}{b}_{c}"))),
        );
    }
    join(
        &mut out,
        (0..bodies).flat_map(|b| (0..9).map(move |e| format!("R{b}_{}{}", e / 3, e % 3))),
    );
    for name in ["omega", "pi"] {
        join(
            &mut out,
            (0..bodies).flat_map(|b| (0..3).map(move |c| format!("{name}{b}_{c}"))),
        );
    }
    out.push('\n');
    for (t, s) in times.iter().zip(states) {
        let _ = write!(out, "{:?}", t0 + t);
        let vecs = |f: fn(&LieBodyState) -> Vec3| s.iter().flat_map(move |b| f(b).iter().copied().collect::<Vec<_>>());
        for f in [|b: &LieBodyState| b.x, |b: &LieBodyState| b.v, |b: &LieBodyState| b.p] {
            join(&mut out, vecs(f).map(|c| format!("{c:?}")));
        }
        join(
            &mut out,
            s.iter()
                .flat_map(|b| (0..9).map(move |e| b.r.matrix()[(e / 3, e % 3)]))
                .map(|c| format!("{c:?}")),
        );
        for f in [|b: &LieBodyState| b.omega, |b: &LieBodyState| b.pi] {
            join(&mut out, vecs(f).map(|c| format!("{c:?}")));
        }
        out.push('\n');
    }
    out
}

fn run_path<S: Integrable>(
    cfg: &Config,
    sys: &S,
    method: Method,
    s0: S::State,
    record_every: usize,
) -> CliResult<Trajectory<S::State>> {
    let n = cfg.steps();
    let path = BrownianPath::covering(cfg.seed, cfg.h, n, sys.noise_channels().max(1))?;
    Ok(simulate_steps(
        sys,
        method,
        s0,
        &path,
        n,
        &cfg.stepper(cfg.h)?,
        record_every,
    )?)
}

/// Energy bookkeeping and noise audit of one trajectory.
fn trajectory_results<S: Integrable>(cfg: &Config, art: &mut Artifacts, sys: &S, traj: &Trajectory<S::State>) {
    let m = traj.method;
    let e: Vec<f64> = traj.states.iter().map(|s| sys.energy(s)).collect();
    let e0 = e[0];
    art.result(key(cfg, m, "steps"), traj.steps as i64);
    art.result(key(cfg, m, "energy_initial"), e0);
    art.result(key(cfg, m, "energy_final"), *e.last().expect("nonempty"));
    art.result(
        key(cfg, m, "energy_max_deviation"),
        e.iter().map(|x| (x - e0).abs()).fold(0.0, f64::max),
    );
    art.result(key(cfg, m, "noise_digest"), format!("{:016x}", traj.audit.digest()));
    art.result(key(cfg, m, "noise_consumed"), traj.audit.consumed() as i64);
}

pub fn run(cfg: &Config) -> CliResult<Artifacts> {
    let model = build(&cfg.model, &cfg.params).map_err(model_error)?;
    let targets = cfg
        .integrators
        .iter()
        .map(|&m| target(cfg, &model, m))
        .collect::<CliResult<Vec<_>>>()?;
    match cfg.study {
        Study::Simulate => simulate(cfg, &targets),
        Study::Convergence => convergence(cfg, &targets),
        Study::Temperature => temperature(cfg, &model),
        Study::Invariants => invariants(cfg, &targets),
    }
}

fn simulate(cfg: &Config, targets: &[Target]) -> CliResult<Artifacts> {
    let mut art = Artifacts::default();
    let t0 = cfg.horizon.0;
    for (&m, t) in cfg.integrators.iter().zip(targets) {
        let body = match t {
            Target::Vector(sys) => {
                let traj = run_path(cfg, sys, m, vector_state(cfg, sys), cfg.record_every)?;
                trajectory_results(cfg, &mut art, sys, &traj);
                if let Some(c) = sys.constraint() {
                    let viol = traj.states.iter().map(|s| c.value(&s.q).amax()).fold(0.0, f64::max);
                    art.result(key(cfg, m, "max_constraint_violation"), viol);
                }
                vector_csv(sys, &traj, t0)
            }
            Target::Rigid(sys) => {
                let traj = run_path(cfg, sys, m, rigid_states(cfg, sys), cfg.record_every)?;
                trajectory_results(cfg, &mut art, sys, &traj);
                rigid_csv(&traj.times, &traj.states, t0)
            }
            Target::Lie(sys) => {
                let traj = run_path(cfg, sys, m, lie_state(cfg, sys)?, cfg.record_every)?;
                trajectory_results(cfg, &mut art, sys, &traj);
                let spatial: Vec<_> = traj.states.iter().map(lie_to_spatial).collect();
                rigid_csv(&traj.times, &spatial, t0)
            }
        };
        art.files.push((file_name(cfg, "trajectory", m), body));
    }
    Ok(art)
}

fn convergence(cfg: &Config, targets: &[Target]) -> CliResult<Artifacts> {
    let mut art = Artifacts::default();
    let opts = ConvergenceOptions {
        levels: cfg.levels,
        reference_offset: cfg.reference_offset,
        paths: cfg.paths,
        seed: cfg.seed,
        norm: cfg.norm,
        execution: Execution::Parallel,
        ..Default::default()
    };
    let base = cfg.stepper(cfg.h)?;
    for (&m, t) in cfg.integrators.iter().zip(targets) {
        let report = match t {
            Target::Vector(sys) => estimate_strong_order(sys, m, &vector_state(cfg, sys), cfg.horizon, &opts, &base)?,
            Target::Rigid(sys) => estimate_strong_order(sys, m, &rigid_states(cfg, sys), cfg.horizon, &opts, &base)?,
            Target::Lie(sys) => estimate_strong_order(sys, m, &lie_state(cfg, sys)?, cfg.horizon, &opts, &base)?,
        };
        art.files.push((
            file_name(cfg, "convergence", m),
            csv(|w| write_convergence_csv(w, &report)),
        ));
        for (k, v) in convergence_summary(&report) {
            if k != "method" {
                art.result(key(cfg, m, &k), typed(&v));
            }
        }
    }
    Ok(art)
}

fn temperature(cfg: &Config, model: &Model) -> CliResult<Artifacts> {
    let sys = match model {
        Model::Vector(sys) if sys.bath().is_some() => sys,
        _ => {
            return Err(CliError::config(
                "model.name",
                format!("`{}` has no heat bath; temperature studies need one", cfg.model),
            ));
        }
    };
    let opts = TemperatureOptions {
        horizon: cfg.horizon.1,
        h: cfg.h,
        paths: cfg.paths,
        seed: cfg.seed,
        record_every: cfg.record_every,
        execution: Execution::Parallel,
        initial: if cfg.thermal {
            InitialCondition::Thermal
        } else {
            InitialCondition::Fixed(vector_state(cfg, sys))
        },
    };
    let series = temperature_study(sys, &cfg.integrators, &opts)?;
    let mut art = Artifacts::default();
    art.files
        .push(("temperature.csv".into(), csv(|w| write_temperature_csv(w, &series))));
    art.files.push((
        "temperature_time_averaged.csv".into(),
        csv(|w| write_time_averaged_csv(w, &series)),
    ));
    for s in &series {
        for (k, v) in temperature_summary(s) {
            let v = if k.ends_with("noise_digest") {
                Value::String(v)
            } else {
                typed(&v)
            };
            art.result(k, v);
        }
    }
    let shared = series.windows(2).all(|w| w[0].noise_digest == w[1].noise_digest);
    art.result("shared_noise", shared);
    Ok(art)
}

fn is_variational(m: Method) -> bool {
    matches!(
        m,
        Method::Svi | Method::VariationalEuler | Method::SviConstrained | Method::SviRigid | Method::SviLie
    )
}

/// Gated for the variational schemes, reported for the baselines.
fn row(gated: bool, check: String, statistic: &str, value: f64, tol: f64) -> InvariantRow {
    if gated {
        InvariantRow::at_most(check, statistic, value, tol)
    } else {
        InvariantRow::info(check, statistic, value)
    }
}

fn invariants(cfg: &Config, targets: &[Target]) -> CliResult<Artifacts> {
    let mut rows = Vec::new();
    let mut art = Artifacts::default();
    let sym = cfg.symmetry.as_str();
    let not_declared = |e: svi_core::Error| match e {
        svi_core::Error::SymmetryNotDeclared(s) => {
            CliError::config("invariants.symmetry", format!("the model does not declare `{s}`"))
        }
        other => other.into(),
    };
    for (&m, t) in cfg.integrators.iter().zip(targets) {
        let gated = is_variational(m);
        let name = m.name();
        match t {
            Target::Vector(sys) => {
                if sys.constraint().is_none() {
                    // drag and other forcing make the exact flow itself non-symplectic
                    let conservative = sys.force().is_none();
                    let rep = check_symplectic(sys, m, &cfg.stepper(cfg.h)?, cfg.samples, cfg.fd_step, cfg.seed)?;
                    rows.push(row(
                        gated && conservative,
                        format!("symplecticity:{name}"),
                        "max_defect",
                        rep.max_defect,
                        SYMPLECTIC_TOL,
                    ));
                    rows.push(InvariantRow::info(
                        format!("symplecticity:{name}"),
                        "min_defect",
                        rep.min_defect,
                    ));
                }
                let traj = run_path(cfg, sys, m, vector_state(cfg, sys), 1)?;
                if sym != "none" {
                    let rep = check_momentum(sys, sym, &traj.states).map_err(not_declared)?;
                    let tol = MOMENTUM_REL_TOL * (1.0 + rep.initial);
                    rows.push(row(
                        gated,
                        format!("momentum:{name}:{sym}"),
                        "max_drift",
                        rep.max_drift,
                        tol,
                    ));
                }
                let legendre = traj
                    .states
                    .iter()
                    .map(|s| s.legendre_defect(sys) / (1.0 + s.p.norm()))
                    .fold(0.0, f64::max);
                rows.push(InvariantRow::at_most(
                    format!("legendre:{name}"),
                    "max_rel_defect",
                    legendre,
                    LEGENDRE_REL_TOL,
                ));
                if let Some(c) = sys.constraint() {
                    let viol = traj.states.iter().map(|s| c.value(&s.q).amax()).fold(0.0, f64::max);
                    rows.push(InvariantRow::at_most(
                        format!("constraint:{name}"),
                        "max_violation",
                        viol,
                        cfg.constraint_tol,
                    ));
                }
                energy_row(&mut rows, sys, &traj);
            }
            Target::Rigid(sys) => {
                let traj = run_path(cfg, sys, m, rigid_states(cfg, sys), 1)?;
                orthogonality_row(&mut rows, name, traj.states.iter().flatten().map(|b| b.r));
                if sym != "none" {
                    let rep = check_momentum_rigid(sys, sym, &traj.states).map_err(not_declared)?;
                    let tol = MOMENTUM_REL_TOL * (1.0 + rep.initial);
                    rows.push(row(
                        gated,
                        format!("momentum:{name}:{sym}"),
                        "max_drift",
                        rep.max_drift,
                        tol,
                    ));
                }
                let (lin, ang) = traj
                    .states
                    .iter()
                    .map(|s| sys.legendre_defect(s))
                    .fold((0.0f64, 0.0f64), |(a, b), (l, r)| (a.max(l), b.max(r)));
                rows.push(InvariantRow::at_most(
                    format!("legendre:{name}"),
                    "max_linear_defect",
                    lin,
                    LEGENDRE_REL_TOL,
                ));
                rows.push(InvariantRow::at_most(
                    format!("legendre:{name}"),
                    "max_angular_defect",
                    ang,
                    1e-10,
                ));
                energy_row(&mut rows, sys, &traj);
            }
            Target::Lie(sys) => {
                let traj = run_path(cfg, sys, m, lie_state(cfg, sys)?, 1)?;
                orthogonality_row(&mut rows, name, traj.states.iter().map(|s| s.g));
                let j0 = sys.spatial_momentum(&traj.states[0]);
                let drift = traj
                    .states
                    .iter()
                    .map(|s| (sys.spatial_momentum(s) - j0).norm())
                    .fold(0.0, f64::max);
                rows.push(InvariantRow::info(
                    format!("angular_momentum:{name}"),
                    "max_drift",
                    drift,
                ));
                energy_row(&mut rows, sys, &traj);
            }
        }
    }
    let all_pass = rows.iter().all(|r| r.pass);
    art.files
        .push(("invariants.csv".into(), csv(|w| write_invariants_csv(w, &rows))));
    art.result("checks", rows.len() as i64);
    art.result("failed", rows.iter().filter(|r| !r.pass).count() as i64);
    art.result("all_pass", all_pass);
    Ok(art)
}

fn orthogonality_row(rows: &mut Vec<InvariantRow>, name: &str, rotations: impl Iterator<Item = Rotation>) {
    let worst = rotations.map(|r| r.orthogonality_defect()).fold(0.0, f64::max);
    rows.push(InvariantRow::at_most(
        format!("orthogonality:{name}"),
        "max_defect",
        worst,
        ORTHOGONALITY_TOL,
    ));
}

fn energy_row<S: Integrable>(rows: &mut Vec<InvariantRow>, sys: &S, traj: &Trajectory<S::State>) {
    let e0 = sys.energy(&traj.states[0]);
    let dev = traj
        .states
        .iter()
        .map(|s| (sys.energy(s) - e0).abs())
        .fold(0.0, f64::max);
    rows.push(InvariantRow::info(
        format!("energy:{}", traj.method),
        "max_deviation",
        dev,
    ));
}
