//! Mean-square strong convergence on coupled Brownian paths.

use crate::ensemble::{self, Execution};
use crate::error::{Error, Result};
use crate::integrators::{simulate, ErrorNorm, Integrable, Method, StepperConfig};
use crate::noise::{derive_seed, BrownianPath};

use super::stats::linear_fit;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceOptions {
    /// Coarsest and finest dyadic levels tested; step `h = T / 2^level`.
    pub levels: (u32, u32),
    /// Reference level above the finest tested one (at least 4).
    pub reference_offset: u32,
    pub paths: usize,
    pub seed: u64,
    pub norm: ErrorNorm,
    pub execution: Execution,
    /// Errors at or below this count as zero; if all do, the fit is skipped.
    pub exact_threshold: f64,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions {
            levels: (4, 8),
            reference_offset: 4,
            paths: 1000,
            seed: 0,
            norm: ErrorNorm::PhaseSpace,
            execution: Execution::default(),
            exact_threshold: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub method: Method,
    /// Strictly decreasing.
    pub step_sizes: Vec<f64>,
    /// `√E‖X_h(T) − X_ref(T)‖²` per step size.
    pub ms_errors: Vec<f64>,
    /// Least-squares slope of `log₂ ms_error` against `log₂ h`; `None` when exact.
    pub fitted_slope: Option<f64>,
    pub intercept: Option<f64>,
    pub paths: usize,
    pub reference_levels: u32,
    pub norm: ErrorNorm,
    /// Every error is at roundoff level: the scheme reproduces the reference.
    pub exact: bool,
}

impl ConvergenceReport {
    /// Error constant `ms_error / h` at the finest step.
    pub fn error_constant(&self) -> f64 {
        let k = self.step_sizes.len() - 1;
        self.ms_errors[k] / self.step_sizes[k]
    }
}

/// Squared endpoint errors of `method` at every tested level on one path.
fn path_errors<Sys: Integrable + ?Sized>(
    sys: &Sys,
    method: Method,
    state0: &Sys::State,
    horizon: (f64, f64),
    opts: &ConvergenceOptions,
    base: &StepperConfig,
    member: usize,
) -> Result<Vec<f64>> {
    let (coarse, fine) = opts.levels;
    let ref_levels = fine + opts.reference_offset;
    let seed = derive_seed(opts.seed, member as u64);
    let channels = sys.noise_channels().max(1);
    // sampling refines from level 0, so every coarser grid is a restriction
    let fine_path = BrownianPath::sample(seed, horizon, ref_levels, channels)?;
    let ref_cfg = base.with_step(fine_path.step_size())?;
    let reference = simulate(
        sys,
        Method::Reference,
        state0.clone(),
        &fine_path,
        &ref_cfg,
        fine_path.steps(),
    )?;
    let exact_end = reference.last();
    (coarse..=fine)
        .map(|level| {
            let path = fine_path.restrict(level)?;
            let cfg = base.with_step(path.step_size())?;
            let traj = simulate(sys, method, state0.clone(), &path, &cfg, path.steps())?;
            let e = sys.distance(traj.last(), exact_end, opts.norm);
            Ok(e * e)
        })
        .collect()
}

/// Estimate the mean-square strong order of `method` from `state0` on
/// `horizon`. Every ensemble member draws one Brownian path, refines it to the
/// reference level and restricts it to each tested grid, so all step sizes
/// and the reference see the same noise realization.
pub fn estimate_strong_order<Sys: Integrable + ?Sized>(
    sys: &Sys,
    method: Method,
    state0: &Sys::State,
    horizon: (f64, f64),
    opts: &ConvergenceOptions,
    base: &StepperConfig,
) -> Result<ConvergenceReport> {
    let (coarse, fine) = opts.levels;
    if coarse > fine {
        return Err(Error::invalid("levels", "coarsest level exceeds the finest"));
    }
    if opts.reference_offset < 4 {
        return Err(Error::invalid(
            "reference_offset",
            "the reference must be at least 4 levels finer than the finest tested grid",
        ));
    }
    if opts.paths == 0 {
        return Err(Error::invalid("paths", "at least one path is required"));
    }
    let per_path = ensemble::try_map(opts.execution, opts.paths, |m| {
        path_errors(sys, method, state0, horizon, opts, base, m)
    })?;

    let levels = (fine - coarse + 1) as usize;
    let mut sums = vec![0.0; levels];
    for errs in &per_path {
        for (s, e) in sums.iter_mut().zip(errs) {
            *s += e;
        }
    }
    let t = horizon.1 - horizon.0;
    let step_sizes: Vec<f64> = (coarse..=fine).map(|l| t / (1u64 << l) as f64).collect();
    let ms_errors: Vec<f64> = sums.iter().map(|s| (s / opts.paths as f64).sqrt()).collect();
    let exact = ms_errors.iter().all(|&e| e <= opts.exact_threshold);
    let fit = if exact {
        None
    } else {
        let lx: Vec<f64> = step_sizes.iter().map(|h| h.log2()).collect();
        let ly: Vec<f64> = ms_errors.iter().map(|e| e.max(f64::MIN_POSITIVE).log2()).collect();
        linear_fit(&lx, &ly)
    };
    Ok(ConvergenceReport {
        method,
        step_sizes,
        ms_errors,
        fitted_slope: fit.map(|f| f.slope),
        intercept: fit.map(|f| f.intercept),
        paths: opts.paths,
        reference_levels: fine + opts.reference_offset,
        norm: opts.norm,
        exact,
    })
}
