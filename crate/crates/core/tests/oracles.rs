//! Independent oracles for the steppers and the analysis layer: classical
//! Runge–Kutta references, closed-form moments and reproducibility contracts.

use svi_core::analysis::{
    check_momentum, check_momentum_rigid, check_symplectic, estimate_strong_order, linear_fit, temperature_study,
    ConvergenceOptions, TemperatureOptions,
};
use svi_core::ensemble::{self, Execution};
use svi_core::geometry::{hat, Mat3, Retraction, Rotation, Vec3};
use svi_core::integrators::{reference_solve, simulate, simulate_steps, Method, StepperConfig};
use svi_core::noise::{derive_seed, BrownianPath};
use svi_core::systems::{
    make_ballistic_analog, make_constrained_pendulum, make_oscillator, make_rigid_pair, make_two_body, pendulum_state,
    BallisticParams, LieBodySystem, PhaseState, RigidPairParams, TwoBodyParams, Vector,
};

/// Classical RK4 on the body-frame free rigid body `ġ = g ξ̂`, `μ̇ = μ × ξ`,
/// `ξ = 𝕀⁻¹μ`.
fn rk4_free_body(inertia: Vec3, g0: Mat3, mu0: Vec3, t: f64, steps: usize) -> (Mat3, Vec3) {
    let f = |g: &Mat3, mu: &Vec3| {
        let xi = mu.component_div(&inertia);
        (g * hat(&xi), mu.cross(&xi))
    };
    let h = t / steps as f64;
    let (mut g, mut mu) = (g0, mu0);
    for _ in 0..steps {
        let (a1, b1) = f(&g, &mu);
        let (a2, b2) = f(&(g + a1 * (h / 2.0)), &(mu + b1 * (h / 2.0)));
        let (a3, b3) = f(&(g + a2 * (h / 2.0)), &(mu + b2 * (h / 2.0)));
        let (a4, b4) = f(&(g + a3 * h), &(mu + b3 * h));
        g += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
        mu += (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (h / 6.0);
    }
    (g, mu)
}

#[test]
fn lie_scheme_converges_to_the_free_rigid_body() {
    let inertia = Vec3::new(1.0, 2.0, 3.0);
    let sys = LieBodySystem::free(inertia).unwrap();
    let g0 = Rotation::from_axis_angle(&Vec3::new(0.3, 1.0, -0.2), 0.7);
    let xi0 = Vec3::new(0.4, 1.1, -0.6);
    let mu0 = inertia.component_mul(&xi0);
    let (g_ref, mu_ref) = rk4_free_body(inertia, *g0.matrix(), mu0, 1.0, 1 << 14);

    for kind in [Retraction::Cayley, Retraction::Exponential] {
        let mut hs = Vec::new();
        let mut errs = Vec::new();
        for level in 4..=8 {
            let path = BrownianPath::sample(0, (0.0, 1.0), level, 1).unwrap();
            let cfg = StepperConfig::new(path.step_size()).unwrap().with_retraction(kind);
            let traj = simulate(&sys, Method::SviLie, sys.state(g0, xi0), &path, &cfg, path.steps()).unwrap();
            let end = traj.last();
            let e = ((end.g.matrix() - g_ref).norm_squared() + (end.mu - mu_ref).norm_squared()).sqrt();
            hs.push(path.step_size().log2());
            errs.push(e.log2());
        }
        let slope = linear_fit(&hs, &errs).unwrap().slope;
        assert!(slope >= 0.9, "{kind:?}: observed order {slope}");
    }
}

/// RK4 on `θ̈ = −(g/l) sin θ`.
fn rk4_pendulum(theta0: f64, omega0: f64, ratio: f64, t: f64, h: f64) -> f64 {
    let f = |th: f64, om: f64| (om, -ratio * th.sin());
    let steps = (t / h).round() as usize;
    let (mut th, mut om) = (theta0, omega0);
    for _ in 0..steps {
        let (a1, b1) = f(th, om);
        let (a2, b2) = f(th + 0.5 * h * a1, om + 0.5 * h * b1);
        let (a3, b3) = f(th + 0.5 * h * a2, om + 0.5 * h * b2);
        let (a4, b4) = f(th + h * a3, om + h * b3);
        th += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        om += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    }
    th
}

#[test]
fn constrained_swing_matches_the_angle_equation() {
    let (l, g) = (1.0, 9.81);
    let sys = make_constrained_pendulum(l, 1.0, g, 0.0).unwrap();
    let t = 2.0;
    let exact = rk4_pendulum(0.5, 0.0, g / l, t, 1e-6);
    let mut logs = (Vec::new(), Vec::new());
    for steps in [500usize, 1000, 2000, 4000] {
        let h = t / steps as f64;
        let path = BrownianPath::covering(0, h, steps, 1).unwrap();
        let cfg = StepperConfig::new(h).unwrap();
        let traj = simulate_steps(
            &sys,
            Method::SviConstrained,
            pendulum_state(&sys, l, 0.5, 0.0),
            &path,
            steps,
            &cfg,
            steps,
        )
        .unwrap();
        let q = &traj.last().q;
        let err = (q[0].atan2(-q[1]) - exact).abs();
        assert!(err <= 20.0 * h, "h = {h}: angle error {err}");
        logs.0.push(h.log2());
        logs.1.push(err.log2());
    }
    let slope = linear_fit(&logs.0, &logs.1).unwrap().slope;
    assert!((0.8..=1.3).contains(&slope), "observed order {slope}");
}

#[test]
fn reference_energy_growth_follows_the_ito_isometry() {
    // q̇ = p, dp = −q dt + σ dW from (1, 0): E[p² + q²](t) = 1 + σ² t exactly
    let sigma = 0.5;
    let sys = make_oscillator(1.0, 1.0, sigma).unwrap();
    let s0 = PhaseState::from_momentum(&sys, Vector::from_element(1, 1.0), Vector::zeros(1));
    let (horizon, levels, members) = (4.0, 10, 10_000);
    let stride = 1 << 6;
    let cfg = StepperConfig::new(horizon / (1u64 << levels) as f64).unwrap();
    let sums = ensemble::map(Execution::Parallel, members, |m| {
        let path = BrownianPath::sample(derive_seed(99, m as u64), (0.0, horizon), levels, 1).unwrap();
        let traj = simulate(&sys, Method::Reference, s0.clone(), &path, &cfg, stride).unwrap();
        traj.states
            .iter()
            .map(|s| s.q[0] * s.q[0] + s.p[0] * s.p[0])
            .collect::<Vec<_>>()
    });
    let times: Vec<f64> = (0..=(1 << levels) / stride)
        .map(|k| (k * stride) as f64 * cfg.h)
        .collect();
    let mean: Vec<f64> = (0..times.len())
        .map(|i| sums.iter().map(|s| s[i]).sum::<f64>() / members as f64)
        .collect();
    let slope = linear_fit(&times, &mean).unwrap().slope;
    assert!((slope - sigma * sigma).abs() <= 0.1 * sigma * sigma, "slope {slope}");
}

#[test]
fn halving_the_reference_step_is_within_budget() {
    let sys = make_oscillator(1.0, 1.0, 0.5).unwrap();
    let s0 = PhaseState::from_momentum(&sys, Vector::from_element(1, 1.0), Vector::zeros(1));
    let base = StepperConfig::new(1.0).unwrap();
    let members = 200;
    let (coarse, reference) = (4, 12);
    let mut method_sq = 0.0;
    let mut halving_sq = 0.0;
    for m in 0..members {
        let path = BrownianPath::sample(derive_seed(3, m), (0.0, 1.0), coarse, 1).unwrap();
        let r1 = reference_solve(&sys, s0.clone(), &path, reference, &base).unwrap();
        let r2 = reference_solve(&sys, s0.clone(), &path, reference + 1, &base).unwrap();
        let cfg = base.with_step(path.step_size()).unwrap();
        let svi = simulate(&sys, Method::Svi, s0.clone(), &path, &cfg, path.steps()).unwrap();
        let (a, b, c) = (r1.last(), r2.last(), svi.last());
        halving_sq += (&a.q - &b.q).norm_squared() + (&a.p - &b.p).norm_squared();
        method_sq += (&c.q - &b.q).norm_squared() + (&c.p - &b.p).norm_squared();
    }
    let (halving, method) = (
        (halving_sq / members as f64).sqrt(),
        (method_sq / members as f64).sqrt(),
    );
    assert!(
        halving < method / 8.0,
        "reference change {halving} vs coarsest error {method}"
    );
}

#[test]
fn symplectic_defect_does_not_depend_on_noise_size() {
    let cfg = StepperConfig::new(0.1).unwrap();
    let defects: Vec<f64> = [0.0, 0.5, 2.0]
        .iter()
        .map(|&sigma| {
            let sys = make_oscillator(1.0, 1.0, sigma).unwrap();
            check_symplectic(&sys, Method::Svi, &cfg, 100, 1e-5, 4)
                .unwrap()
                .max_defect
        })
        .collect();
    let (lo, hi) = defects
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &d| (a.min(d), b.max(d)));
    assert!(hi <= 1e-6);
    assert!(hi <= 10.0 * lo, "{defects:?}");
}

#[test]
fn momentum_is_conserved_at_every_step_size() {
    // harmonic coupling keeps h = 0.5 inside the linear stability region
    let sys = make_two_body(&TwoBodyParams {
        dims: 2,
        quartic: 0.0,
        ..Default::default()
    })
    .unwrap();
    let s0 = PhaseState::from_momentum(
        &sys,
        Vector::from_vec(vec![0.2, 0.0, -0.3, 0.1]),
        Vector::from_vec(vec![0.5, -0.1, 0.0, 0.3]),
    );
    for h in [0.01, 0.1, 0.5] {
        let path = BrownianPath::covering(12, h, 1000, sys.noise_channels()).unwrap();
        let traj = simulate_steps(
            &sys,
            Method::Svi,
            s0.clone(),
            &path,
            1000,
            &StepperConfig::new(h).unwrap(),
            1,
        )
        .unwrap();
        for axis in ["translation_x", "translation_y"] {
            let rep = check_momentum(&sys, axis, &traj.states).unwrap();
            assert!(
                rep.max_drift <= 1e-12 * (1.0 + rep.initial),
                "h = {h}, {axis}: {}",
                rep.max_drift
            );
        }
    }
}

#[test]
fn breaking_the_symmetry_is_reported() {
    let sys = make_two_body(&TwoBodyParams {
        anchor_sigma: 0.4,
        ..Default::default()
    })
    .unwrap();
    let s0 = PhaseState::from_momentum(&sys, Vector::from_vec(vec![0.5, -0.5]), Vector::zeros(2));
    let path = BrownianPath::covering(1, 0.05, 400, sys.noise_channels()).unwrap();
    let traj = simulate_steps(&sys, Method::Svi, s0, &path, 400, &StepperConfig::new(0.05).unwrap(), 1).unwrap();
    let rep = check_momentum(&sys, "translation_x", &traj.states).unwrap();
    assert!(rep.max_drift > 1e-3);

    let rigid = make_rigid_pair(&RigidPairParams {
        load: 1.0,
        ..Default::default()
    })
    .unwrap();
    assert!(check_momentum_rigid(&rigid, "translation", &[]).is_err());
}

fn small_convergence(execution: Execution) -> svi_core::analysis::ConvergenceReport {
    let sys = make_oscillator(1.0, 1.0, 0.5).unwrap();
    let s0 = PhaseState::from_momentum(&sys, Vector::from_element(1, 1.0), Vector::zeros(1));
    let opts = ConvergenceOptions {
        levels: (2, 5),
        paths: 64,
        seed: 17,
        execution,
        ..Default::default()
    };
    estimate_strong_order(
        &sys,
        Method::Svi,
        &s0,
        (0.0, 1.0),
        &opts,
        &StepperConfig::new(1.0).unwrap(),
    )
    .unwrap()
}

#[test]
fn convergence_reports_are_bit_reproducible() {
    let a = small_convergence(Execution::Parallel);
    let b = small_convergence(Execution::Parallel);
    let c = small_convergence(Execution::Sequential);
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(a.fitted_slope.unwrap().to_bits(), c.fitted_slope.unwrap().to_bits());
}

#[test]
fn baselines_consume_the_same_noise() {
    let sys = make_ballistic_analog(&BallisticParams::default()).unwrap();
    let s0 = PhaseState::from_momentum(
        &sys,
        Vector::from_vec(vec![0.3, -0.2]),
        Vector::from_vec(vec![0.0, 0.4]),
    );
    let path = BrownianPath::covering(5, 0.1, 200, sys.noise_channels()).unwrap();
    let cfg = StepperConfig::new(0.1).unwrap();
    let audits: Vec<_> = [Method::Svi, Method::Eem, Method::Iem]
        .iter()
        .map(|&m| simulate_steps(&sys, m, s0.clone(), &path, 200, &cfg, 1).unwrap().audit)
        .collect();
    assert!(audits.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(audits[0].consumed(), 200);

    let opts = TemperatureOptions {
        horizon: 5.0,
        paths: 16,
        seed: 2,
        ..Default::default()
    };
    let seq = temperature_study(
        &sys,
        &[Method::Svi, Method::Eem],
        &TemperatureOptions {
            execution: Execution::Sequential,
            ..opts.clone()
        },
    )
    .unwrap();
    let par = temperature_study(&sys, &[Method::Svi, Method::Eem], &opts).unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq[0].noise_digest, seq[1].noise_digest);
}
