#![allow(clippy::needless_range_loop)]

mod common;

use common::{default_problem, drift_image_solution};
use freefront_core::fd_oracle::{
    fd_flux, interpolate, solve_fd, solve_fd_rho, solve_fd_u, FdConfig, FdProblem, LeftBoundary, Scheme,
};
use freefront_core::frame_solver::{FrameSolver, SolverOptions};
use freefront_core::front::{fixed_point_velocity, initial_velocity, q_map, FixedPointOptions};
use freefront_core::model::{make_kernel, KernelShape};
use freefront_core::quadrature::simpson;
use freefront_core::{Error, GridSpec, VelocityPath};

fn sup_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max)
}

#[test]
fn pure_diffusion_matches_image_solution() {
    let (_, d) = default_problem();
    let k = make_kernel(KernelShape { rate: 0.0, ..KernelShape::default() }).unwrap();
    for scheme in [Scheme::CrankNicolson, Scheme::Explicit] {
        let grid = match scheme {
            Scheme::CrankNicolson => GridSpec::default(),
            Scheme::Explicit => GridSpec { h: 0.02, dt: 2e-4, ..GridSpec::default() },
        };
        let steps = (grid.t_end / grid.dt).round() as usize;
        let v = VelocityPath::constant(0.0, grid.dt, steps);
        let sol = solve_fd_rho(&v, &d, &k, &FdConfig { grid, scheme }).unwrap();
        let mut worst = 0.0f64;
        for n in (0..=steps).step_by(steps / 10) {
            for (i, &x) in sol.x.iter().enumerate() {
                worst = worst.max((sol.rows[n][i] - drift_image_solution(&d, 0.0, x, sol.t[n])).abs());
            }
        }
        assert!(worst <= 5e-5, "{scheme:?}: {worst}");
    }
}

#[test]
fn reflecting_wall_conserves_mass() {
    let (_, d) = default_problem();
    let problem = FdProblem {
        velocity: Box::new(|_| 0.0),
        reaction: 0.0,
        nonlocal: None,
        left: LeftBoundary::Reflecting,
        initial: Box::new(|x| d.value(x)),
        support: d.support(),
    };
    let sol = solve_fd(&problem, &FdConfig::default()).unwrap();
    let m0 = sol.trapezoid_mass(0);
    for n in 0..sol.rows.len() {
        assert!((sol.trapezoid_mass(n) - m0).abs() <= 1e-10, "n = {n}");
    }
}

#[test]
fn explicit_scheme_refuses_large_steps() {
    let (k, d) = default_problem();
    let v = VelocityPath::constant(0.9, 1e-3, 100);
    let cfg = FdConfig { grid: GridSpec::default(), scheme: Scheme::Explicit };
    assert!(matches!(solve_fd_rho(&v, &d, &k, &cfg), Err(Error::Config(_))));
    let bad = FdConfig { grid: GridSpec { dt: 3e-3, ..GridSpec::default() }, scheme: Scheme::CrankNicolson };
    assert!(matches!(solve_fd_rho(&v, &d, &k, &bad), Err(Error::Config(_))));
}

#[test]
fn interpolation_hits_samples() {
    let s = [1.0, 3.0, 2.0];
    assert_eq!(interpolate(&s, 0.5, 0.0), 1.0);
    assert_eq!(interpolate(&s, 0.5, 0.5), 3.0);
    assert_eq!(interpolate(&s, 0.5, 0.75), 2.5);
    assert_eq!(interpolate(&s, 0.5, 9.0), 2.0);
}

#[test]
fn derivative_field_starts_at_rho0_prime_and_keeps_its_trace() {
    let (k, d) = default_problem();
    let v = VelocityPath::constant(0.9, 1e-3, 100);
    let cfg = FdConfig::default();
    let rho = solve_fd_rho(&v, &d, &k, &cfg).unwrap();
    let g = fd_flux(&rho, &k);
    let u = solve_fd_u(&v, &g, &d, &k, &cfg).unwrap();
    for (i, &x) in u.x.iter().enumerate().skip(1).take(u.x.len() - 2) {
        assert_eq!(u.rows[0][i], d.phi(x));
    }
    for n in 0..u.rows.len() {
        assert!((u.rows[n][0] - g[n]).abs() < 1e-15);
    }
}

#[test]
fn oracle_agrees_with_the_integral_solver_at_the_fixed_point() {
    let (k, d) = default_problem();
    let spec = GridSpec::default();
    let sol = fixed_point_velocity(&d, &k, &spec, &FixedPointOptions::default()).unwrap();
    let cfg = FdConfig { grid: spec, scheme: Scheme::CrankNicolson };
    let rho = solve_fd_rho(&sol.velocity, &d, &k, &cfg).unwrap();
    let u = solve_fd_u(&sol.velocity, &fd_flux(&rho, &k), &d, &k, &cfg).unwrap();
    let envelope = 5.0 * (spec.h * spec.h + spec.dt);
    let (er, eu) = (sup_diff(&rho.rows, &sol.fields.rho), sup_diff(&u.rows, &sol.fields.u));
    assert!(er <= envelope && eu <= envelope, "rho {er}, u {eu}, envelope {envelope}");
    // the density alone meets the tighter 3 (h^2 + dt)
    assert!(er <= 3.0 * (spec.h * spec.h + spec.dt), "rho {er}");
    // at the fixed point g = rho_x(0), so int u = rho(L) - rho(0) = 0
    for n in 0..u.rows.len() {
        assert!(u.trapezoid_mass(n).abs() < 1e-3, "n = {n}: {}", u.trapezoid_mass(n));
    }
}

#[test]
fn solver_gap_shrinks_under_refinement() {
    let (k, d) = default_problem();
    let v0 = initial_velocity(&d, &k).unwrap();
    let mut gaps = Vec::new();
    for (h, dt) in [(0.02, 4e-3), (0.01, 1e-3), (0.005, 2.5e-4)] {
        let spec = GridSpec { h, dt, t_end: 0.1, length: None };
        let steps = (0.1 / dt).round() as usize;
        let v = VelocityPath::constant(v0, dt, steps);
        let solver = FrameSolver::new(&d, &k, &spec, SolverOptions::default()).unwrap();
        let ie = solver.rho(v.values()).unwrap();
        let fd = solve_fd_rho(&v, &d, &k, &FdConfig { grid: spec, scheme: Scheme::CrankNicolson }).unwrap();
        gaps.push(sup_diff(&ie, &fd.rows));
    }
    for w in gaps.windows(2) {
        assert!(w[1] < 0.5 * w[0], "{gaps:?}");
    }
}

#[test]
fn velocity_map_agrees_with_an_oracle_built_quotient() {
    // Q = (-u_x(0)/2 + rate int u P+) / u(0) from the oracle fields
    let (k, d) = default_problem();
    let spec = GridSpec::default();
    let v0 = initial_velocity(&d, &k).unwrap();
    let v = VelocityPath::constant(v0, spec.dt, 100);
    let q = q_map(&v, &d, &k, &spec).unwrap();
    let cfg = FdConfig { grid: spec, scheme: Scheme::CrankNicolson };
    let rho = solve_fd_rho(&v, &d, &k, &cfg).unwrap();
    let u = solve_fd_u(&v, &fd_flux(&rho, &k), &d, &k, &cfg).unwrap();
    let h = u.h;
    let pp: Vec<f64> = u.x.iter().map(|&y| k.p_plus(y)).collect();
    let envelope = 5.0 * (spec.h * spec.h + spec.dt);
    for (n, r) in u.rows.iter().enumerate().skip(1) {
        let ux0 = (-3.0 * r[0] + 4.0 * r[1] - r[2]) / (2.0 * h);
        let w: Vec<f64> = r.iter().zip(&pp).map(|(a, b)| a * b).collect();
        let q_fd = (-0.5 * ux0 + k.rate() * simpson(&w, h)) / r[0];
        assert!((q.values()[n] - q_fd).abs() <= envelope, "n = {n}: {} vs {q_fd}", q.values()[n]);
    }
}
