#![allow(clippy::needless_range_loop)]

mod common;

use common::{default_problem, drift_image_solution};
use std::sync::OnceLock;

use freefront_core::frame_solver::{compute_g_prime, solve_rho, FieldGrid, FrameSolver, SolverOptions};
use freefront_core::front::{fixed_point_velocity, holder_seminorm, pde_residual, FixedPointOptions};
use freefront_core::model::{make_kernel, KernelShape, Poly};
use freefront_core::quadrature::simpson;
use freefront_core::{BranchingKernel, Error, FrontSolution, GridSpec, InitialDatum, VelocityPath};
use proptest::prelude::*;

/// Fixed points on the default grid and on the grid refined once.
fn fixed_points() -> &'static (FrontSolution, FrontSolution) {
    static CELL: OnceLock<(FrontSolution, FrontSolution)> = OnceLock::new();
    CELL.get_or_init(|| {
        let (k, d) = default_problem();
        let opts = FixedPointOptions::default();
        let coarse = fixed_point_velocity(&d, &k, &GridSpec::default(), &opts).unwrap();
        let fine_spec = GridSpec { h: 0.005, dt: 5e-4, ..GridSpec::default() };
        (coarse, fixed_point_velocity(&d, &k, &fine_spec, &opts).unwrap())
    })
}

fn envelope(f: &FieldGrid) -> f64 {
    5.0 * (f.grid.h * f.grid.h + f.grid.dt)
}

fn sup(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

fn no_branching() -> BranchingKernel {
    make_kernel(KernelShape { rate: 0.0, ..KernelShape::default() }).unwrap()
}

/// Sup error of `solve_rho` against the image oracle at constant `v`,
/// sampled on about ten time levels.
fn oracle_error(datum: &InitialDatum, v: f64, spec: GridSpec) -> f64 {
    let k = no_branching();
    let steps = (spec.t_end / spec.dt).round() as usize;
    let path = VelocityPath::constant(v, spec.dt, steps);
    let f = solve_rho(&path, datum, &k, &spec).unwrap();
    let stride = (steps / 10).max(1);
    let mut worst = 0.0f64;
    for n in (stride..=steps).step_by(stride) {
        for (i, &x) in f.x.iter().enumerate() {
            let exact = drift_image_solution(datum, v, x, f.t[n]);
            worst = worst.max((f.rho[n][i] - exact).abs());
        }
    }
    worst
}

#[test]
fn zero_velocity_matches_image_solution() {
    let (_, d) = default_problem();
    let err = oracle_error(&d, 0.0, GridSpec { h: 1e-2, dt: 1e-3, t_end: 0.1, length: None });
    assert!(err <= 5e-5, "sup error {err}");
}

#[test]
fn drift_problem_converges_at_second_order_in_h_and_first_in_dt() {
    // parabolic path: halving h quarters dt
    let (_, d) = default_problem();
    let path = [(0.02, 4e-3), (0.01, 1e-3), (0.005, 2.5e-4)];
    let errs: Vec<f64> =
        path.iter().map(|&(h, dt)| oracle_error(&d, 0.9, GridSpec { h, dt, t_end: 0.1, length: None })).collect();
    for w in errs.windows(2) {
        let order_h = (w[0] / w[1]).log2();
        let order_dt = (w[0] / w[1]).log(4.0);
        assert!(order_h >= 2.0 - 0.05, "h order {order_h}, errors {errs:?}");
        assert!(order_dt >= 1.0 - 0.03, "dt order {order_dt}, errors {errs:?}");
    }
}

#[test]
fn grid_resolution_rejects_bad_specs() {
    let (k, d) = default_problem();
    let opts = SolverOptions::default();
    let bad = [
        GridSpec { h: 0.1, dt: 1e-3, t_end: 0.1, length: None },
        GridSpec { h: 0.01, dt: 3e-3, t_end: 0.1, length: None },
        GridSpec { h: 0.01, dt: 1e-3, t_end: 0.1, length: Some(1.0) },
        GridSpec { h: -0.01, dt: 1e-3, t_end: 0.1, length: None },
    ];
    for spec in bad {
        assert!(matches!(FrameSolver::new(&d, &k, &spec, opts), Err(Error::Grid(_))), "{spec:?}");
    }
    let spec = GridSpec { h: 0.02, dt: 1e-3, t_end: 0.05, length: None };
    let solver = FrameSolver::new(&d, &k, &spec, opts).unwrap();
    let g = solver.grid();
    assert_eq!(g.steps, 50);
    assert_eq!((g.nodes - 1) % 2, 0);
    assert!(g.length >= spec.min_length(d.support(), k.b()));
    assert!(matches!(solver.rho(&[0.9; 7]), Err(Error::Grid(_))));
    assert!(matches!(solver.rho(&[f64::NAN; 51]), Err(Error::Domain(_))));
}

#[test]
fn fields_have_expected_traces() {
    let (k, d) = default_problem();
    let spec = GridSpec { h: 0.02, dt: 1e-3, t_end: 0.05, length: None };
    let solver = FrameSolver::new(&d, &k, &spec, SolverOptions::default()).unwrap();
    let v = vec![0.9; 51];
    let f = solver.solve(&v).unwrap();
    for n in 0..=50 {
        assert!(f.rho[n][0].abs() < 1e-12);
        // the double layer reproduces its density on the wall; at t = 0
        // the trace is rho0'(0), equal to g(0) up to quadrature error
        let tol = if n == 0 { 1e-6 } else { 1e-12 };
        assert!((f.u[n][0] - f.g[n]).abs() < tol, "n = {n}");
    }
    for (i, &x) in f.x.iter().enumerate() {
        assert_eq!(f.rho[0][i], d.value(x));
        assert_eq!(f.u[0][i], d.phi(x));
    }
}

#[test]
fn zero_branching_density_solves_the_heat_equation() {
    // x (1 + 4x/S) (S - x)^4 has rho0(0) = rho0''(0) = 0, so the heat
    // problem has no corner layer
    let sup_s: f64 = 3.5;
    let p = Poly::new(vec![0.0, 1.0, 4.0 / sup_s]).mul(&Poly::power_of_linear(sup_s, 4));
    let mass = p.integral().eval(sup_s);
    let d = InitialDatum::from_poly(p.scale(1.0 / mass), sup_s).unwrap();
    assert!(d.derivative(2, 0.0).abs() < 1e-9);
    let k = no_branching();
    let spec = GridSpec::default();
    let v = VelocityPath::constant(0.0, spec.dt, 100);
    let f = solve_rho(&v, &d, &k, &spec).unwrap();
    let r = pde_residual(&f, v.values(), &k);
    assert!(r <= envelope(&f), "{r}");
}

#[test]
fn derivative_fields_match_differences_of_lower_ones() {
    let f = &fixed_points().0.fields;
    let (h, dt) = (f.grid.h, f.grid.dt);
    let mut ux_gap = 0.0f64;
    let mut uxx_gap = 0.0f64;
    for n in 0..=f.grid.steps {
        let u = &f.u[n];
        for i in 1..u.len() - 1 {
            ux_gap = ux_gap.max((f.u_x[n][i] - (u[i + 1] - u[i - 1]) / (2.0 * h)).abs());
            if f.x[i] + f.t[n].sqrt() >= 3.0 * h {
                let d2 = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
                uxx_gap = uxx_gap.max((f.u_xx[n][i] - d2).abs());
            }
        }
    }
    assert!(ux_gap <= envelope(f), "u_x gap {ux_gap}");
    assert!(uxx_gap <= 10.0 * (h + dt.sqrt()), "u_xx gap {uxx_gap}");
}

#[test]
fn initial_traces_are_the_datum() {
    let (_, d) = default_problem();
    let f = &fixed_points().0.fields;
    for (i, &x) in f.x.iter().enumerate() {
        assert_eq!(f.u_x[0][i], d.derivative(2, x));
        assert_eq!(f.u_xx[0][i], d.derivative(3, x));
    }
}

#[test]
fn slope_field_leaves_its_initial_trace_at_the_expected_rates() {
    // u_x(., dt) - phi' is O(dt) inside and O(sqrt dt) at the wall, where
    // u_x(0, .) is only Holder-1/2
    let (k, d) = default_problem();
    let v0 = freefront_core::front::initial_velocity(&d, &k).unwrap();
    let errs: Vec<(f64, f64)> = [1e-3, 1e-4]
        .iter()
        .map(|&dt| {
            let spec = GridSpec { h: 0.01, dt, t_end: 0.004, length: None };
            let s = FrameSolver::new(&d, &k, &spec, SolverOptions::default()).unwrap();
            let f = s.solve_for_velocity(&vec![v0; s.grid().steps + 1]).unwrap();
            let e: Vec<f64> = f.x.iter().enumerate().map(|(i, &x)| (f.u_x[1][i] - d.derivative(2, x)).abs()).collect();
            (e[0], e[10..].iter().copied().fold(0.0, f64::max))
        })
        .collect();
    let (wall, inner) = (errs[0].0 / errs[1].0, errs[0].1 / errs[1].1);
    assert!((2.6..3.8).contains(&wall), "{errs:?}");
    assert!((8.0..12.0).contains(&inner), "{errs:?}");
    assert!(errs[1].1 <= 1e-3, "{errs:?}");
}

#[test]
fn fixed_point_fields_conserve_and_stay_nonnegative() {
    let f = &fixed_points().0.fields;
    for n in 0..=f.grid.steps {
        // int u = -rho(0) = 0 = int phi
        assert!(simpson(&f.u[n], f.grid.h).abs() <= 1e-4, "n = {n}");
        assert!(f.rho[n].iter().all(|&r| r >= -1e-6));
        assert!(f.rho[n][0].abs() <= 1e-8);
        assert!((f.u[n][0] - f.g[n]).abs() <= 1e-4);
    }
}

#[test]
fn flux_rate_matches_differences_and_its_bound() {
    let (k, _) = default_problem();
    let sol = &fixed_points().0;
    let f = &sol.fields;
    let dt = f.grid.dt;
    let g2 = (1..f.grid.steps).map(|n| (f.g[n + 1] - 2.0 * f.g[n] + f.g[n - 1]).abs() / (dt * dt)).fold(0.0, f64::max);
    let v = sol.velocity.values();
    // |g'| <= c9 |rho_x(0)| + (c10 |V| + c11) |rho|_1
    let (c9, c10, c11) = (k.rate() * k.p_plus(0.0), 2.0 * k.rate() * k.sup_q(), k.rate() * (k.sup_dq() + 2.0));
    for n in 1..f.grid.steps {
        let centred = (f.g[n + 1] - f.g[n - 1]) / (2.0 * dt);
        assert!((f.g_prime[n] - centred).abs() <= 10.0 * dt * g2, "n = {n}");
        let l1 = simpson(&f.rho[n], f.grid.h);
        let bound = c9 * f.u[n][0].abs() + (c10 * v[n].abs() + c11) * l1;
        assert!(f.g_prime[n].abs() <= bound, "n = {n}");
    }
    let mut zero = f.clone();
    zero.rho.iter_mut().flatten().for_each(|r| *r = 0.0);
    assert!(compute_g_prime(&zero, &sol.velocity, &k).iter().all(|&x| x == 0.0));
}

#[test]
fn field_norms_are_stable_under_refinement() {
    let (a, b) = fixed_points();
    let (fa, fb) = (&a.fields, &b.fields);
    let norms = |f: &FieldGrid| {
        let l1 = |rows: &[Vec<f64>]| {
            rows.iter().map(|r| simpson(&r.iter().map(|x| x.abs()).collect::<Vec<_>>(), f.grid.h)).fold(0.0, f64::max)
        };
        [sup(&f.rho), sup(&f.u), sup(&f.u_x), sup(&f.u_xx), l1(&f.rho), l1(&f.u)]
    };
    for (p, q) in norms(fa).iter().zip(norms(fb)) {
        assert!(p.is_finite() && (p - q).abs() <= 0.1 * p, "{p} vs {q}");
    }
    let trace = |s: &FrontSolution| {
        let vals: Vec<f64> = s.fields.u_x.iter().map(|r| r[0]).collect();
        holder_seminorm(&VelocityPath::from_values(vals, s.fields.grid.dt).unwrap())
    };
    let (ha, hb) = (trace(a), trace(b));
    assert!(ha.is_finite() && (ha - hb).abs() <= 0.25 * ha, "{ha} vs {hb}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn later_velocities_do_not_affect_earlier_fields(cut in 1usize..40, bump in -0.5..0.5f64) {
        let (k, d) = default_problem();
        let spec = GridSpec { h: 0.04, dt: 2e-3, t_end: 0.08, length: None };
        let solver = FrameSolver::new(&d, &k, &spec, SolverOptions::default()).unwrap();
        let base: Vec<f64> = (0..=40).map(|n| 0.9 + 0.1 * (n as f64 * 0.1).sin()).collect();
        let mut moved = base.clone();
        for v in &mut moved[cut + 1..] {
            *v += bump;
        }
        let a = solver.solve(&base).unwrap();
        let b = solver.solve(&moved).unwrap();
        for n in 0..=cut {
            prop_assert_eq!(&a.rho[n], &b.rho[n]);
            prop_assert_eq!(&a.u[n], &b.u[n]);
            prop_assert_eq!(&a.u_x[n], &b.u_x[n]);
        }
    }
}
