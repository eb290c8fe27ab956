mod common;

use common::{gauss, integrate, integrate_breaks};
use freefront_core::kernels::{
    green_dx, green_quarter_plane, heat_kernel, heat_kernel_dx, singular_time_integral, KernelPoint,
    SingularQuadratureRule, StepKernels, TimeKernel,
};
use freefront_core::Error;
use proptest::prelude::*;

fn log_gaps() -> Vec<f64> {
    (0..=28).map(|k| 10f64.powf(-6.0 + k as f64 * 0.25)).collect()
}

#[test]
fn kernel_has_unit_mass_over_log_grid() {
    for s in log_gaps() {
        let (x, tau) = (0.37, 0.1);
        let pt = |xi| KernelPoint::new(x, tau + s, xi, tau);
        let r = 40.0 * s.sqrt();
        let mass = integrate_breaks(|xi| heat_kernel(pt(xi)).unwrap(), x - r, x + r, &[x], 1e-15);
        assert!((mass - 1.0).abs() <= 1e-10, "s = {s}: mass {mass}");
    }
}

#[test]
fn gradient_mass_matches_closed_form() {
    for s in log_gaps() {
        let (x, tau) = (-1.2, 0.0);
        let pt = |xi| KernelPoint::new(x, tau + s, xi, tau);
        let r = 40.0 * s.sqrt();
        let m = integrate_breaks(|xi| heat_kernel_dx(pt(xi)).unwrap().abs(), x - r, x + r, &[x], 1e-16 / s.sqrt());
        let exact = 2f64.sqrt() / (std::f64::consts::PI * s).sqrt();
        assert!(((m - exact) / exact).abs() <= 1e-8, "s = {s}: {m} vs {exact}");
    }
}

#[test]
fn kernels_refuse_non_causal_points() {
    for (t, tau) in [(1.0, 1.0), (0.5, 0.7)] {
        let pt = KernelPoint::new(0.1, t, 0.2, tau);
        assert!(matches!(heat_kernel(pt), Err(Error::Domain(_))));
        assert!(matches!(green_quarter_plane(pt), Err(Error::Domain(_))));
        assert!(matches!(green_dx(pt), Err(Error::Domain(_))));
    }
}

#[test]
fn step_kernels_match_time_quadrature() {
    // s = r^2 removes the s^(-1/2) endpoint behaviour
    for dt in [1e-4, 1e-3, 1e-2] {
        let sk = StepKernels { dt };
        for z in [0.0, 0.3 * dt.sqrt(), dt.sqrt(), -2.5 * dt.sqrt(), 6.0 * dt.sqrt()] {
            let rt = dt.sqrt();
            let a0 = integrate(|r| 2.0 * r * gauss(z, r * r), 0.0, rt, 1e-15);
            let a1 = integrate(|r| 2.0 * r * (r * r / dt) * gauss(z, r * r), 0.0, rt, 1e-15);
            assert!((sk.a0(z) - a0).abs() <= 1e-12, "a0 dt={dt} z={z}");
            assert!((sk.a1(z) - a1).abs() <= 1e-12, "a1 dt={dt} z={z}");
            if z != 0.0 {
                let d0 = integrate(|r| 2.0 * r * (-z / (r * r)) * gauss(z, r * r), 0.0, rt, 1e-13);
                let d1 = integrate(|r| 2.0 * r * (r * r / dt) * (-z / (r * r)) * gauss(z, r * r), 0.0, rt, 1e-13);
                assert!((sk.a0_dz(z) - d0).abs() <= 1e-9, "a0' dt={dt} z={z}");
                assert!((sk.a1_dz(z) - d1).abs() <= 1e-9, "a1' dt={dt} z={z}");
            }
        }
    }
}

#[test]
fn abel_rule_is_second_order() {
    // tau = t - u^2 turns int_0^t f(tau) (t - tau)^(-1/2) dtau into
    // int_0^sqrt(t) 2 f(t - u^2) du
    let t: f64 = 0.8;
    let f = |tau: f64| tau * tau + (3.0 * tau).sin();
    let exact = integrate(|u| 2.0 * f(t - u * u), 0.0, t.sqrt(), 1e-15);
    let errs: Vec<f64> = [40usize, 80, 160]
        .iter()
        .map(|&n| {
            let rule = SingularQuadratureRule::inv_sqrt(t, n).unwrap();
            let samples: Vec<f64> = rule.nodes.iter().map(|&x| f(x)).collect();
            (singular_time_integral(&samples, &rule).unwrap() - exact).abs()
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] > 3.5, "errors {errs:?}");
    }
}

#[test]
fn double_layer_weight_recovers_its_jump() {
    // int_0^t x (2 pi)^(-1/2) s^(-3/2) e^(-x^2/2s) ds = erfc(x / sqrt(2t))
    for x in [0.05, 0.3, 1.0] {
        let t = 0.4;
        let rule = SingularQuadratureRule::new(TimeKernel::DoubleLayer { x }, t, 64).unwrap();
        let ones = vec![1.0; rule.nodes.len()];
        let v = singular_time_integral(&ones, &rule).unwrap();
        let exact = libm::erfc(x / (2.0 * t).sqrt());
        assert!((v - exact).abs() < 1e-12, "x = {x}: {v} vs {exact}");
    }
}

proptest! {
    #[test]
    fn green_is_nonnegative_on_the_quarter_plane(x in 0.0..5.0f64, xi in 0.0..5.0f64, s in 1e-6..10.0f64) {
        let g = green_quarter_plane(KernelPoint::new(x, s, xi, 0.0)).unwrap();
        prop_assert!(g >= 0.0);
        prop_assert!(g <= heat_kernel(KernelPoint::new(x, s, xi, 0.0)).unwrap() + 1e-300);
    }

    #[test]
    fn heat_kernel_is_translation_invariant(
        x in -3.0..3.0f64, xi in -3.0..3.0f64, s in 1e-3..5.0f64, c in -10.0..10.0f64, d in -5.0..5.0f64,
    ) {
        let base = heat_kernel(KernelPoint::new(x, 1.0 + s, xi, 1.0)).unwrap();
        let moved = heat_kernel(KernelPoint::new(x + c, 1.0 + s + d.abs(), xi + c, 1.0 + d.abs())).unwrap();
        prop_assert!((base - moved).abs() <= 1e-9 * base.max(1e-300) + 1e-300);
    }

    #[test]
    fn green_vanishes_on_the_wall(xi in 0.0..4.0f64, s in 1e-4..4.0f64) {
        prop_assert_eq!(green_quarter_plane(KernelPoint::new(0.0, s, xi, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn green_dx_matches_differences(x in 0.1..3.0f64, xi in 0.0..3.0f64, s in 0.05..2.0f64) {
        let e = 1e-5;
        let g = |x| green_quarter_plane(KernelPoint::new(x, s, xi, 0.0)).unwrap();
        let fd = (g(x + e) - g(x - e)) / (2.0 * e);
        let an = green_dx(KernelPoint::new(x, s, xi, 0.0)).unwrap();
        prop_assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()));
    }
}
