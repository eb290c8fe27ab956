//! Gaussian heat kernel `K`, quarter-plane Green function `G`, and the
//! product-integration weights used for weakly singular time integrals.
//!
//! The kernel has variance `t - tau`, so it solves `K_t = K_xx / 2`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, GaussLegendre, GAUSS_TAIL, SQRT_2PI, SQRT_PI};

/// Evaluation point `(x, t)` with source `(xi, tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub x: f64,
    pub t: f64,
    pub xi: f64,
    pub tau: f64,
}

impl KernelPoint {
    pub fn new(x: f64, t: f64, xi: f64, tau: f64) -> Self {
        Self { x, t, xi, tau }
    }

    fn gap(&self) -> Result<f64> {
        let s = self.t - self.tau;
        if s > 0.0 && s.is_finite() {
            Ok(s)
        } else {
            Err(Error::Domain(alloc::format!("kernel needs t > tau, got t = {}, tau = {}", self.t, self.tau)))
        }
    }
}

/// `k(z; s) = (2 pi s)^(-1/2) exp(-z^2 / (2 s))` for `s > 0`.
#[inline]
pub fn gauss(z: f64, s: f64) -> f64 {
    math::exp(-z * z / (2.0 * s)) / (SQRT_2PI * math::sqrt(s))
}

/// `d k / d z`.
#[inline]
pub fn gauss_dz(z: f64, s: f64) -> f64 {
    -z / s * gauss(z, s)
}

/// `K(x,t; xi,tau)`.
pub fn heat_kernel(pt: KernelPoint) -> Result<f64> {
    Ok(gauss(pt.x - pt.xi, pt.gap()?))
}

/// `dK/dx`.
pub fn heat_kernel_dx(pt: KernelPoint) -> Result<f64> {
    Ok(gauss_dz(pt.x - pt.xi, pt.gap()?))
}

/// `G(x,t; xi,tau) = K(x,t; xi,tau) - K(x,t; -xi,tau)`.
pub fn green_quarter_plane(pt: KernelPoint) -> Result<f64> {
    let s = pt.gap()?;
    Ok(green(pt.x, pt.xi, s))
}

/// `dG/dx`.
pub fn green_dx(pt: KernelPoint) -> Result<f64> {
    let s = pt.gap()?;
    Ok(gauss_dz(pt.x - pt.xi, s) - gauss_dz(pt.x + pt.xi, s))
}

/// `G` at time gap `s`, written to stay nonnegative for `x, xi >= 0`.
#[inline]
pub(crate) fn green(x: f64, xi: f64, s: f64) -> f64 {
    // k(x-xi) - k(x+xi) = k(x-xi) (1 - exp(-2 x xi / s))
    let d = x - xi;
    let base = math::exp(-d * d / (2.0 * s)) / (SQRT_2PI * math::sqrt(s));
    -base * libm::expm1(-2.0 * x * xi / s)
}

/// Radius beyond which a Gaussian of variance `s` is below `1e-16` of its
/// peak.
#[inline]
pub fn truncation_radius(s: f64) -> f64 {
    GAUSS_TAIL * math::sqrt(s)
}

/// Integrates `f` over the real line against a window centred at `center`
/// of Gaussian width `sqrt(s)`: panels no wider than `sqrt(s) / 2`,
/// 10-point Gauss–Legendre each, extra panel breaks at `breaks`.
pub fn integrate_gaussian_window<F: FnMut(f64) -> f64>(center: f64, s: f64, breaks: &[f64], f: F) -> f64 {
    let r = truncation_radius(s);
    let gl = GaussLegendre::new(10);
    gl.integrate_with_breaks(center - r, center + r, breaks, 0.5 * math::sqrt(s), f)
}

/// Weight function of a weakly singular time integral
/// `int_0^t w(t - tau) f(tau) dtau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeKernel {
    /// `w(s) = s^(-1/2)`.
    InvSqrt,
    /// Double layer `w(s) = x (2 pi)^(-1/2) s^(-3/2) exp(-x^2 / 2s)`, which
    /// is `-K_x(x, t; 0, tau)`. Its integral over `s > 0` is 1.
    DoubleLayer { x: f64 },
    /// Single layer `w(s) = k(x; s)`.
    SingleLayer { x: f64 },
}

impl TimeKernel {
    /// Antiderivatives `(M0, M1)` of `w(s)` and `s w(s)`, zero at `s = 0`.
    fn moments(self, s: f64) -> (f64, f64) {
        if s <= 0.0 {
            return (0.0, 0.0);
        }
        match self {
            TimeKernel::InvSqrt => (2.0 * math::sqrt(s), 2.0 / 3.0 * s * math::sqrt(s)),
            TimeKernel::DoubleLayer { x } => {
                if x == 0.0 {
                    return (0.0, 0.0);
                }
                let x = math::abs(x);
                let c = 0.5 * x * x;
                let m0 = math::erfc(x / math::sqrt(2.0 * s));
                let m1 = x / SQRT_2PI * inv_sqrt_moment(c, s);
                (m0, m1)
            }
            TimeKernel::SingleLayer { x } => {
                let c = 0.5 * x * x;
                let i = inv_sqrt_moment(c, s);
                let rs = math::sqrt(s);
                let m1 = 2.0 / 3.0 * s * rs * math::exp(-c / s) - 2.0 * c / 3.0 * i;
                (i / SQRT_2PI, m1 / SQRT_2PI)
            }
        }
    }

    /// Product weights on the step `s in [(m-1) dt, m dt]` for linear
    /// interpolation of `f`: `(w_near, w_far)` multiply the sample at
    /// `s = (m-1) dt` and at `s = m dt`.
    pub fn step_weights(self, dt: f64, m: usize) -> (f64, f64) {
        let sa = (m as f64 - 1.0) * dt;
        let sb = m as f64 * dt;
        let (a0, a1) = self.moments(sa);
        let (b0, b1) = self.moments(sb);
        let d0 = b0 - a0;
        let d1 = b1 - a1;
        let near = (sb * d0 - d1) / dt;
        let far = (d1 - sa * d0) / dt;
        (near, far)
    }
}

/// `int_0^s r^(-1/2) exp(-c/r) dr = 2 sqrt(s) e^(-c/s) - 2 sqrt(pi c) erfc(sqrt(c/s))`.
fn inv_sqrt_moment(c: f64, s: f64) -> f64 {
    let rs = math::sqrt(s);
    if c == 0.0 {
        return 2.0 * rs;
    }
    let rc = math::sqrt(c);
    2.0 * rs * math::exp(-c / s) - 2.0 * SQRT_PI * rc * math::erfc(rc / rs)
}

/// Product-integration weights for `int_0^t f(tau) w(t - tau) dtau` on a
/// uniform grid `tau_j = j t / n`.
#[derive(Debug, Clone)]
pub struct SingularQuadratureRule {
    pub t: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SingularQuadratureRule {
    /// Rule with `n` subintervals for the weight `kernel`.
    pub fn new(kernel: TimeKernel, t: f64, n: usize) -> Result<Self> {
        if !(t > 0.0) || n == 0 {
            return Err(Error::Domain(alloc::format!("quadrature rule needs t > 0 and n > 0, got t = {t}, n = {n}")));
        }
        let dt = t / n as f64;
        let nodes = (0..=n).map(|j| j as f64 * dt).collect();
        let mut weights = alloc::vec![0.0; n + 1];
        for m in 1..=n {
            // node j = n - m + 1 is near, node j = n - m is far
            let (near, far) = kernel.step_weights(dt, m);
            weights[n - m + 1] += near;
            weights[n - m] += far;
        }
        Ok(Self { t, nodes, weights })
    }

    /// Rule for the Abel weight `(t - tau)^(-1/2)`.
    pub fn inv_sqrt(t: f64, n: usize) -> Result<Self> {
        Self::new(TimeKernel::InvSqrt, t, n)
    }
}

/// Applies `rule` to samples of `f` at its nodes.
pub fn singular_time_integral(f: &[f64], rule: &SingularQuadratureRule) -> Result<f64> {
    if f.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    if f.len() != rule.weights.len() {
        return Err(Error::Domain(alloc::format!(
            "sample has {} values, rule has {} nodes",
            f.len(),
            rule.weights.len()
        )));
    }
    Ok(f.iter().zip(&rule.weights).map(|(a, b)| a * b).sum())
}

/// Time-integrated kernels over one step of length `dt`, the building
/// blocks of the local volume-potential contribution.
///
/// With `s` the time to the end of the step:
/// `a0(z) = int_0^dt k(z; s) ds`, `a1(z) = int_0^dt (s/dt) k(z; s) ds`.
#[derive(Debug, Clone, Copy)]
pub struct StepKernels {
    pub dt: f64,
}

impl StepKernels {
    pub fn a0(&self, z: f64) -> f64 {
        let z = math::abs(z);
        let dt = self.dt;
        math::sqrt(2.0 * dt / math::PI) * math::exp(-z * z / (2.0 * dt)) - z * math::erfc(z / math::sqrt(2.0 * dt))
    }

    pub fn a0_dz(&self, z: f64) -> f64 {
        let e = math::erfc(math::abs(z) / math::sqrt(2.0 * self.dt));
        if z > 0.0 {
            -e
        } else if z < 0.0 {
            e
        } else {
            0.0
        }
    }

    pub fn a1(&self, z: f64) -> f64 {
        let dt = self.dt;
        let c = 0.5 * z * z;
        let rs = math::sqrt(dt);
        let m1 = 2.0 / 3.0 * dt * rs * math::exp(-c / dt) - 2.0 * c / 3.0 * inv_sqrt_moment(c, dt);
        m1 / (SQRT_2PI * dt)
    }

    pub fn a1_dz(&self, z: f64) -> f64 {
        -z / self.dt * self.a0(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn kernel_examples() {
        let v = heat_kernel(KernelPoint::new(0.0, 1.0, 0.0, 0.0)).unwrap();
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-15);
        let a = heat_kernel(KernelPoint::new(1.0, 2.0, 3.0, 0.0)).unwrap();
        let b = heat_kernel(KernelPoint::new(3.0, 2.0, 1.0, 0.0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(heat_kernel_dx(KernelPoint::new(0.7, 1.0, 0.7, 0.2)).unwrap(), 0.0);
        assert!(heat_kernel(KernelPoint::new(0.0, 1.0, 0.0, 1.0)).is_err());
        assert!(heat_kernel_dx(KernelPoint::new(0.0, 0.5, 0.0, 1.0)).is_err());
    }

    #[test]
    fn green_examples() {
        let g = green_quarter_plane(KernelPoint::new(1.0, 1.0, 1.0, 0.0)).unwrap();
        let expect = (1.0 - (-2.0f64).exp()) / (2.0 * core::f64::consts::PI).sqrt();
        assert!((g - expect).abs() < 1e-15);
        assert_eq!(green_quarter_plane(KernelPoint::new(0.0, 1.0, 2.0, 0.0)).unwrap(), 0.0);
        assert_eq!(green_quarter_plane(KernelPoint::new(2.0, 1.0, 0.0, 0.0)).unwrap(), 0.0);
        assert!(green_dx(KernelPoint::new(0.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn step_kernels_match_quadrature() {
        let sk = StepKernels { dt: 1e-3 };
        let gl = GaussLegendre::new(20);
        for &z in &[0.0, 0.003, 0.02, 0.05, -0.04, 0.1] {
            // substitute s = r^2 to remove the endpoint singularity
            let a0 = gl.integrate_panels(0.0, sk.dt.sqrt(), 400, |r| 2.0 * r * gauss(z, r * r + 1e-300));
            let a1 =
                gl.integrate_panels(0.0, sk.dt.sqrt(), 400, |r| 2.0 * r * (r * r / sk.dt) * gauss(z, r * r + 1e-300));
            assert!((sk.a0(z) - a0).abs() < 1e-13, "a0 at {z}");
            assert!((sk.a1(z) - a1).abs() < 1e-13, "a1 at {z}");
            if z != 0.0 {
                let d0 = gl.integrate_panels(0.0, sk.dt.sqrt(), 400, |r| 2.0 * r * gauss_dz(z, r * r + 1e-300));
                let d1 = gl.integrate_panels(0.0, sk.dt.sqrt(), 400, |r| {
                    2.0 * r * (r * r / sk.dt) * gauss_dz(z, r * r + 1e-300)
                });
                assert!(rel(sk.a0_dz(z), d0) < 1e-9, "a0' at {z}");
                assert!(rel(sk.a1_dz(z), d1) < 1e-9, "a1' at {z}");
            }
        }
    }

    #[test]
    fn abel_rule_integrates_constants_and_lines() {
        let rule = SingularQuadratureRule::inv_sqrt(1.0, 37).unwrap();
        let ones = vec![1.0; 38];
        let lin: Vec<f64> = rule.nodes.clone();
        assert!(rel(singular_time_integral(&ones, &rule).unwrap(), 2.0) < 1e-12);
        assert!(rel(singular_time_integral(&lin, &rule).unwrap(), 4.0 / 3.0) < 1e-12);
        assert!(singular_time_integral(&[], &rule).is_err());
    }

    #[test]
    fn double_layer_has_unit_mass() {
        for &x in &[1e-3, 1e-2, 0.1] {
            let rule = SingularQuadratureRule::new(TimeKernel::DoubleLayer { x }, 50.0, 500).unwrap();
            let ones = vec![1.0; 501];
            let v = singular_time_integral(&ones, &rule).unwrap();
            assert!((v - math::erfc(x / 10.0)).abs() < 1e-12);
        }
    }
}
