//! Branching displacement kernel and initial datum.
//!
//! The kernel is the quartic bump `q(z) = c (z + a)^2 (b - z)^2` on
//! `[-a, b]` with unit mass, scaled by a branching `rate` (rate 0 disables
//! branching). The datum is the polynomial family
//! `rho0(x) = c x (1 + beta x) (S - x)^4` on `[0, S]`, calibrated to unit
//! mass and to the boundary compatibility `rho0'(0) = 2 int rho0 P+`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, GaussLegendre};

/// Dense polynomial in monomial form, `coef[k] x^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub coef: Vec<f64>,
}

impl Poly {
    pub fn new(coef: Vec<f64>) -> Self {
        Self { coef }
    }

    pub fn constant(c: f64) -> Self {
        Self { coef: alloc::vec![c] }
    }

    /// `(x - r)^n`.
    pub fn power_of_linear(r: f64, n: u32) -> Self {
        let mut p = Self::constant(1.0);
        let lin = Self::new(alloc::vec![-r, 1.0]);
        for _ in 0..n {
            p = p.mul(&lin);
        }
        p
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coef.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.coef.is_empty() || other.coef.is_empty() {
            return Self::new(Vec::new());
        }
        let mut out = alloc::vec![0.0; self.coef.len() + other.coef.len() - 1];
        for (i, a) in self.coef.iter().enumerate() {
            for (j, b) in other.coef.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coef.len().max(other.coef.len());
        let out = (0..n).map(|k| self.coef.get(k).unwrap_or(&0.0) + other.coef.get(k).unwrap_or(&0.0)).collect();
        Self::new(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coef.iter().map(|c| c * s).collect())
    }

    pub fn derivative(&self) -> Self {
        if self.coef.len() <= 1 {
            return Self::constant(0.0);
        }
        Self::new(self.coef.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    /// Antiderivative vanishing at 0.
    pub fn integral(&self) -> Self {
        let mut out = alloc::vec![0.0];
        out.extend(self.coef.iter().enumerate().map(|(k, c)| c / (k as f64 + 1.0)));
        Self::new(out)
    }

    pub fn degree(&self) -> usize {
        self.coef.len().saturating_sub(1)
    }
}

/// Parameters of the quartic-bump kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelShape {
    /// Offspring may land up to `a` to the left of the parent.
    pub a: f64,
    /// Offspring may land up to `b` to the right of the parent.
    pub b: f64,
    /// Branching rate; 0 disables the nonlocal term.
    pub rate: f64,
}

impl Default for KernelShape {
    fn default() -> Self {
        Self { a: 0.25, b: 0.75, rate: 1.0 }
    }
}

/// Displacement density `q` with `p(x, y) = q(y - x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingKernel {
    a: f64,
    b: f64,
    rate: f64,
    width: f64,
}

/// Builds the normalized quartic bump on `[-a, b]`.
pub fn make_kernel(shape: KernelShape) -> Result<BranchingKernel> {
    BranchingKernel::new(shape)
}

impl BranchingKernel {
    pub fn new(shape: KernelShape) -> Result<Self> {
        let KernelShape { a, b, rate } = shape;
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
            return Err(Error::InvalidKernel(alloc::format!(
                "support endpoints must be finite and nonnegative, got a = {a}, b = {b}"
            )));
        }
        if !(a + b > 0.0) {
            return Err(Error::InvalidKernel("degenerate support: a + b must be positive".into()));
        }
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::InvalidKernel(alloc::format!("rate must be >= 0, got {rate}")));
        }
        Ok(Self { a, b, rate, width: a + b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Copy with a different branching rate.
    pub fn with_rate(&self, rate: f64) -> Result<Self> {
        Self::new(KernelShape { a: self.a, b: self.b, rate })
    }

    /// Normalizing constant `c` of `c (z + a)^2 (b - z)^2`.
    pub fn normalization(&self) -> f64 {
        30.0 / math::powi(self.width, 5)
    }

    #[inline]
    fn unit(&self, z: f64) -> f64 {
        (z + self.a) / self.width
    }

    /// `q(z)`, unit mass (the rate is not included).
    #[inline]
    pub fn q(&self, z: f64) -> f64 {
        if z <= -self.a || z >= self.b {
            return 0.0;
        }
        let s = self.unit(z);
        let t = 1.0 - s;
        30.0 / self.width * s * s * t * t
    }

    /// `q'(z)`.
    #[inline]
    pub fn dq(&self, z: f64) -> f64 {
        if z <= -self.a || z >= self.b {
            return 0.0;
        }
        let s = self.unit(z);
        60.0 / (self.width * self.width) * s * (1.0 - s) * (1.0 - 2.0 * s)
    }

    /// `q''(z)`.
    #[inline]
    pub fn d2q(&self, z: f64) -> f64 {
        if z <= -self.a || z >= self.b {
            return 0.0;
        }
        let s = self.unit(z);
        60.0 / math::powi(self.width, 3) * (1.0 - 6.0 * s + 6.0 * s * s)
    }

    /// `int_{-inf}^z q`.
    pub fn cdf(&self, z: f64) -> f64 {
        if z <= -self.a {
            return 0.0;
        }
        if z >= self.b {
            return 1.0;
        }
        let s = self.unit(z);
        s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }

    /// Inverse of [`cdf`](Self::cdf) for `u` in `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let f = |s: f64| s * s * s * (10.0 - 15.0 * s + 6.0 * s * s) - u;
        let s = invert_monotone(f, |s| 30.0 * s * s * (1.0 - s) * (1.0 - s), 0.0, 1.0);
        -self.a + self.width * s
    }

    /// Offspring density `p(x, y) = q(y - x)`.
    pub fn p(&self, x: f64, y: f64) -> f64 {
        self.q(y - x)
    }

    /// `P+(y) = int_0^inf q(x - y) dx`: probability that a child of a
    /// parent at `y` lands in `[0, inf)`.
    pub fn p_plus(&self, y: f64) -> f64 {
        1.0 - self.cdf(-y)
    }

    /// `P2(z) = int_0^inf q(y - z) P+(y) dy`.
    pub fn p2(&self, z: f64) -> f64 {
        let lo = (z - self.a).max(0.0);
        let hi = z + self.b;
        if hi <= lo {
            return 0.0;
        }
        let gl = GaussLegendre::new(12);
        gl.integrate_with_breaks(lo, hi, &[self.a, -self.b, z], f64::INFINITY, |y| self.q(y - z) * self.p_plus(y))
    }

    /// `sup q`, attained at the midpoint of the support.
    pub fn sup_q(&self) -> f64 {
        30.0 / self.width / 16.0
    }

    /// `sup |q'|`, attained at `s = 1/2 -+ 1/sqrt(12)`.
    pub fn sup_dq(&self) -> f64 {
        let s = 0.5 - 1.0 / libm::sqrt(12.0);
        60.0 / (self.width * self.width) * s * (1.0 - s) * (1.0 - 2.0 * s)
    }
}

/// Finds the root of an increasing `f` on `[lo, hi]` with safeguarded
/// Newton steps.
fn invert_monotone<F, D>(f: F, df: D, mut lo: f64, mut hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = f(x);
        if v == 0.0 {
            return x;
        }
        if v > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = df(x);
        let mut next = if d > 0.0 { x - v / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if math::abs(next - x) <= 1e-15 * (1.0 + math::abs(x)) || hi - lo <= 1e-15 {
            return next;
        }
        x = next;
    }
    x
}

/// Initial datum: a polynomial on `[0, S]`, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDatum {
    support: f64,
    /// `derivs[k]` is the k-th derivative, k = 0..=4.
    derivs: Vec<Poly>,
    mass: f64,
    antiderivative: Poly,
}

impl InitialDatum {
    /// Wraps a polynomial restricted to `[0, support]`.
    ///
    /// The profile and its first three derivatives must vanish at
    /// `support` (C3 continuation by zero).
    pub fn from_poly(profile: Poly, support: f64) -> Result<Self> {
        if !(support.is_finite() && support > 0.0) {
            return Err(Error::InvalidDatum(alloc::format!("support must be positive, got {support}")));
        }
        let mut derivs = alloc::vec![profile];
        for k in 0..4 {
            let d = derivs[k].derivative();
            derivs.push(d);
        }
        let scale = derivs[0].coef.iter().fold(0.0f64, |m, c| m.max(math::abs(*c)))
            * math::powi(support, derivs[0].degree() as i32).max(1.0);
        for (k, d) in derivs.iter().take(4).enumerate() {
            let v = d.eval(support);
            if math::abs(v) > 1e-9 * scale.max(1.0) {
                return Err(Error::InvalidDatum(alloc::format!(
                    "derivative {k} equals {v} at the right support edge (C3 needs 0)"
                )));
            }
        }
        let antiderivative = derivs[0].integral();
        let mass = antiderivative.eval(support);
        Ok(Self { support, derivs, mass, antiderivative })
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn profile(&self) -> &Poly {
        &self.derivs[0]
    }

    /// k-th derivative at `x` (k <= 4); zero outside `[0, S]`.
    pub fn derivative(&self, k: usize, x: f64) -> f64 {
        if !(0.0..=self.support).contains(&x) {
            return 0.0;
        }
        self.derivs[k].eval(x)
    }

    /// `rho0(x)`.
    pub fn value(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    /// `phi = rho0'`.
    pub fn phi(&self, x: f64) -> f64 {
        self.derivative(1, x)
    }

    /// Cumulative mass `int_0^x rho0`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= self.support {
            self.mass
        } else {
            self.antiderivative.eval(x)
        }
    }

    /// Position below which a fraction `u` of the mass lies. Requires a
    /// nonnegative profile.
    pub fn quantile(&self, u: f64) -> f64 {
        let target = u.clamp(0.0, 1.0) * self.mass;
        invert_monotone(|x| self.cdf(x) - target, |x| self.value(x), 0.0, self.support)
    }

    /// `int_0^S f(x) rho0^(k)(x) dx` by Gauss–Legendre with panel breaks at
    /// `breaks`.
    pub fn integrate_against<F: FnMut(f64) -> f64>(&self, k: usize, breaks: &[f64], mut f: F) -> f64 {
        let gl = GaussLegendre::new(20);
        gl.integrate_with_breaks(0.0, self.support, breaks, 0.5, |x| f(x) * self.derivs[k].eval(x))
    }

    /// `int int rho0(y) p(y, x) dy dx` over the half-lines, rate included.
    pub fn flux_integral(&self, kernel: &BranchingKernel) -> f64 {
        kernel.rate() * self.integrate_against(0, &[kernel.a()], |y| kernel.p_plus(y))
    }

    /// `|rho0'(0) - 2 int int rho0 p|`.
    pub fn compatibility_residual(&self, kernel: &BranchingKernel) -> f64 {
        math::abs(self.phi(0.0) - 2.0 * self.flux_integral(kernel))
    }

    /// Checks every datum invariant against `kernel`.
    pub fn validate(&self, kernel: &BranchingKernel) -> Result<()> {
        if math::abs(self.mass - 1.0) > 1e-10 {
            return Err(Error::InvalidDatum(alloc::format!("mass is {}, expected 1", self.mass)));
        }
        if math::abs(self.value(0.0)) > 1e-14 {
            return Err(Error::InvalidDatum("rho0(0) must vanish".into()));
        }
        if !(self.phi(0.0) > 0.0) {
            return Err(Error::InvalidDatum("rho0'(0) must be positive".into()));
        }
        let n = 2000;
        for i in 0..=n {
            let x = self.support * i as f64 / n as f64;
            if self.value(x) < -1e-12 {
                return Err(Error::InvalidDatum(alloc::format!("rho0 is negative at x = {x}")));
            }
        }
        let r = self.compatibility_residual(kernel);
        if r > 1e-8 {
            return Err(Error::InvalidDatum(alloc::format!("compatibility residual {r} exceeds 1e-8")));
        }
        Ok(())
    }
}

/// Two-parameter datum family `c x (1 + beta x) (S - x)^4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatumFamily {
    pub support: f64,
}

impl Default for DatumFamily {
    fn default() -> Self {
        Self { support: 3.5 }
    }
}

/// Outcome of a calibration: the datum and the fitted parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub datum: InitialDatum,
    pub scale: f64,
    pub beta: f64,
    pub iterations: usize,
    pub mass_residual: f64,
    pub compat_residual: f64,
}

/// Fits `(c, beta)` so the datum has unit mass and satisfies the
/// compatibility condition with `kernel`.
pub fn calibrate_initial_datum(family: DatumFamily, kernel: &BranchingKernel) -> Result<Calibration> {
    let s = family.support;
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidDatum(alloc::format!("support must be positive, got {s}")));
    }
    let edge = Poly::power_of_linear(s, 4);
    // basis: x (x - S)^4 and x^2 (x - S)^4; (x - S)^4 = (S - x)^4
    let b1 = Poly::new(alloc::vec![0.0, 1.0]).mul(&edge);
    let b2 = Poly::new(alloc::vec![0.0, 0.0, 1.0]).mul(&edge);
    let gl = GaussLegendre::new(20);
    let flux = |p: &Poly| {
        kernel.rate() * gl.integrate_with_breaks(0.0, s, &[kernel.a()], 0.5, |y| p.eval(y) * kernel.p_plus(y))
    };
    let residual = |c: f64, d: f64| {
        let p = b1.scale(c).add(&b2.scale(d));
        let mass = p.integral().eval(s);
        let slope = p.derivative().eval(0.0);
        (mass - 1.0, slope - 2.0 * flux(&p))
    };
    // the residual is affine in (c, d); columns of the Jacobian are the
    // basis responses
    let (m1, f1) = (b1.integral().eval(s), b1.derivative().eval(0.0) - 2.0 * flux(&b1));
    let (m2, f2) = (b2.integral().eval(s), b2.derivative().eval(0.0) - 2.0 * flux(&b2));
    let det = m1 * f2 - m2 * f1;
    if !(math::abs(det) > 1e-300) {
        return Err(Error::Calibration { iterations: 0, mass_residual: f64::NAN, compat_residual: f64::NAN });
    }
    let (mut c, mut d) = (2.0 / math::powi(s, 4), 0.0);
    let mut res = residual(c, d);
    let mut iterations = 0;
    while iterations < 100 {
        if math::abs(res.0) <= 1e-13 && math::abs(res.1) <= 1e-12 {
            break;
        }
        let dc = (f2 * res.0 - m2 * res.1) / det;
        let dd = (m1 * res.1 - f1 * res.0) / det;
        c -= dc;
        d -= dd;
        res = residual(c, d);
        iterations += 1;
    }
    if !(math::abs(res.0) <= 1e-10 && math::abs(res.1) <= 1e-8) || !c.is_finite() {
        return Err(Error::Calibration { iterations, mass_residual: res.0, compat_residual: res.1 });
    }
    let beta = d / c;
    if !(c > 0.0) || 1.0 + beta * s < 0.0 {
        return Err(Error::InvalidDatum(alloc::format!("calibrated datum is not a density (c = {c}, beta = {beta})")));
    }
    let datum = InitialDatum::from_poly(b1.scale(c).add(&b2.scale(d)), s)?;
    Ok(Calibration { mass_residual: res.0, compat_residual: res.1, datum, scale: c, beta, iterations })
}

/// Nonlocal source `rate * int_0^inf f(y) q(x - y) dy` for samples `f` on
/// the grid `y_j = j h`, by the trapezoid rule with the `h^2/12` endpoint
/// correction at `y = 0`.
pub fn nonlocal_term(density: &[f64], h: f64, kernel: &BranchingKernel, x: f64) -> f64 {
    let n = density.len();
    if n == 0 || kernel.rate() == 0.0 {
        return 0.0;
    }
    let lo = ceil_index((x - kernel.b()) / h).max(0);
    let hi = math::floor((x + kernel.a()) / h) as isize;
    let hi = hi.min(n as isize - 1);
    let mut s = 0.0;
    let mut j = lo;
    while j <= hi {
        let w = if j == 0 { 0.5 } else { 1.0 };
        s += w * density[j as usize] * kernel.q(x - j as f64 * h);
        j += 1;
    }
    s *= h;
    if n >= 3 {
        let d0 = math::derivative_at(density, 0, h);
        let f0 = density[0];
        s += h * h / 12.0 * (d0 * kernel.q(x) - f0 * kernel.dq(x));
    }
    kernel.rate() * s
}

fn ceil_index(v: f64) -> isize {
    math::ceil(v - 1e-12) as isize
}

/// `g = 2 rate int rho P+` for samples on `y_j = j h` (composite Simpson).
pub fn boundary_flux_g(density: &[f64], h: f64, kernel: &BranchingKernel) -> f64 {
    if kernel.rate() == 0.0 {
        return 0.0;
    }
    let w: Vec<f64> = density.iter().enumerate().map(|(j, r)| r * kernel.p_plus(j as f64 * h)).collect();
    2.0 * kernel.rate() * math::simpson(&w, h)
}

/// Grid-aligned nonlocal operator with the kernel tabulated at grid
/// offsets.
#[derive(Debug, Clone)]
pub struct NonlocalOperator {
    h: f64,
    rate: f64,
    /// `q(d h)` for `d` in `[-da, db]`, stored at index `d + da`.
    table: Vec<f64>,
    da: usize,
    db: usize,
    /// `q(x_i)` and `q'(x_i)` for the endpoint correction.
    q_at: Vec<f64>,
    dq_at: Vec<f64>,
}

impl NonlocalOperator {
    pub fn new(kernel: &BranchingKernel, h: f64, nodes: usize) -> Self {
        Self::build(kernel, h, nodes, |z| kernel.q(z), |z| kernel.dq(z))
    }

    /// Operator for `d/dx` of the nonlocal term, `rate * int f(y) q'(x - y) dy`.
    pub fn derivative(kernel: &BranchingKernel, h: f64, nodes: usize) -> Self {
        Self::build(kernel, h, nodes, |z| kernel.dq(z), |z| kernel.d2q(z))
    }

    fn build<F, D>(kernel: &BranchingKernel, h: f64, nodes: usize, prof: F, dprof: D) -> Self
    where
        F: Fn(f64) -> f64,
        D: Fn(f64) -> f64,
    {
        let da = math::ceil(kernel.a() / h) as usize;
        let db = math::ceil(kernel.b() / h) as usize;
        let table = (0..=da + db).map(|k| prof((k as f64 - da as f64) * h)).collect();
        let q_at = (0..nodes).map(|i| prof(i as f64 * h)).collect();
        let dq_at = (0..nodes).map(|i| dprof(i as f64 * h)).collect();
        Self { h, rate: kernel.rate(), table, da, db, q_at, dq_at }
    }

    pub fn is_active(&self) -> bool {
        self.rate != 0.0
    }

    /// Writes `rate * int f(y) q(x_i - y) dy` into `out`.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        if !self.is_active() {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let d0 = if n >= 3 { math::derivative_at(f, 0, self.h) } else { 0.0 };
        let c = self.h * self.h / 12.0;
        for (i, o) in out.iter_mut().enumerate() {
            // d = i - j in [-da, db]
            let j_lo = i.saturating_sub(self.db);
            let j_hi = (i + self.da).min(n - 1);
            let mut s = 0.0;
            for j in j_lo..=j_hi {
                let q = self.table[i + self.da - j];
                s += if j == 0 { 0.5 * q * f[0] } else { q * f[j] };
            }
            s = s * self.h + c * (d0 * self.q_at[i] - f[0] * self.dq_at[i]);
            *o = self.rate * s;
        }
    }
}
