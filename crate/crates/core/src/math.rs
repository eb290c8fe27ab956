//! Small numerical toolbox shared by the solver modules.

use alloc::vec::Vec;

pub(crate) const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
pub(crate) const SQRT_PI: f64 = 1.772_453_850_905_516;
pub(crate) const PI: f64 = core::f64::consts::PI;

/// `sqrt(2 ln 1e16)`: a Gaussian `exp(-z^2 / (2 s))` drops below `1e-16` of
/// its peak once `|z| > GAUSS_TAIL * sqrt(s)`.
pub(crate) const GAUSS_TAIL: f64 = 8.582_362_256_755_21;

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub(crate) fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

#[inline]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (&x, &y)| m.max(abs(x - y)))
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if abs(dx) < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]` with a single panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * x);
        }
        s * half
    }

    /// Composite rule: `[a, b]` split into `panels` equal panels.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        if b <= a {
            return 0.0;
        }
        let panels = panels.max(1);
        let w = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + w * p as f64;
                self.integrate(lo, lo + w, &mut f)
            })
            .sum()
    }

    /// Composite rule over `[a, b]` with extra panel boundaries at
    /// `breaks` (points outside `(a, b)` are ignored) and panels no wider
    /// than `max_width`.
    pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        breaks: &[f64],
        max_width: f64,
        mut f: F,
    ) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut pts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
        pts.push(a);
        pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
        pts.push(b);
        pts.sort_by(f64::total_cmp);
        let mut s = 0.0;
        for win in pts.windows(2) {
            let (lo, hi) = (win[0], win[1]);
            if hi <= lo {
                continue;
            }
            let panels = ceil((hi - lo) / max_width).max(1.0) as usize;
            s += self.integrate_panels(lo, hi, panels, &mut f);
        }
        s
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Simpson rule for samples on a uniform grid of spacing `h`.
///
/// An odd number of intervals is closed with Simpson's 3/8 rule on the last
/// three intervals. Two samples fall back to the trapezoid rule.
pub fn simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (f[0] + f[1]),
        3 => h / 3.0 * (f[0] + 4.0 * f[1] + f[2]),
        _ => {
            let intervals = n - 1;
            let (even_end, tail) = if intervals % 2 == 0 {
                (n - 1, 0.0)
            } else {
                let k = n - 4;
                (k, 3.0 * h / 8.0 * (f[k] + 3.0 * f[k + 1] + 3.0 * f[k + 2] + f[k + 3]))
            };
            let mut s = f[0] + f[even_end];
            for (i, v) in f.iter().enumerate().take(even_end).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            s * h / 3.0 + tail
        }
    }
}

/// Cumulative tail integrals `out[i] = int_{x_i}^{x_M} f` by the trapezoid
/// rule with the endpoint correction `-(h^2/12) [f'(x_M) - f'(x_i)]`
/// (derivatives by second-order differences).
pub(crate) fn tail_integrals(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = alloc::vec![0.0; n];
    if n < 3 {
        if n == 2 {
            out[0] = 0.5 * h * (f[0] + f[1]);
        }
        return out;
    }
    let mut acc = 0.0;
    for i in (0..n - 1).rev() {
        acc += 0.5 * h * (f[i] + f[i + 1]);
        out[i] = acc;
    }
    let d_end = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    for i in 0..n - 1 {
        let d_i = derivative_at(f, i, h);
        out[i] -= h * h / 12.0 * (d_end - d_i);
    }
    out
}

/// Second-order finite-difference derivative at node `i` (one-sided at the
/// ends).
pub(crate) fn derivative_at(f: &[f64], i: usize, h: f64) -> f64 {
    let n = f.len();
    if i == 0 {
        (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    } else if i == n - 1 {
        (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h)
    } else {
        (f[i + 1] - f[i - 1]) / (2.0 * h)
    }
}

/// Fourth-order one-sided derivative at the left end of a uniform grid.
pub(crate) fn left_derivative4(f: &[f64], h: f64) -> f64 {
    (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)
}

/// Hölder-1/2 seminorm of samples `v` at times `t` (all node pairs).
pub(crate) fn holder_half(t: &[f64], v: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for n in 1..v.len() {
        for m in 0..n {
            let dt = t[n] - t[m];
            if dt > 0.0 {
                best = best.max(abs(v[n] - v[m]) / sqrt(dt));
            }
        }
    }
    best
}
