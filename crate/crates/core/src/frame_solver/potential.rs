//! Translation-invariant stencils for volume potentials on the half-line.
//!
//! A volume potential `W(x, t_n) = int_0^t_n int_0^inf kappa(x, t_n - tau; xi) F`
//! is advanced one step as
//! `W_n = P[W_{n-1}] + A1[F_{n-1}] + (A0 - A1)[F_n]`, with `P` the heat
//! semigroup over one step (trapezoid in space) and `A0`, `A1` the kernels
//! integrated exactly over the step against `F` linear in time and
//! piecewise linear in space.

use alloc::vec::Vec;

use crate::kernels::{gauss, gauss_dz, truncation_radius, StepKernels};
use crate::math::{self, GaussLegendre};

/// Image parity: `+1` reflects (Neumann), `-1` absorbs (Dirichlet).
pub(crate) type Parity = f64;
pub(crate) const EVEN: Parity = 1.0;
pub(crate) const ODD: Parity = -1.0;

/// One heat step of length `dt` applied by the trapezoid rule with an
/// Euler–Maclaurin correction at `x = 0`.
#[derive(Debug, Clone)]
pub(crate) struct Propagator {
    h: f64,
    parity: Parity,
    /// `h k(m h; dt)` for `m = 0..=half`.
    w: Vec<f64>,
    /// `k(x_i; dt)` or `k'(x_i; dt)` for the boundary correction.
    corr: Vec<f64>,
}

impl Propagator {
    pub(crate) fn new(h: f64, dt: f64, parity: Parity, nodes: usize) -> Self {
        let half = math::ceil(truncation_radius(dt) / h) as usize + 1;
        let w = (0..=half).map(|m| h * gauss(m as f64 * h, dt)).collect();
        let corr = (0..nodes.min(half + 1))
            .map(|i| {
                let x = i as f64 * h;
                if parity > 0.0 {
                    gauss(x, dt)
                } else {
                    gauss_dz(x, dt)
                }
            })
            .collect();
        Self { h, parity, w, corr }
    }

    /// `out = P[f]`.
    pub(crate) fn apply(&self, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        let half = self.w.len() - 1;
        let eps = self.parity;
        for (i, o) in out.iter_mut().enumerate() {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let mut s = 0.0;
            for j in lo..=hi {
                let d = i.abs_diff(j);
                let wj = if j == 0 { 0.5 } else { 1.0 };
                s += wj * self.w[d] * f[j];
            }
            // images: k(x_i + x_j)
            if i <= half {
                for j in 0..=(half - i).min(n - 1) {
                    let wj = if j == 0 { 0.5 } else { 1.0 };
                    s += eps * wj * self.w[i + j] * f[j];
                }
            }
            if i < self.corr.len() && n >= 3 {
                let c = self.h * self.h / 6.0;
                if eps > 0.0 {
                    s += c
                        * self.corr[i]
                        * if n >= 5 { math::left_derivative4(f, self.h) } else { math::derivative_at(f, 0, self.h) };
                } else {
                    s -= c * self.corr[i] * f[0];
                }
            }
            *o = s;
        }
        if eps < 0.0 {
            out[0] = 0.0;
        }
    }
}

/// Exact hat-function weights of a kernel `kappa` on the uniform grid:
/// `r[m] = int_0^h kappa(m h - xi)(1 - xi/h)`, `l[m] = int_{-h}^0 kappa(m h - xi)(1 + xi/h)`.
#[derive(Debug, Clone)]
pub(crate) struct HatWeights {
    half: usize,
    /// indexed by `m + half`
    r: Vec<f64>,
    l: Vec<f64>,
}

impl HatWeights {
    pub(crate) fn new<F: Fn(f64) -> f64>(h: f64, half: usize, kappa: F) -> Self {
        let gl = GaussLegendre::new(20);
        let len = 2 * half + 1;
        let mut r = alloc::vec![0.0; len];
        let mut l = alloc::vec![0.0; len];
        for idx in 0..len {
            let m = idx as f64 - half as f64;
            r[idx] = gl.integrate(0.0, h, |xi| kappa(m * h - xi) * (1.0 - xi / h));
            l[idx] = gl.integrate(-h, 0.0, |xi| kappa(m * h - xi) * (1.0 + xi / h));
        }
        Self { half, r, l }
    }

    #[inline]
    fn whole(&self, m: isize) -> f64 {
        let idx = m + self.half as isize;
        if idx < 0 || idx as usize >= self.r.len() {
            0.0
        } else {
            let idx = idx as usize;
            self.r[idx] + self.l[idx]
        }
    }

    /// `out[i] += sum_k [kappa(x_i - .) + parity kappa(x_i + .)]` integrated
    /// against the hat interpolant of `f`.
    pub(crate) fn accumulate(&self, parity: Parity, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        let half = self.half as isize;
        for (i, o) in out.iter_mut().enumerate() {
            let ii = i as isize;
            let mut s = 0.0;
            // k = 0: half hat
            if ii <= half {
                let idx = (ii + half) as usize;
                s += (self.r[idx] + parity * self.l[idx]) * f[0];
            }
            let lo = (ii - half).max(1);
            let hi = (ii + half).min(n as isize - 1);
            let mut k = lo;
            while k <= hi {
                s += self.whole(ii - k) * f[k as usize];
                k += 1;
            }
            // images k + i <= half
            let hi_img = (half - ii).min(n as isize - 1);
            let mut k = 1;
            while k <= hi_img {
                s += parity * self.whole(ii + k) * f[k as usize];
                k += 1;
            }
            *o += s;
        }
    }
}

/// Which potential of a source `F` the operator produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PotentialKind {
    /// `int int G F`: odd output.
    ValueG,
    /// `d/dx int int N F`: odd output.
    DxN,
    /// `d/dx int int G F`: even output.
    DxG,
}

impl PotentialKind {
    fn source_parity(self) -> Parity {
        match self {
            PotentialKind::ValueG | PotentialKind::DxG => ODD,
            PotentialKind::DxN => EVEN,
        }
    }

    pub(crate) fn output_parity(self) -> Parity {
        match self {
            PotentialKind::ValueG | PotentialKind::DxN => ODD,
            PotentialKind::DxG => EVEN,
        }
    }

    fn derivative(self) -> bool {
        !matches!(self, PotentialKind::ValueG)
    }
}

/// One-step update of a volume potential.
#[derive(Debug, Clone)]
pub(crate) struct VolumeOperator {
    kind: PotentialKind,
    propagator: Propagator,
    w1: HatWeights,
    w01: HatWeights,
}

impl VolumeOperator {
    pub(crate) fn new(kind: PotentialKind, h: f64, dt: f64, nodes: usize) -> Self {
        let sk = StepKernels { dt };
        let half = math::ceil(truncation_radius(dt) / h) as usize + 1;
        let (w1, w01) = if kind.derivative() {
            (HatWeights::new(h, half, |z| sk.a1_dz(z)), HatWeights::new(h, half, |z| sk.a0_dz(z) - sk.a1_dz(z)))
        } else {
            (HatWeights::new(h, half, |z| sk.a1(z)), HatWeights::new(h, half, |z| sk.a0(z) - sk.a1(z)))
        };
        let propagator = Propagator::new(h, dt, kind.output_parity(), nodes);
        Self { kind, propagator, w1, w01 }
    }

    /// History part `P[W_{n-1}] + A1[F_{n-1}]`.
    pub(crate) fn history(&self, prev: &[f64], prev_src: &[f64], out: &mut [f64]) {
        self.propagator.apply(prev, out);
        self.w1.accumulate(self.kind.source_parity(), prev_src, out);
        self.pin(out);
    }

    /// `out = history + (A0 - A1)[F_n]`.
    pub(crate) fn complete(&self, history: &[f64], src: &[f64], out: &mut [f64]) {
        out.copy_from_slice(history);
        self.w01.accumulate(self.kind.source_parity(), src, out);
        self.pin(out);
    }

    fn pin(&self, out: &mut [f64]) {
        if self.kind.output_parity() < 0.0 {
            out[0] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propagator_reproduces_heat_flow_of_gaussian() {
        // even extension of exp(-x^2/2) stays Gaussian: variance 1 + dt
        let h = 0.01;
        let dt = 1e-3;
        let n = 1001;
        let f: Vec<f64> = (0..n).map(|i| gauss(i as f64 * h, 1.0)).collect();
        let p = Propagator::new(h, dt, EVEN, n);
        let mut out = vec![0.0; n];
        p.apply(&f, &mut out);
        for i in (0..600).step_by(7) {
            let exact = gauss(i as f64 * h, 1.0 + dt);
            assert!((out[i] - exact).abs() < 1e-12, "i = {i}: {} vs {exact}", out[i]);
        }
    }

    #[test]
    fn odd_propagator_of_odd_profile() {
        // x exp(-x^2/2) = -d/dx k: heat flow gives (1+dt)^(-3/2) x exp(-x^2/2(1+dt)) / sqrt(2 pi)
        let h = 0.01;
        let dt = 1e-3;
        let n = 1001;
        let f: Vec<f64> = (0..n).map(|i| -gauss_dz(i as f64 * h, 1.0)).collect();
        let p = Propagator::new(h, dt, ODD, n);
        let mut out = vec![0.0; n];
        p.apply(&f, &mut out);
        for i in (0..600).step_by(7) {
            let exact = -gauss_dz(i as f64 * h, 1.0 + dt);
            assert!((out[i] - exact).abs() < 1e-12, "i = {i}");
        }
    }

    #[test]
    fn hat_weights_of_constant_source() {
        // int int G * 1 over one step, deep in the interior, equals dt
        let h = 0.01;
        let dt = 1e-3;
        let n = 400;
        let op = VolumeOperator::new(PotentialKind::ValueG, h, dt, n);
        let ones = vec![1.0; n];
        let zero = vec![0.0; n];
        let mut hist = vec![0.0; n];
        op.history(&zero, &ones, &mut hist);
        let mut out = vec![0.0; n];
        op.complete(&hist, &ones, &mut out);
        assert!((out[200] - dt).abs() < 1e-14);
        assert_eq!(out[0], 0.0);
        // half-line: int_0^dt erf(x / sqrt(2 s)) ds at x = 0.02
        let x: f64 = 0.02;
        let gl = GaussLegendre::new(30);
        let exact = gl.integrate_panels(0.0, dt, 20, |s| libm::erf(x / (2.0 * s).sqrt()));
        assert!((out[2] - exact).abs() < 1e-13, "{} vs {exact}", out[2]);
    }
}
