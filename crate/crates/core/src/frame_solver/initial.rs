//! Initial potentials `int_0^S [k(x - xi; t) +- k(x + xi; t)] f(xi) dxi` of
//! compactly supported data.

use alloc::vec::Vec;

use super::potential::Parity;
use crate::kernels::{gauss, truncation_radius};
use crate::math::{self, GaussLegendre};

/// Rows `n = 0..=steps`; row 0 holds `f` at the nodes.
pub(crate) fn initial_potential<F: Fn(f64) -> f64>(
    h: f64,
    dt: f64,
    nodes: usize,
    steps: usize,
    support: f64,
    parity: Parity,
    f: F,
) -> Vec<Vec<f64>> {
    let gl = GaussLegendre::new(10);
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(
        (0..nodes)
            .map(|i| {
                let x = i as f64 * h;
                if x <= support {
                    f(x)
                } else {
                    0.0
                }
            })
            .collect(),
    );
    for n in 1..=steps {
        let t = n as f64 * dt;
        let r = truncation_radius(t);
        let width = math::sqrt(t).min(0.25);
        let mut row = alloc::vec![0.0; nodes];
        for (i, o) in row.iter_mut().enumerate() {
            let x = i as f64 * h;
            let lo = (x - r).max(0.0);
            let hi = (x + r).min(support);
            let mut s = 0.0;
            if hi > lo {
                s += gl.integrate_with_breaks(lo, hi, &[], width, |xi| gauss(x - xi, t) * f(xi));
            }
            let hi_img = (r - x).min(support);
            if hi_img > 0.0 {
                s += parity * gl.integrate_with_breaks(0.0, hi_img, &[], width, |xi| gauss(x + xi, t) * f(xi));
            }
            *o = s;
        }
        if parity < 0.0 {
            row[0] = 0.0;
        }
        rows.push(row);
    }
    rows
}
