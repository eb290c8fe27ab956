//! Boundary layer potentials with data piecewise linear in time.

use alloc::vec::Vec;

use crate::kernels::TimeKernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Layer {
    /// `int_0^t -K_x(x, t; 0, tau) g(tau) dtau`; trace at `x = 0` is `g(t)`.
    Double,
    /// `int_0^t K(x, t; 0, tau) g(tau) dtau`.
    Single,
}

/// Product weights per node and lag, `weights[i * steps + m - 1]`.
#[derive(Debug, Clone)]
pub(crate) struct LayerPotential {
    layer: Layer,
    steps: usize,
    near: Vec<f64>,
    far: Vec<f64>,
}

impl LayerPotential {
    pub(crate) fn new(layer: Layer, h: f64, dt: f64, nodes: usize, steps: usize) -> Self {
        let mut near = alloc::vec![0.0; nodes * steps];
        let mut far = alloc::vec![0.0; nodes * steps];
        for i in 0..nodes {
            let x = i as f64 * h;
            let kernel = match layer {
                Layer::Double => TimeKernel::DoubleLayer { x },
                Layer::Single => TimeKernel::SingleLayer { x },
            };
            if layer == Layer::Double && i == 0 {
                continue;
            }
            for m in 1..=steps {
                let (a, b) = kernel.step_weights(dt, m);
                near[i * steps + m - 1] = a;
                far[i * steps + m - 1] = b;
            }
        }
        Self { layer, steps, near, far }
    }

    /// Potential at step `n` from samples `data[0..=n]`.
    pub(crate) fn apply(&self, data: &[f64], n: usize, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            if n == 0 {
                *o = if self.layer == Layer::Double && i == 0 { data[0] } else { 0.0 };
                continue;
            }
            if self.layer == Layer::Double && i == 0 {
                *o = data[n];
                continue;
            }
            let row = i * self.steps;
            let mut s = 0.0;
            for m in 1..=n {
                s += self.near[row + m - 1] * data[n + 1 - m] + self.far[row + m - 1] * data[n - m];
            }
            *o = s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_layer_trace_is_unit() {
        // constant data: potential is erfc(x / sqrt(2 t)) -> 1 as x -> 0
        let (h, dt, steps) = (1e-3, 1e-3, 100);
        let lp = LayerPotential::new(Layer::Double, h, dt, 50, steps);
        let data = vec![1.0; steps + 1];
        let mut out = vec![0.0; 50];
        lp.apply(&data, steps, &mut out);
        assert_eq!(out[0], 1.0);
        for (i, v) in out.iter().enumerate().skip(1) {
            let x = i as f64 * h;
            assert!((v - libm::erfc(x / (0.2f64).sqrt())).abs() < 1e-12);
        }
        // erfc(z) >= 1 - 2 z / sqrt(pi)
        assert!(1.0 - out[1] <= h * (2.0 / (core::f64::consts::PI * 0.1)).sqrt());
    }
}
