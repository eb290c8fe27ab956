//! Finite-difference oracle for
//! `y_t = y_xx / 2 + V(t) y_x + r y + Nl y` on `[0, L]`, with `y(L) = 0`
//! and either a Dirichlet value or a reflecting condition at `x = 0`.
//!
//! Crank–Nicolson (or forward Euler) in time, central second differences
//! for diffusion, second-order upwinding of the drift by the sign of `V`.
//! The nonlocal term is explicit (second-order Adams–Bashforth).

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::frame_solver::GridSpec;
use crate::front::VelocityPath;
use crate::math;
use crate::model::{boundary_flux_g, BranchingKernel, InitialDatum, NonlocalOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Explicit,
    CrankNicolson,
}

/// Grid and time scheme of the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub grid: GridSpec,
    pub scheme: Scheme,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { grid: GridSpec::default(), scheme: Scheme::CrankNicolson }
    }
}

/// Condition at `x = 0`.
pub enum LeftBoundary<'a> {
    Dirichlet(Box<dyn Fn(f64) -> f64 + 'a>),
    /// `y_x(0) = 0`.
    Reflecting,
}

impl core::fmt::Debug for LeftBoundary<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            LeftBoundary::Dirichlet(_) => f.write_str("Dirichlet(..)"),
            LeftBoundary::Reflecting => f.write_str("Reflecting"),
        }
    }
}

/// A linear drift-diffusion-reaction problem.
pub struct FdProblem<'a> {
    pub velocity: Box<dyn Fn(f64) -> f64 + 'a>,
    pub reaction: f64,
    pub nonlocal: Option<&'a BranchingKernel>,
    pub left: LeftBoundary<'a>,
    pub initial: Box<dyn Fn(f64) -> f64 + 'a>,
    /// Right edge of the initial support, for the domain-length rule.
    pub support: f64,
}

impl core::fmt::Debug for FdProblem<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FdProblem")
            .field("reaction", &self.reaction)
            .field("nonlocal", &self.nonlocal)
            .field("left", &self.left)
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

/// Oracle output: rows per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FdSolution {
    pub h: f64,
    pub dt: f64,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl FdSolution {
    /// `int y(., t_n)` with half weight at both ends.
    pub fn trapezoid_mass(&self, n: usize) -> f64 {
        let r = &self.rows[n];
        let inner: f64 = r.iter().sum();
        self.h * (inner - 0.5 * (r[0] + r[r.len() - 1]))
    }
}

/// Linear interpolation of samples on a uniform grid of spacing `dt`.
pub fn interpolate(samples: &[f64], dt: f64, t: f64) -> f64 {
    let pos = (t / dt).max(0.0);
    let i = pos as usize;
    if i + 1 >= samples.len() {
        return *samples.last().unwrap_or(&0.0);
    }
    let w = pos - i as f64;
    (1.0 - w) * samples[i] + w * samples[i + 1]
}

/// Pentadiagonal system, diagonals `a[k][i]` at offset `k - 2`.
struct Banded {
    d: [Vec<f64>; 5],
}

impl Banded {
    fn new(n: usize) -> Self {
        Self { d: core::array::from_fn(|_| alloc::vec![0.0; n]) }
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = (j as isize - i as isize + 2) as usize;
        self.d[k][i] = v;
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = (j as isize - i as isize + 2) as usize;
        self.d[k][i] += v;
    }

    /// Gaussian elimination without pivoting; consumes the matrix.
    fn solve(mut self, rhs: &mut [f64]) -> Result<()> {
        let n = rhs.len();
        for i in 0..n {
            let piv = self.d[2][i];
            if !(math::abs(piv) > 1e-300) {
                return Err(Error::Domain("singular finite-difference system".into()));
            }
            for r in 1..=2 {
                let row = i + r;
                if row >= n {
                    break;
                }
                let below = self.d[2 - r][row];
                if below == 0.0 {
                    continue;
                }
                let f = below / piv;
                // row -= f * pivot row, columns i..=i+2
                for c in 0..=2 {
                    let col = i + c;
                    if col >= n {
                        break;
                    }
                    let kp = 2 + c;
                    let kr = (col as isize - row as isize + 2) as usize;
                    self.d[kr][row] -= f * self.d[kp][i];
                }
                rhs[row] -= f * rhs[i];
            }
        }
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for c in 1..=2 {
                if i + c < n {
                    s -= self.d[2 + c][i] * rhs[i + c];
                }
            }
            rhs[i] = s / self.d[2][i];
        }
        Ok(())
    }
}

/// Adds `scale * L` row entries for node `i`, where
/// `L y = y_xx / 2 + v y_x + r y`.
fn operator_row(i: usize, m: usize, h: f64, v: f64, r: f64, mut put: impl FnMut(usize, f64)) {
    let dif = 0.5 / (h * h);
    put(i - 1, dif);
    put(i, -2.0 * dif + r);
    put(i + 1, dif);
    if v >= 0.0 {
        if i + 2 <= m {
            let c = v / (2.0 * h);
            put(i, -3.0 * c);
            put(i + 1, 4.0 * c);
            put(i + 2, -c);
        } else {
            put(i, -v / h);
            put(i + 1, v / h);
        }
    } else if i >= 2 {
        let c = v / (2.0 * h);
        put(i, 3.0 * c);
        put(i - 1, -4.0 * c);
        put(i - 2, c);
    } else {
        put(i, v / h);
        put(i - 1, -v / h);
    }
}

/// Applies `L` to `y` (interior rows and a reflecting row 0).
fn apply_operator(y: &[f64], h: f64, v: f64, r: f64, reflecting: bool, out: &mut [f64]) {
    let m = y.len() - 1;
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 1..m {
        let mut s = 0.0;
        operator_row(i, m, h, v, r, |j, c| s += c * y[j]);
        out[i] = s;
    }
    if reflecting {
        out[0] = (y[1] - y[0]) / (h * h) + r * y[0];
    }
}

/// Solves the problem on the grid of `cfg`.
pub fn solve_fd(problem: &FdProblem<'_>, cfg: &FdConfig) -> Result<FdSolution> {
    let reach = problem.nonlocal.map_or(0.0, |k| k.b());
    let grid = cfg.grid.resolve_any_ratio(problem.support, reach).map_err(|e| match e {
        Error::Grid(m) => Error::Config(m),
        other => other,
    })?;
    let (h, dt, nodes, steps) = (grid.h, grid.dt, grid.nodes, grid.steps);
    if cfg.scheme == Scheme::Explicit && dt > h * h {
        return Err(Error::Config(alloc::format!("explicit scheme needs dt <= h^2 (dt = {dt}, h^2 = {})", h * h)));
    }
    let m = nodes - 1;
    let reflecting = matches!(problem.left, LeftBoundary::Reflecting);
    let nonlocal = problem.nonlocal.filter(|k| k.rate() != 0.0).map(|k| NonlocalOperator::new(k, h, nodes));
    let x: Vec<f64> = (0..nodes).map(|i| i as f64 * h).collect();
    let t: Vec<f64> = (0..=steps).map(|n| n as f64 * dt).collect();

    let mut y: Vec<f64> = x.iter().map(|&xi| (problem.initial)(xi)).collect();
    y[m] = 0.0;
    if let LeftBoundary::Dirichlet(b) = &problem.left {
        y[0] = b(0.0);
    }
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(y.clone());

    let mut nl_prev: Option<Vec<f64>> = None;
    let mut nl_now = alloc::vec![0.0; nodes];
    let mut ly = alloc::vec![0.0; nodes];
    for n in 0..steps {
        let (t0, t1) = (t[n], t[n + 1]);
        let (v0, v1) = ((problem.velocity)(t0), (problem.velocity)(t1));
        // explicit nonlocal source
        let src: Option<Vec<f64>> = nonlocal.as_ref().map(|op| {
            op.apply(&y, &mut nl_now);
            let s = match &nl_prev {
                Some(p) => nl_now.iter().zip(p).map(|(a, b)| 1.5 * a - 0.5 * b).collect(),
                None => nl_now.clone(),
            };
            nl_prev = Some(nl_now.clone());
            s
        });
        let mut rhs = y.clone();
        match cfg.scheme {
            Scheme::Explicit => {
                apply_operator(&y, h, v0, problem.reaction, reflecting, &mut ly);
                for i in 0..nodes {
                    rhs[i] += dt * ly[i];
                }
                if let Some(s) = &src {
                    for i in 0..nodes {
                        rhs[i] += dt * s[i];
                    }
                }
            }
            Scheme::CrankNicolson => {
                apply_operator(&y, h, v0, problem.reaction, reflecting, &mut ly);
                for i in 0..nodes {
                    rhs[i] += 0.5 * dt * ly[i];
                }
                if let Some(s) = &src {
                    for i in 0..nodes {
                        rhs[i] += dt * s[i];
                    }
                }
                let mut a = Banded::new(nodes);
                for i in 1..m {
                    a.set(i, i, 1.0);
                    operator_row(i, m, h, v1, problem.reaction, |j, c| a.add(i, j, -0.5 * dt * c));
                }
                if reflecting {
                    let c = 0.5 * dt / (h * h);
                    a.set(0, 0, 1.0 + c - 0.5 * dt * problem.reaction);
                    a.set(0, 1, -c);
                } else {
                    a.set(0, 0, 1.0);
                }
                a.set(m, m, 1.0);
                if let LeftBoundary::Dirichlet(b) = &problem.left {
                    rhs[0] = b(t1);
                }
                rhs[m] = 0.0;
                a.solve(&mut rhs)?;
            }
        }
        if let LeftBoundary::Dirichlet(b) = &problem.left {
            rhs[0] = b(t1);
        }
        rhs[m] = 0.0;
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(alloc::format!("finite-difference solution blew up at t = {t1}")));
        }
        y = rhs;
        rows.push(y.clone());
    }
    Ok(FdSolution { h, dt, x, t, rows })
}

/// Density in the edge frame at velocity path `v`.
pub fn solve_fd_rho(
    v: &VelocityPath,
    datum: &InitialDatum,
    kernel: &BranchingKernel,
    cfg: &FdConfig,
) -> Result<FdSolution> {
    let problem = FdProblem {
        velocity: Box::new(|t| interpolate(v.values(), v.dt(), t)),
        reaction: 0.0,
        nonlocal: Some(kernel),
        left: LeftBoundary::Dirichlet(Box::new(|_| 0.0)),
        initial: Box::new(|x| datum.value(x)),
        support: datum.support(),
    };
    solve_fd(&problem, cfg)
}

/// `u` with boundary data `g` sampled on the time grid of `v`.
pub fn solve_fd_u(
    v: &VelocityPath,
    g: &[f64],
    datum: &InitialDatum,
    kernel: &BranchingKernel,
    cfg: &FdConfig,
) -> Result<FdSolution> {
    let problem = FdProblem {
        velocity: Box::new(|t| interpolate(v.values(), v.dt(), t)),
        reaction: 0.0,
        nonlocal: Some(kernel),
        left: LeftBoundary::Dirichlet(Box::new(move |t| interpolate(g, v.dt(), t))),
        initial: Box::new(|x| datum.phi(x)),
        support: datum.support(),
    };
    solve_fd(&problem, cfg)
}

/// `g(t_n) = 2 rate int rho P+` per row of an oracle density.
pub fn fd_flux(rho: &FdSolution, kernel: &BranchingKernel) -> Vec<f64> {
    rho.rows.iter().map(|r| boundary_flux_g(r, rho.h, kernel)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_solver_matches_dense() {
        let n = 7;
        let mut a = Banded::new(n);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(2)..(i + 3).min(n) {
                let v = if i == j { 6.0 } else { 1.0 / (1.0 + i as f64 + 2.0 * j as f64) };
                a.set(i, j, v);
                dense[i][j] = v;
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b: Vec<f64> = (0..n).map(|i| (0..n).map(|j| dense[i][j] * x[j]).sum()).collect();
        a.solve(&mut b).unwrap();
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolation_is_linear() {
        let s = [0.0, 1.0, 4.0];
        assert_eq!(interpolate(&s, 0.5, 0.25), 0.5);
        assert_eq!(interpolate(&s, 0.5, 0.75), 2.5);
        assert_eq!(interpolate(&s, 0.5, 5.0), 4.0);
    }
}
