//! Edge-frame fields at a prescribed velocity path.
//!
//! With `k` the Gaussian of variance `t`, `G` its absorbing image and `N`
//! its reflecting image, the fields solve
//!
//! ```text
//! rho  = I_G[rho0] + d/dx V_N[V rho] + V_G[Nl rho]
//! u    = D[g] + I_G[phi] + d/dx V_N[V u] + V_G[Nl u]
//! u_x  = -2 S[g'] + I_N[phi'] + d/dx V_G[V u_x + Nl u]
//! u_xx = 2 D[B] + I_G[phi''] + d/dx V_N[V u_xx + d/dx Nl u]
//! ```
//!
//! where `I` are initial potentials, `V_G`, `V_N` volume potentials, `D`
//! and `S` the double and single layer, `Nl f(x) = rate int f(y) q(x-y) dy`,
//! `g = u(0, .)` and `B = g' - V u_x(0, .) - Nl u(0)`. Each is advanced one
//! time step at a time; the step's own contribution is resolved by a short
//! Picard loop.

mod boundary;
mod initial;
mod potential;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::front::VelocityPath;
use crate::math;
use crate::model::{boundary_flux_g, BranchingKernel, InitialDatum, NonlocalOperator};

pub(crate) use boundary::{Layer, LayerPotential};
pub(crate) use initial::initial_potential;
pub(crate) use potential::{PotentialKind, VolumeOperator, EVEN, ODD};

/// Requested discretization. `length: None` picks the domain length
/// automatically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub length: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { h: 0.01, dt: 1e-3, t_end: 0.1, length: None }
    }
}

/// Resolved uniform space-time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub h: f64,
    pub dt: f64,
    /// Number of space nodes (`x_0 = 0 .. x_{nodes-1} = length`).
    pub nodes: usize,
    /// Number of time steps (`t_0 = 0 .. t_steps = t_end`).
    pub steps: usize,
    pub length: f64,
}

impl Grid {
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.x(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.t(n)).collect()
    }
}

impl GridSpec {
    /// Smallest admissible domain length for a datum supported on
    /// `[0, support]` and offspring jumps of at most `reach`.
    pub fn min_length(&self, support: f64, reach: f64) -> f64 {
        support + reach * (1.0 + math::ceil(self.t_end)) + 6.0 * math::sqrt(self.t_end)
    }

    /// Validates the spec and fixes the node counts.
    pub fn resolve(&self, support: f64, reach: f64) -> Result<Grid> {
        if self.dt < self.h * self.h {
            return Err(Error::Grid(alloc::format!(
                "dt = {} is below h^2 = {}; the one-step propagator needs dt >= h^2",
                self.dt,
                self.h * self.h
            )));
        }
        self.resolve_any_ratio(support, reach)
    }

    /// As [`GridSpec::resolve`] without the `dt >= h^2` requirement.
    pub fn resolve_any_ratio(&self, support: f64, reach: f64) -> Result<Grid> {
        let GridSpec { h, dt, t_end, length } = *self;
        for (name, v) in [("h", h), ("dt", dt), ("t_end", t_end)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Grid(alloc::format!("{name} must be positive, got {v}")));
            }
        }
        let steps_f = t_end / dt;
        let steps = math::round(steps_f) as usize;
        if steps == 0 || math::abs(steps_f - steps as f64) > 1e-6 * steps_f.max(1.0) {
            return Err(Error::Grid(alloc::format!("t_end = {t_end} is not a whole number of steps dt = {dt}")));
        }
        let need = self.min_length(support, reach);
        let length = match length {
            Some(l) => {
                if !(l >= need) {
                    return Err(Error::Grid(alloc::format!("domain length {l} is below the required {need}")));
                }
                l
            }
            None => need,
        };
        let mut intervals = math::ceil(length / h - 1e-9) as usize;
        if intervals % 2 == 1 {
            intervals += 1;
        }
        Ok(Grid { h, dt, nodes: intervals + 1, steps, length: intervals as f64 * h })
    }
}

/// Fields on the space-time grid. Rows are indexed by time step, columns
/// by space node; empty vectors mark fields not computed yet.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub grid: Grid,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub u_x: Vec<Vec<f64>>,
    pub u_xx: Vec<Vec<f64>>,
    pub g: Vec<f64>,
    pub g_prime: Vec<f64>,
}

impl FieldGrid {
    pub fn empty(grid: Grid) -> Self {
        Self {
            grid,
            x: grid.xs(),
            t: grid.ts(),
            rho: Vec::new(),
            u: Vec::new(),
            u_x: Vec::new(),
            u_xx: Vec::new(),
            g: Vec::new(),
            g_prime: Vec::new(),
        }
    }
}

/// Inner-loop settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Sup-norm change that ends the per-step Picard loop.
    pub inner_tol: f64,
    pub max_inner: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { inner_tol: 1e-10, max_inner: 50 }
    }
}

/// Grid-dependent operators shared by every equation marched on one grid.
#[derive(Debug, Clone)]
pub(crate) struct Stencils {
    pub(crate) grid: Grid,
    pub(crate) opts: SolverOptions,
    pub(crate) dxn: VolumeOperator,
    pub(crate) dxg: VolumeOperator,
    pub(crate) valg: VolumeOperator,
    pub(crate) double: LayerPotential,
    pub(crate) single: LayerPotential,
}

/// Drift potential of a marched equation: source `V Y + known`.
pub(crate) struct Drift<'a> {
    pub(crate) op: &'a VolumeOperator,
    pub(crate) known: Option<&'a [Vec<f64>]>,
}

impl Stencils {
    pub(crate) fn new(grid: Grid, opts: SolverOptions) -> Self {
        let (h, dt, m, n) = (grid.h, grid.dt, grid.nodes, grid.steps);
        Self {
            grid,
            opts,
            dxn: VolumeOperator::new(PotentialKind::DxN, h, dt, m),
            dxg: VolumeOperator::new(PotentialKind::DxG, h, dt, m),
            valg: VolumeOperator::new(PotentialKind::ValueG, h, dt, m),
            double: LayerPotential::new(Layer::Double, h, dt, m, n),
            single: LayerPotential::new(Layer::Single, h, dt, m, n),
        }
    }

    /// Rows of a layer potential with data sampled on the time grid.
    pub(crate) fn layer_rows(&self, layer: Layer, data: &[f64], scale: f64) -> Vec<Vec<f64>> {
        let lp = match layer {
            Layer::Double => &self.double,
            Layer::Single => &self.single,
        };
        (0..=self.grid.steps)
            .map(|n| {
                let mut row = alloc::vec![0.0; self.grid.nodes];
                lp.apply(data, n, &mut row);
                row.iter_mut().for_each(|r| *r *= scale);
                row
            })
            .collect()
    }

    /// Marches `Y_n = base_n + drift_n + nonlocal_n` for `n >= 1` from
    /// `Y_0 = base_0`.
    pub(crate) fn march(
        &self,
        v: &[f64],
        base: &[Vec<f64>],
        drift: Drift<'_>,
        nonlocal: Option<&NonlocalOperator>,
    ) -> Result<Vec<Vec<f64>>> {
        let m = self.grid.nodes;
        let steps = self.grid.steps;
        let nonlocal = nonlocal.filter(|op| op.is_active());
        let mut rows = Vec::with_capacity(steps + 1);
        rows.push(base[0].clone());

        let drift_src = |n: usize, y: &[f64], out: &mut [f64]| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = v[n] * y[i] + drift.known.map_or(0.0, |k| k[n][i]);
            }
        };

        let mut d1_prev = alloc::vec![0.0; m];
        let mut d2_prev = alloc::vec![0.0; m];
        let mut f1_prev = alloc::vec![0.0; m];
        let mut f2_prev = alloc::vec![0.0; m];
        drift_src(0, &base[0], &mut f1_prev);
        if let Some(op) = nonlocal {
            op.apply(&base[0], &mut f2_prev);
        }
        let mut h1 = alloc::vec![0.0; m];
        let mut h2 = alloc::vec![0.0; m];
        let mut d1 = alloc::vec![0.0; m];
        let mut d2 = alloc::vec![0.0; m];
        let mut f1 = alloc::vec![0.0; m];
        let mut f2 = alloc::vec![0.0; m];

        for n in 1..=steps {
            drift.op.history(&d1_prev, &f1_prev, &mut h1);
            if nonlocal.is_some() {
                self.valg.history(&d2_prev, &f2_prev, &mut h2);
            }
            let mut y = rows[n - 1].clone();
            let mut next = alloc::vec![0.0; m];
            let mut converged = false;
            let mut change = f64::INFINITY;
            for _ in 0..self.opts.max_inner {
                drift_src(n, &y, &mut f1);
                drift.op.complete(&h1, &f1, &mut d1);
                if let Some(op) = nonlocal {
                    op.apply(&y, &mut f2);
                    self.valg.complete(&h2, &f2, &mut d2);
                }
                for i in 0..m {
                    next[i] = base[n][i] + d1[i] + if nonlocal.is_some() { d2[i] } else { 0.0 };
                }
                change = math::max_abs_diff(&next, &y);
                core::mem::swap(&mut y, &mut next);
                if change <= self.opts.inner_tol {
                    converged = true;
                    break;
                }
            }
            if !converged || !change.is_finite() {
                return Err(Error::StepSize {
                    step: n,
                    t: self.grid.t(n),
                    iterations: self.opts.max_inner,
                    last_change: change,
                });
            }
            core::mem::swap(&mut d1_prev, &mut d1);
            core::mem::swap(&mut f1_prev, &mut f1);
            if nonlocal.is_some() {
                core::mem::swap(&mut d2_prev, &mut d2);
                core::mem::swap(&mut f2_prev, &mut f2);
            }
            rows.push(y);
        }
        Ok(rows)
    }
}

/// Solver for the nonlocal problem on one grid. Everything that does not
/// depend on the velocity path is precomputed.
#[derive(Debug, Clone)]
pub struct FrameSolver {
    stencils: Stencils,
    kernel: BranchingKernel,
    datum: InitialDatum,
    nonlocal: NonlocalOperator,
    nonlocal_dx: NonlocalOperator,
    init_rho: Vec<Vec<f64>>,
    init_u: Vec<Vec<f64>>,
    init_ux: Vec<Vec<f64>>,
    init_uxx: Vec<Vec<f64>>,
    p_plus: Vec<f64>,
    p2: Vec<f64>,
    q_neg: Vec<f64>,
    dq_neg: Vec<f64>,
}

impl FrameSolver {
    pub fn new(datum: &InitialDatum, kernel: &BranchingKernel, spec: &GridSpec, opts: SolverOptions) -> Result<Self> {
        let grid = spec.resolve(datum.support(), kernel.b())?;
        let (h, dt, m, n) = (grid.h, grid.dt, grid.nodes, grid.steps);
        let s = datum.support();
        let init = |k: usize, parity| initial_potential(h, dt, m, n, s, parity, |x| datum.derivative(k, x));
        let xs = grid.xs();
        Ok(Self {
            stencils: Stencils::new(grid, opts),
            nonlocal: NonlocalOperator::new(kernel, h, m),
            nonlocal_dx: NonlocalOperator::derivative(kernel, h, m),
            init_rho: init(0, ODD),
            init_u: init(1, ODD),
            init_ux: init(2, EVEN),
            init_uxx: init(3, ODD),
            p_plus: xs.iter().map(|&y| kernel.p_plus(y)).collect(),
            p2: xs.iter().map(|&y| kernel.p2(y)).collect(),
            q_neg: xs.iter().map(|&y| kernel.q(-y)).collect(),
            dq_neg: xs.iter().map(|&y| kernel.dq(-y)).collect(),
            kernel: kernel.clone(),
            datum: datum.clone(),
        })
    }

    pub fn grid(&self) -> Grid {
        self.stencils.grid
    }

    pub fn kernel(&self) -> &BranchingKernel {
        &self.kernel
    }

    pub fn datum(&self) -> &InitialDatum {
        &self.datum
    }

    fn check_path(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.grid().steps + 1 {
            return Err(Error::Grid(alloc::format!(
                "velocity path has {} samples, grid has {} time nodes",
                v.len(),
                self.grid().steps + 1
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("velocity path is not finite".into()));
        }
        Ok(())
    }

    /// Density in the edge frame.
    pub fn rho(&self, v: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_path(v)?;
        let s = &self.stencils;
        s.march(v, &self.init_rho, Drift { op: &s.dxn, known: None }, Some(&self.nonlocal))
    }

    /// `g(t_n) = 2 rate int rho P+`.
    pub fn flux(&self, rho: &[Vec<f64>]) -> Vec<f64> {
        let h = self.grid().h;
        rho.iter().map(|r| boundary_flux_g(r, h, &self.kernel)).collect()
    }

    /// `g'(t_n)`, obtained by differentiating `g` under the integral and
    /// using the equation for `rho`.
    pub fn flux_rate(&self, rho: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        flux_rate(rho, v, self.grid().h, &self.kernel, |y| (self.p_plus[y], self.p2[y], self.q_neg[y], self.dq_neg[y]))
    }

    /// `u = rho_x` from its own representation with trace `g`.
    pub fn u(&self, v: &[f64], g: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_path(v)?;
        let s = &self.stencils;
        let mut base = s.layer_rows(Layer::Double, g, 1.0);
        add_rows(&mut base, &self.init_u);
        base[0] = self.init_u[0].clone();
        s.march(v, &base, Drift { op: &s.dxn, known: None }, Some(&self.nonlocal))
    }

    /// `u_x` from the single-layer representation.
    pub fn u_x(&self, v: &[f64], u: &[Vec<f64>], g_prime: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_path(v)?;
        let s = &self.stencils;
        let mut base = s.layer_rows(Layer::Single, g_prime, -2.0);
        add_rows(&mut base, &self.init_ux);
        base[0] = self.init_ux[0].clone();
        let known = self.apply_rows(&self.nonlocal, u);
        s.march(v, &base, Drift { op: &s.dxg, known: Some(&known) }, None)
    }

    /// Boundary data `B = g' - V u_x(0) - Nl u(0)` of `u_xx / 2`.
    pub fn u_xx_trace(&self, v: &[f64], u: &[Vec<f64>], u_x: &[Vec<f64>], g_prime: &[f64]) -> Vec<f64> {
        let h = self.grid().h;
        let rate = self.kernel.rate();
        (0..u.len())
            .map(|n| {
                let w: Vec<f64> = u[n].iter().zip(&self.q_neg).map(|(a, b)| a * b).collect();
                g_prime[n] - v[n] * u_x[n][0] - rate * math::simpson(&w, h)
            })
            .collect()
    }

    /// `u_xx`; continuous away from the corner `(0, 0)`.
    pub fn u_xx(&self, v: &[f64], u: &[Vec<f64>], u_x: &[Vec<f64>], g_prime: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_path(v)?;
        let s = &self.stencils;
        let b = self.u_xx_trace(v, u, u_x, g_prime);
        let mut base = s.layer_rows(Layer::Double, &b, 2.0);
        add_rows(&mut base, &self.init_uxx);
        base[0] = self.init_uxx[0].clone();
        let known = self.apply_rows(&self.nonlocal_dx, u);
        s.march(v, &base, Drift { op: &s.dxn, known: Some(&known) }, None)
    }

    fn apply_rows(&self, op: &NonlocalOperator, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                let mut out = alloc::vec![0.0; r.len()];
                op.apply(r, &mut out);
                out
            })
            .collect()
    }

    /// Fields needed by the velocity map: `rho`, `g`, `g'`, `u`, `u_x`.
    pub fn solve_for_velocity(&self, v: &[f64]) -> Result<FieldGrid> {
        let mut f = FieldGrid::empty(self.grid());
        f.rho = self.rho(v)?;
        f.g = self.flux(&f.rho);
        f.g_prime = self.flux_rate(&f.rho, v);
        f.u = self.u(v, &f.g)?;
        f.u_x = self.u_x(v, &f.u, &f.g_prime)?;
        Ok(f)
    }

    /// Every field, `u_xx` included.
    pub fn solve(&self, v: &[f64]) -> Result<FieldGrid> {
        let mut f = self.solve_for_velocity(v)?;
        f.u_xx = self.u_xx(v, &f.u, &f.u_x, &f.g_prime)?;
        Ok(f)
    }
}

fn add_rows(dst: &mut [Vec<f64>], src: &[Vec<f64>]) {
    for (d, s) in dst.iter_mut().zip(src) {
        for (a, b) in d.iter_mut().zip(s) {
            *a += b;
        }
    }
}

/// `g' = -rho_x(0) P+(0) - int rho q'(-y) - 2 V int rho q(-y) + 2 int rho P2`,
/// all integrals scaled by the rate.
fn flux_rate<F>(rho: &[Vec<f64>], v: &[f64], h: f64, kernel: &BranchingKernel, tab: F) -> Vec<f64>
where
    F: Fn(usize) -> (f64, f64, f64, f64),
{
    let rate = kernel.rate();
    if rate == 0.0 {
        return alloc::vec![0.0; rho.len()];
    }
    rho.iter()
        .zip(v)
        .map(|(r, &vn)| {
            let m = r.len();
            let mut w_dq = alloc::vec![0.0; m];
            let mut w_q = alloc::vec![0.0; m];
            let mut w_p2 = alloc::vec![0.0; m];
            for (j, &rj) in r.iter().enumerate() {
                let (_, p2, q, dq) = tab(j);
                w_dq[j] = rj * dq;
                w_q[j] = rj * q;
                w_p2[j] = rj * p2;
            }
            let slope = math::left_derivative4(r, h);
            let p0 = tab(0).0;
            rate * (-slope * p0 - math::simpson(&w_dq, h) - 2.0 * vn * math::simpson(&w_q, h)
                + 2.0 * math::simpson(&w_p2, h))
        })
        .collect()
}

fn build(datum: &InitialDatum, kernel: &BranchingKernel, spec: &GridSpec) -> Result<FrameSolver> {
    FrameSolver::new(datum, kernel, spec, SolverOptions::default())
}

/// Density field at velocity path `v`.
pub fn solve_rho(
    v: &VelocityPath,
    datum: &InitialDatum,
    kernel: &BranchingKernel,
    spec: &GridSpec,
) -> Result<FieldGrid> {
    let solver = build(datum, kernel, spec)?;
    let mut f = FieldGrid::empty(solver.grid());
    f.rho = solver.rho(v.values())?;
    Ok(f)
}

/// Adds `g` and `u` to a field holding `rho`.
pub fn solve_u(
    v: &VelocityPath,
    mut field: FieldGrid,
    datum: &InitialDatum,
    kernel: &BranchingKernel,
    spec: &GridSpec,
) -> Result<FieldGrid> {
    let solver = build(datum, kernel, spec)?;
    require(&field.rho, "rho")?;
    field.g = solver.flux(&field.rho);
    field.u = solver.u(v.values(), &field.g)?;
    Ok(field)
}

/// `g'` on the time grid from the density field.
pub fn compute_g_prime(rho_field: &FieldGrid, v: &VelocityPath, kernel: &BranchingKernel) -> Vec<f64> {
    let h = rho_field.grid.h;
    let tab = |j: usize| {
        let y = j as f64 * h;
        (kernel.p_plus(y), kernel.p2(y), kernel.q(-y), kernel.dq(-y))
    };
    flux_rate(&rho_field.rho, v.values(), h, kernel, tab)
}

/// Adds `g'` and `u_x` to a field holding `rho` and `u`.
pub fn compute_u_x(
    v: &VelocityPath,
    mut field: FieldGrid,
    datum: &InitialDatum,
    kernel: &BranchingKernel,
    spec: &GridSpec,
) -> Result<FieldGrid> {
    let solver = build(datum, kernel, spec)?;
    require(&field.u, "u")?;
    if field.g_prime.is_empty() {
        require(&field.rho, "rho")?;
        field.g_prime = solver.flux_rate(&field.rho, v.values());
    }
    field.u_x = solver.u_x(v.values(), &field.u, &field.g_prime)?;
    Ok(field)
}

/// Adds `u_xx` to a field holding `rho`, `u`, `u_x` and `g'`.
pub fn compute_u_xx(
    v: &VelocityPath,
    mut field: FieldGrid,
    datum: &InitialDatum,
    kernel: &BranchingKernel,
    spec: &GridSpec,
) -> Result<FieldGrid> {
    let solver = build(datum, kernel, spec)?;
    require(&field.u_x, "u_x")?;
    require(&field.g_prime, "g_prime")?;
    field.u_xx = solver.u_xx(v.values(), &field.u, &field.u_x, &field.g_prime)?;
    Ok(field)
}

fn require<T>(v: &[T], name: &str) -> Result<()> {
    if v.is_empty() {
        Err(Error::Domain(alloc::format!("field `{name}` has not been computed")))
    } else {
        Ok(())
    }
}
