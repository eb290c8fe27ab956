//! Velocity map, fixed-point iteration for the front speed, lab-frame
//! reconstruction and the solution contract report.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::frame_solver::{FieldGrid, FrameSolver, GridSpec, SolverOptions};
use crate::math;
use crate::model::{BranchingKernel, InitialDatum};

/// Velocity samples on the uniform time grid `t_n = n dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityPath {
    values: Vec<f64>,
    dt: f64,
    v0: f64,
    /// Hölder-1/2 budget; `f64::INFINITY` when unconstrained.
    pub budget: f64,
}

impl VelocityPath {
    /// Path pinned to `values[0]`.
    pub fn from_values(values: Vec<f64>, dt: f64) -> Result<Self> {
        if values.is_empty() || !(dt > 0.0) {
            return Err(Error::Domain("velocity path needs samples and dt > 0".into()));
        }
        let v0 = values[0];
        Ok(Self { values, dt, v0, budget: f64::INFINITY })
    }

    /// Constant path `v0` with `steps + 1` samples.
    pub fn constant(v0: f64, dt: f64, steps: usize) -> Self {
        Self { values: alloc::vec![v0; steps + 1], dt, v0, budget: f64::INFINITY }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|n| n as f64 * self.dt).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `X(t_n) = int_0^t_n V` by the trapezoid rule.
    pub fn integrate(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        x.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * self.dt * (w[0] + w[1]);
            x.push(acc);
        }
        x
    }
}

/// `max_{m<n} |V(t_n) - V(t_m)| / sqrt(t_n - t_m)`.
pub fn holder_seminorm(path: &VelocityPath) -> f64 {
    math::holder_half(&path.times(), &path.values)
}

/// `V0 = (-rho0''(0)/2 + int int rho0' p) / rho0'(0)`.
pub fn initial_velocity(datum: &InitialDatum, kernel: &BranchingKernel) -> Result<f64> {
    let slope = datum.phi(0.0);
    if math::abs(slope) < 1e-12 {
        return Err(Error::DegenerateDatum(alloc::format!(
            "rho0'(0) = {slope} is too small for the velocity quotient"
        )));
    }
    let flux = kernel.rate() * datum.integrate_against(1, &[kernel.a()], |y| kernel.p_plus(y));
    Ok((-0.5 * datum.derivative(2, 0.0) + flux) / slope)
}

/// Settings of the outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Damping `theta` in `(0, 1]`.
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// `min |g|` floor as a fraction of `rho0'(0)`.
    pub g_floor_fraction: f64,
    /// How many times the horizon may be halved on boundary degeneracy.
    pub max_halvings: usize,
    pub inner: SolverOptions,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            theta: 1.0,
            tol: 1e-6,
            max_iter: 200,
            g_floor_fraction: 0.1,
            max_halvings: 3,
            inner: SolverOptions::default(),
        }
    }
}

/// Converged front and fields.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontSolution {
    pub velocity: VelocityPath,
    /// `X(t_n)`.
    pub front: Vec<f64>,
    pub fields: FieldGrid,
    /// `|Q[V^k] - V^k|_inf` per outer iteration.
    pub residuals: Vec<f64>,
    /// Horizon actually solved (after any halving).
    pub t_end: f64,
    pub halvings: usize,
}

impl FrontSolution {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }
}

/// Velocity map on a fixed grid.
#[derive(Debug, Clone)]
pub struct VelocityMap {
    solver: FrameSolver,
    v0: f64,
    g_floor: f64,
}

impl VelocityMap {
    pub fn new(
        datum: &InitialDatum,
        kernel: &BranchingKernel,
        spec: &GridSpec,
        opts: &FixedPointOptions,
    ) -> Result<Self> {
        let v0 = initial_velocity(datum, kernel)?;
        let solver = FrameSolver::new(datum, kernel, spec, opts.inner)?;
        Ok(Self { solver, v0, g_floor: opts.g_floor_fraction * math::abs(datum.phi(0.0)) })
    }

    pub fn solver(&self) -> &FrameSolver {
        &self.solver
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn constant_path(&self) -> VelocityPath {
        let g = self.solver.grid();
        VelocityPath::constant(self.v0, g.dt, g.steps)
    }

    /// `Q[V](t) = (-u_x(0,t)/2 + int int u p) / u(0,t)`, pinned to `V0` at
    /// `t = 0`, together with the fields it was built from.
    pub fn apply(&self, v: &[f64]) -> Result<(Vec<f64>, FieldGrid)> {
        let fields = self.solver.solve_for_velocity(v)?;
        let q = self.quotient(&fields)?;
        Ok((q, fields))
    }

    fn quotient(&self, fields: &FieldGrid) -> Result<Vec<f64>> {
        let (n_min, min_g) = fields
            .g
            .iter()
            .enumerate()
            .map(|(n, g)| (n, math::abs(*g)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if !(min_g >= self.g_floor) {
            return Err(Error::BoundaryDegeneracy { min_g, floor: self.g_floor, t: fields.t[n_min] });
        }
        let kernel = self.solver.kernel();
        let h = fields.grid.h;
        let pp: Vec<f64> = fields.x.iter().map(|&y| kernel.p_plus(y)).collect();
        let mut q = Vec::with_capacity(fields.g.len());
        for n in 0..fields.g.len() {
            if n == 0 {
                q.push(self.v0);
                continue;
            }
            let w: Vec<f64> = fields.u[n].iter().zip(&pp).map(|(a, b)| a * b).collect();
            let flux = kernel.rate() * math::simpson(&w, h);
            q.push((-0.5 * fields.u_x[n][0] + flux) / fields.g[n]);
        }
        Ok(q)
    }

    /// Damped Picard iteration from `start`.
    pub fn iterate(&self, start: VelocityPath, opts: &FixedPointOptions) -> Result<(VelocityPath, Vec<f64>)> {
        if !(opts.theta > 0.0 && opts.theta <= 1.0) {
            return Err(Error::Config(alloc::format!("damping must lie in (0, 1], got {}", opts.theta)));
        }
        let dt = start.dt();
        let mut v = start.values().to_vec();
        let mut history = Vec::new();
        for _ in 0..opts.max_iter {
            let (q, _) = self.apply(&v)?;
            let r = math::max_abs_diff(&q, &v);
            history.push(r);
            if !r.is_finite() {
                break;
            }
            if r <= opts.tol {
                let mut path = VelocityPath::from_values(v, dt)?;
                path.budget = start.budget;
                return Ok((path, history));
            }
            for (vi, qi) in v.iter_mut().zip(&q) {
                *vi = (1.0 - opts.theta) * *vi + opts.theta * qi;
            }
        }
        Err(Error::NonConvergence {
            iterations: history.len(),
            last_residual: history.last().copied().unwrap_or(f64::NAN),
            history,
        })
    }
}

/// `Q[V]` for a single path.
pub fn q_map(
    v: &VelocityPath,
    datum: &InitialDatum,
    kernel: &BranchingKernel,
    spec: &GridSpec,
) -> Result<VelocityPath> {
    let map = VelocityMap::new(datum, kernel, spec, &FixedPointOptions::default())?;
    let (q, _) = map.apply(v.values())?;
    VelocityPath::from_values(q, v.dt())
}

/// Fixed point of the velocity map from the constant path `V0`. The
/// horizon is halved on boundary degeneracy.
pub fn fixed_point_velocity(
    datum: &InitialDatum,
    kernel: &BranchingKernel,
    spec: &GridSpec,
    opts: &FixedPointOptions,
) -> Result<FrontSolution> {
    fixed_point_from(datum, kernel, spec, opts, |map| map.constant_path())
}

/// Fixed point from a custom starting path.
pub fn fixed_point_from<F>(
    datum: &InitialDatum,
    kernel: &BranchingKernel,
    spec: &GridSpec,
    opts: &FixedPointOptions,
    start: F,
) -> Result<FrontSolution>
where
    F: Fn(&VelocityMap) -> VelocityPath,
{
    let mut spec = *spec;
    let mut halvings = 0;
    loop {
        let attempt = VelocityMap::new(datum, kernel, &spec, opts).and_then(|map| {
            let (velocity, residuals) = map.iterate(start(&map), opts)?;
            let fields = map.solver().solve(velocity.values())?;
            Ok(FrontSolution { front: velocity.integrate(), velocity, fields, residuals, t_end: spec.t_end, halvings })
        });
        match attempt {
            Err(Error::BoundaryDegeneracy { .. }) if halvings < opts.max_halvings => {
                spec.t_end *= 0.5;
                halvings += 1;
            }
            other => return other,
        }
    }
}

/// Lab-frame density `rho_lab(x, t) = rho(x - X_t, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabFrame {
    pub t: Vec<f64>,
    pub front: Vec<f64>,
    /// Edge-frame nodes; the lab position of node `i` at step `n` is
    /// `front[n] + x[i]`.
    pub x: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
    pub h: f64,
}

impl LabFrame {
    /// `rho_lab(x, t_n)` by linear interpolation; zero left of the front.
    pub fn density(&self, n: usize, x: f64) -> f64 {
        let y = x - self.front[n];
        if y < 0.0 {
            return 0.0;
        }
        let pos = y / self.h;
        let i = pos as usize;
        let row = &self.rho[n];
        if i + 1 >= row.len() {
            return 0.0;
        }
        let w = pos - i as f64;
        (1.0 - w) * row[i] + w * row[i + 1]
    }

    /// Average of `rho_lab(., t_n)` over `[lo, hi]` (piecewise-linear
    /// interpolant integrated exactly).
    pub fn bin_average(&self, n: usize, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let mut pts = alloc::vec![lo, hi];
        let x0 = self.front[n];
        let first = math::ceil((lo - x0) / self.h).max(0.0) as usize;
        let mut i = first;
        while i < self.x.len() {
            let x = x0 + self.x[i];
            if x >= hi {
                break;
            }
            if x > lo {
                pts.push(x);
            }
            i += 1;
        }
        if x0 > lo && x0 < hi {
            pts.push(x0);
        }
        pts.sort_by(f64::total_cmp);
        let mut s = 0.0;
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            // both ends are on the same linear piece; nudge inside for the
            // left-of-front jump
            let fa = self.density(n, a + 1e-14 * (b - a));
            let fb = self.density(n, b - 1e-14 * (b - a));
            s += 0.5 * (b - a) * (fa + fb);
        }
        s / (hi - lo)
    }

    /// `int rho_lab(., t_n)`.
    pub fn mass(&self, n: usize) -> f64 {
        math::simpson(&self.rho[n], self.h)
    }
}

/// Shifts the edge-frame density by the front path.
pub fn reconstruct_lab_frame(sol: &FrontSolution) -> LabFrame {
    LabFrame {
        t: sol.fields.t.clone(),
        front: sol.front.clone(),
        x: sol.fields.x.clone(),
        rho: sol.fields.rho.clone(),
        h: sol.fields.grid.h,
    }
}

/// One named check of the contract report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value.is_finite() && value <= tolerance }
    }
}

/// Residuals of the converged solution against the free boundary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractReport {
    pub checks: Vec<Check>,
    pub holder_seminorm: f64,
}

impl ContractReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tolerances of the contract report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractTolerances {
    pub fixed_point: f64,
    pub boundary: f64,
    pub mass: f64,
    pub identity: f64,
    /// Multiplier `c` of the grid envelope `c (h^2 + dt)`.
    pub envelope_factor: f64,
    pub holder_budget: f64,
}

impl Default for ContractTolerances {
    fn default() -> Self {
        Self {
            fixed_point: 1e-6,
            boundary: 1e-6,
            mass: 1e-3,
            identity: 1e-3,
            envelope_factor: 5.0,
            holder_budget: f64::INFINITY,
        }
    }
}

/// Sup of `|u - D rho|` with `D` the second-order difference.
pub fn u_minus_rho_x(fields: &FieldGrid) -> f64 {
    let h = fields.grid.h;
    let mut worst = 0.0f64;
    for (r, u) in fields.rho.iter().zip(&fields.u) {
        for i in 0..r.len() {
            worst = worst.max(math::abs(u[i] - math::derivative_at(r, i, h)));
        }
    }
    worst
}

/// `max |u_x + int_x^inf u_xx|` over nodes with `x + sqrt(t) >= 3h`.
pub fn identity_residual(fields: &FieldGrid) -> f64 {
    let h = fields.grid.h;
    let mut worst = 0.0f64;
    for n in 0..fields.u_xx.len() {
        let tails = math::tail_integrals(&fields.u_xx[n], h);
        let t = fields.t[n];
        for i in 0..tails.len() {
            if fields.x[i] + math::sqrt(t) < 3.0 * h {
                continue;
            }
            worst = worst.max(math::abs(fields.u_x[n][i] + tails[i]));
        }
    }
    worst
}

/// Finite-difference residual of `rho_t = rho_xx/2 + V rho_x + Nl rho` at
/// interior nodes, centred in time and space. The first step is skipped:
/// its time stencil reaches `t = 0`, where the corner layer at `x = 0`
/// makes `rho_t` unbounded.
pub fn pde_residual(fields: &FieldGrid, v: &[f64], kernel: &BranchingKernel) -> f64 {
    let grid = fields.grid;
    let (h, dt) = (grid.h, grid.dt);
    let op = crate::model::NonlocalOperator::new(kernel, h, grid.nodes);
    let mut nl = alloc::vec![0.0; grid.nodes];
    let mut worst = 0.0f64;
    for n in 2..grid.steps {
        let r = &fields.rho[n];
        op.apply(r, &mut nl);
        for i in 1..grid.nodes - 1 {
            let rt = (fields.rho[n + 1][i] - fields.rho[n - 1][i]) / (2.0 * dt);
            let rxx = (r[i + 1] - 2.0 * r[i] + r[i - 1]) / (h * h);
            let rx = (r[i + 1] - r[i - 1]) / (2.0 * h);
            worst = worst.max(math::abs(rt - 0.5 * rxx - v[n] * rx - nl[i]));
        }
    }
    worst
}

/// Evaluates the contract checks at a converged solution.
pub fn verify_theorem_contract(
    sol: &FrontSolution,
    kernel: &BranchingKernel,
    tol: &ContractTolerances,
) -> ContractReport {
    let f = &sol.fields;
    let envelope = tol.envelope_factor * (f.grid.h * f.grid.h + f.grid.dt);
    let lab = reconstruct_lab_frame(sol);
    let boundary = f.rho.iter().fold(0.0f64, |m, r| m.max(math::abs(r[0])));
    let mass = (0..f.rho.len()).fold(0.0f64, |m, n| m.max(math::abs(lab.mass(n) - 1.0)));
    let holder = holder_seminorm(&sol.velocity);
    let mut checks = alloc::vec![
        Check::new("fixed_point_residual", sol.final_residual(), tol.fixed_point),
        Check::new("boundary_residual", boundary, tol.boundary),
        Check::new("mass_residual", mass, tol.mass),
        Check::new("u_minus_rho_x", u_minus_rho_x(f), envelope),
        Check::new("pde_residual", pde_residual(f, sol.velocity.values(), kernel), envelope),
        Check::new("holder_seminorm", holder, tol.holder_budget),
    ];
    if !f.u_xx.is_empty() {
        checks.push(Check::new("identity_residual", identity_residual(f), tol.identity));
    }
    ContractReport { checks, holder_seminorm: holder }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holder_examples() {
        let dt = 0.01;
        let c = VelocityPath::constant(0.3, dt, 10);
        assert_eq!(holder_seminorm(&c), 0.0);
        let sq = VelocityPath::from_values((0..=10).map(|n| (n as f64 * dt).sqrt()).collect(), dt).unwrap();
        assert!((holder_seminorm(&sq) - 1.0).abs() < 1e-12);
        let lin = VelocityPath::from_values((0..=10).map(|n| 2.0 * n as f64 * dt).collect(), dt).unwrap();
        assert!((holder_seminorm(&lin) - 2.0 * 0.1f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_front() {
        let p = VelocityPath::from_values(vec![0.0, 1.0, 2.0], 0.5).unwrap();
        assert_eq!(p.integrate(), vec![0.0, 0.25, 1.0]);
    }
}
