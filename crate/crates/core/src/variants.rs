//! Related free-boundary problems with a local reaction: the local N-BBM
//! chain and the two boundary-value variants.
//!
//! Each reduces to one Dirichlet problem in the edge frame,
//!
//! ```text
//! y_t = y_xx / 2 + V y_x,   y(0, t) = b(t),   y(., 0) = psi,
//! V(t) = c(t) y_x(0, t),
//! ```
//!
//! after dividing out `e^t` from the reaction. The table below lists the
//! data (`a` and `beta` are the boundary constants, `rho0` the datum).
//!
//! | kind        | field            | `psi`               | `b`       | `c`          |
//! |-------------|------------------|---------------------|-----------|--------------|
//! | local N-BBM | `u = w_x`        | `rho0'`             | `2 e^-t`  | `-e^t / 4`   |
//! | alpha case  | `v`              | `-rho0'' / (2 a)`   | `e^-t`    | `-e^t / 2`   |
//! | beta case   | `v`              | `rho0' / beta`      | `e^-t`    | `-e^t / 2`   |
//!
//! For the two boundary-value cases the reported field is `v = e^t y`, so
//! `v(0, t) = 1`. With the reaction switched off (a test mode) `e^t`
//! disappears from every column.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::frame_solver::{initial_potential, Drift, Grid, GridSpec, Layer, Stencils, EVEN, ODD};
use crate::front::{Check, ContractReport, FixedPointOptions, VelocityPath};
use crate::math;
use crate::model::{InitialDatum, Poly};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantKind {
    LocalNbbm,
    BbdAlpha,
    BbdBeta,
}

impl VariantKind {
    pub fn name(self) -> &'static str {
        match self {
            VariantKind::LocalNbbm => "local_nbbm",
            VariantKind::BbdAlpha => "bbd_alpha",
            VariantKind::BbdBeta => "bbd_beta",
        }
    }
}

impl core::str::FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local_nbbm" => Ok(VariantKind::LocalNbbm),
            "bbd_alpha" => Ok(VariantKind::BbdAlpha),
            "bbd_beta" => Ok(VariantKind::BbdBeta),
            other => Err(Error::Config(alloc::format!(
                "unknown variant `{other}` (expected local_nbbm, bbd_alpha or bbd_beta)"
            ))),
        }
    }
}

/// A validated variant problem.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantSpec {
    kind: VariantKind,
    constant: f64,
    datum: InitialDatum,
    reaction: bool,
}

fn near(a: f64, b: f64, scale: f64) -> bool {
    math::abs(a - b) <= 1e-9 * scale.max(1.0)
}

impl VariantSpec {
    /// Local N-BBM with `rho0(0) = 0` and `rho0'(0) = 2`.
    pub fn local_nbbm(datum: InitialDatum) -> Result<Self> {
        let (r0, r1) = (datum.value(0.0), datum.derivative(1, 0.0));
        if !near(r0, 0.0, 1.0) || !near(r1, 2.0, 2.0) {
            return Err(Error::InvalidDatum(alloc::format!(
                "local N-BBM needs rho0(0) = 0 and rho0'(0) = 2, got {r0} and {r1}"
            )));
        }
        Ok(Self { kind: VariantKind::LocalNbbm, constant: 2.0, datum, reaction: true })
    }

    /// Boundary value `rho(X_t) = alpha` with `rho_x(X_t) = 0`.
    pub fn bbd_alpha(alpha: f64, datum: InitialDatum) -> Result<Self> {
        if !(alpha.is_finite() && alpha != 0.0) {
            return Err(Error::Config(alloc::format!("bbd_alpha needs alpha != 0, got {alpha}")));
        }
        let d = |k| datum.derivative(k, 0.0);
        let s = math::abs(alpha);
        if !near(d(0), alpha, s) || !near(d(1), 0.0, s) || !near(d(2), -2.0 * alpha, s) {
            return Err(Error::InvalidDatum(alloc::format!(
                "bbd_alpha needs rho0(0) = alpha, rho0'(0) = 0, rho0''(0) = -2 alpha; got {}, {}, {}",
                d(0),
                d(1),
                d(2)
            )));
        }
        let edge = datum.derivative(4, datum.support());
        if !near(edge, 0.0, s) {
            return Err(Error::InvalidDatum(alloc::format!(
                "bbd_alpha needs a C4 datum; rho0'''' = {edge} at the support edge"
            )));
        }
        Ok(Self { kind: VariantKind::BbdAlpha, constant: alpha, datum, reaction: true })
    }

    /// Boundary slope `rho_x(X_t) = beta` with `rho(X_t) = 0`.
    pub fn bbd_beta(beta: f64, datum: InitialDatum) -> Result<Self> {
        if !(beta.is_finite() && beta != 0.0) {
            return Err(Error::Config(alloc::format!("bbd_beta needs beta != 0, got {beta}")));
        }
        let s = math::abs(beta);
        let (r0, r1) = (datum.value(0.0), datum.derivative(1, 0.0));
        if !near(r0, 0.0, s) || !near(r1, beta, s) {
            return Err(Error::InvalidDatum(alloc::format!(
                "bbd_beta needs rho0(0) = 0 and rho0'(0) = beta, got {r0} and {r1}"
            )));
        }
        Ok(Self { kind: VariantKind::BbdBeta, constant: beta, datum, reaction: true })
    }

    /// Drops the `+v` reaction (test mode): `b` and `c` become constant.
    pub fn without_reaction(mut self) -> Self {
        self.reaction = false;
        self
    }

    pub fn kind(&self) -> VariantKind {
        self.kind
    }

    pub fn datum(&self) -> &InitialDatum {
        &self.datum
    }

    pub fn has_reaction(&self) -> bool {
        self.reaction
    }

    /// `alpha`, `beta`, or the boundary slope 2 of the local model.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// `k`-th derivative of `psi`, `k <= 2`.
    pub fn psi(&self, k: usize, x: f64) -> f64 {
        let c = self.constant;
        match self.kind {
            VariantKind::LocalNbbm => self.datum.derivative(k + 1, x),
            VariantKind::BbdAlpha => -self.datum.derivative(k + 2, x) / (2.0 * c),
            VariantKind::BbdBeta => self.datum.derivative(k + 1, x) / c,
        }
    }

    fn b0(&self) -> f64 {
        if self.kind == VariantKind::LocalNbbm {
            2.0
        } else {
            1.0
        }
    }

    fn c0(&self) -> f64 {
        if self.kind == VariantKind::LocalNbbm {
            -0.25
        } else {
            -0.5
        }
    }

    fn decay(&self, t: f64) -> f64 {
        if self.reaction {
            math::exp(-t)
        } else {
            1.0
        }
    }

    /// Dirichlet data `b(t)` of the reduced problem.
    pub fn boundary(&self, t: f64) -> f64 {
        self.b0() * self.decay(t)
    }

    /// `b'(t)`.
    pub fn boundary_rate(&self, t: f64) -> f64 {
        if self.reaction {
            -self.boundary(t)
        } else {
            0.0
        }
    }

    /// `c(t)` in `V = c y_x(0)`.
    pub fn coupling(&self, t: f64) -> f64 {
        self.c0() / self.decay(t)
    }

    /// Factor turning `y` into the reported field.
    pub fn field_scale(&self, t: f64) -> f64 {
        match self.kind {
            VariantKind::LocalNbbm => 1.0,
            _ => 1.0 / self.decay(t),
        }
    }

    /// Exact trace of the reported field at `x = 0`.
    pub fn field_boundary(&self, t: f64) -> f64 {
        self.boundary(t) * self.field_scale(t)
    }

    /// Pinned `V(0) = c(0) psi'(0)`.
    pub fn initial_velocity(&self) -> f64 {
        self.coupling(0.0) * self.psi(1, 0.0)
    }
}

/// `alpha (1 + 5x/S + (15/S^2 - 1) x^2) (1 - x/S)^5`: value `alpha`, zero
/// slope and curvature `-2 alpha` at 0, C4 at `S`.
pub fn default_alpha_datum(alpha: f64, support: f64) -> Result<InitialDatum> {
    let s = support;
    let head = Poly::new(alloc::vec![alpha, 5.0 * alpha / s, alpha * (15.0 / (s * s) - 1.0)]);
    let tail = Poly::power_of_linear(s, 5).scale(-1.0 / math::powi(s, 5));
    InitialDatum::from_poly(head.mul(&tail), s)
}

/// `beta x (1 + 2x/S) (1 - x/S)^4`.
pub fn default_beta_datum(beta: f64, support: f64) -> Result<InitialDatum> {
    let s = support;
    let head = Poly::new(alloc::vec![0.0, beta, 2.0 * beta / s]);
    let tail = Poly::power_of_linear(s, 4).scale(1.0 / math::powi(s, 4));
    InitialDatum::from_poly(head.mul(&tail), s)
}

/// `x (2 + a x) (1 - x/S)^4` with `a` fixing unit mass; needs `S^2 < 15`.
pub fn default_local_datum(support: f64) -> Result<InitialDatum> {
    let s = support;
    // int_0^S x (1-x/S)^4 = S^2/30 and int_0^S x^2 (1-x/S)^4 = S^3/105
    let a = (1.0 - s * s / 15.0) * 105.0 / (s * s * s);
    if !(a >= 0.0) {
        return Err(Error::InvalidDatum(alloc::format!(
            "support {s} is too wide for a positive unit-mass local datum"
        )));
    }
    let head = Poly::new(alloc::vec![0.0, 2.0, a]);
    let tail = Poly::power_of_linear(s, 4).scale(1.0 / math::powi(s, 4));
    InitialDatum::from_poly(head.mul(&tail), s)
}

/// Reduced-problem solver on one grid.
#[derive(Debug, Clone)]
pub struct VariantSolver {
    spec: VariantSpec,
    stencils: Stencils,
    base_y: Vec<Vec<f64>>,
    base_yx: Vec<Vec<f64>>,
}

impl VariantSolver {
    pub fn new(spec: &VariantSpec, grid: &GridSpec, opts: &FixedPointOptions) -> Result<Self> {
        let g = grid.resolve(spec.datum.support(), 0.0)?;
        let stencils = Stencils::new(g, opts.inner);
        let (h, dt, m, n) = (g.h, g.dt, g.nodes, g.steps);
        let s = spec.datum.support();
        let ts = g.ts();
        let b: Vec<f64> = ts.iter().map(|&t| spec.boundary(t)).collect();
        let db: Vec<f64> = ts.iter().map(|&t| spec.boundary_rate(t)).collect();

        let mut base_y = stencils.layer_rows(Layer::Double, &b, 1.0);
        let init_y = initial_potential(h, dt, m, n, s, ODD, |x| spec.psi(0, x));
        add_rows(&mut base_y, &init_y);
        base_y[0] = init_y[0].clone();

        let mut base_yx = stencils.layer_rows(Layer::Single, &db, -2.0);
        let init_yx = initial_potential(h, dt, m, n, s, EVEN, |x| spec.psi(1, x));
        add_rows(&mut base_yx, &init_yx);
        base_yx[0] = init_yx[0].clone();

        Ok(Self { spec: spec.clone(), stencils, base_y, base_yx })
    }

    pub fn grid(&self) -> Grid {
        self.stencils.grid
    }

    pub fn spec(&self) -> &VariantSpec {
        &self.spec
    }

    fn check_path(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.grid().steps + 1 || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(alloc::format!("velocity path needs {} finite samples", self.grid().steps + 1)));
        }
        Ok(())
    }

    /// `y` at velocity path `v`.
    pub fn y(&self, v: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_path(v)?;
        let s = &self.stencils;
        s.march(v, &self.base_y, Drift { op: &s.dxn, known: None }, None)
    }

    /// `y_x` at velocity path `v`.
    pub fn y_x(&self, v: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_path(v)?;
        let s = &self.stencils;
        s.march(v, &self.base_yx, Drift { op: &s.dxg, known: None }, None)
    }

    /// `Q[V](t) = c(t) y_x(0, t)`, pinned at `t = 0`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let yx = self.y_x(v)?;
        let g = self.grid();
        Ok(yx
            .iter()
            .enumerate()
            .map(|(n, row)| if n == 0 { self.spec.initial_velocity() } else { self.spec.coupling(g.t(n)) * row[0] })
            .collect())
    }
}

fn add_rows(dst: &mut [Vec<f64>], src: &[Vec<f64>]) {
    for (d, s) in dst.iter_mut().zip(src) {
        for (a, b) in d.iter_mut().zip(s) {
            *a += b;
        }
    }
}

/// Converged variant front.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantSolution {
    pub spec: VariantSpec,
    pub grid: Grid,
    pub velocity: VelocityPath,
    pub front: Vec<f64>,
    /// Reduced unknown `y`.
    pub y: Vec<Vec<f64>>,
    pub y_x: Vec<Vec<f64>>,
    /// Reported field: `u` for the local model, `v` otherwise.
    pub field: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

impl VariantSolution {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }

    /// `max_t |field(0, t) - exact trace|`.
    pub fn boundary_residual(&self) -> f64 {
        self.field
            .iter()
            .enumerate()
            .map(|(n, r)| math::abs(r[0] - self.spec.field_boundary(self.grid.t(n))))
            .fold(0.0, f64::max)
    }

    /// Lab-frame mass `-e^t int x u` of the local model; `None` otherwise.
    pub fn local_mass(&self, n: usize) -> Option<f64> {
        if self.spec.kind != VariantKind::LocalNbbm {
            return None;
        }
        let h = self.grid.h;
        let w: Vec<f64> = self.y[n].iter().enumerate().map(|(i, u)| i as f64 * h * u).collect();
        Some(-math::simpson(&w, h) / self.spec.decay(self.grid.t(n)))
    }

    /// Lab-frame density `rho = e^t w` with `w(x) = -int_x^inf u`, local
    /// model only.
    pub fn local_density(&self, n: usize) -> Option<Vec<f64>> {
        if self.spec.kind != VariantKind::LocalNbbm {
            return None;
        }
        let scale = 1.0 / self.spec.decay(self.grid.t(n));
        Some(math::tail_integrals(&self.y[n], self.grid.h).iter().map(|w| -scale * w).collect())
    }
}

/// Fixed point of `V -> c y_x(0)` from the constant path `V(0)`.
pub fn solve_variant(spec: &VariantSpec, grid: &GridSpec, opts: &FixedPointOptions) -> Result<VariantSolution> {
    if !(opts.theta > 0.0 && opts.theta <= 1.0) {
        return Err(Error::Config(alloc::format!("damping must lie in (0, 1], got {}", opts.theta)));
    }
    let solver = VariantSolver::new(spec, grid, opts)?;
    let g = solver.grid();
    let mut v = alloc::vec![spec.initial_velocity(); g.steps + 1];
    let mut residuals = Vec::new();
    loop {
        let q = solver.apply(&v)?;
        let r = math::max_abs_diff(&q, &v);
        residuals.push(r);
        if r <= opts.tol {
            break;
        }
        if !r.is_finite() || residuals.len() >= opts.max_iter {
            return Err(Error::NonConvergence { iterations: residuals.len(), last_residual: r, history: residuals });
        }
        for (vi, qi) in v.iter_mut().zip(&q) {
            *vi = (1.0 - opts.theta) * *vi + opts.theta * qi;
        }
    }
    let y = solver.y(&v)?;
    let y_x = solver.y_x(&v)?;
    let field = y
        .iter()
        .enumerate()
        .map(|(n, r)| {
            let s = spec.field_scale(g.t(n));
            r.iter().map(|a| s * a).collect()
        })
        .collect();
    let velocity = VelocityPath::from_values(v, g.dt)?;
    Ok(VariantSolution { spec: spec.clone(), grid: g, front: velocity.integrate(), velocity, y, y_x, field, residuals })
}

/// Boundary-value variants.
pub fn solve_bbd(spec: &VariantSpec, grid: &GridSpec, opts: &FixedPointOptions) -> Result<VariantSolution> {
    if spec.kind == VariantKind::LocalNbbm {
        return Err(Error::Config("solve_bbd expects bbd_alpha or bbd_beta".into()));
    }
    solve_variant(spec, grid, opts)
}

/// Local N-BBM front.
pub fn solve_local_nbbm(datum: &InitialDatum, grid: &GridSpec, opts: &FixedPointOptions) -> Result<VariantSolution> {
    solve_variant(&VariantSpec::local_nbbm(datum.clone())?, grid, opts)
}

/// Centred residual of `y_t = y_xx/2 + V y_x` from step 2 on.
pub fn reduced_pde_residual(sol: &VariantSolution) -> f64 {
    let g = sol.grid;
    let (h, dt) = (g.h, g.dt);
    let v = sol.velocity.values();
    let mut worst = 0.0f64;
    for n in 2..g.steps {
        let r = &sol.y[n];
        for i in 1..g.nodes - 1 {
            let rt = (sol.y[n + 1][i] - sol.y[n - 1][i]) / (2.0 * dt);
            let rxx = (r[i + 1] - 2.0 * r[i] + r[i - 1]) / (h * h);
            let rx = (r[i + 1] - r[i - 1]) / (2.0 * h);
            worst = worst.max(math::abs(rt - 0.5 * rxx - v[n] * rx));
        }
    }
    worst
}

/// Contract checks of a variant solution. `mass` applies to the local
/// model only.
pub fn variant_contract(sol: &VariantSolution, fixed_point: f64, boundary: f64, mass: f64) -> ContractReport {
    let g = sol.grid;
    let envelope = 5.0 * (g.h * g.h + g.dt);
    let slope = sol
        .y
        .iter()
        .zip(&sol.y_x)
        .map(|(y, yx)| (0..y.len()).fold(0.0f64, |m, i| m.max(math::abs(yx[i] - math::derivative_at(y, i, g.h)))))
        .fold(0.0, f64::max);
    let holder = math::holder_half(&sol.velocity.times(), sol.velocity.values());
    let mut checks = alloc::vec![
        Check::new("fixed_point_residual", sol.final_residual(), fixed_point),
        Check::new("boundary_residual", sol.boundary_residual(), boundary),
        Check::new("y_x_minus_dy", slope, envelope),
        Check::new("pde_residual", reduced_pde_residual(sol), envelope),
        Check::new("holder_seminorm", holder, f64::INFINITY),
    ];
    if sol.spec.kind == VariantKind::LocalNbbm {
        let worst = (0..=g.steps).filter_map(|n| sol.local_mass(n)).fold(0.0f64, |m, x| m.max(math::abs(x - 1.0)));
        checks.push(Check::new("mass_residual", worst, mass));
    }
    ContractReport { checks, holder_seminorm: holder }
}
