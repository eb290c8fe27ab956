//! Runs behind each subcommand. The `run_*` functions compute and return
//! results; the `cmd_*` functions also write the artifact files.

use freefront_core::fd_oracle::{fd_flux, solve_fd_rho, solve_fd_u, FdConfig, FdSolution, Scheme};
use freefront_core::front::{
    fixed_point_velocity, initial_velocity, reconstruct_lab_frame, verify_theorem_contract, Check, ContractReport,
    VelocityMap,
};
use freefront_core::model::{calibrate_initial_datum, make_kernel, Calibration};
use freefront_core::particles::{density_statistics, front_statistics, simulate, FrontStatistics, Trajectory};
use freefront_core::variants::{
    default_alpha_datum, default_beta_datum, default_local_datum, solve_variant, variant_contract, VariantKind,
    VariantSolution, VariantSolver, VariantSpec,
};
use freefront_core::{BranchingKernel, FrontSolution, GridSpec, InitialDatum, VelocityPath};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ProblemKind, RunConfig};
use crate::error::{CliError, CliResult, Context};
use crate::output::{csv, OutDir};

/// Kernel and calibrated datum of the nonlocal problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub kernel: BranchingKernel,
    pub calibration: Calibration,
}

impl Problem {
    pub fn datum(&self) -> &InitialDatum {
        &self.calibration.datum
    }
}

pub fn problem(cfg: &RunConfig) -> CliResult<Problem> {
    let kernel = make_kernel(cfg.kernel_shape()).context("model")?;
    let calibration = calibrate_initial_datum(cfg.datum_family(), &kernel).context("model")?;
    Ok(Problem { kernel, calibration })
}

/// One contract check in serializable form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl From<&Check> for CheckRecord {
    fn from(c: &Check) -> Self {
        Self { name: c.name.clone(), value: c.value, tolerance: c.tolerance, pass: c.pass }
    }
}

impl CheckRecord {
    pub fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value <= tolerance }
    }
}

fn records(report: &ContractReport) -> Vec<CheckRecord> {
    report.checks.iter().map(CheckRecord::from).collect()
}

/// Steps written to `fields.ndjson`: every `every`-th plus the last.
fn snapshot_steps(steps: usize, every: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..=steps).step_by(every).collect();
    if out.last() != Some(&steps) {
        out.push(steps);
    }
    out
}

fn abs_diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect()
}

fn front_table(t: &[f64], x: &[f64], v: &[f64], residual: &[f64]) -> String {
    csv(&["t", "X", "V", "residual"], (0..t.len()).map(|n| vec![t[n], x[n], v[n], residual[n]]))
}

// ---------------------------------------------------------------- solve

/// Converged nonlocal front with its contract report.
#[derive(Debug, Clone)]
pub struct NonlocalRun {
    pub problem: Problem,
    pub solution: FrontSolution,
    /// `|Q[V*](t_n) - V*(t_n)|` per time node.
    pub node_residual: Vec<f64>,
    pub report: ContractReport,
}

impl NonlocalRun {
    /// Grid of the converged run, pinned to its resolved length.
    pub fn grid_spec(&self) -> GridSpec {
        let g = &self.solution.fields.grid;
        GridSpec { h: g.h, dt: g.dt, t_end: self.solution.t_end, length: Some(g.length) }
    }
}

pub fn run_nonlocal(cfg: &RunConfig) -> CliResult<NonlocalRun> {
    let problem = problem(cfg)?;
    let opts = cfg.fixed_point_options();
    let solution = fixed_point_velocity(problem.datum(), &problem.kernel, &cfg.grid_spec(), &opts).context("front")?;
    let g = &solution.fields.grid;
    let spec = GridSpec { h: g.h, dt: g.dt, t_end: solution.t_end, length: Some(g.length) };
    let map = VelocityMap::new(problem.datum(), &problem.kernel, &spec, &opts).context("front")?;
    let (q, _) = map.apply(solution.velocity.values()).context("front")?;
    let node_residual = abs_diff(&q, solution.velocity.values());
    let report = verify_theorem_contract(&solution, &problem.kernel, &cfg.contract_tolerances());
    Ok(NonlocalRun { problem, solution, node_residual, report })
}

#[derive(Serialize)]
struct FieldRecord<'a> {
    t: f64,
    x: &'a [f64],
    rho: &'a [f64],
    u: &'a [f64],
    u_x: &'a [f64],
    u_xx: &'a [f64],
}

#[derive(Serialize)]
struct GridRecord {
    h: f64,
    dt: f64,
    nodes: usize,
    steps: usize,
    length: f64,
}

#[derive(Serialize)]
struct SolveReport<'a> {
    kind: &'a str,
    passed: bool,
    checks: Vec<CheckRecord>,
    holder_seminorm: f64,
    iterations: usize,
    residual_history: &'a [f64],
    v0: f64,
    x_end: f64,
    t_end: f64,
    halvings: usize,
    grid: GridRecord,
}

fn write_nonlocal(run: &NonlocalRun, cfg: &RunConfig, out: &OutDir) -> CliResult<()> {
    let s = &run.solution;
    let f = &s.fields;
    out.write("front.csv", &front_table(&f.t, &s.front, s.velocity.values(), &run.node_residual))?;
    out.write_ndjson(
        "fields.ndjson",
        snapshot_steps(f.grid.steps, cfg.output.snapshot_every).into_iter().map(|n| FieldRecord {
            t: f.t[n],
            x: &f.x,
            rho: &f.rho[n],
            u: &f.u[n],
            u_x: &f.u_x[n],
            u_xx: &f.u_xx[n],
        }),
    )?;
    let g = &f.grid;
    out.write_json(
        "report.json",
        &SolveReport {
            kind: "nonlocal",
            passed: run.report.passed(),
            checks: records(&run.report),
            holder_seminorm: run.report.holder_seminorm,
            iterations: s.residuals.len(),
            residual_history: &s.residuals,
            v0: s.velocity.v0(),
            x_end: *s.front.last().expect("non-empty front"),
            t_end: s.t_end,
            halvings: s.halvings,
            grid: GridRecord { h: g.h, dt: g.dt, nodes: g.nodes, steps: g.steps, length: g.length },
        },
    )?;
    Ok(())
}

// ------------------------------------------------------------- variants

pub fn variant_spec(cfg: &RunConfig, kind: VariantKind) -> CliResult<VariantSpec> {
    let s = cfg.datum.support;
    let spec = match kind {
        VariantKind::LocalNbbm => default_local_datum(s).and_then(VariantSpec::local_nbbm),
        VariantKind::BbdAlpha => {
            default_alpha_datum(cfg.problem.alpha, s).and_then(|d| VariantSpec::bbd_alpha(cfg.problem.alpha, d))
        }
        VariantKind::BbdBeta => {
            default_beta_datum(cfg.problem.beta, s).and_then(|d| VariantSpec::bbd_beta(cfg.problem.beta, d))
        }
    }
    .context("variants")?;
    Ok(if cfg.problem.reaction { spec } else { spec.without_reaction() })
}

/// Converged variant front with its contract report.
#[derive(Debug, Clone)]
pub struct VariantRun {
    pub solution: VariantSolution,
    pub node_residual: Vec<f64>,
    pub report: ContractReport,
}

pub fn run_variant(cfg: &RunConfig, kind: VariantKind) -> CliResult<VariantRun> {
    let spec = variant_spec(cfg, kind)?;
    let opts = cfg.fixed_point_options();
    let solution = solve_variant(&spec, &cfg.grid_spec(), &opts).context("variants")?;
    let g = solution.grid;
    let pinned = GridSpec { h: g.h, dt: g.dt, t_end: g.t(g.steps), length: Some(g.length) };
    let q = VariantSolver::new(&spec, &pinned, &opts)
        .and_then(|s| s.apply(solution.velocity.values()))
        .context("variants")?;
    let node_residual = abs_diff(&q, solution.velocity.values());
    let t = &cfg.tolerances;
    let report = variant_contract(&solution, t.fixed_point, t.boundary, t.mass);
    Ok(VariantRun { solution, node_residual, report })
}

#[derive(Serialize)]
struct LocalRecord<'a> {
    t: f64,
    x: &'a [f64],
    u: &'a [f64],
    u_x: &'a [f64],
    rho: Vec<f64>,
}

#[derive(Serialize)]
struct EdgeValueRecord<'a> {
    t: f64,
    x: &'a [f64],
    v: &'a [f64],
    v_x: Vec<f64>,
}

fn write_variant(run: &VariantRun, cfg: &RunConfig, out: &OutDir) -> CliResult<()> {
    let s = &run.solution;
    let g = s.grid;
    let t = g.ts();
    let x = g.xs();
    out.write("front.csv", &front_table(&t, &s.front, s.velocity.values(), &run.node_residual))?;
    let steps = snapshot_steps(g.steps, cfg.output.snapshot_every);
    if s.spec.kind() == VariantKind::LocalNbbm {
        out.write_ndjson(
            "fields.ndjson",
            steps.into_iter().map(|n| LocalRecord {
                t: t[n],
                x: &x,
                u: &s.field[n],
                u_x: &s.y_x[n],
                rho: s.local_density(n).expect("local model"),
            }),
        )?;
    } else {
        out.write_ndjson(
            "fields.ndjson",
            steps.into_iter().map(|n| {
                let scale = s.spec.field_scale(t[n]);
                EdgeValueRecord { t: t[n], x: &x, v: &s.field[n], v_x: s.y_x[n].iter().map(|a| scale * a).collect() }
            }),
        )?;
    }
    out.write_json(
        "report.json",
        &SolveReport {
            kind: s.spec.kind().name(),
            passed: run.report.passed(),
            checks: records(&run.report),
            holder_seminorm: run.report.holder_seminorm,
            iterations: s.residuals.len(),
            residual_history: &s.residuals,
            v0: s.velocity.v0(),
            x_end: *s.front.last().expect("non-empty front"),
            t_end: g.t(g.steps),
            halvings: 0,
            grid: GridRecord { h: g.h, dt: g.dt, nodes: g.nodes, steps: g.steps, length: g.length },
        },
    )?;
    Ok(())
}

/// Outcome line of a solve.
fn summary(kind: &str, v0: f64, x_end: f64, iterations: usize, report: &ContractReport) -> String {
    let passed = report.checks.iter().filter(|c| c.pass).count();
    format!(
        "{kind}: V0 = {v0:.6}, X(T) = {x_end:.6}, {iterations} iterations, {passed}/{} checks pass",
        report.checks.len()
    )
}

/// `solve` and `variant`: dispatches on `problem.kind`.
pub fn cmd_solve(cfg: &RunConfig, out: &OutDir) -> CliResult<String> {
    match cfg.problem.kind.variant() {
        None => {
            let run = run_nonlocal(cfg)?;
            write_nonlocal(&run, cfg, out)?;
            let s = &run.solution;
            Ok(summary("nonlocal", s.velocity.v0(), *s.front.last().unwrap(), s.residuals.len(), &run.report))
        }
        Some(kind) => {
            let run = run_variant(cfg, kind)?;
            write_variant(&run, cfg, out)?;
            let s = &run.solution;
            Ok(summary(kind.name(), s.velocity.v0(), *s.front.last().unwrap(), s.residuals.len(), &run.report))
        }
    }
}

// ------------------------------------------------------------ calibrate

#[derive(Serialize)]
struct CalibrationRecord<'a> {
    support: f64,
    scale: f64,
    beta: f64,
    iterations: usize,
    mass_residual: f64,
    compat_residual: f64,
    v0: f64,
    /// Monomial coefficients of `rho0` on `[0, support]`.
    coefficients: &'a [f64],
}

pub fn cmd_calibrate(cfg: &RunConfig, out: &OutDir) -> CliResult<String> {
    let p = problem(cfg)?;
    let c = &p.calibration;
    let v0 = initial_velocity(&c.datum, &p.kernel).context("front")?;
    out.write_json(
        "calibration.json",
        &CalibrationRecord {
            support: c.datum.support(),
            scale: c.scale,
            beta: c.beta,
            iterations: c.iterations,
            mass_residual: c.mass_residual,
            compat_residual: c.compat_residual,
            v0,
            coefficients: &c.datum.profile().coef,
        },
    )?;
    Ok(format!("calibrate: scale = {}, beta = {}, V0 = {v0}", c.scale, c.beta))
}

// ------------------------------------------------------------ oracle-fd

/// Oracle density and slope field at a prescribed velocity path.
#[derive(Debug, Clone)]
pub struct FdRun {
    pub rho: FdSolution,
    pub u: FdSolution,
}

pub fn run_fd(p: &Problem, velocity: &VelocityPath, grid: GridSpec) -> CliResult<FdRun> {
    let cfg = FdConfig { grid, scheme: Scheme::CrankNicolson };
    let rho = solve_fd_rho(velocity, p.datum(), &p.kernel, &cfg).context("fd_oracle")?;
    let g = fd_flux(&rho, &p.kernel);
    let u = solve_fd_u(velocity, &g, p.datum(), &p.kernel, &cfg).context("fd_oracle")?;
    Ok(FdRun { rho, u })
}

/// Velocity path for `oracle-fd`: the `V` column of a front table, or the
/// constant `V0` over the configured horizon.
pub fn oracle_velocity(cfg: &RunConfig, p: &Problem, front: Option<&std::path::Path>) -> CliResult<VelocityPath> {
    let dt = cfg.grid.dt;
    match front {
        Some(path) => {
            let t = crate::output::read_column(path, "t")?;
            let v = crate::output::read_column(path, "V")?;
            for (n, &tn) in t.iter().enumerate() {
                if (tn - n as f64 * dt).abs() > 1e-9 * (1.0 + tn) {
                    return Err(CliError::Config(format!(
                        "{}: row {} has t = {tn}, expected multiples of grid.dt = {dt}",
                        path.display(),
                        n + 2
                    )));
                }
            }
            VelocityPath::from_values(v, dt).context("front")
        }
        None => {
            let v0 = initial_velocity(p.datum(), &p.kernel).context("front")?;
            let steps = (cfg.grid.t_end / dt).round() as usize;
            Ok(VelocityPath::constant(v0, dt, steps))
        }
    }
}

#[derive(Serialize)]
struct FdRecord<'a> {
    t: f64,
    x: &'a [f64],
    rho: &'a [f64],
    u: &'a [f64],
}

#[derive(Serialize)]
struct FdReport {
    velocity: String,
    h: f64,
    dt: f64,
    nodes: usize,
    steps: usize,
    /// `max_t |rho(0, t)|`.
    boundary_residual: f64,
    mass_start: f64,
    mass_end: f64,
}

pub fn cmd_oracle_fd(cfg: &RunConfig, front: Option<&std::path::Path>, out: &OutDir) -> CliResult<String> {
    let p = problem(cfg)?;
    let v = oracle_velocity(cfg, &p, front)?;
    let grid = GridSpec { t_end: (v.len() - 1) as f64 * v.dt(), ..cfg.grid_spec() };
    let fd = run_fd(&p, &v, grid)?;
    let steps = fd.rho.rows.len() - 1;
    out.write_ndjson(
        "fd_fields.ndjson",
        snapshot_steps(steps, cfg.output.snapshot_every).into_iter().map(|n| FdRecord {
            t: fd.rho.t[n],
            x: &fd.rho.x,
            rho: &fd.rho.rows[n],
            u: &fd.u.rows[n],
        }),
    )?;
    let report = FdReport {
        velocity: front.map_or_else(|| "constant V0".to_string(), |p| p.display().to_string()),
        h: fd.rho.h,
        dt: fd.rho.dt,
        nodes: fd.rho.x.len(),
        steps,
        boundary_residual: fd.rho.rows.iter().map(|r| r[0].abs()).fold(0.0, f64::max),
        mass_start: fd.rho.trapezoid_mass(0),
        mass_end: fd.rho.trapezoid_mass(steps),
    };
    out.write_json("fd_report.json", &report)?;
    Ok(format!("oracle-fd: {} nodes, {steps} steps, mass {} -> {}", report.nodes, report.mass_start, report.mass_end))
}

// ------------------------------------------------------------ particles

/// Replica trajectories and their front statistics.
#[derive(Debug, Clone)]
pub struct ParticleRun {
    pub trajectories: Vec<Trajectory>,
    pub front: FrontStatistics,
}

/// Runs the replicas in parallel; replica `r` uses stream `r` of the seed,
/// and results are collected in replica order.
pub fn run_particles(cfg: &RunConfig, p: &Problem) -> CliResult<ParticleRun> {
    let seed = cfg.seed()?;
    let pc = cfg.particle_config()?;
    let trajectories = (0..cfg.particles.replicas as u64)
        .into_par_iter()
        .map(|r| simulate(&pc, &p.kernel, p.datum(), seed, r))
        .collect::<Result<Vec<_>, _>>()
        .context("particles")?;
    let front = front_statistics(&trajectories).context("particles")?;
    Ok(ParticleRun { trajectories, front })
}

#[derive(Serialize)]
struct SnapshotRecord {
    t: f64,
    /// Bin centres.
    x: Vec<f64>,
    density: Vec<f64>,
    se: Vec<f64>,
    front_mean: f64,
    front_sd: f64,
}

pub fn cmd_particles(cfg: &RunConfig, out: &OutDir) -> CliResult<String> {
    let p = problem(cfg)?;
    let run = run_particles(cfg, &p)?;
    let f = &run.front;
    out.write(
        "particles_front.csv",
        &csv(&["t", "mean", "sd", "se"], (0..f.t.len()).map(|j| vec![f.t[j], f.mean[j], f.sd[j], f.se[j]])),
    )?;
    let bins = run.trajectories[0].snapshots[0].bins;
    let edges = bins.edges();
    let centres: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut records = Vec::with_capacity(f.t.len());
    for j in 0..f.t.len() {
        let (density, se) = density_statistics(&run.trajectories, j).context("particles")?;
        records.push(SnapshotRecord {
            t: f.t[j],
            x: centres.clone(),
            density,
            se,
            front_mean: f.mean[j],
            front_sd: f.sd[j],
        });
    }
    out.write_ndjson("particles.ndjson", records)?;
    let last = f.t.len() - 1;
    Ok(format!(
        "particles: {} replicas of N = {}, front at T = {:.6} +- {:.6}",
        f.replicas, cfg.particles.n, f.mean[last], f.sd[last]
    ))
}

// -------------------------------------------------------------- compare

fn sup_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max)
}

/// Integral solver against the finite-difference oracle at the same
/// velocity path, on the same nodes.
pub fn oracle_checks(run: &NonlocalRun, envelope_factor: f64) -> CliResult<Vec<CheckRecord>> {
    let fd = run_fd(&run.problem, &run.solution.velocity, run.grid_spec())?;
    let f = &run.solution.fields;
    let envelope = envelope_factor * (f.grid.h * f.grid.h + f.grid.dt);
    Ok(vec![
        CheckRecord::new("fd_rho_gap", sup_gap(&fd.rho.rows, &f.rho), envelope),
        CheckRecord::new("fd_u_gap", sup_gap(&fd.u.rows, &f.u), envelope),
    ])
}

/// Front against the replica band and histograms against the lab-frame
/// density. Values are the worst ratio to one band width; both pass at
/// ratio `sigmas`.
pub fn particle_checks(
    run: &NonlocalRun,
    particles: &ParticleRun,
    envelope_factor: f64,
    sigmas: f64,
) -> CliResult<Vec<CheckRecord>> {
    let sol = &run.solution;
    let lab = reconstruct_lab_frame(sol);
    let g = &sol.fields.grid;
    let envelope = envelope_factor * (g.h * g.h + g.dt);
    let stats = &particles.front;
    let mut band = 0.0f64;
    let mut histogram = 0.0f64;
    for (j, &t) in stats.t.iter().enumerate() {
        let n = (t / g.dt).round() as usize;
        if n > g.steps || (n as f64 * g.dt - t).abs() > 1e-9 {
            return Err(CliError::Config(format!(
                "particle snapshot at t = {t} is not on the solver time grid (dt = {}, T = {})",
                g.dt, sol.t_end
            )));
        }
        band = band.max((sol.front[n] - stats.mean[j]).abs() / stats.sd[j]);
        let (mean, se) = density_statistics(&particles.trajectories, j).context("particles")?;
        let edges = particles.trajectories[0].snapshots[j].bins.edges();
        for (b, w) in edges.windows(2).enumerate() {
            let gap = (mean[b] - lab.bin_average(n, w[0], w[1])).abs();
            histogram = histogram.max(gap / (se[b] + envelope));
        }
    }
    Ok(vec![
        CheckRecord::new("particle_front_band", band, sigmas),
        CheckRecord::new("particle_histogram", histogram, sigmas),
    ])
}

#[derive(Serialize)]
struct CompareReport {
    passed: bool,
    checks: Vec<CheckRecord>,
}

/// Table printed by `compare`.
pub fn check_table(checks: &[CheckRecord]) -> String {
    let mut s = format!("{:<22} {:>14} {:>14}  result\n", "check", "value", "tolerance");
    for c in checks {
        s.push_str(&format!(
            "{:<22} {:>14.6e} {:>14.6e}  {}\n",
            c.name,
            c.value,
            c.tolerance,
            if c.pass { "pass" } else { "FAIL" }
        ));
    }
    s
}

/// Solver, finite-difference oracle and particle oracle on one config.
pub fn cmd_compare(cfg: &RunConfig, out: &OutDir) -> CliResult<String> {
    if cfg.problem.kind != ProblemKind::Nonlocal {
        return Err(CliError::Config(format!(
            "compare needs problem.kind = \"nonlocal\", got \"{}\"",
            cfg.problem.kind.name()
        )));
    }
    cfg.seed()?;
    let run = run_nonlocal(cfg)?;
    let mut checks = records(&run.report);
    checks.extend(oracle_checks(&run, cfg.tolerances.envelope_factor)?);
    let particles = run_particles(cfg, &run.problem)?;
    checks.extend(particle_checks(&run, &particles, cfg.tolerances.envelope_factor, cfg.tolerances.band_sigmas)?);
    let passed = checks.iter().all(|c| c.pass);
    out.write_json("compare.json", &CompareReport { passed, checks: checks.clone() })?;
    let table = check_table(&checks);
    if passed {
        Ok(table)
    } else {
        print!("{table}");
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        Err(CliError::ChecksFailed(format!("compare: failed checks: {}", failed.join(", "))))
    }
}
