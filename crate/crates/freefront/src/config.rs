//! Run configuration: a TOML file with one table per concern.
//!
//! Every key except `kernel.a` and `kernel.b` has a default, listed with
//! comments in [`REFERENCE`]. Running without a file uses that reference.
//! Loading goes file text, then `--set` overrides, then validation.

use std::path::Path;

use freefront_core::frame_solver::SolverOptions;
use freefront_core::front::{ContractTolerances, FixedPointOptions};
use freefront_core::model::{DatumFamily, KernelShape};
use freefront_core::particles::{Bins, ParticleConfig};
use freefront_core::variants::VariantKind;
use freefront_core::GridSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// The documented default configuration.
pub const REFERENCE: &str = r#"# freefront reference configuration.
# Every key shown here is optional except kernel.a and kernel.b.

[problem]
# nonlocal | local_nbbm | bbd_alpha | bbd_beta
kind = "nonlocal"
# boundary coefficient of the bbd_alpha edge condition
alpha = 0.7
# boundary coefficient of the bbd_beta edge condition
beta = 0.3
# false drops the exponential reaction factors of the variants (test mode)
reaction = true

[kernel]
# offspring land in [parent - a, parent + b]; required
a = 0.25
b = 0.75
# branching rate; 0 switches the nonlocal term off
rate = 1.0

[datum]
# right end of the support of rho0; the datum is calibrated to unit mass
support = 3.5

[grid]
h = 0.01
dt = 0.001
t_end = 0.1
# domain length in the edge frame, or "auto"
length = "auto"

[fixed_point]
# damping in (0, 1]; 1 is the plain iteration
theta = 1.0
tol = 1e-6
max_iter = 200
# stop when min |u(0, t)| drops below this fraction of rho0'(0)
g_floor_fraction = 0.1
# how often the horizon may be halved when that happens
max_halvings = 3
inner_tol = 1e-10
max_inner = 50

[tolerances]
fixed_point = 1e-6
boundary = 1e-6
mass = 1e-3
identity = 1e-3
# grid envelope is envelope_factor * (h^2 + dt)
envelope_factor = 5.0
# optional bound on the Holder-1/2 seminorm of the velocity
# holder_budget = 10.0
# width of the particle band in replica standard deviations
band_sigmas = 3.0

[particles]
n = 10000
dt = 0.001
replicas = 100
# required by the particles and compare commands (or pass --seed)
# seed = 1
snapshot_every = 10
bins = 45
x_min = 0.0
x_max = 4.5

[output]
dir = "out"
# time steps between records in fields.ndjson
snapshot_every = 10
"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Nonlocal,
    LocalNbbm,
    BbdAlpha,
    BbdBeta,
}

impl ProblemKind {
    pub fn variant(self) -> Option<VariantKind> {
        match self {
            ProblemKind::Nonlocal => None,
            ProblemKind::LocalNbbm => Some(VariantKind::LocalNbbm),
            ProblemKind::BbdAlpha => Some(VariantKind::BbdAlpha),
            ProblemKind::BbdBeta => Some(VariantKind::BbdBeta),
        }
    }

    pub fn name(self) -> &'static str {
        self.variant().map_or("nonlocal", VariantKind::name)
    }
}

impl From<VariantKind> for ProblemKind {
    fn from(k: VariantKind) -> Self {
        match k {
            VariantKind::LocalNbbm => ProblemKind::LocalNbbm,
            VariantKind::BbdAlpha => ProblemKind::BbdAlpha,
            VariantKind::BbdBeta => ProblemKind::BbdBeta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    pub alpha: f64,
    pub beta: f64,
    pub reaction: bool,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self { kind: ProblemKind::Nonlocal, alpha: 0.7, beta: 0.3, reaction: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default = "one")]
    pub rate: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { a: None, b: None, rate: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatumSection {
    pub support: f64,
}

impl Default for DatumSection {
    fn default() -> Self {
        Self { support: DatumFamily::default().support }
    }
}

/// Either a number or the word `auto`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Length {
    Fixed(f64),
    Word(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub length: Length,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridSpec::default();
        Self { h: g.h, dt: g.dt, t_end: g.t_end, length: Length::Word("auto".into()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointSection {
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub g_floor_fraction: f64,
    pub max_halvings: usize,
    pub inner_tol: f64,
    pub max_inner: usize,
}

impl Default for FixedPointSection {
    fn default() -> Self {
        let o = FixedPointOptions::default();
        Self {
            theta: o.theta,
            tol: o.tol,
            max_iter: o.max_iter,
            g_floor_fraction: o.g_floor_fraction,
            max_halvings: o.max_halvings,
            inner_tol: o.inner.inner_tol,
            max_inner: o.inner.max_inner,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSection {
    pub fixed_point: f64,
    pub boundary: f64,
    pub mass: f64,
    pub identity: f64,
    pub envelope_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holder_budget: Option<f64>,
    pub band_sigmas: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        let t = ContractTolerances::default();
        Self {
            fixed_point: t.fixed_point,
            boundary: t.boundary,
            mass: t.mass,
            identity: t.identity,
            envelope_factor: t.envelope_factor,
            holder_budget: None,
            band_sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleSection {
    pub n: usize,
    pub dt: f64,
    pub replicas: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub snapshot_every: usize,
    pub bins: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for ParticleSection {
    fn default() -> Self {
        Self { n: 10_000, dt: 1e-3, replicas: 100, seed: None, snapshot_every: 10, bins: 45, x_min: 0.0, x_max: 4.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    pub snapshot_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into(), snapshot_every: 10 }
    }
}

/// Resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub datum: DatumSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub fixed_point: FixedPointSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default)]
    pub particles: ParticleSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Provenance table of an emitted manifest; ignored on input.
    #[serde(default, skip_serializing)]
    pub manifest: Option<toml::Table>,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_source(REFERENCE, "reference config", &[]).expect("reference config is valid")
    }
}

/// Where a key came from, for diagnostics.
struct Locator<'a> {
    source: &'a str,
    origin: &'a str,
    overridden: Vec<String>,
}

impl Locator<'_> {
    /// Describes the position of `section.key`, or of the section header
    /// when the key is absent.
    fn at(&self, section: &str, key: &str) -> String {
        let dotted = format!("{section}.{key}");
        if self.overridden.contains(&dotted) {
            return format!("{dotted} (set on the command line)");
        }
        let mut current = String::new();
        let mut header = None;
        for (i, line) in self.source.lines().enumerate() {
            let t = line.trim();
            if let Some(name) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                current = name.trim().to_string();
                if current == section {
                    header = Some(i + 1);
                }
                continue;
            }
            if current == section {
                if let Some((k, _)) = t.split_once('=') {
                    if k.trim() == key {
                        return format!("{dotted} at line {} of {}", i + 1, self.origin);
                    }
                }
            }
        }
        match header {
            Some(n) => format!("{dotted} in [{section}] at line {n} of {}", self.origin),
            None => format!("{dotted} in {}", self.origin),
        }
    }
}

/// Splits `key=value`; the value is read as TOML and falls back to a
/// bare string.
pub fn parse_override(s: &str) -> CliResult<(Vec<String>, toml::Value)> {
    let (key, raw) =
        s.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{s}`")))?;
    let path: Vec<String> = key.trim().split('.').map(|p| p.trim().to_string()).collect();
    if path.iter().any(String::is_empty) {
        return Err(CliError::Config(format!("--set has an empty key segment in `{key}`")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

fn apply_override(table: &mut toml::Table, path: &[String], value: toml::Value) -> CliResult<()> {
    let (last, parents) = path.split_last().expect("non-empty key path");
    let mut node = table;
    for p in parents {
        let entry = node.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--set {}: `{p}` is not a table", path.join("."))))?;
    }
    node.insert(last.clone(), value);
    Ok(())
}

/// Parses, overrides and validates configuration text.
pub fn parse_source(source: &str, origin: &str, overrides: &[String]) -> CliResult<RunConfig> {
    let mut cfg: RunConfig = toml::from_str(source).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    let mut overridden = Vec::new();
    if !overrides.is_empty() {
        let mut table = toml::Table::try_from(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
        for o in overrides {
            let (path, value) = parse_override(o)?;
            overridden.push(path.join("."));
            apply_override(&mut table, &path, value)?;
        }
        cfg = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("after --set overrides: {}", e.message())))?;
    }
    cfg.validate(&Locator { source, origin, overridden })?;
    Ok(cfg)
}

/// Loads the file at `path`, or the reference configuration when absent.
pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<RunConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Read { path: p.into(), source })?;
            parse_source(&text, &p.display().to_string(), overrides)
        }
        None => parse_source(REFERENCE, "reference config", overrides),
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl RunConfig {
    fn validate(&self, at: &Locator<'_>) -> CliResult<()> {
        let fail =
            |section: &str, key: &str, what: &str| Err(CliError::Config(format!("{}: {what}", at.at(section, key))));
        if self.kernel.a.is_none() {
            return fail("kernel", "a", "missing required field `kernel.a`");
        }
        if self.kernel.b.is_none() {
            return fail("kernel", "b", "missing required field `kernel.b`");
        }
        let checks: [(&str, &str, f64); 20] = [
            ("problem", "alpha", self.problem.alpha),
            ("problem", "beta", self.problem.beta),
            ("datum", "support", self.datum.support),
            ("grid", "h", self.grid.h),
            ("grid", "dt", self.grid.dt),
            ("grid", "t_end", self.grid.t_end),
            ("fixed_point", "theta", self.fixed_point.theta),
            ("fixed_point", "tol", self.fixed_point.tol),
            ("fixed_point", "g_floor_fraction", self.fixed_point.g_floor_fraction),
            ("fixed_point", "inner_tol", self.fixed_point.inner_tol),
            ("tolerances", "fixed_point", self.tolerances.fixed_point),
            ("tolerances", "boundary", self.tolerances.boundary),
            ("tolerances", "mass", self.tolerances.mass),
            ("tolerances", "identity", self.tolerances.identity),
            ("tolerances", "envelope_factor", self.tolerances.envelope_factor),
            ("tolerances", "band_sigmas", self.tolerances.band_sigmas),
            ("tolerances", "holder_budget", self.tolerances.holder_budget.unwrap_or(1.0)),
            ("particles", "dt", self.particles.dt),
            ("kernel", "b", self.kernel.b.unwrap_or(1.0)),
            ("particles", "x_max", self.particles.x_max - self.particles.x_min),
        ];
        for (section, key, v) in checks {
            if !positive(v) {
                let what = if key == "x_max" {
                    "must exceed particles.x_min".to_string()
                } else {
                    format!("must be positive, got {v}")
                };
                return fail(section, key, &what);
            }
        }
        if self.fixed_point.theta > 1.0 {
            return fail("fixed_point", "theta", "must lie in (0, 1]");
        }
        let a = self.kernel.a.unwrap_or(0.0);
        if !(a.is_finite() && a >= 0.0) {
            return fail("kernel", "a", &format!("must be non-negative, got {a}"));
        }
        if !(self.kernel.rate.is_finite() && self.kernel.rate >= 0.0) {
            return fail("kernel", "rate", &format!("must be non-negative, got {}", self.kernel.rate));
        }
        if let Length::Word(w) = &self.grid.length {
            if w != "auto" {
                return fail("grid", "length", &format!("expected a number or \"auto\", got \"{w}\""));
            }
        }
        if let Length::Fixed(l) = self.grid.length {
            if !positive(l) {
                return fail("grid", "length", &format!("must be positive, got {l}"));
            }
        }
        let counts = [
            ("fixed_point", "max_iter", self.fixed_point.max_iter),
            ("fixed_point", "max_inner", self.fixed_point.max_inner),
            ("particles", "replicas", self.particles.replicas.saturating_sub(1)),
            ("particles", "n", self.particles.n.saturating_sub(1)),
            ("particles", "snapshot_every", self.particles.snapshot_every),
            ("particles", "bins", self.particles.bins),
            ("output", "snapshot_every", self.output.snapshot_every),
        ];
        for (section, key, v) in counts {
            if v == 0 {
                let least = if matches!(key, "replicas" | "n") { 2 } else { 1 };
                return fail(section, key, &format!("must be at least {least}"));
            }
        }
        if let Some(seed) = self.particles.seed {
            if seed > i64::MAX as u64 {
                return fail("particles", "seed", "must be below 2^63 so the manifest can record it");
            }
        }
        Ok(())
    }

    /// Seed of the particle replicas; required by the particle commands.
    pub fn seed(&self) -> CliResult<u64> {
        self.particles.seed.ok_or_else(|| {
            CliError::Config("missing required field `particles.seed` (set it in the config or pass --seed)".into())
        })
    }

    pub fn kernel_shape(&self) -> KernelShape {
        KernelShape { a: self.kernel.a.unwrap_or(0.0), b: self.kernel.b.unwrap_or(0.0), rate: self.kernel.rate }
    }

    pub fn datum_family(&self) -> DatumFamily {
        DatumFamily { support: self.datum.support }
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            h: self.grid.h,
            dt: self.grid.dt,
            t_end: self.grid.t_end,
            length: match self.grid.length {
                Length::Fixed(l) => Some(l),
                Length::Word(_) => None,
            },
        }
    }

    pub fn fixed_point_options(&self) -> FixedPointOptions {
        let f = &self.fixed_point;
        FixedPointOptions {
            theta: f.theta,
            tol: f.tol,
            max_iter: f.max_iter,
            g_floor_fraction: f.g_floor_fraction,
            max_halvings: f.max_halvings,
            inner: SolverOptions { inner_tol: f.inner_tol, max_inner: f.max_inner },
        }
    }

    pub fn contract_tolerances(&self) -> ContractTolerances {
        let t = &self.tolerances;
        ContractTolerances {
            fixed_point: t.fixed_point,
            boundary: t.boundary,
            mass: t.mass,
            identity: t.identity,
            envelope_factor: t.envelope_factor,
            holder_budget: t.holder_budget.unwrap_or(f64::INFINITY),
        }
    }

    /// Particle settings over the horizon `t_end` of the grid.
    pub fn particle_config(&self) -> CliResult<ParticleConfig> {
        let p = &self.particles;
        let bins = Bins::new(p.x_min, p.x_max, p.bins).map_err(|e| CliError::Config(format!("particles: {e}")))?;
        Ok(ParticleConfig {
            n: p.n,
            dt: p.dt,
            t_end: self.grid.t_end,
            snapshot_every: p.snapshot_every,
            bins,
            record_events: false,
        })
    }

    /// The configuration as TOML text, in section order.
    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }
}
