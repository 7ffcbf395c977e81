//! Experiment configuration: a sectioned TOML document, strictly validated.
//!
//! Unknown keys are rejected (no silent typos), every referenced generator
//! must exist, and randomness always requires an explicit seed. A parsed
//! config round-trips through [`ExperimentConfig::to_toml`].

use crate::agents::{CollisionMode, TimeMethod};
use crate::hydro1d::{PressureMode, SinkMode};
use crate::kernels::{KernelError, KernelFamily, KernelSpec};
use crate::linalg::SymMat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config validation error: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Agents,
    Hydro,
    Analyze,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub family: KernelFamily,
    #[serde(default)]
    pub beta: f64,
    /// Tail amplitude; derived from continuity for the singular family and
    /// must be omitted there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_k: Option<f64>,
    #[serde(default = "one")]
    pub r_scale: f64,
    /// Singular head order, in (0, 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Regularization floor of the singular head; defaults to the hydro cell
    /// width, or 1e-6 on agent runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_sing: Option<f64>,
    /// Anisotropy profile rows (matrix family).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aniso: Option<Vec<Vec<f64>>>,
    /// Two-column CSV path `r, phi(r)` (tabulated family).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentInitKind {
    Random,
    /// Equal speeds, velocity directions equally spaced on the circle
    /// (planar crowds; uniform contraction under p < 1).
    Ring,
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AgentInitConfig {
    pub kind: AgentInitKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_side: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocities: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AgentsConfig {
    pub p: f64,
    pub dim: usize,
    pub n: usize,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub method: TimeMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_min: Option<f64>,
    /// Absolute alignment threshold; default `1e-9 * dv(0)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align_tol: Option<f64>,
    #[serde(default)]
    pub collision_mode: CollisionMode,
    pub init: AgentInitConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HydroInitKind {
    Uniform,
    Sine,
    Bump,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HydroInitConfig {
    pub kind: HydroInitKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_amp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_amp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HydroConfig {
    pub p: f64,
    pub n: usize,
    pub domain_len: f64,
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_rho_floor")]
    pub rho_floor: f64,
    #[serde(default)]
    pub pressure_mode: PressureMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sink_mode: Option<SinkMode>,
    #[serde(default = "default_src_stab")]
    pub src_stab: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align_tol: Option<f64>,
    pub init: HydroInitConfig,
}

fn default_cfl() -> f64 {
    0.4
}
fn default_rho_floor() -> f64 {
    1e-3
}
fn default_src_stab() -> f64 {
    0.4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Conservation,
    Riccati,
    Envelope,
    MonotoneFluctuations,
    Pointwise,
    GrowthBound,
    SeminormBudget,
    MaxPrinciple,
    InternalEnergyDrop,
    EntropySign,
    ClipFrequency,
    ParetoDv,
    FracexpDe,
    DiameterGrowth,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default = "default_enabled")]
    pub enabled: Vec<CheckKind>,
    #[serde(default = "default_envelope_tol")]
    pub envelope_tol: f64,
    #[serde(default = "default_momentum_rel")]
    pub momentum_rel: f64,
    #[serde(default = "default_energy_step_rel")]
    pub energy_step_rel: f64,
    #[serde(default = "default_enstrophy_rel")]
    pub enstrophy_rel: f64,
    #[serde(default = "default_transient_frac")]
    pub transient_frac: f64,
    /// Assert the log-log slope of dv is at most this (pareto_dv).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pareto_dv_max_exponent: Option<f64>,
    /// Assert the fractional-exponential exponent of dE is at least this
    /// (fracexp_de).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fracexp_de_min_exponent: Option<f64>,
    /// internal_energy_drop: require total internal energy below
    /// `frac * initial` at `by_time`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub internal_energy_frac: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub internal_energy_by_time: Option<f64>,
    #[serde(default = "default_clip_frac")]
    pub clip_frac_max: f64,
    #[serde(default = "default_entropy_tol")]
    pub entropy_residual_tol: f64,
    #[serde(default = "default_max_principle_tol")]
    pub max_principle_step_tol: f64,
}

fn default_enabled() -> Vec<CheckKind> {
    vec![CheckKind::Conservation]
}
fn default_envelope_tol() -> f64 {
    1e-6
}
fn default_momentum_rel() -> f64 {
    1e-10
}
fn default_energy_step_rel() -> f64 {
    1e-9
}
fn default_enstrophy_rel() -> f64 {
    1e-6
}
fn default_transient_frac() -> f64 {
    0.2
}
fn default_clip_frac() -> f64 {
    1e-3
}
fn default_entropy_tol() -> f64 {
    0.15
}
fn default_max_principle_tol() -> f64 {
    1e-10
}

impl Default for ChecksConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty checks config has defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    /// Write full-field snapshot CSVs every this many samples (0 = never).
    #[serde(default)]
    pub snapshot_every: usize,
}

fn default_sample_every() -> usize {
    10
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            sample_every: default_sample_every(),
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub kernel: KernelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<AgentsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hydro: Option<HydroConfig>,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn req<T: Copy>(v: Option<T>, field: &str, kind: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| ConfigError::Invalid(format!("{kind} init requires field `{field}`")))
}

fn forbid<T>(v: &Option<T>, field: &str, kind: &str) -> Result<(), ConfigError> {
    if v.is_some() {
        return Err(ConfigError::Invalid(format!(
            "field `{field}` is not used by init kind `{kind}`"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// Alignment exponent of the configured dynamics.
    pub fn p(&self) -> Option<f64> {
        match self.mode {
            Mode::Agents => self.agents.as_ref().map(|a| a.p),
            Mode::Hydro => self.hydro.as_ref().map(|h| h.p),
            Mode::Analyze => self
                .agents
                .as_ref()
                .map(|a| a.p)
                .or_else(|| self.hydro.as_ref().map(|h| h.p)),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.mode {
            Mode::Agents => {
                let a = self.agents.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("mode = \"agents\" requires an [agents] section".into())
                })?;
                self.validate_kernel(a.p, a.dim)?;
                a.validate()?;
            }
            Mode::Hydro => {
                let h = self.hydro.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("mode = \"hydro\" requires a [hydro] section".into())
                })?;
                self.validate_kernel(h.p, 1)?;
                h.validate()?;
            }
            Mode::Analyze => {
                // kernel block must be self-consistent for whichever p the
                // trace metadata supplies later; validate structure only
                if self.kernel.family == KernelFamily::Matrix {
                    self.validate_kernel(1.0, self.kernel.aniso.as_ref().map_or(2, Vec::len))?;
                }
            }
        }
        let c = &self.checks;
        for (name, v) in [
            ("envelope_tol", c.envelope_tol),
            ("momentum_rel", c.momentum_rel),
            ("energy_step_rel", c.energy_step_rel),
            ("enstrophy_rel", c.enstrophy_rel),
            ("clip_frac_max", c.clip_frac_max),
            ("entropy_residual_tol", c.entropy_residual_tol),
            ("max_principle_step_tol", c.max_principle_step_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!(
                    "checks.{name} must be a positive tolerance, got {v}"
                )));
            }
        }
        if !(0.0..1.0).contains(&c.transient_frac) {
            return Err(ConfigError::Invalid(
                "checks.transient_frac must lie in [0, 1)".into(),
            ));
        }
        if self.output.sample_every == 0 {
            return Err(ConfigError::Invalid(
                "output.sample_every must be >= 1".into(),
            ));
        }
        self.validate_check_applicability()?;
        Ok(())
    }

    fn validate_kernel(&self, p: f64, dim: usize) -> Result<(), ConfigError> {
        let k = &self.kernel;
        match k.family {
            KernelFamily::HeavyTail => {
                forbid(&k.s, "s", "heavy_tail")?;
                forbid(&k.aniso, "aniso", "heavy_tail")?;
                forbid(&k.table, "table", "heavy_tail")?;
            }
            KernelFamily::SingularHeavyTail => {
                if k.c_k.is_some() {
                    return Err(ConfigError::Invalid(
                        "kernel.c_k is derived from crossover continuity for singular kernels; omit it"
                            .into(),
                    ));
                }
                if k.s.is_none() {
                    return Err(ConfigError::Invalid(
                        "singular kernels require kernel.s in (0, 1)".into(),
                    ));
                }
                forbid(&k.aniso, "aniso", "singular_heavy_tail")?;
                forbid(&k.table, "table", "singular_heavy_tail")?;
            }
            KernelFamily::Matrix => {
                if p != 1.0 {
                    return Err(ConfigError::Invalid(format!(
                        "matrix kernels are defined for p = 1 only; dynamics has p = {p}"
                    )));
                }
                let aniso = k.aniso.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("matrix kernels require kernel.aniso".into())
                })?;
                SymMat::new(dim, aniso).ok_or_else(|| {
                    ConfigError::Invalid(format!(
                        "kernel.aniso must be a symmetric {dim}x{dim} matrix"
                    ))
                })?;
                forbid(&k.s, "s", "matrix")?;
                forbid(&k.table, "table", "matrix")?;
            }
            KernelFamily::Tabulated => {
                if k.table.is_none() {
                    return Err(ConfigError::Invalid(
                        "tabulated kernels require kernel.table (CSV path)".into(),
                    ));
                }
                forbid(&k.s, "s", "tabulated")?;
                forbid(&k.aniso, "aniso", "tabulated")?;
            }
        }
        Ok(())
    }

    fn validate_check_applicability(&self) -> Result<(), ConfigError> {
        use CheckKind::*;
        let singular = self.kernel.family == KernelFamily::SingularHeavyTail;
        let matrix = self.kernel.family == KernelFamily::Matrix;
        for kind in &self.checks.enabled {
            match kind {
                GrowthBound if !matrix => {
                    return Err(ConfigError::Invalid(
                        "growth_bound check applies to matrix kernels only".into(),
                    ))
                }
                SeminormBudget
                    if !singular || self.mode != Mode::Hydro && self.mode != Mode::Analyze =>
                {
                    return Err(ConfigError::Invalid(
                        "seminorm_budget check applies to singular-kernel hydro runs".into(),
                    ))
                }
                MaxPrinciple | InternalEnergyDrop | EntropySign | ClipFrequency
                    if self.mode == Mode::Agents =>
                {
                    return Err(ConfigError::Invalid(format!(
                        "check {kind:?} applies to hydro runs only"
                    )))
                }
                InternalEnergyDrop => {
                    if self.checks.internal_energy_frac.is_none()
                        || self.checks.internal_energy_by_time.is_none()
                    {
                        return Err(ConfigError::Invalid(
                            "internal_energy_drop needs checks.internal_energy_frac and checks.internal_energy_by_time"
                                .into(),
                        ));
                    }
                }
                EntropySign => {
                    if let Some(h) = &self.hydro {
                        if h.pressure_mode != PressureMode::EntropicEquality || h.p != 1.0 {
                            return Err(ConfigError::Invalid(
                                "entropy_sign check needs entropic_equality pressure with p = 1"
                                    .into(),
                            ));
                        }
                    }
                }
                Envelope | Pointwise => {
                    if let Some(p) = self.p() {
                        if p < 1.0 {
                            return Err(ConfigError::Invalid(format!(
                                "check {kind:?} requires p >= 1, config has p = {p}"
                            )));
                        }
                    }
                }
                ParetoDv => {
                    if self.checks.pareto_dv_max_exponent.is_none() {
                        return Err(ConfigError::Invalid(
                            "pareto_dv needs checks.pareto_dv_max_exponent".into(),
                        ));
                    }
                }
                FracexpDe if self.checks.fracexp_de_min_exponent.is_none() => {
                    return Err(ConfigError::Invalid(
                        "fracexp_de needs checks.fracexp_de_min_exponent".into(),
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Build the kernel, resolving the singular regularization floor against
    /// the grid (`h` for hydro runs, 1e-6 otherwise) and loading tabulated
    /// profiles relative to `base_dir`.
    pub fn build_kernel(&self, base_dir: &std::path::Path) -> Result<KernelSpec, ConfigError> {
        let k = &self.kernel;
        let (p, dim) = match self.mode {
            Mode::Agents => {
                let a = self.agents.as_ref().expect("validated");
                (a.p, a.dim)
            }
            Mode::Hydro => (self.hydro.as_ref().expect("validated").p, 1),
            Mode::Analyze => (
                self.p().unwrap_or(1.0),
                if self.hydro.is_some() { 1 } else { 2 },
            ),
        };
        let spec = match k.family {
            KernelFamily::HeavyTail => {
                KernelSpec::heavy_tail(k.beta, k.c_k.unwrap_or(1.0), k.r_scale, dim)?
            }
            KernelFamily::SingularHeavyTail => {
                let eps = k.eps_sing.unwrap_or_else(|| match self.mode {
                    Mode::Hydro | Mode::Analyze => self
                        .hydro
                        .as_ref()
                        .map(|h| h.domain_len / h.n as f64)
                        .unwrap_or(1e-6),
                    Mode::Agents => 1e-6,
                });
                KernelSpec::singular(k.s.expect("validated"), p, k.beta, k.r_scale, dim, eps)?
            }
            KernelFamily::Matrix => {
                let rows = k.aniso.as_ref().expect("validated");
                let aniso = SymMat::new(dim, rows).ok_or_else(|| {
                    ConfigError::Invalid("kernel.aniso must be symmetric positive-definite".into())
                })?;
                KernelSpec::matrix(k.beta, k.c_k.unwrap_or(1.0), aniso, p, dim)?
            }
            KernelFamily::Tabulated => {
                let rel = k.table.as_ref().expect("validated");
                let path = base_dir.join(rel);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    ConfigError::Invalid(format!("cannot read kernel table {path:?}: {e}"))
                })?;
                let table = parse_kernel_table(&text)?;
                KernelSpec::tabulated(table, dim)?
            }
        };
        Ok(spec)
    }
}

impl AgentsConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.p >= 0.0 && self.p.is_finite()) {
            return Err(ConfigError::Invalid("agents.p must be >= 0".into()));
        }
        if !(1..=3).contains(&self.dim) {
            return Err(ConfigError::Invalid("agents.dim must be 1, 2 or 3".into()));
        }
        if self.n < 2 {
            return Err(ConfigError::Invalid("agents.n must be >= 2".into()));
        }
        if !(self.dt > 0.0 && self.t_end >= 0.0) {
            return Err(ConfigError::Invalid(
                "agents.dt must be > 0 and t_end >= 0".into(),
            ));
        }
        if let Some(tol) = self.align_tol {
            if !(tol > 0.0) {
                return Err(ConfigError::Invalid("agents.align_tol must be > 0".into()));
            }
        }
        let init = &self.init;
        match init.kind {
            AgentInitKind::Random | AgentInitKind::Ring => {
                let kind = if init.kind == AgentInitKind::Random {
                    "random"
                } else {
                    "ring"
                };
                req(init.seed, "seed", kind)?;
                let b = req(init.box_side, "box_side", kind)?;
                let v = req(init.v0, "v0", kind)?;
                if !(b > 0.0 && v >= 0.0) {
                    return Err(ConfigError::Invalid(format!(
                        "{kind} init needs box_side > 0 and v0 >= 0"
                    )));
                }
                if init.kind == AgentInitKind::Ring && self.dim != 2 {
                    return Err(ConfigError::Invalid(
                        "ring init is planar; set agents.dim = 2".into(),
                    ));
                }
                forbid(&init.positions, "positions", kind)?;
                forbid(&init.velocities, "velocities", kind)?;
            }
            AgentInitKind::Explicit => {
                let pos = init.positions.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("explicit init requires field `positions`".into())
                })?;
                let vel = init.velocities.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("explicit init requires field `velocities`".into())
                })?;
                if pos.len() != self.n || vel.len() != self.n {
                    return Err(ConfigError::Invalid(format!(
                        "explicit init must list exactly n = {} positions and velocities",
                        self.n
                    )));
                }
                for row in pos.iter().chain(vel) {
                    if row.len() != self.dim {
                        return Err(ConfigError::Invalid(format!(
                            "explicit init rows must have dim = {} entries",
                            self.dim
                        )));
                    }
                }
                forbid(&init.seed, "seed", "explicit")?;
                forbid(&init.box_side, "box_side", "explicit")?;
                forbid(&init.v0, "v0", "explicit")?;
            }
        }
        Ok(())
    }
}

impl HydroConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(ConfigError::Invalid("hydro.p must be >= 1".into()));
        }
        if self.n < 2 {
            return Err(ConfigError::Invalid("hydro.n must be >= 2".into()));
        }
        if !(self.domain_len > 0.0 && self.t_end >= 0.0) {
            return Err(ConfigError::Invalid(
                "hydro.domain_len must be > 0 and t_end >= 0".into(),
            ));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(ConfigError::Invalid(
                "hydro.cfl must lie in (0, 0.5]".into(),
            ));
        }
        if !(self.rho_floor > 0.0) {
            return Err(ConfigError::Invalid("hydro.rho_floor must be > 0".into()));
        }
        let sink = self.effective_sink_mode();
        if self.pressure_mode == PressureMode::EntropicEquality
            && sink == SinkMode::PerPair
            && self.p != 1.0
        {
            return Err(ConfigError::Invalid(
                "per_pair sink is the p = 1 closure; use sink_mode = \"symmetric_p\"".into(),
            ));
        }
        let init = &self.init;
        match init.kind {
            HydroInitKind::Uniform => {
                req(init.rho0, "rho0", "uniform")?;
                forbid(&init.u_amp, "u_amp", "uniform")?;
                forbid(&init.rho_amp, "rho_amp", "uniform")?;
                forbid(&init.width, "width", "uniform")?;
                forbid(&init.path, "path", "uniform")?;
            }
            HydroInitKind::Sine => {
                req(init.rho0, "rho0", "sine")?;
                req(init.u_amp, "u_amp", "sine")?;
                forbid(&init.u0, "u0", "sine")?;
                forbid(&init.rho_amp, "rho_amp", "sine")?;
                forbid(&init.width, "width", "sine")?;
                forbid(&init.path, "path", "sine")?;
            }
            HydroInitKind::Bump => {
                req(init.rho0, "rho0", "bump")?;
                req(init.rho_amp, "rho_amp", "bump")?;
                req(init.width, "width", "bump")?;
                forbid(&init.u_amp, "u_amp", "bump")?;
                forbid(&init.path, "path", "bump")?;
            }
            HydroInitKind::Csv => {
                if init.path.is_none() {
                    return Err(ConfigError::Invalid(
                        "csv init requires field `path`".into(),
                    ));
                }
                forbid(&init.rho0, "rho0", "csv")?;
                forbid(&init.u0, "u0", "csv")?;
                forbid(&init.u_amp, "u_amp", "csv")?;
                forbid(&init.rho_amp, "rho_amp", "csv")?;
                forbid(&init.width, "width", "csv")?;
            }
        }
        Ok(())
    }

    /// Sink form, defaulting by exponent: per-pair for pure alignment,
    /// symmetric for p > 1.
    pub fn effective_sink_mode(&self) -> SinkMode {
        self.sink_mode.unwrap_or(if self.p == 1.0 {
            SinkMode::PerPair
        } else {
            SinkMode::SymmetricP
        })
    }
}

/// Parse a two-column `r, phi(r)` CSV (header line optional).
pub fn parse_kernel_table(text: &str) -> Result<Vec<(f64, f64)>, ConfigError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 2 {
            return Err(ConfigError::Invalid(format!(
                "kernel table line {}: expected two columns",
                i + 1
            )));
        }
        if i == 0 && cols[0].parse::<f64>().is_err() {
            continue; // header
        }
        let r: f64 = cols[0].parse().map_err(|e| {
            ConfigError::Invalid(format!("kernel table line {}: bad r: {e}", i + 1))
        })?;
        let v: f64 = cols[1].parse().map_err(|e| {
            ConfigError::Invalid(format!("kernel table line {}: bad phi: {e}", i + 1))
        })?;
        out.push((r, v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_AGENTS: &str = r#"
mode = "agents"

[kernel]
family = "heavy_tail"
beta = 0.0

[agents]
p = 1.0
dim = 2
n = 2
t_end = 5.0
dt = 0.01

[agents.init]
kind = "explicit"
positions = [[0.0, 0.0], [1.0, 0.0]]
velocities = [[1.0, 0.0], [-1.0, 0.0]]
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL_AGENTS).unwrap();
        assert_eq!(cfg.mode, Mode::Agents);
        assert_eq!(cfg.output.sample_every, 10);
        assert_eq!(cfg.checks.enabled, vec![CheckKind::Conservation]);
        let a = cfg.agents.as_ref().unwrap();
        assert_eq!(a.method, TimeMethod::Rk4);
    }

    #[test]
    fn unknown_key_is_named() {
        let bad = MINIMAL_AGENTS.replace("beta = 0.0", "betta = 0.0");
        let err = ExperimentConfig::parse(&bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("betta"), "error should name the key: {msg}");
    }

    #[test]
    fn matrix_kernel_requires_p_one() {
        let bad = r#"
mode = "agents"

[kernel]
family = "matrix"
beta = 0.5
aniso = [[1.0, 0.0], [0.0, 2.0]]

[agents]
p = 0.5
dim = 2
n = 4
t_end = 1.0
dt = 0.01

[agents.init]
kind = "random"
seed = 1
box_side = 1.0
v0 = 1.0
"#;
        let err = ExperimentConfig::parse(bad).unwrap_err();
        assert!(err.to_string().contains("p = 1"), "{err}");
    }

    #[test]
    fn random_init_requires_seed() {
        let bad = r#"
mode = "agents"

[kernel]
family = "heavy_tail"

[agents]
p = 1.0
dim = 2
n = 4
t_end = 1.0
dt = 0.01

[agents.init]
kind = "random"
box_side = 1.0
v0 = 1.0
"#;
        let err = ExperimentConfig::parse(bad).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = ExperimentConfig::parse(MINIMAL_AGENTS).unwrap();
        let text = cfg.to_toml();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn parse_error_carries_location() {
        let err = ExperimentConfig::parse("mode = [broken").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("line") || msg.contains('|'),
            "parse error should locate the problem: {msg}"
        );
    }

    #[test]
    fn kernel_table_parsing() {
        let t = parse_kernel_table("r,phi\n0.0,1.0\n1.0,0.2\n").unwrap();
        assert_eq!(t, vec![(0.0, 1.0), (1.0, 0.2)]);
        assert!(parse_kernel_table("0.0\n").is_err());
    }
}
