//! Run configuration: TOML with one section per module, `--set` overrides,
//! and a fully resolved copy written next to every run.

use std::path::{Path, PathBuf};

use pauli_core::{
    ASolveOptions, Complex, Coupling, EvolveConfig, GaugeKind, InitialDataSpec, InitialGuess, StepOptions,
    StepScheme,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("missing key `{key}`")]
    MissingKey { key: String },
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("type error at `{key}`: {message}")]
    TypeError { key: String, message: String },
    #[error("invalid value for `{key}`: {message}")]
    InvariantViolation { key: String, message: String },
    #[error("bad override `{0}`: expected key=value")]
    BadOverride(String),
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Io { .. } => "Io",
            ConfigError::Syntax(_) => "Syntax",
            ConfigError::MissingKey { .. } => "MissingKey",
            ConfigError::UnknownKey { .. } => "UnknownKey",
            ConfigError::TypeError { .. } => "TypeError",
            ConfigError::InvariantViolation { .. } => "InvariantViolation",
            ConfigError::BadOverride(_) => "BadOverride",
        }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::MissingKey { key }
            | ConfigError::UnknownKey { key }
            | ConfigError::TypeError { key, .. }
            | ConfigError::InvariantViolation { key, .. } => Some(key),
            _ => None,
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::InvariantViolation {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub grid_spectral: GridSection,
    #[serde(default)]
    pub field_solver: SolverSection,
    pub hamiltonian_evolution: EvolutionSection,
    #[serde(default)]
    pub initial_data: InitialSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    #[serde(rename = "L", default = "two_pi")]
    pub box_length: f64,
}

fn two_pi() -> f64 {
    2.0 * std::f64::consts::PI
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub gauge: String,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub damping: f64,
    pub initial_guess: String,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = ASolveOptions::default();
        Self {
            gauge: GaugeKind::Darwin.name().into(),
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            damping: d.damping,
            initial_guess: "previous".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    #[serde(default)]
    pub epsilon: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_coupling")]
    pub coupling: String,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max")]
    pub picard_max_iterates: usize,
    #[serde(default = "yes")]
    pub dealias: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup_guard: Option<f64>,
}

fn default_scheme() -> String {
    StepScheme::Rk4.name().into()
}
fn default_coupling() -> String {
    Coupling::Full.name().into()
}
fn default_picard_tol() -> f64 {
    StepOptions::default().picard_tol
}
fn default_picard_max() -> usize {
    StepOptions::default().picard_max_iterates
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    /// `gaussian_packet`, `plane_wave` or `file`
    pub kind: String,
    /// Defaults to the box centre.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 3]>,
    pub width: f64,
    /// Packet momentum for `gaussian_packet`, integer mode numbers for `plane_wave`.
    pub k: [f64; 3],
    /// `[[re, im], [re, im]]`
    pub spin: [[f64; 2]; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub normalization: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            kind: "gaussian_packet".into(),
            center: None,
            width: 0.8,
            k: [1.0, 0.0, 0.0],
            spin: [[1.0, 0.0], [0.0, 0.5]],
            path: None,
            normalization: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSection {
    pub hs_index: f64,
    /// Gate on `max |Q(t) − Q(0)| / Q(0)`.
    pub charge_tolerance: f64,
    /// Gate on `max |E(t) − E(0)| / E(0)`, ε = 0 only.
    pub energy_tolerance: f64,
    /// Allowed energy increase between records as a fraction of `E(0)`, ε > 0 only.
    pub energy_slack: f64,
    /// Gate on `‖div A‖` for Darwin runs.
    pub divergence_tolerance: f64,
    /// Poisswell gauge gate: `‖div A + ∂_t V‖ ≤ factor · tolerance · ‖A‖`.
    pub gauge_factor: f64,
    /// `C_guard` of the `H¹` bound, checked for ε > 0.
    pub h1_guard: f64,
    pub identity_sizes: Vec<usize>,
    pub identity_samples: usize,
    pub identity_tolerance: f64,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        let id = pauli_core::diagnostics::IdentitySuiteConfig::default();
        Self {
            hs_index: 2.0,
            charge_tolerance: 1e-8,
            energy_tolerance: 1e-6,
            energy_slack: 1e-8,
            divergence_tolerance: 1e-12,
            gauge_factor: 10.0,
            h1_guard: pauli_core::evolution::DEFAULT_H1_GUARD,
            identity_sizes: id.sizes,
            identity_samples: id.samples,
            identity_tolerance: id.tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub stride: usize,
    pub snapshots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            stride: 10,
            snapshots: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Sorted descending.
    pub epsilons: Vec<f64>,
    pub min_slope: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.2, 0.1, 0.05, 0.025],
            min_slope: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    /// Time steps of the order study; empty means `dt, dt/2, dt/4`.
    pub dts: Vec<f64>,
    /// Grid sizes of a resolution study; when non-empty it replaces the dt study.
    pub ns: Vec<usize>,
    /// Accepted distance of the observed order from the scheme order.
    pub order_window: f64,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            dts: Vec::new(),
            ns: Vec::new(),
            order_window: 0.5,
        }
    }
}

/// Reads `path`, applies `overrides` (`key.path=value`) and validates.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_str(&text, overrides)
}

pub fn parse_str(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let cfg: RunConfig = serde_path_to_error::deserialize(table).map_err(classify)?;
    let cfg = cfg.resolved();
    cfg.validate()?;
    Ok(cfg)
}

fn classify(err: serde_path_to_error::Error<toml::de::Error>) -> ConfigError {
    let path = err.path().to_string();
    let message = err.inner().message().to_string();
    let join = |field: &str| {
        if path.is_empty() || path == "." {
            field.to_string()
        } else if path == field || path.ends_with(&format!(".{field}")) {
            path.clone()
        } else {
            format!("{path}.{field}")
        }
    };
    let quoted = |m: &str| m.split('`').nth(1).unwrap_or_default().to_string();
    if message.starts_with("missing field") {
        ConfigError::MissingKey {
            key: join(&quoted(&message)),
        }
    } else if message.starts_with("unknown field") {
        ConfigError::UnknownKey {
            key: join(&quoted(&message)),
        }
    } else {
        ConfigError::TypeError { key: path, message }
    }
}

/// `a.b.c=value`; the value is read as a TOML literal, or as a bare string
/// when it does not parse as one.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(spec.into()))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::BadOverride(spec.into()));
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.into()));
    let parts: Vec<&str> = key.split('.').collect();
    let (last, sections) = parts.split_last().expect("non-empty key");
    let mut node = table;
    let mut walked = String::new();
    for part in sections {
        if !walked.is_empty() {
            walked.push('.');
        }
        walked.push_str(part);
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| ConfigError::TypeError {
            key: walked.clone(),
            message: "not a section".into(),
        })?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Fills defaults that depend on other keys.
    fn resolved(mut self) -> Self {
        if self.initial_data.center.is_none() && self.initial_data.kind == "gaussian_packet" {
            let c = self.grid_spectral.box_length / 2.0;
            self.initial_data.center = Some([c, c, c]);
        }
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid_spectral;
        if g.n < 4 || g.n % 2 != 0 {
            return Err(invalid("grid_spectral.n", format!("must be even and at least 4, got {}", g.n)));
        }
        if !(g.box_length > 0.0) || !g.box_length.is_finite() {
            return Err(invalid("grid_spectral.L", format!("must be positive, got {}", g.box_length)));
        }
        self.gauge()?;
        self.solver_options()?;
        let e = &self.hamiltonian_evolution;
        if !(e.epsilon >= 0.0) || !e.epsilon.is_finite() {
            return Err(invalid(
                "hamiltonian_evolution.epsilon",
                format!("must be non-negative, got {}", e.epsilon),
            ));
        }
        if !(e.dt > 0.0) || !e.dt.is_finite() {
            return Err(invalid("hamiltonian_evolution.dt", format!("must be positive, got {}", e.dt)));
        }
        if !(e.t_final >= 0.0) || !e.t_final.is_finite() {
            return Err(invalid("hamiltonian_evolution.T", format!("must be non-negative, got {}", e.t_final)));
        }
        if let Some(b) = e.blowup_guard {
            if !(b > 0.0) {
                return Err(invalid("hamiltonian_evolution.blowup_guard", "must be positive"));
            }
        }
        self.step_options()?;
        self.initial_spec()?;
        if !(self.initial_data.normalization > 0.0) || !self.initial_data.normalization.is_finite() {
            return Err(invalid("initial_data.normalization", "must be positive"));
        }
        if self.output.stride == 0 {
            return Err(invalid("output.stride", "must be at least 1"));
        }
        let d = &self.diagnostics;
        for (key, v) in [
            ("charge_tolerance", d.charge_tolerance),
            ("energy_tolerance", d.energy_tolerance),
            ("energy_slack", d.energy_slack),
            ("divergence_tolerance", d.divergence_tolerance),
            ("gauge_factor", d.gauge_factor),
            ("h1_guard", d.h1_guard),
            ("identity_tolerance", d.identity_tolerance),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(&format!("diagnostics.{key}"), "must be positive"));
            }
        }
        if d.identity_sizes.iter().any(|&n| n < 4 || n % 2 != 0) || d.identity_sizes.is_empty() {
            return Err(invalid("diagnostics.identity_sizes", "sizes must be even and at least 4"));
        }
        let s = &self.sweep;
        if s.epsilons.len() < 3 {
            return Err(invalid("sweep.epsilons", "needs at least three values"));
        }
        if s.epsilons.iter().any(|e| !(*e >= 0.0)) || s.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("sweep.epsilons", "must be non-negative and strictly decreasing"));
        }
        let c = &self.convergence;
        if !c.dts.is_empty() && (c.dts.len() < 3 || c.dts.iter().any(|d| !(*d > 0.0))) {
            return Err(invalid("convergence.dts", "needs at least three positive steps"));
        }
        if !c.ns.is_empty() && (c.ns.len() < 2 || c.ns.iter().any(|&n| n < 4 || n % 2 != 0)) {
            return Err(invalid("convergence.ns", "needs at least two even sizes of at least 4"));
        }
        Ok(())
    }

    pub fn gauge(&self) -> Result<GaugeKind, ConfigError> {
        self.field_solver
            .gauge
            .parse()
            .map_err(|_| invalid("field_solver.gauge", format!("unknown gauge `{}`", self.field_solver.gauge)))
    }

    pub fn solver_options(&self) -> Result<ASolveOptions, ConfigError> {
        let s = &self.field_solver;
        let initial_guess = match s.initial_guess.as_str() {
            "previous" => InitialGuess::Previous,
            "zero" => InitialGuess::Zero,
            other => return Err(invalid("field_solver.initial_guess", format!("expected previous or zero, got `{other}`"))),
        };
        let opts = ASolveOptions {
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            damping: s.damping,
            initial_guess,
        };
        opts.validate().map_err(|e| invalid("field_solver", e.to_string()))?;
        Ok(opts)
    }

    pub fn step_options(&self) -> Result<StepOptions, ConfigError> {
        let e = &self.hamiltonian_evolution;
        let scheme: StepScheme = e
            .scheme
            .parse()
            .map_err(|_| invalid("hamiltonian_evolution.scheme", format!("unknown scheme `{}`", e.scheme)))?;
        let opts = StepOptions {
            scheme,
            solver: self.solver_options()?,
            picard_tol: e.picard_tol,
            picard_max_iterates: e.picard_max_iterates,
            dealias: e.dealias,
        };
        opts.validate()
            .map_err(|err| invalid("hamiltonian_evolution", err.to_string()))?;
        Ok(opts)
    }

    pub fn coupling(&self) -> Result<Coupling, ConfigError> {
        let c = &self.hamiltonian_evolution.coupling;
        c.parse()
            .map_err(|_| invalid("hamiltonian_evolution.coupling", format!("unknown coupling `{c}`")))
    }

    pub fn evolve_config(&self) -> EvolveConfig {
        let e = &self.hamiltonian_evolution;
        EvolveConfig {
            dt: e.dt,
            t_final: e.t_final,
            stride: self.output.stride,
            blowup_guard: e.blowup_guard,
            hs_index: self.diagnostics.hs_index,
        }
    }

    pub fn initial_spec(&self) -> Result<InitialDataSpec, ConfigError> {
        let d = &self.initial_data;
        let spin = d.spin.map(|[re, im]| Complex::new(re, im));
        let spec = match d.kind.as_str() {
            "gaussian_packet" => InitialDataSpec::GaussianPacket {
                center: d.center.unwrap_or([self.grid_spectral.box_length / 2.0; 3]),
                width: d.width,
                momentum: d.k,
                spin,
            },
            "plane_wave" => {
                if d.k.iter().any(|x| x.fract() != 0.0) {
                    return Err(invalid("initial_data.k", "plane-wave mode numbers must be integers"));
                }
                InitialDataSpec::PlaneWave {
                    modes: d.k.map(|x| x as i64),
                    spin,
                }
            }
            "file" => InitialDataSpec::File {
                path: d.path.clone().ok_or_else(|| ConfigError::MissingKey {
                    key: "initial_data.path".into(),
                })?,
            },
            other => {
                return Err(invalid(
                    "initial_data.kind",
                    format!("expected gaussian_packet, plane_wave or file, got `{other}`"),
                ))
            }
        };
        spec.validate().map_err(|e| {
            let key = match d.kind.as_str() {
                "gaussian_packet" if !(d.width > 0.0) => "initial_data.width",
                _ => "initial_data.spin",
            };
            invalid(key, e.to_string())
        })?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
