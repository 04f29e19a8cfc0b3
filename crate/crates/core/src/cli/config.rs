//! Run configuration: a JSON object of sections holding flat key/value
//! pairs, with `--section.key value` overrides from the command line.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::defect::{LinearBackend, ProblemData, ScalarFn};
use crate::descent::{Backtracking, DescentConfig};
use crate::flux::FluxModel;
use crate::mesh_fem::{build_mesh, SpaceTimeMesh};
use crate::young::ClassifierConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub flux: FluxSection,
    pub domain: DomainSection,
    pub mesh: MeshSection,
    pub data: DataSection,
    pub descent: DescentSection,
    pub entropy: EntropySection,
    pub ym: YmSection,
    pub checks: ChecksSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluxSection {
    /// `burgers`, `linear` (params: speed) or `polynomial` (params: coefficients).
    pub name: String,
    pub params: Vec<f64>,
}

impl Default for FluxSection {
    fn default() -> Self {
        Self {
            name: "burgers".into(),
            params: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub t_final: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            x_min: -1.0,
            x_max: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    pub nt: usize,
    pub nx: usize,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self { nt: 64, nx: 64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// `u_left` for `x < 0`, `u_right` for `x > 0`.
    Riemann,
    /// `u_left` for `x < step_at`, `u_right` beyond.
    Step,
    /// `Σ u0_coeffs[k] x^k`.
    Polynomial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub u_left: f64,
    pub u_right: f64,
    pub u0: InitialKind,
    pub step_at: f64,
    pub u0_coeffs: Vec<f64>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            u_left: -1.0,
            u_right: 1.0,
            u0: InitialKind::Riemann,
            step_at: 0.0,
            u0_coeffs: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendName {
    Cg,
    CgJacobi,
    Banded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// `u ≡ 0`.
    Zero,
    /// `u(t, x) = u₀(x)`.
    Data,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentSection {
    pub init: InitialGuess,
    pub max_iters: usize,
    pub energy_tol: f64,
    pub grad_tol: f64,
    pub backtracking: bool,
    pub shrink: f64,
    pub max_halvings: usize,
    pub record_every: usize,
    pub max_stored: usize,
    pub rel_tol: f64,
    pub backend: BackendName,
}

impl Default for DescentSection {
    fn default() -> Self {
        let d = DescentConfig::default();
        Self {
            init: InitialGuess::Zero,
            max_iters: d.max_iters,
            energy_tol: d.energy_tol,
            grad_tol: d.grad_tol,
            backtracking: d.backtracking.enabled,
            shrink: d.backtracking.shrink,
            max_halvings: d.backtracking.max_halvings,
            record_every: d.record_every,
            max_stored: d.max_stored,
            rel_tol: d.rel_tol,
            backend: BackendName::Cg,
        }
    }
}

impl DescentSection {
    pub fn to_config(&self) -> DescentConfig {
        DescentConfig {
            max_iters: self.max_iters,
            energy_tol: self.energy_tol,
            grad_tol: self.grad_tol,
            backtracking: Backtracking {
                enabled: self.backtracking,
                shrink: self.shrink,
                max_halvings: self.max_halvings,
            },
            record_every: self.record_every,
            max_stored: self.max_stored,
            rel_tol: self.rel_tol,
        }
    }

    pub fn linear_backend(&self) -> LinearBackend {
        match self.backend {
            BackendName::Cg => LinearBackend::ConjugateGradient { jacobi: false },
            BackendName::CgJacobi => LinearBackend::ConjugateGradient { jacobi: true },
            BackendName::Banded => LinearBackend::BandedDirect,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropySection {
    pub epsilons: Vec<f64>,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    /// Target for the `v = ±εu` discrepancy.
    pub proportionality_tol: f64,
    pub bump_t: f64,
    pub bump_x: f64,
    pub bump_rt: f64,
    pub bump_rx: f64,
}

impl Default for EntropySection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.2, 0.1, 0.05],
            newton_tol: 1e-10,
            newton_max_iters: 50,
            proportionality_tol: 0.05,
            bump_t: 0.5,
            bump_x: 0.0,
            bump_rt: 0.25,
            bump_rx: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YmSection {
    pub bins: usize,
    pub coarsening: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub tail_fraction: f64,
    pub energy_factor: f64,
    pub increment_factor: f64,
    pub gradient_factor: f64,
}

impl Default for YmSection {
    fn default() -> Self {
        let c = ClassifierConfig::default();
        Self {
            bins: 40,
            coarsening: 1,
            z_min: -1.5,
            z_max: 1.5,
            tail_fraction: 0.5,
            energy_factor: c.energy_factor,
            increment_factor: c.increment_factor,
            gradient_factor: c.gradient_factor,
        }
    }
}

impl YmSection {
    pub fn classifier(&self) -> ClassifierConfig {
        ClassifierConfig {
            energy_factor: self.energy_factor,
            increment_factor: self.increment_factor,
            gradient_factor: self.gradient_factor,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommutationCase {
    Scalar,
    Anticommuting,
    Diagonal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksSection {
    pub gradient_meshes: Vec<usize>,
    pub gradient_pairs: usize,
    pub fd_step: f64,
    pub gradient_tol: f64,
    pub oracle_n: usize,
    pub oracle_tol: f64,
    pub sweep_sizes: Vec<usize>,
    pub commutation_cases: Vec<CommutationCase>,
    pub commutation_samples: usize,
    pub commutation_tol: f64,
}

impl Default for ChecksSection {
    fn default() -> Self {
        Self {
            gradient_meshes: vec![8, 16],
            gradient_pairs: 10,
            fd_step: 1e-4,
            gradient_tol: 1e-5,
            oracle_n: 8,
            oracle_tol: 1e-10,
            sweep_sizes: vec![16, 32, 64],
            commutation_cases: vec![CommutationCase::Scalar, CommutationCase::Diagonal],
            commutation_samples: 5,
            commutation_tol: 1e-12,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("bad override {0}")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Reads `path` and applies `--section.key value` (or `--section.key=value`)
/// overrides. Values are parsed as JSON when possible, otherwise kept as
/// strings.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    if !value.is_object() {
        return Err(ConfigError::Parse("top level must be an object".into()));
    }
    apply_overrides(&mut value, overrides)?;
    let config: RunConfig =
        serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn apply_overrides(value: &mut Value, overrides: &[String]) -> Result<(), ConfigError> {
    let mut it = overrides.iter();
    while let Some(flag) = it.next() {
        let body = flag
            .strip_prefix("--")
            .ok_or_else(|| ConfigError::Override(format!("{flag:?}: expected --section.key")))?;
        let (key, raw) = match body.split_once('=') {
            Some((k, v)) => (k, v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| ConfigError::Override(format!("{flag}: missing value")))?;
                (body, v.clone())
            }
        };
        let (section, field) = key
            .split_once('.')
            .ok_or_else(|| ConfigError::Override(format!("{flag}: expected --section.key")))?;
        let parsed = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        let root = value.as_object_mut().expect("checked object");
        let entry = root
            .entry(section.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
        let Some(obj) = entry.as_object_mut() else {
            return Err(ConfigError::Override(format!("{section} is not a section")));
        };
        obj.insert(field.to_string(), parsed);
    }
    Ok(())
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.mesh()?;
        self.flux_model()?;
        self.descent
            .to_config()
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        let d = &self.data;
        if !(d.u_left.is_finite() && d.u_right.is_finite() && d.step_at.is_finite()) {
            return Err(invalid("data values must be finite"));
        }
        if d.u0 == InitialKind::Polynomial && d.u0_coeffs.is_empty() {
            return Err(invalid("data.u0 = polynomial needs data.u0_coeffs"));
        }
        if d.u0_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("data.u0_coeffs must be finite"));
        }
        let e = &self.entropy;
        if e.epsilons.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(invalid("entropy.epsilons must be positive"));
        }
        if !(e.newton_tol > 0.0) || e.newton_max_iters == 0 {
            return Err(invalid("entropy.newton_tol and newton_max_iters must be positive"));
        }
        if !(e.bump_rt > 0.0 && e.bump_rx > 0.0) {
            return Err(invalid("entropy bump radii must be positive"));
        }
        let y = &self.ym;
        if y.bins == 0 || y.coarsening == 0 {
            return Err(invalid("ym.bins and ym.coarsening must be >= 1"));
        }
        if !(y.z_min < y.z_max) {
            return Err(invalid("ym.z_min must be below ym.z_max"));
        }
        if !(y.tail_fraction > 0.0 && y.tail_fraction <= 1.0) {
            return Err(invalid("ym.tail_fraction must lie in (0, 1]"));
        }
        let c = &self.checks;
        if c.gradient_meshes.iter().chain(&c.sweep_sizes).any(|&n| n == 0) || c.oracle_n == 0 {
            return Err(invalid("check mesh sizes must be >= 1"));
        }
        if !(c.fd_step > 0.0) {
            return Err(invalid("checks.fd_step must be positive"));
        }
        if c.commutation_samples == 0 {
            return Err(invalid("checks.commutation_samples must be >= 1"));
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<SpaceTimeMesh, ConfigError> {
        self.mesh_with(self.mesh.nt, self.mesh.nx)
    }

    pub fn mesh_with(&self, nt: usize, nx: usize) -> Result<SpaceTimeMesh, ConfigError> {
        let d = &self.domain;
        build_mesh(nt, nx, d.t_final, d.x_min, d.x_max).map_err(|e| invalid(e.to_string()))
    }

    pub fn flux_model(&self) -> Result<FluxModel, ConfigError> {
        FluxModel::builtin(&self.flux.name, &self.flux.params).map_err(|e| invalid(e.to_string()))
    }

    /// Riemann states when the data form a Riemann problem at `x = 0`.
    pub fn riemann_states(&self) -> Option<(f64, f64)> {
        let d = &self.data;
        match d.u0 {
            InitialKind::Riemann => Some((d.u_left, d.u_right)),
            InitialKind::Step if d.step_at == 0.0 => Some((d.u_left, d.u_right)),
            _ => None,
        }
    }

    pub fn problem_on(&self, mesh: SpaceTimeMesh) -> crate::Result<ProblemData> {
        let flux = self.flux_model().map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
        let d = self.data.clone();
        let problem = match d.u0 {
            InitialKind::Riemann => ProblemData::riemann(mesh, flux, d.u_left, d.u_right)?,
            InitialKind::Step | InitialKind::Polynomial => {
                let (ul, ur, at, coeffs) = (d.u_left, d.u_right, d.step_at, d.u0_coeffs.clone());
                let u0: ScalarFn = match d.u0 {
                    InitialKind::Step => Arc::new(move |x: f64| if x < at { ul } else { ur }),
                    _ => Arc::new(move |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)),
                };
                ProblemData::new(mesh, flux, u0, Arc::new(move |_| ul), Arc::new(move |_| ur))?
            }
        };
        Ok(problem.with_backend(self.descent.linear_backend()))
    }
}
