//! Experiment configuration: a single TOML file, validated at load.
//!
//! Every field has a default except the experiment kind, and the resolved
//! values (defaults included) are echoed into the run manifest. Parameter
//! constraints are hard errors that name the violated inequality.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use stoheat_core::drift::DriftSpec;
use stoheat_core::grid::GridSpec;
use stoheat_core::noise::{dalang_integral, NoiseKind, NoiseSpec};
use stoheat_core::stochastic::SigmaSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error in {path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("{0}")]
    Module(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DeterministicMap,
    Yosida,
    NoiseValidate,
    StochConv,
    Picard,
    Kolmogorov,
    FullAcceptance,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::DeterministicMap => "deterministic-map",
            ExperimentKind::Yosida => "yosida",
            ExperimentKind::NoiseValidate => "noise-validate",
            ExperimentKind::StochConv => "stoch-conv",
            ExperimentKind::Picard => "picard",
            ExperimentKind::Kolmogorov => "kolmogorov",
            ExperimentKind::FullAcceptance => "full-acceptance",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_dim")]
    pub dim: u8,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_dim() -> u8 {
    1
}
fn default_half_width() -> f64 {
    32.0
}
fn default_points() -> usize {
    1024
}
fn default_horizon() -> f64 {
    0.25
}
fn default_steps() -> usize {
    250
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            half_width: default_half_width(),
            points: default_points(),
            horizon: default_horizon(),
            steps: default_steps(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSection {
    #[serde(default = "default_drift_name")]
    pub name: String,
    /// Leading coefficient for `odd-polynomial`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leading: Option<f64>,
    /// Lower-order coefficients for `odd-polynomial` (degrees 0..=2m).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
}

fn default_drift_name() -> String {
    "allen-cahn".into()
}

impl Default for DriftSection {
    fn default() -> Self {
        Self { name: default_drift_name(), leading: None, lower: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaSection {
    #[serde(default = "default_sigma_name")]
    pub name: String,
    /// Value for `constant`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

fn default_sigma_name() -> String {
    "one".into()
}

impl Default for SigmaSection {
    fn default() -> Self {
        Self { name: default_sigma_name(), value: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default = "default_noise_kind")]
    pub kind: String,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corr_len: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

fn default_noise_kind() -> String {
    "white".into()
}
fn default_eta() -> f64 {
    0.25
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { kind: default_noise_kind(), eta: default_eta(), corr_len: None, alpha: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_centers")]
    pub centers_per_dim: usize,
}

fn default_theta() -> f64 {
    0.5
}
fn default_p() -> f64 {
    40.0
}
fn default_centers() -> usize {
    3
}

impl Default for WeightSection {
    fn default() -> Self {
        Self { theta: default_theta(), p: default_p(), centers_per_dim: default_centers() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KolmogorovSection {
    /// `brownian` or `stationary`.
    #[serde(default = "default_sampler")]
    pub sampler: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corr_len: Option<f64>,
    /// Weight exponents to scan.
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
}

fn default_sampler() -> String {
    "brownian".into()
}
fn default_thetas() -> Vec<f64> {
    vec![0.06, 0.3, 0.75, 1.2]
}

impl Default for KolmogorovSection {
    fn default() -> Self {
        Self { sampler: default_sampler(), gamma: None, corr_len: None, thetas: default_thetas() }
    }
}

/// The declarative experiment file. Only `kind` is mandatory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub drift: DriftSection,
    #[serde(default)]
    pub sigma: SigmaSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub weights: WeightSection,
    #[serde(default)]
    pub kolmogorov: KolmogorovSection,
    /// Picard stopping tolerance in the weighted metric.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Dump representative solution fields in the binary container.
    #[serde(default)]
    pub dump_fields: bool,
}

fn default_replicas() -> usize {
    100
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    50
}

/// Domain objects built from a validated config.
#[derive(Debug)]
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub grid: GridSpec,
    pub drift: DriftSpec,
    pub sigma: SigmaSpec,
    pub noise: NoiseSpec,
    pub centers: Vec<[f64; 2]>,
}

fn build_drift(section: &DriftSection) -> Result<DriftSpec, ConfigError> {
    match section.name.as_str() {
        "allen-cahn" => Ok(DriftSpec::allen_cahn()),
        "cubic-decay" => Ok(DriftSpec::cubic_decay()),
        "linear-decay" => Ok(DriftSpec::linear_decay()),
        "step-decay" => Ok(DriftSpec::step_decay()),
        "sinh-decay" => Ok(DriftSpec::sinh_decay()),
        "zero" => Ok(DriftSpec::zero()),
        "odd-polynomial" => {
            let leading = section.leading.ok_or_else(|| {
                ConfigError::Constraint("odd-polynomial needs drift.leading".into())
            })?;
            let lower = section.lower.clone().ok_or_else(|| {
                ConfigError::Constraint("odd-polynomial needs drift.lower".into())
            })?;
            DriftSpec::odd_polynomial(leading, &lower).map_err(|e| ConfigError::Module(e.to_string()))
        }
        other => Err(ConfigError::Constraint(format!("unknown drift '{other}'"))),
    }
}

fn build_sigma(section: &SigmaSection) -> Result<SigmaSpec, ConfigError> {
    match section.name.as_str() {
        "one" => Ok(SigmaSpec::one()),
        "zero" => Ok(SigmaSpec::zero()),
        "sin" => Ok(SigmaSpec::sin()),
        "identity" => Ok(SigmaSpec::identity()),
        "constant" => {
            let v = section.value.ok_or_else(|| {
                ConfigError::Constraint("constant sigma needs sigma.value".into())
            })?;
            Ok(SigmaSpec::constant(v))
        }
        other => Err(ConfigError::Constraint(format!("unknown sigma '{other}'"))),
    }
}

fn build_noise(section: &NoiseSection, dim: u8) -> Result<NoiseSpec, ConfigError> {
    let kind = match section.kind.as_str() {
        "white" => NoiseKind::White,
        "gaussian" => NoiseKind::Gaussian { corr_len: section.corr_len.unwrap_or(1.0) },
        "riesz" => NoiseKind::Riesz {
            alpha: section
                .alpha
                .ok_or_else(|| ConfigError::Constraint("riesz noise needs noise.alpha".into()))?,
        },
        other => return Err(ConfigError::Constraint(format!("unknown noise kind '{other}'"))),
    };
    NoiseSpec::new(kind, dim, section.eta).map_err(|e| ConfigError::Module(e.to_string()))
}

/// Parse and validate a config file.
pub fn load_config(path: &Path) -> Result<ResolvedExperiment, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
    let config: ExperimentConfig = toml::from_str(&text)
        .map_err(|source| ConfigError::Parse { path: path.to_owned(), source: Box::new(source) })?;
    resolve(config)
}

/// Validate an in-memory config and construct the domain objects.
pub fn resolve(config: ExperimentConfig) -> Result<ResolvedExperiment, ConfigError> {
    let grid = GridSpec::new(
        config.grid.dim,
        config.grid.half_width,
        config.grid.points,
        config.grid.horizon,
        config.grid.steps,
    )
    .map_err(|e| ConfigError::Module(e.to_string()))?;
    let drift = build_drift(&config.drift)?;
    let sigma = build_sigma(&config.sigma)?;
    let noise = build_noise(&config.noise, grid.dim())?;

    // Strong Dalang condition at the claimed exponent.
    let dalang = dalang_integral(&noise, noise.eta(), 100.0)
        .map_err(|e| ConfigError::Module(e.to_string()))?;
    if !dalang.finite {
        return Err(ConfigError::Constraint(format!(
            "noise kind '{}' with eta = {} fails the strong Dalang condition \
             (the spectral integral diverges)",
            config.noise.kind, config.noise.eta
        )));
    }

    // Growth-safety of the weight exponent against the drift envelope.
    let theta = config.weights.theta;
    if !(theta > 0.0) {
        return Err(ConfigError::Constraint(format!("theta = {theta} must be positive")));
    }
    let nu = drift.growth_nu();
    if nu > 0.0 && theta * nu >= 2.0 {
        return Err(ConfigError::Constraint(format!(
            "theta * nu = {} >= 2: drift growth defeats the weighted integrand",
            theta * nu
        )));
    }

    // Moment-order floor for solvability.
    let d1 = (grid.dim() + 1) as f64;
    let p = config.weights.p;
    let p_floor = ((1.0 + theta) * d1 / theta).max(2.0 * d1 / noise.eta());
    if p <= p_floor {
        return Err(ConfigError::Constraint(format!(
            "p = {p} <= max{{(1+theta)(d+1)/theta, 2(d+1)/eta}} = {p_floor:.4}"
        )));
    }

    if !(config.tol > 0.0) {
        return Err(ConfigError::Constraint(format!("tol = {} must be positive", config.tol)));
    }
    if config.replicas == 0 {
        return Err(ConfigError::Constraint("replicas must be >= 1".into()));
    }
    if config.kind == ExperimentKind::Kolmogorov {
        match config.kolmogorov.sampler.as_str() {
            "brownian" | "stationary" => {}
            other => {
                return Err(ConfigError::Constraint(format!("unknown sampler '{other}'")));
            }
        }
        if grid.dim() != 1 {
            return Err(ConfigError::Constraint(
                "kolmogorov experiments run on 1-d lattices".into(),
            ));
        }
    }

    let centers = grid.center_lattice(config.weights.centers_per_dim);
    Ok(ResolvedExperiment { config, grid, drift, sigma, noise, centers })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(contents: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("stoheat-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("{:x}.toml", rand_suffix(contents)));
        std::fs::write(&path, contents).unwrap();
        path
    }

    fn rand_suffix(s: &str) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        s.hash(&mut h);
        h.finish()
    }

    #[test]
    fn shipped_example_configs_validate() {
        let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        for name in ["picard.toml", "noise-validate.toml", "kolmogorov.toml"] {
            let path = root.join(name);
            load_config(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn minimal_valid_config_loads() {
        // d=1 white noise, eta=0.25, p=40, theta=0.5, allen-cahn:
        // the floor is max{(1.5*2)/0.5, 4/0.25} = 16 < 40.
        let path = write_temp(
            r#"
kind = "picard"
[noise]
kind = "white"
eta = 0.25
[weights]
theta = 0.5
p = 40.0
"#,
        );
        let resolved = load_config(&path).unwrap();
        assert_eq!(resolved.config.kind, ExperimentKind::Picard);
        assert_eq!(resolved.config.replicas, 100);
        assert_eq!(resolved.grid.points_per_dim(), 1024);
        assert_eq!(resolved.centers.len(), 3);
    }

    #[test]
    fn dalang_violation_is_a_hard_error() {
        let path = write_temp(
            r#"
kind = "picard"
[noise]
kind = "white"
eta = 0.75
"#,
        );
        match load_config(&path) {
            Err(ConfigError::Constraint(msg)) => assert!(msg.contains("Dalang"), "{msg}"),
            other => panic!("expected Dalang rejection, got {other:?}"),
        }
    }

    #[test]
    fn growth_unsafe_theta_is_rejected() {
        // Exponential-growth drift (nu = 1) with theta = 3: theta*nu >= 2.
        let path = write_temp(
            r#"
kind = "deterministic-map"
[drift]
name = "sinh-decay"
[weights]
theta = 3.0
p = 40.0
"#,
        );
        match load_config(&path) {
            Err(ConfigError::Constraint(msg)) => assert!(msg.contains("theta * nu"), "{msg}"),
            other => panic!("expected growth rejection, got {other:?}"),
        }
    }

    #[test]
    fn low_moment_order_is_rejected_with_the_inequality() {
        let path = write_temp(
            r#"
kind = "stoch-conv"
[noise]
kind = "white"
eta = 0.25
[weights]
theta = 1.0
p = 8.0
"#,
        );
        match load_config(&path) {
            Err(ConfigError::Constraint(msg)) => {
                assert!(msg.contains("2(d+1)/eta"), "{msg}");
            }
            other => panic!("expected moment rejection, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_location() {
        let path = write_temp("kind = \"picard\"\n[grid\n");
        match load_config(&path) {
            Err(ConfigError::Parse { source, .. }) => {
                let text = source.to_string();
                assert!(text.contains("line"), "{text}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let path = write_temp("kind = \"picard\"\nbogus = 1\n");
        assert!(matches!(load_config(&path), Err(ConfigError::Parse { .. })));
    }
}
