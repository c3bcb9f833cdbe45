//! Experiment configuration: a TOML file of `key = value` lines grouped
//! under `[system]`, `[run]`, `[overlap_sweep]` and `[crossover]`.
//!
//! ```toml
//! seed = 7
//!
//! [system]
//! n_atoms = 8
//! spacing = 1.4        # Bohr
//! window = 3
//!
//! [run]
//! variant = "quadratic"  # or "linear"
//! policy = "exact"       # exact | swap | swap_ae | tomography
//! threshold = 1e-5
//! ```
//!
//! Every key is optional. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const OUTPUT_DIR_ENV: &str = "QBE_OUTPUT_DIR";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub system: SystemConfig,
    pub run: RunConfig,
    pub overlap_sweep: OverlapSweepConfig,
    pub crossover: CrossoverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n_atoms: usize,
    pub spacing: f64,
    /// Integrals from a file instead of a generated chain; orbitals are
    /// taken to be ordered along the chain.
    pub fcidump: Option<PathBuf>,
    pub window: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { n_atoms: 8, spacing: 1.4, fcidump: None, window: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Quadratic,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Exact,
    Swap,
    SwapAe,
    Tomography,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub variant: Variant,
    pub policy: Policy,
    /// Target precision of sampled overlap estimates.
    pub epsilon: f64,
    /// Failure probability of amplitude estimation.
    pub delta: f64,
    /// Tomography cost prefactor.
    pub tomography_d: f64,
    pub lambda0: f64,
    pub gamma: f64,
    pub threshold: f64,
    pub max_outer: usize,
    pub inner_max_iterations: usize,
    pub linear_step: f64,
    pub number_constraint: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Quadratic,
            policy: Policy::Exact,
            epsilon: 1e-3,
            delta: 0.05,
            tomography_d: 1.0,
            lambda0: 1.0,
            gamma: 2.0,
            threshold: 1e-5,
            max_outer: 30,
            inner_max_iterations: 200,
            linear_step: 1.0,
            number_constraint: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlapSweepConfig {
    pub epsilon: f64,
    pub qubits: Vec<u32>,
    pub tomography_d: f64,
    /// Overlap amplitude used for the SWAP column.
    pub s: f64,
    /// Shot counts for the two-H4 overlap estimate.
    pub shots: Vec<u64>,
}

impl Default for OverlapSweepConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            qubits: vec![2, 4, 6, 8],
            tomography_d: 1.0,
            s: 0.0,
            shots: vec![1_000, 4_000, 16_000, 64_000, 250_000, 1_000_000, 4_000_000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossoverConfig {
    /// Overlap amplitude of the precision sweep.
    pub s: f64,
    /// Precision of the overlap sweep.
    pub epsilon: f64,
    pub delta: f64,
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub epsilon_points: usize,
    pub s_points: usize,
    pub s_max: f64,
}

impl Default for CrossoverConfig {
    fn default() -> Self {
        Self {
            s: 0.4,
            epsilon: 1e-3,
            delta: 0.05,
            epsilon_min: 1e-4,
            epsilon_max: 1e-2,
            epsilon_points: 41,
            s_points: 100,
            s_max: 0.99,
        }
    }
}

fn field(name: &str, msg: impl Into<String>) -> CliError {
    CliError::Config { field: name.to_string(), msg: msg.into() }
}

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(field(name, format!("must be positive, got {x}")))
    }
}

fn open_unit(name: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(field(name, format!("must lie in (0, 1), got {x}")))
    }
}

fn unit_interval(name: &str, x: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(field(name, format!("must lie in [0, 1], got {x}")))
    }
}

impl ExperimentConfig {
    /// Reads and validates a config file. Relative paths inside it are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| field("config", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &cfg.system.fcidump {
            if p.is_relative() {
                cfg.system.fcidump = Some(base.join(p));
            }
        }
        if let Some(p) = &cfg.output_dir {
            if p.is_relative() {
                cfg.output_dir = Some(base.join(p));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let name =
                msg.split('`').nth(1).filter(|_| msg.starts_with("unknown field")).unwrap_or("config").to_string();
            CliError::Config { field: name, msg: e.to_string().trim().to_string() }
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.system;
        match &s.fcidump {
            Some(p) if !p.is_file() => {
                return Err(field("system.fcidump", format!("file {} does not exist", p.display())));
            }
            Some(_) => {}
            None => {
                if s.n_atoms == 0 || s.n_atoms > 64 {
                    return Err(field("system.n_atoms", format!("must lie in 1..=64, got {}", s.n_atoms)));
                }
                positive("system.spacing", s.spacing)?;
                if s.window > s.n_atoms {
                    return Err(field("system.window", format!("{} exceeds system.n_atoms {}", s.window, s.n_atoms)));
                }
            }
        }
        if s.window == 0 || s.window.is_multiple_of(2) {
            return Err(field("system.window", format!("must be odd, got {}", s.window)));
        }

        let r = &self.run;
        open_unit("run.epsilon", r.epsilon)?;
        open_unit("run.delta", r.delta)?;
        positive("run.tomography_d", r.tomography_d)?;
        positive("run.lambda0", r.lambda0)?;
        if !(r.gamma > 1.0) {
            return Err(field("run.gamma", format!("must exceed 1, got {}", r.gamma)));
        }
        positive("run.threshold", r.threshold)?;
        positive("run.linear_step", r.linear_step)?;
        if r.max_outer == 0 {
            return Err(field("run.max_outer", "must be at least 1"));
        }
        if r.inner_max_iterations == 0 {
            return Err(field("run.inner_max_iterations", "must be at least 1"));
        }
        if r.variant == Variant::Linear && r.policy != Policy::Exact {
            return Err(field("run.policy", "the linear variant runs with the exact policy only"));
        }

        let o = &self.overlap_sweep;
        open_unit("overlap_sweep.epsilon", o.epsilon)?;
        positive("overlap_sweep.tomography_d", o.tomography_d)?;
        unit_interval("overlap_sweep.s", o.s)?;
        if o.qubits.is_empty() || o.qubits.iter().any(|&m| m == 0 || m > 8) {
            return Err(field("overlap_sweep.qubits", "needs region sizes in 1..=8 (an H4 chain has 8 qubits)"));
        }
        if o.shots.is_empty() || o.shots.contains(&0) {
            return Err(field("overlap_sweep.shots", "needs positive shot counts"));
        }

        let c = &self.crossover;
        unit_interval("crossover.s", c.s)?;
        open_unit("crossover.epsilon", c.epsilon)?;
        open_unit("crossover.delta", c.delta)?;
        open_unit("crossover.epsilon_min", c.epsilon_min)?;
        open_unit("crossover.epsilon_max", c.epsilon_max)?;
        if c.epsilon_min >= c.epsilon_max {
            return Err(field("crossover.epsilon_min", "must be below crossover.epsilon_max"));
        }
        if c.epsilon_points < 2 {
            return Err(field("crossover.epsilon_points", "needs at least 2 points"));
        }
        if c.s_points < 2 {
            return Err(field("crossover.s_points", "needs at least 2 points"));
        }
        if !(c.s_max > 0.0 && c.s_max < 1.0) {
            return Err(field("crossover.s_max", format!("must lie in (0, 1), got {}", c.s_max)));
        }
        Ok(())
    }

    /// SHA-256 prefix of the canonical serialization; the output directory
    /// is left out because it does not affect results.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = None;
        let text = toml::to_string(&canon).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Command-line flag, then config file, then environment, then `.`.
    pub fn resolve_output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_hash_is_stable() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.hash(), ExperimentConfig::parse("").unwrap().hash());
        assert_eq!(cfg.hash().len(), 16);
    }

    #[test]
    fn formatting_does_not_change_hash() {
        let a = ExperimentConfig::parse("seed = 3\n[run]\nthreshold = 1e-6\n").unwrap();
        let b = ExperimentConfig::parse("seed=3 # same\n\n[run]\n  threshold=0.000001").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::parse("seed = 4\n[run]\nthreshold = 1e-6\n").unwrap();
        assert_ne!(a.hash(), c.hash());
        let mut d = a.clone();
        d.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), d.hash());
    }

    #[test]
    fn errors_name_the_field() {
        let err = ExperimentConfig::parse("[run]\nthreshhold = 1\n").unwrap_err();
        assert!(matches!(err, CliError::Config { ref field, .. } if field == "threshhold"), "{err}");
        let cfg = ExperimentConfig::parse("[run]\ngamma = 0.5\n").unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config { ref field, .. }) if field == "run.gamma"));
        let cfg = ExperimentConfig::parse("[system]\nwindow = 2\n").unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config { ref field, .. }) if field == "system.window"));
        let cfg = ExperimentConfig::parse("[run]\nvariant = \"linear\"\npolicy = \"swap\"\n").unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config { ref field, .. }) if field == "run.policy"));
        assert!(ExperimentConfig::parse("[run]\npolicy = \"magic\"\n").is_err());
    }
}
