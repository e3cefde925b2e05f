//! TOML run configuration: the time change, step-controller and sampling
//! sizes, seed, experiment selector and output directory. The configuration
//! file is the single source of reproducibility — its SHA-256 hash prefixes
//! the run id.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::paths::StepController;
use crate::timechange::TimeChangeSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum Experiment {
    ValidateTimechange,
    KernelsTable,
    Simulate,
    HittingDist,
    VerifyBm,
    VerifyZero,
    Compare,
    FilterCompare,
    All,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::ValidateTimechange => "validate-timechange",
            Experiment::KernelsTable => "kernels-table",
            Experiment::Simulate => "simulate",
            Experiment::HittingDist => "hitting-dist",
            Experiment::VerifyBm => "verify-bm",
            Experiment::VerifyZero => "verify-zero",
            Experiment::Compare => "compare",
            Experiment::FilterCompare => "filter-compare",
            Experiment::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt_base: f64,
    pub dt_min: f64,
    pub drift_cap: f64,
    pub terminal_guard: f64,
    pub n_paths: usize,
    pub n_particles: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let ctrl = StepController::default();
        Self {
            dt_base: ctrl.dt_base,
            dt_min: ctrl.dt_min,
            drift_cap: ctrl.drift_cap,
            terminal_guard: ctrl.terminal_guard,
            n_paths: 10_000,
            n_particles: 4000,
        }
    }
}

impl SimulationConfig {
    pub fn controller(&self) -> StepController {
        StepController {
            dt_base: self.dt_base,
            dt_min: self.dt_min,
            drift_cap: self.drift_cap,
            terminal_guard: self.terminal_guard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub experiment: Experiment,
    pub out_dir: String,
    /// Real-time horizon for simulation experiments.
    pub horizon: f64,
    /// Thread cap (0 = all cores); overridden by DYNBRIDGE_THREADS.
    #[serde(default)]
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub timechange: TimeChangeSpec,
    pub simulation: SimulationConfig,
    pub run: RunSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            timechange: TimeChangeSpec::canonical(4.0),
            simulation: SimulationConfig::default(),
            run: RunSection {
                seed: 42,
                experiment: Experiment::All,
                out_dir: "out".into(),
                horizon: 1.0,
                threads: 0,
            },
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(s).map_err(|e| Error::Config(format!("TOML parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("serialize: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let sim = &self.simulation;
        for (name, v) in [
            ("dt_base", sim.dt_base),
            ("dt_min", sim.dt_min),
            ("drift_cap", sim.drift_cap),
            ("terminal_guard", sim.terminal_guard),
            ("horizon", self.run.horizon),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "[simulation/run] {name} must be positive and finite; got {v}"
                )));
            }
        }
        if sim.dt_min > sim.dt_base {
            return Err(Error::Config(format!(
                "dt_min ({}) exceeds dt_base ({})",
                sim.dt_min, sim.dt_base
            )));
        }
        if sim.n_paths == 0 || sim.n_particles == 0 {
            return Err(Error::Config("n_paths and n_particles must be positive".into()));
        }
        if self.run.horizon > self.timechange.t_max {
            return Err(Error::Config(format!(
                "horizon {} exceeds timechange t_max {}",
                self.run.horizon, self.timechange.t_max
            )));
        }
        // surface invalid time-change parameters through the constructors
        match &self.timechange.family {
            crate::timechange::TimeChangeFamily::PowerSingular { gamma, alpha } => {
                TimeChangeSpec::power(*gamma, *alpha, self.timechange.t_max)
            }
            crate::timechange::TimeChangeFamily::Affine { c } => {
                TimeChangeSpec::affine(*c, self.timechange.t_max)
            }
            crate::timechange::TimeChangeFamily::Custom { knots, sigma_sq } => {
                TimeChangeSpec::custom(knots.clone(), sigma_sq.clone(), self.timechange.t_max)
            }
        }
        .map_err(|e| Error::Config(format!("[timechange] {e}")))?;
        Ok(())
    }

    /// SHA-256 of the canonical serialized form.
    pub fn hash(&self) -> Result<[u8; 32]> {
        let canonical = self.to_toml_string()?;
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        Ok(hasher.finalize().into())
    }

    /// run-id = first 12 hex chars of the config hash + seed.
    pub fn run_id(&self) -> Result<String> {
        let hash = self.hash()?;
        let hex: String = hash.iter().take(6).map(|b| format!("{b:02x}")).collect();
        Ok(format!("{hex}-s{}", self.run.seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrips_through_toml() {
        let config = RunConfig::default();
        let text = config.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(config, back);
        assert_eq!(config.hash().unwrap(), back.hash().unwrap());
    }

    #[test]
    fn parses_handwritten_toml() {
        let text = r#"
[timechange]
family = "power"
gamma = 1.0
alpha = 0.33333333333333331
t_max = 4.0

[simulation]
dt_base = 1e-3
dt_min = 1e-7
drift_cap = 5.0
terminal_guard = 0.1
n_paths = 500
n_particles = 1000

[run]
seed = 7
experiment = "hitting-dist"
out_dir = "out"
horizon = 1.0
"#;
        let config = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(config.run.seed, 7);
        assert_eq!(config.run.experiment, Experiment::HittingDist);
        assert_eq!(config.timechange, TimeChangeSpec::canonical(4.0));
        assert_eq!(config.run.threads, 0);
    }

    #[test]
    fn rejects_bad_values() {
        let mut config = RunConfig::default();
        config.simulation.dt_base = -1.0;
        assert!(config.validate().is_err());

        let mut config = RunConfig::default();
        config.run.horizon = 100.0;
        assert!(config.validate().is_err());

        let text = RunConfig::default().to_toml_string().unwrap();
        let broken = text.replace("alpha = ", "alpha = 2.0 # ");
        assert!(RunConfig::from_toml_str(&broken).is_err());
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = RunConfig::default().to_toml_string().unwrap() + "\n[extra]\nfoo = 1\n";
        assert!(RunConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn run_id_stable_and_seed_sensitive() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.run_id().unwrap(), b.run_id().unwrap());
        b.run.seed = 43;
        assert_ne!(a.run_id().unwrap(), b.run_id().unwrap());
        assert!(a.run_id().unwrap().ends_with("-s42"));
    }
}
