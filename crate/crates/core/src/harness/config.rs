//! Experiment configuration: one human-editable TOML file per run.
//!
//! ```toml
//! experiment = "variance_check"
//! master_seed = 42
//! replicates = 100000
//! workers = 0                 # 0 = all cores
//! out_dir = "runs/variance"
//!
//! [phi]
//! kind = "constant"           # constant | homogeneous | gaussian_bump |
//! c = 1.0                     # indicator | table
//!
//! [grid]
//! n_time = 512
//! n_space = 512
//! y_max = 24.0
//!
//! [ladder]
//! t = [1.0, 4.0, 16.0]
//! coupling = "none"           # none | c_sqrt_t | t_quarter | linear_t
//! c = 1.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::phi::{PhiSpec, TableFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    VarianceCheck,
    ScalingIdentity,
    Thm12,
    Thm13,
    Thm31,
    Thm32,
    ChaosRates,
    Lemma21Cauchy,
    NonlinearRateProbe,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::VarianceCheck => "variance_check",
            ExperimentKind::ScalingIdentity => "scaling_identity",
            ExperimentKind::Thm12 => "thm12",
            ExperimentKind::Thm13 => "thm13",
            ExperimentKind::Thm31 => "thm31",
            ExperimentKind::Thm32 => "thm32",
            ExperimentKind::ChaosRates => "chaos_rates",
            ExperimentKind::Lemma21Cauchy => "lemma21_cauchy",
            ExperimentKind::NonlinearRateProbe => "nonlinear_rate_probe",
        }
    }

    /// Human-readable statement of what the experiment verifies.
    pub fn claim(&self) -> &'static str {
        match self {
            ExperimentKind::VarianceCheck => "exact variance law for constant coefficients",
            ExperimentKind::ScalingIdentity => "distributional identity of the rescaled representation",
            ExperimentKind::Thm12 => "homogeneous-coefficient limit law (theorem 1.2)",
            ExperimentKind::Thm13 => "mixed-Gaussian local-time limit (theorem 1.3)",
            ExperimentKind::Thm31 => "space-average regimes, homogeneous case (theorem 3.1)",
            ExperimentKind::Thm32 => "space-average regimes, square-integrable case (theorem 3.2)",
            ExperimentKind::ChaosRates => "per-chaos normalization rates",
            ExperimentKind::Lemma21Cauchy => "local-time mollification Cauchy property (lemma 2.1)",
            ExperimentKind::NonlinearRateProbe => "EXPLORATORY nonlinear normalization probe",
        }
    }
}

/// Coefficient selection in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiConfig {
    Constant { c: f64 },
    Homogeneous { alpha: f64, c_plus: f64, c_minus: f64 },
    GaussianBump,
    Indicator { a: f64, b: f64 },
    Table { points: Vec<(f64, f64)> },
}

impl PhiConfig {
    pub fn to_phi(&self) -> Result<PhiSpec> {
        let phi = match self {
            PhiConfig::Constant { c } => PhiSpec::Constant(*c),
            PhiConfig::Homogeneous { alpha, c_plus, c_minus } => PhiSpec::HomogeneousPower {
                alpha: *alpha,
                c_plus: *c_plus,
                c_minus: *c_minus,
            },
            PhiConfig::GaussianBump => PhiSpec::GaussianBump,
            PhiConfig::Indicator { a, b } => PhiSpec::Indicator { a: *a, b: *b },
            PhiConfig::Table { points } => PhiSpec::Table(TableFunction::new(points.clone())?),
        };
        phi.validate()?;
        Ok(phi)
    }
}

/// Rule tying the averaging radius R to t along the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// No radius (pointwise experiments).
    None,
    /// R = c sqrt(t): comparable regime.
    CSqrtT,
    /// R = t^{1/4}: vanishing-ratio regime.
    TQuarter,
    /// R = t: diverging-ratio regime.
    LinearT,
}

impl Coupling {
    pub fn radius(&self, c: f64, t: f64) -> Option<f64> {
        match self {
            Coupling::None => None,
            Coupling::CSqrtT => Some(c * t.sqrt()),
            Coupling::TQuarter => Some(t.powf(0.25)),
            Coupling::LinearT => Some(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_time: usize,
    pub n_space: usize,
    pub y_max: f64,
}

impl GridConfig {
    pub fn to_grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.n_time, self.n_space, self.y_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Tolerance multiplier on Monte Carlo standard errors.
    pub sigma_multiplier: f64,
    /// Allowed deviation of fitted exponents.
    pub exponent_window: f64,
    /// p-value threshold for distributional tests.
    pub p_threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { sigma_multiplier: 3.0, exponent_window: 0.1, p_threshold: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    pub t: Vec<f64>,
    #[serde(default = "default_coupling")]
    pub coupling: Coupling,
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_coupling() -> Coupling {
    Coupling::None
}
fn default_c() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub master_seed: u64,
    pub replicates: usize,
    #[serde(default)]
    pub workers: usize,
    pub out_dir: PathBuf,
    pub phi: PhiConfig,
    pub grid: GridConfig,
    pub ladder: LadderConfig,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    /// Evaluation point for pointwise experiments.
    #[serde(default)]
    pub x_eval: f64,
    /// Chaos orders for chaos_rates (default [1, 2]).
    #[serde(default)]
    pub chaos_orders: Option<Vec<usize>>,
    /// Decreasing mollification ladder for lemma21_cauchy
    /// (default [0.2, 0.1, 0.05]).
    #[serde(default)]
    pub epsilon_ladder: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(vec![format!("parse error: {e}")]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances.unwrap_or_default()
    }

    /// Collect every violation instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        let statistical = !matches!(self.experiment, ExperimentKind::NonlinearRateProbe);
        if statistical && self.replicates < 100 {
            violations.push(format!(
                "replicates must be >= 100 for statistical experiments, got {}",
                self.replicates
            ));
        }
        if self.replicates == 0 {
            violations.push("replicates must be positive".into());
        }
        if self.ladder.t.is_empty() {
            violations.push("ladder.t must be nonempty".into());
        }
        if self.ladder.t.iter().any(|&t| !(t > 0.0)) {
            violations.push("ladder.t entries must be positive".into());
        }
        if self.ladder.t.windows(2).any(|w| w[1] <= w[0]) {
            violations.push("ladder.t must be strictly increasing".into());
        }
        if matches!(self.ladder.coupling, Coupling::CSqrtT) && !(self.ladder.c > 0.0) {
            violations.push(format!("coupling c must be positive, got {}", self.ladder.c));
        }
        if let Err(e) = self.grid.to_grid() {
            violations.push(format!("grid: {e}"));
        }
        if let Err(e) = self.phi.to_phi() {
            violations.push(format!("phi: {e}"));
        }
        let needs_radius = matches!(self.experiment, ExperimentKind::Thm31 | ExperimentKind::Thm32);
        if needs_radius && matches!(self.ladder.coupling, Coupling::None) {
            violations.push("space-average experiments need a radius coupling".into());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(violations))
        }
    }

    /// Digest of the canonical JSON encoding, timestamp-free.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        let out = h.finalize();
        out.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_toml() -> &'static str {
        r#"
experiment = "variance_check"
master_seed = 42
replicates = 1000
out_dir = "runs/test"

[phi]
kind = "constant"
c = 1.0

[grid]
n_time = 64
n_space = 64
y_max = 7.0

[ladder]
t = [1.0, 4.0]
"#
    }

    #[test]
    fn parses_and_digests() {
        let cfg = ExperimentConfig::from_toml_str(base_toml()).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::VarianceCheck);
        assert_eq!(cfg.digest().len(), 16);
        let again = ExperimentConfig::from_toml_str(base_toml()).unwrap();
        assert_eq!(cfg.digest(), again.digest());
    }

    #[test]
    fn collects_all_violations() {
        let bad = r#"
experiment = "thm31"
master_seed = 1
replicates = 10
out_dir = "runs/x"

[phi]
kind = "indicator"
a = 2.0
b = 1.0

[grid]
n_time = 0
n_space = 64
y_max = 7.0

[ladder]
t = [4.0, 1.0]
"#;
        let err = ExperimentConfig::from_toml_str(bad).unwrap_err();
        match err {
            Error::Config(v) => {
                assert!(v.len() >= 4, "expected several violations, got {v:?}");
            }
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn coupling_rules() {
        assert_eq!(Coupling::None.radius(1.0, 4.0), None);
        assert_eq!(Coupling::CSqrtT.radius(2.0, 4.0), Some(4.0));
        assert_eq!(Coupling::TQuarter.radius(1.0, 16.0), Some(2.0));
        assert_eq!(Coupling::LinearT.radius(1.0, 16.0), Some(16.0));
    }
}
