//! JSON experiment-configuration schema.
//!
//! One JSON document describes one experiment.  The `mode` field must match
//! the subcommand the file is passed to; each mode reads its own section
//! (`solver`, `entries`, `verify`, `continuous`, `sweep`).  Unknown fields
//! are rejected so typos surface as config errors instead of silently
//! falling back to defaults.

use serde::Deserialize;

use hovi::solvers::{Algorithm, LambdaVariant, SolverConfig};
use hovi::{Error, Result};

/// Experiment kind; must agree with the CLI subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Run,
    Sweep,
    Verify,
    Continuous,
    Compare,
}

impl Mode {
    /// The subcommand name this mode belongs to.
    pub fn name(self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::Sweep => "sweep",
            Mode::Verify => "verify",
            Mode::Continuous => "continuous",
            Mode::Compare => "compare",
        }
    }
}

/// Top-level experiment description.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub problem: ProblemSpec,
    /// Starting point; required by run/sweep/continuous/compare.
    #[serde(default)]
    pub z0: Option<Vec<f64>>,
    /// Solver settings; required by run and sweep.
    #[serde(default)]
    pub solver: Option<SolverSpec>,
    /// Labeled solver list; required by compare.
    #[serde(default)]
    pub entries: Option<Vec<CompareEntry>>,
    /// Verifier settings; required by verify.
    #[serde(default)]
    pub verify: Option<VerifySpec>,
    /// Integrator settings; required by continuous.
    #[serde(default)]
    pub continuous: Option<ContinuousSpec>,
    /// Sweep axis; required by sweep.
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    pub outputs: OutputSpec,
}

/// Which catalog problem to run, optionally preconditioned.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    /// Catalog name (e.g. "modified_forsaken", "bilinear").
    pub name: String,
    /// When set, replace the operator F by the preconditioned variant F_α.
    #[serde(default)]
    pub alpha: Option<f64>,
}

/// Serializable mirror of [`hovi::solvers::SolverConfig`].
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub algorithm: String,
    pub s: u32,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub l: Option<f64>,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub target_eps: f64,
    #[serde(default)]
    pub seed: u64,
    /// "box" (default) or "proof".
    #[serde(default)]
    pub lambda_variant: Option<String>,
    #[serde(default = "default_l_safety")]
    pub l_safety: f64,
    #[serde(default)]
    pub subproblem: Option<SubproblemSpec>,
}

/// Overrides for the inner half-step solver.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubproblemSpec {
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub max_inner_iterations: Option<usize>,
    #[serde(default)]
    pub damping: Option<f64>,
}

fn default_p() -> f64 {
    2.0
}
fn default_k() -> usize {
    1000
}
fn default_l_safety() -> f64 {
    1.5
}
fn default_samples() -> usize {
    10_000
}
fn default_s_for_bound() -> u32 {
    1
}

impl SolverSpec {
    /// Convert to a library solver configuration (validated by the run).
    pub fn to_config(&self) -> Result<SolverConfig> {
        let algorithm = Algorithm::parse(&self.algorithm)?;
        let mut config = SolverConfig::new(algorithm, self.s, self.p);
        config.l = self.l;
        config.nu = self.nu;
        config.k = self.k;
        config.target_eps = self.target_eps;
        config.seed = self.seed;
        config.l_safety = self.l_safety;
        if let Some(variant) = &self.lambda_variant {
            config.lambda_variant = match variant.as_str() {
                "box" => LambdaVariant::Box,
                "proof" => LambdaVariant::Proof,
                other => {
                    return Err(Error::Config(format!(
                        "unknown lambda_variant '{other}' (expected 'box' or 'proof')"
                    )))
                }
            };
        }
        if let Some(sp) = &self.subproblem {
            if sp.tolerance.is_some() {
                config.subproblem.tolerance = sp.tolerance;
            }
            if let Some(m) = sp.max_inner_iterations {
                config.subproblem.max_inner_iterations = m;
            }
            if let Some(d) = sp.damping {
                config.subproblem.damping = d;
            }
        }
        Ok(config)
    }
}

/// One labeled solver in a comparison.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareEntry {
    /// Label used in output file names and the summary table.
    pub label: String,
    pub solver: SolverSpec,
    /// Per-entry preconditioning override (None keeps the problem's alpha).
    #[serde(default)]
    pub alpha: Option<f64>,
}

/// Condition-verifier settings.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    /// "monotone", "comonotone", or "weak_mvi".
    pub condition: String,
    /// Deficit exponent for weak_mvi; defaults to (s+1)/s of `s_for_bound`.
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Sampling region; defaults to the operator's reference box.
    #[serde(default)]
    pub region: Option<RegionSpec>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Order at which the theorem ρ ranges are evaluated for comparison.
    #[serde(default = "default_s_for_bound")]
    pub s_for_bound: u32,
    /// Smoothness constant for the ρ ranges; estimated by sampling if unset.
    #[serde(default)]
    pub l_for_bound: Option<f64>,
}

/// Axis-aligned sampling region.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RegionSpec {
    /// Cube [−half_width, half_width]^d centered at the origin.
    HalfWidth { half_width: f64 },
    /// Explicit bounds.
    Bounds { lo: Vec<f64>, hi: Vec<f64> },
}

/// Rescaled-dynamics integrator settings.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousSpec {
    pub s: u32,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub algebraic_tolerance: Option<f64>,
    #[serde(default)]
    pub norm_floor: Option<f64>,
}

/// One-parameter sweep over otherwise-fixed solver settings.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// "s", "l", "k", "seed", "alpha", or "target_eps".
    pub parameter: String,
    pub values: Vec<f64>,
}

/// Output location: files are written as `<dir>/<prefix>*.csv/.json`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Default output directory; the --out flag overrides it.
    #[serde(default)]
    pub dir: Option<String>,
    pub prefix: String,
}

impl ExperimentConfig {
    /// Structural checks that do not need the problem instantiated.
    pub fn validate(&self) -> Result<()> {
        if self.outputs.prefix.is_empty()
            || !self
                .outputs
                .prefix
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(Error::Config(format!(
                "output prefix '{}' must be non-empty and use only [A-Za-z0-9_-]",
                self.outputs.prefix
            )));
        }
        if let Some(z0) = &self.z0 {
            if z0.is_empty() || z0.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(
                    "z0 must be a non-empty array of finite numbers".into(),
                ));
            }
        }
        if let Some(entries) = &self.entries {
            for e in entries {
                if e.label.is_empty()
                    || !e
                        .label
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                {
                    return Err(Error::Config(format!(
                        "compare label '{}' must be non-empty and use only [A-Za-z0-9_-]",
                        e.label
                    )));
                }
            }
            let mut labels: Vec<&str> = entries.iter().map(|e| e.label.as_str()).collect();
            labels.sort_unstable();
            labels.dedup();
            if labels.len() != entries.len() {
                return Err(Error::Config("compare labels must be unique".into()));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep values must be non-empty".into()));
            }
            if !matches!(
                sweep.parameter.as_str(),
                "s" | "l" | "k" | "seed" | "alpha" | "target_eps"
            ) {
                return Err(Error::Config(format!(
                    "unknown sweep parameter '{}' (expected s, l, k, seed, alpha, or target_eps)",
                    sweep.parameter
                )));
            }
            if sweep.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("sweep values must be finite".into()));
            }
        }
        Ok(())
    }
}
