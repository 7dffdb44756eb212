//! TOML run configuration. Every section is optional; unknown keys are errors.

use crate::field::Field;
use crate::kernel_ops::{KernelClassParams, OperatorSpec};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const SWEEP: [f64; 4] = [1.2, 1.5, 1.8, 1.95];

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Used when no subcommand is given on the command line.
    pub subcommand: Option<String>,
    pub params: ParamsSection,
    pub run: RunSection,
    pub solve: SolveSection,
    pub barriers: BarrierSection,
    pub abp: AbpSection,
    pub point_estimate: PointEstimateSection,
    pub holder: HolderSection,
    pub c1a: C1aSection,
    pub cz: CzSection,
    pub counterexample: CounterexampleSection,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub n: usize,
    pub sigma: f64,
    pub sigma0: f64,
    pub lambda: f64,
    pub rho0: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        ParamsSection {
            n: 1,
            sigma: 1.5,
            sigma0: 0.5,
            lambda: 2.0,
            rho0: 0.3,
        }
    }
}

impl ParamsSection {
    pub fn to_params(self) -> KernelClassParams {
        KernelClassParams::new(self.n, self.sigma, self.sigma0, self.lambda, self.rho0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub sigmas: Vec<f64>,
    /// Grid cells per unit length; each subcommand has its own default.
    pub resolution: Option<u32>,
    pub out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 1,
            sigmas: SWEEP.to_vec(),
            resolution: None,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub operator: OperatorSpec,
    pub domain_radius: f64,
    /// Half width of the computational box; one cell past the domain when absent.
    pub box_radius: Option<f64>,
    pub t_start: f64,
    pub steps: Option<usize>,
    pub reach: Option<f64>,
    pub initial: Field,
    pub exterior: Field,
    pub rhs: Field,
}

impl Default for SolveSection {
    fn default() -> Self {
        SolveSection {
            operator: OperatorSpec::ExtremalMinus,
            domain_radius: 1.0,
            box_radius: None,
            t_start: -1.0,
            steps: None,
            reach: None,
            initial: Field::Zero,
            exterior: Field::Zero,
            rhs: Field::Zero,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierSection {
    /// Half width of the box for the capped power and the special function.
    pub box_radius: f64,
    pub boundary_box_radius: f64,
    pub bump: bool,
}

impl Default for BarrierSection {
    fn default() -> Self {
        BarrierSection {
            box_radius: 4.0,
            boundary_box_radius: 3.0,
            bump: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbpSection {
    pub members: u64,
    pub c_threshold: f64,
    pub c_grid: f64,
    /// Largest allowed ratio of the implied constants across the sweep.
    pub max_ratio: f64,
}

impl Default for AbpSection {
    fn default() -> Self {
        AbpSection {
            members: 20,
            c_threshold: 0.01,
            c_grid: 1.0,
            max_ratio: 4.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointEstimateSection {
    pub members: u64,
    pub max_halvings: usize,
    pub spread: f64,
    pub peak: f64,
    pub f_cap: f64,
    pub max_spread: f64,
    /// Also run the long-horizon base configuration (slow).
    pub base_configuration: bool,
    pub base_members: u64,
    pub base_resolution: u32,
}

impl Default for PointEstimateSection {
    fn default() -> Self {
        PointEstimateSection {
            members: 20,
            max_halvings: 40,
            spread: 0.8,
            peak: 50.0,
            f_cap: 0.2,
            max_spread: 2.0,
            base_configuration: false,
            base_members: 8,
            base_resolution: 4,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolderSection {
    pub seeds: u64,
    pub domain_radius: f64,
    pub rhs_bound: f64,
    /// Required `α(σ_max) / α(σ_ref)`.
    pub uniformity: f64,
    pub reference_sigma: f64,
}

impl Default for HolderSection {
    fn default() -> Self {
        HolderSection {
            seeds: 3,
            domain_radius: 1.0,
            rhs_bound: 0.1,
            uniformity: 0.5,
            reference_sigma: 1.5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct C1aSection {
    pub alpha_bar: f64,
    /// Shifts in grid cells, compared against each other.
    pub shifts: Vec<i64>,
    pub tolerance: f64,
}

impl Default for C1aSection {
    fn default() -> Self {
        C1aSection {
            alpha_bar: 0.6,
            shifts: vec![4, 2, 1],
            tolerance: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CzSection {
    pub sets: usize,
    pub space_levels: u32,
    pub mu1: f64,
    /// Fill probability as a fraction of `mu1`.
    pub fill: f64,
    pub stack_m: Vec<u32>,
}

impl Default for CzSection {
    fn default() -> Self {
        CzSection {
            sets: 8,
            space_levels: 6,
            mu1: 0.5,
            fill: 0.5,
            stack_m: vec![2, 4, 8],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleSection {
    pub c_fraction: f64,
    pub window: f64,
    pub zero_tolerance: f64,
    pub max_change: f64,
}

impl Default for CounterexampleSection {
    fn default() -> Self {
        CounterexampleSection {
            c_fraction: 0.5,
            window: 1.0 / 64.0,
            zero_tolerance: 1e-6,
            max_change: 0.3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Parse a config file. `Ok(None)` for a file with no keys at all.
pub fn load(path: &std::path::Path) -> Result<Option<RunConfig>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text).map_err(|message| ConfigError::Parse {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse(text: &str) -> Result<Option<RunConfig>, String> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
    if table.is_empty() {
        return Ok(None);
    }
    // the typed pass reports line, column and the offending key
    toml::from_str(text).map(Some).map_err(|e: toml::de::Error| e.to_string())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |s: String| Err(ConfigError::Invalid(s));
        self.params
            .to_params()
            .validate()
            .or_else(|e| bad(e.to_string()))?;
        if self.run.sigmas.is_empty() {
            return bad("run.sigmas is empty".into());
        }
        for &s in &self.run.sigmas {
            if !(s > self.params.sigma0 && s < 2.0) {
                return bad(format!("sweep sigma {s} outside (sigma0, 2)"));
            }
        }
        if self.run.resolution == Some(0) {
            return bad("resolution must be positive".into());
        }
        if self.solve.t_start >= 0.0 {
            return bad(format!("solve.t_start = {} must be negative", self.solve.t_start));
        }
        if self.solve.domain_radius <= 0.0 {
            return bad("solve.domain_radius must be positive".into());
        }
        if self.c1a.shifts.iter().any(|&s| s < 1) || self.c1a.shifts.len() < 2 {
            return bad("c1a.shifts needs at least two positive cell counts".into());
        }
        if !(self.cz.mu1 > 0.0 && self.cz.mu1 < 1.0) {
            return bad(format!("cz.mu1 = {} outside (0,1)", self.cz.mu1));
        }
        if !(self.counterexample.c_fraction > 0.0 && self.counterexample.c_fraction <= 1.0) {
            return bad("counterexample.c_fraction must lie in (0,1]".into());
        }
        Ok(())
    }
}
