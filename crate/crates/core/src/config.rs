//! Run configuration shared by the CLI subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constructor::FixedPointOptions;
use crate::data::DataRecipe;
use crate::error::{Error, Result};
use crate::norms::NormParams;
use crate::solver::SolverConfig;
use crate::spectral::{make_grid, FourierGrid};

/// Environment variable for the root of relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "WKG_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub box_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheSpec {
    /// Uniform part of the quadrature grid; the geometric report times
    /// `2^{i/4}` are always added.
    pub dt: f64,
    pub nonresonant: bool,
}

impl Default for CacheSpec {
    fn default() -> Self {
        Self { dt: 0.2, nonresonant: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedPointSpec {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointSpec {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub eps: f64,
    pub data: DataRecipe,
    pub solver: SolverConfig,
    pub t_max: f64,
    pub cache: CacheSpec,
    pub fixed_point: FixedPointSpec,
    pub norms: NormParams,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Recorded in the manifest; the computation itself is sequential.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec { n: 32, box_length: 16.0 * std::f64::consts::PI },
            eps: 0.01,
            data: DataRecipe::default(),
            solver: SolverConfig::default(),
            t_max: 200.0,
            cache: CacheSpec::default(),
            fixed_point: FixedPointSpec::default(),
            norms: NormParams::default(),
            seed: 1,
            output_dir: PathBuf::from("wkg-out"),
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn grid(&self) -> Result<FourierGrid> {
        make_grid(self.grid.n, self.grid.box_length).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps = {} must be finite and non-negative", self.eps)));
        }
        self.data.validate()?;
        self.solver.validate()?;
        self.norms.validate()?;
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::Config(format!("t_max = {} must be positive", self.t_max)));
        }
        if !(self.cache.dt > 0.0 && self.cache.dt <= self.t_max) {
            return Err(Error::Config(format!("cache.dt = {} must lie in (0, t_max]", self.cache.dt)));
        }
        if !(self.fixed_point.tol > 0.0) || self.fixed_point.max_iter == 0 {
            return Err(Error::Config("fixed_point.tol and fixed_point.max_iter must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }

    pub fn fixed_point_options(&self) -> FixedPointOptions {
        FixedPointOptions { tol: self.fixed_point.tol, max_iter: self.fixed_point.max_iter, dealias: self.solver.dealiasing }
    }

    pub fn threads(&self) -> usize {
        self.threads.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    }

    /// `output_dir`, placed under `$WKG_OUTPUT_ROOT` when relative.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_VAR) {
            Some(root) if self.output_dir.is_relative() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(RunConfig::from_json(r#"{"eps": 0.01, "colour": 3}"#).is_err());
        assert!(RunConfig::from_json(r#"{"cache": {"dt": 0.1, "step": 1}}"#).is_err());
        let partial = RunConfig::from_json(r#"{"eps": 0.02, "grid": {"n": 16, "box_length": 25.0}}"#).unwrap();
        assert_eq!(partial.eps, 0.02);
        assert_eq!(partial.t_max, 200.0);
        for bad in [
            RunConfig { eps: -1.0, ..Default::default() },
            RunConfig { t_max: 0.0, ..Default::default() },
            RunConfig { grid: GridSpec { n: 7, box_length: 1.0 }, ..Default::default() },
            RunConfig { fixed_point: FixedPointSpec { tol: 0.0, max_iter: 3 }, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }
}
