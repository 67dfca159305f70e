//! Experiment configuration: a single JSON file, validated on load.
//!
//! Only `rho`, `beta` and `mu` are required. Defaults for everything else:
//!
//! | key | default |
//! |---|---|
//! | `r_interface`, `r_outer` | 1, 2 |
//! | `x0` | `[0, 0]` |
//! | `modes` | `[0, 1, 2]` |
//! | `n1`, `n2` | 32, 32 |
//! | `quad_points` | 6 |
//! | `T`, `dt` | 20, 0.01 |
//! | `lambda_grid` | `{min: 1, max: 1000, per_decade: 64}` |
//! | `eigen_count` | 12 |
//! | `shift` | `[0, 0]` |
//! | `initial` | `"velocity-bump"` |
//! | `out_dir` | `"out"` |
//! | `seed` | 0 |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{Discretization, DEFAULT_QUADRATURE_POINTS};
use crate::dynamics::InitialKind;
use crate::error::{Error, Result};
use crate::model::{AnnulusGeometry, PhysicalParams};

/// Upper limit on a single angular mode index.
pub const MAX_MODE: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaGrid {
    pub min: f64,
    pub max: f64,
    pub per_decade: usize,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid { min: 1.0, max: 1e3, per_decade: 64 }
    }
}

impl LambdaGrid {
    pub fn points(&self) -> Vec<f64> {
        crate::spectral::log_grid(self.min, self.max, self.per_decade)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rho: f64,
    pub beta: f64,
    pub mu: f64,
    #[serde(default = "default_r_interface")]
    pub r_interface: f64,
    #[serde(default = "default_r_outer")]
    pub r_outer: f64,
    #[serde(default)]
    pub x0: [f64; 2],
    #[serde(default = "default_modes")]
    pub modes: Vec<u32>,
    #[serde(default = "default_elements")]
    pub n1: usize,
    #[serde(default = "default_elements")]
    pub n2: usize,
    #[serde(default = "default_quad")]
    pub quad_points: usize,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub lambda_grid: LambdaGrid,
    #[serde(default = "default_eigen_count")]
    pub eigen_count: usize,
    #[serde(default)]
    pub shift: [f64; 2],
    #[serde(default = "default_initial")]
    pub initial: InitialKind,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_r_interface() -> f64 {
    1.0
}
fn default_r_outer() -> f64 {
    2.0
}
fn default_modes() -> Vec<u32> {
    vec![0, 1, 2]
}
fn default_elements() -> usize {
    32
}
fn default_quad() -> usize {
    DEFAULT_QUADRATURE_POINTS
}
fn default_horizon() -> f64 {
    20.0
}
fn default_dt() -> f64 {
    0.01
}
fn default_eigen_count() -> usize {
    12
}
fn default_initial() -> InitialKind {
    InitialKind::VelocityBump
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Defaults around the given physical parameters.
    pub fn with_params(rho: f64, beta: f64, mu: f64) -> Self {
        ExperimentConfig {
            rho,
            beta,
            mu,
            r_interface: default_r_interface(),
            r_outer: default_r_outer(),
            x0: [0.0, 0.0],
            modes: default_modes(),
            n1: default_elements(),
            n2: default_elements(),
            quad_points: default_quad(),
            horizon: default_horizon(),
            dt: default_dt(),
            lambda_grid: LambdaGrid::default(),
            eigen_count: default_eigen_count(),
            shift: [0.0, 0.0],
            initial: default_initial(),
            out_dir: default_out_dir(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn params(&self) -> Result<PhysicalParams> {
        PhysicalParams::new(self.rho, self.beta, self.mu)
    }

    pub fn geometry(&self) -> Result<AnnulusGeometry> {
        AnnulusGeometry::new(self.r_interface, self.r_outer, self.x0)
    }

    pub fn discretization(&self) -> Discretization {
        Discretization { n1: self.n1, n2: self.n2, quad_points: self.quad_points }
    }

    /// SHA-256 of the compact JSON serialization, with `out_dir` blanked so
    /// the hash identifies the experiment rather than where it was written.
    pub fn hash(&self) -> String {
        let mut content = self.clone();
        content.out_dir = PathBuf::new();
        let text = serde_json::to_string(&content).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.geometry()?;
        if self.modes.is_empty() {
            return Err(Error::validation("modes", "must list at least one mode"));
        }
        if let Some(m) = self.modes.iter().find(|&&m| m > MAX_MODE) {
            return Err(Error::validation("modes", format!("mode {m} exceeds {MAX_MODE}")));
        }
        let mut sorted = self.modes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.modes.len() {
            return Err(Error::validation("modes", "must not repeat a mode"));
        }
        if self.n1 < 1 || self.n2 < 1 {
            return Err(Error::validation("n1/n2", "need at least one element per domain"));
        }
        if self.quad_points < 4 {
            return Err(Error::validation("quad_points", format!("must be >= 4, got {}", self.quad_points)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::validation("T", format!("must be positive and finite, got {}", self.horizon)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation("dt", format!("must be positive and finite, got {}", self.dt)));
        }
        if self.dt > self.horizon {
            return Err(Error::validation("dt", "must not exceed T"));
        }
        let g = &self.lambda_grid;
        if !(g.min > 0.0 && g.max >= g.min && g.max.is_finite()) {
            return Err(Error::validation("lambda_grid", "needs 0 < min <= max < inf"));
        }
        if g.per_decade == 0 {
            return Err(Error::validation("lambda_grid", "per_decade must be >= 1"));
        }
        if self.eigen_count == 0 {
            return Err(Error::validation("eigen_count", "must be >= 1"));
        }
        if !self.shift.iter().all(|v| v.is_finite()) {
            return Err(Error::validation("shift", "must be finite"));
        }
        Ok(())
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_json(&text).map_err(|e| match e {
        Error::Io { .. } => e,
        other => Error::Config { path: path.to_path_buf(), message: other.to_string() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_json(r#"{"rho": 1, "beta": 1, "mu": 0.3}"#).unwrap();
        assert_eq!(c.r_interface, 1.0);
        assert_eq!(c.r_outer, 2.0);
        assert_eq!(c.modes, vec![0, 1, 2]);
        assert_eq!((c.n1, c.n2), (32, 32));
        assert_eq!((c.horizon, c.dt), (20.0, 0.01));
        assert_eq!(c, ExperimentConfig::with_params(1.0, 1.0, 0.3));
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::with_params(1.0, 0.0, 0.25);
        c.modes = vec![0, 3];
        c.x0 = [0.5, -0.25];
        c.seed = 42;
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn rejections() {
        let bad = |s: &str| ExperimentConfig::from_json(s).unwrap_err();
        assert!(matches!(bad(r#"{"rho":1,"beta":1,"mu":0.7}"#), Error::Validation { field: "mu", .. }));
        assert!(matches!(bad(r#"{"rho":1,"beta":1,"mu":0.3,"dt":0}"#), Error::Validation { field: "dt", .. }));
        assert!(matches!(bad(r#"{"rho":1,"beta":1,"mu":0.3,"modes":[]}"#), Error::Validation { field: "modes", .. }));
        assert!(matches!(bad(r#"{"rho":1,"beta":1,"mu":0.3,"modes":[1,1]}"#), Error::Validation { .. }));
        assert!(matches!(bad(r#"{"rho":1,"beta":1}"#), Error::Json(_)));
        let e = bad(r#"{"rho":1,"beta":1,"mu":0.3,"nl":3}"#);
        assert!(e.to_string().contains("nl"), "{e}");
        let e = bad("{\"rho\":1,\n\"beta\":true,\"mu\":0.3}");
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let e = load_config(Path::new("/nonexistent/platewave.json")).unwrap_err();
        assert!(matches!(e, Error::Io { .. }));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::with_params(1.0, 1.0, 0.3);
        let mut b = a.clone();
        b.seed = 1;
        assert_eq!(a.hash().len(), 64);
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), c.hash());
    }
}
