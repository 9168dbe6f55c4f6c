//! Run configuration read from TOML or JSON and validated up front.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::Method;
use crate::error::{Error, Result};
use crate::floquet::DEFAULT_NODES;
use crate::model::{Coupling, PeriodicPotential, DEFAULT_RHO0};
use crate::velocity::{SweepOptions, DEFAULT_EPSILON};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub trials: usize,
    pub sizes: Vec<usize>,
    /// Size whose matching table is written as CSV.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_p: Option<usize>,
    /// Test-only fault injection into the determinant formula.
    pub perturb_formula: bool,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            trials: 1000,
            sizes: (2..=12).collect(),
            table_p: None,
            perturb_formula: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// One period of the on-site potential.
    pub potential: Vec<f64>,
    pub rho0: f64,
    /// Coupling for single-point commands.
    pub mu: f64,
    /// Couplings for sweeps.
    pub mus: Vec<f64>,
    /// Quasimomentum nodes.
    pub nodes: usize,
    /// Chain length for real-space evolution; absent means derived from the
    /// cone.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sites: Option<usize>,
    /// Evolution time for `kernel` and `evolve`.
    pub t: f64,
    /// Explicit cone times; empty means an automatic grid.
    pub times: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_max: Option<i64>,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    /// Cone grid: front displacement in blocks at the last sample.
    pub front_blocks: f64,
    pub front_samples: usize,
    /// Measure fronts in sweeps.
    pub sweep_front: bool,
    /// Direct-evolution time `direct_time · μ^direct_power`; absent skips it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direct_time: Option<f64>,
    pub direct_power: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub verify: VerifySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            potential: vec![1.0, -1.0],
            rho0: DEFAULT_RHO0,
            mu: 10.0,
            mus: vec![10.0, 20.0, 40.0, 100.0],
            nodes: DEFAULT_NODES,
            sites: None,
            t: 20.0,
            times: Vec::new(),
            d_max: None,
            epsilon: DEFAULT_EPSILON,
            method: None,
            front_blocks: 20.0,
            front_samples: 16,
            sweep_front: true,
            direct_time: None,
            direct_power: 0.0,
            seed: 2024,
            out: PathBuf::from("out"),
            verify: VerifySection::default(),
        }
    }
}

impl RunConfig {
    /// Parses TOML, or JSON when the path ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn potential(&self) -> Result<PeriodicPotential> {
        PeriodicPotential::new(self.potential.clone())
    }

    pub fn coupling(&self) -> Result<Coupling> {
        Coupling::new(self.mu)
    }

    /// Checks everything that does not need a computation.
    pub fn validate(&self) -> Result<()> {
        let pot = self.potential()?;
        let p = pot.period();
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.rho0 > 1.0) {
            return bad(format!("rho0 must exceed 1, got {}", self.rho0));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if let Some(m) = self.mus.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return bad(format!("every entry of mus must be positive, got {m}"));
        }
        if self.nodes < 4 * p || self.nodes % 2 != 0 {
            return bad(format!(
                "nodes must be even and at least {}, got {}",
                4 * p,
                self.nodes
            ));
        }
        if let Some(n) = self.sites {
            if n < 3 || n % 2 == 0 {
                return bad(format!("sites must be odd and at least 3, got {n}"));
            }
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return bad(format!("t must be non-negative, got {}", self.t));
        }
        if self.times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return bad("times must be non-negative".into());
        }
        if self.d_max.is_some_and(|d| d < 0) {
            return bad("d_max must be non-negative".into());
        }
        if !(self.epsilon > 1e-12 && self.epsilon < 1e-2) {
            return bad(format!(
                "epsilon must lie in (1e-12, 1e-2), got {}",
                self.epsilon
            ));
        }
        if !(self.front_blocks > 0.0) || self.front_samples < 2 {
            return bad("front_blocks must be positive and front_samples at least 2".into());
        }
        if self.direct_time.is_some_and(|t| !(t > 0.0)) {
            return bad("direct_time must be positive".into());
        }
        if self
            .verify
            .sizes
            .iter()
            .any(|&s| s == 0 || s > crate::charpoly::FORMULA_LIMIT)
        {
            return bad(format!(
                "verify sizes must lie in 1..={}",
                crate::charpoly::FORMULA_LIMIT
            ));
        }
        Ok(())
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            nodes: self.nodes,
            epsilon: self.epsilon,
            front: self.sweep_front,
            front_blocks: self.front_blocks,
            front_samples: self.front_samples,
            direct_time: self.direct_time.map(|c| (c, self.direct_power)),
        }
    }
}
