//! Experiment configuration: a single JSON document describing one capacity
//! computation or derivative sweep.

use crate::error::{CliError, Result};
use capacity::lattice::{make_shape, FiniteSet, LatticePoint, Shape};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Newton,
    Riesz,
    Branch,
}

/// Shape specification, mirroring the library's shape generators.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Ball { radius: f64 },
    Box { side: i64 },
    Segment { n: i64 },
    Random { side: i64, count: usize, seed: u64 },
}

impl ShapeSpec {
    pub fn build(&self, d: usize) -> Result<FiniteSet> {
        let (shape, seed) = match self {
            ShapeSpec::Ball { radius } => (Shape::Ball { radius: *radius }, None),
            ShapeSpec::Box { side } => (Shape::Box { side: *side }, None),
            ShapeSpec::Segment { n } => (Shape::Segment { n: *n }, None),
            ShapeSpec::Random { side, count, seed } => (
                Shape::Random {
                    side: *side,
                    count: *count,
                },
                Some(*seed),
            ),
        };
        Ok(make_shape(&shape, d, seed)?)
    }
}

/// Branch-only sampler budgets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub prune_radius: f64,
    pub spine_exit_radius: f64,
    #[serde(default = "default_node_budget")]
    pub node_budget: u64,
}

fn default_node_budget() -> u64 {
    capacity::branching::estimators::DEFAULT_NODE_BUDGET
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub dimension: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offspring: Option<String>,
    pub set_a: ShapeSpec,
    pub set_b: ShapeSpec,
    pub direction: Vec<i64>,
    pub radii: Vec<i64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budgets: Option<Budgets>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn default_tol() -> f64 {
    1e-9
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension;
        match self.kind {
            ExperimentKind::Newton => {
                if d < 3 {
                    return Err(CliError::Config(format!(
                        "field 'dimension': newton requires d >= 3, got {d}"
                    )));
                }
            }
            ExperimentKind::Riesz => {
                let alpha = self.alpha.ok_or_else(|| {
                    CliError::Config("field 'alpha' is required for riesz runs".into())
                })?;
                if !(alpha > 0.0 && alpha < d as f64) {
                    return Err(CliError::Config(format!(
                        "field 'alpha': must satisfy 0 < alpha < d, got {alpha} with d = {d}"
                    )));
                }
            }
            ExperimentKind::Branch => {
                if d < 5 {
                    return Err(CliError::Config(format!(
                        "field 'dimension': branch requires d >= 5, got {d}"
                    )));
                }
                if self.offspring.is_none() {
                    return Err(CliError::Config(
                        "field 'offspring' is required for branch runs".into(),
                    ));
                }
                if self.n_samples.is_none() {
                    return Err(CliError::Config(
                        "field 'n_samples' is required for branch runs".into(),
                    ));
                }
            }
        }
        if self.direction.len() != d {
            return Err(CliError::Config(format!(
                "field 'direction': length {} does not match dimension {d}",
                self.direction.len()
            )));
        }
        if self.direction.iter().all(|&c| c == 0) {
            return Err(CliError::Config("field 'direction': must be nonzero".into()));
        }
        if self.radii.is_empty() {
            return Err(CliError::Config("field 'radii': must be nonempty".into()));
        }
        if self.radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config(
                "field 'radii': must be strictly increasing".into(),
            ));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(CliError::Config(format!(
                "field 'tol': must lie in (0, 1), got {}",
                self.tol
            )));
        }
        Ok(())
    }

    pub fn direction_point(&self) -> Result<LatticePoint> {
        Ok(LatticePoint::new(self.direction.clone())?)
    }

    /// Canonical single-line JSON echo for output headers.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
