//! Time grids on `[0, T]`.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GridError {
    #[error("horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("grid needs at least one step")]
    NoSteps,
    #[error("grading exponent must be ≥ 1, got {0}")]
    BadGrading(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GridKind {
    Uniform,
    /// `t_j = T (j/N)^exponent`.
    Graded { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    nodes: Vec<f64>,
    kind: GridKind,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self, GridError> {
        Self::build(horizon, steps, GridKind::Uniform)
    }

    pub fn graded(horizon: f64, steps: usize, exponent: f64) -> Result<Self, GridError> {
        if !(exponent >= 1.0) {
            return Err(GridError::BadGrading(exponent));
        }
        if exponent == 1.0 {
            return Self::uniform(horizon, steps);
        }
        Self::build(horizon, steps, GridKind::Graded { exponent })
    }

    pub fn new(horizon: f64, steps: usize, kind: GridKind) -> Result<Self, GridError> {
        match kind {
            GridKind::Uniform => Self::uniform(horizon, steps),
            GridKind::Graded { exponent } => Self::graded(horizon, steps, exponent),
        }
    }

    fn build(horizon: f64, steps: usize, kind: GridKind) -> Result<Self, GridError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(GridError::NonPositiveHorizon(horizon));
        }
        if steps == 0 {
            return Err(GridError::NoSteps);
        }
        let n = steps as f64;
        let mut nodes: Vec<f64> = (0..=steps)
            .map(|j| match kind {
                GridKind::Uniform => horizon * j as f64 / n,
                GridKind::Graded { exponent } => horizon * (j as f64 / n).powf(exponent),
            })
            .collect();
        nodes[steps] = horizon;
        Ok(Self {
            horizon,
            nodes,
            kind,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, GridKind::Uniform)
    }

    /// Step `t_j − t_{j−1}` for `j ≥ 1`.
    pub fn dt(&self, j: usize) -> f64 {
        self.nodes[j] - self.nodes[j - 1]
    }

    /// Uniform step, if the grid is uniform.
    pub fn uniform_step(&self) -> Option<f64> {
        self.is_uniform().then(|| self.horizon / self.steps() as f64)
    }

    /// Same kind and step count on `[0, factor·T]`.
    pub fn scaled(&self, factor: f64) -> Result<Self, GridError> {
        Self::new(self.horizon * factor, self.steps(), self.kind)
    }

    /// Same kind with twice as many steps.
    pub fn refined(&self) -> Self {
        Self::new(self.horizon, 2 * self.steps(), self.kind).expect("refining a valid grid")
    }

    /// Index of the node closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let i = self.nodes.partition_point(|&x| x < t);
        if i == 0 {
            0
        } else if i >= self.nodes.len() {
            self.nodes.len() - 1
        } else if (self.nodes[i] - t).abs() < (t - self.nodes[i - 1]).abs() {
            i
        } else {
            i - 1
        }
    }
}
