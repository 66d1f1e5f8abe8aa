//! Discretised noise: the grid, the probability mass function living on it,
//! analytic baselines and samplers.
//!
//! The grid follows the learner's layout: `2N` equidistant points
//! `x_i = i·ν − r + a` for `i = 1..=2N`, with step `ν = r/N`. Index mirroring
//! `i ↔ 2N−i+1` pairs `x_i` with `ν + 2a − x_i`, so a mirror-symmetric pmf is
//! symmetric about `a + ν/2`.

mod baseline;
mod sampling;
mod structure;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use baseline::{
    default_staircase_gamma, staircase_masses, staircase_pmf, truncated_gaussian_masses,
    truncated_gaussian_pmf,
};
pub use sampling::{sample_noise, sample_radial, NoiseSampler};
pub use structure::{check_structure, StructureReport};

/// Tolerance for `Σp = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Default bias applied to every grid point.
pub const DEFAULT_BIAS: f64 = 1e-5;

/// Equidistant discretisation of `[-r + ν + a, r + a]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    pub half_points: usize,
    pub bias: f64,
}

impl GridSpec {
    pub fn new(half_width: f64, half_points: usize, bias: f64) -> Result<Self> {
        let grid = GridSpec {
            half_width,
            half_points,
            bias,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(Error::invalid(format!(
                "half_width must be positive, got {}",
                self.half_width
            )));
        }
        if self.half_points < 2 {
            return Err(Error::invalid(format!(
                "half_points must be at least 2, got {}",
                self.half_points
            )));
        }
        if !self.bias.is_finite() {
            return Err(Error::invalid("bias must be finite"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.half_width / self.half_points as f64
    }

    pub fn len(&self) -> usize {
        2 * self.half_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Point for zero-based index `i` (the 1-based `x_{i+1}`).
    pub fn point(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.step() - self.half_width + self.bias
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Centre of mirror symmetry, `a + ν/2`.
    pub fn mirror_center(&self) -> f64 {
        self.bias + 0.5 * self.step()
    }

    /// Distance of point `i` from the mirror centre, in half steps. Always odd,
    /// and identical for `i` and its mirror `2N-1-i`.
    pub fn half_steps_from_center(&self, i: usize) -> u64 {
        (2 * i as i64 + 1 - 2 * self.half_points as i64).unsigned_abs()
    }

    /// Converts a shift in output units to a whole number of cells.
    pub fn cells_for_shift(&self, shift: f64) -> Result<usize> {
        if !(shift.is_finite() && shift > 0.0) {
            return Err(Error::invalid(format!("shift must be positive, got {shift}")));
        }
        let cells = shift / self.step();
        let rounded = cells.round();
        if rounded < 1.0 || (cells - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::invalid(format!(
                "shift {shift} is not an integer multiple of the step {}",
                self.step()
            )));
        }
        Ok(rounded as usize)
    }
}

/// Probability mass over the points of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoisePmf {
    pub grid: GridSpec,
    pub pmf: Vec<f64>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl NoisePmf {
    pub fn new(grid: GridSpec, pmf: Vec<f64>) -> Result<Self> {
        let noise = NoisePmf {
            grid,
            pmf,
            meta: BTreeMap::new(),
        };
        noise.validate()?;
        Ok(noise)
    }

    /// Normalises `weights` by their sum. Exact zeros stay exact zeros.
    pub fn from_weights(grid: GridSpec, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::invalid("weights must have a positive finite sum"));
        }
        let pmf = weights.into_iter().map(|w| w / total).collect();
        Self::new(grid, pmf)
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.grid
            .validate()
            .map_err(|e| Error::schema("grid", e.to_string()))?;
        if self.pmf.len() != self.grid.len() {
            return Err(Error::schema(
                "pmf",
                format!(
                    "length {} does not match 2*half_points = {}",
                    self.pmf.len(),
                    self.grid.len()
                ),
            ));
        }
        if let Some((i, p)) = self
            .pmf
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::schema("pmf", format!("entry {i} is {p}")));
        }
        let total = self.total_mass();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::schema(
                "pmf",
                format!("masses sum to {total:.17}, deficit {:.3e}", 1.0 - total),
            ));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.pmf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pmf.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and re-validates a noise file.
    pub fn from_json(text: &str) -> Result<Self> {
        let noise: NoisePmf = serde_json::from_str(text)
            .map_err(|e| Error::schema(json_field_hint(&e.to_string()), e.to_string()))?;
        noise.validate()?;
        Ok(noise)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Same as [`NoisePmf::load`] but without the invariant checks, for
    /// tooling that reports on broken files instead of rejecting them.
    pub fn load_unchecked(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::schema(json_field_hint(&e.to_string()), e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }
}

fn json_field_hint(message: &str) -> String {
    // serde_json names the offending field in backticks for missing/unknown keys
    message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "<document>".to_string())
}
