use serde::Serialize;

use super::NoisePmf;

/// Whether a pmf meets the symmetric / centre-monotone hypotheses under which
/// checking the maximal shift is enough.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureReport {
    pub is_symmetric: bool,
    pub max_asymmetry: f64,
    pub is_monotone_from_center: bool,
    pub max_monotonicity_violation: f64,
    pub mass_total: f64,
}

impl StructureReport {
    pub fn is_symmetric_monotone(&self) -> bool {
        self.is_symmetric && self.is_monotone_from_center
    }
}

pub fn check_structure(noise: &NoisePmf, tol: f64) -> StructureReport {
    structure_of(&noise.pmf, tol)
}

/// Works on any length; for odd lengths the middle entry belongs to both halves.
pub fn structure_of(masses: &[f64], tol: f64) -> StructureReport {
    let n = masses.len();
    let max_asymmetry = (0..n / 2)
        .map(|i| (masses[i] - masses[n - 1 - i]).abs())
        .fold(0.0, f64::max);
    let rising = &masses[..n.div_ceil(2)];
    let falling = &masses[n / 2..];
    let left = rising
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(0.0, f64::max);
    let right = falling
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    let max_monotonicity_violation = left.max(right);
    StructureReport {
        is_symmetric: max_asymmetry <= tol,
        max_asymmetry,
        is_monotone_from_center: max_monotonicity_violation <= tol,
        max_monotonicity_violation,
        mass_total: masses.iter().sum(),
    }
}
