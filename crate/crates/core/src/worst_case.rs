//! Worst-case output distributions.
//!
//! Every accountant consumes a [`WorstCasePair`]: two mass arrays aligned on a
//! shared, extended support. Shifted-out cells are exact zeros, which is what
//! makes distinguishing events (outputs impossible under one input) visible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{check_structure, NoisePmf};
use crate::oracle;

/// Tolerance used when testing the symmetric / monotone hypotheses.
pub const STRUCTURE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairLabel {
    Sensitivity { s: f64 },
    Subsampled { q: f64, clip: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCasePair {
    pub support: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub label: PairLabel,
    /// Set when the roles of `a` and `b` were exchanged.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub swapped: bool,
    /// Set when the reduction to this pair is not covered by the
    /// shift-invariance argument (asymmetric or non-monotone noise, or a
    /// sub-sampled mixture).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl WorstCasePair {
    pub fn new(support: Vec<f64>, a: Vec<f64>, b: Vec<f64>, label: PairLabel) -> Result<Self> {
        let pair = WorstCasePair {
            support,
            a,
            b,
            label,
            swapped: false,
            warning: None,
        };
        pair.validate()?;
        Ok(pair)
    }

    /// A pair without a support, for hand-written examples and tests.
    pub fn from_masses(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let support = (0..a.len()).map(|i| i as f64).collect();
        Self::new(support, a, b, PairLabel::Custom)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.len() != self.support.len() || self.b.len() != self.support.len() {
            return Err(Error::schema(
                "a/b",
                format!(
                    "lengths {}/{} do not match support length {}",
                    self.a.len(),
                    self.b.len(),
                    self.support.len()
                ),
            ));
        }
        for (name, masses) in [("a", &self.a), ("b", &self.b)] {
            if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
                return Err(Error::schema(name, "masses must be finite and non-negative"));
            }
            let total: f64 = masses.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::schema(name, format!("masses sum to {total:.17}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// `(numerator, denominator)` for the requested direction.
    pub fn oriented(&self, direction: Direction) -> (&[f64], &[f64]) {
        match direction {
            Direction::AB => (&self.a, &self.b),
            Direction::BA => (&self.b, &self.a),
        }
    }
}

/// Which distribution sits in the numerator of the privacy loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "ab")]
    AB,
    #[serde(rename = "ba")]
    BA,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::AB, Direction::BA];
}

/// `A = p` padded with `k` trailing zeros, `B = p` moved right by `k` cells.
pub fn shifted_masses(masses: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = masses.to_vec();
    a.resize(masses.len() + k, 0.0);
    let mut b = vec![0.0; k];
    b.extend_from_slice(masses);
    (a, b)
}

/// `A = p`, `B = (1 − q)·p + q·(p moved right by k)`.
pub fn mixture_masses(masses: &[f64], k: usize, q: f64) -> (Vec<f64>, Vec<f64>) {
    let (a, shifted) = shifted_masses(masses, k);
    let b = a
        .iter()
        .zip(&shifted)
        .map(|(p, s)| (1.0 - q) * p + q * s)
        .collect();
    (a, b)
}

fn extended_support(noise: &NoisePmf, k: usize) -> Vec<f64> {
    (0..noise.len() + k).map(|i| noise.grid.point(i)).collect()
}

fn hypotheses_warning(noise: &NoisePmf) -> Option<String> {
    let report = check_structure(noise, STRUCTURE_TOL);
    if report.is_symmetric_monotone() {
        None
    } else {
        Some(format!(
            "noise is not symmetric and centre-monotone (asymmetry {:.3e}, violation {:.3e}); \
             the maximal shift may not be the worst case",
            report.max_asymmetry, report.max_monotonicity_violation
        ))
    }
}

pub fn sensitivity_pair(noise: &NoisePmf, s: f64) -> Result<WorstCasePair> {
    let k = noise.grid.cells_for_shift(s)?;
    let (a, b) = shifted_masses(&noise.pmf, k);
    let mut pair = WorstCasePair::new(extended_support(noise, k), a, b, PairLabel::Sensitivity { s })?;
    pair.warning = hypotheses_warning(noise);
    Ok(pair)
}

pub fn subsampled_pair(noise: &NoisePmf, q: f64, clip: f64) -> Result<WorstCasePair> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("sampling probability must lie in (0, 1), got {q}")));
    }
    let k = noise.grid.cells_for_shift(clip)?;
    let (a, b) = mixture_masses(&noise.pmf, k, q);
    let mut pair =
        WorstCasePair::new(extended_support(noise, k), a, b, PairLabel::Subsampled { q, clip })?;
    pair.warning = Some(match hypotheses_warning(noise) {
        Some(w) => w,
        None => "shift invariance is not established for sub-sampled mixtures".to_string(),
    });
    Ok(pair)
}

pub fn swap(pair: &WorstCasePair) -> WorstCasePair {
    WorstCasePair {
        a: pair.b.clone(),
        b: pair.a.clone(),
        swapped: !pair.swapped,
        ..pair.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftInvarianceReport {
    /// False when the noise is not symmetric and centre-monotone; nothing else
    /// is computed then.
    pub applicable: bool,
    pub passes: bool,
    pub eps: f64,
    /// `(shift, δ)` for every multiple of the step up to `s`.
    pub deltas: Vec<(f64, f64)>,
    pub argmax_shift: f64,
}

/// Exhaustively checks that no smaller shift than `s` leaks more than `s`
/// itself, using exact δ in both directions.
pub fn shift_invariance_check(noise: &NoisePmf, s: f64, eps: f64) -> Result<ShiftInvarianceReport> {
    let k = noise.grid.cells_for_shift(s)?;
    if hypotheses_warning(noise).is_some() {
        return Ok(ShiftInvarianceReport {
            applicable: false,
            passes: false,
            eps,
            deltas: Vec::new(),
            argmax_shift: f64::NAN,
        });
    }
    let step = noise.grid.step();
    let deltas: Vec<(f64, f64)> = (1..=k)
        .map(|j| {
            let (a, b) = shifted_masses(&noise.pmf, j);
            let delta = oracle::exact_delta_masses(&a, &b, eps)
                .max(oracle::exact_delta_masses(&b, &a, eps));
            (j as f64 * step, delta)
        })
        .collect();
    let at_s = deltas.last().map(|d| d.1).unwrap_or(0.0);
    let (argmax_shift, max_delta) = deltas
        .iter()
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, d| if d.1 > best.1 { d } else { best });
    Ok(ShiftInvarianceReport {
        applicable: true,
        passes: max_delta <= at_s + 1e-12,
        eps,
        deltas,
        argmax_shift,
    })
}

/// How a noise pmf turns into its worst-case pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    Sensitivity { s: f64 },
    Dpsgd { q: f64, clip: f64 },
}

impl Scenario {
    pub fn validate(&self, grid: &crate::noise::GridSpec) -> Result<()> {
        match *self {
            Scenario::Sensitivity { s } => grid.cells_for_shift(s).map(|_| ()),
            Scenario::Dpsgd { q, clip } => {
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::invalid(format!(
                        "sampling probability must lie in (0, 1), got {q}"
                    )));
                }
                grid.cells_for_shift(clip).map(|_| ())
            }
        }
    }

    pub fn pair(&self, noise: &NoisePmf) -> Result<WorstCasePair> {
        match *self {
            Scenario::Sensitivity { s } => sensitivity_pair(noise, s),
            Scenario::Dpsgd { q, clip } => subsampled_pair(noise, q, clip),
        }
    }

    /// `(a, b)` from raw masses without validation, for the training loop.
    pub fn masses(&self, masses: &[f64], step: f64) -> (Vec<f64>, Vec<f64>) {
        match *self {
            Scenario::Sensitivity { s } => shifted_masses(masses, cells(s, step)),
            Scenario::Dpsgd { q, clip } => mixture_masses(masses, cells(clip, step), q),
        }
    }

    /// Pulls gradients with respect to `(a, b)` back onto the pmf.
    pub fn pullback(&self, grad_a: &[f64], grad_b: &[f64], len: usize, step: f64) -> Vec<f64> {
        match *self {
            Scenario::Sensitivity { s } => {
                let k = cells(s, step);
                (0..len).map(|i| grad_a[i] + grad_b[i + k]).collect()
            }
            Scenario::Dpsgd { q, clip } => {
                let k = cells(clip, step);
                (0..len)
                    .map(|i| grad_a[i] + (1.0 - q) * grad_b[i] + q * grad_b[i + k])
                    .collect()
            }
        }
    }
}

fn cells(shift: f64, step: f64) -> usize {
    (shift / step).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{staircase_pmf, truncated_gaussian_pmf, GridSpec};

    #[test]
    fn index_shift_example() {
        let (a, b) = shifted_masses(&[0.25, 0.5, 0.25], 1);
        assert_eq!(a, vec![0.25, 0.5, 0.25, 0.0]);
        assert_eq!(b, vec![0.0, 0.25, 0.5, 0.25]);
    }

    #[test]
    fn two_point_uniform_shift() {
        let (a, b) = shifted_masses(&[0.5, 0.5], 1);
        assert_eq!(a, vec![0.5, 0.5, 0.0]);
        assert_eq!(b, vec![0.0, 0.5, 0.5]);
        let pair = WorstCasePair::from_masses(a, b).unwrap();
        assert_eq!(oracle::exact_delta(&pair, 50.0), 0.5);
        assert_eq!(oracle::exact_delta(&swap(&pair), 50.0), 0.5);
    }

    #[test]
    fn mixture_example() {
        let (a, b) = mixture_masses(&[0.25, 0.5, 0.25], 1, 0.1);
        assert_eq!(a, vec![0.25, 0.5, 0.25, 0.0]);
        let expected = [0.225, 0.475, 0.275, 0.025];
        for (x, e) in b.iter().zip(expected) {
            assert!((x - e).abs() < 1e-15);
        }
    }

    #[test]
    fn mixture_vanishing_q() {
        let (a, b) = mixture_masses(&[0.25, 0.5, 0.25], 1, 1e-15);
        for (x, y) in a.iter().zip(&b).take(3) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn pair_support_and_mass() {
        let g = GridSpec::new(5.0, 10, 0.0).unwrap();
        let noise = truncated_gaussian_pmf(&g, 2.0).unwrap();
        let pair = sensitivity_pair(&noise, 1.0).unwrap();
        assert_eq!(pair.len(), noise.len() + 2);
        assert!(pair.warning.is_none());
        assert_eq!(pair.support[0], g.point(0));
        let mixed = subsampled_pair(&noise, 0.1, 1.0).unwrap();
        assert_eq!(mixed.len(), noise.len() + 2);
        assert!(mixed.warning.is_some());
        assert!(sensitivity_pair(&noise, 0.3).is_err());
        assert!(subsampled_pair(&noise, 1.0, 1.0).is_err());
    }

    #[test]
    fn asymmetric_noise_is_flagged() {
        let g = GridSpec::new(1.0, 2, 0.0).unwrap();
        let noise = NoisePmf::new(g, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(sensitivity_pair(&noise, 0.5).unwrap().warning.is_some());
    }

    #[test]
    fn swap_is_an_involution() {
        let g = GridSpec::new(5.0, 10, 0.0).unwrap();
        let noise = truncated_gaussian_pmf(&g, 2.0).unwrap();
        let pair = subsampled_pair(&noise, 0.1, 1.0).unwrap();
        assert_eq!(swap(&swap(&pair)), pair);
    }

    #[test]
    fn shift_invariance_on_baselines() {
        let g = GridSpec::new(5.0, 100, 1e-5).unwrap();
        let gauss = truncated_gaussian_pmf(&g, 1.5).unwrap();
        let r = shift_invariance_check(&gauss, 1.0, 0.3).unwrap();
        assert!(r.applicable && r.passes);
        assert_eq!(r.argmax_shift, 1.0);

        let stairs = staircase_pmf(&g, 0.3, 1.0, None).unwrap();
        let r = shift_invariance_check(&stairs, 1.0, 0.3).unwrap();
        assert!(r.applicable && r.passes);
    }

    #[test]
    fn shift_invariance_not_applicable_for_towers() {
        let g = GridSpec::new(2.0, 2, 0.0).unwrap();
        let noise = NoisePmf::new(g, vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let r = shift_invariance_check(&noise, 1.0, 0.3).unwrap();
        assert!(!r.applicable);
    }
}
