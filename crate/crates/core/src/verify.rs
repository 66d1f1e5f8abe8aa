//! Machine-readable checks on a noise file.

use serde::Serialize;

use crate::buckets::{bucketize, compose, delta_adp, delta_pdp, BucketConfig};
use crate::error::Result;
use crate::moments::{LambdaSearch, MomentsProfile};
use crate::noise::{check_structure, NoisePmf, StructureReport, NORMALIZATION_TOL};
use crate::oracle::{delta_from_loss, exact_compose, loss_distribution, DEFAULT_TERM_BUDGET};
use crate::worst_case::{shift_invariance_check, Direction, Scenario, ShiftInvarianceReport, STRUCTURE_TOL};

/// Pairs up to this support length also get the oracle soundness check.
pub const SOUNDNESS_MAX_SUPPORT: usize = 20;
const SOUNDNESS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizationCheck {
    pub passes: bool,
    pub total: f64,
    pub deficit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureCheck {
    pub passes: bool,
    #[serde(flatten)]
    pub report: StructureReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoundnessCheck {
    pub passes: bool,
    pub comparisons: usize,
    pub violations: usize,
    /// Largest `exact − bound`; negative when every bound holds.
    pub worst_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passes: bool,
    pub normalization: NormalizationCheck,
    pub structure: StructureCheck,
    /// Absent for sub-sampled scenarios, where the shift argument does not apply.
    pub shift_invariance: Option<ShiftInvarianceReport>,
    pub soundness: Option<SoundnessCheck>,
}

pub fn verify(noise: &NoisePmf, scenario: &Scenario, eps: f64) -> Result<VerifyReport> {
    let total = noise.total_mass();
    let normalization = NormalizationCheck {
        passes: (total - 1.0).abs() <= NORMALIZATION_TOL && noise.pmf.iter().all(|p| *p >= 0.0),
        total,
        deficit: 1.0 - total,
    };
    let report = check_structure(noise, STRUCTURE_TOL);
    let structure = StructureCheck {
        passes: report.is_symmetric_monotone(),
        report,
    };
    let shift_invariance = match *scenario {
        Scenario::Sensitivity { s } => Some(shift_invariance_check(noise, s, eps)?),
        Scenario::Dpsgd { .. } => None,
    };
    let soundness = if normalization.passes && noise.len() <= SOUNDNESS_MAX_SUPPORT {
        Some(soundness_check(noise, scenario, eps)?)
    } else {
        None
    };
    let passes = normalization.passes
        && structure.passes
        && shift_invariance.as_ref().is_none_or(|r| r.applicable && r.passes)
        && soundness.as_ref().is_none_or(|s| s.passes);
    Ok(VerifyReport {
        passes,
        normalization,
        structure,
        shift_invariance,
        soundness,
    })
}

fn soundness_check(noise: &NoisePmf, scenario: &Scenario, eps: f64) -> Result<SoundnessCheck> {
    let pair = scenario.pair(noise)?;
    let search = LambdaSearch::default();
    let mut comparisons = 0;
    let mut violations = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    for d in Direction::BOTH {
        let ld = loss_distribution(&pair, d);
        let ma = MomentsProfile::new(&pair, d);
        for n in [1u32, 2, 4] {
            let exact_ld = exact_compose(&ld, n, DEFAULT_TERM_BUDGET)?;
            let composed = compose(&bucketize(&pair, d, BucketConfig::reference_for(&pair, 2000, n)?), n)?;
            for e in [0.0, 0.1, eps, 1.0] {
                let (exact_adp, exact_pdp) = delta_from_loss(&exact_ld, e);
                let checks = [
                    (exact_adp, delta_adp(&composed, e)),
                    (exact_pdp, delta_pdp(&composed, e)),
                    (exact_adp, ma.delta(n, e, &search).0),
                ];
                for (exact, bound) in checks {
                    comparisons += 1;
                    let gap = exact - bound;
                    worst_gap = worst_gap.max(gap);
                    if gap > SOUNDNESS_SLACK {
                        violations += 1;
                    }
                }
            }
        }
    }
    Ok(SoundnessCheck {
        passes: violations == 0,
        comparisons,
        violations,
        worst_gap,
    })
}
