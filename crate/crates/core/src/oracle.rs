//! Exact δ(ε) for small discrete pairs, including exact n-fold composition
//! through the privacy-loss distribution. Desk scale only: composition is
//! bounded by an explicit term budget and never approximates.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::worst_case::{Direction, WorstCasePair};

pub const DEFAULT_TERM_BUDGET: u64 = 10_000_000;

/// Privacy-loss distribution of one direction: finite losses (nats) with
/// their masses under the numerator distribution, plus the mass of
/// distinguishing events (loss `+∞`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossDistribution {
    /// Strictly increasing losses, every mass positive.
    pub finite: Vec<(f64, f64)>,
    pub inf_mass: f64,
    pub direction: Direction,
    pub compositions: u32,
}

impl LossDistribution {
    pub fn total_mass(&self) -> f64 {
        self.inf_mass + self.finite.iter().map(|(_, m)| m).sum::<f64>()
    }

    fn from_groups(groups: HashMap<u64, f64>, inf_mass: f64, direction: Direction, n: u32) -> Self {
        let mut finite: Vec<(f64, f64)> = groups
            .into_iter()
            .map(|(bits, m)| (f64::from_bits(bits), m))
            .filter(|(_, m)| *m > 0.0)
            .collect();
        finite.sort_by(|x, y| x.0.total_cmp(&y.0));
        LossDistribution {
            finite,
            inf_mass,
            direction,
            compositions: n,
        }
    }
}

// -0.0 and 0.0 are the same loss
fn loss_key(loss: f64) -> u64 {
    (loss + 0.0).to_bits()
}

pub fn loss_distribution_masses(x: &[f64], y: &[f64], direction: Direction) -> LossDistribution {
    let mut groups: HashMap<u64, f64> = HashMap::new();
    let mut inf_mass = 0.0;
    for (&xo, &yo) in x.iter().zip(y) {
        if xo <= 0.0 {
            continue;
        }
        if yo == 0.0 {
            inf_mass += xo;
        } else {
            *groups.entry(loss_key((xo / yo).ln())).or_insert(0.0) += xo;
        }
    }
    LossDistribution::from_groups(groups, inf_mass, direction, 1)
}

pub fn loss_distribution(pair: &WorstCasePair, direction: Direction) -> LossDistribution {
    let (x, y) = pair.oriented(direction);
    loss_distribution_masses(x, y, direction)
}

/// `Σ_o max(0, X(o) − e^ε Y(o))`: the smallest δ for which the ADP
/// inequality holds in direction X‖Y.
pub fn exact_delta_masses(x: &[f64], y: &[f64], eps: f64) -> f64 {
    let scale = eps.exp();
    x.iter()
        .zip(y)
        .map(|(&xo, &yo)| (xo - scale * yo).max(0.0))
        .sum()
}

pub fn exact_delta(pair: &WorstCasePair, eps: f64) -> f64 {
    exact_delta_masses(&pair.a, &pair.b, eps)
}

/// Mass of distinguishing events plus all outputs whose loss exceeds ε.
pub fn exact_pdp_delta(pair: &WorstCasePair, eps: f64) -> f64 {
    delta_from_loss(&loss_distribution(pair, Direction::AB), eps).1
}

/// `(adp, pdp)` from a loss distribution:
/// `adp = b∞ + Σ_{L>ε} (1 − e^{ε−L})·m(L)`, `pdp = b∞ + Σ_{L>ε} m(L)`.
pub fn delta_from_loss(ld: &LossDistribution, eps: f64) -> (f64, f64) {
    let mut adp = ld.inf_mass;
    let mut pdp = ld.inf_mass;
    for &(loss, mass) in ld.finite.iter().filter(|(l, _)| *l > eps) {
        adp += (1.0 - (eps - loss).exp()) * mass;
        pdp += mass;
    }
    (adp, pdp)
}

/// Exact n-fold self-composition: finite losses add, masses multiply,
/// distinguishing mass composes as `1 − (1 − b∞)^n`.
pub fn exact_compose(ld: &LossDistribution, n: u32, budget: u64) -> Result<LossDistribution> {
    if n < 1 {
        return Err(Error::invalid("number of compositions must be at least 1"));
    }
    if ld.compositions != 1 {
        return Err(Error::invalid("compose expects a single-invocation distribution"));
    }
    let mut current = ld.clone();
    let mut spent: u128 = 0;
    for step in 2..=n {
        let terms = (current.finite.len() * ld.finite.len()) as u128;
        spent += terms;
        if spent > budget as u128 {
            return Err(Error::ResourceLimit {
                what: "exact composition",
                needed: spent,
                budget,
            });
        }
        let mut groups: HashMap<u64, f64> = HashMap::with_capacity(current.finite.len());
        for &(l1, m1) in &current.finite {
            for &(l2, m2) in &ld.finite {
                *groups.entry(loss_key(l1 + l2)).or_insert(0.0) += m1 * m2;
            }
        }
        let inf_mass = 1.0 - (1.0 - ld.inf_mass).powi(step as i32);
        current = LossDistribution::from_groups(groups, inf_mass, ld.direction, step);
    }
    Ok(current)
}

/// Exact `(adp, pdp)` after `n` compositions in one direction.
pub fn exact_composed_delta(
    pair: &WorstCasePair,
    direction: Direction,
    n: u32,
    eps: f64,
    budget: u64,
) -> Result<(f64, f64)> {
    let ld = exact_compose(&loss_distribution(pair, direction), n, budget)?;
    Ok(delta_from_loss(&ld, eps))
}
