//! Privacy buckets: the privacy-loss distribution collected into buckets of
//! geometric width, composed by bucket convolution, and turned into ADP and
//! PDP upper bounds.
//!
//! Bucket `j ∈ (−h, h]` holds the mass of outputs with
//! `f^{j−1} < X(o)/Y(o) ≤ f^j`. Bucket `−h` also absorbs every smaller
//! ratio, and the infinity bucket absorbs ratios above `f^h` together with
//! the distinguishing events (`Y(o) = 0`). Indices therefore always round a
//! loss *up*, which keeps every δ derived from them an upper bound.

mod conv;
mod grad;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::worst_case::{Direction, WorstCasePair};

pub use conv::{convolve, convolve_backward};
pub use grad::{bucket_bound_with_grad, BoundKind, BucketGradOutput, IndexGrad};

/// Largest factor accepted by [`BucketConfig::new`].
pub const MAX_FACTOR: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BucketConfig {
    pub half_count: usize,
    pub factor: f64,
}

impl BucketConfig {
    /// Validated configuration with `1 < f ≤ 1.01`.
    pub fn new(half_count: usize, factor: f64) -> Result<Self> {
        let cfg = Self::coarse(half_count, factor)?;
        if factor > MAX_FACTOR {
            return Err(Error::invalid(format!(
                "bucket factor {factor} exceeds the limit {MAX_FACTOR}"
            )));
        }
        Ok(cfg)
    }

    /// Any `f > 1`. Coarse factors are only useful for hand-checkable
    /// illustrations; bounds stay valid but loose.
    pub fn coarse(half_count: usize, factor: f64) -> Result<Self> {
        if half_count < 1 {
            return Err(Error::invalid("bucket half count must be at least 1"));
        }
        if !(factor.is_finite() && factor > 1.0) {
            return Err(Error::invalid(format!("bucket factor must exceed 1, got {factor}")));
        }
        Ok(BucketConfig { half_count, factor })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.half_count, self.factor).map(|_| ())
    }

    pub fn ln_factor(&self) -> f64 {
        (self.factor - 1.0).ln_1p()
    }

    /// Number of finite buckets, `2h + 1`.
    pub fn width(&self) -> usize {
        2 * self.half_count + 1
    }

    /// Finite losses the buckets can represent without overflow: `h·ln f`.
    pub fn coverage(&self) -> f64 {
        self.half_count as f64 * self.ln_factor()
    }

    /// Reference-resolution configuration for a pair composed `n` times.
    ///
    /// The buckets cover `1.5·L` for a single invocation, `L` being the
    /// largest finite |loss| in either direction. Under composition the range
    /// grows to `n·|μ| + 10·√n·σ` of the per-step loss (capped at `1.5·n·L`),
    /// so the composed distribution does not spill into the infinity bucket.
    /// The factor is capped at [`MAX_FACTOR`].
    pub fn reference_for(pair: &WorstCasePair, half_count: usize, n: u32) -> Result<Self> {
        let max_loss = max_finite_abs_loss(pair);
        let n = f64::from(n.max(1));
        let spread = Direction::BOTH
            .into_iter()
            .map(|d| {
                let (x, y) = pair.oriented(d);
                let (mean, sd) = finite_loss_moments(x, y);
                n * mean.abs() + 10.0 * n.sqrt() * sd
            })
            .fold(0.0, f64::max);
        let span = (1.5 * max_loss).max(spread.min(1.5 * n * max_loss));
        let ln_f = (span / half_count as f64).clamp(1e-9, MAX_FACTOR.ln());
        Self::new(half_count, ln_f.exp_m1() + 1.0)
    }
}

/// Mean and standard deviation of `ln(x/y)` under `x`, restricted to the
/// joint support.
fn finite_loss_moments(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        if *a > 0.0 && *b > 0.0 {
            let l = a.ln() - b.ln();
            m0 += a;
            m1 += a * l;
            m2 += a * l * l;
        }
    }
    if m0 == 0.0 {
        return (0.0, 0.0);
    }
    let mean = m1 / m0;
    (mean, (m2 / m0 - mean * mean).max(0.0).sqrt())
}

/// Default resolution of the reference evaluator.
pub const REFERENCE_HALF_COUNT: usize = 12_500;

pub fn max_finite_abs_loss(pair: &WorstCasePair) -> f64 {
    pair.a
        .iter()
        .zip(&pair.b)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln() - b.ln()).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketedLoss {
    /// Masses for `j = −h..=h`, stored at `j + h`.
    pub finite: Vec<f64>,
    pub inf_mass: f64,
    pub config: BucketConfig,
    pub compositions: u32,
}

impl BucketedLoss {
    pub fn at(&self, j: i64) -> f64 {
        self.finite[(j + self.config.half_count as i64) as usize]
    }

    pub fn total_mass(&self) -> f64 {
        self.inf_mass + self.finite.iter().sum::<f64>()
    }
}

/// Where a single output's mass lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slot {
    /// Index into `finite`.
    Finite(usize),
    Infinite,
}

/// Raw (unclamped) bucket index for a ratio with numerator `x > 0` and
/// denominator `y > 0`.
pub(crate) fn raw_index(x: f64, y: f64, ln_f: f64) -> f64 {
    ((x.ln() - y.ln()) / ln_f).ceil()
}

pub(crate) fn slot_for(index: f64, h: usize) -> Slot {
    let h_f = h as f64;
    if index > h_f {
        Slot::Infinite
    } else if index <= -h_f {
        Slot::Finite(0)
    } else {
        Slot::Finite((index + h_f) as usize)
    }
}

pub fn bucketize_masses(x: &[f64], y: &[f64], config: BucketConfig) -> BucketedLoss {
    let h = config.half_count;
    let ln_f = config.ln_factor();
    let mut finite = vec![0.0; config.width()];
    let mut inf_mass = 0.0;
    for (&xo, &yo) in x.iter().zip(y) {
        if xo <= 0.0 {
            continue;
        }
        if yo == 0.0 {
            inf_mass += xo;
            continue;
        }
        match slot_for(raw_index(xo, yo, ln_f), h) {
            Slot::Infinite => inf_mass += xo,
            Slot::Finite(idx) => finite[idx] += xo,
        }
    }
    BucketedLoss {
        finite,
        inf_mass,
        config,
        compositions: 1,
    }
}

pub fn bucketize(pair: &WorstCasePair, direction: Direction, config: BucketConfig) -> BucketedLoss {
    let (x, y) = pair.oriented(direction);
    bucketize_masses(x, y, config)
}

/// Pairwise products to evaluate for an `n`-fold composition, by binary
/// exponentiation. Node 0 is the input; each step appends one node.
pub(crate) fn composition_plan(n: u32) -> (Vec<(usize, usize)>, usize) {
    let mut steps = Vec::new();
    let mut base = 0usize;
    let mut result: Option<usize> = None;
    let mut remaining = n;
    let mut next = 1usize;
    while remaining > 0 {
        if remaining & 1 == 1 {
            result = Some(match result {
                None => base,
                Some(r) => {
                    steps.push((r, base));
                    next += 1;
                    next - 1
                }
            });
        }
        remaining >>= 1;
        if remaining > 0 {
            steps.push((base, base));
            base = next;
            next += 1;
        }
    }
    (steps, result.unwrap_or(0))
}

pub fn compose(bl: &BucketedLoss, n: u32) -> Result<BucketedLoss> {
    if n < 1 {
        return Err(Error::invalid("number of compositions must be at least 1"));
    }
    if bl.compositions != 1 {
        return Err(Error::invalid("compose expects a single-invocation bucket array"));
    }
    let (steps, out) = composition_plan(n);
    let mut nodes = vec![bl.clone()];
    for (l, r) in steps {
        let node = convolve(&nodes[l], &nodes[r]);
        nodes.push(node);
    }
    Ok(nodes.swap_remove(out))
}

/// Bucket weights for the ADP bound: `1 − e^{ε − j·ln f}` for
/// `j ≥ ⌈ε / ln f⌉`, zero below, clamped to `[0, 1]`.
pub fn adp_weights(config: BucketConfig, eps: f64) -> Vec<f64> {
    let ln_f = config.ln_factor();
    let threshold = (eps / ln_f).ceil();
    let h = config.half_count as i64;
    (-h..=h)
        .map(|j| {
            if (j as f64) < threshold {
                0.0
            } else {
                (1.0 - (eps - j as f64 * ln_f).exp()).clamp(0.0, 1.0)
            }
        })
        .collect()
}

/// Bucket weights for the PDP bound: every bucket at or above `⌈ε / ln f⌉`.
pub fn pdp_weights(config: BucketConfig, eps: f64) -> Vec<f64> {
    let threshold = (eps / config.ln_factor()).ceil();
    let h = config.half_count as i64;
    (-h..=h)
        .map(|j| if (j as f64) < threshold { 0.0 } else { 1.0 })
        .collect()
}

fn weighted(bl: &BucketedLoss, weights: &[f64]) -> f64 {
    bl.inf_mass + bl.finite.iter().zip(weights).map(|(m, w)| m * w).sum::<f64>()
}

pub fn delta_adp(bl: &BucketedLoss, eps: f64) -> f64 {
    weighted(bl, &adp_weights(bl.config, eps))
}

pub fn delta_pdp(bl: &BucketedLoss, eps: f64) -> f64 {
    weighted(bl, &pdp_weights(bl.config, eps))
}

/// Composed ADP and PDP bounds in both directions for each ε.
/// Returns `(eps, [adp_ab, adp_ba], [pdp_ab, pdp_ba])` per ε.
pub fn bucket_deltas(
    pair: &WorstCasePair,
    n: u32,
    eps_list: &[f64],
    config: BucketConfig,
) -> Result<Vec<(f64, [f64; 2], [f64; 2])>> {
    let composed = [
        compose(&bucketize(pair, Direction::AB, config), n)?,
        compose(&bucketize(pair, Direction::BA, config), n)?,
    ];
    Ok(eps_list
        .iter()
        .map(|&eps| {
            (
                eps,
                [delta_adp(&composed[0], eps), delta_adp(&composed[1], eps)],
                [delta_pdp(&composed[0], eps), delta_pdp(&composed[1], eps)],
            )
        })
        .collect())
}
