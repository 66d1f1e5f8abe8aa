//! Matching a generated noise against an analytic baseline.

use serde::{Deserialize, Serialize};

use crate::buckets::{bucketize, compose, delta_adp};
use crate::curve::Resolution;
use crate::error::{Error, Result};
use crate::learner::utility_loss;
use crate::noise::{staircase_pmf, truncated_gaussian_pmf, NoisePmf};
use crate::worst_case::{Direction, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Parameter: σ.
    Gaussian,
    /// Parameter: γ, with the staircase period equal to the sensitivity.
    Staircase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    Delta,
    Utility,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareSettings {
    pub scenario: Scenario,
    pub eps: f64,
    pub n: u32,
    pub utility_order: u8,
    pub resolution: Resolution,
    /// Points in the coarse scan that locates the decreasing branch.
    pub scan_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub baseline: Baseline,
    pub matching: Matching,
    pub parameter: f64,
    pub baseline_delta: f64,
    pub generated_delta: f64,
    pub baseline_utility: f64,
    pub generated_utility: f64,
    /// `D_KL(baseline ‖ generated)` in nats.
    pub kl: f64,
}

/// `Σ p ln(p/q)` over `p > 0`; infinite if `q` misses part of `p`'s support.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| if *qi > 0.0 { pi * (pi.ln() - qi.ln()) } else { f64::INFINITY })
        .sum()
}

/// `Σ p (ln p − log_q)` over `p > 0`, for a `q` given in log space.
pub fn kl_divergence_log(p: &[f64], log_q: &[f64]) -> f64 {
    p.iter()
        .zip(log_q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, lq)| pi * (pi.ln() - lq))
        .sum()
}

/// ADP δ(ε) after `n` compositions, max over both directions.
pub fn noise_delta(noise: &NoisePmf, settings: &CompareSettings) -> Result<f64> {
    let pair = settings.scenario.pair(noise)?;
    let config = settings.resolution.config_for(&pair, settings.n)?;
    let mut worst: f64 = 0.0;
    for d in Direction::BOTH {
        let bl = compose(&bucketize(&pair, d, config), settings.n)?;
        worst = worst.max(delta_adp(&bl, settings.eps));
    }
    Ok(worst)
}

fn sensitivity(scenario: &Scenario) -> f64 {
    match *scenario {
        Scenario::Sensitivity { s } => s,
        Scenario::Dpsgd { clip, .. } => clip,
    }
}

pub fn baseline_noise(baseline: Baseline, parameter: f64, like: &NoisePmf, settings: &CompareSettings) -> Result<NoisePmf> {
    match baseline {
        Baseline::Gaussian => truncated_gaussian_pmf(&like.grid, parameter),
        Baseline::Staircase => staircase_pmf(&like.grid, settings.eps, sensitivity(&settings.scenario), Some(parameter)),
    }
}

/// Bisection for `f(x) = target` on `[lo, hi]`, in log space when
/// `log_scale`. Requires a sign change at the ends.
pub fn bisect(
    f: impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    target: f64,
    log_scale: bool,
) -> Result<f64> {
    let (to, from): (fn(f64) -> f64, fn(f64) -> f64) = if log_scale {
        (f64::ln, f64::exp)
    } else {
        (|x| x, |x| x)
    };
    let (mut a, mut b) = (to(lo), to(hi));
    let fa = f(lo)? - target;
    let fb = f(hi)? - target;
    if fa == 0.0 {
        return Ok(lo);
    }
    if fb == 0.0 {
        return Ok(hi);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket { lo, hi, target });
    }
    let rising = fb > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(from(mid))? - target;
        if fm == 0.0 {
            return Ok(from(mid));
        }
        if (fm > 0.0) == rising {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(from(0.5 * (a + b)))
}

fn parameter_range(baseline: Baseline, noise: &NoisePmf) -> (f64, f64, bool) {
    match baseline {
        Baseline::Gaussian => (noise.grid.step() / 10.0, 10.0 * noise.grid.half_width, true),
        Baseline::Staircase => (1e-6, 1.0 - 1e-6, false),
    }
}

pub fn compare(
    noise: &NoisePmf,
    baseline: Baseline,
    matching: Matching,
    settings: &CompareSettings,
) -> Result<CompareReport> {
    let generated_delta = noise_delta(noise, settings)?;
    let generated_utility = utility_loss(noise, settings.utility_order);
    let (lo, hi, log_scale) = parameter_range(baseline, noise);
    let make = |x: f64| baseline_noise(baseline, x, noise, settings);
    let (objective, target): (Box<dyn Fn(f64) -> Result<f64>>, f64) = match matching {
        Matching::Utility => (
            Box::new(|x| Ok(utility_loss(&make(x)?, settings.utility_order))),
            generated_utility,
        ),
        Matching::Delta => (Box::new(|x| noise_delta(&make(x)?, settings)), generated_delta),
    };
    // Neither δ nor the staircase utility is monotone in the parameter, so
    // scan for the first crossing and bisect inside it. For δ(σ) that is
    // the decreasing branch.
    let m = settings.scan_points.max(3);
    let scan: Vec<f64> = (0..m)
        .map(|i| {
            let t = i as f64 / (m - 1) as f64;
            if log_scale {
                (lo.ln() + (hi.ln() - lo.ln()) * t).exp()
            } else {
                lo + (hi - lo) * t
            }
        })
        .collect();
    let values = scan.iter().map(|&x| objective(x)).collect::<Result<Vec<f64>>>()?;
    let crossing = (0..m - 1).find(|&i| {
        let (a, b) = (values[i] - target, values[i + 1] - target);
        a == 0.0 || a.signum() != b.signum()
    });
    let Some(i) = crossing else {
        return Err(Error::Bracket { lo, hi, target });
    };
    let parameter = bisect(&objective, scan[i], scan[i + 1], target, log_scale)?;
    let base = make(parameter)?;
    Ok(CompareReport {
        baseline,
        matching,
        parameter,
        baseline_delta: noise_delta(&base, settings)?,
        generated_delta,
        baseline_utility: utility_loss(&base, settings.utility_order),
        generated_utility,
        kl: kl_divergence(&base.pmf, &noise.pmf),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::GridSpec;

    fn settings() -> CompareSettings {
        CompareSettings {
            scenario: Scenario::Sensitivity { s: 1.0 },
            eps: 0.3,
            n: 1,
            utility_order: 2,
            resolution: Resolution::Reference { half_count: 2000 },
            scan_points: 40,
        }
    }

    #[test]
    fn kl_basics() {
        assert_eq!(kl_divergence(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
        assert!((kl_divergence(&[1.0, 0.0], &[0.5, 0.5]) - std::f64::consts::LN_2).abs() < 1e-15);
        let q = [0.25, 0.75];
        let log_q = q.map(f64::ln);
        assert_eq!(kl_divergence_log(&[0.5, 0.5], &log_q), kl_divergence(&[0.5, 0.5], &q));
    }

    #[test]
    fn bisection_reports_its_bracket() {
        match bisect(|x| Ok(x * x), 1.0, 2.0, 10.0, false) {
            Err(Error::Bracket { lo, hi, target }) => assert_eq!((lo, hi, target), (1.0, 2.0, 10.0)),
            other => panic!("{other:?}"),
        }
        let r = bisect(|x| Ok(x * x), 1.0, 4.0, 2.0, true).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_self_match() {
        let g = GridSpec::new(5.0, 50, 1e-5).unwrap();
        let sigma = 1.7;
        let noise = truncated_gaussian_pmf(&g, sigma).unwrap();
        for matching in [Matching::Utility, Matching::Delta] {
            let r = compare(&noise, Baseline::Gaussian, matching, &settings()).unwrap();
            assert!((r.parameter / sigma - 1.0).abs() < 1e-6, "{matching:?}: {}", r.parameter);
            assert!(r.kl.abs() < 1e-10);
        }
    }

    #[test]
    fn staircase_utility_self_match() {
        let g = GridSpec::new(5.0, 50, 1e-5).unwrap();
        let s = settings();
        let noise = staircase_pmf(&g, 0.3, 1.0, Some(0.3)).unwrap();
        let r = compare(&noise, Baseline::Staircase, Matching::Utility, &s).unwrap();
        // utility only changes where a grid cell changes step, so any γ in
        // the same cell range reproduces the pmf
        assert!(r.kl.abs() < 1e-12, "{r:?}");
    }
}
