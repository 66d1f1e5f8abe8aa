//! Moments accountant extended with distinguishing events.
//!
//! For one direction X‖Y, with `b∞` the mass of outputs impossible under Y
//! and `Γ_λ = ln Σ_{X,Y>0} X·(X/Y)^λ` over the joint support,
//!
//! ```text
//! δ(ε) = min_λ 1 − (1 − b∞)^n + exp(n·Γ_λ − λ·ε).
//! ```
//!
//! Only the second term depends on λ, and `n·Γ_λ − λε` is convex in λ, so the
//! search is a coarse logarithmic scan followed by golden-section refinement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::worst_case::{Direction, WorstCasePair};

pub fn distinguishing_mass_masses(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .filter(|(xo, yo)| **xo > 0.0 && **yo == 0.0)
        .map(|(xo, _)| xo)
        .sum()
}

pub fn distinguishing_mass(pair: &WorstCasePair, direction: Direction) -> f64 {
    let (x, y) = pair.oriented(direction);
    distinguishing_mass_masses(x, y)
}

/// Joint-support view of one direction, reusable across λ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentsProfile {
    pub b_inf: f64,
    pub direction: Direction,
    log_x: Vec<f64>,
    log_ratio: Vec<f64>,
}

impl MomentsProfile {
    pub fn from_masses(x: &[f64], y: &[f64], direction: Direction) -> Self {
        let (log_x, log_ratio) = x
            .iter()
            .zip(y)
            .filter(|(xo, yo)| **xo > 0.0 && **yo > 0.0)
            .map(|(xo, yo)| (xo.ln(), xo.ln() - yo.ln()))
            .unzip();
        MomentsProfile {
            b_inf: distinguishing_mass_masses(x, y),
            direction,
            log_x,
            log_ratio,
        }
    }

    pub fn new(pair: &WorstCasePair, direction: Direction) -> Self {
        let (x, y) = pair.oriented(direction);
        Self::from_masses(x, y, direction)
    }

    pub fn has_joint_support(&self) -> bool {
        !self.log_x.is_empty()
    }

    pub fn gamma(&self, lambda: f64) -> Result<f64> {
        if !self.has_joint_support() {
            return Err(Error::EmptyJointSupport);
        }
        Ok(log_sum_exp(
            self.log_x.iter().zip(&self.log_ratio).map(|(lx, lr)| lx + lambda * lr),
        ))
    }

    /// `n·Γ_λ − λ·ε`, the log of the tail term.
    fn log_tail(&self, n: u32, eps: f64, lambda: f64) -> f64 {
        n as f64 * self.gamma(lambda).unwrap_or(f64::NEG_INFINITY) - lambda * eps
    }

    fn composed_b_inf(&self, n: u32) -> f64 {
        1.0 - (1.0 - self.b_inf).powi(n as i32)
    }

    /// The bound at a fixed λ, clamped to `[0, 1]`.
    pub fn delta_at(&self, n: u32, eps: f64, lambda: f64) -> f64 {
        (self.composed_b_inf(n) + self.log_tail(n, eps, lambda).exp()).clamp(0.0, 1.0)
    }

    /// Searched minimum over λ, returned as `(δ, λ*)`.
    pub fn delta(&self, n: u32, eps: f64, search: &LambdaSearch) -> (f64, f64) {
        if !self.has_joint_support() {
            return (self.composed_b_inf(n).clamp(0.0, 1.0), search.min_lambda);
        }
        let lambda = search.minimize(|l| self.log_tail(n, eps, l));
        (self.delta_at(n, eps, lambda), lambda)
    }
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Γ_λ in direction A‖B.
pub fn gamma_divergence(pair: &WorstCasePair, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    MomentsProfile::new(pair, Direction::AB).gamma(lambda)
}

/// Logarithmic λ grid `min_lambda·2^k`, `k = 0..=doublings`, then
/// golden-section refinement between the neighbours of the best grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSearch {
    pub min_lambda: f64,
    pub doublings: u32,
    pub refine_iters: u32,
}

impl Default for LambdaSearch {
    fn default() -> Self {
        LambdaSearch {
            min_lambda: 1e-2,
            doublings: 24,
            refine_iters: 60,
        }
    }
}

impl LambdaSearch {
    pub fn grid(&self) -> Vec<f64> {
        (0..=self.doublings)
            .map(|k| self.min_lambda * 2f64.powi(k as i32))
            .collect()
    }

    fn minimize(&self, f: impl Fn(f64) -> f64) -> f64 {
        let grid = self.grid();
        let values: Vec<f64> = grid.iter().map(|&l| f(l)).collect();
        let best = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut lo = grid[best.saturating_sub(1)];
        let mut hi = grid[(best + 1).min(grid.len() - 1)];
        let (mut best_l, mut best_v) = (grid[best], values[best]);
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = hi - ratio * (hi - lo);
        let mut d = lo + ratio * (hi - lo);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..self.refine_iters {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - ratio * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + ratio * (hi - lo);
                fd = f(d);
            }
        }
        for (l, v) in [(c, fc), (d, fd)] {
            if v < best_v {
                best_l = l;
                best_v = v;
            }
        }
        best_l
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaDelta {
    pub delta_ab: f64,
    pub delta_ba: f64,
    pub lambda_ab: f64,
    pub lambda_ba: f64,
    /// The dominating direction differs between λ grid points.
    pub direction_flips: bool,
}

impl MaDelta {
    pub fn delta(&self) -> f64 {
        self.delta_ab.max(self.delta_ba)
    }
}

pub fn delta_ma(pair: &WorstCasePair, n: u32, eps: f64, search: &LambdaSearch) -> Result<MaDelta> {
    if n < 1 {
        return Err(Error::invalid("number of compositions must be at least 1"));
    }
    let ab = MomentsProfile::new(pair, Direction::AB);
    let ba = MomentsProfile::new(pair, Direction::BA);
    let (delta_ab, lambda_ab) = ab.delta(n, eps, search);
    let (delta_ba, lambda_ba) = ba.delta(n, eps, search);
    let signs: Vec<f64> = search
        .grid()
        .into_iter()
        .map(|l| ab.delta_at(n, eps, l) - ba.delta_at(n, eps, l))
        .filter(|d| d.abs() > 1e-15)
        .collect();
    let direction_flips = signs.iter().any(|d| *d > 0.0) && signs.iter().any(|d| *d < 0.0);
    Ok(MaDelta {
        delta_ab,
        delta_ba,
        lambda_ab,
        lambda_ba,
        direction_flips,
    })
}

/// Offset keeping the trainable λ away from zero.
pub const LAMBDA_FLOOR: f64 = 1e-4;

pub fn lambda_from_sq(lambda_sq: f64) -> f64 {
    lambda_sq * lambda_sq + LAMBDA_FLOOR
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaGradOutput {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    pub grad_lambda: f64,
}

/// Unclamped bound at a fixed λ with its gradient with respect to both mass
/// arrays and λ.
pub fn ma_bound_with_grad(x: &[f64], y: &[f64], n: u32, eps: f64, lambda: f64) -> Result<MaGradOutput> {
    if x.len() != y.len() {
        return Err(Error::invalid("mass arrays differ in length"));
    }
    let nf = n as f64;
    let b_inf = distinguishing_mass_masses(x, y);
    let survive = 1.0 - b_inf;
    let d_binf = nf * survive.powi(n as i32 - 1);
    let terms: Vec<(usize, f64, f64)> = x
        .iter()
        .zip(y)
        .enumerate()
        .filter(|(_, (xo, yo))| **xo > 0.0 && **yo > 0.0)
        .map(|(o, (xo, yo))| {
            let r = xo.ln() - yo.ln();
            (o, xo.ln() + lambda * r, r)
        })
        .collect();
    let mut grad_x = vec![0.0; x.len()];
    let mut grad_y = vec![0.0; y.len()];
    for (o, (xo, yo)) in x.iter().zip(y).enumerate() {
        if *xo > 0.0 && *yo == 0.0 {
            grad_x[o] = d_binf;
        }
    }
    if terms.is_empty() {
        return Ok(MaGradOutput {
            value: 1.0 - survive.powi(n as i32),
            grad_x,
            grad_y,
            grad_lambda: 0.0,
        });
    }
    let gamma = log_sum_exp(terms.iter().map(|t| t.1));
    let tail = (nf * gamma - lambda * eps).exp();
    let mut d_gamma_d_lambda = 0.0;
    for &(o, log_term, r) in &terms {
        let pi = (log_term - gamma).exp();
        grad_x[o] += tail * nf * (1.0 + lambda) * pi / x[o];
        grad_y[o] -= tail * nf * lambda * pi / y[o];
        d_gamma_d_lambda += pi * r;
    }
    Ok(MaGradOutput {
        value: 1.0 - survive.powi(n as i32) + tail,
        grad_x,
        grad_y,
        grad_lambda: tail * (nf * d_gamma_d_lambda - eps),
    })
}
