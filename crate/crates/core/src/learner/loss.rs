//! `L = l^X(A, B; ε, n) + w_t·U`.

use serde::Serialize;

use super::model::{forward_tape, mirror, model_backward};
use super::{Accountant, SigmoidStackParams, TrainConfig, TrainDirection};
use crate::buckets::{bucket_bound_with_grad, BoundKind};
use crate::error::Result;
use crate::moments::{lambda_from_sq, ma_bound_with_grad};
use crate::noise::NoisePmf;

/// `(Σ |x|^λ p)^{1/λ}` over the literal grid coordinates.
pub fn utility_loss(noise: &NoisePmf, order: u8) -> f64 {
    utility_of(&noise.grid.points(), &noise.pmf, order)
}

fn utility_of(points: &[f64], pmf: &[f64], order: u8) -> f64 {
    match order {
        1 => points.iter().zip(pmf).map(|(x, p)| x.abs() * p).sum(),
        _ => points.iter().zip(pmf).map(|(x, p)| x * x * p).sum::<f64>().sqrt(),
    }
}

/// `∂U/∂p_i`.
pub fn utility_grad(points: &[f64], pmf: &[f64], order: u8) -> Vec<f64> {
    match order {
        1 => points.iter().map(|x| x.abs()).collect(),
        _ => {
            let u = utility_of(points, pmf, 2);
            if u == 0.0 {
                return vec![0.0; points.len()];
            }
            points.iter().map(|x| x * x / (2.0 * u)).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossParts {
    pub total: f64,
    pub lx: f64,
    pub utility: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub parts: LossParts,
    /// Gradient in [`SigmoidStackParams::to_flat`] layout.
    pub grad: Vec<f64>,
}

/// The privacy term for raw masses `pmf` with its gradient with respect to
/// `pmf` and to `λ_sq`.
pub(crate) fn privacy_term(pmf: &[f64], cfg: &TrainConfig, lambda_sq: f64) -> Result<(f64, Vec<f64>, f64)> {
    let step = cfg.grid.step();
    let (a, b) = cfg.scenario.masses(pmf, step);
    let directions: &[bool] = match cfg.direction {
        TrainDirection::Ab => &[false],
        TrainDirection::Ba => &[true],
        TrainDirection::Max => &[false, true],
    };
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, f64)> = None;
    for &flip in directions {
        let (x, y) = if flip { (&b, &a) } else { (&a, &b) };
        let (value, gx, gy, g_lsq) = match cfg.accountant {
            Accountant::Adp | Accountant::Pdp => {
                let kind = if cfg.accountant == Accountant::Adp {
                    BoundKind::Adp
                } else {
                    BoundKind::Pdp
                };
                let out = bucket_bound_with_grad(x, y, cfg.buckets, cfg.compositions, cfg.eps, kind, cfg.index_grad)?;
                (out.value, out.grad_x, out.grad_y, 0.0)
            }
            Accountant::Ma => {
                let lambda = lambda_from_sq(lambda_sq);
                let out = ma_bound_with_grad(x, y, cfg.compositions, cfg.eps, lambda)?;
                (out.value, out.grad_x, out.grad_y, out.grad_lambda * 2.0 * lambda_sq)
            }
        };
        let (ga, gb) = if flip { (gy, gx) } else { (gx, gy) };
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, ga, gb, g_lsq));
        }
    }
    let (value, ga, gb, g_lsq) = best.expect("at least one direction");
    Ok((value, cfg.scenario.pullback(&ga, &gb, pmf.len(), step), g_lsq))
}

pub fn total_loss(params: &SigmoidStackParams, cfg: &TrainConfig, epoch: usize) -> Result<LossValue> {
    let tape = forward_tape(params, &cfg.grid);
    let pmf = mirror(&tape.half);
    let points = cfg.grid.points();
    let (lx, mut grad_p, g_lsq) = privacy_term(&pmf, cfg, params.lambda_sq)?;
    let weight = cfg.weight.weight(epoch);
    let utility = utility_of(&points, &pmf, cfg.utility_order);
    if weight != 0.0 {
        for (g, u) in grad_p.iter_mut().zip(utility_grad(&points, &pmf, cfg.utility_order)) {
            *g += weight * u;
        }
    }
    let mut grad = model_backward(params, &cfg.grid, &tape, &grad_p);
    grad.lambda_sq = g_lsq;
    Ok(LossValue {
        parts: LossParts {
            total: lx + weight * utility,
            lx,
            utility,
            weight,
        },
        grad: grad.to_flat(),
    })
}
