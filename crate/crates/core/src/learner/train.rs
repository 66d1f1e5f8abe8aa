use std::time::Instant;

use serde::Serialize;

use super::adam::Adam;
use super::loss::{total_loss, utility_loss};
use super::model::model_forward;
use super::{Accountant, SigmoidStackParams, TrainConfig};
use crate::buckets::{bucketize, compose, delta_adp, delta_pdp, BucketConfig};
use crate::error::{Error, Result};
use crate::noise::NoisePmf;
use crate::worst_case::{Direction, WorstCasePair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total: f64,
    pub lx: f64,
    pub utility: f64,
    pub w_t: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainResult {
    pub noise: NoisePmf,
    pub params: SigmoidStackParams,
    pub trace: Vec<EpochRecord>,
    /// Trained λ_sq; only meaningful for the moments accountant.
    pub lambda_sq: Option<f64>,
    /// δ(ε) after `n` compositions at reference resolution, max over both
    /// directions (ADP for `adp`/`ma`, PDP for `pdp`).
    pub reference_delta: f64,
    pub utility: f64,
    pub collapsed: bool,
    pub seed: u64,
    pub wall_clock_secs: f64,
}

impl TrainResult {
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("epoch,total,lx,utility,w_t,lr\n");
        for r in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch,
                crate::io::fmt_full(r.total),
                crate::io::fmt_full(r.lx),
                crate::io::fmt_full(r.utility),
                crate::io::fmt_full(r.w_t),
                crate::io::fmt_full(r.lr)
            ));
        }
        out
    }
}

/// δ after `n` compositions in both directions at reference resolution,
/// `(δ_ab, δ_ba)`.
pub fn reference_delta(
    pair: &WorstCasePair,
    n: u32,
    eps: f64,
    pdp: bool,
    half_count: usize,
) -> Result<(f64, f64)> {
    let config = BucketConfig::reference_for(pair, half_count, n)?;
    let eval = |d: Direction| -> Result<f64> {
        let bl = compose(&bucketize(pair, d, config), n)?;
        Ok(if pdp { delta_pdp(&bl, eps) } else { delta_adp(&bl, eps) })
    };
    Ok((eval(Direction::AB)?, eval(Direction::BA)?))
}

pub fn train(cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    let started = Instant::now();
    let mut params = SigmoidStackParams::init(cfg.sigmoids, cfg.slope, cfg.grid.half_width, cfg.seed)?;
    let mut flat = params.to_flat();
    let mut adam = Adam::new(cfg.adam, flat.len());
    let train_lambda = cfg.accountant == Accountant::Ma;
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut lr = cfg.learning_rate;
    for epoch in 0..cfg.epochs {
        let loss = total_loss(&params, cfg, epoch)?;
        if !loss.parts.total.is_finite() || loss.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                snapshot: Box::new(params),
            });
        }
        trace.push(EpochRecord {
            epoch,
            total: loss.parts.total,
            lx: loss.parts.lx,
            utility: loss.parts.utility,
            w_t: loss.parts.weight,
            lr,
        });
        let mut grad = loss.grad;
        if !train_lambda {
            *grad.last_mut().expect("λ_sq slot") = 0.0;
        }
        adam.step(&mut flat, &grad, lr);
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                last_finite: Box::new(params),
            });
        }
        params.set_flat(&flat);
        lr *= cfg.lr_decay;
    }

    let noise = model_forward(&params, &cfg.grid);
    let pair = cfg.scenario.pair(&noise)?;
    let (ab, ba) = reference_delta(
        &pair,
        cfg.compositions,
        cfg.eps,
        cfg.accountant == Accountant::Pdp,
        cfg.reference_half_count,
    )?;
    let reference_delta = ab.max(ba);
    let utility = utility_loss(&noise, cfg.utility_order);
    let collapsed = reference_delta > 0.99 && utility < cfg.grid.step();
    let noise = noise
        .with_meta("generator", "sigmoid-stack")
        .with_meta("accountant", cfg.accountant.name())
        .with_meta("eps", cfg.eps)
        .with_meta("compositions", cfg.compositions)
        .with_meta("epochs", cfg.epochs)
        .with_meta("seed", cfg.seed)
        .with_meta("adam", format!("beta1={} beta2={} epsilon={}", cfg.adam.beta1, cfg.adam.beta2, cfg.adam.epsilon));
    Ok(TrainResult {
        noise,
        lambda_sq: train_lambda.then_some(params.lambda_sq),
        params,
        trace,
        reference_delta,
        utility,
        collapsed,
        seed: cfg.seed,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}
