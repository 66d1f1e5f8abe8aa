//! Differentiable bucket bound.
//!
//! The forward pass is the evaluation path: the same bucketization, the same
//! composition and the same weights, so values agree bit-for-bit. Mass
//! derivatives are exact. Bucket indices are integers, so their derivative
//! with respect to the masses is zero almost everywhere; [`IndexGrad`] picks
//! what to use instead.

use serde::{Deserialize, Serialize};

use super::{
    adp_weights, composition_plan, convolve, convolve_backward, pdp_weights, raw_index, slot_for,
    BucketConfig, BucketedLoss, Slot,
};
use crate::error::{Error, Result};

/// How the index operation `j = ⌈ln(X/Y)/ln f⌉` is differentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexGrad {
    /// True derivative of the piecewise-constant index: zero. Matches finite
    /// differences away from bucket boundaries.
    None,
    /// `⌈u⌉' = 1` and moving one bucket up costs `G(j+1) − G(j)`, where `G` is
    /// the gradient of the bound with respect to each bucket's mass.
    #[default]
    Interpolated,
    /// `⌈u⌉' = 1` with the membership test differentiated by the kernel
    /// `1/(1 + (j − k)²/0.01)`.
    EqualKernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Adp,
    Pdp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketGradOutput {
    pub value: f64,
    /// `∂δ/∂X(o)` for the numerator distribution.
    pub grad_x: Vec<f64>,
    /// `∂δ/∂Y(o)` for the denominator distribution.
    pub grad_y: Vec<f64>,
}

const KERNEL_REACH: i64 = 64;

fn kernel(d: f64) -> f64 {
    1.0 / (1.0 + d * d / 0.01)
}

/// δ after `n` compositions for numerator `x` and denominator `y`, with its
/// gradient with respect to both mass arrays.
#[allow(clippy::too_many_arguments)]
pub fn bucket_bound_with_grad(
    x: &[f64],
    y: &[f64],
    config: BucketConfig,
    n: u32,
    eps: f64,
    kind: BoundKind,
    index_grad: IndexGrad,
) -> Result<BucketGradOutput> {
    if n < 1 {
        return Err(Error::invalid("number of compositions must be at least 1"));
    }
    if x.len() != y.len() {
        return Err(Error::invalid("mass arrays differ in length"));
    }
    let h = config.half_count;
    let ln_f = config.ln_factor();

    // forward: bucketize, remembering where each output went
    let mut finite = vec![0.0; config.width()];
    let mut inf_mass = 0.0;
    let mut routes: Vec<Option<(f64, Slot)>> = Vec::with_capacity(x.len());
    for (&xo, &yo) in x.iter().zip(y) {
        if xo <= 0.0 {
            routes.push(None);
            continue;
        }
        if yo == 0.0 {
            inf_mass += xo;
            routes.push(Some((f64::INFINITY, Slot::Infinite)));
            continue;
        }
        let j = raw_index(xo, yo, ln_f);
        let slot = slot_for(j, h);
        match slot {
            Slot::Infinite => inf_mass += xo,
            Slot::Finite(idx) => finite[idx] += xo,
        }
        routes.push(Some((j, slot)));
    }
    let base = BucketedLoss {
        finite,
        inf_mass,
        config,
        compositions: 1,
    };

    let (steps, out) = composition_plan(n);
    let mut nodes = vec![base];
    for &(l, r) in &steps {
        let node = convolve(&nodes[l], &nodes[r]);
        nodes.push(node);
    }
    let weights = match kind {
        BoundKind::Adp => adp_weights(config, eps),
        BoundKind::Pdp => pdp_weights(config, eps),
    };
    let last = &nodes[out];
    let value = last.inf_mass + last.finite.iter().zip(&weights).map(|(m, w)| m * w).sum::<f64>();

    // backward through the composition tape
    let mut g_fin: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
    let mut g_inf = vec![0.0; nodes.len()];
    g_fin[out] = Some(weights);
    g_inf[out] = 1.0;
    for (k, &(l, r)) in steps.iter().enumerate().rev() {
        let node = k + 1;
        let Some(g) = g_fin[node].take() else { continue };
        let (ga, ga_inf, gb, gb_inf) = convolve_backward(&nodes[l], &nodes[r], &g, g_inf[node]);
        accumulate(&mut g_fin[l], ga);
        g_inf[l] += ga_inf;
        accumulate(&mut g_fin[r], gb);
        g_inf[r] += gb_inf;
    }
    let g0 = g_fin[0].take().unwrap_or_else(|| vec![0.0; config.width()]);
    let g0_inf = g_inf[0];
    // gradient of the bound w.r.t. the mass of bucket j (j = h + 1 is ∞)
    let bucket_grad = |j: i64| -> f64 {
        if j > h as i64 {
            g0_inf
        } else {
            g0[(j.max(-(h as i64)) + h as i64) as usize]
        }
    };

    let mut grad_x = vec![0.0; x.len()];
    let mut grad_y = vec![0.0; y.len()];
    for (o, route) in routes.iter().enumerate() {
        let Some((j, slot)) = *route else { continue };
        grad_x[o] = match slot {
            Slot::Infinite => g0_inf,
            Slot::Finite(idx) => g0[idx],
        };
        if !j.is_finite() {
            continue;
        }
        let j = j as i64;
        // ∂δ/∂u with u = ln(X/Y)/ln f
        let d_u = match index_grad {
            IndexGrad::None => 0.0,
            IndexGrad::Interpolated => {
                if j < -(h as i64) || j > h as i64 {
                    0.0
                } else {
                    bucket_grad(j + 1) - bucket_grad(j)
                }
            }
            IndexGrad::EqualKernel => {
                let lo = (j - KERNEL_REACH).max(-(h as i64));
                let hi = (j + KERNEL_REACH).min(h as i64 + 1);
                (lo..=hi).map(|k| bucket_grad(k) * kernel((j - k) as f64)).sum()
            }
        };
        if d_u != 0.0 {
            let mass_times = x[o] * d_u / ln_f;
            grad_x[o] += mass_times / x[o];
            grad_y[o] -= mass_times / y[o];
        }
    }
    Ok(BucketGradOutput {
        value,
        grad_x,
        grad_y,
    })
}

fn accumulate(slot: &mut Option<Vec<f64>>, g: Vec<f64>) {
    match slot {
        None => *slot = Some(g),
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buckets::{bucketize_masses, compose, delta_adp, delta_pdp};

    fn pair() -> (Vec<f64>, Vec<f64>) {
        let x = vec![0.05, 0.1, 0.2, 0.3, 0.2, 0.15, 0.0];
        let y = vec![0.0, 0.06, 0.12, 0.22, 0.3, 0.2, 0.1];
        (x, y)
    }

    #[test]
    fn value_matches_evaluation_path() {
        let (x, y) = pair();
        let cfg = BucketConfig::new(200, 1.005).unwrap();
        for n in [1, 2, 3, 5] {
            let bl = compose(&bucketize_masses(&x, &y, cfg), n).unwrap();
            for eps in [0.0, 0.1, 0.5] {
                let adp = bucket_bound_with_grad(&x, &y, cfg, n, eps, BoundKind::Adp, IndexGrad::Interpolated)
                    .unwrap();
                assert_eq!(adp.value, delta_adp(&bl, eps));
                let pdp = bucket_bound_with_grad(&x, &y, cfg, n, eps, BoundKind::Pdp, IndexGrad::None).unwrap();
                assert_eq!(pdp.value, delta_pdp(&bl, eps));
            }
        }
    }

    #[test]
    fn exact_mass_gradient_matches_finite_differences() {
        let (x, y) = pair();
        let cfg = BucketConfig::new(200, 1.005).unwrap();
        let n = 3;
        let eps = 0.2;
        for kind in [BoundKind::Adp, BoundKind::Pdp] {
            let out = bucket_bound_with_grad(&x, &y, cfg, n, eps, kind, IndexGrad::None).unwrap();
            let f = |x: &[f64], y: &[f64]| {
                bucket_bound_with_grad(x, y, cfg, n, eps, kind, IndexGrad::None).unwrap().value
            };
            let step = 1e-9;
            for o in 1..6 {
                let mut up = x.clone();
                let mut dn = x.clone();
                up[o] += step;
                dn[o] -= step;
                let fd = (f(&up, &y) - f(&dn, &y)) / (2.0 * step);
                assert!((fd - out.grad_x[o]).abs() < 1e-6, "{kind:?} x[{o}]: {fd} vs {}", out.grad_x[o]);
                let mut up = y.clone();
                let mut dn = y.clone();
                up[o] += step;
                dn[o] -= step;
                let fd = (f(&x, &up) - f(&x, &dn)) / (2.0 * step);
                assert!(fd.abs() < 1e-6 && out.grad_y[o] == 0.0);
            }
        }
    }

    #[test]
    fn interpolated_gradient_tracks_the_loss_slope() {
        // single composition: ∂δ/∂Y(o) of the true adp bound is −e^ε on the
        // outputs whose loss exceeds ε
        let (x, y) = pair();
        let cfg = BucketConfig::new(8000, 1.0001).unwrap();
        let eps = 0.1;
        let out = bucket_bound_with_grad(&x, &y, cfg, 1, eps, BoundKind::Adp, IndexGrad::Interpolated).unwrap();
        for o in 1..6 {
            let above = (x[o] / y[o]).ln() > eps;
            let expected_y = if above { -eps.exp() } else { 0.0 };
            let expected_x = if above { 1.0 } else { 0.0 };
            assert!((out.grad_y[o] - expected_y).abs() < 1e-3, "y[{o}] {}", out.grad_y[o]);
            assert!((out.grad_x[o] - expected_x).abs() < 1e-3, "x[{o}] {}", out.grad_x[o]);
        }
    }

    #[test]
    fn kernel_gradient_is_finite_and_deterministic() {
        let (x, y) = pair();
        let cfg = BucketConfig::new(100, 1.01).unwrap();
        let a = bucket_bound_with_grad(&x, &y, cfg, 2, 0.1, BoundKind::Adp, IndexGrad::EqualKernel).unwrap();
        let b = bucket_bound_with_grad(&x, &y, cfg, 2, 0.1, BoundKind::Adp, IndexGrad::EqualKernel).unwrap();
        assert_eq!(a, b);
        assert!(a.grad_x.iter().chain(&a.grad_y).all(|g| g.is_finite()));
    }

    #[test]
    fn untouched_outputs_get_zero_gradient() {
        let x = vec![0.5, 0.5, 0.0];
        let y = vec![0.0, 0.5, 0.5];
        let cfg = BucketConfig::new(100, 1.01).unwrap();
        let out = bucket_bound_with_grad(&x, &y, cfg, 1, 0.3, BoundKind::Adp, IndexGrad::Interpolated).unwrap();
        assert_eq!(out.value, 0.5);
        assert_eq!(out.grad_x[2], 0.0);
        assert_eq!(out.grad_y[2], 0.0);
        assert_eq!(out.grad_x[0], 1.0);
    }
}
