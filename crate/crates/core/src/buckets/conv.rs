//! Pairwise bucket convolution and its adjoint.

use super::BucketedLoss;

fn nonzero_range(v: &[f64]) -> Option<(usize, usize)> {
    let lo = v.iter().position(|&m| m != 0.0)?;
    let hi = v.iter().rposition(|&m| m != 0.0)?;
    Some((lo, hi))
}

/// Full linear convolution of two finite arrays of equal width `w`;
/// entry `t` holds the mass of stored-index sum `t` (length `2w − 1`).
fn linear(a: &[f64], b: &[f64]) -> Vec<f64> {
    let w = a.len();
    let mut out = vec![0.0; 2 * w - 1];
    let (Some((alo, ahi)), Some((blo, bhi))) = (nonzero_range(a), nonzero_range(b)) else {
        return out;
    };
    let bs = &b[blo..=bhi];
    for (i, &ai) in a.iter().enumerate().take(ahi + 1).skip(alo) {
        if ai == 0.0 {
            continue;
        }
        let dst = &mut out[i + blo..i + blo + bs.len()];
        for (d, &bj) in dst.iter_mut().zip(bs) {
            *d += ai * bj;
        }
    }
    out
}

/// One composition step. Index sums above `h` join the infinity bucket,
/// sums at or below `−h` collect in bucket `−h`.
pub fn convolve(a: &BucketedLoss, b: &BucketedLoss) -> BucketedLoss {
    assert_eq!(a.config, b.config, "bucket configurations differ");
    let h = a.config.half_count;
    let w = a.config.width();
    let full = linear(&a.finite, &b.finite);
    // stored index t = (j1 + h) + (j2 + h), so sum j = t − 2h
    let mut finite = vec![0.0; w];
    finite[0] = full[..=h].iter().sum();
    finite[1..].copy_from_slice(&full[h + 1..=3 * h]);
    let overflow: f64 = full[3 * h + 1..].iter().sum();
    let inf_mass = a.inf_mass + b.inf_mass - a.inf_mass * b.inf_mass + overflow;
    BucketedLoss {
        finite,
        inf_mass,
        config: a.config,
        compositions: a.compositions + b.compositions,
    }
}

/// Gradients of a scalar through [`convolve`]: given `∂L/∂out`
/// (`g_finite`, `g_inf`), returns `(∂L/∂a.finite, ∂L/∂a.inf, ∂L/∂b.finite, ∂L/∂b.inf)`.
pub fn convolve_backward(
    a: &BucketedLoss,
    b: &BucketedLoss,
    g_finite: &[f64],
    g_inf: f64,
) -> (Vec<f64>, f64, Vec<f64>, f64) {
    let h = a.config.half_count;
    let w = a.config.width();
    // gradient seen by each stored-index sum t
    let mut g_sum = vec![0.0; 2 * w - 1];
    g_sum[..=h].fill(g_finite[0]);
    g_sum[h + 1..=3 * h].copy_from_slice(&g_finite[1..]);
    g_sum[3 * h + 1..].fill(g_inf);
    let ga = correlate(&b.finite, &g_sum);
    let gb = correlate(&a.finite, &g_sum);
    (ga, g_inf * (1.0 - b.inf_mass), gb, g_inf * (1.0 - a.inf_mass))
}

/// `out[i] = Σ_j v[j]·g[i + j]`.
fn correlate(v: &[f64], g: &[f64]) -> Vec<f64> {
    let w = v.len();
    let Some((lo, hi)) = nonzero_range(v) else {
        return vec![0.0; w];
    };
    let vs = &v[lo..=hi];
    (0..w)
        .map(|i| {
            g[i + lo..i + lo + vs.len()]
                .iter()
                .zip(vs)
                .map(|(gi, vi)| gi * vi)
                .sum()
        })
        .collect()
}
