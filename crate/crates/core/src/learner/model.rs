//! Stacked-sigmoid noise model.
//!
//! Left-half logits `r_i = ln(A² + Σ_j B_j²·σ(C·(x_i − F_j)))`, masses
//! `p = ½·softmax(r)` on the left half, mirrored onto the right half.
//!
//! `σ` saturates to exactly 0 or 1 beyond `|z| > 40` (where the logistic
//! function already rounds to 1 in `f64`). With the sigmoids sorted by centre,
//! every point then sees a prefix of saturated sigmoids, a short window of
//! active ones and a tail of zeros. The sum is always accumulated in centre
//! order, so it is the same floating-point sum as the naive one and stays
//! exactly nondecreasing in `x`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{GridSpec, NoisePmf};

const SATURATION: f64 = 40.0;

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z > SATURATION {
        1.0
    } else if z < -SATURATION {
        0.0
    } else {
        1.0 / (1.0 + (-z).exp())
    }
}

/// Parameters of the stacked-sigmoid model. `amplitudes` and `centers` have
/// `K + 1` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmoidStackParams {
    pub base: f64,
    pub amplitudes: Vec<f64>,
    pub centers: Vec<f64>,
    pub slope: f64,
    /// Square root (shifted) of the moments-accountant order; trained only
    /// with that accountant.
    #[serde(default = "default_lambda_sq")]
    pub lambda_sq: f64,
}

fn default_lambda_sq() -> f64 {
    1.0
}

impl SigmoidStackParams {
    /// `A = 10`, `B_j ~ U[0, 1]`, `F_j` equidistant on `[−r, 0]`.
    pub fn init(k: usize, slope: f64, half_width: f64, seed: u64) -> Result<Self> {
        if k < 1 {
            return Err(Error::invalid("the model needs at least one sigmoid (K ≥ 1)"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amplitudes = (0..=k).map(|_| rng.random::<f64>()).collect();
        let centers = (0..=k)
            .map(|j| -half_width + half_width * j as f64 / k as f64)
            .collect();
        let params = SigmoidStackParams {
            base: 10.0,
            amplitudes,
            centers,
            slope,
            lambda_sq: default_lambda_sq(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn k(&self) -> usize {
        self.amplitudes.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplitudes.len() < 2 || self.amplitudes.len() != self.centers.len() {
            return Err(Error::invalid(format!(
                "need K + 1 ≥ 2 amplitudes and as many centres, got {} and {}",
                self.amplitudes.len(),
                self.centers.len()
            )));
        }
        if !(self.slope.is_finite() && self.slope > 0.0) {
            return Err(Error::invalid(format!("slope must be positive, got {}", self.slope)));
        }
        if !self.is_finite() {
            return Err(Error::invalid("parameters must be finite"));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.base.is_finite()
            && self.lambda_sq.is_finite()
            && self.amplitudes.iter().chain(&self.centers).all(|v| v.is_finite())
    }

    /// Trainable values in a fixed order: `A, B_0..B_K, F_0..F_K, λ_sq`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.amplitudes.len() + 2);
        v.push(self.base);
        v.extend_from_slice(&self.amplitudes);
        v.extend_from_slice(&self.centers);
        v.push(self.lambda_sq);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        let m = self.amplitudes.len();
        assert_eq!(v.len(), 2 * m + 2);
        self.base = v[0];
        self.amplitudes.copy_from_slice(&v[1..=m]);
        self.centers.copy_from_slice(&v[m + 1..=2 * m]);
        self.lambda_sq = v[2 * m + 1];
    }
}

/// Gradient with the same layout as [`SigmoidStackParams::to_flat`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad {
    pub base: f64,
    pub amplitudes: Vec<f64>,
    pub centers: Vec<f64>,
    pub lambda_sq: f64,
}

impl ParamGrad {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.amplitudes.len() + 2);
        v.push(self.base);
        v.extend_from_slice(&self.amplitudes);
        v.extend_from_slice(&self.centers);
        v.push(self.lambda_sq);
        v
    }
}

/// Forward state kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ModelTape {
    /// Sigmoid indices sorted by centre.
    order: Vec<usize>,
    /// Per left-half point: `[lo, hi)` window into `order`; `order[..lo]` are
    /// saturated at 1, `order[hi..]` at 0.
    windows: Vec<(usize, usize)>,
    total: f64,
    /// Left-half masses.
    pub half: Vec<f64>,
}

pub fn model_forward(params: &SigmoidStackParams, grid: &GridSpec) -> NoisePmf {
    let tape = forward_tape(params, grid);
    NoisePmf {
        grid: *grid,
        pmf: mirror(&tape.half),
        meta: Default::default(),
    }
}

/// Natural log of the model masses on the full grid. Tail masses that
/// underflow to 0 in [`model_forward`] (tiny `A²` and no active sigmoid) keep
/// their finite log here.
pub fn model_log_pmf(params: &SigmoidStackParams, grid: &GridSpec) -> Vec<f64> {
    let tape = forward_tape(params, grid);
    let c = params.slope;
    let log_norm = (2.0 * tape.total).ln();
    let half: Vec<f64> = tape
        .half
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if p >= f64::MIN_POSITIVE {
                return p.ln();
            }
            let x = grid.point(i);
            let hi = tape.windows[i].1;
            let mut terms = vec![2.0 * params.base.abs().ln()];
            for &j in &tape.order[..hi] {
                let z = c * (x - params.centers[j]);
                let log_sig = if z > SATURATION { 0.0 } else { -(-z).exp().ln_1p() };
                terms.push(2.0 * params.amplitudes[j].abs().ln() + log_sig);
            }
            let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return m;
            }
            m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln() - log_norm
        })
        .collect();
    mirror(&half)
}

pub(crate) fn mirror(half: &[f64]) -> Vec<f64> {
    let mut full = half.to_vec();
    full.extend(half.iter().rev());
    full
}

pub fn forward_tape(params: &SigmoidStackParams, grid: &GridSpec) -> ModelTape {
    let c = params.slope;
    let mut order: Vec<usize> = (0..params.centers.len()).collect();
    order.sort_by(|&i, &j| params.centers[i].total_cmp(&params.centers[j]));
    let sorted_f: Vec<f64> = order.iter().map(|&j| params.centers[j]).collect();
    let sq: Vec<f64> = order.iter().map(|&j| params.amplitudes[j] * params.amplitudes[j]).collect();
    let base = params.base * params.base;
    // running[k] = A² + Σ_{m<k} B²_(m), accumulated in the fixed order
    let mut running = Vec::with_capacity(sq.len() + 1);
    let mut acc = base;
    running.push(acc);
    for s in &sq {
        acc += s;
        running.push(acc);
    }

    let n = grid.half_points;
    let mut windows = Vec::with_capacity(n);
    let mut sums = Vec::with_capacity(n);
    for i in 0..n {
        let x = grid.point(i);
        let lo = sorted_f.partition_point(|&f| c * (x - f) > SATURATION);
        let hi = sorted_f.partition_point(|&f| c * (x - f) >= -SATURATION);
        let mut s = running[lo];
        for k in lo..hi {
            s += sq[k] * sigmoid(c * (x - sorted_f[k]));
        }
        windows.push((lo, hi));
        sums.push(s);
    }
    let total: f64 = sums.iter().sum();
    let half = sums.iter().map(|s| s / (2.0 * total)).collect();
    ModelTape {
        order,
        windows,
        total,
        half,
    }
}

/// Pulls `∂L/∂p` (full grid) back to the parameters. `λ_sq` is left at zero.
pub fn model_backward(
    params: &SigmoidStackParams,
    grid: &GridSpec,
    tape: &ModelTape,
    grad_pmf: &[f64],
) -> ParamGrad {
    let n = grid.half_points;
    let c = params.slope;
    let g_half: Vec<f64> = (0..n).map(|i| grad_pmf[i] + grad_pmf[2 * n - 1 - i]).collect();
    let mean: f64 = g_half.iter().zip(&tape.half).map(|(g, p)| g * p).sum();
    let g_sum: Vec<f64> = g_half
        .iter()
        .map(|g| g / (2.0 * tape.total) - mean / tape.total)
        .collect();

    let m = params.centers.len();
    // per sorted sigmoid: Σ_i g_S[i]·σ_i and Σ_i g_S[i]·σ_i(1 − σ_i)
    let mut sat_diff = vec![0.0; m + 1];
    let mut act = vec![0.0; m];
    let mut slope_term = vec![0.0; m];
    for i in 0..n {
        let (lo, hi) = tape.windows[i];
        let g = g_sum[i];
        sat_diff[0] += g;
        sat_diff[lo] -= g;
        let x = grid.point(i);
        for k in lo..hi {
            let s = sigmoid(c * (x - params.centers[tape.order[k]]));
            act[k] += g * s;
            slope_term[k] += g * s * (1.0 - s);
        }
    }
    let mut amplitudes = vec![0.0; m];
    let mut centers = vec![0.0; m];
    let mut saturated = 0.0;
    for k in 0..m {
        saturated += sat_diff[k];
        let j = tape.order[k];
        let b = params.amplitudes[j];
        amplitudes[j] = 2.0 * b * (saturated + act[k]);
        centers[j] = -c * b * b * slope_term[k];
    }
    ParamGrad {
        base: 2.0 * params.base * g_sum.iter().sum::<f64>(),
        amplitudes,
        centers,
        lambda_sq: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_half(params: &SigmoidStackParams, grid: &GridSpec) -> Vec<f64> {
        let s: Vec<f64> = (0..grid.half_points)
            .map(|i| {
                let x = grid.point(i);
                params.base.powi(2)
                    + params
                        .amplitudes
                        .iter()
                        .zip(&params.centers)
                        .map(|(b, f)| b * b * sigmoid(params.slope * (x - f)))
                        .sum::<f64>()
            })
            .collect();
        let t: f64 = s.iter().sum();
        s.iter().map(|v| v / (2.0 * t)).collect()
    }

    #[test]
    fn flat_model_is_uniform() {
        let grid = GridSpec::new(5.0, 10, 0.0).unwrap();
        let params = SigmoidStackParams {
            base: 1.0,
            amplitudes: vec![0.0, 0.0],
            centers: vec![-5.0, 0.0],
            slope: 500.0,
            lambda_sq: 1.0,
        };
        let noise = model_forward(&params, &grid);
        assert!(noise.pmf.iter().all(|&p| p == 1.0 / 20.0));
    }

    #[test]
    fn windowed_forward_matches_naive_sum() {
        let grid = GridSpec::new(5.0, 200, 1e-5).unwrap();
        let params = SigmoidStackParams::init(40, 50.0, 5.0, 3).unwrap();
        let tape = forward_tape(&params, &grid);
        let naive = naive_half(&params, &grid);
        for (a, b) in tape.half.iter().zip(&naive) {
            assert!((a - b).abs() <= 1e-15 * b.abs());
        }
    }

    #[test]
    fn output_is_symmetric_monotone_and_normalized() {
        let grid = GridSpec::new(5.0, 200, 1e-5).unwrap();
        let mut params = SigmoidStackParams::init(30, 500.0, 5.0, 9).unwrap();
        params.centers.reverse();
        let noise = model_forward(&params, &grid);
        let n = noise.len();
        for i in 0..n / 2 {
            assert_eq!(noise.pmf[i], noise.pmf[n - 1 - i]);
            if i > 0 {
                assert!(noise.pmf[i - 1] <= noise.pmf[i]);
            }
        }
        assert!((noise.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn init_contract() {
        let p = SigmoidStackParams::init(4, 500.0, 2.0, 1).unwrap();
        assert_eq!(p.base, 10.0);
        assert_eq!(p.centers, vec![-2.0, -1.5, -1.0, -0.5, 0.0]);
        assert!(p.amplitudes.iter().all(|b| (0.0..1.0).contains(b)));
        assert_eq!(p, SigmoidStackParams::init(4, 500.0, 2.0, 1).unwrap());
        assert!(SigmoidStackParams::init(0, 500.0, 2.0, 1).is_err());
        assert!(SigmoidStackParams::init(3, 0.0, 2.0, 1).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let p = SigmoidStackParams::init(3, 10.0, 2.0, 1).unwrap();
        let mut q = p.clone();
        q.set_flat(&p.to_flat());
        assert_eq!(p, q);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let grid = GridSpec::new(2.0, 20, 1e-5).unwrap();
        let params = SigmoidStackParams::init(5, 3.0, 2.0, 4).unwrap();
        // arbitrary linear functional of the pmf
        let weights: Vec<f64> = (0..grid.len()).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let f = |p: &SigmoidStackParams| -> f64 {
            model_forward(p, &grid).pmf.iter().zip(&weights).map(|(a, b)| a * b).sum()
        };
        let tape = forward_tape(&params, &grid);
        let g = model_backward(&params, &grid, &tape, &weights).to_flat();
        let flat = params.to_flat();
        let h = 1e-6;
        for k in 0..flat.len() - 1 {
            let mut up = params.clone();
            let mut v = flat.clone();
            v[k] += h;
            up.set_flat(&v);
            let mut dn = params.clone();
            v[k] -= 2.0 * h;
            dn.set_flat(&v);
            let fd = (f(&up) - f(&dn)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7 * fd.abs().max(1e-3), "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn log_pmf_survives_underflow() {
        let grid = GridSpec::new(2.0, 20, 1e-5).unwrap();
        let mut params = SigmoidStackParams::init(5, 50.0, 2.0, 4).unwrap();
        for (j, f) in params.centers.iter_mut().enumerate() {
            *f = -0.5 + 0.1 * j as f64;
        }
        let logs = model_log_pmf(&params, &grid);
        let pmf = model_forward(&params, &grid).pmf;
        for (l, p) in logs.iter().zip(&pmf) {
            assert!((l - p.ln()).abs() < 1e-12);
        }
        params.base = 1e-200;
        let logs = model_log_pmf(&params, &grid);
        let pmf = model_forward(&params, &grid).pmf;
        assert_eq!(pmf[0], 0.0);
        assert!(logs[0].is_finite() && logs[0] < -900.0);
        assert_eq!(logs[0], logs[grid.len() - 1]);
        for (l, p) in logs.iter().zip(&pmf) {
            if *p >= f64::MIN_POSITIVE {
                assert_eq!(*l, p.ln());
            }
        }
    }
}
