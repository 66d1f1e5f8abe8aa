//! Analytic reference noise, discretised on the grid and renormalised by the
//! discrete sum so that `Σp = 1` holds on any grid.
//!
//! Both baselines are evaluated at the distance from the grid's mirror centre,
//! which makes them mirror-symmetric bit for bit.

use super::{GridSpec, NoisePmf};
use crate::error::{Error, Result};

/// Unnormalised-then-normalised Gaussian masses at the given distances.
pub fn truncated_gaussian_masses(distances: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let two_var = 2.0 * sigma * sigma;
    let weights: Vec<f64> = distances.iter().map(|d| (-(d * d) / two_var).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

pub fn truncated_gaussian_pmf(grid: &GridSpec, sigma: f64) -> Result<NoisePmf> {
    let half_step = 0.5 * grid.step();
    let distances: Vec<f64> = (0..grid.len())
        .map(|i| grid.half_steps_from_center(i) as f64 * half_step)
        .collect();
    let pmf = truncated_gaussian_masses(&distances, sigma)?;
    Ok(NoisePmf::new(*grid, pmf)?
        .with_meta("generator", "truncated_gaussian")
        .with_meta("sigma", sigma))
}

/// L1-optimal inner step fraction `1 / (1 + e^{ε/2})`.
pub fn default_staircase_gamma(eps: f64) -> f64 {
    1.0 / (1.0 + (eps / 2.0).exp())
}

/// Staircase masses for distances given in half cells (`d = h·ν/2`) with a
/// period of `period_cells` cells. Each period has an inner part of relative
/// width `gamma` at level `e^{-kε}` and an outer part at `e^{-(k+1)ε}`.
pub fn staircase_masses(
    half_steps: &[u64],
    period_cells: u64,
    eps: f64,
    gamma: f64,
) -> Result<Vec<f64>> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if period_cells == 0 {
        return Err(Error::invalid("staircase period must span at least one cell"));
    }
    let period = 2 * period_cells;
    let inner_width = gamma * period as f64;
    let weights: Vec<f64> = half_steps
        .iter()
        .map(|&h| {
            let stair = h / period;
            let within = (h % period) as f64;
            let level = if within < inner_width { stair } else { stair + 1 };
            (-(level as f64) * eps).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Truncated staircase noise for sensitivity `sensitivity`; `gamma = None`
/// selects [`default_staircase_gamma`].
pub fn staircase_pmf(
    grid: &GridSpec,
    eps: f64,
    sensitivity: f64,
    gamma: Option<f64>,
) -> Result<NoisePmf> {
    let cells = grid.cells_for_shift(sensitivity)? as u64;
    let gamma = gamma.unwrap_or_else(|| default_staircase_gamma(eps));
    let half_steps: Vec<u64> = (0..grid.len()).map(|i| grid.half_steps_from_center(i)).collect();
    let pmf = staircase_masses(&half_steps, cells, eps, gamma)?;
    Ok(NoisePmf::new(*grid, pmf)?
        .with_meta("generator", "staircase")
        .with_meta("eps", eps)
        .with_meta("gamma", gamma)
        .with_meta("sensitivity", sensitivity))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_flat_limit() {
        let g = GridSpec::new(1.0, 2, 0.0).unwrap();
        let p = truncated_gaussian_pmf(&g, 1e9).unwrap();
        for m in &p.pmf {
            assert!((m - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn gaussian_three_points() {
        // e^{-1/2} / (1 + 2 e^{-1/2}) and 1 / (1 + 2 e^{-1/2})
        let side = (-0.5f64).exp();
        let total = 1.0 + 2.0 * side;
        let p = truncated_gaussian_masses(&[1.0, 0.0, 1.0], 1.0).unwrap();
        assert!((p[0] - side / total).abs() < 1e-15);
        assert!((p[1] - 1.0 / total).abs() < 1e-15);
        assert!((p[0] - 0.274068).abs() < 1e-6);
        assert!((p[1] - 0.451863).abs() < 1e-6);
    }

    #[test]
    fn gaussian_concentrates_on_central_pair() {
        let g = GridSpec::new(500.0, 30000, 1e-5).unwrap();
        let p = truncated_gaussian_pmf(&g, 1e-3).unwrap();
        let n = g.half_points;
        assert!(p.pmf[n - 1] + p.pmf[n] > 1.0 - 1e-10);
        assert_eq!(p.pmf[n - 1], p.pmf[n]);
    }

    #[test]
    fn gaussian_rejects_bad_sigma() {
        let g = GridSpec::new(1.0, 2, 0.0).unwrap();
        assert!(truncated_gaussian_pmf(&g, 0.0).is_err());
        assert!(truncated_gaussian_pmf(&g, -1.0).is_err());
    }

    #[test]
    fn default_gamma_value() {
        assert!((default_staircase_gamma(0.3) - 0.462_570_154_656_250_4).abs() < 1e-15);
    }

    #[test]
    fn staircase_interior_ratio_bound() {
        let eps = 0.3;
        let g = GridSpec::new(5.0, 100, 0.0).unwrap();
        let p = staircase_pmf(&g, eps, 1.0, None).unwrap();
        let k = g.cells_for_shift(1.0).unwrap();
        let bound = eps.exp() + 1e-12;
        for i in 0..g.len() - k {
            let ratio_fwd = p.pmf[i] / p.pmf[i + k];
            let ratio_bwd = p.pmf[i + k] / p.pmf[i];
            assert!(ratio_fwd <= bound && ratio_bwd <= bound, "i={i}");
        }
    }

    #[test]
    fn staircase_rejects_off_grid_sensitivity() {
        let g = GridSpec::new(5.0, 10, 0.0).unwrap();
        assert!(staircase_pmf(&g, 0.3, 0.3, None).is_err());
        assert!(staircase_pmf(&g, 0.3, 1.0, Some(1.5)).is_err());
    }

    #[test]
    fn baselines_are_bit_symmetric_and_normalized() {
        let g = GridSpec::new(50.0, 3000, 1e-5).unwrap();
        for p in [
            truncated_gaussian_pmf(&g, 7.3).unwrap(),
            staircase_pmf(&g, 0.3, 1.0, None).unwrap(),
        ] {
            let n = p.len();
            for i in 0..n {
                assert_eq!(p.pmf[i].to_bits(), p.pmf[n - 1 - i].to_bits());
            }
            assert!((p.total_mass() - 1.0).abs() < 1e-12);
        }
    }
}
