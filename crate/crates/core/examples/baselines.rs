//! Builds the two analytic baselines on one grid, checks their structure and
//! draws a few samples from each.

use trunc_noise::learner::utility_loss;
use trunc_noise::noise::{check_structure, default_staircase_gamma, sample_noise, staircase_pmf, truncated_gaussian_pmf, GridSpec};
use trunc_noise::worst_case::STRUCTURE_TOL;

fn main() -> trunc_noise::Result<()> {
    let grid = GridSpec::new(5.0, 100, 1e-5)?;
    println!("grid: {} points, step {}, mirror centre {:+e}", grid.len(), grid.step(), grid.mirror_center());

    let gauss = truncated_gaussian_pmf(&grid, 1.5)?;
    let stairs = staircase_pmf(&grid, 0.3, 1.0, None)?;
    println!("staircase γ at ε = 0.3: {:.6}", default_staircase_gamma(0.3));

    for (name, noise) in [("gaussian σ=1.5", &gauss), ("staircase", &stairs)] {
        let s = check_structure(noise, STRUCTURE_TOL);
        let draws = sample_noise(noise, 42, 5);
        println!(
            "{name:>15}: U_L1 {:.4}  U_L2 {:.4}  symmetric {}  monotone {}  samples {:?}",
            utility_loss(noise, 1),
            utility_loss(noise, 2),
            s.is_symmetric,
            s.is_monotone_from_center,
            draws.iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        );
    }
    Ok(())
}
