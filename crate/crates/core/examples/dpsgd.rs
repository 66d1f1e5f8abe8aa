//! Sub-sampled (DP-SGD style) pairs: the reverse direction dominates, and
//! training against both directions produces noise usable for gradients.

use trunc_noise::buckets::{BucketConfig, IndexGrad};
use trunc_noise::learner::{reference_delta, train, Accountant, AdamSettings, TrainConfig, TrainDirection, WeightSchedule};
use trunc_noise::noise::{sample_radial, truncated_gaussian_pmf, GridSpec};
use trunc_noise::worst_case::{subsampled_pair, Scenario};

fn main() -> trunc_noise::Result<()> {
    let grid = GridSpec::new(5.0, 100, 1e-5)?;
    let (q, clip) = (0.1, 1.0);
    for sigma in [0.5, 1.0, 2.0] {
        let pair = subsampled_pair(&truncated_gaussian_pmf(&grid, sigma)?, q, clip)?;
        for n in [1, 8] {
            let (ab, ba) = reference_delta(&pair, n, 0.3, false, 4000)?;
            println!("gaussian σ = {sigma}, n = {n}: δ_ab {ab:.4e}  δ_ba {ba:.4e}");
        }
    }

    let cfg = TrainConfig {
        grid,
        scenario: Scenario::Dpsgd { q, clip },
        accountant: Accountant::Adp,
        utility_order: 2,
        eps: 0.3,
        compositions: 8,
        epochs: 1000,
        learning_rate: 0.01,
        lr_decay: 0.99995,
        weight: WeightSchedule::default(),
        buckets: BucketConfig::new(400, 1.005)?,
        sigmoids: 50,
        slope: 50.0,
        seed: 3,
        direction: TrainDirection::Max,
        index_grad: IndexGrad::Interpolated,
        adam: AdamSettings::default(),
        reference_half_count: 4000,
    };
    let result = train(&cfg)?;
    println!(
        "learned: δ(0.3) after 8 steps {:.4e}, U_L2 {:.4}, {:.1} s",
        result.reference_delta, result.utility, result.wall_clock_secs
    );
    let v = sample_radial(&result.noise, 4, 0)?;
    println!("one 4-d noise vector: {v:?}");
    Ok(())
}
