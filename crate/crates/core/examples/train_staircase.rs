//! Learns L1-optimal noise for a sensitivity-1 query at ε = 0.3 and compares
//! it with the truncated staircase mechanism on the same grid.
//!
//! ```text
//! cargo run --release --example train_staircase -- [epochs] [half_count] [factor] [halving]
//! ```

use trunc_noise::buckets::{BucketConfig, IndexGrad};
use trunc_noise::learner::{reference_delta, train, Accountant, AdamSettings, TrainConfig, TrainDirection, WeightSchedule};
use trunc_noise::noise::{staircase_pmf, GridSpec};
use trunc_noise::worst_case::Scenario;

fn main() -> trunc_noise::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs = args.first().map_or(5000, |a| a.parse().expect("epochs"));
    let half_count = args.get(1).map_or(250, |a| a.parse().expect("half_count"));
    let factor = args.get(2).map_or(1.0001, |a| a.parse().expect("factor"));
    let halving = args.get(3).map_or(2500.0, |a| a.parse().expect("halving"));

    let grid = GridSpec::new(5.0, 1000, 1e-5)?;
    let cfg = TrainConfig {
        grid,
        scenario: Scenario::Sensitivity { s: 1.0 },
        accountant: Accountant::Adp,
        utility_order: 1,
        eps: 0.3,
        compositions: 1,
        epochs,
        learning_rate: 0.01,
        lr_decay: 0.99995,
        weight: WeightSchedule {
            halving_period: halving,
            ..WeightSchedule::default()
        },
        buckets: BucketConfig::new(half_count, factor)?,
        sigmoids: 500,
        slope: 500.0,
        seed: 1,
        direction: TrainDirection::Ab,
        index_grad: IndexGrad::Interpolated,
        adam: AdamSettings::default(),
        reference_half_count: 12_500,
    };
    let result = train(&cfg)?;
    for r in result.trace.iter().step_by((epochs / 10).max(1)) {
        println!(
            "epoch {:>6}  loss {:.6}  lx {:.6}  utility {:.4}  w {:.3e}",
            r.epoch, r.total, r.lx, r.utility, r.w_t
        );
    }

    let stairs = staircase_pmf(&grid, 0.3, 1.0, None)?;
    let pair = cfg.scenario.pair(&stairs)?;
    let (ab, ba) = reference_delta(&pair, 1, 0.3, false, 12_500)?;
    let stairs_delta = ab.max(ba);
    let stairs_utility = trunc_noise::learner::utility_loss(&stairs, 1);
    println!("learned:   δ(0.3) = {:.6}  U_L1 = {:.4}", result.reference_delta, result.utility);
    println!("staircase: δ(0.3) = {:.6}  U_L1 = {:.4}", stairs_delta, stairs_utility);
    println!(
        "relative δ gap {:.3}  ({:.1} s, collapsed: {})",
        (result.reference_delta - stairs_delta).abs() / stairs_delta,
        result.wall_clock_secs,
        result.collapsed
    );
    Ok(())
}
