//! Trains L2-optimal noise under n-fold composition and measures how close
//! it is to the truncated Gaussian with the same δ(ε).
//!
//! ```text
//! cargo run --release --example gaussian_shape -- [n] [epochs] [w_start] [lr]
//! ```

use trunc_noise::buckets::{BucketConfig, IndexGrad};
use trunc_noise::compare::{compare, kl_divergence_log, Baseline, CompareSettings, Matching};
use trunc_noise::curve::Resolution;
use trunc_noise::learner::{model_log_pmf, train, Accountant, AdamSettings, TrainConfig, TrainDirection, WeightSchedule};
use trunc_noise::noise::{truncated_gaussian_pmf, GridSpec};
use trunc_noise::worst_case::Scenario;

fn main() -> trunc_noise::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: u32 = args.first().map_or(8, |a| a.parse().expect("n"));
    let epochs = args.get(1).map_or(15_000, |a| a.parse().expect("epochs"));
    let w_start: f64 = args.get(2).map_or(0.5, |a| a.parse().expect("w_start"));
    let lr: f64 = args.get(3).map_or(0.001, |a| a.parse().expect("lr"));

    let grid = GridSpec::new(50.0, 3000, 1e-5)?;
    let scenario = Scenario::Sensitivity { s: 1.0 };
    let cfg = TrainConfig {
        grid,
        scenario,
        accountant: Accountant::Adp,
        utility_order: 2,
        eps: 0.3,
        compositions: n,
        epochs,
        learning_rate: lr,
        lr_decay: 0.99995,
        weight: WeightSchedule {
            start: w_start,
            ..WeightSchedule::default()
        },
        buckets: BucketConfig::new(750, 0.002f64.exp())?,
        sigmoids: 1000,
        slope: 500.0,
        seed: 7,
        direction: TrainDirection::Ab,
        index_grad: IndexGrad::Interpolated,
        adam: AdamSettings::default(),
        reference_half_count: 4000,
    };
    let result = train(&cfg)?;
    for r in result.trace.iter().step_by((epochs / 10).max(1)) {
        println!(
            "epoch {:>6}  lx {:.6}  utility {:.4}  w {:.3e}",
            r.epoch, r.lx, r.utility, r.w_t
        );
    }
    println!(
        "n = {n}: δ(0.3) = {:.6}, U_L2 = {:.4}, {:.1} s",
        result.reference_delta, result.utility, result.wall_clock_secs
    );
    let settings = CompareSettings {
        scenario,
        eps: 0.3,
        n,
        utility_order: 2,
        resolution: Resolution::Reference { half_count: 2000 },
        scan_points: 40,
    };
    let report = compare(&result.noise, Baseline::Gaussian, Matching::Delta, &settings)?;
    let gauss = truncated_gaussian_pmf(&grid, report.parameter)?;
    let kl = kl_divergence_log(&gauss.pmf, &model_log_pmf(&result.params, &grid));
    println!(
        "matched σ = {:.4}  δ_gauss = {:.6}  U_gauss = {:.4}  KL(gauss‖learned) = {:.3e}",
        report.parameter, report.baseline_delta, report.baseline_utility, kl
    );
    Ok(())
}
