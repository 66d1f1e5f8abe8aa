//! Verifies a noise file and matches it against both baselines.
//!
//! ```text
//! cargo run --release --example audit -- [noise.json]
//! ```

use trunc_noise::compare::{compare, Baseline, CompareSettings, Matching};
use trunc_noise::curve::Resolution;
use trunc_noise::noise::{staircase_pmf, GridSpec, NoisePmf};
use trunc_noise::verify::verify;
use trunc_noise::worst_case::Scenario;

fn main() -> trunc_noise::Result<()> {
    let noise = match std::env::args().nth(1) {
        Some(path) => NoisePmf::load(path)?,
        None => staircase_pmf(&GridSpec::new(5.0, 100, 1e-5)?, 0.3, 1.0, Some(0.3))?,
    };
    let scenario = Scenario::Sensitivity { s: 1.0 };
    let report = verify(&noise, &scenario, 0.3)?;
    println!("verify: passes {}", report.passes);
    println!("{}", serde_json::to_string_pretty(&report)?);

    let settings = CompareSettings {
        scenario,
        eps: 0.3,
        n: 1,
        utility_order: 1,
        resolution: Resolution::Reference { half_count: 4000 },
        scan_points: 60,
    };
    for baseline in [Baseline::Gaussian, Baseline::Staircase] {
        for matching in [Matching::Delta, Matching::Utility] {
            match compare(&noise, baseline, matching, &settings) {
                Ok(r) => println!(
                    "{baseline:?} by {matching:?}: parameter {:.5}, δ {:.4e} vs {:.4e}, U {:.4} vs {:.4}, KL {:.3e}",
                    r.parameter, r.baseline_delta, r.generated_delta, r.baseline_utility, r.generated_utility, r.kl
                ),
                Err(e) => println!("{baseline:?} by {matching:?}: {e}"),
            }
        }
    }
    Ok(())
}
