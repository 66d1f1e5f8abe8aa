//! δ(ε) of a truncated Gaussian under composition from all three
//! accountants, with exact values where the support is small enough.

use trunc_noise::curve::{evaluate, CurveRequest, Resolution};
use trunc_noise::learner::Accountant;
use trunc_noise::moments::LambdaSearch;
use trunc_noise::noise::{truncated_gaussian_pmf, GridSpec};
use trunc_noise::worst_case::sensitivity_pair;

fn main() -> trunc_noise::Result<()> {
    // small enough for the exact oracle
    let small = GridSpec::new(2.0, 8, 1e-5)?;
    let pair = sensitivity_pair(&truncated_gaussian_pmf(&small, 1.0)?, 0.5)?;
    let curve = evaluate(
        &pair,
        &CurveRequest {
            accountants: &[Accountant::Adp, Accountant::Pdp, Accountant::Ma],
            n_list: &[1, 4],
            eps_list: &[0.0, 0.25, 0.5, 1.0],
            resolution: Resolution::Reference { half_count: 4000 },
            lambda_search: LambdaSearch::default(),
            oracle: true,
        },
    )?;
    print!("{}", curve.to_csv());

    let wide = GridSpec::new(50.0, 600, 1e-5)?;
    let pair = sensitivity_pair(&truncated_gaussian_pmf(&wide, 4.0)?, 1.0)?;
    println!("\nσ = 4 on ±50, ε = 0.3:");
    for n in [1, 4, 16, 64] {
        let curve = evaluate(
            &pair,
            &CurveRequest {
                accountants: &[Accountant::Adp, Accountant::Ma],
                n_list: &[n],
                eps_list: &[0.3],
                resolution: Resolution::Reference { half_count: 4000 },
                lambda_search: LambdaSearch::default(),
                oracle: false,
            },
        )?;
        let adp = curve.series(Accountant::Adp, n)[0].delta();
        let ma = curve.series(Accountant::Ma, n)[0].delta();
        println!("  n = {n:>3}: buckets {adp:.4e}  moments {ma:.4e}");
    }
    Ok(())
}
