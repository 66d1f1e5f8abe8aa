//! δ(ε) curves for every accountant, in both directions.

use serde::{Deserialize, Serialize};

use crate::buckets::{bucket_deltas, BucketConfig};
use crate::error::Result;
use crate::io::fmt_full;
use crate::learner::Accountant;
use crate::moments::{delta_ma, LambdaSearch};
use crate::oracle::{exact_composed_delta, DEFAULT_TERM_BUDGET};
use crate::worst_case::{Direction, WorstCasePair};

/// Largest support and composition count for which exact columns are added.
pub const ORACLE_MAX_SUPPORT: usize = 20;
pub const ORACLE_MAX_COMPOSITIONS: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub accountant: Accountant,
    pub n: u32,
    pub eps: f64,
    pub delta_ab: f64,
    pub delta_ba: f64,
    /// `(exact_ab, exact_ba)` when the oracle was run.
    pub exact: Option<(f64, f64)>,
}

impl CurveRow {
    pub fn delta(&self) -> f64 {
        self.delta_ab.max(self.delta_ba)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DeltaCurve {
    pub rows: Vec<CurveRow>,
}

impl DeltaCurve {
    pub fn to_csv(&self) -> String {
        let with_exact = self.rows.iter().any(|r| r.exact.is_some());
        let mut out = String::from("accountant,n,eps,delta_ab,delta_ba,delta");
        if with_exact {
            out.push_str(",exact_ab,exact_ba,exact");
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}",
                r.accountant.name(),
                r.n,
                fmt_full(r.eps),
                fmt_full(r.delta_ab),
                fmt_full(r.delta_ba),
                fmt_full(r.delta())
            ));
            if with_exact {
                match r.exact {
                    Some((a, b)) => {
                        out.push_str(&format!(",{},{},{}", fmt_full(a), fmt_full(b), fmt_full(a.max(b))))
                    }
                    None => out.push_str(",,,"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Rows of one accountant and composition count, in ε order.
    pub fn series(&self, accountant: Accountant, n: u32) -> Vec<&CurveRow> {
        self.rows
            .iter()
            .filter(|r| r.accountant == accountant && r.n == n)
            .collect()
    }
}

/// Bucket resolution used for a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Resolution {
    /// `h` buckets per side with a factor covering 1.5× the largest loss.
    Reference { half_count: usize },
    Fixed { config: BucketConfig },
}

impl Resolution {
    /// Configuration for `pair` composed `n` times.
    pub fn config_for(&self, pair: &WorstCasePair, n: u32) -> Result<BucketConfig> {
        match *self {
            Resolution::Reference { half_count } => BucketConfig::reference_for(pair, half_count, n),
            Resolution::Fixed { config } => {
                config.validate()?;
                Ok(config)
            }
        }
    }
}

/// Bucket ADP and PDP curves after `n` compositions.
pub fn delta_curve(pair: &WorstCasePair, n: u32, eps_list: &[f64], config: BucketConfig) -> Result<DeltaCurve> {
    let mut rows = Vec::new();
    for (eps, adp, pdp) in bucket_deltas(pair, n, eps_list, config)? {
        rows.push(row(Accountant::Adp, n, eps, adp));
        rows.push(row(Accountant::Pdp, n, eps, pdp));
    }
    rows.sort_by_key(|r| r.accountant == Accountant::Pdp);
    Ok(DeltaCurve { rows })
}

fn row(accountant: Accountant, n: u32, eps: f64, d: [f64; 2]) -> CurveRow {
    CurveRow {
        accountant,
        n,
        eps,
        delta_ab: d[0],
        delta_ba: d[1],
        exact: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRequest<'a> {
    pub accountants: &'a [Accountant],
    pub n_list: &'a [u32],
    pub eps_list: &'a [f64],
    pub resolution: Resolution,
    pub lambda_search: LambdaSearch,
    /// Add exact columns where the oracle is affordable.
    pub oracle: bool,
}

pub fn evaluate(pair: &WorstCasePair, req: &CurveRequest) -> Result<DeltaCurve> {
    let mut rows = Vec::new();
    let wants = |a: Accountant| req.accountants.contains(&a);
    let buckets = wants(Accountant::Adp) || wants(Accountant::Pdp);
    let oracle_ok = req.oracle && pair.len() <= ORACLE_MAX_SUPPORT;
    for &n in req.n_list {
        let exact = |eps: f64, pdp: bool| -> Result<Option<(f64, f64)>> {
            if !oracle_ok || n > ORACLE_MAX_COMPOSITIONS {
                return Ok(None);
            }
            let one = |d| {
                exact_composed_delta(pair, d, n, eps, DEFAULT_TERM_BUDGET)
                    .map(|(adp, pdp_v)| if pdp { pdp_v } else { adp })
            };
            Ok(Some((one(Direction::AB)?, one(Direction::BA)?)))
        };
        if buckets {
            let config = req.resolution.config_for(pair, n)?;
            let deltas = bucket_deltas(pair, n, req.eps_list, config)?;
            for (acc, pdp) in [(Accountant::Adp, false), (Accountant::Pdp, true)] {
                if !wants(acc) {
                    continue;
                }
                for &(eps, adp_d, pdp_d) in &deltas {
                    let mut r = row(acc, n, eps, if pdp { pdp_d } else { adp_d });
                    r.exact = exact(eps, pdp)?;
                    rows.push(r);
                }
            }
        }
        if wants(Accountant::Ma) {
            for &eps in req.eps_list {
                let d = delta_ma(pair, n, eps, &req.lambda_search)?;
                let mut r = row(Accountant::Ma, n, eps, [d.delta_ab, d.delta_ba]);
                r.exact = exact(eps, false)?;
                rows.push(r);
            }
        }
    }
    Ok(DeltaCurve { rows })
}
