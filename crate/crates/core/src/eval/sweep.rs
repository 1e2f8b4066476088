use serde::{Deserialize, Serialize};

use super::overlap::overlap;
use crate::detector::{calibrate_top_n, AnomalyEvent, ScoreSeries};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub budget: usize,
    /// Threshold used; `None` when the budget was out of reach.
    pub delta: Option<f64>,
    /// Percentage of reference events covered by the method's events.
    pub overlap: Option<f64>,
    /// Fraction of all scored samples above threshold.
    pub flagged_fraction: f64,
    pub saturated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub method: String,
    pub points: Vec<SweepPoint>,
}

fn flagged_fraction(series: &[ScoreSeries], delta: Option<f64>) -> f64 {
    let total: usize = series.iter().map(|s| s.scores.len()).sum();
    if total == 0 {
        return 0.0;
    }
    let flagged: usize = series
        .iter()
        .map(|s| {
            s.ratios()
                .filter(|&r| match delta {
                    Some(d) => r / d > 1.0,
                    None => r > 0.0,
                })
                .count()
        })
        .sum();
    flagged as f64 / total as f64
}

/// Recalibrates `series` at each budget and compares with `reference`.
pub fn threshold_sweep(
    method: &str,
    series: &[ScoreSeries],
    budgets: &[usize],
    reference: &[AnomalyEvent],
    gap: usize,
) -> Result<SweepResult> {
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract("sweep budgets must be strictly increasing".into()));
    }
    let mut points = Vec::with_capacity(budgets.len());
    for &budget in budgets {
        match calibrate_top_n(series, budget, gap) {
            Ok(cal) => points.push(SweepPoint {
                budget,
                delta: Some(cal.delta),
                overlap: overlap(reference, &cal.events, false),
                flagged_fraction: flagged_fraction(series, Some(cal.delta)),
                saturated: false,
            }),
            Err(Error::Infeasible { .. }) => points.push(SweepPoint {
                budget,
                delta: None,
                overlap: None,
                flagged_fraction: flagged_fraction(series, None),
                saturated: true,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(SweepResult { method: method.to_string(), points })
}

/// `base * m` for `m = 1 ..= max_multiplier`.
pub fn budget_multiples(base: usize, max_multiplier: usize) -> Vec<usize> {
    (1..=max_multiplier).map(|m| base * m).collect()
}
