//! Evaluation metrics: utility gain from joining, request satisfaction and
//! resource utilization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Allocation, Scenario};
use crate::solver::SolveReport;

/// Percentage of `n`'s native demand that is met, averaged over its
/// applications. Each application scores `sum_k min(x_ik, r_ik) / sum_k r_ik`,
/// where `x_ik` counts supply from every provider.
pub fn satisfaction(s: &Scenario, a: &Allocation, n: usize) -> Result<f64> {
    s.check_provider(n)?;
    a.check_dims(s)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for (i, app) in s.app_range(n).zip(&s.providers[n].native_apps) {
        let demand: f64 = app.request.iter().sum();
        if demand <= 0.0 {
            continue;
        }
        let met: f64 = app.request.iter().enumerate().map(|(k, &r)| a.total_to_app(i, k).min(r)).sum();
        total += met / demand;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::NoApplications(n));
    }
    Ok(100.0 * total / counted as f64)
}

/// Share of each of `n`'s capacities handed out; zero-capacity resources report 0.
pub fn utilization(s: &Scenario, a: &Allocation, n: usize) -> Result<Vec<f64>> {
    s.check_provider(n)?;
    a.check_dims(s)?;
    Ok(s.providers[n]
        .capacity
        .iter()
        .enumerate()
        .map(|(k, &c)| if c > 0.0 { 100.0 * a.total_from_provider(n, k) / c } else { 0.0 })
        .collect())
}

/// Relative gain in percent; `None` when the standalone utility is not positive.
pub fn improvement(utility_alone: f64, utility_coalition: f64) -> Option<f64> {
    (utility_alone > 0.0).then(|| 100.0 * (utility_coalition - utility_alone) / utility_alone)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderMetrics {
    pub provider: usize,
    pub utility_alone: f64,
    pub utility_coalition: f64,
    pub improvement_pct: Option<f64>,
    pub satisfaction_alone_pct: f64,
    pub satisfaction_pct: f64,
    pub utilization_pct: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_provider: Vec<ProviderMetrics>,
}

impl MetricsReport {
    /// Compares each provider's standalone solve with its share of `grand`.
    /// `standalone[n]` must be provider `n`'s singleton report.
    pub fn build(s: &Scenario, standalone: &[SolveReport], grand: &SolveReport) -> Result<Self> {
        if standalone.len() != s.num_providers() {
            return Err(Error::LengthMismatch { left: standalone.len(), right: s.num_providers() });
        }
        let mut per_provider = Vec::with_capacity(s.num_providers());
        for (n, alone) in standalone.iter().enumerate() {
            let utility_alone = alone.objective;
            let utility_coalition = grand.per_provider_payoff[n];
            per_provider.push(ProviderMetrics {
                provider: n,
                utility_alone,
                utility_coalition,
                improvement_pct: improvement(utility_alone, utility_coalition),
                satisfaction_alone_pct: satisfaction(s, &alone.allocation, n)?,
                satisfaction_pct: satisfaction(s, &grand.allocation, n)?,
                utilization_pct: utilization(s, &grand.allocation, n)?,
            });
        }
        Ok(MetricsReport { per_provider })
    }
}
