//! Utility families and the per-provider objective assembled from them.
//!
//! A provider `n` inside coalition `S` is scored as
//!
//! ```text
//! w_n * u_n  +  zeta_n * sum_{j in S, j != n} u_j^n  +  sum_{i in M_n, k} (sum_{l in S} x[l][i][k]) / r[i][k]
//! ```
//!
//! where `u_n` scores `n`'s own pool given to its native applications and
//! `u_j^n` scores `n`'s pool given to `j`'s applications with `n`'s utility
//! family. Zero-request pairs are left out of the fill-ratio sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Allocation, Coalition, Scenario};

/// Exponent clamp for the logistic term.
const EXP_CLAMP: f64 = 500.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityFamily {
    Sigmoidal,
    Linear,
}

impl std::str::FromStr for UtilityFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoidal" | "sigmoid" => Ok(UtilityFamily::Sigmoidal),
            "linear" => Ok(UtilityFamily::Linear),
            other => Err(format!("unknown utility family {other:?} (expected sigmoidal or linear)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityConfig {
    pub family: UtilityFamily,
    /// Logistic steepness; ignored by the linear family.
    #[serde(default)]
    pub mu: f64,
}

impl UtilityConfig {
    pub fn sigmoidal(mu: f64) -> Self {
        UtilityConfig { family: UtilityFamily::Sigmoidal, mu }
    }

    pub fn linear() -> Self {
        UtilityConfig { family: UtilityFamily::Linear, mu: 0.0 }
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        match self.family {
            UtilityFamily::Sigmoidal if !(self.mu > 0.0 && self.mu.is_finite()) => {
                Err(format!("sigmoidal utility needs a positive finite mu, found {}", self.mu))
            }
            _ => Ok(()),
        }
    }

    /// Utility contributed by one (application, resource) pair receiving `x`
    /// against request `r`.
    #[inline]
    pub fn term(&self, x: f64, r: f64) -> f64 {
        match self.family {
            UtilityFamily::Sigmoidal => logistic(self.mu * (x - r)),
            UtilityFamily::Linear => x,
        }
    }

    /// Derivative of [`term`](Self::term) with respect to `x`.
    #[inline]
    pub fn slope(&self, x: f64, r: f64) -> f64 {
        match self.family {
            UtilityFamily::Sigmoidal => {
                let s = logistic(self.mu * (x - r));
                self.mu * s * (1.0 - s)
            }
            UtilityFamily::Linear => 1.0,
        }
    }
}

#[inline]
pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z.clamp(-EXP_CLAMP, EXP_CLAMP)).exp())
}

/// Weights `w_n` on native utility and `zeta_n` on cross-provider utility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub w: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl ObjectiveWeights {
    /// Weights as recorded on each provider of the scenario.
    pub fn from_scenario(s: &Scenario) -> Self {
        ObjectiveWeights {
            w: s.providers.iter().map(|p| p.weight_native).collect(),
            zeta: s.providers.iter().map(|p| p.weight_foreign).collect(),
        }
    }

    pub fn uniform(n: usize, value: f64) -> Self {
        ObjectiveWeights { w: vec![value; n], zeta: vec![value; n] }
    }

    pub fn check(&self, s: &Scenario) -> Result<()> {
        let n = s.num_providers();
        for v in [&self.w, &self.zeta] {
            if v.len() != n {
                return Err(Error::LengthMismatch { left: v.len(), right: n });
            }
        }
        if self.w.iter().chain(&self.zeta).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidSettings("objective weights must be finite and non-negative".into()));
        }
        Ok(())
    }
}

fn host_utility(s: &Scenario, a: &Allocation, host: usize, owner: usize) -> f64 {
    let cfg = s.providers[host].utility;
    let k_res = s.num_resources();
    s.app_range(owner)
        .zip(&s.providers[owner].native_apps)
        .map(|(i, app)| (0..k_res).map(|k| cfg.term(a.get(host, i, k), app.request[k])).sum::<f64>())
        .sum()
}

/// `u_n`: provider `n`'s own pool given to its native applications.
pub fn native_utility(s: &Scenario, a: &Allocation, n: usize) -> Result<f64> {
    s.check_provider(n)?;
    a.check_dims(s)?;
    Ok(host_utility(s, a, n, n))
}

/// `u_guest^host`: the host's pool given to the guest's applications, scored
/// with the host's utility family.
pub fn cross_utility(s: &Scenario, a: &Allocation, host: usize, guest: usize) -> Result<f64> {
    s.check_provider(host)?;
    s.check_provider(guest)?;
    a.check_dims(s)?;
    if host == guest {
        return Err(Error::SameHostAndGuest(host));
    }
    for p in [host, guest] {
        if !a.coalition().contains(p) {
            return Err(Error::NotInCoalition { provider: p });
        }
    }
    Ok(host_utility(s, a, host, guest))
}

/// Fill-ratio sum over `n`'s native applications, counting supply from every
/// member of `coalition`.
pub fn satisfaction_term(s: &Scenario, a: &Allocation, n: usize, coalition: Coalition) -> Result<f64> {
    s.check_provider(n)?;
    s.check_coalition(coalition)?;
    a.check_dims(s)?;
    if !coalition.contains(n) {
        return Err(Error::NotInCoalition { provider: n });
    }
    let k_res = s.num_resources();
    let mut total = 0.0;
    for (i, app) in s.app_range(n).zip(&s.providers[n].native_apps) {
        for k in 0..k_res {
            let r = app.request[k];
            if r > 0.0 {
                let supplied: f64 = coalition.members().map(|l| a.get(l, i, k)).sum();
                total += supplied / r;
            }
        }
    }
    Ok(total)
}

/// Payoff of provider `n` inside `coalition`. For a singleton coalition this
/// is the standalone objective.
pub fn provider_objective(
    s: &Scenario,
    a: &Allocation,
    n: usize,
    coalition: Coalition,
    weights: &ObjectiveWeights,
) -> Result<f64> {
    weights.check(s)?;
    let satisfaction = satisfaction_term(s, a, n, coalition)?;
    let native = host_utility(s, a, n, n);
    let cross: f64 = coalition.members().filter(|&j| j != n).map(|j| host_utility(s, a, n, j)).sum();
    Ok(weights.w[n] * native + weights.zeta[n] * cross + satisfaction)
}

/// Payoffs of every member of `coalition`, indexed by provider (zero for non-members).
pub fn coalition_payoffs(
    s: &Scenario,
    a: &Allocation,
    coalition: Coalition,
    weights: &ObjectiveWeights,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; s.num_providers()];
    for n in coalition.members() {
        out[n] = provider_objective(s, a, n, coalition, weights)?;
    }
    Ok(out)
}
