//! Seeded random scenarios with a deficit/surplus split between providers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ApplicationSpec, ProviderSpec, ResourceKind, Scenario};
use crate::utility::UtilityConfig;

pub const DEFAULT_RESOURCE_LABELS: [&str; 3] = ["storage", "communication", "computation"];

/// The four network settings: (providers, applications per provider).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    One,
    Two,
    Three,
    Four,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::One, Preset::Two, Preset::Three, Preset::Four];

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Preset::One),
            2 => Some(Preset::Two),
            3 => Some(Preset::Three),
            4 => Some(Preset::Four),
            _ => None,
        }
    }

    pub fn dims(self) -> (usize, usize) {
        match self {
            Preset::One => (3, 3),
            Preset::Two => (3, 20),
            Preset::Three => (6, 6),
            Preset::Four => (6, 20),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub providers: usize,
    pub apps_per_provider: usize,
    pub resources: usize,
    /// Per (app, resource) request drawn uniformly from this range.
    pub request_range: (f64, f64),
    /// Number of deficit providers (the lowest-indexed ones).
    pub deficit_count: usize,
    /// Deficit capacity per resource, as a multiple of the provider's own total demand.
    pub deficit_capacity: (f64, f64),
    /// Surplus capacity per resource, as a multiple of the provider's own total demand.
    pub surplus_capacity: (f64, f64),
    pub utility: UtilityConfig,
    pub weight_native: f64,
    pub weight_foreign: f64,
    /// Decimal places kept on generated numbers.
    pub decimals: u32,
}

impl GeneratorConfig {
    pub fn new(providers: usize, apps_per_provider: usize) -> Self {
        GeneratorConfig {
            providers,
            apps_per_provider,
            resources: DEFAULT_RESOURCE_LABELS.len(),
            request_range: (1.0, 10.0),
            deficit_count: providers.div_ceil(3),
            deficit_capacity: (0.3, 0.7),
            surplus_capacity: (1.5, 3.0),
            utility: UtilityConfig::sigmoidal(0.01),
            weight_native: 1.0,
            weight_foreign: 1.0,
            decimals: 2,
        }
    }

    pub fn preset(p: Preset) -> Self {
        let (n, m) = p.dims();
        Self::new(n, m)
    }

    pub fn with_utility(mut self, utility: UtilityConfig) -> Self {
        self.utility = utility;
        self
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGenerator(msg));
        if self.providers == 0 || self.apps_per_provider == 0 || self.resources == 0 {
            return bad("providers, apps_per_provider and resources must be positive".into());
        }
        if self.providers > crate::model::Coalition::MAX_PLAYERS {
            return bad(format!("at most {} providers", crate::model::Coalition::MAX_PLAYERS));
        }
        if self.deficit_count > self.providers {
            return bad(format!("deficit_count {} exceeds providers {}", self.deficit_count, self.providers));
        }
        for (name, (lo, hi)) in [
            ("request_range", self.request_range),
            ("deficit_capacity", self.deficit_capacity),
            ("surplus_capacity", self.surplus_capacity),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return bad(format!("{name} ({lo}, {hi}) must satisfy 0 <= lo <= hi"));
            }
        }
        if self.request_range.0 <= 0.0 && self.request_range.1 <= 0.0 {
            return bad("request_range must allow positive requests".into());
        }
        self.utility.check().map_err(Error::InvalidGenerator)
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn round_to(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (x * scale).round() / scale
}

pub fn generate_scenario(cfg: &GeneratorConfig, seed: u64) -> Result<Scenario> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<String> = (0..cfg.resources)
        .map(|k| DEFAULT_RESOURCE_LABELS.get(k).map_or_else(|| format!("resource{k}"), |s| s.to_string()))
        .collect();
    let min_request = 10f64.powi(-(cfg.decimals as i32));
    let mut next_id = 0u64;
    let mut providers = Vec::with_capacity(cfg.providers);
    for n in 0..cfg.providers {
        let mut apps = Vec::with_capacity(cfg.apps_per_provider);
        for _ in 0..cfg.apps_per_provider {
            let request: Vec<f64> = (0..cfg.resources)
                .map(|_| round_to(draw(&mut rng, cfg.request_range), cfg.decimals).max(min_request))
                .collect();
            apps.push(ApplicationSpec { id: next_id, owner: n, request });
            next_id += 1;
        }
        let range = if n < cfg.deficit_count { cfg.deficit_capacity } else { cfg.surplus_capacity };
        let capacity = (0..cfg.resources)
            .map(|k| {
                let demand: f64 = apps.iter().map(|a| a.request[k]).sum();
                round_to(draw(&mut rng, range) * demand, cfg.decimals)
            })
            .collect();
        providers.push(ProviderSpec {
            id: n,
            capacity,
            native_apps: apps,
            weight_native: cfg.weight_native,
            weight_foreign: cfg.weight_foreign,
            utility: cfg.utility,
        });
    }
    Ok(Scenario {
        providers,
        resource_kinds: labels.into_iter().enumerate().map(|(index, label)| ResourceKind { index, label }).collect(),
        seed: Some(seed),
    })
}
