//! wasm-bindgen entry points for the static demo page in `www/`. Every call
//! returns a JSON document; errors come back as `{"error": "..."}`.

use coshare::game::{check_convexity, check_core_membership, check_superadditivity, enumerate_coalitions};
use coshare::generate::{generate_scenario, GeneratorConfig, Preset};
use coshare::metrics::MetricsReport;
use coshare::solver::{solve_core_allocation, solve_standalone, SolveReport, SolverSettings};
use coshare::utility::{ObjectiveWeights, UtilityConfig};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn utility(family: &str, mu: f64) -> Result<UtilityConfig, String> {
    let cfg = match family {
        "linear" => UtilityConfig::linear(),
        "sigmoidal" => UtilityConfig::sigmoidal(mu),
        other => return Err(format!("unknown family {other:?}")),
    };
    cfg.check()?;
    Ok(cfg)
}

fn scenario(preset: u8, seed: u64, family: &str, mu: f64) -> Result<coshare::model::Scenario, String> {
    let preset = Preset::from_number(preset).ok_or_else(|| format!("preset {preset} is not 1-4"))?;
    let cfg = GeneratorConfig::preset(preset).with_utility(utility(family, mu)?);
    generate_scenario(&cfg, seed).map_err(|e| e.to_string())
}

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

/// Samples one (application, resource) utility term and its fill-ratio
/// reward over `x` in `[0, 2 * request]`.
#[wasm_bindgen]
pub fn utility_curve(family: &str, mu: f64, request: f64, points: usize) -> String {
    respond((|| {
        let cfg = utility(family, mu)?;
        if !(request > 0.0 && request.is_finite()) || points < 2 {
            return Err("request must be positive and points at least 2".to_string());
        }
        let xs: Vec<f64> = (0..points).map(|j| 2.0 * request * j as f64 / (points - 1) as f64).collect();
        let utility: Vec<f64> = xs.iter().map(|&x| cfg.term(x, request)).collect();
        let fill: Vec<f64> = xs.iter().map(|&x| x.min(request) / request).collect();
        Ok(json!({ "x": xs, "utility": utility, "fill": fill }))
    })())
}

/// Standalone versus grand-coalition payoffs and metrics for a generated scenario.
#[wasm_bindgen]
pub fn compare_payoffs(preset: u8, seed: u64, family: &str, mu: f64) -> String {
    respond((|| {
        let s = scenario(preset, seed, family, mu)?;
        let settings = SolverSettings::default();
        let alone: Vec<SolveReport> =
            (0..s.num_providers()).map(|n| solve_standalone(&s, n, &settings)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let core = solve_core_allocation(&s, &ObjectiveWeights::from_scenario(&s), &settings).map_err(|e| e.to_string())?;
        let metrics = MetricsReport::build(&s, &alone, &core).map_err(|e| e.to_string())?;
        Ok(json!({
            "providers": metrics.per_provider,
            "deficit": s.providers.iter().map(|p| {
                (0..s.num_resources()).any(|k| p.capacity[k] < p.native_apps.iter().map(|a| a.request[k]).sum::<f64>())
            }).collect::<Vec<_>>(),
            "converged": core.converged,
        }))
    })())
}

/// Every coalition's payoffs plus the superadditivity, convexity and core checks.
#[wasm_bindgen]
pub fn coalition_table(preset: u8, seed: u64, family: &str, mu: f64) -> String {
    respond((|| {
        let s = scenario(preset, seed, family, mu)?;
        let settings = SolverSettings::default();
        let w = ObjectiveWeights::from_scenario(&s);
        let table = enumerate_coalitions(&s, &w, &settings, 6).map_err(|e| e.to_string())?;
        let core = solve_core_allocation(&s, &w, &settings).map_err(|e| e.to_string())?;
        let rows: Vec<Value> = table
            .ordered()
            .into_iter()
            .map(|c| {
                let e = table.get(c).expect("ordered keys come from the table");
                json!({ "coalition": c.to_string(), "payoffs": e.payoffs, "value": e.value })
            })
            .collect();
        let sa = check_superadditivity(&table).map_err(|e| e.to_string())?;
        let cv = check_convexity(&table).map_err(|e| e.to_string())?;
        let membership = check_core_membership(&table, &core.per_provider_payoff).map_err(|e| e.to_string())?;
        Ok(json!({
            "rows": rows,
            "core_payoffs": core.per_provider_payoff,
            "superadditivity_violations": sa.len(),
            "convexity_violations": cv.len(),
            "in_core": membership.in_core,
        }))
    })())
}
