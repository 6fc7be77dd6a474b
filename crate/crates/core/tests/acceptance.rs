//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use coshare::format::load_scenario;
use coshare::game::{check_convexity, check_core_membership, check_superadditivity, enumerate_coalitions, CoalitionValueTable};
use coshare::generate::{generate_scenario, GeneratorConfig, Preset};
use coshare::metrics::{utilization, MetricsReport};
use coshare::model::{Allocation, ApplicationSpec, Coalition, ProviderSpec, ResourceKind, Scenario};
use coshare::oracle::{oracle_core_allocation, oracle_maximize, GridSpec};
use coshare::solver::{coalition_value, solve_core_allocation, solve_standalone, SolveReport, SolverSettings};
use coshare::utility::{native_utility, satisfaction_term, ObjectiveWeights, UtilityConfig, UtilityFamily};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn run(id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let passed = out.passed && in_time;
    println!(
        "{} criterion {id} ({name}): {} [{:.1}s of {}s]{}",
        if passed { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { " over time budget" },
    );
    passed
}

fn tiny_scenarios() -> Vec<(String, Scenario)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/tiny");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir).expect("tiny scenario directory").map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), load_scenario(&p).expect("valid tiny scenario")))
        .collect()
}

fn close(solver: f64, oracle: f64) -> bool {
    (solver - oracle).abs() <= f64::max(1e-3, 0.01 * oracle.abs())
}

fn oracle_equivalence() -> Outcome {
    let scenarios = tiny_scenarios();
    let settings = SolverSettings::default();
    let grid = GridSpec::default();
    let mut families = [0usize; 3];
    let mut comparisons = 0;
    let mut failures = Vec::new();
    for (name, s) in &scenarios {
        let u = s.providers[0].utility;
        match (u.family, u.mu) {
            (UtilityFamily::Linear, _) => families[0] += 1,
            (_, mu) if mu == 0.01 => families[1] += 1,
            _ => families[2] += 1,
        }
        let w = ObjectiveWeights::from_scenario(s);
        let mut compare = |what: String, solver: f64, oracle: f64| {
            comparisons += 1;
            if !close(solver, oracle) {
                failures.push(format!("{name} {what}: solver {solver:.6} oracle {oracle:.6}"));
            }
        };
        for n in 0..s.num_providers() {
            let solver = solve_standalone(s, n, &settings).unwrap().objective;
            let oracle = oracle_maximize(s, Coalition::singleton(n), &w, &grid).unwrap().value;
            compare(format!("standalone {}", n + 1), solver, oracle);
        }
        let grand = s.grand_coalition();
        let solver = coalition_value(s, grand, &w, &settings).unwrap().objective;
        let oracle = oracle_maximize(s, grand, &w, &grid).unwrap().value;
        compare("grand value".into(), solver, oracle);
        let solver = solve_core_allocation(s, &w, &settings).unwrap().objective;
        let oracle = oracle_core_allocation(s, &w, &grid).unwrap().value;
        compare("core".into(), solver, oracle);
    }
    let enough = scenarios.len() >= 20 && families.iter().all(|&c| c > 0);
    Outcome {
        passed: enough && failures.is_empty(),
        detail: format!(
            "{} scenarios (linear {}, mu=0.01 {}, mu=0.1 {}), {comparisons} comparisons within max(1e-3, 1%), {} mismatches{}",
            scenarios.len(),
            families[0],
            families[1],
            families[2],
            failures.len(),
            if failures.is_empty() { String::new() } else { format!(": {}", failures.join("; ")) }
        ),
    }
}

fn ir_floor(v: f64) -> f64 {
    v - 1e-6 * (1.0 + v.abs())
}

fn rationality_suite() -> Outcome {
    let settings = SolverSettings::default();
    let mut runs = 0;
    let mut converged = 0;
    let mut failures = Vec::new();
    for seed in 0..13u64 {
        let mu = if seed % 2 == 0 { 0.01 } else { 0.1 };
        for preset in Preset::ALL {
            let cfg = GeneratorConfig::preset(preset).with_utility(UtilityConfig::sigmoidal(mu));
            let s = generate_scenario(&cfg, 1000 + seed).unwrap();
            let rep = solve_core_allocation(&s, &ObjectiveWeights::from_scenario(&s), &settings).unwrap();
            runs += 1;
            if !rep.converged {
                continue;
            }
            converged += 1;
            let floors = rep.standalone_values.as_ref().unwrap();
            for n in 0..s.num_providers() {
                if rep.per_provider_payoff[n] < ir_floor(floors[n]) {
                    failures.push(format!("{preset:?} seed {seed}: provider {} below standalone", n + 1));
                }
            }
            let total: f64 = rep.per_provider_payoff.iter().sum();
            if (total - rep.objective).abs() > 1e-6 {
                failures.push(format!("{preset:?} seed {seed}: payoffs sum {total} vs objective {}", rep.objective));
            }
            if !rep.residuals.is_feasible(1e-6) {
                failures.push(format!("{preset:?} seed {seed}: infeasible allocation"));
            }
        }
    }
    Outcome {
        passed: runs >= 50 && converged == runs && failures.is_empty(),
        detail: format!(
            "{runs} core solves over presets 1-4, {converged} converged, {} rationality failures{}",
            failures.len(),
            if failures.is_empty() { String::new() } else { format!(": {}", failures.join("; ")) }
        ),
    }
}

struct GameCase {
    label: String,
    table: CoalitionValueTable,
    core: SolveReport,
}

fn game_cases() -> Vec<GameCase> {
    let settings = SolverSettings::default();
    let mut cases = Vec::new();
    for (i, (n, apps)) in [(3, 3), (3, 6), (4, 3), (4, 6)].into_iter().cycle().take(12).enumerate() {
        let seed = 2000 + i as u64;
        let s = generate_scenario(&GeneratorConfig::new(n, apps), seed).unwrap();
        let w = ObjectiveWeights::from_scenario(&s);
        cases.push(GameCase {
            label: format!("N={n} M={apps} seed={seed}"),
            table: enumerate_coalitions(&s, &w, &settings, 10).unwrap(),
            core: solve_core_allocation(&s, &w, &settings).unwrap(),
        });
    }
    cases
}

fn superadditivity_and_convexity(cases: &[GameCase]) -> Outcome {
    let mut failures = Vec::new();
    let mut grows = true;
    for c in cases {
        let sa = check_superadditivity(&c.table).unwrap();
        let cv = check_convexity(&c.table).unwrap();
        if !sa.is_empty() || !cv.is_empty() {
            failures.push(format!("{}: {} superadditivity, {} convexity violations", c.label, sa.len(), cv.len()));
        }
        // v grows along {1} ⊂ {1,2} ⊂ ... ⊂ N
        let mut last = 0.0;
        for n in 0..c.table.players() {
            let v = c.table.value(Coalition::grand(n + 1)).unwrap();
            grows &= v >= last;
            last = v;
        }
    }
    Outcome {
        passed: cases.len() >= 10 && failures.is_empty() && grows,
        detail: format!(
            "{} enumerated games (sigmoidal mu=0.01, N in {{3,4}}), chain growth {}, {} failing{}",
            cases.len(),
            if grows { "ok" } else { "broken" },
            failures.len(),
            if failures.is_empty() { String::new() } else { format!(": {}", failures.join("; ")) }
        ),
    }
}

fn published_table() -> CoalitionValueTable {
    CoalitionValueTable::from_payoff_rows(3, [
        (vec![0], vec![584.40, 0.0, 0.0]),
        (vec![1], vec![0.0, 90.0, 0.0]),
        (vec![2], vec![0.0, 0.0, 90.0]),
        (vec![0, 1], vec![584.40, 227.15, 0.0]),
        (vec![0, 2], vec![584.40, 0.0, 229.84]),
        (vec![1, 2], vec![0.0, 118.91, 119.50]),
        (vec![0, 1, 2], vec![584.40, 205.11, 202.30]),
    ])
    .unwrap()
}

fn core_membership(cases: &[GameCase]) -> Outcome {
    let mut failures = Vec::new();
    for c in cases {
        let check = check_core_membership(&c.table, &c.core.per_provider_payoff).unwrap();
        if !check.in_core {
            failures.push(format!(
                "{}: ir {} group {} blocking {:?}",
                c.label,
                check.individually_rational,
                check.group_rational,
                check.blocking_coalitions.iter().map(ToString::to_string).collect::<Vec<_>>()
            ));
        }
    }
    let published = check_core_membership(&published_table(), &[584.40, 205.11, 202.30]).unwrap();
    Outcome {
        passed: failures.is_empty() && published.in_core,
        detail: format!(
            "{} of {} core payoff vectors in the core; published table in_core = {}{}",
            cases.len() - failures.len(),
            cases.len(),
            published.in_core,
            if failures.is_empty() { String::new() } else { format!(": {}", failures.join("; ")) }
        ),
    }
}

/// Deficit providers short in every resource, coalition capacity covering
/// total demand in every resource.
fn covered_deficit_scenario(seed: u64) -> Option<Scenario> {
    let (n, apps) = [(3, 3), (3, 20), (6, 6), (6, 20)][(seed % 4) as usize];
    let s = generate_scenario(&GeneratorConfig::new(n, apps), 3000 + seed).unwrap();
    let k_res = s.num_resources();
    let demand = |p: &ProviderSpec, k: usize| p.native_apps.iter().map(|a| a.request[k]).sum::<f64>();
    let short = s.providers.iter().any(|p| (0..k_res).all(|k| p.capacity[k] < demand(p, k)));
    let covered = (0..k_res).all(|k| {
        s.providers.iter().map(|p| p.capacity[k]).sum::<f64>() >= s.providers.iter().map(|p| demand(p, k)).sum::<f64>()
    });
    (short && covered).then_some(s)
}

fn satisfaction_effect() -> Outcome {
    let settings = SolverSettings::default();
    let mut used = 0;
    let mut failures = Vec::new();
    for seed in 0..40u64 {
        if used == 12 {
            break;
        }
        let Some(s) = covered_deficit_scenario(seed) else { continue };
        used += 1;
        let w = ObjectiveWeights::from_scenario(&s);
        let alone: Vec<SolveReport> = (0..s.num_providers()).map(|n| solve_standalone(&s, n, &settings).unwrap()).collect();
        let grand = solve_core_allocation(&s, &w, &settings).unwrap();
        let m = MetricsReport::build(&s, &alone, &grand).unwrap();
        let label = format!("seed {seed} (N={})", s.num_providers());
        if let Some(p) = m.per_provider.iter().find(|p| (p.satisfaction_pct - 100.0).abs() > 0.1) {
            failures.push(format!("{label}: provider {} at {:.3}% in the grand coalition", p.provider + 1, p.satisfaction_pct));
        }
        if !m.per_provider.iter().any(|p| p.satisfaction_alone_pct < 100.0) {
            failures.push(format!("{label}: every provider already satisfied alone"));
        }
        for p in &m.per_provider {
            // the IR tolerance, expressed in percent of the standalone utility
            let eps = 100.0 * 1e-6 * (1.0 + p.utility_alone.abs()) / p.utility_alone.abs();
            if p.improvement_pct.is_some_and(|v| v < -eps) {
                failures.push(format!("{label}: provider {} loses {:?}%", p.provider + 1, p.improvement_pct));
            }
        }
        let deficit_gain = m.per_provider.iter().zip(&s.providers).any(|(p, spec)| {
            let short = (0..s.num_resources()).all(|k| spec.capacity[k] < spec.native_apps.iter().map(|a| a.request[k]).sum::<f64>());
            short && p.improvement_pct.is_some_and(|v| v > 0.0)
        });
        if !deficit_gain {
            failures.push(format!("{label}: no deficit provider improves"));
        }
    }
    Outcome {
        passed: used >= 10 && failures.is_empty(),
        detail: format!(
            "{used} covered-deficit scenarios, {} failing{}",
            failures.len(),
            if failures.is_empty() { String::new() } else { format!(": {}", failures.join("; ")) }
        ),
    }
}

fn random_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let n = rng.random_range(1..=4);
    let k_res = rng.random_range(1..=3);
    let mut next = 0;
    let providers = (0..n)
        .map(|p| ProviderSpec {
            id: p,
            capacity: (0..k_res).map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..20.0) }).collect(),
            native_apps: (0..rng.random_range(1..=4))
                .map(|_| {
                    next += 1;
                    ApplicationSpec { id: next, owner: p, request: (0..k_res).map(|_| rng.random_range(0.1..10.0)).collect() }
                })
                .collect(),
            weight_native: 1.0,
            weight_foreign: 1.0,
            utility: if rng.random_bool(0.5) { UtilityConfig::linear() } else { UtilityConfig::sigmoidal(rng.random_range(0.01..1.0)) },
        })
        .collect();
    Scenario {
        providers,
        resource_kinds: (0..k_res).map(|index| ResourceKind { index, label: format!("r{index}") }).collect(),
        seed: None,
    }
}

/// A random allocation made feasible by scaling: demand caps first, then capacities.
fn random_feasible(s: &Scenario, rng: &mut ChaCha8Rng) -> Allocation {
    let grand = s.grand_coalition();
    let mut a = Allocation::zeros(s, grand);
    let (n_prov, n_apps, k_res) = a.dims();
    let requests = s.requests();
    for n in 0..n_prov {
        for i in 0..n_apps {
            for k in 0..k_res {
                a.set(n, i, k, rng.random::<f64>() * requests[i * k_res + k] / n_prov as f64);
            }
        }
    }
    for n in 0..n_prov {
        for k in 0..k_res {
            let used = a.total_from_provider(n, k);
            let cap = s.providers[n].capacity[k];
            if used > cap {
                for i in 0..n_apps {
                    a.set(n, i, k, a.get(n, i, k) * cap / used);
                }
            }
        }
    }
    a
}

fn metric_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let probes = 10_000;
    let mut max_util = 0.0f64;
    let mut failures = Vec::new();
    let owners_of = |s: &Scenario| s.owners();
    for probe in 0..probes {
        let s = random_scenario(&mut rng);
        let mut a = random_feasible(&s, &mut rng);
        let grand = s.grand_coalition();
        for n in 0..s.num_providers() {
            for u in utilization(&s, &a, n).unwrap() {
                max_util = max_util.max(u);
            }
        }
        // raise one coordinate by part of its remaining slack
        let (n_prov, n_apps, k_res) = a.dims();
        let (n, i, k) = (rng.random_range(0..n_prov), rng.random_range(0..n_apps), rng.random_range(0..k_res));
        let slack = (s.providers[n].capacity[k] - a.total_from_provider(n, k)).min(s.requests()[i * k_res + k] - a.total_to_app(i, k));
        let owner = owners_of(&s)[i];
        let before = (native_utility(&s, &a, n).unwrap(), satisfaction_term(&s, &a, owner, grand).unwrap());
        a.set(n, i, k, a.get(n, i, k) + slack.max(0.0) * rng.random::<f64>());
        let after = (native_utility(&s, &a, n).unwrap(), satisfaction_term(&s, &a, owner, grand).unwrap());
        if after.0 < before.0 || after.1 < before.1 {
            failures.push(format!("probe {probe}: {before:?} -> {after:?}"));
        }
        for m in 0..s.num_providers() {
            for u in utilization(&s, &a, m).unwrap() {
                max_util = max_util.max(u);
            }
        }
    }
    Outcome {
        passed: max_util <= 100.0 + 1e-4 && failures.is_empty(),
        detail: format!(
            "{probes} probes, max utilization {max_util:.6}%, {} monotonicity failures{}",
            failures.len(),
            if failures.is_empty() { String::new() } else { format!(": {}", failures.iter().take(5).cloned().collect::<Vec<_>>().join("; ")) }
        ),
    }
}

fn main() {
    let mut all = true;
    all &= run(1, "oracle equivalence", Duration::from_secs(60), oracle_equivalence);
    all &= run(2, "core rationality", Duration::from_secs(600), rationality_suite);
    let start = Instant::now();
    let cases = game_cases();
    let setup = start.elapsed();
    all &= run(3, "superadditivity and convexity", Duration::from_secs(900).saturating_sub(setup), || {
        superadditivity_and_convexity(&cases)
    });
    all &= run(4, "core membership", Duration::from_secs(900), || core_membership(&cases));
    all &= run(5, "satisfaction effect", Duration::from_secs(600), satisfaction_effect);
    all &= run(6, "metric bounds", Duration::from_secs(60), metric_bounds);
    if !all {
        std::process::exit(1);
    }
}
