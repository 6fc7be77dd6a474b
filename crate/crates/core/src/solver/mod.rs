//! Constrained maximization of standalone, coalition and core-allocation
//! problems.
//!
//! All three share one engine: projected gradient ascent over the polytope
//! of capacity, demand-cap and non-negativity constraints, restarted from
//! several feasible points. The core problem adds one individual-rationality
//! constraint per provider, handled with an augmented Lagrangian on top of
//! the same ascent.

mod ascent;
mod problem;
mod projection;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{feasibility_residuals, Allocation, Coalition, Residuals, Scenario};
use crate::utility::ObjectiveWeights;

use ascent::{ascend, AscentParams, Smooth};
pub(crate) use problem::Problem;
use projection::Projector;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_iters: usize,
    pub step_init: f64,
    pub tol_kkt: f64,
    pub multistarts: usize,
    pub ir_tolerance: f64,
    /// Seed for the random restarts.
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { max_iters: 5000, step_init: 1.0, tol_kkt: 1e-6, multistarts: 8, ir_tolerance: 1e-6, seed: 0 }
    }
}

impl SolverSettings {
    pub fn check(&self) -> Result<()> {
        let positive = self.max_iters > 0
            && self.multistarts > 0
            && self.step_init > 0.0
            && self.tol_kkt > 0.0
            && self.ir_tolerance > 0.0;
        if positive {
            Ok(())
        } else {
            Err(Error::InvalidSettings(format!("all solver settings must be positive: {self:?}")))
        }
    }

    fn ascent(&self) -> AscentParams {
        AscentParams { max_iters: self.max_iters, step_init: self.step_init, tol: self.tol_kkt }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub coalition: Coalition,
    pub allocation: Allocation,
    pub objective: f64,
    /// Payoff of every provider, indexed by provider id; zero outside the coalition.
    pub per_provider_payoff: Vec<f64>,
    pub residuals: Residuals,
    pub converged: bool,
    pub starts_used: usize,
    pub iterations: usize,
    /// Standalone values `v({n})` used as individual-rationality floors (core solves only).
    pub standalone_values: Option<Vec<f64>>,
    /// Number of optimization problems solved to produce this report.
    pub problems_solved: usize,
}

impl SolveReport {
    /// Smallest `payoff[n] - v({n})` over the coalition, when floors are known.
    pub fn min_ir_margin(&self) -> Option<f64> {
        let floors = self.standalone_values.as_ref()?;
        self.coalition.members().map(|n| self.per_provider_payoff[n] - floors[n]).reduce(f64::min)
    }
}

struct PlainObjective<'a>(&'a Problem);

impl Smooth for PlainObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.objective(x)
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        self.0.weighted_gradient(x, None, g)
    }
}

/// Augmented Lagrangian for `max F(x)` s.t. `payoff_n(x) >= floor_n`.
struct RationalObjective<'a> {
    problem: &'a Problem,
    floors: &'a [f64],
    lambda: &'a [f64],
    rho: f64,
}

impl RationalObjective<'_> {
    /// `max(0, lambda_n - rho * g_n)` with `g_n = payoff_n - floor_n`.
    fn shifted(&self, payoffs: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; payoffs.len()];
        for n in self.problem.coalition.members() {
            m[n] = (self.lambda[n] - self.rho * (payoffs[n] - self.floors[n])).max(0.0);
        }
        m
    }
}

impl Smooth for RationalObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let payoffs = self.problem.payoffs(x);
        let m = self.shifted(&payoffs);
        let penalty: f64 = self
            .problem
            .coalition
            .members()
            .map(|n| (m[n] * m[n] - self.lambda[n] * self.lambda[n]) / (2.0 * self.rho))
            .sum();
        payoffs.iter().sum::<f64>() - penalty
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        let m = self.shifted(&self.problem.payoffs(x));
        self.problem.weighted_gradient(x, Some(&m), g)
    }
}

struct Candidate {
    x: Vec<f64>,
    objective: f64,
    converged: bool,
    iterations: usize,
}

fn seeded_rng(settings: &SolverSettings, s: &Scenario, coalition: Coalition) -> ChaCha8Rng {
    let base = settings.seed ^ s.seed.unwrap_or(0).rotate_left(17);
    ChaCha8Rng::seed_from_u64(base ^ (coalition.bits() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Feasible starting points: caller-supplied warm starts, the deterministic
/// greedy fill, the zero point, then random scalings of the demand-capped point.
fn starting_points(
    problem: &Problem,
    projector: &Projector,
    warm: &[Vec<f64>],
    settings: &SolverSettings,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let mut starts: Vec<Vec<f64>> = warm.to_vec();
    starts.push(problem.greedy_point());
    let ub = problem.upper_bounds();
    while starts.len() < settings.multistarts.max(warm.len() + 1) {
        let y: Vec<f64> = ub.iter().map(|u| u * rng.random::<f64>()).collect();
        let mut x = vec![0.0; y.len()];
        projector.project(&y, &mut x);
        starts.push(x);
    }
    starts.truncate(settings.multistarts.max(warm.len()));
    starts
}

fn maximize(problem: &Problem, warm: &[Vec<f64>], settings: &SolverSettings, rng: &mut ChaCha8Rng) -> (Candidate, usize) {
    let projector = Projector::new(problem);
    let starts = starting_points(problem, &projector, warm, settings, rng);
    let used = starts.len();
    let best = starts
        .into_iter()
        .map(|x0| {
            let out = ascend(&PlainObjective(problem), &projector, x0, settings.ascent());
            Candidate { objective: out.value, x: out.x, converged: out.converged, iterations: out.iterations }
        })
        .reduce(|best, c| if c.objective > best.objective { c } else { best })
        .expect("at least one start");
    (best, used)
}

fn report_from(
    s: &Scenario,
    problem: &Problem,
    cand: Candidate,
    starts_used: usize,
    floors: Option<Vec<f64>>,
    problems_solved: usize,
) -> Result<SolveReport> {
    let allocation = problem.to_allocation(&cand.x);
    let residuals = feasibility_residuals(s, &allocation)?;
    let per_provider_payoff = problem.payoffs(&cand.x);
    let objective = problem.coalition.members().map(|n| per_provider_payoff[n]).sum();
    log::debug!(
        "coalition {}: value {objective:.6} after {} iterations, {starts_used} starts, converged={}",
        problem.coalition,
        cand.iterations,
        cand.converged
    );
    Ok(SolveReport {
        coalition: problem.coalition,
        allocation,
        objective,
        per_provider_payoff,
        residuals,
        converged: cand.converged,
        starts_used,
        iterations: cand.iterations,
        standalone_values: floors,
        problems_solved,
    })
}

fn check_inputs(s: &Scenario, coalition: Coalition, weights: &ObjectiveWeights, settings: &SolverSettings) -> Result<()> {
    settings.check()?;
    s.check_coalition(coalition)?;
    weights.check(s)?;
    let violations = crate::model::validate_scenario(s);
    if let Some(v) = violations.first() {
        return Err(Error::InvalidScenario(v.to_string()));
    }
    Ok(())
}

/// Maximizes provider `n`'s standalone objective using only its own pool and
/// its own applications, with the weights recorded on the scenario.
pub fn solve_standalone(s: &Scenario, n: usize, settings: &SolverSettings) -> Result<SolveReport> {
    s.check_provider(n)?;
    coalition_value(s, Coalition::singleton(n), &ObjectiveWeights::from_scenario(s), settings)
}

/// `v(S)`: maximizes the summed member payoffs with the pooled resources of `coalition`.
pub fn coalition_value(
    s: &Scenario,
    coalition: Coalition,
    weights: &ObjectiveWeights,
    settings: &SolverSettings,
) -> Result<SolveReport> {
    coalition_value_warm(s, coalition, weights, settings, &[])
}

/// Like [`coalition_value`], also starting from the given allocations (each
/// must be feasible for `coalition`).
pub fn coalition_value_warm(
    s: &Scenario,
    coalition: Coalition,
    weights: &ObjectiveWeights,
    settings: &SolverSettings,
    warm: &[Allocation],
) -> Result<SolveReport> {
    check_inputs(s, coalition, weights, settings)?;
    let problem = Problem::new(s, coalition, weights);
    let warm: Vec<Vec<f64>> = warm.iter().map(|a| problem.from_allocation(a)).collect();
    let mut rng = seeded_rng(settings, s, coalition);
    let (best, used) = maximize(&problem, &warm, settings, &mut rng);
    report_from(s, &problem, best, used, None, 1)
}

const RHO_INIT: f64 = 10.0;
const RHO_MAX: f64 = 1e9;
const MAX_OUTER: usize = 60;

struct RationalOutcome {
    cand: Candidate,
    max_violation: f64,
}

fn rational_ascent(
    problem: &Problem,
    projector: &Projector,
    floors: &[f64],
    x0: Vec<f64>,
    settings: &SolverSettings,
) -> RationalOutcome {
    let n = problem.providers;
    let mut lambda = vec![0.0; n];
    let mut rho = RHO_INIT;
    let mut x = x0;
    let mut iterations = 0;
    let mut prev_violation = f64::INFINITY;
    let violation_of = |payoffs: &[f64]| -> f64 {
        problem.coalition.members().map(|m| (floors[m] - payoffs[m]).max(0.0)).fold(0.0, f64::max)
    };
    let mut converged = false;
    for _ in 0..MAX_OUTER {
        let obj = RationalObjective { problem, floors, lambda: &lambda, rho };
        let out = ascend(&obj, projector, x, settings.ascent());
        iterations += out.iterations;
        x = out.x;
        let payoffs = problem.payoffs(&x);
        let violation = violation_of(&payoffs);
        let mut lambda_shift = 0.0f64;
        for m in problem.coalition.members() {
            let next = (lambda[m] - rho * (payoffs[m] - floors[m])).max(0.0);
            lambda_shift = lambda_shift.max((next - lambda[m]).abs());
            lambda[m] = next;
        }
        if out.converged && violation <= settings.ir_tolerance && lambda_shift <= 1e-6 * (1.0 + lambda.iter().cloned().fold(0.0, f64::max)) {
            converged = true;
            break;
        }
        if violation > 0.25 * prev_violation {
            rho = (rho * 2.0).min(RHO_MAX);
        }
        prev_violation = violation;
    }
    let payoffs = problem.payoffs(&x);
    let max_violation = violation_of(&payoffs);
    RationalOutcome {
        cand: Candidate { objective: problem.objective(&x), x, converged: converged && max_violation <= settings.ir_tolerance, iterations },
        max_violation,
    }
}

/// Moves from `anchor` (individually rational) toward `target` as far as
/// individual rationality allows, by bisection on the segment.
fn pull_back(problem: &Problem, floors: &[f64], anchor: &[f64], target: &[f64], tol: f64) -> Vec<f64> {
    let point = |theta: f64| -> Vec<f64> { anchor.iter().zip(target).map(|(a, b)| a + theta * (b - a)).collect() };
    let ok = |x: &[f64]| {
        let p = problem.payoffs(x);
        problem.coalition.members().all(|m| p[m] >= floors[m] - tol)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(&point(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    point(lo)
}

/// Allocation from the core via the two-step procedure: solve every
/// standalone problem for the floors `v({n})`, then maximize the grand
/// coalition's summed payoff subject to `payoff[n] >= v({n})` for every `n`.
/// Solves `N + 1` problems in total.
pub fn solve_core_allocation(s: &Scenario, weights: &ObjectiveWeights, settings: &SolverSettings) -> Result<SolveReport> {
    let grand = s.grand_coalition();
    check_inputs(s, grand, weights, settings)?;
    let n = s.num_providers();

    // step 2
    let mut floors = vec![0.0; n];
    let mut standalone = Vec::with_capacity(n);
    for p in 0..n {
        let rep = coalition_value(s, Coalition::singleton(p), weights, settings)?;
        floors[p] = rep.objective;
        standalone.push(rep);
    }
    if n == 1 {
        let mut rep = standalone.pop().expect("one provider");
        rep.standalone_values = Some(floors);
        rep.problems_solved = 1;
        return Ok(rep);
    }

    log::info!("core solve: standalone values {floors:?}");

    // step 3
    let problem = Problem::new(s, grand, weights);
    let projector = Projector::new(&problem);
    let union = standalone.iter().skip(1).fold(standalone[0].allocation.clone(), |acc, r| acc.merged(&r.allocation));
    let anchor = problem.from_allocation(&union);
    let mut rng = seeded_rng(settings, s, grand);
    let starts = starting_points(&problem, &projector, std::slice::from_ref(&anchor), settings, &mut rng);
    let starts_used = starts.len();

    let mut best: Option<Candidate> = None;
    let mut fallback: Option<Candidate> = None;
    for x0 in starts {
        let out = rational_ascent(&problem, &projector, &floors, x0, settings);
        if out.max_violation <= settings.ir_tolerance {
            if best.as_ref().is_none_or(|b| out.cand.objective > b.objective) {
                best = Some(out.cand);
            }
        } else if fallback.as_ref().is_none_or(|b| out.cand.objective > b.objective) {
            fallback = Some(out.cand);
        }
    }
    let cand = match best {
        Some(c) => c,
        None => {
            // every start ended outside the rational set; retreat toward the
            // union of standalone solutions, which is always rational
            let target = fallback.expect("at least one start");
            let x = pull_back(&problem, &floors, &anchor, &target.x, settings.ir_tolerance);
            log::warn!("core solve: no start met individual rationality; pulled back toward standalone union");
            Candidate { objective: problem.objective(&x), x, converged: false, iterations: target.iterations }
        }
    };
    report_from(s, &problem, cand, starts_used, Some(floors), n + 1)
}
