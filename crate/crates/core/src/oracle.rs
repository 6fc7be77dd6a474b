//! Exhaustive lattice search for tiny instances, used to check the solver.
//!
//! Each free variable `x[l][i][k]` ranges over multiples of `step`, the exact
//! request and capacity values, the vertex coordinates "capacity minus other
//! requests in the same row" and "request minus other capacities in the same
//! column", and the slack left by the variables fixed before it. Values are scored
//! with the utility module directly, independently of the solver's
//! flattened problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Allocation, Coalition, Scenario};
use crate::utility::{coalition_payoffs, ObjectiveWeights};

pub const MAX_VARIABLES: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub step: f64,
    pub max_cells: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { step: 0.25, max_cells: 20_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub value: f64,
    pub allocation: Allocation,
    /// Indexed by provider id; zero outside the coalition.
    pub payoffs: Vec<f64>,
}

struct Var {
    host: usize,
    app: usize,
    resource: usize,
    request: f64,
    capacity: f64,
    base: Vec<f64>,
}

struct Search<'a> {
    s: &'a Scenario,
    coalition: Coalition,
    weights: &'a ObjectiveWeights,
    vars: Vec<Var>,
    floors: Option<&'a [f64]>,
    row_used: Vec<f64>,
    col_used: Vec<f64>,
    current: Allocation,
    best: Option<OracleOutcome>,
}

const SLACK_EPS: f64 = 1e-12;

impl Search<'_> {
    fn visit(&mut self, depth: usize) -> Result<()> {
        if depth == self.vars.len() {
            return self.score();
        }
        let k_res = self.s.num_resources();
        let (host, app, resource) = (self.vars[depth].host, self.vars[depth].app, self.vars[depth].resource);
        let row = host * k_res + resource;
        let col = app * k_res + resource;
        let slack = (self.vars[depth].capacity - self.row_used[row]).min(self.vars[depth].request - self.col_used[col]).max(0.0);
        let mut candidates: Vec<f64> = self.vars[depth].base.iter().copied().filter(|&v| v <= slack + SLACK_EPS).collect();
        candidates.push(slack);
        candidates.sort_by(f64::total_cmp);
        candidates.dedup_by(|a, b| (*a - *b).abs() <= SLACK_EPS);
        for v in candidates {
            let v = v.min(slack);
            self.current.set(host, app, resource, v);
            self.row_used[row] += v;
            self.col_used[col] += v;
            self.visit(depth + 1)?;
            self.row_used[row] -= v;
            self.col_used[col] -= v;
        }
        self.current.set(host, app, resource, 0.0);
        Ok(())
    }

    fn score(&mut self) -> Result<()> {
        let payoffs = coalition_payoffs(self.s, &self.current, self.coalition, self.weights)?;
        if let Some(floors) = self.floors {
            if self.coalition.members().any(|n| payoffs[n] < floors[n] - 1e-9 * (1.0 + floors[n].abs())) {
                return Ok(());
            }
        }
        let value: f64 = self.coalition.members().map(|n| payoffs[n]).sum();
        // strict improvement only: the first maximizer met is the lexicographically smallest
        if self.best.as_ref().is_none_or(|b| value > b.value) {
            self.best = Some(OracleOutcome { value, allocation: self.current.clone(), payoffs });
        }
        Ok(())
    }
}

/// Every `bound - sum(subset of others)` that lands in `[0, top]`.
fn remainders(bound: f64, others: &[f64], top: f64, out: &mut Vec<f64>) {
    for mask in 0u32..(1 << others.len()) {
        let used: f64 = others.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).map(|(_, v)| v).sum();
        let v = bound - used;
        if (0.0..=top).contains(&v) {
            out.push(v);
        }
    }
}

fn lattice(step: f64, request: f64, capacity: f64, row_requests: &[f64], col_capacities: &[f64]) -> Vec<f64> {
    let top = request.min(capacity);
    let mut values: Vec<f64> = (0..).map(|j| j as f64 * step).take_while(|&v| v <= top + SLACK_EPS).collect();
    values.extend([request, capacity].into_iter().filter(|&v| v <= top));
    remainders(capacity, row_requests, top, &mut values);
    remainders(request, col_capacities, top, &mut values);
    values.sort_by(f64::total_cmp);
    values.dedup_by(|a, b| (*a - *b).abs() <= SLACK_EPS);
    values
}

fn build_search<'a>(
    s: &'a Scenario,
    coalition: Coalition,
    weights: &'a ObjectiveWeights,
    grid: &GridSpec,
    floors: Option<&'a [f64]>,
) -> Result<Search<'a>> {
    if !(grid.step > 0.0 && grid.step.is_finite()) || grid.max_cells == 0 {
        return Err(Error::InvalidSettings(format!("grid step and max_cells must be positive: {grid:?}")));
    }
    s.check_coalition(coalition)?;
    weights.check(s)?;
    if let Some(v) = crate::model::validate_scenario(s).first() {
        return Err(Error::InvalidScenario(v.to_string()));
    }
    let apps = s.coalition_apps(coalition);
    let requests = s.requests();
    let k_res = s.num_resources();
    let mut vars = Vec::new();
    // host, then application, then resource: the allocation's own entry order
    for host in coalition.members() {
        for &app in &apps {
            for resource in 0..k_res {
                let request = requests[app * k_res + resource];
                let capacity = s.providers[host].capacity[resource];
                if request > 0.0 && capacity > 0.0 {
                    vars.push(Var { host, app, resource, request, capacity, base: Vec::new() });
                }
            }
        }
    }
    if vars.len() > MAX_VARIABLES {
        return Err(Error::OracleTooLarge {
            reason: format!("{} free variables (at most {MAX_VARIABLES})", vars.len()),
        });
    }
    for j in 0..vars.len() {
        let v = &vars[j];
        let row: Vec<f64> =
            vars.iter().enumerate().filter(|&(o, w)| o != j && w.host == v.host && w.resource == v.resource).map(|(_, w)| w.request).collect();
        let col: Vec<f64> =
            vars.iter().enumerate().filter(|&(o, w)| o != j && w.app == v.app && w.resource == v.resource).map(|(_, w)| w.capacity).collect();
        vars[j].base = lattice(grid.step, v.request, v.capacity, &row, &col);
    }
    let cells = vars.iter().try_fold(1u64, |acc, v| acc.checked_mul(v.base.len() as u64 + 1));
    match cells {
        Some(c) if c <= grid.max_cells => {}
        _ => {
            let estimate = vars.iter().map(|v| (v.base.len() + 1) as f64).product::<f64>();
            return Err(Error::OracleTooLarge {
                reason: format!("about {estimate:.3e} grid cells (limit {})", grid.max_cells),
            });
        }
    }
    Ok(Search {
        s,
        coalition,
        weights,
        vars,
        floors,
        row_used: vec![0.0; s.num_providers() * k_res],
        col_used: vec![0.0; s.num_apps() * k_res],
        current: Allocation::zeros(s, coalition),
        best: None,
    })
}

/// Best lattice allocation for `coalition`, maximizing the summed member payoffs.
pub fn oracle_maximize(s: &Scenario, coalition: Coalition, weights: &ObjectiveWeights, grid: &GridSpec) -> Result<OracleOutcome> {
    let mut search = build_search(s, coalition, weights, grid, None)?;
    search.visit(0)?;
    Ok(search.best.expect("the zero allocation is always on the lattice"))
}

/// Best grand-coalition lattice allocation whose payoffs all reach the
/// oracle's own standalone values.
pub fn oracle_core_allocation(s: &Scenario, weights: &ObjectiveWeights, grid: &GridSpec) -> Result<OracleOutcome> {
    let n = s.num_providers();
    let mut floors = vec![0.0; n];
    for (p, floor) in floors.iter_mut().enumerate() {
        *floor = oracle_maximize(s, Coalition::singleton(p), weights, grid)?.value;
    }
    let mut search = build_search(s, s.grand_coalition(), weights, grid, Some(&floors))?;
    search.visit(0)?;
    search.best.ok_or(Error::OracleNoRationalPoint)
}
