//! Flattened view of one coalition problem: only the decision variables that
//! can be non-zero are kept, together with the constant utility terms
//! contributed by the structurally-zero ones.

use crate::model::{Allocation, Coalition, Scenario};
use crate::utility::{ObjectiveWeights, UtilityConfig};

#[derive(Clone, Debug)]
pub(crate) struct Var {
    /// Index into the dense allocation tensor.
    pub slot: usize,
    pub host: usize,
    pub app: usize,
    pub resource: usize,
    pub owner: usize,
    pub request: f64,
    pub inv_request: f64,
    /// `w_host` for native pairs, `zeta_host` for guest pairs.
    pub weight: f64,
    pub utility: UtilityConfig,
}

/// Variables sharing one linear `sum <= bound` constraint.
#[derive(Clone, Debug)]
pub(crate) struct Group {
    pub vars: Vec<usize>,
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct Problem {
    pub coalition: Coalition,
    pub providers: usize,
    pub apps: usize,
    pub resources: usize,
    pub vars: Vec<Var>,
    /// Utility each provider collects from pairs that are pinned at zero.
    pub offsets: Vec<f64>,
    /// One group per (provider, resource): capacity.
    pub rows: Vec<Group>,
    /// One group per (application, resource): demand cap.
    pub cols: Vec<Group>,
}

impl Problem {
    pub fn new(s: &Scenario, coalition: Coalition, weights: &ObjectiveWeights) -> Self {
        let providers = s.num_providers();
        let apps = s.num_apps();
        let resources = s.num_resources();
        let owners = s.owners();
        let requests = s.requests();
        let member_apps = s.coalition_apps(coalition);

        let mut vars = Vec::new();
        let mut offsets = vec![0.0; providers];
        let mut rows = Vec::new();
        let mut col_vars: Vec<Vec<usize>> = vec![Vec::new(); apps * resources];

        for host in coalition.members() {
            let spec = &s.providers[host];
            for k in 0..resources {
                let cap = spec.capacity[k];
                let mut row = Vec::new();
                for &i in &member_apps {
                    let owner = owners[i];
                    let r = requests[i * resources + k];
                    let weight = if owner == host { weights.w[host] } else { weights.zeta[host] };
                    if r > 0.0 && cap > 0.0 {
                        let id = vars.len();
                        vars.push(Var {
                            slot: (host * apps + i) * resources + k,
                            host,
                            app: i,
                            resource: k,
                            owner,
                            request: r,
                            inv_request: 1.0 / r,
                            weight,
                            utility: spec.utility,
                        });
                        row.push(id);
                        col_vars[i * resources + k].push(id);
                    } else {
                        offsets[host] += weight * spec.utility.term(0.0, r);
                    }
                }
                if !row.is_empty() {
                    rows.push(Group { vars: row, bound: cap });
                }
            }
        }
        let cols = col_vars
            .into_iter()
            .enumerate()
            .filter(|(_, v)| !v.is_empty())
            .map(|(slot, v)| Group { vars: v, bound: requests[slot] })
            .collect();

        Problem { coalition, providers, apps, resources, vars, offsets, rows, cols }
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    /// Per-provider payoffs (zero outside the coalition).
    pub fn payoffs(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.offsets.clone();
        for (v, &xv) in self.vars.iter().zip(x) {
            out[v.host] += v.weight * v.utility.term(xv, v.request);
            out[v.owner] += xv * v.inv_request;
        }
        out
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut total: f64 = self.offsets.iter().sum();
        for (v, &xv) in self.vars.iter().zip(x) {
            total += v.weight * v.utility.term(xv, v.request) + xv * v.inv_request;
        }
        total
    }

    /// Gradient of `sum_n (1 + m_n) * payoff_n`, where `m` are optional
    /// per-provider multipliers on top of the plain objective.
    pub fn weighted_gradient(&self, x: &[f64], multipliers: Option<&[f64]>, g: &mut [f64]) {
        for ((v, &xv), gv) in self.vars.iter().zip(x).zip(g.iter_mut()) {
            let (mh, mo) = match multipliers {
                Some(m) => (m[v.host], m[v.owner]),
                None => (0.0, 0.0),
            };
            *gv = (1.0 + mh) * v.weight * v.utility.slope(xv, v.request) + (1.0 + mo) * v.inv_request;
        }
    }

    pub fn to_allocation(&self, x: &[f64]) -> Allocation {
        let mut a = Allocation::with_dims(self.providers, self.apps, self.resources, self.coalition);
        let entries = a.entries_mut();
        for (v, &xv) in self.vars.iter().zip(x) {
            entries[v.slot] = xv;
        }
        a
    }

    pub fn from_allocation(&self, a: &Allocation) -> Vec<f64> {
        self.vars.iter().map(|v| a.entries()[v.slot]).collect()
    }

    /// Deterministic start: providers in index order, then applications in
    /// index order, each take as much as the remaining capacity and demand allow.
    pub fn greedy_point(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        let mut col_left = vec![0.0; self.apps * self.resources];
        for col in &self.cols {
            let v = &self.vars[col.vars[0]];
            col_left[v.app * self.resources + v.resource] = col.bound;
        }
        for row in &self.rows {
            let mut left = row.bound;
            for &id in &row.vars {
                let v = &self.vars[id];
                let slot = v.app * self.resources + v.resource;
                let take = left.min(col_left[slot]).max(0.0);
                x[id] = take;
                left -= take;
                col_left[slot] -= take;
            }
        }
        x
    }

    /// Per-variable upper bound `min(request, capacity)`.
    pub fn upper_bounds(&self) -> Vec<f64> {
        let mut ub: Vec<f64> = self.vars.iter().map(|v| v.request).collect();
        for row in &self.rows {
            for &id in &row.vars {
                ub[id] = ub[id].min(row.bound);
            }
        }
        ub
    }
}
