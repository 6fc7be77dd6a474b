//! Coalition enumeration and executable checks of the game's properties:
//! superadditivity, convexity, core membership and Pareto dominance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Allocation, Coalition, Scenario};
use crate::solver::{coalition_value_warm, Problem, SolverSettings};
use crate::utility::ObjectiveWeights;

/// Default cap on the number of providers for full enumeration (`2^N - 1` solves).
pub const DEFAULT_MAX_PLAYERS: usize = 10;

/// Absolute tolerance used by every property check, scaled by `1 + |v|`.
pub const CHECK_TOLERANCE: f64 = 1e-6;

fn tolerance(scale: f64) -> f64 {
    CHECK_TOLERANCE * (1.0 + scale.abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalitionEntry {
    pub value: f64,
    /// Payoff per provider, indexed by provider id; zero for non-members.
    pub payoffs: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub allocation: Option<Allocation>,
    pub converged: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoalitionValueTable {
    players: usize,
    entries: BTreeMap<Coalition, CoalitionEntry>,
}

impl CoalitionValueTable {
    pub fn new(players: usize) -> Self {
        CoalitionValueTable { players, entries: BTreeMap::new() }
    }

    /// Builds a table from `(members, payoffs)` rows; each value is the sum of
    /// the members' payoffs. Members are zero-based provider indices.
    pub fn from_payoff_rows<I, M>(players: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (M, Vec<f64>)>,
        M: IntoIterator<Item = usize>,
    {
        let mut table = Self::new(players);
        for (members, payoffs) in rows {
            let coalition = Coalition::from_members(members);
            if payoffs.len() != players {
                return Err(Error::LengthMismatch { left: payoffs.len(), right: players });
            }
            let value = coalition.members().map(|n| payoffs[n]).sum();
            table.insert(coalition, CoalitionEntry { value, payoffs, allocation: None, converged: true });
        }
        Ok(table)
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn grand(&self) -> Coalition {
        Coalition::grand(self.players)
    }

    pub fn insert(&mut self, coalition: Coalition, entry: CoalitionEntry) {
        self.entries.insert(coalition, entry);
    }

    pub fn get(&self, coalition: Coalition) -> Option<&CoalitionEntry> {
        self.entries.get(&coalition)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Coalition, &CoalitionEntry)> {
        self.entries.iter().map(|(c, e)| (*c, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `v(S)`, with `v(empty) = 0`.
    pub fn value(&self, coalition: Coalition) -> Result<f64> {
        if coalition.is_empty() {
            return Ok(0.0);
        }
        self.get(coalition).map(|e| e.value).ok_or_else(|| Error::IncompleteTable(coalition.to_string()))
    }

    pub fn require_complete(&self) -> Result<()> {
        for c in self.grand().subsets().skip(1) {
            if !self.entries.contains_key(&c) {
                return Err(Error::IncompleteTable(c.to_string()));
            }
        }
        Ok(())
    }

    /// Coalitions sorted by size, then by bitmask (the usual table layout).
    pub fn ordered(&self) -> Vec<Coalition> {
        let mut keys: Vec<Coalition> = self.entries.keys().copied().collect();
        keys.sort_by_key(|c| (c.len(), c.members().collect::<Vec<_>>()));
        keys
    }
}

/// Solves `v(S)` for every non-empty `S`. Larger coalitions are additionally
/// started from the best union of two already-solved complementary parts.
pub fn enumerate_coalitions(
    s: &Scenario,
    weights: &ObjectiveWeights,
    settings: &SolverSettings,
    max_n: usize,
) -> Result<CoalitionValueTable> {
    let n = s.num_providers();
    if n > max_n.min(Coalition::MAX_PLAYERS) {
        return Err(Error::TooManyPlayers { providers: n, cap: max_n.min(Coalition::MAX_PLAYERS) });
    }
    let mut order: Vec<Coalition> = s.grand_coalition().subsets().skip(1).collect();
    order.sort_by_key(|c| (c.len(), c.bits()));

    log::info!("enumerating {} coalitions of {n} providers", order.len());
    let mut table = CoalitionValueTable::new(n);
    let mut solved: BTreeMap<Coalition, Allocation> = BTreeMap::new();
    for coalition in order {
        let warm = best_split_union(s, weights, coalition, &solved);
        let rep = coalition_value_warm(s, coalition, weights, settings, warm.as_slice())?;
        if !rep.converged {
            log::warn!("coalition {coalition}: solver stopped before convergence");
        }
        solved.insert(coalition, rep.allocation.clone());
        table.insert(
            coalition,
            CoalitionEntry {
                value: rep.objective,
                payoffs: rep.per_provider_payoff,
                allocation: Some(rep.allocation),
                converged: rep.converged,
            },
        );
    }
    Ok(table)
}

fn best_split_union(
    s: &Scenario,
    weights: &ObjectiveWeights,
    coalition: Coalition,
    solved: &BTreeMap<Coalition, Allocation>,
) -> Option<Allocation> {
    if coalition.len() < 2 {
        return None;
    }
    let lowest = coalition.members().next()?;
    let problem = Problem::new(s, coalition, weights);
    let mut best: Option<(f64, Allocation)> = None;
    for part in coalition.subsets() {
        // each unordered split once: the part holding the lowest member
        if !part.contains(lowest) || part == coalition {
            continue;
        }
        let rest = Coalition::from_bits(coalition.bits() & !part.bits());
        let (Some(a), Some(b)) = (solved.get(&part), solved.get(&rest)) else { continue };
        let mut union = a.merged(b);
        // keep the coalition tag of the larger problem
        union = retag(union, coalition);
        let value = problem.objective(&problem.from_allocation(&union));
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, union));
        }
    }
    best.map(|(_, a)| a)
}

fn retag(a: Allocation, coalition: Coalition) -> Allocation {
    let (n, m, k) = a.dims();
    let mut out = Allocation::with_dims(n, m, k, coalition);
    out.entries_mut().copy_from_slice(a.entries());
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperadditivityViolation {
    pub left: Coalition,
    pub right: Coalition,
    pub union_value: f64,
    pub parts_value: f64,
}

/// Disjoint pairs `(S1, S2)` with `v(S1 u S2) < v(S1) + v(S2)` beyond tolerance.
pub fn check_superadditivity(t: &CoalitionValueTable) -> Result<Vec<SuperadditivityViolation>> {
    t.require_complete()?;
    let mut out = Vec::new();
    let grand = t.grand();
    for left in grand.subsets().skip(1) {
        let rest = Coalition::from_bits(grand.bits() & !left.bits());
        for right in rest.subsets().skip(1) {
            if right.bits() < left.bits() {
                continue;
            }
            let union_value = t.value(left.union(right))?;
            let parts_value = t.value(left)? + t.value(right)?;
            if union_value < parts_value - tolerance(union_value.abs().max(parts_value.abs())) {
                out.push(SuperadditivityViolation { left, right, union_value, parts_value });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityViolation {
    pub smaller: Coalition,
    pub larger: Coalition,
    pub player: usize,
    pub marginal_smaller: f64,
    pub marginal_larger: f64,
}

/// Triples `(S1, S2, n)`, `S1 ⊆ S2 ⊆ N \ {n}`, where `n` adds more to `S1`
/// than to `S2` beyond tolerance. `S1` ranges over the empty set too.
pub fn check_convexity(t: &CoalitionValueTable) -> Result<Vec<ConvexityViolation>> {
    t.require_complete()?;
    let mut out = Vec::new();
    let grand = t.grand();
    for player in 0..t.players() {
        let others = grand.without(player);
        for larger in others.subsets() {
            let marginal_larger = t.value(larger.with(player))? - t.value(larger)?;
            for smaller in larger.subsets() {
                if smaller == larger {
                    continue;
                }
                let marginal_smaller = t.value(smaller.with(player))? - t.value(smaller)?;
                let scale = t.value(larger.with(player))?;
                if marginal_smaller > marginal_larger + tolerance(scale) {
                    out.push(ConvexityViolation { smaller, larger, player, marginal_smaller, marginal_larger });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreCheck {
    pub in_core: bool,
    pub individually_rational: bool,
    pub group_rational: bool,
    pub blocking_coalitions: Vec<Coalition>,
}

/// Tests `grand_payoffs` against every proper coalition's stored payoff
/// vector: `S` blocks when each of its members gets strictly more in `S`.
pub fn check_core_membership(t: &CoalitionValueTable, grand_payoffs: &[f64]) -> Result<CoreCheck> {
    if grand_payoffs.len() != t.players() {
        return Err(Error::LengthMismatch { left: grand_payoffs.len(), right: t.players() });
    }
    t.require_complete()?;
    let grand = t.grand();
    let grand_value = t.value(grand)?;
    let total: f64 = grand_payoffs.iter().sum();
    let group_rational = (total - grand_value).abs() <= tolerance(grand_value);

    let mut individually_rational = true;
    for n in 0..t.players() {
        let alone = t.value(Coalition::singleton(n))?;
        if grand_payoffs[n] < alone - tolerance(alone) {
            individually_rational = false;
        }
    }

    let mut blocking_coalitions = Vec::new();
    for coalition in grand.subsets().skip(1) {
        if coalition == grand {
            continue;
        }
        let entry = t.get(coalition).ok_or_else(|| Error::IncompleteTable(coalition.to_string()))?;
        let blocks = coalition.members().all(|n| entry.payoffs[n] > grand_payoffs[n] + tolerance(grand_payoffs[n]));
        if blocks {
            blocking_coalitions.push(coalition);
        }
    }
    Ok(CoreCheck {
        in_core: individually_rational && group_rational && blocking_coalitions.is_empty(),
        individually_rational,
        group_rational,
        blocking_coalitions,
    })
}

/// `a` dominates `b`: no component worse and at least one strictly better.
pub fn pareto_dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    let no_worse = a.iter().zip(b).all(|(x, y)| x >= y);
    let better = a.iter().zip(b).any(|(x, y)| x > y);
    Ok(no_worse && better)
}
