//! Domain types: providers, applications, resource kinds, scenarios and
//! allocation tensors, plus scenario validation and the feasibility report.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::utility::UtilityConfig;

/// A set of providers encoded as a bitmask over provider indices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coalition(u32);

impl Coalition {
    /// Largest number of providers a coalition bitmask can address.
    pub const MAX_PLAYERS: usize = 16;

    pub const EMPTY: Coalition = Coalition(0);

    pub fn from_bits(bits: u32) -> Self {
        Coalition(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn singleton(n: usize) -> Self {
        Coalition(1 << n)
    }

    /// All providers `0..n`.
    pub fn grand(n: usize) -> Self {
        if n >= 32 {
            Coalition(u32::MAX)
        } else {
            Coalition((1u32 << n) - 1)
        }
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> Self {
        Coalition(members.into_iter().fold(0, |acc, n| acc | (1 << n)))
    }

    pub fn contains(self, n: usize) -> bool {
        n < 32 && self.0 & (1 << n) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn with(self, n: usize) -> Self {
        Coalition(self.0 | (1 << n))
    }

    pub fn without(self, n: usize) -> Self {
        Coalition(self.0 & !(1 << n))
    }

    pub fn union(self, other: Coalition) -> Self {
        Coalition(self.0 | other.0)
    }

    pub fn intersects(self, other: Coalition) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    /// Member indices in ascending order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |n| bits & (1 << n) != 0)
    }

    /// Every subset of `self`, including the empty set and `self`, in
    /// increasing bitmask order.
    pub fn subsets(self) -> impl Iterator<Item = Coalition> {
        let full = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full { None } else { Some((cur.wrapping_sub(full)) & full) };
            Some(Coalition(cur))
        })
    }
}

impl fmt::Display for Coalition {
    /// One-based member list, e.g. `{1, 2}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (pos, n) in self.members().enumerate() {
            if pos > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", n + 1)?;
        }
        f.write_str("}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceKind {
    pub index: usize,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApplicationSpec {
    pub id: u64,
    pub owner: usize,
    pub request: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub id: usize,
    pub capacity: Vec<f64>,
    pub native_apps: Vec<ApplicationSpec>,
    pub weight_native: f64,
    pub weight_foreign: f64,
    pub utility: UtilityConfig,
}

/// A complete problem instance. Applications are addressed by a dense global
/// index: providers in order, then each provider's `native_apps` in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub providers: Vec<ProviderSpec>,
    pub resource_kinds: Vec<ResourceKind>,
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn num_providers(&self) -> usize {
        self.providers.len()
    }

    pub fn num_resources(&self) -> usize {
        self.resource_kinds.len()
    }

    pub fn num_apps(&self) -> usize {
        self.providers.iter().map(|p| p.native_apps.len()).sum()
    }

    /// Applications in global index order.
    pub fn apps(&self) -> impl Iterator<Item = &ApplicationSpec> {
        self.providers.iter().flat_map(|p| p.native_apps.iter())
    }

    /// Global index range of provider `n`'s native applications.
    pub fn app_range(&self, n: usize) -> std::ops::Range<usize> {
        let start: usize = self.providers[..n].iter().map(|p| p.native_apps.len()).sum();
        start..start + self.providers[n].native_apps.len()
    }

    /// Owner of every application, by global index.
    pub fn owners(&self) -> Vec<usize> {
        self.providers
            .iter()
            .enumerate()
            .flat_map(|(n, p)| std::iter::repeat_n(n, p.native_apps.len()))
            .collect()
    }

    /// Flattened request matrix, `requests[i * K + k]`.
    pub fn requests(&self) -> Vec<f64> {
        self.apps().flat_map(|a| a.request.iter().copied()).collect()
    }

    pub fn grand_coalition(&self) -> Coalition {
        Coalition::grand(self.num_providers())
    }

    pub fn check_provider(&self, n: usize) -> Result<()> {
        if n < self.num_providers() {
            Ok(())
        } else {
            Err(Error::UnknownProvider { id: n, count: self.num_providers() })
        }
    }

    pub fn check_coalition(&self, coalition: Coalition) -> Result<()> {
        if coalition.is_empty() {
            return Err(Error::EmptyCoalition);
        }
        if !coalition.is_subset_of(self.grand_coalition()) {
            return Err(Error::CoalitionOutOfRange {
                coalition: coalition.bits(),
                providers: self.num_providers(),
            });
        }
        Ok(())
    }

    /// Global indices of every application owned by a member of `coalition`.
    pub fn coalition_apps(&self, coalition: Coalition) -> Vec<usize> {
        coalition.members().flat_map(|n| self.app_range(n)).collect()
    }
}

/// A single invariant violation with a path to the offending field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Returns every invariant violation in `s`; an empty list means the scenario is valid.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |path: String, message: String| out.push(Violation { path, message });
    let k = s.num_resources();

    if s.providers.is_empty() {
        push("providers".into(), "at least one provider is required".into());
    }
    if s.providers.len() > Coalition::MAX_PLAYERS {
        push(
            "providers".into(),
            format!("at most {} providers are supported", Coalition::MAX_PLAYERS),
        );
    }
    if k == 0 {
        push("resource_kinds".into(), "at least one resource kind is required".into());
    }
    for (pos, kind) in s.resource_kinds.iter().enumerate() {
        if kind.index != pos {
            push(
                format!("resource_kinds[{pos}].index"),
                format!("expected dense index {pos}, found {}", kind.index),
            );
        }
        if kind.label.trim().is_empty() {
            push(format!("resource_kinds[{pos}].label"), "label is empty".into());
        }
    }

    let mut seen_ids: HashMap<u64, usize> = HashMap::new();
    for (pos, p) in s.providers.iter().enumerate() {
        let base = format!("providers[{pos}]");
        if p.id != pos {
            push(format!("{base}.id"), format!("expected dense id {pos}, found {}", p.id));
        }
        if p.capacity.len() != k {
            push(
                format!("{base}.capacity"),
                format!("expected {k} entries, found {}", p.capacity.len()),
            );
        }
        for (r, &c) in p.capacity.iter().enumerate() {
            if !c.is_finite() || c < 0.0 {
                push(format!("{base}.capacity[{r}]"), format!("capacity {c} must be finite and non-negative"));
            }
        }
        for (name, w) in [("weight_native", p.weight_native), ("weight_foreign", p.weight_foreign)] {
            if !w.is_finite() || w < 0.0 {
                push(format!("{base}.{name}"), format!("weight {w} must be finite and non-negative"));
            }
        }
        if let Err(msg) = p.utility.check() {
            push(format!("{base}.utility"), msg);
        }
        if p.native_apps.is_empty() {
            push(format!("{base}.apps"), "provider has no native applications".into());
        }
        for (a_pos, app) in p.native_apps.iter().enumerate() {
            let app_path = format!("{base}.apps[{a_pos}]");
            if app.owner != pos {
                push(
                    format!("{app_path}.owner"),
                    format!("app {} lists owner {} but is native to provider {pos}", app.id, app.owner),
                );
            }
            if let Some(first) = seen_ids.insert(app.id, pos) {
                push(
                    format!("{app_path}.id"),
                    format!("duplicate app id {} (also listed by provider {first})", app.id),
                );
            }
            if app.request.len() != k {
                push(
                    format!("{app_path}.request"),
                    format!("expected {k} entries, found {}", app.request.len()),
                );
            }
            for (r, &q) in app.request.iter().enumerate() {
                if !q.is_finite() || q < 0.0 {
                    push(format!("{app_path}.request[{r}]"), format!("request {q} must be finite and non-negative"));
                }
            }
            if !app.request.is_empty() && app.request.iter().all(|&q| q <= 0.0) {
                push(format!("{app_path}.request"), format!("app {} has an all-zero request", app.id));
            }
        }
    }
    out
}

/// Dense allocation tensor `x[n][i][k]`: amount of resource `k` at provider
/// `n` given to application `i` (global index).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    providers: usize,
    apps: usize,
    resources: usize,
    coalition: Coalition,
    entries: Vec<f64>,
}

impl Allocation {
    pub fn zeros(s: &Scenario, coalition: Coalition) -> Self {
        Self::with_dims(s.num_providers(), s.num_apps(), s.num_resources(), coalition)
    }

    pub fn with_dims(providers: usize, apps: usize, resources: usize, coalition: Coalition) -> Self {
        Allocation {
            providers,
            apps,
            resources,
            coalition,
            entries: vec![0.0; providers * apps * resources],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.providers, self.apps, self.resources)
    }

    pub fn coalition(&self) -> Coalition {
        self.coalition
    }

    #[inline]
    pub fn index(&self, n: usize, i: usize, k: usize) -> usize {
        (n * self.apps + i) * self.resources + k
    }

    #[inline]
    pub fn get(&self, n: usize, i: usize, k: usize) -> f64 {
        self.entries[self.index(n, i, k)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, i: usize, k: usize, value: f64) {
        let idx = self.index(n, i, k);
        self.entries[idx] = value;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    /// Total amount of resource `k` given to application `i` by all providers.
    pub fn total_to_app(&self, i: usize, k: usize) -> f64 {
        (0..self.providers).map(|n| self.get(n, i, k)).sum()
    }

    /// Total amount of resource `k` handed out by provider `n`.
    pub fn total_from_provider(&self, n: usize, k: usize) -> f64 {
        (0..self.apps).map(|i| self.get(n, i, k)).sum()
    }

    /// Element-wise sum of two allocations, spanning the union of both coalitions.
    pub fn merged(&self, other: &Allocation) -> Allocation {
        assert_eq!(self.dims(), other.dims(), "allocation dimensions differ");
        Allocation {
            providers: self.providers,
            apps: self.apps,
            resources: self.resources,
            coalition: self.coalition.union(other.coalition),
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn check_dims(&self, s: &Scenario) -> Result<()> {
        let expected = (s.num_providers(), s.num_apps(), s.num_resources());
        for (axis, want, got) in [
            ("provider", expected.0, self.providers),
            ("application", expected.1, self.apps),
            ("resource", expected.2, self.resources),
        ] {
            if want != got {
                return Err(Error::DimensionMismatch { axis, expected: want, found: got });
            }
        }
        Ok(())
    }
}

/// Largest signed residual of each constraint family; positive means violated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max_{n,k} (sum_i x[n][i][k] - C[n][k])`
    pub capacity: f64,
    /// `max_{i,k} (sum_n x[n][i][k] - r[i][k])`
    pub demand: f64,
    /// `max (-x[n][i][k])`
    pub nonnegativity: f64,
    /// Largest absolute entry outside the allocation's coalition.
    pub outside_coalition: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.capacity.max(self.demand).max(self.nonnegativity).max(self.outside_coalition)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

pub fn feasibility_residuals(s: &Scenario, a: &Allocation) -> Result<Residuals> {
    a.check_dims(s)?;
    let (n_prov, n_apps, k_res) = a.dims();
    let requests = s.requests();
    let owners = s.owners();

    let mut capacity = f64::NEG_INFINITY;
    for (n, p) in s.providers.iter().enumerate() {
        for k in 0..k_res {
            capacity = capacity.max(a.total_from_provider(n, k) - p.capacity[k]);
        }
    }
    let mut demand = f64::NEG_INFINITY;
    for i in 0..n_apps {
        for k in 0..k_res {
            demand = demand.max(a.total_to_app(i, k) - requests[i * k_res + k]);
        }
    }
    let nonnegativity = a.entries.iter().fold(0.0f64, |m, &x| m.max(-x));
    let coalition = a.coalition();
    let mut outside = 0.0f64;
    for n in 0..n_prov {
        for i in 0..n_apps {
            if coalition.contains(n) && coalition.contains(owners[i]) {
                continue;
            }
            for k in 0..k_res {
                outside = outside.max(a.get(n, i, k).abs());
            }
        }
    }
    Ok(Residuals { capacity, demand, nonnegativity, outside_coalition: outside })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::UtilityConfig;

    fn provider(id: usize, capacity: Vec<f64>, apps: Vec<(u64, Vec<f64>)>) -> ProviderSpec {
        ProviderSpec {
            id,
            capacity,
            native_apps: apps
                .into_iter()
                .map(|(app_id, request)| ApplicationSpec { id: app_id, owner: id, request })
                .collect(),
            weight_native: 1.0,
            weight_foreign: 1.0,
            utility: UtilityConfig::linear(),
        }
    }

    fn kinds(k: usize) -> Vec<ResourceKind> {
        (0..k).map(|index| ResourceKind { index, label: format!("r{index}") }).collect()
    }

    #[test]
    fn coalition_subsets_and_display() {
        let c = Coalition::from_members([0, 2]);
        let subsets: Vec<u32> = c.subsets().map(Coalition::bits).collect();
        assert_eq!(subsets, vec![0, 1, 4, 5]);
        assert_eq!(c.to_string(), "{1, 3}");
        assert_eq!(Coalition::grand(3).bits(), 0b111);
        assert!(Coalition::singleton(1).is_subset_of(Coalition::grand(2)));
    }

    #[test]
    fn valid_single_provider() {
        let s = Scenario {
            providers: vec![provider(0, vec![5.0; 3], vec![(1, vec![1.0; 3])])],
            resource_kinds: kinds(3),
            seed: None,
        };
        assert!(validate_scenario(&s).is_empty());
    }

    #[test]
    fn zero_request_is_reported() {
        let s = Scenario {
            providers: vec![provider(0, vec![5.0; 3], vec![(3, vec![0.0; 3])])],
            resource_kinds: kinds(3),
            seed: None,
        };
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("app 3 has an all-zero request"), "{v:?}");
    }

    #[test]
    fn duplicate_app_id_is_reported() {
        let s = Scenario {
            providers: vec![
                provider(0, vec![5.0], vec![(7, vec![1.0])]),
                provider(1, vec![5.0], vec![(7, vec![2.0])]),
            ],
            resource_kinds: kinds(1),
            seed: None,
        };
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("duplicate app id 7"));
        assert_eq!(v[0].path, "providers[1].apps[0].id");
    }

    #[test]
    fn residual_examples() {
        let one = Scenario {
            providers: vec![provider(0, vec![5.0], vec![(0, vec![4.0]), (1, vec![4.0])])],
            resource_kinds: kinds(1),
            seed: None,
        };
        let zero = Allocation::zeros(&one, Coalition::grand(1));
        assert!(feasibility_residuals(&one, &zero).unwrap().max() <= 0.0);

        let mut a = zero.clone();
        a.set(0, 0, 0, 3.0);
        a.set(0, 1, 0, 3.0);
        let r = feasibility_residuals(&one, &a).unwrap();
        assert_eq!(r.capacity, 1.0);

        let two = Scenario {
            providers: vec![
                provider(0, vec![10.0], vec![(0, vec![4.0])]),
                provider(1, vec![10.0], vec![(1, vec![1.0])]),
            ],
            resource_kinds: kinds(1),
            seed: None,
        };
        let mut a = Allocation::zeros(&two, Coalition::grand(2));
        a.set(0, 0, 0, 2.0);
        a.set(1, 0, 0, 3.0);
        assert_eq!(feasibility_residuals(&two, &a).unwrap().demand, 1.0);
    }

    #[test]
    fn residual_dimension_mismatch_names_axis() {
        let s = Scenario {
            providers: vec![provider(0, vec![5.0], vec![(0, vec![4.0])])],
            resource_kinds: kinds(1),
            seed: None,
        };
        let a = Allocation::with_dims(1, 2, 1, Coalition::grand(1));
        match feasibility_residuals(&s, &a) {
            Err(Error::DimensionMismatch { axis, .. }) => assert_eq!(axis, "application"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
