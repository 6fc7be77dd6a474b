//! Euclidean projection onto the allocation polytope
//!
//! ```text
//! { x : 0 <= x_v <= ub_v,  sum_{v in row} x_v <= C_row,  sum_{v in col} x_v <= r_col }
//! ```
//!
//! Each family of groups is a product of "box plus budget" sets with an exact
//! projection; the intersection is handled with Dykstra's alternating
//! projections, followed by a row rescale so the returned point is feasible
//! even when Dykstra stops early.

use super::problem::{Group, Problem};

const MAX_SWEEPS: usize = 2000;
const SWEEP_TOL: f64 = 1e-12;

/// Projects `y` onto `{ 0 <= x <= upper, sum x <= budget }`, writing into `out`.
/// `upper` may hold `f64::INFINITY`.
pub(crate) fn project_budget_box(y: &[f64], upper: &[f64], budget: f64, out: &mut [f64]) {
    let clipped = |lambda: f64, out: &mut [f64]| -> f64 {
        let mut sum = 0.0;
        for ((o, &yv), &u) in out.iter_mut().zip(y).zip(upper) {
            *o = (yv - lambda).clamp(0.0, u);
            sum += *o;
        }
        sum
    };
    if clipped(0.0, out) <= budget {
        return;
    }
    // sum(lambda) is piecewise linear and non-increasing; its kinks sit at
    // y - upper and y.
    let mut kinks: Vec<f64> = y
        .iter()
        .zip(upper)
        .flat_map(|(&yv, &u)| [yv - u, yv])
        .filter(|&l| l > 0.0 && l.is_finite())
        .collect();
    kinks.push(0.0);
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();

    let total_at = |lambda: f64| -> f64 { y.iter().zip(upper).map(|(&yv, &u)| (yv - lambda).clamp(0.0, u)).sum() };
    // largest kink whose total still exceeds the budget
    let (mut lo, mut hi) = (0usize, kinks.len() - 1);
    if total_at(kinks[hi]) > budget {
        lo = hi;
    } else {
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if total_at(kinks[mid]) > budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let l0 = kinks[lo];
    let f0 = total_at(l0);
    let lambda = if lo == kinks.len() - 1 {
        // beyond the last kink only uncapped coordinates with y > l0 remain active
        let active = y.iter().zip(upper).filter(|(&yv, &u)| yv - l0 > 0.0 && yv - l0 < u).count();
        l0 + (f0 - budget) / active.max(1) as f64
    } else {
        let l1 = kinks[hi];
        let f1 = total_at(l1);
        l0 + (f0 - budget) * (l1 - l0) / (f0 - f1)
    };
    let sum = clipped(lambda, out);
    if sum > budget && sum > 0.0 {
        let scale = budget / sum;
        out.iter_mut().for_each(|o| *o *= scale);
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Projector {
    rows: Vec<Group>,
    cols: Vec<Group>,
    upper: Vec<f64>,
    /// Every column holds one variable, so the row step alone is exact.
    rows_exact: bool,
}

impl Projector {
    pub(crate) fn new(problem: &Problem) -> Self {
        let upper: Vec<f64> = problem.vars.iter().map(|v| v.request).collect();
        let rows_exact = problem.cols.iter().all(|c| c.vars.len() == 1);
        Projector { rows: problem.rows.clone(), cols: problem.cols.clone(), upper, rows_exact }
    }

    fn project_groups(groups: &[Group], upper: Option<&[f64]>, y: &[f64], out: &mut [f64], buf: &mut Buffers) {
        for g in groups {
            buf.gy.clear();
            buf.gu.clear();
            for &id in &g.vars {
                buf.gy.push(y[id]);
                buf.gu.push(upper.map_or(f64::INFINITY, |u| u[id]));
            }
            buf.go.resize(g.vars.len(), 0.0);
            project_budget_box(&buf.gy, &buf.gu, g.bound, &mut buf.go);
            for (&id, &v) in g.vars.iter().zip(&buf.go) {
                out[id] = v;
            }
        }
    }

    /// Writes the projection of `y` into `out`; returns the number of sweeps used.
    ///
    /// Dykstra's iteration, written as block coordinate ascent on the dual
    /// with `dual` holding the column-family multiplier.
    pub(crate) fn project(&self, y: &[f64], out: &mut [f64]) -> usize {
        let mut buf = Buffers::default();
        if self.rows_exact {
            Self::project_groups(&self.rows, Some(&self.upper), y, out, &mut buf);
            return 1;
        }
        let dim = y.len();
        let mut dual = vec![0.0; dim];
        let mut tmp = vec![0.0; dim];
        let mut a = vec![0.0; dim];
        let mut sweeps = 0;
        while sweeps < MAX_SWEEPS {
            sweeps += 1;
            for j in 0..dim {
                tmp[j] = y[j] - dual[j];
            }
            Self::project_groups(&self.rows, Some(&self.upper), &tmp, &mut a, &mut buf);
            for j in 0..dim {
                // y - (row multiplier)
                tmp[j] = a[j] + dual[j];
            }
            Self::project_groups(&self.cols, None, &tmp, out, &mut buf);
            // Both half-steps carry exact normal-cone multipliers, so once the
            // row and column points agree the result is the projection. The
            // column point alone can sit still for many sweeps before that.
            let mut gap = 0.0f64;
            let mut scale = 1.0f64;
            for j in 0..dim {
                dual[j] = tmp[j] - out[j];
                gap = gap.max((a[j] - out[j]).abs());
                scale = scale.max(out[j].abs());
            }
            if gap <= SWEEP_TOL * scale {
                break;
            }
        }
        self.repair(out);
        sweeps
    }

    /// Scales down any row that still exceeds its capacity. Column sums only
    /// shrink, so the result satisfies every constraint.
    fn repair(&self, x: &mut [f64]) {
        for row in &self.rows {
            let sum: f64 = row.vars.iter().map(|&id| x[id]).sum();
            if sum > row.bound {
                let scale = row.bound / sum;
                for &id in &row.vars {
                    x[id] *= scale;
                }
            }
        }
    }
}

#[derive(Default)]
struct Buffers {
    gy: Vec<f64>,
    gu: Vec<f64>,
    go: Vec<f64>,
}
