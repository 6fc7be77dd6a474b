//! Projected gradient ascent with a backtracking line search along the
//! projected direction. Accepted iterates never lower the objective.

use super::projection::Projector;

pub(crate) trait Smooth {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], g: &mut [f64]);
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct AscentParams {
    pub max_iters: usize,
    pub step_init: f64,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct AscentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const MIN_T: f64 = 1e-12;
const MAX_STEP: f64 = 1e6;

/// `x0` must already be feasible.
pub(crate) fn ascend<F: Smooth>(f: &F, projector: &Projector, x0: Vec<f64>, params: AscentParams) -> AscentOutcome {
    let dim = x0.len();
    let mut x = x0;
    let mut value = f.value(&x);
    if dim == 0 {
        return AscentOutcome { x, value, iterations: 0, converged: true };
    }
    let mut g = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let mut p = vec![0.0; dim];
    let mut d = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    let mut step = params.step_init;
    let mut pg_norm = f64::INFINITY;

    for it in 0..params.max_iters {
        f.gradient(&x, &mut g);
        for j in 0..dim {
            y[j] = x[j] + step * g[j];
        }
        projector.project(&y, &mut p);
        let mut slope = 0.0;
        let mut dmax = 0.0f64;
        for j in 0..dim {
            d[j] = p[j] - x[j];
            slope += g[j] * d[j];
            dmax = dmax.max(d[j].abs());
        }
        // |P(x + a g) - x| / min(a, 1) bounds the unit-step gradient map from above
        pg_norm = dmax / step.min(1.0);
        if pg_norm < params.tol || slope <= 1e-13 * (1.0 + value.abs()) {
            return AscentOutcome { x, value, iterations: it, converged: true };
        }

        let mut t = 1.0;
        let accepted = loop {
            for j in 0..dim {
                trial[j] = x[j] + t * d[j];
            }
            let v = f.value(&trial);
            if v >= value + ARMIJO * t * slope {
                break Some(v);
            }
            t *= 0.5;
            if t < MIN_T {
                break None;
            }
        };
        match accepted {
            Some(v) => {
                std::mem::swap(&mut x, &mut trial);
                value = v;
                step = if t == 1.0 { (step * 2.0).min(MAX_STEP) } else { (step * t.max(0.1)).max(1e-8) };
            }
            // no ascent left along the projected arc at working precision
            None => return AscentOutcome { x, value, iterations: it, converged: true },
        }
    }
    AscentOutcome { x, value, iterations: params.max_iters, converged: pg_norm < params.tol }
}
