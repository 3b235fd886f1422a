//! Multi-start gradient ascent for entropy-ratio objectives.
//!
//! Every objective here has the shape value(f) with f = exp(g), invariant
//! under f -> lambda f. Ascent runs in the log parameterization with g
//! pinned to mean zero under the reference measure, which removes the flat
//! scale direction. Gradients are central finite differences; the step size
//! adapts by doubling on success and halving on rejection. Restart r of a
//! run draws its start from `trial_rng(seed, r)`, so estimates can only grow
//! as the restart budget grows.

use crate::error::Result;
use crate::rng::{random_log_field, trial_rng, DENSITY_AMPLITUDES};
use crate::space::{Field, Measure};

/// Budget knobs for one maximization run.
#[derive(Debug, Clone, Copy)]
pub struct AscentBudget {
    pub restarts: usize,
    pub max_iters: usize,
}

impl Default for AscentBudget {
    fn default() -> Self {
        AscentBudget {
            restarts: 6,
            max_iters: 80,
        }
    }
}

impl AscentBudget {
    /// Interpret a single CLI-style budget integer as a restart count.
    pub fn from_restarts(restarts: usize) -> Self {
        AscentBudget {
            restarts: restarts.max(1),
            ..Self::default()
        }
    }
}

/// Best value found together with the witness (in log space) and whether the
/// final ascent stalled rather than running out of iterations.
#[derive(Debug, Clone)]
pub struct AscentOutcome {
    pub value: f64,
    pub log_witness: Field,
    pub converged: bool,
    pub evals: usize,
}

const GRAD_STEP: f64 = 1e-5;
const MIN_STEP: f64 = 1e-10;
const IMPROVEMENT_TOL: f64 = 1e-11;

fn center(mu: &Measure, g: &Field) -> Field {
    let m: f64 = mu
        .weights()
        .iter()
        .zip(g.values())
        .map(|(&w, &v)| w * v)
        .sum();
    g.map(|v| v - m)
}

/// Maximize `objective` over log-fields, starting from each seeded start and
/// `budget.restarts` random starts with cycling amplitudes.
///
/// The objective receives a centered log-field g and must return the ratio
/// value for f = exp(g), or any non-finite number to reject the point. Ties
/// keep the first maximizer found, so the outcome is deterministic in
/// (seed, budget, seeded starts).
pub fn maximize_ratio(
    mu: &Measure,
    objective: &mut dyn FnMut(&Field) -> Result<f64>,
    seeded_starts: &[Field],
    budget: AscentBudget,
    seed: u64,
) -> Result<AscentOutcome> {
    let mut best: Option<AscentOutcome> = None;
    let consider = |outcome: AscentOutcome, best: &mut Option<AscentOutcome>| {
        let replace = match best {
            None => true,
            Some(b) => outcome.value > b.value,
        };
        if replace {
            *best = Some(outcome);
        }
    };
    let mut total_evals = 0usize;
    for (run, start) in seeded_starts.iter().enumerate() {
        let outcome = ascend(mu, objective, start, budget.max_iters, &mut total_evals)?;
        let _ = run;
        consider(outcome, &mut best);
    }
    for r in 0..budget.restarts {
        let amplitude = DENSITY_AMPLITUDES[r % DENSITY_AMPLITUDES.len()];
        let start = random_log_field(mu.space(), amplitude, &mut trial_rng(seed, r as u64));
        let outcome = ascend(mu, objective, &start, budget.max_iters, &mut total_evals)?;
        consider(outcome, &mut best);
    }
    let mut best = best.expect("at least one restart runs");
    best.evals = total_evals;
    Ok(best)
}

fn ascend(
    mu: &Measure,
    objective: &mut dyn FnMut(&Field) -> Result<f64>,
    start: &Field,
    max_iters: usize,
    evals: &mut usize,
) -> Result<AscentOutcome> {
    let mut g = center(mu, start);
    let mut eval = |field: &Field, evals: &mut usize| -> Result<f64> {
        *evals += 1;
        objective(field)
    };
    let mut value = eval(&g, evals)?;
    if !value.is_finite() {
        // degenerate start (constant density); nudge it
        g = center(mu, &g.map(|v| v + 1e-3 * (v.sin() + 1.0)));
        value = eval(&g, evals)?;
    }
    let n = g.values().len();
    let mut step = 0.1;
    let mut converged = false;
    for _ in 0..max_iters {
        // central-difference gradient
        let mut grad = vec![0.0; n];
        let mut work = g.values().to_vec();
        for (i, gr) in grad.iter_mut().enumerate() {
            let orig = work[i];
            work[i] = orig + GRAD_STEP;
            let up = eval(&Field::new(g.space().clone(), work.clone())?, evals)?;
            work[i] = orig - GRAD_STEP;
            let dn = eval(&Field::new(g.space().clone(), work.clone())?, evals)?;
            work[i] = orig;
            *gr = if up.is_finite() && dn.is_finite() {
                (up - dn) / (2.0 * GRAD_STEP)
            } else {
                0.0
            };
        }
        let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-14 {
            converged = true;
            break;
        }
        let mut advanced = false;
        while step >= MIN_STEP {
            let trial = Field::new(
                g.space().clone(),
                g.values()
                    .iter()
                    .zip(&grad)
                    .map(|(&v, &d)| v + step * d / norm)
                    .collect(),
            )?;
            let trial = center(mu, &trial);
            let tv = eval(&trial, evals)?;
            if tv.is_finite() && tv > value + IMPROVEMENT_TOL * (1.0 + value.abs()) {
                g = trial;
                value = tv;
                step *= 1.6;
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if !advanced {
            converged = true;
            break;
        }
    }
    Ok(AscentOutcome {
        value,
        log_witness: g,
        converged,
        evals: 0,
    })
}
