//! Weak-dependence coefficients and the approximate-tensorization constants
//! they certify.
//!
//! For sites i != k the coupling function
//!
//!   phi_{i,k}(x_i, y_i, x_k, xbar) = mu_k^{x_i,xbar}(x_k) / mu_k^{y_i,xbar}(x_k)
//!
//! measures how strongly the value at site i tilts the conditional law at
//! site k. Its sup alpha_{i,k} and oscillation delta_{i,k} over all arguments
//! are computed here by exhaustive enumeration, together with the scalars
//!
//!   gamma = max_i sum_{k != i} |alpha_{i,k} alpha_{k,i} - 1|,
//!   kappa = (1/4) max_i sum_{k != i} (delta_{k,i} + delta_{i,k}) alpha_{i,k} alpha_{k,i}
//!
//! and the two-max variant of kappa that the contraction argument actually
//! produces. When gamma + kappa < 1 the entropy tensorizes approximately with
//! constant (1 - gamma - kappa)^{-1}.
//!
//! For Gibbs models the interaction strengths give the a priori bounds
//! eps_{i,k} = 4 beta |J_{k,i}| ||w_{i,k}||_inf with exp(-eps) <= phi <=
//! exp(eps), and the single scalar q = max_i sum_k exp(eps)(exp(2 eps) - 1)
//! certifies the constant (1 - (3/2) q)^{-1} whenever q < 2/3. The crude
//! perturbation route yields exp(6 beta ||W||_inf) with no smallness
//! condition at all.

use crate::error::{Error, Result};
use crate::model::GibbsModel;
use crate::space::{conditional_at, Measure};
use nalgebra::DMatrix;

/// Operation budget for the exhaustive sup-search in [`alpha_delta`].
pub const ENUMERATION_BUDGET: u128 = 1 << 28;

/// The coupling ratio phi_{i,k}; the i-th and k-th entries of `config` are
/// overridden by the explicit arguments, the rest supply xbar.
pub fn phi(
    mu: &Measure,
    i: usize,
    k: usize,
    x_i: usize,
    y_i: usize,
    x_k: usize,
    config: &[usize],
) -> Result<f64> {
    if i == k {
        return Err(Error::validation("phi requires two distinct sites"));
    }
    let space = mu.space();
    let mut cfg = config.to_vec();
    cfg[k] = 0;
    cfg[i] = x_i;
    let num = conditional_at(mu, k, space.index_of(&cfg)?)?[x_k];
    cfg[i] = y_i;
    let den = conditional_at(mu, k, space.index_of(&cfg)?)?[x_k];
    if !(den > 0.0) {
        return Err(Error::ZeroMassSlice { site: k });
    }
    Ok(num / den)
}

/// Exhaustive sup and oscillation of phi for every ordered pair (i, k).
///
/// The diagonal of both matrices is unused and left at zero. Requires a
/// strictly positive measure; errors with a capacity failure if the sweep
/// would exceed [`ENUMERATION_BUDGET`] operations.
pub fn alpha_delta(mu: &Measure) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    mu.ensure_strictly_positive()?;
    let space = mu.space();
    let n = space.n_sites();
    let mut ops: u128 = 0;
    for i in 0..n {
        for k in 0..n {
            if i != k {
                let rest = (space.total_size() / (space.site_size(i) * space.site_size(k))) as u128;
                ops += rest
                    * (space.site_size(i) * space.site_size(i) * space.site_size(k)) as u128;
            }
        }
    }
    if ops > ENUMERATION_BUDGET {
        return Err(Error::Capacity {
            requested: ops,
            limit: ENUMERATION_BUDGET,
        });
    }
    let mut alpha = DMatrix::<f64>::zeros(n, n);
    let mut delta = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            if i != k {
                let (a, d) = alpha_delta_pair(mu, i, k)?;
                alpha[(i, k)] = a;
                delta[(i, k)] = d;
            }
        }
    }
    Ok((alpha, delta))
}

/// Sup and oscillation of phi_{i,k} for a single ordered pair.
pub fn alpha_delta_pair(mu: &Measure, i: usize, k: usize) -> Result<(f64, f64)> {
    if i == k {
        return Err(Error::validation("alpha/delta require two distinct sites"));
    }
    let space = mu.space();
    let si = space.site_size(i);
    let mut best_sup: f64 = 1.0;
    let mut best_osc: f64 = 0.0;
    // Enumerate xbar_{i,k} as the states whose i-th and k-th coordinates
    // vanish; the remaining coordinates range over everything.
    for idx in 0..space.total_size() {
        if space.site_value(idx, i) != 0 || space.site_value(idx, k) != 0 {
            continue;
        }
        let conds: Vec<Vec<f64>> = (0..si)
            .map(|xi| conditional_at(mu, k, space.with_site(idx, i, xi)))
            .collect::<Result<_>>()?;
        for xi in 0..si {
            for yi in 0..si {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for (num, den) in conds[xi].iter().zip(&conds[yi]) {
                    let ratio = num / den;
                    lo = lo.min(ratio);
                    hi = hi.max(ratio);
                }
                best_sup = best_sup.max(hi);
                best_osc = best_osc.max(hi - lo);
            }
        }
    }
    Ok((best_sup, best_osc))
}

/// The contraction scalars derived from the coefficient matrices.
#[derive(Debug, Clone, Copy)]
pub struct GammaKappa {
    pub gamma: f64,
    /// Single-max form: (1/4) max_i sum_k (delta_{k,i} + delta_{i,k}) alpha_{i,k} alpha_{k,i}.
    pub kappa_theorem: f64,
    /// Two-max form produced by the contraction argument; always >= the
    /// single-max form.
    pub kappa_proof: f64,
}

/// gamma and both kappa variants from alpha/delta matrices.
pub fn gamma_kappa(alpha: &DMatrix<f64>, delta: &DMatrix<f64>) -> GammaKappa {
    let n = alpha.nrows();
    let prod = |i: usize, k: usize| alpha[(i, k)] * alpha[(k, i)];
    let mut gamma: f64 = 0.0;
    let mut kappa_theorem: f64 = 0.0;
    let mut max_row: f64 = 0.0;
    let mut max_col: f64 = 0.0;
    for i in 0..n {
        let mut g = 0.0;
        let mut kt = 0.0;
        let mut row = 0.0;
        let mut col = 0.0;
        for k in 0..n {
            if k == i {
                continue;
            }
            let s = prod(i, k);
            g += (s - 1.0).abs();
            kt += (delta[(k, i)] + delta[(i, k)]) * s;
            row += delta[(k, i)] * s;
            col += delta[(i, k)] * s;
        }
        gamma = gamma.max(g);
        kappa_theorem = kappa_theorem.max(kt);
        max_row = max_row.max(row);
        max_col = max_col.max(col);
    }
    GammaKappa {
        gamma,
        kappa_theorem: 0.25 * kappa_theorem,
        kappa_proof: 0.25 * max_row + 0.25 * max_col,
    }
}

/// gamma without the absolute value. Coincides with the absolute-value form
/// because alpha_{i,k} alpha_{k,i} >= 1 always; kept separate so the
/// agreement can be asserted.
pub fn gamma_signed(alpha: &DMatrix<f64>) -> f64 {
    let n = alpha.nrows();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&k| k != i)
                .map(|k| alpha[(i, k)] * alpha[(k, i)] - 1.0)
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// C = (1 - gamma - kappa)^{-1} when gamma + kappa < 1, absent otherwise.
pub fn at_constant_theorem(gamma: f64, kappa: f64) -> Option<f64> {
    if gamma + kappa < 1.0 {
        Some(1.0 / (1.0 - gamma - kappa))
    } else {
        None
    }
}

/// eps_{i,k} = 4 beta |J_{k,i}| ||w_{i,k}||_inf and
/// q = max_i sum_{k != i} exp(eps_{i,k}) (exp(2 eps_{i,k}) - 1).
pub fn epsilon_q(model: &GibbsModel) -> (DMatrix<f64>, f64) {
    let n = model.space().n_sites();
    let norms = model.interaction_norms();
    let j = model.coupling_matrix();
    let mut eps = DMatrix::<f64>::zeros(n, n);
    let mut q: f64 = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for k in 0..n {
            if k == i {
                continue;
            }
            let e = 4.0 * model.beta() * j[(k, i)].abs() * norms.pair_sup[(i, k)];
            eps[(i, k)] = e;
            row += e.exp() * ((2.0 * e).exp() - 1.0);
        }
        q = q.max(row);
    }
    (eps, q)
}

/// C = (1 - (3/2) q)^{-1} when q < 2/3, absent otherwise.
pub fn at_constant_corollary(q: f64) -> Option<f64> {
    if q < 2.0 / 3.0 {
        Some(1.0 / (1.0 - 1.5 * q))
    } else {
        None
    }
}

/// The perturbation constant exp(6 beta ||W||_inf), always applicable, with
/// ||W||_inf bounded by (1/2) sum |J_ij| ||w_ij||_inf.
pub fn holley_stroock_constant(model: &GibbsModel) -> f64 {
    (6.0 * model.beta() * model.interaction_norms().total_bound).exp()
}

/// Everything the coefficient machinery produces for one model.
#[derive(Debug, Clone)]
pub struct CoefficientReport {
    pub alpha: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    pub gamma: f64,
    pub kappa_theorem: f64,
    pub kappa_proof: f64,
    pub epsilon: DMatrix<f64>,
    pub q: f64,
    /// Constant from the contraction route with the proof-backed kappa.
    pub c_theorem: Option<f64>,
    /// Constant from the interaction-strength route.
    pub c_corollary: Option<f64>,
    /// Perturbation constant, always present.
    pub c_holley_stroock: f64,
}

impl CoefficientReport {
    /// Human-readable reason when a constant is absent.
    pub fn theorem_absence_reason(&self) -> Option<String> {
        if self.c_theorem.is_none() {
            Some(format!(
                "hypothesis gamma + kappa < 1 violated (gamma = {}, kappa = {})",
                self.gamma, self.kappa_proof
            ))
        } else {
            None
        }
    }

    pub fn corollary_absence_reason(&self) -> Option<String> {
        if self.c_corollary.is_none() {
            Some(format!("hypothesis q < 2/3 violated (q = {})", self.q))
        } else {
            None
        }
    }
}

/// Compute the full report for a model. The published contraction constant
/// uses the two-max kappa (the larger, proof-backed value).
pub fn coefficient_report(model: &GibbsModel) -> Result<CoefficientReport> {
    let mu = model.build_measure()?;
    let (alpha, delta) = alpha_delta(&mu)?;
    let gk = gamma_kappa(&alpha, &delta);
    let (epsilon, q) = epsilon_q(model);
    Ok(CoefficientReport {
        alpha,
        delta,
        gamma: gk.gamma,
        kappa_theorem: gk.kappa_theorem,
        kappa_proof: gk.kappa_proof,
        epsilon,
        q,
        c_theorem: at_constant_theorem(gk.gamma, gk.kappa_proof),
        c_corollary: at_constant_corollary(q),
        c_holley_stroock: holley_stroock_constant(model),
    })
}
