//! Numerical checks for the pointwise building blocks behind the
//! contraction estimate: the logarithmic mean, the tilted one-site measure
//! it induces, the gradient bound on log mu_k[f], and the covariance
//! estimate that controls the error term.
//!
//! Notation: for a function f and sites i != k, the discrete gradient is
//! grad_i f(x; y_i) = f(x with x_i -> y_i) - f(x). The logarithmic mean
//!
//!   L(a, b) = (a - b) / (log a - log b),  L(a, a) = a,
//!
//! converts gradients of f into gradients of log f:
//! |f(a) - f(b)| = L(f(a), f(b)) |log f(a) - log f(b)|. Weighting a
//! conditional distribution by the logarithmic mean of the two tilts of f
//! gives the probability measure nu_{k,i}; the main pointwise bound states
//!
//!   |grad_i log mu_k[f](x; y_i)|
//!     <= alpha_{i,k} sum_{x_k'} |grad_i log f| nu(x_k')
//!      + alpha_{i,k} |cov(f(y_i, .), phi_{i,k})| / sqrt(nubar * mu_k^{y_i}[f(y_i, .)])
//!
//! together with its two one-sided precursors (one dividing the covariance
//! term by the plain conditional mean of f, one by the tilted normalization
//! alone). All three are checked separately so a failure localizes.

use crate::coefficients::alpha_delta_pair;
use crate::error::{Error, Result};
use crate::space::{conditional_at, ensure_same_space, Field, Measure};

/// The logarithmic mean L(a, b) = (a - b)/(log a - log b) with the
/// continuity extensions L(a, a) = a and L(a, 0) = 0.
///
/// Near a = b the defining quotient cancels catastrophically, so below a
/// relative difference of 1e-8 the value switches to the expansion
/// (a + b)/2 * (1 - s^2/3 + ...) in s = (a - b)/(a + b).
pub fn log_mean(a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0) || !(b >= 0.0) {
        return Err(Error::validation(format!(
            "the logarithmic mean needs nonnegative arguments, got ({a}, {b})"
        )));
    }
    if a == b {
        return Ok(a);
    }
    if a == 0.0 || b == 0.0 {
        return Ok(0.0);
    }
    let s = (a - b) / (a + b);
    if s.abs() < 1e-8 {
        // 1/(1 + s^2/3 + s^4/5 + ...) truncated; s^2 < 1e-16 keeps this exact
        Ok(0.5 * (a + b) * (1.0 - s * s / 3.0))
    } else {
        Ok((a - b) / (a.ln() - b.ln()))
    }
}

/// The probability measure on Omega_k obtained by weighting the conditional
/// mu_k^{x_i, xbar} with the logarithmic mean of the two tilts of f, plus
/// its normalization constant.
#[derive(Debug, Clone)]
pub struct TiltedMeasure {
    pub probs: Vec<f64>,
    pub normalization: f64,
}

/// Build nu_{k,i}^{x_i, y_i, xbar} for a strictly positive f. The i-th and
/// k-th entries of `config` are overridden; the rest supply xbar.
pub fn tilted_measure(
    f: &Field,
    mu: &Measure,
    i: usize,
    k: usize,
    x_i: usize,
    y_i: usize,
    config: &[usize],
) -> Result<TiltedMeasure> {
    if i == k {
        return Err(Error::validation(
            "the tilted measure needs two distinct sites",
        ));
    }
    ensure_same_space(mu.space(), f.space())?;
    f.ensure_strictly_positive()?;
    let space = mu.space();
    let mut cfg = config.to_vec();
    cfg[k] = 0;
    cfg[i] = x_i;
    let base = space.index_of(&cfg)?;
    let cond_x = conditional_at(mu, k, base)?;
    let stride_k = space.stride(k);
    let idx_y = space.with_site(base, i, y_i);
    let mut weights = Vec::with_capacity(space.site_size(k));
    let mut normalization = 0.0;
    for (v, &c) in cond_x.iter().enumerate() {
        let f_y = f.value(idx_y + v * stride_k);
        let f_x = f.value(base + v * stride_k);
        let w = log_mean(f_y, f_x)? * c;
        normalization += w;
        weights.push(w);
    }
    if !(normalization > 0.0) {
        return Err(Error::Degenerate(
            "tilted measure has zero normalization".into(),
        ));
    }
    for w in &mut weights {
        *w /= normalization;
    }
    Ok(TiltedMeasure {
        probs: weights,
        normalization,
    })
}

/// Slacks of the pointwise gradient bound and its two one-sided precursors
/// at one argument tuple. Nonnegative slacks mean the bounds hold.
#[derive(Debug, Clone, Copy)]
pub struct GradientBoundSlacks {
    /// Combined bound with the geometric-mean denominator.
    pub combined: f64,
    /// Precursor dividing the covariance term by mu_k^{y_i}[f(y_i, .)].
    pub mean_route: f64,
    /// Precursor dividing the covariance term by the tilted normalization.
    pub tilted_route: f64,
    /// The magnitude both sides share, for relative tolerances.
    pub scale: f64,
}

/// Evaluate the gradient bound at the state `config` with site i moved to
/// `y_i`, for sites i != k and strictly positive f. `alpha_ik` may carry a
/// precomputed sup of phi_{i,k}; otherwise it is computed exactly.
pub fn gradient_bound_check(
    f: &Field,
    mu: &Measure,
    i: usize,
    k: usize,
    config: &[usize],
    y_i: usize,
    alpha_ik: Option<f64>,
) -> Result<GradientBoundSlacks> {
    if i == k {
        return Err(Error::validation("the gradient bound needs i != k"));
    }
    ensure_same_space(mu.space(), f.space())?;
    f.ensure_strictly_positive()?;
    let space = mu.space();
    let alpha = match alpha_ik {
        Some(a) => a,
        None => alpha_delta_pair(mu, i, k)?.0,
    };
    let x_i = config[i];
    let idx = space.index_of(config)?;
    let stride_k = space.stride(k);
    let base_x = idx - space.site_value(idx, k) * stride_k;
    let base_y = space.with_site(base_x, i, y_i);

    // left side: |log mu_k[f](y_i ...) - log mu_k[f](x ...)|
    let cond_x = conditional_at(mu, k, base_x)?;
    let cond_y = conditional_at(mu, k, base_y)?;
    let mean_x: f64 = cond_x
        .iter()
        .enumerate()
        .map(|(v, &c)| c * f.value(base_x + v * stride_k))
        .sum();
    let mean_y: f64 = cond_y
        .iter()
        .enumerate()
        .map(|(v, &c)| c * f.value(base_y + v * stride_k))
        .sum();
    let lhs = (mean_y.ln() - mean_x.ln()).abs();

    // tilted average of |grad_i log f|
    let tilted = tilted_measure(f, mu, i, k, x_i, y_i, config)?;
    let grad_term: f64 = tilted
        .probs
        .iter()
        .enumerate()
        .map(|(v, &p)| {
            let fy = f.value(base_y + v * stride_k);
            let fx = f.value(base_x + v * stride_k);
            p * (fy.ln() - fx.ln()).abs()
        })
        .sum();

    // covariance of f(y_i, .) against phi_{i,k}(x_i, y_i, .) under mu_k^{y_i}
    let mean_phi: f64 = cond_y
        .iter()
        .zip(&cond_x)
        .map(|(&cy, &cx)| cy * (cx / cy))
        .sum();
    let cov: f64 = cond_y
        .iter()
        .zip(&cond_x)
        .enumerate()
        .map(|(v, (&cy, &cx))| {
            cy * (f.value(base_y + v * stride_k) - mean_y) * (cx / cy - mean_phi)
        })
        .sum();
    let cov = cov.abs();

    let combined_rhs =
        alpha * grad_term + alpha * cov / (tilted.normalization * mean_y).sqrt();
    let mean_route_rhs = grad_term + alpha * cov / mean_y;
    let tilted_route_rhs = alpha * cov / tilted.normalization + alpha * grad_term;
    let scale = 1.0 + lhs.abs() + combined_rhs.abs();
    Ok(GradientBoundSlacks {
        combined: combined_rhs - lhs,
        mean_route: mean_route_rhs - lhs,
        tilted_route: tilted_route_rhs - lhs,
        scale,
    })
}

/// Pointwise residual of the identity converting conditional-weighted
/// gradients of f into tilted-weighted gradients of log f:
/// mu_k^{x_i,xbar}(x_k) |grad_i f| = nubar |grad_i log f| nu(x_k).
pub fn gradient_identity_residual(
    f: &Field,
    mu: &Measure,
    i: usize,
    k: usize,
    x_i: usize,
    y_i: usize,
    config: &[usize],
) -> Result<f64> {
    let space = mu.space();
    let mut cfg = config.to_vec();
    cfg[k] = 0;
    cfg[i] = x_i;
    let base = space.index_of(&cfg)?;
    let cond_x = conditional_at(mu, k, base)?;
    let tilted = tilted_measure(f, mu, i, k, x_i, y_i, config)?;
    let stride_k = space.stride(k);
    let base_y = space.with_site(base, i, y_i);
    let mut worst: f64 = 0.0;
    for (v, (&c, &p)) in cond_x.iter().zip(&tilted.probs).enumerate() {
        let fy = f.value(base_y + v * stride_k);
        let fx = f.value(base + v * stride_k);
        let left = c * (fy - fx).abs();
        let right = tilted.normalization * (fy.ln() - fx.ln()).abs() * p;
        worst = worst.max((left - right).abs());
    }
    Ok(worst)
}

/// Covariance estimate on a single site: slack of
///
///   |cov(g, psi)| <= (1/2) osc(psi) (sum g mu)^{1/2}
///                    (sum_{x,y} mu(x) mu(y) (g(y)-g(x))(log g(y)-log g(x)))^{1/2}
///
/// for g >= 0 and any psi on a finite set carrying the distribution `dist`.
/// If g vanishes at some point but not everywhere the Dirichlet-type double
/// sum is infinite and the slack is +infinity.
pub fn covariance_lemma_check(g: &[f64], psi: &[f64], dist: &[f64]) -> Result<f64> {
    if g.len() != psi.len() || g.len() != dist.len() {
        return Err(Error::validation(
            "g, psi, and the distribution must share a length",
        ));
    }
    if let Some(i) = g.iter().position(|&v| v < 0.0) {
        return Err(Error::NegativeEntry {
            index: i,
            value: g[i],
        });
    }
    let total: f64 = dist.iter().sum();
    if !(total > 0.0) {
        return Err(Error::validation("distribution has zero mass"));
    }
    let p: Vec<f64> = dist.iter().map(|&d| d / total).collect();
    let mean_g: f64 = p.iter().zip(g).map(|(&w, &v)| w * v).sum();
    let mean_psi: f64 = p.iter().zip(psi).map(|(&w, &v)| w * v).sum();
    let cov: f64 = p
        .iter()
        .zip(g.iter().zip(psi))
        .map(|(&w, (&a, &b))| w * (a - mean_g) * (b - mean_psi))
        .sum();
    let osc = psi.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
        - psi.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let mut dirichlet = 0.0;
    for (x, &gx) in g.iter().enumerate() {
        for (y, &gy) in g.iter().enumerate() {
            if gx == gy {
                continue;
            }
            if gx == 0.0 || gy == 0.0 {
                if p[x] > 0.0 && p[y] > 0.0 {
                    return Ok(f64::INFINITY);
                }
                continue;
            }
            dirichlet += p[x] * p[y] * (gy - gx) * (gy.ln() - gx.ln());
        }
    }
    let rhs = 0.5 * osc * mean_g.sqrt() * dirichlet.sqrt();
    Ok(rhs - cov.abs())
}

/// Quadrature oracle for the integral representation
/// L(a, b) = int_0^1 a^{1-t} b^t dt (composite Simpson).
///
/// `panels` is a floor; the integrand is a * exp(t ln(b/a)), whose fourth
/// derivative grows like |ln(b/a)|^4, so the rule adds panels in proportion
/// to the log ratio to keep the error near 1e-10 relative across wildly
/// unequal arguments.
pub fn log_mean_integral_quadrature(a: f64, b: f64, panels: usize) -> Result<f64> {
    if !(a >= 0.0) || !(b >= 0.0) {
        return Err(Error::validation("nonnegative arguments required"));
    }
    if a == 0.0 || b == 0.0 {
        // a^{1-t} b^t vanishes for t in (0,1) when either endpoint is zero
        return Ok(0.0);
    }
    let log_ratio = (b.ln() - a.ln()).abs();
    let panels = panels.max(1).max((90.0 * log_ratio) as usize);
    let n = panels * 2;
    let h = 1.0 / n as f64;
    let integrand = |t: f64| a.powf(1.0 - t) * b.powf(t);
    let mut sum = integrand(0.0) + integrand(1.0);
    for j in 1..n {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * integrand(j as f64 * h);
    }
    Ok(sum * h / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GibbsModel;
    use crate::rng::{random_positive_field, trial_rng};
    use nalgebra::DMatrix;
    use rand::Rng;

    #[test]
    fn log_mean_fixed_points_and_edges() {
        for a in [0.0, 0.5, 1.0, 7.25] {
            assert_eq!(log_mean(a, a).unwrap(), a);
        }
        assert_eq!(log_mean(3.0, 0.0).unwrap(), 0.0);
        assert_eq!(log_mean(0.0, 2.0).unwrap(), 0.0);
        assert!(log_mean(-1.0, 2.0).is_err());
        let e = std::f64::consts::E;
        assert!((log_mean(e, 1.0).unwrap() - (e - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn log_mean_between_geometric_and_arithmetic() {
        let mut rng = trial_rng(60, 0);
        for _ in 0..10_000 {
            let a: f64 = rng.random_range(1e-6..10.0);
            let b: f64 = rng.random_range(1e-6..10.0);
            let lm = log_mean(a, b).unwrap();
            assert!(lm <= 0.5 * (a + b) + 1e-12 * (a + b));
            assert!(lm >= a.min(b) - 1e-12 * (a + b));
        }
    }

    #[test]
    fn log_mean_series_branch_is_smooth() {
        // straddle the series cutoff: values must agree to near machine precision
        let a: f64 = 1.0;
        for d in [1e-7, 1e-8, 1e-9, 1e-12] {
            let direct = (a - (a - d)) / (a.ln() - (a - d).ln());
            let ours = log_mean(a, a - d).unwrap();
            assert!(
                (ours - direct).abs() <= 1e-10 * a,
                "d = {d}: {ours} vs {direct}"
            );
        }
    }

    #[test]
    fn log_mean_scaling_monotonicity() {
        // L(a, b) >= q L(a', b') whenever a >= q a', b >= q b'
        let mut rng = trial_rng(61, 0);
        for _ in 0..10_000 {
            let ap: f64 = rng.random_range(1e-3..5.0);
            let bp: f64 = rng.random_range(1e-3..5.0);
            let q: f64 = rng.random_range(0.0..2.0);
            let a = q * ap + rng.random_range(0.0..1.0);
            let b = q * bp + rng.random_range(0.0..1.0);
            let lhs = log_mean(a, b).unwrap();
            let rhs = q * log_mean(ap, bp).unwrap();
            assert!(lhs >= rhs - 1e-11 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn log_mean_concavity() {
        let mut rng = trial_rng(62, 0);
        for _ in 0..10_000 {
            let n = 3;
            let mut p: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= s);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(1e-3..5.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(1e-3..5.0)).collect();
            let mix_a: f64 = p.iter().zip(&a).map(|(&w, &v)| w * v).sum();
            let mix_b: f64 = p.iter().zip(&b).map(|(&w, &v)| w * v).sum();
            let lhs = log_mean(mix_a, mix_b).unwrap();
            let rhs: f64 = (0..n)
                .map(|j| p[j] * log_mean(a[j], b[j]).unwrap())
                .sum();
            assert!(lhs >= rhs - 1e-11 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn log_mean_matches_integral_representation() {
        let mut rng = trial_rng(63, 0);
        for _ in 0..200 {
            let a: f64 = rng.random_range(0.05..5.0);
            let b: f64 = rng.random_range(0.05..5.0);
            let quad = log_mean_integral_quadrature(a, b, 200).unwrap();
            let lm = log_mean(a, b).unwrap();
            assert!((quad - lm).abs() <= 1e-8 * (1.0 + lm), "({a}, {b})");
        }
    }

    #[test]
    fn chord_log_chord_inequality() {
        // (a-b)^2/(a+b) <= (1/2)(a-b)(log a - log b), the step inside the
        // covariance estimate
        let mut rng = trial_rng(64, 0);
        for _ in 0..10_000 {
            let a: f64 = rng.random_range(1e-4..10.0);
            let b: f64 = rng.random_range(1e-4..10.0);
            let lhs = (a - b) * (a - b) / (a + b);
            let rhs = 0.5 * (a - b) * (a.ln() - b.ln());
            assert!(lhs <= rhs + 1e-12 * (1.0 + rhs));
        }
    }

    fn random_three_site_model(seed: u64) -> (GibbsModel, Measure) {
        let mut rng = trial_rng(seed, 0);
        let n = 3;
        let mut j = DMatrix::<f64>::zeros(n, n);
        for a in 0..n {
            for b in (a + 1)..n {
                let v = rng.random_range(-1.0..1.0);
                j[(a, b)] = v;
                j[(b, a)] = v;
            }
        }
        let model = GibbsModel::ising(&j, 0.2, &[0.1, -0.1, 0.2]).unwrap();
        let mu = model.build_measure().unwrap();
        (model, mu)
    }

    #[test]
    fn tilted_measure_reduces_to_conditional_for_constant_f() {
        let (_, mu) = random_three_site_model(65);
        let f = Field::constant(mu.space().clone(), 2.5);
        let t = tilted_measure(&f, &mu, 0, 1, 1, 0, &[1, 0, 1]).unwrap();
        let cond = conditional_at(&mu, 1, mu.space().index_of(&[1, 0, 1]).unwrap()).unwrap();
        for (a, b) in t.probs.iter().zip(&cond) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((t.normalization - 2.5).abs() < 1e-14);
        let s: f64 = t.probs.iter().sum();
        assert!((s - 1.0).abs() < 1e-13);
    }

    #[test]
    fn tilted_measure_with_equal_tilts_weights_by_f() {
        let (_, mu) = random_three_site_model(66);
        let f = random_positive_field(mu.space(), 2.0, &mut trial_rng(67, 0));
        // x_i = y_i: weights proportional to f(x_i, ., xbar) mu_k^{x_i}
        let t = tilted_measure(&f, &mu, 0, 2, 1, 1, &[1, 1, 0]).unwrap();
        let sp = mu.space();
        let base = sp.index_of(&[1, 1, 0]).unwrap();
        let cond = conditional_at(&mu, 2, base).unwrap();
        let mut expect: Vec<f64> = cond
            .iter()
            .enumerate()
            .map(|(v, &c)| c * f.value(base + v * sp.stride(2)))
            .collect();
        let z: f64 = expect.iter().sum();
        expect.iter_mut().for_each(|v| *v /= z);
        for (a, b) in t.probs.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_identity_holds_pointwise() {
        let (_, mu) = random_three_site_model(68);
        let f = random_positive_field(mu.space(), 2.0, &mut trial_rng(69, 0));
        for x_i in 0..2 {
            for y_i in 0..2 {
                let r =
                    gradient_identity_residual(&f, &mu, 0, 1, x_i, y_i, &[0, 0, 1]).unwrap();
                assert!(r < 1e-13, "x_i {x_i} y_i {y_i}: residual {r}");
            }
        }
    }

    #[test]
    fn gradient_bound_on_product_measures_is_tight_in_alpha() {
        let sp = crate::space::ConfigurationSpace::new(vec![2, 3, 2]).unwrap();
        let mu = Measure::product(
            sp.clone(),
            &[vec![0.4, 0.6], vec![0.2, 0.3, 0.5], vec![0.5, 0.5]],
        )
        .unwrap();
        let f = random_positive_field(&sp, 2.0, &mut trial_rng(70, 0));
        let mut cfg = vec![0usize; 3];
        for idx in 0..sp.total_size() {
            sp.decode_into(idx, &mut cfg);
            for y_i in 0..2 {
                let s = gradient_bound_check(&f, &mu, 0, 1, &cfg, y_i, None).unwrap();
                assert!(s.combined >= -1e-12 * s.scale);
                assert!(s.mean_route >= -1e-12 * s.scale);
                assert!(s.tilted_route >= -1e-12 * s.scale);
            }
        }
    }

    #[test]
    fn gradient_bound_vanishes_for_constant_functions() {
        let (_, mu) = random_three_site_model(74);
        let f = Field::constant(mu.space().clone(), 3.0);
        let s = gradient_bound_check(&f, &mu, 0, 2, &[1, 0, 1], 0, None).unwrap();
        // lhs is zero and the tilted gradient average is zero; only the
        // covariance term remains, and it vanishes because f is constant
        assert!(s.combined.abs() < 1e-13);
        assert!(s.mean_route.abs() < 1e-13);
        assert!(s.tilted_route.abs() < 1e-13);
    }

    #[test]
    fn gradient_bound_sweeps_nonnegative_on_coupled_models() {
        let (_, mu) = random_three_site_model(71);
        let sp = mu.space().clone();
        let mut cfg = vec![0usize; 3];
        for t in 0..5 {
            let f = random_positive_field(&sp, 2.0, &mut trial_rng(72, t));
            for i in 0..3 {
                for k in 0..3 {
                    if i == k {
                        continue;
                    }
                    let alpha = alpha_delta_pair(&mu, i, k).unwrap().0;
                    for idx in 0..sp.total_size() {
                        sp.decode_into(idx, &mut cfg);
                        for y_i in 0..sp.site_size(i) {
                            let s = gradient_bound_check(&f, &mu, i, k, &cfg, y_i, Some(alpha))
                                .unwrap();
                            assert!(
                                s.combined >= -1e-10 * s.scale
                                    && s.mean_route >= -1e-10 * s.scale
                                    && s.tilted_route >= -1e-10 * s.scale,
                                "trial {t} i {i} k {k} idx {idx} y_i {y_i}: {s:?}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn covariance_lemma_degenerate_cases() {
        let dist = [0.25, 0.25, 0.25, 0.25];
        // constant psi: both sides vanish
        let g = [1.0, 2.0, 3.0, 4.0];
        let s = covariance_lemma_check(&g, &[2.0; 4], &dist).unwrap();
        assert!(s.abs() < 1e-13);
        // constant g: covariance zero, right side zero
        let s = covariance_lemma_check(&[3.0; 4], &[1.0, -1.0, 0.5, 0.0], &dist).unwrap();
        assert!(s.abs() < 1e-13);
        // zero somewhere in g: right side infinite
        let s = covariance_lemma_check(&[0.0, 1.0, 2.0, 3.0], &[1.0, 0.0, 0.0, 0.0], &dist)
            .unwrap();
        assert!(s.is_infinite());
        assert!(covariance_lemma_check(&[-1.0, 1.0], &[0.0, 0.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn covariance_lemma_random_trials() {
        let mut rng = trial_rng(73, 0);
        for trial in 0..1000 {
            let n = 4;
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0f64).exp()).collect();
            let psi: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut dist: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = dist.iter().sum();
            dist.iter_mut().for_each(|v| *v /= s);
            let slack = covariance_lemma_check(&g, &psi, &dist).unwrap();
            assert!(slack >= -1e-12 * (1.0 + slack.abs()), "trial {trial}: {slack}");
        }
    }
}
