//! Heat-bath (Glauber) dynamics: generator, Dirichlet form, semigroup
//! evolution, spectral gap, and entropy decay along the flow.
//!
//! The generator acts on functions as L f = sum_k (mu_k[f] - f): each
//! coordinate is refreshed at rate one from its conditional distribution
//! given the others. L is self-adjoint in L^2(mu) and the chain is
//! reversible.
//!
//! Evolution uses uniformization at rate N: with P = I + L/N (a stochastic
//! averaging operator), exp(tL) f is the Poisson(Nt)-weighted mixture of
//! P^m f. Every term is a positive operator applied to f, so nonnegativity
//! survives the numerics, which matters because the evolved functions feed
//! straight into entropies. The Poisson tail is truncated below 1e-14 and
//! long horizons are split into bounded-rate chunks so the weight recurrence
//! never underflows.

use crate::error::{Error, Result};
use crate::space::{
    ensure_same_space, entropy, site_covariance_term, site_entropy_term,
    site_expectation, variance, Field, Measure,
};
use nalgebra::{DMatrix, SymmetricEigen};

/// Largest dense dimension the spectral solver accepts.
pub const SPECTRAL_DIM_LIMIT: usize = 2048;

/// Poisson tail mass discarded by the uniformization series.
pub const UNIFORMIZATION_TAIL: f64 = 1e-14;

/// Rate-time budget per uniformization chunk; keeps exp(-rate*t) in range.
const MAX_CHUNK_RATE_TIME: f64 = 64.0;

/// Relative tolerance on the two routes through the Dirichlet form.
const DIRICHLET_ROUTE_TOL: f64 = 1e-10;

/// The heat-bath generator attached to a measure.
///
/// All slices of the measure along every site must carry positive mass for
/// the conditional expectations to exist; a strictly positive measure always
/// qualifies.
#[derive(Debug, Clone)]
pub struct HeatBathGenerator {
    mu: Measure,
}

impl HeatBathGenerator {
    pub fn new(mu: Measure) -> Self {
        HeatBathGenerator { mu }
    }

    pub fn measure(&self) -> &Measure {
        &self.mu
    }

    /// Number of sites; also the uniformization rate.
    pub fn rate(&self) -> usize {
        self.mu.space().n_sites()
    }

    /// L f = sum_k (mu_k[f] - f).
    pub fn apply(&self, f: &Field) -> Result<Field> {
        ensure_same_space(self.mu.space(), f.space())?;
        let n = self.rate();
        let mut out = vec![0.0; f.values().len()];
        for k in 0..n {
            let mk = site_expectation(f, &self.mu, k)?;
            for (o, &m) in out.iter_mut().zip(mk.values()) {
                *o += m;
            }
        }
        for (o, &v) in out.iter_mut().zip(f.values()) {
            *o -= n as f64 * v;
        }
        Field::new(f.space().clone(), out)
    }

    /// P f = f + L f / N = (1/N) sum_k mu_k[f]; stochastic, so it preserves
    /// nonnegativity and the mean.
    pub fn transition(&self, f: &Field) -> Result<Field> {
        ensure_same_space(self.mu.space(), f.space())?;
        let n = self.rate();
        let mut out = vec![0.0; f.values().len()];
        for k in 0..n {
            let mk = site_expectation(f, &self.mu, k)?;
            for (o, &m) in out.iter_mut().zip(mk.values()) {
                *o += m;
            }
        }
        let inv = 1.0 / n as f64;
        for o in &mut out {
            *o *= inv;
        }
        Field::new(f.space().clone(), out)
    }

    /// Dirichlet form E(f, g) = mu[f (-L g)] = sum_k mu[cov_{mu_k}(f, g)].
    ///
    /// Both routes are evaluated and must agree to relative 1e-10; the
    /// covariance route is returned.
    pub fn dirichlet_form(&self, f: &Field, g: &Field) -> Result<f64> {
        let lg = self.apply(g)?;
        let via_generator: f64 = -self
            .mu
            .weights()
            .iter()
            .zip(f.values().iter().zip(lg.values()))
            .map(|(&w, (&a, &b))| w * a * b)
            .sum::<f64>();
        let mut via_covariances = 0.0;
        for k in 0..self.rate() {
            via_covariances += site_covariance_term(f, g, &self.mu, k)?;
        }
        let scale = 1.0 + via_generator.abs() + via_covariances.abs();
        assert!(
            (via_generator - via_covariances).abs() <= DIRICHLET_ROUTE_TOL * scale,
            "Dirichlet form routes disagree: {via_generator} vs {via_covariances}"
        );
        Ok(via_covariances)
    }

    /// f_t = exp(tL) f by uniformization. Nonnegativity and the mean of f
    /// are preserved; t must be nonnegative.
    pub fn evolve(&self, f: &Field, t: f64) -> Result<Field> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        ensure_same_space(self.mu.space(), f.space())?;
        let rate = self.rate() as f64;
        let mut cur = f.clone();
        let mut remaining = t;
        while remaining > 0.0 {
            let step = remaining.min(MAX_CHUNK_RATE_TIME / rate);
            cur = self.uniformized_step(&cur, rate * step)?;
            remaining -= step;
        }
        Ok(cur)
    }

    // One Poisson(rate_time) mixture of powers of P, rate_time <= 64.
    fn uniformized_step(&self, f: &Field, rate_time: f64) -> Result<Field> {
        if rate_time == 0.0 {
            return Ok(f.clone());
        }
        let mut weight = (-rate_time).exp();
        let mut cum = weight;
        let mut acc: Vec<f64> = f.values().iter().map(|&v| v * weight).collect();
        let mut power = f.clone();
        let cap = (rate_time + 40.0 * rate_time.sqrt() + 64.0) as usize;
        let mut m = 1usize;
        while cum < 1.0 - UNIFORMIZATION_TAIL && m <= cap {
            power = self.transition(&power)?;
            weight *= rate_time / m as f64;
            cum += weight;
            for (a, &p) in acc.iter_mut().zip(power.values()) {
                *a += weight * p;
            }
            m += 1;
        }
        Field::new(f.space().clone(), acc)
    }

    // Dense matrix of L symmetrized by the reversible measure:
    // S = D^{1/2} L D^{-1/2} with D = diag(mu).
    fn symmetrized_matrix(&self) -> Result<DMatrix<f64>> {
        self.mu.ensure_strictly_positive()?;
        let space = self.mu.space();
        let n = space.total_size();
        if n > SPECTRAL_DIM_LIMIT {
            return Err(Error::Capacity {
                requested: n as u128,
                limit: SPECTRAL_DIM_LIMIT as u128,
            });
        }
        let mut l = DMatrix::<f64>::zeros(n, n);
        for k in 0..space.n_sites() {
            let stride = space.stride(k);
            let size = space.site_size(k);
            for s in 0..space.n_slices(k) {
                let base = space.slice_base(k, s);
                let mut mass = 0.0;
                for v in 0..size {
                    mass += self.mu.weight(base + v * stride);
                }
                for v in 0..size {
                    let row = base + v * stride;
                    for w in 0..size {
                        let col = base + w * stride;
                        let p = self.mu.weight(col) / mass;
                        if w == v {
                            l[(row, row)] += p - 1.0;
                        } else {
                            l[(row, col)] += p;
                        }
                    }
                }
            }
        }
        let sqrt_mu: Vec<f64> = self.mu.weights().iter().map(|&w| w.sqrt()).collect();
        let mut sym = DMatrix::<f64>::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                sym[(r, c)] = sqrt_mu[r] * l[(r, c)] / sqrt_mu[c];
            }
        }
        // reversibility makes this symmetric up to roundoff; enforce exactly
        let symt = sym.transpose();
        Ok((sym + symt) * 0.5)
    }

    /// Smallest nonzero eigenvalue of -L in L^2(mu). The optimal variance
    /// constant is 1/gap.
    pub fn spectral_gap(&self) -> Result<f64> {
        Ok(self.spectral_decomposition()?.0)
    }

    /// Spectral gap together with the eigenfunction achieving it.
    pub fn spectral_decomposition(&self) -> Result<(f64, Field)> {
        let sym = self.symmetrized_matrix()?;
        let n = sym.nrows();
        let eig = SymmetricEigen::new(-sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        if n < 2 {
            // a single state has no nonzero mode; refresh rate is 1 by convention
            return Ok((1.0, Field::constant(self.mu.space().clone(), 0.0)));
        }
        let gap = eig.eigenvalues[order[1]];
        let h = eig.eigenvectors.column(order[1]);
        let g: Vec<f64> = h
            .iter()
            .zip(self.mu.weights())
            .map(|(&hv, &w)| hv / w.sqrt())
            .collect();
        Ok((gap, Field::new(self.mu.space().clone(), g)?))
    }

    /// (t, Ent_mu(f_t)) along an increasing time grid.
    pub fn entropy_trace(&self, f: &Field, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        if grid.windows(2).any(|w| w[1] < w[0]) || grid.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::validation("time grid must be nonnegative and increasing"));
        }
        let mut out = Vec::with_capacity(grid.len());
        let mut cur = f.clone();
        let mut t_cur = 0.0;
        for &t in grid {
            cur = self.evolve(&cur, t - t_cur)?;
            t_cur = t;
            out.push((t, entropy(&cur, &self.mu)?));
        }
        Ok(out)
    }

    /// Residuals of the semigroup integral identities on [0, T]:
    ///
    ///   Ent(f) - Ent(f_T) = int_0^T E(f_t, log f_t) dt
    ///   mu[Ent_{mu_k}(f)] - mu[Ent_{mu_k}(f_T)]
    ///       = int_0^T E(f_t, log(f_t / mu_k[f_t])) dt
    ///
    /// `f` must be strictly positive. The integrals use adaptive midpoint
    /// refinement with a Richardson acceptance test.
    pub fn semigroup_identity_check(&self, f: &Field, t_max: f64) -> Result<SemigroupCheck> {
        f.ensure_strictly_positive()?;
        if !(t_max >= 0.0) {
            return Err(Error::NegativeTime(t_max));
        }
        let n = self.rate();
        let ent0 = entropy(f, &self.mu)?;
        let mut site0 = Vec::with_capacity(n);
        for k in 0..n {
            site0.push(site_entropy_term(f, &self.mu, k)?);
        }
        let f_t = self.evolve(f, t_max)?;
        let ent_t = entropy(&f_t, &self.mu)?;
        let mut site_t = Vec::with_capacity(n);
        for k in 0..n {
            site_t.push(site_entropy_term(&f_t, &self.mu, k)?);
        }

        let mut evals = 0usize;
        let integrand = |t: f64, evals: &mut usize| -> Result<Vec<f64>> {
            *evals += 1;
            let ft = self.evolve(f, t)?;
            let logf = ft.ln()?;
            let mut row = Vec::with_capacity(n + 1);
            row.push(self.dirichlet_form(&ft, &logf)?);
            for k in 0..n {
                let mk = site_expectation(&ft, &self.mu, k)?;
                let arg = Field::new(
                    ft.space().clone(),
                    logf.values()
                        .iter()
                        .zip(mk.values())
                        .map(|(&a, &b)| a - b.ln())
                        .collect(),
                )?;
                row.push(self.dirichlet_form(&ft, &arg)?);
            }
            Ok(row)
        };

        let tol = 1e-7 * (1.0 + ent0.abs());
        let integral = adaptive_midpoint(
            &mut |t| integrand(t, &mut evals),
            0.0,
            t_max,
            n + 1,
            tol,
        )?;
        let total_residual = ent0 - ent_t - integral[0];
        let site_residuals: Vec<f64> = (0..n)
            .map(|k| site0[k] - site_t[k] - integral[k + 1])
            .collect();
        Ok(SemigroupCheck {
            total_residual,
            site_residuals,
            entropy_start: ent0,
            entropy_end: ent_t,
            integrand_evals: evals,
        })
    }
}

/// Outcome of [`HeatBathGenerator::semigroup_identity_check`].
#[derive(Debug, Clone)]
pub struct SemigroupCheck {
    pub total_residual: f64,
    pub site_residuals: Vec<f64>,
    pub entropy_start: f64,
    pub entropy_end: f64,
    pub integrand_evals: usize,
}

// Adaptive midpoint rule for a vector integrand, target accuracy `tol` per
// accepted interval. The two-half refinement supplies the Richardson error
// estimate (fine - coarse)/3; accepted intervals contribute the extrapolated
// value fine + (fine - coarse)/3, which cancels the leading error term and
// keeps the accumulated error well below the per-interval target.
fn adaptive_midpoint(
    integrand: &mut impl FnMut(f64) -> Result<Vec<f64>>,
    a: f64,
    b: f64,
    dim: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    let mut total = vec![0.0; dim];
    if b <= a {
        return Ok(total);
    }
    struct Interval {
        a: f64,
        b: f64,
        coarse: Vec<f64>,
        depth: u32,
    }
    let first = integrand(0.5 * (a + b))?;
    let coarse: Vec<f64> = first.iter().map(|v| v * (b - a)).collect();
    let mut stack = vec![Interval {
        a,
        b,
        coarse,
        depth: 0,
    }];
    const MAX_DEPTH: u32 = 30;
    while let Some(iv) = stack.pop() {
        let h = iv.b - iv.a;
        let mid = 0.5 * (iv.a + iv.b);
        let left_mid = integrand(0.5 * (iv.a + mid))?;
        let right_mid = integrand(0.5 * (mid + iv.b))?;
        let left: Vec<f64> = left_mid.iter().map(|v| v * 0.5 * h).collect();
        let right: Vec<f64> = right_mid.iter().map(|v| v * 0.5 * h).collect();
        let ok = iv
            .coarse
            .iter()
            .zip(left.iter().zip(&right))
            .all(|(&c, (&l, &r))| (l + r - c).abs() <= 3.0 * tol);
        if ok || iv.depth >= MAX_DEPTH {
            for (t, (&c, (&l, &r))) in total
                .iter_mut()
                .zip(iv.coarse.iter().zip(left.iter().zip(&right)))
            {
                let fine = l + r;
                *t += fine + (fine - c) / 3.0;
            }
        } else {
            stack.push(Interval {
                a: iv.a,
                b: mid,
                coarse: left,
                depth: iv.depth + 1,
            });
            stack.push(Interval {
                a: mid,
                b: iv.b,
                coarse: right,
                depth: iv.depth + 1,
            });
        }
    }
    Ok(total)
}

/// Exponential-decay slack of the variance along the flow:
/// min over grid points of exp(-2 t gap) var(f) - var(f_t).
pub fn variance_decay_slack(
    gen: &HeatBathGenerator,
    f: &Field,
    gap: f64,
    grid: &[f64],
) -> Result<f64> {
    let var0 = variance(f, gen.measure())?;
    let mut worst = f64::INFINITY;
    let mut cur = f.clone();
    let mut t_cur = 0.0;
    for &t in grid {
        cur = gen.evolve(&cur, t - t_cur)?;
        t_cur = t;
        let v = variance(&cur, gen.measure())?;
        worst = worst.min((-2.0 * gap * t).exp() * var0 - v);
    }
    Ok(worst)
}

/// d/dt Ent(f_t) at t = 0 versus -E(f, log f), by a second-order one-sided
/// difference. Returns (finite difference, -dirichlet).
pub fn entropy_derivative_at_zero(
    gen: &HeatBathGenerator,
    f: &Field,
    h: f64,
) -> Result<(f64, f64)> {
    let mu = gen.measure();
    let e0 = entropy(f, mu)?;
    let e1 = entropy(&gen.evolve(f, h)?, mu)?;
    let e2 = entropy(&gen.evolve(f, 2.0 * h)?, mu)?;
    let fd = (-3.0 * e0 + 4.0 * e1 - e2) / (2.0 * h);
    let exact = -gen.dirichlet_form(f, &f.ln()?)?;
    Ok((fd, exact))
}
