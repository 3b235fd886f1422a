//! Builders for Gibbs measures with bounded pair interactions.
//!
//! A model consists of strictly positive single-site base measures mu_0i
//! (external fields already absorbed), a symmetric coupling matrix J with
//! zero diagonal, a bounded pair function w_ij per coupled pair, and an
//! inverse temperature beta. The measure it builds is
//!
//!   mu(x) = mu_0(x) exp(beta W(x)) / Z,
//!   W(x)  = (1/2) sum_{i,j} J_ij w_ij(x_i, x_j).
//!
//! Concrete families: Ising spins (w = x_i x_j on {-1,+1}), the mean-field
//! (Curie-Weiss) special case J_ij = 1/N, Potts spins (w = 1(x_i = x_j)),
//! and interacting birth-death sites built from truncated ultra log-concave
//! laws.

use crate::error::{Error, Result};
use crate::space::{conditional_at, ConfigurationSpace, Measure};
use nalgebra::DMatrix;

/// A symmetric pair interaction between sites `i < j`.
///
/// `table` is row-major over (x_i, x_j); symmetry w_ij(x,y) = w_ji(y,x) is
/// realized by always evaluating through the stored orientation.
#[derive(Debug, Clone)]
pub struct PairCoupling {
    pub i: usize,
    pub j: usize,
    pub strength: f64,
    pub table: Vec<f64>,
}

impl PairCoupling {
    pub fn new(i: usize, j: usize, strength: f64, table: Vec<f64>) -> Self {
        PairCoupling {
            i,
            j,
            strength,
            table,
        }
    }

    /// sup |w| over the table.
    pub fn sup_norm(&self) -> f64 {
        self.table.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }
}

/// A truncated ultra log-concave single-site law nu with bounded potential F.
///
/// The site lives on {0, ..., n_max} with base measure proportional to
/// nu(x) exp(F(x)). Truncating an infinite law loses tail mass; the loss is
/// recorded and rejected above a threshold so the approximation stays
/// visible.
#[derive(Debug, Clone)]
pub struct BirthDeathSite {
    nu: Vec<f64>,
    potential: Vec<f64>,
    tail_mass: f64,
}

/// Tail mass above which a truncation is refused by default.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-12;

impl BirthDeathSite {
    /// Build from explicit nonnegative weights on {0, ..., n_max} and a
    /// potential table of the same length. `tail_mass` records what the
    /// truncation discarded (zero for intrinsically finite laws).
    pub fn new(nu: Vec<f64>, potential: Vec<f64>, tail_mass: f64) -> Result<Self> {
        Self::with_tail_tolerance(nu, potential, tail_mass, DEFAULT_TAIL_TOLERANCE)
    }

    pub fn with_tail_tolerance(
        nu: Vec<f64>,
        potential: Vec<f64>,
        tail_mass: f64,
        tail_tolerance: f64,
    ) -> Result<Self> {
        if nu.len() < 2 {
            return Err(Error::validation(
                "a birth-death site needs at least the levels 0 and 1",
            ));
        }
        if potential.len() != nu.len() {
            return Err(Error::validation(format!(
                "potential table has {} entries, weights have {}",
                potential.len(),
                nu.len()
            )));
        }
        if nu.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::validation("weights must be finite and nonnegative"));
        }
        if !(nu[0] > 0.0) {
            return Err(Error::validation(
                "nu(0) must be positive (the one-site constant is nu(1)/nu(0))",
            ));
        }
        if tail_mass > tail_tolerance {
            return Err(Error::validation(format!(
                "truncation discards tail mass {tail_mass:e} > tolerance {tail_tolerance:e}; \
                 raise n_max or the tolerance"
            )));
        }
        let sum: f64 = nu.iter().sum();
        let nu: Vec<f64> = nu.into_iter().map(|v| v / sum).collect();
        let site = BirthDeathSite {
            nu,
            potential,
            tail_mass,
        };
        if let Some((n, r)) = site
            .ultra_log_concavity_residuals()
            .into_iter()
            .enumerate()
            .find(|&(n, r)| r < -1e-12 * site.nu[n + 1].powi(2).max(f64::MIN_POSITIVE))
        {
            return Err(Error::validation(format!(
                "weights are not ultra log-concave at n = {} (residual {r:e})",
                n + 1
            )));
        }
        Ok(site)
    }

    /// Poisson(lambda) truncated at n_max and renormalized.
    pub fn poisson(lambda: f64, n_max: usize) -> Result<Self> {
        Self::poisson_with_tail_tolerance(lambda, n_max, DEFAULT_TAIL_TOLERANCE)
    }

    pub fn poisson_with_tail_tolerance(
        lambda: f64,
        n_max: usize,
        tail_tolerance: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::validation("Poisson rate must be positive"));
        }
        let mut nu = Vec::with_capacity(n_max + 1);
        let mut w = (-lambda).exp();
        for n in 0..=n_max {
            nu.push(w);
            w *= lambda / (n + 1) as f64;
        }
        let kept: f64 = nu.iter().sum();
        let tail = (1.0 - kept).max(0.0);
        Self::with_tail_tolerance(nu, vec![0.0; n_max + 1], tail, tail_tolerance)
    }

    /// Replace the potential table, revalidating the site.
    pub fn with_potential(self, potential: Vec<f64>) -> Result<Self> {
        Self::with_tail_tolerance(self.nu, potential, self.tail_mass, f64::INFINITY)
    }

    pub fn n_max(&self) -> usize {
        self.nu.len() - 1
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn potential_sup(&self) -> f64 {
        self.potential.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// One-site entropy-decay constant C0 = exp(4 ||F||_inf) nu(1)/nu(0).
    pub fn c0(&self) -> f64 {
        (4.0 * self.potential_sup()).exp() * self.nu[1] / self.nu[0]
    }

    /// Residuals nu(n)^2 - ((n+1)/n) nu(n+1) nu(n-1) for n = 1..n_max-1.
    /// Nonnegative residuals mean the law is ultra log-concave.
    pub fn ultra_log_concavity_residuals(&self) -> Vec<f64> {
        (1..self.nu.len() - 1)
            .map(|n| {
                self.nu[n] * self.nu[n]
                    - (n as f64 + 1.0) / n as f64 * self.nu[n + 1] * self.nu[n - 1]
            })
            .collect()
    }

    /// Normalized base measure nu(x) exp(F(x)) / Z.
    pub fn base_weights(&self) -> Vec<f64> {
        let raw: Vec<f64> = self
            .nu
            .iter()
            .zip(&self.potential)
            .map(|(&n, &p)| n * p.exp())
            .collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / z).collect()
    }
}

/// Interaction-norm bookkeeping: exact sup norms of the pair tables and the
/// standard upper bounds they imply.
#[derive(Debug, Clone)]
pub struct InteractionNorms {
    /// pair_sup[(i, j)] = ||w_ij||_inf for coupled pairs, 0 elsewhere.
    pub pair_sup: DMatrix<f64>,
    /// (1/2) sum_{i,j} |J_ij| ||w_ij||_inf, an upper bound for ||W||_inf.
    pub total_bound: f64,
    /// site_bounds[k] = sum_{j != k} |J_jk| ||w_jk||_inf, an upper bound for
    /// the one-site interaction ||W_hat_k||_inf.
    pub site_bounds: Vec<f64>,
}

/// A Gibbs model: base measures, couplings, inverse temperature.
#[derive(Debug, Clone)]
pub struct GibbsModel {
    space: ConfigurationSpace,
    base: Vec<Vec<f64>>,
    applied_fields: Vec<Vec<f64>>,
    couplings: Vec<PairCoupling>,
    beta: f64,
    birth_death: Vec<Option<BirthDeathSite>>,
}

impl GibbsModel {
    /// Assemble and validate a model.
    ///
    /// `base_weights` are per-site positive weight vectors (normalized here);
    /// `field_log_weights`, when present, are per-site per-state additive
    /// terms absorbed into the base as exp(field). Couplings must reference
    /// distinct in-range sites, appear once per unordered pair, and carry
    /// tables of shape size_i x size_j.
    pub fn new(
        base_weights: Vec<Vec<f64>>,
        field_log_weights: Option<Vec<Vec<f64>>>,
        couplings: Vec<PairCoupling>,
        beta: f64,
    ) -> Result<Self> {
        let space = ConfigurationSpace::new(base_weights.iter().map(Vec::len).collect())?;
        let n = space.n_sites();
        let applied_fields = match field_log_weights {
            Some(fields) => {
                if fields.len() != n {
                    return Err(Error::validation(format!(
                        "fields: expected {n} per-site tables, found {}",
                        fields.len()
                    )));
                }
                for (k, f) in fields.iter().enumerate() {
                    if f.len() != space.site_size(k) {
                        return Err(Error::validation(format!(
                            "fields[{k}]: expected {} entries, found {}",
                            space.site_size(k),
                            f.len()
                        )));
                    }
                }
                fields
            }
            None => (0..n).map(|k| vec![0.0; space.site_size(k)]).collect(),
        };
        let mut base = Vec::with_capacity(n);
        for (k, (weights, field)) in base_weights.iter().zip(&applied_fields).enumerate() {
            let raw: Vec<f64> = weights
                .iter()
                .zip(field)
                .map(|(&w, &h)| w * h.exp())
                .collect();
            if raw.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::validation(format!(
                    "base measure at site {k} must be strictly positive and finite"
                )));
            }
            let z: f64 = raw.iter().sum();
            base.push(raw.into_iter().map(|v| v / z).collect());
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::validation(format!(
                "inverse temperature must be a finite nonnegative number, got {beta}"
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut normalized = Vec::with_capacity(couplings.len());
        for c in couplings {
            if c.i == c.j {
                return Err(Error::validation(format!(
                    "coupling at pair ({}, {}): the diagonal must vanish",
                    c.i, c.j
                )));
            }
            if c.i >= n || c.j >= n {
                return Err(Error::validation(format!(
                    "coupling at pair ({}, {}): site index out of range for {n} sites",
                    c.i, c.j
                )));
            }
            // store with i < j, transposing the table if needed
            let c = if c.i < c.j {
                c
            } else {
                let (si, sj) = (space.site_size(c.i), space.site_size(c.j));
                let mut t = vec![0.0; c.table.len()];
                for a in 0..si {
                    for b in 0..sj {
                        t[b * si + a] = c.table[a * sj + b];
                    }
                }
                PairCoupling::new(c.j, c.i, c.strength, t)
            };
            if c.table.len() != space.site_size(c.i) * space.site_size(c.j) {
                return Err(Error::validation(format!(
                    "coupling at pair ({}, {}): table has {} entries, expected {}",
                    c.i,
                    c.j,
                    c.table.len(),
                    space.site_size(c.i) * space.site_size(c.j)
                )));
            }
            if c.table.iter().any(|v| !v.is_finite()) || !c.strength.is_finite() {
                return Err(Error::validation(format!(
                    "coupling at pair ({}, {}): entries must be finite",
                    c.i, c.j
                )));
            }
            if !seen.insert((c.i, c.j)) {
                return Err(Error::validation(format!(
                    "coupling at pair ({}, {}) declared more than once",
                    c.i, c.j
                )));
            }
            if c.strength != 0.0 {
                normalized.push(c);
            }
        }
        let birth_death = vec![None; n];
        Ok(GibbsModel {
            space,
            base,
            applied_fields,
            couplings: normalized,
            beta,
            birth_death,
        })
    }

    /// Ising model on {-1,+1}^N encoded as {0,1} with 0 -> -1.
    ///
    /// `j` must be symmetric with zero diagonal; per-site external fields h
    /// are absorbed into the base measures as exp(h x).
    pub fn ising(j: &DMatrix<f64>, beta: f64, h: &[f64]) -> Result<Self> {
        let n = check_coupling_matrix(j)?;
        let h = expand_fields(n, h)?;
        let base = vec![vec![1.0, 1.0]; n];
        let fields: Vec<Vec<f64>> = h.iter().map(|&t| vec![-t, t]).collect();
        let couplings = couplings_from_matrix(j, |_, _| spin_product_table());
        GibbsModel::new(base, Some(fields), couplings, beta)
    }

    /// Mean-field Ising model: J_ij = 1/N off the diagonal.
    pub fn curie_weiss(n: usize, beta: f64, h: &[f64]) -> Result<Self> {
        if n < 2 {
            return Err(Error::validation(
                "the mean-field model needs at least two sites",
            ));
        }
        let mut j = DMatrix::from_element(n, n, 1.0 / n as f64);
        j.fill_diagonal(0.0);
        Self::ising(&j, beta, h)
    }

    /// Potts model with s states per site and equality interaction
    /// w(x_i, x_j) = 1(x_i = x_j). Site values are 1..=s for the field term,
    /// encoded as 0..s.
    pub fn potts(j: &DMatrix<f64>, s: usize, beta: f64, h: &[f64]) -> Result<Self> {
        if s < 2 {
            return Err(Error::validation("a Potts site needs at least two states"));
        }
        let n = check_coupling_matrix(j)?;
        let h = expand_fields(n, h)?;
        let base = vec![vec![1.0; s]; n];
        let fields: Vec<Vec<f64>> = h
            .iter()
            .map(|&t| (1..=s).map(|v| t * v as f64).collect())
            .collect();
        let couplings = couplings_from_matrix(j, |_, _| equality_table(s, s));
        GibbsModel::new(base, Some(fields), couplings, beta)
    }

    /// Interacting birth-death sites with the given pair couplings.
    pub fn birth_death(
        sites: Vec<BirthDeathSite>,
        couplings: Vec<PairCoupling>,
        beta: f64,
    ) -> Result<Self> {
        let base = sites.iter().map(BirthDeathSite::base_weights).collect();
        let mut model = GibbsModel::new(base, None, couplings, beta)?;
        model.birth_death = sites.into_iter().map(Some).collect();
        Ok(model)
    }

    /// Attach birth-death metadata to an existing site whose base already
    /// came from the given law.
    pub fn with_birth_death_site(mut self, k: usize, site: BirthDeathSite) -> Result<Self> {
        if k >= self.space.n_sites() {
            return Err(Error::validation(format!(
                "site index {k} out of range for {} sites",
                self.space.n_sites()
            )));
        }
        if site.n_max() + 1 != self.space.site_size(k) {
            return Err(Error::validation(format!(
                "birth-death levels 0..={} disagree with site size {}",
                site.n_max(),
                self.space.site_size(k)
            )));
        }
        self.birth_death[k] = Some(site);
        Ok(self)
    }

    pub fn space(&self) -> &ConfigurationSpace {
        &self.space
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Normalized base measure at site k (fields absorbed).
    pub fn base(&self, k: usize) -> &[f64] {
        &self.base[k]
    }

    /// The per-state field tables that were absorbed into the bases.
    pub fn applied_fields(&self) -> &[Vec<f64>] {
        &self.applied_fields
    }

    pub fn couplings(&self) -> &[PairCoupling] {
        &self.couplings
    }

    pub fn birth_death_site(&self, k: usize) -> Option<&BirthDeathSite> {
        self.birth_death[k].as_ref()
    }

    /// Largest one-site constant C0 across birth-death sites, if any.
    pub fn max_c0(&self) -> Option<f64> {
        self.birth_death
            .iter()
            .flatten()
            .map(BirthDeathSite::c0)
            .fold(None, |m, c| Some(m.map_or(c, |v: f64| v.max(c))))
    }

    /// Symmetric coupling matrix view.
    pub fn coupling_matrix(&self) -> DMatrix<f64> {
        let n = self.space.n_sites();
        let mut j = DMatrix::<f64>::zeros(n, n);
        for c in &self.couplings {
            j[(c.i, c.j)] = c.strength;
            j[(c.j, c.i)] = c.strength;
        }
        j
    }

    /// Pair function w_ij(x_i, x_j) for a coupled pair, in either orientation.
    pub fn pair_value(&self, i: usize, j: usize, xi: usize, xj: usize) -> f64 {
        for c in &self.couplings {
            if c.i == i && c.j == j {
                return c.table[xi * self.space.site_size(j) + xj];
            }
            if c.i == j && c.j == i {
                return c.table[xj * self.space.site_size(i) + xi];
            }
        }
        0.0
    }

    /// W(x) = (1/2) sum_{i,j} J_ij w_ij(x_i, x_j) = sum_{i<j} J_ij w_ij.
    pub fn interaction(&self, config: &[usize]) -> f64 {
        self.couplings
            .iter()
            .map(|c| c.strength * c.table[config[c.i] * self.space.site_size(c.j) + config[c.j]])
            .sum()
    }

    /// One-site interaction W_hat_k(x) = sum_{j != k} J_jk w_jk(x_j, x_k).
    pub fn one_site_interaction(&self, k: usize, config: &[usize]) -> f64 {
        self.couplings
            .iter()
            .filter(|c| c.i == k || c.j == k)
            .map(|c| c.strength * c.table[config[c.i] * self.space.site_size(c.j) + config[c.j]])
            .sum()
    }

    pub fn is_product(&self) -> bool {
        self.beta == 0.0 || self.couplings.is_empty()
    }

    /// Exact sup norms of the pair tables and the bounds they imply.
    pub fn interaction_norms(&self) -> InteractionNorms {
        let n = self.space.n_sites();
        let mut pair_sup = DMatrix::<f64>::zeros(n, n);
        let mut total = 0.0;
        let mut site_bounds = vec![0.0; n];
        for c in &self.couplings {
            let s = c.sup_norm();
            pair_sup[(c.i, c.j)] = s;
            pair_sup[(c.j, c.i)] = s;
            total += c.strength.abs() * s;
            site_bounds[c.i] += c.strength.abs() * s;
            site_bounds[c.j] += c.strength.abs() * s;
        }
        InteractionNorms {
            pair_sup,
            total_bound: total,
            site_bounds,
        }
    }

    /// Build mu(x) = mu_0(x) exp(beta W(x)) / Z as a dense measure.
    ///
    /// Strictly positive whenever the bases are, which `new` enforces. The
    /// exponent is shifted by its maximum before exponentiation.
    pub fn build_measure(&self) -> Result<Measure> {
        let space = &self.space;
        let n = space.total_size();
        let mut logw = vec![0.0; n];
        let mut cfg = vec![0usize; space.n_sites()];
        let mut max_lw = f64::NEG_INFINITY;
        for (idx, lw) in logw.iter_mut().enumerate() {
            space.decode_into(idx, &mut cfg);
            let mut v = 0.0;
            for (k, &c) in cfg.iter().enumerate() {
                v += self.base[k][c].ln();
            }
            v += self.beta * self.interaction(&cfg);
            *lw = v;
            max_lw = max_lw.max(v);
        }
        let weights: Vec<f64> = logw.into_iter().map(|lw| (lw - max_lw).exp()).collect();
        Measure::from_weights(space.clone(), weights)
    }
}

fn check_coupling_matrix(j: &DMatrix<f64>) -> Result<usize> {
    if j.nrows() != j.ncols() {
        return Err(Error::validation(format!(
            "coupling matrix must be square, got {}x{}",
            j.nrows(),
            j.ncols()
        )));
    }
    let n = j.nrows();
    for a in 0..n {
        if j[(a, a)] != 0.0 {
            return Err(Error::validation(format!(
                "coupling matrix must have zero diagonal, J[{a},{a}] = {}",
                j[(a, a)]
            )));
        }
        for b in 0..a {
            if j[(a, b)] != j[(b, a)] {
                return Err(Error::validation(format!(
                    "coupling matrix must be symmetric, J[{a},{b}] = {} but J[{b},{a}] = {}",
                    j[(a, b)],
                    j[(b, a)]
                )));
            }
        }
    }
    Ok(n)
}

fn expand_fields(n: usize, h: &[f64]) -> Result<Vec<f64>> {
    match h.len() {
        0 => Ok(vec![0.0; n]),
        l if l == n => Ok(h.to_vec()),
        l => Err(Error::validation(format!(
            "expected {n} external fields (or none), found {l}"
        ))),
    }
}

fn couplings_from_matrix(
    j: &DMatrix<f64>,
    table: impl Fn(usize, usize) -> Vec<f64>,
) -> Vec<PairCoupling> {
    let n = j.nrows();
    let mut out = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if j[(a, b)] != 0.0 {
                out.push(PairCoupling::new(a, b, j[(a, b)], table(a, b)));
            }
        }
    }
    out
}

/// Spin value of a binary coordinate: 0 -> -1, 1 -> +1.
pub fn spin(value: usize) -> f64 {
    2.0 * value as f64 - 1.0
}

fn spin_product_table() -> Vec<f64> {
    vec![1.0, -1.0, -1.0, 1.0]
}

fn equality_table(si: usize, sj: usize) -> Vec<f64> {
    let mut t = vec![0.0; si * sj];
    for a in 0..si.min(sj) {
        t[a * sj + a] = 1.0;
    }
    t
}

/// Verify by enumeration that every one-site conditional of the built
/// measure matches the closed form mu_0k(x_k) exp(beta W_hat_k(x)) / Z.
/// Returns the largest absolute deviation. Used by tests and diagnostics.
pub fn one_site_conditional_residual(model: &GibbsModel, mu: &Measure) -> Result<f64> {
    let space = model.space();
    let mut worst: f64 = 0.0;
    let mut cfg = vec![0usize; space.n_sites()];
    for k in 0..space.n_sites() {
        for idx in 0..space.total_size() {
            space.decode_into(idx, &mut cfg);
            let cond = conditional_at(mu, k, idx)?;
            let mut raw = Vec::with_capacity(space.site_size(k));
            for v in 0..space.site_size(k) {
                cfg[k] = v;
                raw.push(model.base(k)[v] * (model.beta() * model.one_site_interaction(k, &cfg)).exp());
            }
            let z: f64 = raw.iter().sum();
            for (v, &r) in raw.iter().enumerate() {
                worst = worst.max((cond[v] - r / z).abs());
            }
        }
    }
    Ok(worst)
}

/// Check the perturbation sandwich exp(-2 beta b_k) <= mu_k(x_k)/mu_0k(x_k)
/// <= exp(2 beta b_k) with b_k the one-site interaction bound. Returns the
/// worst (most negative) slack across sites, states, and sandwich sides.
pub fn conditional_sandwich_slack(model: &GibbsModel, mu: &Measure) -> Result<f64> {
    let space = model.space();
    let norms = model.interaction_norms();
    let mut worst = f64::INFINITY;
    for k in 0..space.n_sites() {
        let bound = (2.0 * model.beta() * norms.site_bounds[k]).exp();
        for idx in 0..space.total_size() {
            let cond = conditional_at(mu, k, idx)?;
            for (v, &p) in cond.iter().enumerate() {
                let ratio = p / model.base(k)[v];
                worst = worst.min(bound - ratio);
                worst = worst.min(ratio - 1.0 / bound);
            }
        }
    }
    Ok(worst)
}
