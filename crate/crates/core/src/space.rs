//! Finite product configuration spaces, probability measures, and the
//! entropy/variance/covariance functionals everything else consumes.
//!
//! The state space is a product Omega = Omega_1 x ... x Omega_N where each
//! factor is a finite set {0, ..., n_k - 1}. States are flattened with a
//! mixed-radix encoding, site 0 least significant, so iterating a single-site
//! slice walks memory with a fixed stride.
//!
//! All entropy code uses the convention 0*log(0) = 0, and conditional slices
//! of zero mass are skipped in expectations (they carry no weight). An
//! explicit request for a conditional distribution on a zero-mass slice is an
//! error.

use crate::error::{Error, Result};

/// Hard cap on the number of states a dense field may hold.
pub const MAX_STATES: usize = 1 << 24;

/// Default relative tolerance for internal consistency contracts.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Tolerance on the total mass of a probability measure.
pub const MEASURE_SUM_TOL: f64 = 1e-12;

/// x * ln(x) extended by continuity with 0*ln(0) = 0.
#[inline]
pub(crate) fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// A finite product space with mixed-radix flat indexing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigurationSpace {
    site_sizes: Vec<usize>,
    strides: Vec<usize>,
    total_size: usize,
}

impl ConfigurationSpace {
    /// Build a product space from per-site cardinalities.
    ///
    /// Rejects empty site lists, zero-size sites, and products above
    /// [`MAX_STATES`].
    pub fn new(site_sizes: Vec<usize>) -> Result<Self> {
        if site_sizes.is_empty() {
            return Err(Error::validation(
                "a configuration space needs at least one site",
            ));
        }
        let mut strides = Vec::with_capacity(site_sizes.len());
        let mut total: usize = 1;
        for (k, &s) in site_sizes.iter().enumerate() {
            if s == 0 {
                return Err(Error::validation(format!("site {k} has size zero")));
            }
            strides.push(total);
            total = total
                .checked_mul(s)
                .filter(|&t| t <= MAX_STATES)
                .ok_or(Error::Capacity {
                    requested: site_sizes.iter().map(|&x| x as u128).product(),
                    limit: MAX_STATES as u128,
                })?;
        }
        Ok(ConfigurationSpace {
            site_sizes,
            strides,
            total_size: total,
        })
    }

    /// N independent binary sites.
    pub fn bits(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    pub fn n_sites(&self) -> usize {
        self.site_sizes.len()
    }

    pub fn site_sizes(&self) -> &[usize] {
        &self.site_sizes
    }

    pub fn site_size(&self, k: usize) -> usize {
        self.site_sizes[k]
    }

    pub fn total_size(&self) -> usize {
        self.total_size
    }

    pub fn stride(&self, k: usize) -> usize {
        self.strides[k]
    }

    /// Flat index of a configuration (site 0 least significant).
    pub fn index_of(&self, config: &[usize]) -> Result<usize> {
        if config.len() != self.site_sizes.len() {
            return Err(Error::ShapeMismatch {
                expected: self.site_sizes.len(),
                found: config.len(),
            });
        }
        let mut idx = 0;
        for (k, (&c, &s)) in config.iter().zip(&self.site_sizes).enumerate() {
            if c >= s {
                return Err(Error::CoordOutOfRange {
                    site: k,
                    value: c,
                    size: s,
                });
            }
            idx += c * self.strides[k];
        }
        Ok(idx)
    }

    /// Configuration tuple of a flat index.
    pub fn config_of(&self, index: usize) -> Vec<usize> {
        let mut cfg = vec![0; self.site_sizes.len()];
        self.decode_into(index, &mut cfg);
        cfg
    }

    pub fn decode_into(&self, index: usize, out: &mut [usize]) {
        let mut rest = index;
        for (c, &s) in out.iter_mut().zip(&self.site_sizes) {
            *c = rest % s;
            rest /= s;
        }
    }

    /// Value of coordinate `k` in the state with flat index `index`.
    #[inline]
    pub fn site_value(&self, index: usize, k: usize) -> usize {
        (index / self.strides[k]) % self.site_sizes[k]
    }

    /// Flat index obtained from `index` by replacing coordinate `k` with `value`.
    #[inline]
    pub fn with_site(&self, index: usize, k: usize, value: usize) -> usize {
        index - self.site_value(index, k) * self.strides[k] + value * self.strides[k]
    }

    /// Number of single-site slices along site `k`.
    #[inline]
    pub(crate) fn n_slices(&self, k: usize) -> usize {
        self.total_size / self.site_sizes[k]
    }

    /// Base index (coordinate `k` set to 0) of the `slice`-th slice along `k`.
    #[inline]
    pub(crate) fn slice_base(&self, k: usize, slice: usize) -> usize {
        let stride = self.strides[k];
        let block = stride * self.site_sizes[k];
        (slice % stride) + (slice / stride) * block
    }
}

/// A real-valued function on a configuration space, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    space: ConfigurationSpace,
    values: Vec<f64>,
}

impl Field {
    pub fn new(space: ConfigurationSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.total_size() {
            return Err(Error::ShapeMismatch {
                expected: space.total_size(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite field entry {} at state {i}",
                values[i]
            )));
        }
        Ok(Field { space, values })
    }

    pub fn constant(space: ConfigurationSpace, value: f64) -> Self {
        let n = space.total_size();
        Field {
            space,
            values: vec![value; n],
        }
    }

    pub fn space(&self) -> &ConfigurationSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Apply an entrywise map, keeping the space.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            space: self.space.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Entrywise natural logarithm; requires strict positivity.
    pub fn ln(&self) -> Result<Field> {
        self.ensure_strictly_positive()?;
        Ok(self.map(f64::ln))
    }

    /// Entrywise square root; requires nonnegativity.
    pub fn sqrt(&self) -> Result<Field> {
        self.ensure_nonnegative()?;
        Ok(self.map(f64::sqrt))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    pub(crate) fn ensure_nonnegative(&self) -> Result<()> {
        match self.values.iter().position(|&v| v < 0.0) {
            None => Ok(()),
            Some(i) => Err(Error::NegativeEntry {
                index: i,
                value: self.values[i],
            }),
        }
    }

    pub(crate) fn ensure_strictly_positive(&self) -> Result<()> {
        match self.values.iter().position(|&v| v <= 0.0) {
            None => Ok(()),
            Some(i) => Err(Error::NonpositiveEntry {
                index: i,
                value: self.values[i],
            }),
        }
    }
}

/// A probability measure on a configuration space, stored densely.
///
/// Entries are nonnegative and sum to one within [`MEASURE_SUM_TOL`].
/// Zero entries are allowed; operations that require strict positivity
/// check it explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    space: ConfigurationSpace,
    weights: Vec<f64>,
}

impl Measure {
    pub fn new(space: ConfigurationSpace, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.total_size() {
            return Err(Error::ShapeMismatch {
                expected: space.total_size(),
                found: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::validation(format!(
                "measure entry {} at state {i} is not a finite nonnegative number",
                weights[i]
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > MEASURE_SUM_TOL {
            return Err(Error::validation(format!(
                "measure entries sum to {sum}, expected 1 within {MEASURE_SUM_TOL:e}"
            )));
        }
        Ok(Measure { space, weights })
    }

    /// Normalize nonnegative weights into a probability measure.
    pub fn from_weights(space: ConfigurationSpace, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.total_size() {
            return Err(Error::ShapeMismatch {
                expected: space.total_size(),
                found: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::validation(format!(
                "weight {} at state {i} is not a finite nonnegative number",
                weights[i]
            )));
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::validation("weights sum to zero"));
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(Measure { space, weights })
    }

    pub fn uniform(space: ConfigurationSpace) -> Self {
        let n = space.total_size();
        Measure {
            space,
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Tensor product of per-site probability vectors.
    pub fn product(space: ConfigurationSpace, factors: &[Vec<f64>]) -> Result<Self> {
        if factors.len() != space.n_sites() {
            return Err(Error::validation(format!(
                "expected {} per-site factors, found {}",
                space.n_sites(),
                factors.len()
            )));
        }
        for (k, f) in factors.iter().enumerate() {
            if f.len() != space.site_size(k) {
                return Err(Error::validation(format!(
                    "factor {k} has {} entries, site size is {}",
                    f.len(),
                    space.site_size(k)
                )));
            }
        }
        let mut weights = vec![0.0; space.total_size()];
        let mut cfg = vec![0usize; space.n_sites()];
        for (idx, w) in weights.iter_mut().enumerate() {
            space.decode_into(idx, &mut cfg);
            *w = cfg
                .iter()
                .zip(factors)
                .map(|(&c, f)| f[c])
                .product::<f64>();
        }
        Measure::from_weights(space, weights)
    }

    pub fn space(&self) -> &ConfigurationSpace {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, index: usize) -> f64 {
        self.weights[index]
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
    }

    pub(crate) fn ensure_strictly_positive(&self) -> Result<()> {
        if self.is_strictly_positive() {
            Ok(())
        } else {
            Err(Error::validation(
                "operation requires a strictly positive measure",
            ))
        }
    }

    /// Expectation of a function.
    pub fn mean(&self, f: &Field) -> Result<f64> {
        ensure_same_space(self.space(), f.space())?;
        Ok(self
            .weights
            .iter()
            .zip(f.values())
            .map(|(&w, &v)| w * v)
            .sum())
    }

    /// Single-site marginal distribution.
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.space.site_size(k)];
        for (idx, &w) in self.weights.iter().enumerate() {
            out[self.space.site_value(idx, k)] += w;
        }
        out
    }
}

pub(crate) fn ensure_same_space(a: &ConfigurationSpace, b: &ConfigurationSpace) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            expected: a.total_size(),
            found: b.total_size(),
        })
    }
}

/// Relative entropy functional Ent_mu(f) = mu[f log f] - mu[f] log mu[f].
///
/// Requires f >= 0; returns a nonnegative number (up to roundoff) that is
/// zero iff f is constant on the support of mu.
pub fn entropy(f: &Field, mu: &Measure) -> Result<f64> {
    ensure_same_space(mu.space(), f.space())?;
    f.ensure_nonnegative()?;
    let mut mflf = 0.0;
    let mut mf = 0.0;
    for (&w, &v) in mu.weights().iter().zip(f.values()) {
        if w > 0.0 {
            mflf += w * xlogx(v);
            mf += w * v;
        }
    }
    Ok(mflf - xlogx(mf))
}

/// var_mu(g) = mu[g^2] - mu[g]^2, evaluated in centered form.
pub fn variance(g: &Field, mu: &Measure) -> Result<f64> {
    ensure_same_space(mu.space(), g.space())?;
    let m = mu.mean(g)?;
    Ok(mu
        .weights()
        .iter()
        .zip(g.values())
        .map(|(&w, &v)| w * (v - m) * (v - m))
        .sum())
}

/// cov_mu(f, g) = mu[f g] - mu[f] mu[g], evaluated in centered form.
pub fn covariance(f: &Field, g: &Field, mu: &Measure) -> Result<f64> {
    ensure_same_space(mu.space(), f.space())?;
    ensure_same_space(mu.space(), g.space())?;
    let mf = mu.mean(f)?;
    let mg = mu.mean(g)?;
    Ok(mu
        .weights()
        .iter()
        .zip(f.values().iter().zip(g.values()))
        .map(|(&w, (&a, &b))| w * (a - mf) * (b - mg))
        .sum())
}

/// Conditional distribution on Omega_k given the other coordinates of `config`
/// (the k-th entry of `config` is ignored).
pub fn conditional(mu: &Measure, k: usize, config: &[usize]) -> Result<Vec<f64>> {
    let idx = {
        // Validate all coordinates except k, which is irrelevant here.
        let mut cfg = config.to_vec();
        if k >= mu.space().n_sites() {
            return Err(Error::validation(format!(
                "site index {k} out of range for {} sites",
                mu.space().n_sites()
            )));
        }
        cfg[k] = 0;
        mu.space().index_of(&cfg)?
    };
    conditional_at(mu, k, idx)
}

/// Conditional distribution on Omega_k for the slice through flat state `index`.
pub fn conditional_at(mu: &Measure, k: usize, index: usize) -> Result<Vec<f64>> {
    let space = mu.space();
    let stride = space.stride(k);
    let size = space.site_size(k);
    let base = index - space.site_value(index, k) * stride;
    let mut probs = Vec::with_capacity(size);
    let mut mass = 0.0;
    for v in 0..size {
        let w = mu.weight(base + v * stride);
        mass += w;
        probs.push(w);
    }
    if !(mass > 0.0) {
        return Err(Error::ZeroMassSlice { site: k });
    }
    for p in &mut probs {
        *p /= mass;
    }
    Ok(probs)
}

/// Conditional expectation mu_k[f]: the function x -> E_mu[f | x_j, j != k],
/// as a dense field constant along coordinate k. Errors if some slice along
/// k has zero mass.
pub fn site_expectation(f: &Field, mu: &Measure, k: usize) -> Result<Field> {
    ensure_same_space(mu.space(), f.space())?;
    let space = mu.space();
    let stride = space.stride(k);
    let size = space.site_size(k);
    let mut out = vec![0.0; space.total_size()];
    for s in 0..space.n_slices(k) {
        let base = space.slice_base(k, s);
        let mut mass = 0.0;
        let mut mf = 0.0;
        for v in 0..size {
            let idx = base + v * stride;
            let w = mu.weight(idx);
            mass += w;
            mf += w * f.value(idx);
        }
        if !(mass > 0.0) {
            return Err(Error::ZeroMassSlice { site: k });
        }
        let mean = mf / mass;
        for v in 0..size {
            out[base + v * stride] = mean;
        }
    }
    Field::new(space.clone(), out)
}

/// mu[Ent_{mu_k}(f)], the k-th summand of the local entropy sum.
///
/// Slices of zero mass contribute nothing.
pub fn site_entropy_term(f: &Field, mu: &Measure, k: usize) -> Result<f64> {
    ensure_same_space(mu.space(), f.space())?;
    f.ensure_nonnegative()?;
    let space = mu.space();
    let stride = space.stride(k);
    let size = space.site_size(k);
    let mut total = 0.0;
    for s in 0..space.n_slices(k) {
        let base = space.slice_base(k, s);
        let mut mass = 0.0;
        let mut mf = 0.0;
        let mut mflf = 0.0;
        for v in 0..size {
            let idx = base + v * stride;
            let w = mu.weight(idx);
            if w > 0.0 {
                mass += w;
                mf += w * f.value(idx);
                mflf += w * xlogx(f.value(idx));
            }
        }
        if mass > 0.0 && mf > 0.0 {
            // mass * Ent_slice, written without forming the conditional.
            total += mflf - mf * (mf / mass).ln();
        }
    }
    Ok(total)
}

/// mu[var_{mu_k}(g)], the k-th summand of the local variance sum.
pub fn site_variance_term(g: &Field, mu: &Measure, k: usize) -> Result<f64> {
    site_covariance_term(g, g, mu, k)
}

/// mu[cov_{mu_k}(f, g)], the k-th summand of the Dirichlet form.
pub fn site_covariance_term(f: &Field, g: &Field, mu: &Measure, k: usize) -> Result<f64> {
    ensure_same_space(mu.space(), f.space())?;
    ensure_same_space(mu.space(), g.space())?;
    let space = mu.space();
    let stride = space.stride(k);
    let size = space.site_size(k);
    let mut total = 0.0;
    for s in 0..space.n_slices(k) {
        let base = space.slice_base(k, s);
        let mut mass = 0.0;
        let mut mf = 0.0;
        let mut mg = 0.0;
        for v in 0..size {
            let idx = base + v * stride;
            let w = mu.weight(idx);
            mass += w;
            mf += w * f.value(idx);
            mg += w * g.value(idx);
        }
        if mass > 0.0 {
            let cf = mf / mass;
            let cg = mg / mass;
            let mut cov = 0.0;
            for v in 0..size {
                let idx = base + v * stride;
                cov += mu.weight(idx) * (f.value(idx) - cf) * (g.value(idx) - cg);
            }
            total += cov;
        }
    }
    Ok(total)
}

/// sum_k mu[Ent_{mu_k}(f)], the right-hand side of the tensorization bound.
pub fn local_entropy_sum(f: &Field, mu: &Measure) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..mu.space().n_sites() {
        total += site_entropy_term(f, mu, k)?;
    }
    Ok(total)
}

/// Validate a block (subset of sites) and return its membership mask.
pub(crate) fn block_mask(n_sites: usize, block: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; n_sites];
    for &j in block {
        if j >= n_sites {
            return Err(Error::validation(format!(
                "block site {j} out of range for {n_sites} sites"
            )));
        }
        if mask[j] {
            return Err(Error::validation(format!("block repeats site {j}")));
        }
        mask[j] = true;
    }
    Ok(mask)
}

/// Sites not in `block`.
pub fn complement_block(n_sites: usize, block: &[usize]) -> Result<Vec<usize>> {
    let mask = block_mask(n_sites, block)?;
    Ok((0..n_sites).filter(|&j| !mask[j]).collect())
}

// Group key: the flat index with coordinates outside `kept` zeroed out.
fn group_key(space: &ConfigurationSpace, index: usize, kept: &[bool]) -> usize {
    let mut key = 0;
    for (j, &keep) in kept.iter().enumerate() {
        if keep {
            key += space.site_value(index, j) * space.stride(j);
        }
    }
    key
}

/// f_B = mu[f | x_B]: the conditional expectation of f given the coordinates
/// in `block`, as a function constant along the complementary coordinates.
///
/// On slices of zero mu-mass the value is set to zero; those states carry no
/// weight in any downstream expectation. An empty block yields the constant
/// mu[f].
pub fn marginal_density(f: &Field, mu: &Measure, block: &[usize]) -> Result<Field> {
    ensure_same_space(mu.space(), f.space())?;
    f.ensure_nonnegative()?;
    let space = mu.space();
    let kept = block_mask(space.n_sites(), block)?;
    let n = space.total_size();
    let mut mass = vec![0.0; n];
    let mut mf = vec![0.0; n];
    let mut keys = vec![0usize; n];
    for (idx, slot) in keys.iter_mut().enumerate() {
        let key = group_key(space, idx, &kept);
        *slot = key;
        let w = mu.weight(idx);
        mass[key] += w;
        mf[key] += w * f.value(idx);
    }
    let values = keys
        .iter()
        .map(|&key| if mass[key] > 0.0 { mf[key] / mass[key] } else { 0.0 })
        .collect();
    Field::new(space.clone(), values)
}

/// mu[Ent_{mu_B}(f)] where mu_B resamples the coordinates in `block` given
/// the rest. Zero-mass slices are skipped.
pub fn block_entropy_term(f: &Field, mu: &Measure, block: &[usize]) -> Result<f64> {
    ensure_same_space(mu.space(), f.space())?;
    f.ensure_nonnegative()?;
    let space = mu.space();
    let resampled = block_mask(space.n_sites(), block)?;
    let kept: Vec<bool> = resampled.iter().map(|&b| !b).collect();
    let n = space.total_size();
    let mut mass = vec![0.0; n];
    let mut mf = vec![0.0; n];
    let mut mflf = vec![0.0; n];
    let mut seen: Vec<usize> = Vec::new();
    for idx in 0..n {
        let w = mu.weight(idx);
        if w > 0.0 {
            let key = group_key(space, idx, &kept);
            if mass[key] == 0.0 && mf[key] == 0.0 && mflf[key] == 0.0 {
                seen.push(key);
            }
            mass[key] += w;
            mf[key] += w * f.value(idx);
            mflf[key] += w * xlogx(f.value(idx));
        }
    }
    let mut total = 0.0;
    for &key in &seen {
        if mass[key] > 0.0 && mf[key] > 0.0 {
            total += mflf[key] - mf[key] * (mf[key] / mass[key]).ln();
        }
    }
    Ok(total)
}

/// Residual of the exact decomposition
/// Ent_mu(f) = Ent_mu(f_B) + mu[Ent_{mu_{B^c}}(f)].
pub fn decomposition_check(f: &Field, mu: &Measure, block: &[usize]) -> Result<f64> {
    let ent = entropy(f, mu)?;
    let fb = marginal_density(f, mu, block)?;
    let ent_fb = entropy(&fb, mu)?;
    let comp = complement_block(mu.space().n_sites(), block)?;
    let inner = block_entropy_term(f, mu, &comp)?;
    Ok(ent - ent_fb - inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_positive_field, trial_rng};
    use proptest::prelude::*;

    fn bits2() -> ConfigurationSpace {
        ConfigurationSpace::bits(2).unwrap()
    }

    #[test]
    fn index_of_zero_config_is_zero() {
        let sp = bits2();
        assert_eq!(sp.index_of(&[0, 0]).unwrap(), 0);
    }

    #[test]
    fn index_of_site_zero_is_least_significant() {
        let sp = bits2();
        assert_eq!(sp.index_of(&[1, 0]).unwrap(), 1);
    }

    #[test]
    fn index_of_mixed_radix_enumeration() {
        // sizes (2,3): configs in index order are
        // (0,0),(1,0),(0,1),(1,1),(0,2),(1,2) so (1,2) -> 5.
        let sp = ConfigurationSpace::new(vec![2, 3]).unwrap();
        assert_eq!(sp.index_of(&[1, 2]).unwrap(), 5);
        for idx in 0..sp.total_size() {
            assert_eq!(sp.index_of(&sp.config_of(idx)).unwrap(), idx);
        }
    }

    #[test]
    fn index_of_rejects_out_of_range() {
        let sp = bits2();
        assert!(matches!(
            sp.index_of(&[2, 0]),
            Err(Error::CoordOutOfRange { site: 0, .. })
        ));
    }

    #[test]
    fn space_rejects_capacity_overflow() {
        assert!(matches!(
            ConfigurationSpace::new(vec![2; 25]),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn entropy_of_constant_is_zero() {
        let sp = bits2();
        let mu = Measure::uniform(sp.clone());
        let f = Field::constant(sp, 1.0);
        assert_eq!(entropy(&f, &mu).unwrap(), 0.0);
    }

    #[test]
    fn entropy_two_point_example() {
        let sp = ConfigurationSpace::new(vec![2]).unwrap();
        let mu = Measure::uniform(sp.clone());
        let f = Field::new(sp, vec![2.0, 0.0]).unwrap();
        let expect = std::f64::consts::LN_2; // (1/2)(2 ln 2) - 1 ln 1
        assert!((entropy(&f, &mu).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn entropy_indicator_example() {
        let sp = bits2();
        let mu = Measure::uniform(sp.clone());
        let mut v = vec![0.0; 4];
        v[0] = 4.0;
        let f = Field::new(sp, v).unwrap();
        assert!((entropy(&f, &mu).unwrap() - 4.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn entropy_rejects_negative_entries() {
        let sp = bits2();
        let mu = Measure::uniform(sp.clone());
        let f = Field::new(sp, vec![1.0, -0.5, 1.0, 1.0]).unwrap();
        assert!(matches!(
            entropy(&f, &mu),
            Err(Error::NegativeEntry { index: 1, .. })
        ));
    }

    #[test]
    fn variance_and_covariance_examples() {
        let sp = ConfigurationSpace::new(vec![2]).unwrap();
        let mu = Measure::uniform(sp.clone());
        let g = Field::new(sp.clone(), vec![0.0, 1.0]).unwrap();
        let c = Field::constant(sp.clone(), 3.0);
        assert_eq!(variance(&c, &mu).unwrap(), 0.0);
        assert!((variance(&g, &mu).unwrap() - 0.25).abs() < 1e-15);
        let h = Field::new(sp, vec![1.0, 0.0]).unwrap();
        assert!((covariance(&g, &h, &mu).unwrap() + 0.25).abs() < 1e-15);
        assert!(
            (covariance(&g, &g, &mu).unwrap() - variance(&g, &mu).unwrap()).abs() < 1e-15
        );
    }

    #[test]
    fn conditional_of_product_measure_is_the_factor() {
        let sp = ConfigurationSpace::new(vec![2, 3]).unwrap();
        let factors = vec![vec![0.3, 0.7], vec![0.2, 0.5, 0.3]];
        let mu = Measure::product(sp, &factors).unwrap();
        for other in 0..2 {
            let cond = conditional(&mu, 1, &[other, 0]).unwrap();
            for (p, q) in cond.iter().zip(&factors[1]) {
                assert!((p - q).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn conditional_sums_to_one() {
        let sp = ConfigurationSpace::new(vec![2, 3, 2]).unwrap();
        let mut rng = trial_rng(11, 0);
        let f = random_positive_field(&sp, 1.5, &mut rng);
        let mu = Measure::from_weights(sp, f.values().to_vec()).unwrap();
        for k in 0..3 {
            for idx in 0..mu.space().total_size() {
                let c = conditional_at(&mu, k, idx).unwrap();
                let s: f64 = c.iter().sum();
                assert!((s - 1.0).abs() <= 1e-12, "site {k} state {idx}: sum {s}");
            }
        }
    }

    #[test]
    fn conditional_errors_on_zero_mass_slice() {
        let sp = bits2();
        // All mass on states with x1 = 1; the slice x1 = 0 is unsupported
        // when conditioning site 0 at x1 = 0.
        let mu = Measure::new(sp, vec![0.0, 0.0, 0.5, 0.5]).unwrap();
        assert!(matches!(
            conditional(&mu, 0, &[0, 0]),
            Err(Error::ZeroMassSlice { site: 0 })
        ));
    }

    #[test]
    fn site_expectation_tower_property_and_invariance() {
        let sp = ConfigurationSpace::new(vec![2, 3, 2]).unwrap();
        let mut rng = trial_rng(3, 1);
        let w = random_positive_field(&sp, 1.0, &mut rng);
        let mu = Measure::from_weights(sp.clone(), w.values().to_vec()).unwrap();
        let f = random_positive_field(&sp, 2.0, &mut rng);
        for k in 0..3 {
            let ef = site_expectation(&f, &mu, k).unwrap();
            assert!((mu.mean(&ef).unwrap() - mu.mean(&f).unwrap()).abs() < 1e-13);
            // constant along coordinate k
            for idx in 0..sp.total_size() {
                let other = sp.with_site(idx, k, 0);
                assert!((ef.value(idx) - ef.value(other)).abs() < 1e-15);
            }
        }
        // f independent of x_k is fixed by mu_k
        let g = Field::new(
            sp.clone(),
            (0..sp.total_size())
                .map(|i| sp.site_value(i, 1) as f64)
                .collect(),
        )
        .unwrap();
        let eg = site_expectation(&g, &mu, 0).unwrap();
        for idx in 0..sp.total_size() {
            assert!((eg.value(idx) - g.value(idx)).abs() < 1e-14);
        }
    }

    #[test]
    fn spin_product_has_zero_conditional_mean() {
        // two uniform bits, f = x1*x2 in spin values, averaging over site 1
        let sp = bits2();
        let mu = Measure::uniform(sp.clone());
        let spin = |b: usize| 2.0 * b as f64 - 1.0;
        let f = Field::new(
            sp.clone(),
            (0..4)
                .map(|i| spin(sp.site_value(i, 0)) * spin(sp.site_value(i, 1)))
                .collect(),
        )
        .unwrap();
        let ef = site_expectation(&f, &mu, 1).unwrap();
        for idx in 0..4 {
            assert!(ef.value(idx).abs() < 1e-15);
        }
    }

    #[test]
    fn local_entropy_sum_single_site_equals_entropy() {
        let sp = ConfigurationSpace::new(vec![4]).unwrap();
        let mu = Measure::from_weights(sp.clone(), vec![0.1, 0.4, 0.3, 0.2]).unwrap();
        let f = Field::new(sp, vec![0.5, 2.0, 1.0, 3.0]).unwrap();
        let lhs = local_entropy_sum(&f, &mu).unwrap();
        let rhs = entropy(&f, &mu).unwrap();
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn tensorization_holds_on_product_measures() {
        let sp = ConfigurationSpace::new(vec![2, 3, 2]).unwrap();
        let mu = Measure::product(
            sp.clone(),
            &[vec![0.4, 0.6], vec![0.2, 0.3, 0.5], vec![0.7, 0.3]],
        )
        .unwrap();
        for trial in 0..20 {
            let mut rng = trial_rng(77, trial);
            let f = random_positive_field(&sp, 2.0, &mut rng);
            let ent = entropy(&f, &mu).unwrap();
            let sum = local_entropy_sum(&f, &mu).unwrap();
            assert!(sum >= ent - 1e-12 * (1.0 + ent.abs()));
        }
    }

    #[test]
    fn marginal_density_examples() {
        let sp = bits2();
        let mu = Measure::uniform(sp.clone());
        let mut v = vec![0.0; 4];
        v[0] = 4.0;
        let f = Field::new(sp.clone(), v).unwrap();
        // B = all sites: f itself
        let fb = marginal_density(&f, &mu, &[0, 1]).unwrap();
        assert_eq!(fb.values(), f.values());
        // B = {} : constant mean
        let f0 = marginal_density(&f, &mu, &[]).unwrap();
        for &v in f0.values() {
            assert!((v - 1.0).abs() < 1e-15);
        }
        // B = {second site}: average over the first coordinate: (2,0) along x2
        let f1 = marginal_density(&f, &mu, &[1]).unwrap();
        for idx in 0..4 {
            let expect = if sp.site_value(idx, 1) == 0 { 2.0 } else { 0.0 };
            assert!((f1.value(idx) - expect).abs() < 1e-15);
        }
        // mean preservation
        assert!((mu.mean(&f1).unwrap() - mu.mean(&f).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn decomposition_residual_vanishes() {
        let sp = ConfigurationSpace::bits(3).unwrap();
        let mut rng = trial_rng(5, 9);
        let w = random_positive_field(&sp, 1.0, &mut rng);
        let mu = Measure::from_weights(sp.clone(), w.values().to_vec()).unwrap();
        for trial in 0..20 {
            let mut rng = trial_rng(6, trial);
            let f = random_positive_field(&sp, 2.0, &mut rng);
            let ent = entropy(&f, &mu).unwrap();
            for block in [vec![], vec![0], vec![0, 1], vec![2], vec![0, 1, 2]] {
                let r = decomposition_check(&f, &mu, &block).unwrap();
                assert!(
                    r.abs() <= 1e-12 * (1.0 + ent),
                    "block {block:?}: residual {r}"
                );
            }
        }
    }

    #[test]
    fn decomposition_full_block_is_exact_zero_structurally() {
        let sp = bits2();
        let mu = Measure::uniform(sp.clone());
        let f = Field::new(sp, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = decomposition_check(&f, &mu, &[0, 1]).unwrap();
        assert!(r.abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn prop_index_roundtrip(sizes in proptest::collection::vec(1usize..4, 1..5), seed in 0u64..1000) {
            let sp = ConfigurationSpace::new(sizes).unwrap();
            let idx = (seed as usize) % sp.total_size();
            prop_assert_eq!(sp.index_of(&sp.config_of(idx)).unwrap(), idx);
        }

        #[test]
        fn prop_entropy_nonnegative_and_homogeneous(seed in 0u64..500, lambda in 0.1f64..10.0) {
            let sp = ConfigurationSpace::new(vec![2, 3]).unwrap();
            let mut rng = trial_rng(400, seed);
            let w = random_positive_field(&sp, 1.0, &mut rng);
            let mu = Measure::from_weights(sp.clone(), w.values().to_vec()).unwrap();
            let f = random_positive_field(&sp, 3.0, &mut rng);
            let ent = entropy(&f, &mu).unwrap();
            prop_assert!(ent >= -1e-13 * (1.0 + ent.abs()));
            let scaled = f.map(|v| lambda * v);
            let ent_scaled = entropy(&scaled, &mu).unwrap();
            prop_assert!((ent_scaled - lambda * ent).abs() <= 1e-10 * (1.0 + lambda * ent.abs()));
        }

        #[test]
        fn prop_variance_nonnegative(seed in 0u64..500) {
            let sp = ConfigurationSpace::new(vec![3, 2]).unwrap();
            let mut rng = trial_rng(401, seed);
            let w = random_positive_field(&sp, 1.0, &mut rng);
            let mu = Measure::from_weights(sp.clone(), w.values().to_vec()).unwrap();
            let g = crate::rng::random_log_field(&sp, 2.0, &mut rng);
            prop_assert!(variance(&g, &mu).unwrap() >= 0.0);
        }
    }
}
