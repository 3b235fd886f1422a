//! Covers of the site set and Shearer-type entropy estimates.
//!
//! A cover is a family of subsets of [N] whose union is [N]. For a product
//! measure the block entropies satisfy
//!
//!   Ent(f) <= (1/n_-) sum_{B in cover} mu[Ent_{mu_B}(f)]
//!
//! with n_- the minimum per-site degree, and the equivalent dual form
//!
//!   sum_{A in complementary cover} Ent(f_A) <= n_+(complementary) Ent(f).
//!
//! The two are tied together by the exact decomposition
//! Ent(f) = Ent(f_B) + mu[Ent_{mu_{B^c}}(f)] applied blockwise. The
//! singleton cover reduces the first form to plain tensorization, and its
//! complementary cover turns the dual form into subadditivity of entropy.
//! Both rest on the classical Shearer estimate for Shannon entropy, which
//! is also exposed here for direct numerical checking.
//!
//! For weakly dependent measures with a certified tensorization constant C,
//! the block estimate survives with the extra factor Delta/n_- where Delta
//! is the largest block size.
//!
//! Permutation measures (uniform on the permutations inside {0..n-1}^n) are
//! provided for the subadditivity experiments; all entropy code here
//! tolerates their zero-mass states.

use crate::error::{Error, Result};
use crate::optim::{maximize_ratio, AscentBudget};
use crate::space::{
    block_entropy_term, complement_block, ensure_same_space, entropy, marginal_density, xlogx,
    ConfigurationSpace, Field, Measure,
};

/// A cover of the site set: nonempty blocks whose union is every site.
/// Repeated blocks are allowed (a cover is a family, not a set).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cover {
    n_sites: usize,
    blocks: Vec<Vec<usize>>,
    degrees: Vec<usize>,
}

impl Cover {
    pub fn new(n_sites: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::validation("a cover needs at least one block"));
        }
        let mut degrees = vec![0usize; n_sites];
        let mut sorted_blocks = Vec::with_capacity(blocks.len());
        for (b, block) in blocks.into_iter().enumerate() {
            if block.is_empty() {
                return Err(Error::validation(format!("block {b} is empty")));
            }
            let mut block = block;
            block.sort_unstable();
            block.dedup();
            for &j in &block {
                if j >= n_sites {
                    return Err(Error::validation(format!(
                        "block {b} references site {j}, but there are {n_sites} sites"
                    )));
                }
                degrees[j] += 1;
            }
            sorted_blocks.push(block);
        }
        if let Some(k) = degrees.iter().position(|&d| d == 0) {
            return Err(Error::validation(format!(
                "blocks do not cover site {k}"
            )));
        }
        Ok(Cover {
            n_sites,
            blocks: sorted_blocks,
            degrees,
        })
    }

    /// The singleton cover {{0}, ..., {N-1}}.
    pub fn singletons(n_sites: usize) -> Cover {
        Cover::new(n_sites, (0..n_sites).map(|k| vec![k]).collect())
            .expect("singletons always cover")
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// deg_k = number of blocks containing site k.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn n_minus(&self) -> usize {
        *self.degrees.iter().min().expect("covers are nonempty")
    }

    pub fn n_plus(&self) -> usize {
        *self.degrees.iter().max().expect("covers are nonempty")
    }

    /// Delta: the largest block cardinality.
    pub fn max_block_size(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().expect("nonempty")
    }

    pub fn is_uniform(&self) -> bool {
        self.n_minus() == self.n_plus()
    }

    /// The family of block complements, one per block. Fails when a block
    /// equals the full site set (its complement would be empty).
    pub fn complement_family(&self) -> Result<Vec<Vec<usize>>> {
        let comp: Vec<Vec<usize>> = self
            .blocks
            .iter()
            .map(|b| complement_block(self.n_sites, b))
            .collect::<Result<_>>()?;
        if comp.iter().any(Vec::is_empty) {
            return Err(Error::validation(
                "complementary family would contain an empty block",
            ));
        }
        Ok(comp)
    }

    /// The cover made of the complements of the blocks. The complements form
    /// a cover exactly when no site lies in every block; otherwise this
    /// fails (use [`Cover::complement_family`] for the raw family).
    pub fn complementary(&self) -> Result<Cover> {
        Cover::new(self.n_sites, self.complement_family()?)
    }

    /// Pad with singleton blocks until every site reaches degree n_+.
    pub fn completed_to_uniform(&self) -> Cover {
        let target = self.n_plus();
        let mut blocks = self.blocks.clone();
        for (k, &d) in self.degrees.iter().enumerate() {
            for _ in d..target {
                blocks.push(vec![k]);
            }
        }
        Cover::new(self.n_sites, blocks).expect("padding preserves covering")
    }
}

/// Whether mu coincides with the product of its single-site marginals,
/// entrywise within `tol`.
pub fn is_product_measure(mu: &Measure, tol: f64) -> bool {
    let space = mu.space();
    let factors: Vec<Vec<f64>> = (0..space.n_sites()).map(|k| mu.marginal(k)).collect();
    let mut cfg = vec![0usize; space.n_sites()];
    for idx in 0..space.total_size() {
        space.decode_into(idx, &mut cfg);
        let p: f64 = cfg.iter().zip(&factors).map(|(&c, f)| f[c]).product();
        if (p - mu.weight(idx)).abs() > tol {
            return false;
        }
    }
    true
}

fn ensure_product(mu: &Measure) -> Result<()> {
    if is_product_measure(mu, 1e-12) {
        Ok(())
    } else {
        Err(Error::validation(
            "this estimate is stated for product measures; the measure is not a product \
             of its marginals within 1e-12",
        ))
    }
}

fn ensure_cover_matches(mu: &Measure, cover: &Cover) -> Result<()> {
    if cover.n_sites() != mu.space().n_sites() {
        return Err(Error::validation(format!(
            "cover is over {} sites, measure over {}",
            cover.n_sites(),
            mu.space().n_sites()
        )));
    }
    Ok(())
}

/// Block-entropy slack of the Shearer estimate for a product measure:
/// (1/n_-) sum_B mu[Ent_{mu_B}(f)] - Ent(f).
pub fn shearer_check(mu: &Measure, cover: &Cover, f: &Field) -> Result<f64> {
    ensure_cover_matches(mu, cover)?;
    ensure_product(mu)?;
    let mut sum = 0.0;
    for block in cover.blocks() {
        sum += block_entropy_term(f, mu, block)?;
    }
    Ok(sum / cover.n_minus() as f64 - entropy(f, mu)?)
}

/// Dual slack through the complement family:
/// n_+(complements) Ent(f) - sum_{A} Ent(f_A).
///
/// The complements need not form a cover themselves (they do exactly when
/// no site lies in every block); the estimate and its equivalence with the
/// block form hold for the raw family either way.
pub fn shearer_dual_check(mu: &Measure, cover: &Cover, f: &Field) -> Result<f64> {
    ensure_cover_matches(mu, cover)?;
    ensure_product(mu)?;
    let family = cover.complement_family()?;
    let mut degrees = vec![0usize; cover.n_sites()];
    let mut sum = 0.0;
    for a in &family {
        for &j in a {
            degrees[j] += 1;
        }
        let fa = marginal_density(f, mu, a)?;
        sum += entropy(&fa, mu)?;
    }
    let n_plus = degrees.iter().max().copied().unwrap_or(0);
    Ok(n_plus as f64 * entropy(f, mu)? - sum)
}

/// Approximate block estimate for a measure with tensorization constant
/// `c_at`: slack of Ent(f) <= c_at (Delta/n_-) sum_B mu[Ent_{mu_B}(f)].
pub fn approx_shearer_check(mu: &Measure, cover: &Cover, c_at: f64, f: &Field) -> Result<f64> {
    ensure_cover_matches(mu, cover)?;
    let mut sum = 0.0;
    for block in cover.blocks() {
        sum += block_entropy_term(f, mu, block)?;
    }
    let factor = c_at * cover.max_block_size() as f64 / cover.n_minus() as f64;
    Ok(factor * sum - entropy(f, mu)?)
}

/// Shannon entropy of the distribution of X_A when X ~ f mu, for a product
/// mu and density f.
fn shannon_block_entropy(mu: &Measure, f: &Field, block: &[usize]) -> Result<f64> {
    let space = mu.space();
    let kept = crate::space::block_mask(space.n_sites(), block)?;
    let mut p = vec![0.0; space.total_size()];
    let mut keys = Vec::new();
    for idx in 0..space.total_size() {
        let mut key = 0;
        for (j, &keep) in kept.iter().enumerate() {
            if keep {
                key += space.site_value(idx, j) * space.stride(j);
            }
        }
        if p[key] == 0.0 {
            keys.push(key);
        }
        p[key] += mu.weight(idx) * f.value(idx);
    }
    Ok(-keys.iter().map(|&k| xlogx(p[k])).sum::<f64>())
}

/// Residual of the identity tying Shannon block entropies to relative
/// entropies of marginal densities for a product measure:
///
///   sum_{i in A} H(X_i) - H(X_A) = Ent(f_A) - sum_{i in A} Ent(f_i),
///
/// where X ~ f mu and f is a density (mu[f] = 1).
pub fn shannon_identity_check(mu: &Measure, f: &Field, block: &[usize]) -> Result<f64> {
    ensure_product(mu)?;
    ensure_same_space(mu.space(), f.space())?;
    f.ensure_nonnegative()?;
    let total = mu.mean(f)?;
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::validation(format!(
            "f must be a density (mu[f] = 1), got mu[f] = {total}"
        )));
    }
    let h_block = shannon_block_entropy(mu, f, block)?;
    let mut h_sites = 0.0;
    let mut ent_sites = 0.0;
    for &i in block {
        h_sites += shannon_block_entropy(mu, f, &[i])?;
        let fi = marginal_density(f, mu, &[i])?;
        ent_sites += entropy(&fi, mu)?;
    }
    let fa = marginal_density(f, mu, block)?;
    let lhs = h_sites - h_block;
    let rhs = entropy(&fa, mu)? - ent_sites;
    Ok(lhs - rhs)
}

/// Classical Shearer estimate for Shannon entropy on a uniform cover:
/// slack of n H(X) <= sum_A H(X_A), X ~ f mu.
pub fn classical_shearer_check(mu: &Measure, f: &Field, cover: &Cover) -> Result<f64> {
    ensure_cover_matches(mu, cover)?;
    if !cover.is_uniform() {
        return Err(Error::validation(
            "the classical Shearer estimate needs a uniform cover; complete it first",
        ));
    }
    f.ensure_nonnegative()?;
    let all: Vec<usize> = (0..mu.space().n_sites()).collect();
    let h_full = shannon_block_entropy(mu, f, &all)?;
    let mut sum = 0.0;
    for block in cover.blocks() {
        sum += shannon_block_entropy(mu, f, block)?;
    }
    Ok(sum - cover.n_minus() as f64 * h_full)
}

/// sum_k Ent(f_k) / Ent(f) for a density f; the subadditivity ratio.
pub fn subadditivity_ratio(mu: &Measure, f: &Field) -> Result<f64> {
    let ent = entropy(f, mu)?;
    if ent < 1e-13 {
        return Err(Error::Degenerate(
            "subadditivity ratio undefined for near-constant densities".into(),
        ));
    }
    let mut sum = 0.0;
    for k in 0..mu.space().n_sites() {
        let fk = marginal_density(f, mu, &[k])?;
        sum += entropy(&fk, mu)?;
    }
    Ok(sum / ent)
}

/// Outcome of the exploratory subadditivity maximization.
#[derive(Debug, Clone)]
pub struct SubadditivityEstimate {
    /// Best ratio found; a lower bound on the optimal constant, not the answer.
    pub lower_bound: f64,
    pub witness: Field,
    pub converged: bool,
}

/// Maximize sum_k Ent(f_k) / Ent(f) over densities f = exp(g)/mu[exp(g)].
///
/// Constant densities (where the ratio is 0/0) are rejected during the
/// ascent. The result is exploratory: a lower bound only.
pub fn subadditivity_estimate(
    mu: &Measure,
    budget: AscentBudget,
    seed: u64,
) -> Result<SubadditivityEstimate> {
    let mut objective = |g: &Field| -> Result<f64> {
        let f = g.map(f64::exp);
        let total = mu.mean(&f)?;
        if !(total > 0.0) {
            return Ok(f64::NAN);
        }
        let f = f.map(|v| v / total);
        match subadditivity_ratio(mu, &f) {
            Ok(r) => Ok(r),
            Err(Error::Degenerate(_)) => Ok(f64::NAN),
            Err(e) => Err(e),
        }
    };
    let outcome = maximize_ratio(mu, &mut objective, &[], budget, seed)?;
    let f = outcome.log_witness.map(f64::exp);
    let total = mu.mean(&f)?;
    Ok(SubadditivityEstimate {
        lower_bound: outcome.value,
        witness: f.map(|v| v / total),
        converged: outcome.converged,
    })
}

/// Uniform measure on the permutations of {0, ..., n-1} inside the product
/// space {0..n-1}^n. Non-permutation states carry zero mass.
pub fn permutation_measure(n: usize) -> Result<Measure> {
    let space = ConfigurationSpace::new(vec![n; n])?;
    let mut weights = vec![0.0; space.total_size()];
    let mut cfg = vec![0usize; n];
    for (idx, w) in weights.iter_mut().enumerate() {
        space.decode_into(idx, &mut cfg);
        let mut seen = vec![false; n];
        let mut is_perm = true;
        for &c in &cfg {
            if seen[c] {
                is_perm = false;
                break;
            }
            seen[c] = true;
        }
        if is_perm {
            *w = 1.0;
        }
    }
    Measure::from_weights(space, weights)
}
