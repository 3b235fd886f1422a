//! Model description files.
//!
//! A model file is TOML with top-level keys `sites`, `couplings`, `beta`,
//! `fields`, and optional named `covers`. Top-level scalars (`beta`,
//! `fields`) must precede the first table header, per TOML:
//!
//! ```toml
//! beta = 0.05
//! # per site: a scalar (spin convention) or a per-state table
//! fields = [0.1, [0.0, 0.5, 0.0], 0.0]
//!
//! [[sites]]
//! size = 2                 # finite site, uniform base
//!
//! [[sites]]
//! base = [1.0, 2.0, 1.0]   # finite site with explicit positive weights
//!
//! [[sites]]
//! poisson = 1.0            # truncated Poisson birth-death site
//! n_max = 30
//!
//! [[couplings]]
//! i = 0
//! j = 1
//! J = 1.0
//! kernel = "product"       # spin product; or "equality", or an explicit
//!                          # table = [[...], ...] of shape size_i x size_j
//!
//! [covers]
//! pairs = [[0, 1], [1, 2]]
//! ```
//!
//! A scalar field h means h * (-1, +1) on binary sites and h * (1, ..., s)
//! otherwise. Birth-death sites may also be given explicitly with `nu`
//! (ultra log-concave weights), optional `F` (potential table), and
//! `tail_mass` for the mass a truncation discarded.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use entlab::covers::Cover;
use entlab::model::{BirthDeathSite, PairCoupling};
use entlab::{Error, GibbsModel, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[serde(default)]
    beta: f64,
    sites: Vec<SiteDecl>,
    #[serde(default)]
    couplings: Vec<CouplingDecl>,
    #[serde(default)]
    fields: Option<Vec<FieldDecl>>,
    #[serde(default)]
    covers: BTreeMap<String, Vec<Vec<usize>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteDecl {
    size: Option<usize>,
    base: Option<Vec<f64>>,
    nu: Option<Vec<f64>>,
    #[serde(rename = "F")]
    potential: Option<Vec<f64>>,
    n_max: Option<usize>,
    poisson: Option<f64>,
    tail_mass: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FieldDecl {
    Scalar(f64),
    Table(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingDecl {
    i: usize,
    j: usize,
    #[serde(rename = "J")]
    strength: f64,
    kernel: Option<String>,
    table: Option<Vec<Vec<f64>>>,
}

/// A validated model plus the named covers the file declared.
#[derive(Debug)]
pub struct ParsedModel {
    pub model: GibbsModel,
    pub covers: BTreeMap<String, Cover>,
}

/// Read and validate a model file.
pub fn parse_model(path: &Path) -> Result<ParsedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Validation(format!("cannot read model file {}: {e}", path.display()))
    })?;
    parse_model_str(&text)
}

/// Parse a model from TOML text.
pub fn parse_model_str(text: &str) -> Result<ParsedModel> {
    let file: ModelFile = toml::from_str(text)
        .map_err(|e| Error::Validation(format!("model file: {e}")))?;
    build(file)
}

fn build(file: ModelFile) -> Result<ParsedModel> {
    if file.sites.is_empty() {
        return Err(Error::Validation("sites: at least one site required".into()));
    }
    let mut base_weights = Vec::with_capacity(file.sites.len());
    let mut bd_sites: Vec<Option<BirthDeathSite>> = Vec::with_capacity(file.sites.len());
    for (k, site) in file.sites.iter().enumerate() {
        let (weights, bd) = build_site(k, site)?;
        base_weights.push(weights);
        bd_sites.push(bd);
    }
    let sizes: Vec<usize> = base_weights.iter().map(Vec::len).collect();

    let field_tables = match file.fields {
        None => None,
        Some(decls) => {
            if decls.len() != sizes.len() {
                return Err(Error::Validation(format!(
                    "fields: expected {} entries (one per site), found {}",
                    sizes.len(),
                    decls.len()
                )));
            }
            let mut tables = Vec::with_capacity(decls.len());
            for (k, decl) in decls.iter().enumerate() {
                tables.push(field_table(k, decl, sizes[k])?);
            }
            Some(tables)
        }
    };

    let mut couplings = Vec::with_capacity(file.couplings.len());
    let mut seen: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (c_idx, decl) in file.couplings.iter().enumerate() {
        let (i, j) = (decl.i, decl.j);
        if i >= sizes.len() || j >= sizes.len() {
            return Err(Error::Validation(format!(
                "couplings[{c_idx}]: site pair ({i}, {j}) out of range for {} sites",
                sizes.len()
            )));
        }
        if i == j {
            return Err(Error::Validation(format!(
                "couplings[{c_idx}]: i and j must differ"
            )));
        }
        let key = (i.min(j), i.max(j));
        if let Some(&prev) = seen.get(&key) {
            return Err(Error::Validation(if prev != decl.strength {
                format!(
                    "couplings[{c_idx}]: J is asymmetric across pair ({}, {}): {prev} vs {}",
                    key.0, key.1, decl.strength
                )
            } else {
                format!(
                    "couplings[{c_idx}]: pair ({}, {}) declared more than once",
                    key.0, key.1
                )
            }));
        }
        seen.insert(key, decl.strength);
        let table = coupling_table(c_idx, decl, sizes[i], sizes[j])?;
        couplings.push(PairCoupling::new(i, j, decl.strength, table));
    }

    let mut model = GibbsModel::new(base_weights, field_tables, couplings, file.beta)?;
    for (k, bd) in bd_sites.into_iter().enumerate() {
        if let Some(site) = bd {
            model = model.with_birth_death_site(k, site)?;
        }
    }

    let mut covers = BTreeMap::new();
    for (name, blocks) in file.covers {
        let cover = Cover::new(sizes.len(), blocks)
            .map_err(|e| Error::Validation(format!("covers.{name}: {e}")))?;
        covers.insert(name, cover);
    }
    Ok(ParsedModel { model, covers })
}

fn build_site(k: usize, site: &SiteDecl) -> Result<(Vec<f64>, Option<BirthDeathSite>)> {
    let finite = site.size.is_some() || site.base.is_some();
    let birth_death = site.nu.is_some() || site.poisson.is_some();
    if finite && birth_death {
        return Err(Error::Validation(format!(
            "sites[{k}]: declare either a finite site (size/base) or a birth-death site \
             (nu/poisson), not both"
        )));
    }
    if finite {
        let weights = match (&site.base, site.size) {
            (Some(base), size) => {
                if let Some(s) = size {
                    if s != base.len() {
                        return Err(Error::Validation(format!(
                            "sites[{k}]: size = {s} disagrees with base of length {}",
                            base.len()
                        )));
                    }
                }
                base.clone()
            }
            (None, Some(s)) => vec![1.0; s],
            (None, None) => unreachable!(),
        };
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Validation(format!(
                "sites[{k}]: base weights must be strictly positive"
            )));
        }
        return Ok((weights, None));
    }
    if !birth_death {
        return Err(Error::Validation(format!(
            "sites[{k}]: one of size, base, nu, or poisson is required"
        )));
    }
    let bd = match (&site.nu, site.poisson) {
        (Some(_), Some(_)) => {
            return Err(Error::Validation(format!(
                "sites[{k}]: nu and poisson are mutually exclusive"
            )))
        }
        (Some(nu), None) => {
            if let Some(n_max) = site.n_max {
                if n_max + 1 != nu.len() {
                    return Err(Error::Validation(format!(
                        "sites[{k}]: n_max = {n_max} disagrees with nu of length {}",
                        nu.len()
                    )));
                }
            }
            let potential = match &site.potential {
                Some(p) => p.clone(),
                None => vec![0.0; nu.len()],
            };
            BirthDeathSite::new(nu.clone(), potential, site.tail_mass.unwrap_or(0.0))
                .map_err(|e| Error::Validation(format!("sites[{k}]: {e}")))?
        }
        (None, Some(lambda)) => {
            let n_max = site.n_max.ok_or_else(|| {
                Error::Validation(format!("sites[{k}]: poisson requires n_max"))
            })?;
            let bare = BirthDeathSite::poisson(lambda, n_max)
                .map_err(|e| Error::Validation(format!("sites[{k}]: {e}")))?;
            match &site.potential {
                Some(p) => bare
                    .with_potential(p.clone())
                    .map_err(|e| Error::Validation(format!("sites[{k}]: {e}")))?,
                None => bare,
            }
        }
        (None, None) => unreachable!(),
    };
    Ok((bd.base_weights(), Some(bd)))
}

fn field_table(k: usize, decl: &FieldDecl, size: usize) -> Result<Vec<f64>> {
    match decl {
        FieldDecl::Table(t) => {
            if t.len() != size {
                return Err(Error::Validation(format!(
                    "fields[{k}]: table has {} entries, site size is {size}",
                    t.len()
                )));
            }
            Ok(t.clone())
        }
        FieldDecl::Scalar(h) => Ok(if size == 2 {
            vec![-h, *h]
        } else {
            (1..=size).map(|v| h * v as f64).collect()
        }),
    }
}

fn coupling_table(
    c_idx: usize,
    decl: &CouplingDecl,
    size_i: usize,
    size_j: usize,
) -> Result<Vec<f64>> {
    match (&decl.kernel, &decl.table) {
        (Some(_), Some(_)) => Err(Error::Validation(format!(
            "couplings[{c_idx}]: kernel and table are mutually exclusive"
        ))),
        (None, None) => Err(Error::Validation(format!(
            "couplings[{c_idx}]: a kernel name or an explicit table is required"
        ))),
        (Some(kernel), None) => match kernel.as_str() {
            "product" => {
                if size_i != 2 || size_j != 2 {
                    return Err(Error::Validation(format!(
                        "couplings[{c_idx}]: the product kernel is for binary (spin) sites; \
                         sizes are {size_i} and {size_j}"
                    )));
                }
                Ok(vec![1.0, -1.0, -1.0, 1.0])
            }
            "equality" => {
                if size_i != size_j {
                    return Err(Error::Validation(format!(
                        "couplings[{c_idx}]: the equality kernel needs equal site sizes, \
                         got {size_i} and {size_j}"
                    )));
                }
                let mut t = vec![0.0; size_i * size_j];
                for a in 0..size_i {
                    t[a * size_j + a] = 1.0;
                }
                Ok(t)
            }
            other => Err(Error::Validation(format!(
                "couplings[{c_idx}]: unknown kernel {other:?} (expected \"product\" or \
                 \"equality\")"
            ))),
        },
        (None, Some(rows)) => {
            if rows.len() != size_i || rows.iter().any(|r| r.len() != size_j) {
                return Err(Error::Validation(format!(
                    "couplings[{c_idx}]: table must be {size_i} rows of {size_j} entries"
                )));
            }
            Ok(rows.iter().flatten().copied().collect())
        }
    }
}
