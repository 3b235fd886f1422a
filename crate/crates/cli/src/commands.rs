//! Command implementations.
//!
//! Each command produces one [`Table`] and a pass flag. Rows carry the tag
//! of the display they check (for example `Eq.1.4` for approximate
//! tensorization rows), so downstream tooling can trace every number to the
//! inequality it belongs to. A command passes when every asserted slack is
//! at least -tol * scale for its row's scale.

use entlab::coefficients::{self, CoefficientReport};
use entlab::covers::{self, Cover};
use entlab::dynamics::HeatBathGenerator;
use entlab::inequalities::{self, InequalityKind};
use entlab::prooflab;
use entlab::rng::{random_positive_field, trial_rng, DENSITY_AMPLITUDES};
use entlab::space::{entropy, Field, Measure};
use entlab::{AscentBudget, Error, Result};
use rand::Rng;

use crate::report::{Cell, Table};
use crate::schema::ParsedModel;

fn kind_tag(kind: InequalityKind) -> &'static str {
    match kind {
        InequalityKind::At => "Eq.1.4",
        InequalityKind::Poincare => "Eq.1.9",
        InequalityKind::LogSobolev => "Eq.1.12",
        InequalityKind::ModifiedLogSobolev => "Eq.1.13",
    }
}

fn report_rows(table: &mut Table, report: &CoefficientReport) {
    let n = report.alpha.nrows();
    for (name, tag, matrix) in [
        ("alpha", "Eq.2.2", &report.alpha),
        ("delta", "Eq.2.2", &report.delta),
        ("epsilon", "Cor.2.2", &report.epsilon),
    ] {
        for i in 0..n {
            for k in 0..n {
                if i != k {
                    table.push(vec![
                        tag.into(),
                        name.into(),
                        Cell::UInt(i as u64),
                        Cell::UInt(k as u64),
                        matrix[(i, k)].into(),
                        Cell::Empty,
                    ]);
                }
            }
        }
    }
    let scalar = |table: &mut Table, tag: &str, name: &str, value: f64| {
        table.push(vec![
            tag.into(),
            name.into(),
            Cell::Empty,
            Cell::Empty,
            value.into(),
            Cell::Empty,
        ]);
    };
    scalar(table, "Thm.2.1", "gamma", report.gamma);
    scalar(table, "Thm.2.1", "kappa_theorem", report.kappa_theorem);
    scalar(table, "Eq.3.30", "kappa_proof", report.kappa_proof);
    scalar(table, "Cor.2.2", "q", report.q);
    let constant = |table: &mut Table, tag: &str, name: &str, value: Option<f64>, note: Option<String>| {
        table.push(vec![
            tag.into(),
            name.into(),
            Cell::Empty,
            Cell::Empty,
            value.into(),
            note.into(),
        ]);
    };
    constant(
        table,
        "Thm.2.1",
        "C_theorem",
        report.c_theorem,
        report.theorem_absence_reason(),
    );
    constant(
        table,
        "Cor.2.2",
        "C_corollary",
        report.c_corollary,
        report.corollary_absence_reason(),
    );
    constant(
        table,
        "Lem.2.2",
        "C_holley_stroock",
        Some(report.c_holley_stroock),
        None,
    );
}

/// Full coefficient report: matrices entrywise plus the derived scalars.
pub fn cmd_coeffs(parsed: &ParsedModel) -> Result<(Table, bool)> {
    let report = coefficients::coefficient_report(&parsed.model)?;
    let mut table = Table::new(vec!["tag", "quantity", "i", "k", "value", "note"]);
    report_rows(&mut table, &report);
    Ok((table, true))
}

/// The three tensorization constants with applicability.
pub fn cmd_constant(parsed: &ParsedModel) -> Result<(Table, bool)> {
    let report = coefficients::coefficient_report(&parsed.model)?;
    let mut table = Table::new(vec!["tag", "constant", "present", "value", "note"]);
    table.push(vec![
        "Thm.2.1".into(),
        "C_theorem".into(),
        report.c_theorem.is_some().into(),
        report.c_theorem.into(),
        report.theorem_absence_reason().into(),
    ]);
    table.push(vec![
        "Cor.2.2".into(),
        "C_corollary".into(),
        report.c_corollary.is_some().into(),
        report.c_corollary.into(),
        report.corollary_absence_reason().into(),
    ]);
    table.push(vec![
        "Lem.2.2".into(),
        "C_holley_stroock".into(),
        true.into(),
        Some(report.c_holley_stroock).into(),
        Cell::Empty,
    ]);
    Ok((table, true))
}

/// Randomized slack sweep for one inequality at a claimed constant.
pub fn cmd_check(
    parsed: &ParsedModel,
    kind: InequalityKind,
    claimed_c: f64,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<(Table, bool)> {
    let mu = parsed.model.build_measure()?;
    let mut table = Table::new(vec![
        "tag", "kind", "trial", "amplitude", "lhs", "rhs", "slack", "scale",
    ]);
    let mut ok = true;
    for t in 0..trials {
        let amplitude = DENSITY_AMPLITUDES[t % DENSITY_AMPLITUDES.len()];
        let mut rng = trial_rng(seed, t as u64);
        let f = match kind {
            InequalityKind::Poincare => {
                entlab::rng::random_log_field(mu.space(), amplitude, &mut rng)
            }
            _ => random_positive_field(mu.space(), amplitude, &mut rng),
        };
        let outcome = inequalities::check(kind, &mu, claimed_c, &f)?;
        ok &= outcome.slack >= -tol * outcome.scale;
        table.push(vec![
            kind_tag(kind).into(),
            kind.label().into(),
            t.into(),
            amplitude.into(),
            outcome.lhs.into(),
            outcome.rhs.into(),
            outcome.slack.into(),
            outcome.scale.into(),
        ]);
    }
    Ok((table, ok))
}

fn select_constant(report: &CoefficientReport) -> (&'static str, f64) {
    if let Some(c) = report.c_theorem {
        ("Thm.2.1", c)
    } else if let Some(c) = report.c_corollary {
        ("Cor.2.2", c)
    } else {
        ("Lem.2.2", report.c_holley_stroock)
    }
}

/// Entropy decay along the heat-bath flow against the exp(-t/C) envelope.
pub fn cmd_decay(
    parsed: &ParsedModel,
    c_override: Option<f64>,
    t_max: Option<f64>,
    grid_points: usize,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<(Table, bool)> {
    let mu = parsed.model.build_measure()?;
    let (source, c) = match c_override {
        Some(c) => ("flag", c),
        None => {
            let report = coefficients::coefficient_report(&parsed.model)?;
            select_constant(&report)
        }
    };
    let t_max = t_max.unwrap_or(5.0 * c);
    let grid: Vec<f64> = (0..grid_points.max(2))
        .map(|g| t_max * g as f64 / (grid_points.max(2) - 1) as f64)
        .collect();
    let gen = HeatBathGenerator::new(mu.clone());
    let mut table = Table::new(vec![
        "tag", "constant_source", "trial", "t", "entropy", "bound", "slack",
    ]);
    table.push(vec![
        "Eq.1.14".into(),
        source.into(),
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        c.into(),
        Cell::Empty,
    ]);
    let mut ok = true;
    for trial in 0..trials {
        let amplitude = DENSITY_AMPLITUDES[trial % DENSITY_AMPLITUDES.len()];
        let f = random_positive_field(mu.space(), amplitude, &mut trial_rng(seed, trial as u64));
        let trace = gen.entropy_trace(&f, &grid)?;
        let ent0 = trace[0].1;
        for (t, ent) in trace {
            let bound = (-t / c).exp() * ent0;
            let slack = bound - ent;
            ok &= slack >= -tol * (1.0 + ent0);
            table.push(vec![
                "Eq.1.14".into(),
                Cell::Empty,
                trial.into(),
                t.into(),
                ent.into(),
                bound.into(),
                slack.into(),
            ]);
        }
    }
    Ok((table, ok))
}

/// Lower bounds on optimal constants; all four families plus the
/// implication audit when no kind is named.
pub fn cmd_optimize(
    parsed: &ParsedModel,
    kind: Option<InequalityKind>,
    budget: usize,
    seed: u64,
) -> Result<(Table, bool)> {
    let mu = parsed.model.build_measure()?;
    let budget = AscentBudget::from_restarts(budget);
    let mut table = Table::new(vec!["tag", "item", "kind", "value", "ok", "note"]);
    match kind {
        Some(kind) => {
            let est = inequalities::estimate_optimal_constant(kind, &mu, budget, seed)?;
            table.push(vec![
                kind_tag(kind).into(),
                "lower_bound".into(),
                kind.label().into(),
                est.lower_bound.into(),
                Cell::Empty,
                if kind == InequalityKind::Poincare {
                    "exact (eigensolve)".into()
                } else {
                    "lower bound only".into()
                },
            ]);
            Ok((table, true))
        }
        None => {
            let audit = inequalities::implication_audit(&mu, budget, seed)?;
            for (kind, value) in [
                (InequalityKind::Poincare, audit.c_poincare),
                (InequalityKind::At, audit.c_at),
                (InequalityKind::LogSobolev, audit.c_log_sobolev),
                (InequalityKind::ModifiedLogSobolev, audit.c_modified_log_sobolev),
            ] {
                table.push(vec![
                    kind_tag(kind).into(),
                    "lower_bound".into(),
                    kind.label().into(),
                    value.into(),
                    Cell::Empty,
                    if kind == InequalityKind::Poincare {
                        "exact (eigensolve)".into()
                    } else {
                        "lower bound only".into()
                    },
                ]);
            }
            table.push(vec![
                "Prop.1.1".into(),
                "eta".into(),
                Cell::Empty,
                audit.eta.into(),
                Cell::Empty,
                "declared estimator slack".into(),
            ]);
            for (name, holds, margin) in &audit.orderings {
                table.push(vec![
                    "Prop.1.1".into(),
                    "ordering".into(),
                    name.clone().into(),
                    (*margin).into(),
                    (*holds).into(),
                    Cell::Empty,
                ]);
            }
            Ok((table, audit.all_hold()))
        }
    }
}

fn density(mu: &Measure, f: &Field) -> Result<Field> {
    let total = mu.mean(f)?;
    Ok(f.map(|v| v / total))
}

/// Cover checks: block-entropy estimates, duals, the approximate variant,
/// the entropy decomposition, and the Shannon-entropy identities.
pub fn cmd_shearer(
    parsed: &ParsedModel,
    cover_name: Option<&str>,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<(Table, bool)> {
    let mu = parsed.model.build_measure()?;
    let n = mu.space().n_sites();
    let mut selected: Vec<(String, Cover)> = Vec::new();
    match cover_name {
        Some(name) => {
            let cover = parsed.covers.get(name).ok_or_else(|| {
                Error::Validation(format!("no cover named {name:?} in the model file"))
            })?;
            selected.push((name.to_string(), cover.clone()));
        }
        None => {
            for (name, cover) in &parsed.covers {
                selected.push((name.clone(), cover.clone()));
            }
            if selected.is_empty() {
                selected.push(("singletons".to_string(), Cover::singletons(n)));
            }
        }
    }
    let is_product = covers::is_product_measure(&mu, 1e-12);
    let c_at = {
        let report = coefficients::coefficient_report(&parsed.model)?;
        select_constant(&report).1
    };
    let mut table = Table::new(vec!["tag", "check", "cover", "trial", "slack", "scale"]);
    let mut ok = true;
    let assert_row =
        |table: &mut Table, tag: &str, check: &str, cover: &str, trial: usize, slack: f64, scale: f64, ok: &mut bool| {
            *ok &= slack >= -tol * scale;
            table.push(vec![
                tag.into(),
                check.into(),
                cover.into(),
                trial.into(),
                slack.into(),
                scale.into(),
            ]);
        };
    for (name, cover) in &selected {
        for trial in 0..trials {
            let amplitude = DENSITY_AMPLITUDES[trial % DENSITY_AMPLITUDES.len()];
            let f = random_positive_field(
                mu.space(),
                amplitude,
                &mut trial_rng(seed, trial as u64),
            );
            let scale = 1.0 + entropy(&f, &mu)?;
            if is_product {
                let slack = covers::shearer_check(&mu, cover, &f)?;
                assert_row(&mut table, "Eq.2.14", "block", name, trial, slack, scale, &mut ok);
                if cover.complement_family().is_ok() {
                    let slack = covers::shearer_dual_check(&mu, cover, &f)?;
                    assert_row(&mut table, "Eq.2.15", "dual", name, trial, slack, scale, &mut ok);
                }
                let d = density(&mu, &f)?;
                let block = &cover.blocks()[0];
                let residual = covers::shannon_identity_check(&mu, &d, block)?;
                assert_row(
                    &mut table,
                    "Eq.5.2",
                    "shannon_identity",
                    name,
                    trial,
                    tol * scale - residual.abs(),
                    scale,
                    &mut ok,
                );
            }
            let slack = covers::approx_shearer_check(&mu, cover, c_at, &f)?;
            assert_row(&mut table, "Eq.2.18", "approx", name, trial, slack, scale, &mut ok);
            let residual =
                entlab::space::decomposition_check(&f, &mu, &cover.blocks()[0])?;
            assert_row(
                &mut table,
                "Eq.2.13",
                "decomposition",
                name,
                trial,
                tol * scale - residual.abs(),
                scale,
                &mut ok,
            );
            let d = density(&mu, &f)?;
            let uniform = cover.completed_to_uniform();
            let slack = covers::classical_shearer_check(&mu, &d, &uniform)?;
            assert_row(
                &mut table,
                "Eq.5.4",
                "classical_shannon",
                name,
                trial,
                slack,
                scale,
                &mut ok,
            );
        }
    }
    Ok((table, ok))
}

/// Pointwise proof-block sweeps: logarithmic-mean properties, the gradient
/// bound in all three forms, the weighting identity, and the covariance
/// estimate. Each check reports its worst instance.
pub fn cmd_prooflab(
    parsed: &ParsedModel,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<(Table, bool)> {
    let mu = parsed.model.build_measure()?;
    let space = mu.space();
    let mut table = Table::new(vec!["tag", "check", "instance", "slack", "scale"]);
    let mut ok = true;

    // logarithmic-mean property suite
    let mut rng = trial_rng(seed, u64::MAX);
    let mut worst_fixed: (f64, String) = (f64::INFINITY, String::new());
    let mut worst_mean: (f64, String) = (f64::INFINITY, String::new());
    let mut worst_mono: (f64, String) = (f64::INFINITY, String::new());
    let mut worst_conc: (f64, String) = (f64::INFINITY, String::new());
    let mut worst_int: (f64, String) = (f64::INFINITY, String::new());
    for rep in 0..10_000 {
        let a: f64 = rng.random_range(1e-4..10.0);
        let b: f64 = rng.random_range(1e-4..10.0);
        let lm = prooflab::log_mean(a, b)?;
        let fixed = -(prooflab::log_mean(a, a)? - a).abs();
        if fixed < worst_fixed.0 {
            worst_fixed = (fixed, format!("a={a:.6}"));
        }
        let mean = 0.5 * (a + b) - lm;
        if mean < worst_mean.0 {
            worst_mean = (mean, format!("a={a:.6},b={b:.6}"));
        }
        let q: f64 = rng.random_range(0.0..2.0);
        let a2 = q * a + rng.random_range(0.0..1.0);
        let b2 = q * b + rng.random_range(0.0..1.0);
        let mono = prooflab::log_mean(a2, b2)? - q * lm;
        if mono < worst_mono.0 {
            worst_mono = (mono, format!("a={a:.6},b={b:.6},q={q:.6}"));
        }
        let p: f64 = rng.random_range(0.0..1.0);
        let c: f64 = rng.random_range(1e-4..10.0);
        let d: f64 = rng.random_range(1e-4..10.0);
        let conc = prooflab::log_mean(p * a + (1.0 - p) * c, p * b + (1.0 - p) * d)?
            - (p * lm + (1.0 - p) * prooflab::log_mean(c, d)?);
        if conc < worst_conc.0 {
            worst_conc = (conc, format!("p={p:.6}"));
        }
        if rep % 8 == 0 {
            let quad = prooflab::log_mean_integral_quadrature(a, b, 64)?;
            let int = 1e-8 * (1.0 + lm) - (quad - lm).abs();
            if int < worst_int.0 {
                worst_int = (int, format!("a={a:.6},b={b:.6}"));
            }
        }
    }
    let scale = 1.0;
    for (tag, check, worst) in [
        ("Eq.3.8", "logmean_fixed_point", worst_fixed),
        ("Eq.3.8", "logmean_below_arithmetic_mean", worst_mean),
        ("Eq.3.10", "logmean_scaling_monotone", worst_mono),
        ("Eq.3.15", "logmean_concave", worst_conc),
        ("Eq.3.10", "logmean_integral_representation", worst_int),
    ] {
        ok &= worst.0 >= -tol * scale;
        table.push(vec![
            tag.into(),
            check.into(),
            worst.1.into(),
            worst.0.into(),
            scale.into(),
        ]);
    }

    // gradient bound sweeps (exhaustive in the arguments, random in f)
    let mut tuple_count: u128 = 0;
    for i in 0..space.n_sites() {
        for k in 0..space.n_sites() {
            if i != k {
                tuple_count += (space.total_size() * space.site_size(i)) as u128;
            }
        }
    }
    if tuple_count.saturating_mul(trials as u128) > 1 << 22 {
        return Err(Error::Capacity {
            requested: tuple_count * trials as u128,
            limit: 1 << 22,
        });
    }
    let mut worst_combined: (f64, f64, String) = (f64::INFINITY, 1.0, String::new());
    let mut worst_mean_route = worst_combined.clone();
    let mut worst_tilted_route = worst_combined.clone();
    let mut worst_identity = worst_combined.clone();
    let mut worst_cov = worst_combined.clone();
    let mut cfg = vec![0usize; space.n_sites()];
    for trial in 0..trials {
        let f = random_positive_field(space, 2.0, &mut trial_rng(seed, trial as u64));
        for i in 0..space.n_sites() {
            for k in 0..space.n_sites() {
                if i == k {
                    continue;
                }
                let alpha = coefficients::alpha_delta_pair(&mu, i, k)?.0;
                for idx in 0..space.total_size() {
                    space.decode_into(idx, &mut cfg);
                    for y_i in 0..space.site_size(i) {
                        let s = prooflab::gradient_bound_check(
                            &f, &mu, i, k, &cfg, y_i, Some(alpha),
                        )?;
                        let inst = format!("trial={trial},i={i},k={k},x={idx},y_i={y_i}");
                        let rel = s.combined / s.scale;
                        if rel < worst_combined.0 / worst_combined.1 {
                            worst_combined = (s.combined, s.scale, inst.clone());
                        }
                        let rel = s.mean_route / s.scale;
                        if rel < worst_mean_route.0 / worst_mean_route.1 {
                            worst_mean_route = (s.mean_route, s.scale, inst.clone());
                        }
                        let rel = s.tilted_route / s.scale;
                        if rel < worst_tilted_route.0 / worst_tilted_route.1 {
                            worst_tilted_route = (s.tilted_route, s.scale, inst.clone());
                        }
                    }
                    let x_i = cfg[i];
                    for y_i in 0..space.site_size(i) {
                        let r = prooflab::gradient_identity_residual(
                            &f, &mu, i, k, x_i, y_i, &cfg,
                        )?;
                        let slack = tol - r;
                        if slack < worst_identity.0 {
                            worst_identity =
                                (slack, 1.0, format!("trial={trial},i={i},k={k},x={idx}"));
                        }
                    }
                }
            }
        }
        // covariance estimate on random one-site data
        let mut rng = trial_rng(seed.wrapping_add(1), trial as u64);
        for rep in 0..50 {
            let m = space.site_size(rep % space.n_sites());
            let g: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0f64).exp()).collect();
            let psi: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut dist: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = dist.iter().sum();
            dist.iter_mut().for_each(|v| *v /= total);
            let slack = prooflab::covariance_lemma_check(&g, &psi, &dist)?;
            if slack.is_finite() && slack < worst_cov.0 {
                worst_cov = (slack, 1.0, format!("trial={trial},rep={rep}"));
            }
        }
    }
    for (tag, check, worst) in [
        ("Eq.3.12", "gradient_bound_combined", worst_combined),
        ("Eq.3.18", "gradient_bound_mean_route", worst_mean_route),
        ("Eq.3.20", "gradient_bound_tilted_route", worst_tilted_route),
        ("Eq.3.17", "gradient_weight_identity", worst_identity),
        ("Eq.3.22", "covariance_estimate", worst_cov),
    ] {
        ok &= worst.0 >= -tol * worst.1;
        table.push(vec![
            tag.into(),
            check.into(),
            worst.2.into(),
            worst.0.into(),
            worst.1.into(),
        ]);
    }
    Ok((table, ok))
}
