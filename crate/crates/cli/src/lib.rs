//! Pipelines behind the `billiard` command.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context as _, Result};
use billiard_core::bounds::{theorem_sweep, SweepConfig};
use billiard_core::config::RunConfig;
use billiard_core::discretize::{
    assemble_forms, refinement_shifts, solve_eigenpairs, CacheHeader, EigenCache, EigenPair, TensorGrid, Window,
};
use billiard_core::export::{fmt15, Assertion, CsvTable};
use billiard_core::forms_suite::{run_forms_suite, FormsConfig};
use billiard_core::onedim::{run_suite, OnedimConfig};
use billiard_core::resonance::{self, reports_csv, resonance_report};
use billiard_core::BilliardProfile;

/// Outcome of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Insufficient,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Insufficient => 3,
        }
    }

    fn from_pass(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// Bad invocation, config or cache state: exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Exit code for an error that stopped a command.
pub fn error_code(err: &anyhow::Error) -> u8 {
    use billiard_core::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config { .. } | E::Parameter(_) | E::Cache(_) | E::InvalidProfile(_) | E::Io(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Config file (or defaults) with command-line overrides applied.
pub fn load_config(
    path: Option<&Path>,
    out: Option<&Path>,
    jobs: Option<usize>,
    window: Option<(f64, f64)>,
) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::parse(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(o) = out {
        cfg.out_dir = o.to_path_buf();
    }
    if let Some(j) = jobs {
        if j == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        cfg.jobs = Some(j);
    }
    if let Some((lo, hi)) = window {
        if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
            return Err(usage(format!("--window needs 0 <= LO < HI, got {lo} {hi}")));
        }
        cfg.window = (lo, hi);
    }
    Ok(cfg)
}

fn write(cfg: &RunConfig, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let path = cfg.out_dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn print_assertions(assertions: &[Assertion]) {
    for a in assertions {
        println!("{}", a.line());
    }
    let checks = assertions.iter().filter(|a| !a.informational);
    let failed = checks.clone().filter(|a| !a.passed).count();
    println!(
        "{} checks, {} passed, {} failed",
        checks.count(),
        assertions.iter().filter(|a| !a.informational && a.passed).count(),
        failed
    );
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<Status> {
    let profile = cfg.profile.build_for_validation()?;
    let report = profile.validate();
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    write(cfg, "validate.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(Status::from_pass(report.all_passed()))
}

fn header(profile: &BilliardProfile, ns: usize, nt: usize, dofs: usize, cfg: &RunConfig) -> Result<CacheHeader> {
    Ok(CacheHeader {
        profile: profile.record()?.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        ns,
        nt,
        dofs,
        residual_tol: cfg.residual_tol,
        ritz_tol: cfg.ritz_tol,
        seed: cfg.seed,
    })
}

/// Loads the cache and solves whatever part of the window it does not cover yet.
pub fn ensure_spectrum(cfg: &RunConfig) -> Result<(TensorGrid, EigenCache)> {
    let profile = cfg.profile.build()?;
    let grid = TensorGrid::new(profile.clone(), cfg.ns, cfg.nt)?;
    let forms = assemble_forms(&grid)?;
    let head = header(&profile, cfg.ns, cfg.nt, forms.n(), cfg)?;
    let path = cfg.cache_path();
    let mut cache = if path.exists() {
        let c = EigenCache::load(&path).with_context(|| {
            format!(
                "reading cache {}; if it predates this version, delete it and rerun `billiard spectrum`",
                path.display()
            )
        })?;
        c.check_compatible(&head).with_context(|| format!("cache {}", path.display()))?;
        c
    } else {
        EigenCache::new(head)
    };
    let (lo, hi) = cfg.window;
    let missing = cache.missing(lo, hi);
    if missing.is_empty() {
        return Ok((grid, cache));
    }
    let (cns, cnt) = cfg.coarse_grid();
    let coarse_forms = assemble_forms(&TensorGrid::new(profile, cns, cnt)?)?;
    let opts = cfg.solver();
    for (a, b) in missing {
        println!("solving [{}, {}] on {} x {} ({} unknowns)", fmt15(a), fmt15(b), cfg.ns, cfg.nt, forms.n());
        let fine = solve_eigenpairs(&forms, Window::Range { lo: a, hi: b }, &opts)?;
        let coarse = solve_eigenpairs(&coarse_forms, Window::Range { lo: a, hi: b }, &opts)?;
        println!(
            "  {} pairs, {} factorizations, {} clusters",
            fine.pairs.len(),
            fine.factorizations,
            fine.clusters.len()
        );
        cache.insert(&fine, &refinement_shifts(&fine, &coarse));
    }
    fs::create_dir_all(path.parent().unwrap_or(Path::new(".")))?;
    cache.save(&path)?;
    println!("cache {} holds {} pairs", path.display(), cache.len());
    Ok((grid, cache))
}

fn c0_for(cfg: &RunConfig, profile: &BilliardProfile, pairs: &[&EigenPair]) -> Result<Option<f64>> {
    if cfg.c0.is_some() {
        return Ok(cfg.c0);
    }
    let nus = pairs
        .iter()
        .map(|p| Ok(resonance::nu(p.energy, profile.l0, profile.b0)?.value))
        .collect::<billiard_core::Result<Vec<_>>>()?;
    Ok(resonance::choose_c0(&nus, cfg.c0_fraction))
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Status> {
    let (grid, cache) = ensure_spectrum(cfg)?;
    let profile = grid.profile();
    let (lo, hi) = cfg.window;
    let stored = cache.pairs_in(lo, hi);
    let pairs: Vec<&EigenPair> = stored.iter().map(|c| &c.pair).collect();
    let c0 = c0_for(cfg, profile, &pairs)?;
    let mut head: Vec<String> =
        ["index", "E", "residual", "shift", "nu", "argmin_k", "argmin_l"].iter().map(|s| s.to_string()).collect();
    head.extend(cfg.eps.iter().map(|e| format!("z_eps_{e}")));
    let mut t = CsvTable::new(&head);
    for c in &stored {
        let p = &c.pair;
        let nu = resonance::nu(p.energy, profile.l0, profile.b0)?;
        let mut row = vec![
            p.index.to_string(),
            fmt15(p.energy),
            fmt15(p.residual),
            c.shift.map(fmt15).unwrap_or_default(),
            fmt15(nu.value),
            nu.k.to_string(),
            nu.l.to_string(),
        ];
        for &e in &cfg.eps {
            row.push(match c0 {
                Some(c0) => resonance::in_z_eps(p.energy, e, c0, profile.l0, profile.b0)?.to_string(),
                None => String::new(),
            });
        }
        t.push_row(&row);
    }
    write(cfg, "spectrum.csv", &t.render())?;
    println!(
        "{} pairs in [{}, {}], c0 = {}",
        stored.len(),
        fmt15(lo),
        fmt15(hi),
        c0.map(fmt15).unwrap_or_else(|| "n/a".into())
    );
    Ok(Status::Pass)
}

fn cached(cfg: &RunConfig) -> Result<(TensorGrid, EigenCache)> {
    let path = cfg.cache_path();
    if !path.exists() {
        return Err(usage(format!(
            "no eigenpair cache at {}; run `billiard spectrum` with the same config first",
            path.display()
        )));
    }
    let profile = cfg.profile.build()?;
    let grid = TensorGrid::new(profile.clone(), cfg.ns, cfg.nt)?;
    let cache = EigenCache::load(&path).with_context(|| format!("reading cache {}", path.display()))?;
    let head = header(&profile, cfg.ns, cfg.nt, grid.interior_dofs(), cfg)?;
    cache.check_compatible(&head).with_context(|| format!("cache {}", path.display()))?;
    Ok((grid, cache))
}

/// Cached pairs in the window that passed the refinement check.
fn converged(cfg: &RunConfig, cache: &EigenCache) -> (Vec<EigenPair>, usize) {
    let (lo, hi) = cfg.window;
    let all = cache.pairs_in(lo, hi);
    let ok: Vec<EigenPair> =
        all.iter().filter(|c| c.shift.is_some_and(|s| s < cfg.converge_tol)).map(|c| c.pair.clone()).collect();
    let dropped = all.len() - ok.len();
    (ok, dropped)
}

fn require_wing(cfg: &RunConfig) -> Result<()> {
    if cfg.profile.kind == "constant-rectangle" {
        return Err(usage("the constant-rectangle fixture has no wing; bound sweeps need a stadium or power profile"));
    }
    Ok(())
}

fn sweep_config(cfg: &RunConfig, eps: f64) -> SweepConfig {
    SweepConfig {
        eps,
        c0: cfg.c0,
        c0_fraction: cfg.c0_fraction,
        m_large: cfg.m_large,
        m_small: cfg.m_small,
        b0: cfg.b0,
        e0: cfg.e0,
        flag_eps: cfg.eps.clone(),
        jobs: cfg.jobs(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Onedim,
    Forms,
    Bounds,
}

pub fn cmd_verify(cfg: &RunConfig, which: Suite) -> Result<Status> {
    match which {
        Suite::Onedim => {
            let oc = OnedimConfig {
                b0: cfg.onedim_b0,
                beta: cfg.beta,
                density: cfg.onedim_density,
                samples: cfg.onedim_samples,
                seed: cfg.onedim_seed,
                jobs: cfg.jobs(),
                ..OnedimConfig::default()
            };
            let suite = run_suite(&oc)?;
            write(cfg, "onedim.csv", &suite.to_csv())?;
            write(cfg, "onedim_assertions.txt", &lines(&suite.assertions))?;
            print_assertions(&suite.assertions);
            Ok(Status::from_pass(suite.passed()))
        }
        Suite::Forms => {
            let (grid, cache) = cached(cfg)?;
            let (lo, hi) = cfg.window;
            let pairs: Vec<EigenPair> = cache.pairs_in(lo, hi).into_iter().map(|c| c.pair.clone()).collect();
            if pairs.is_empty() {
                return Err(usage(format!("the cache has no pairs in [{}, {}]", fmt15(lo), fmt15(hi))));
            }
            let forms = assemble_forms(&grid)?;
            let fc = FormsConfig { jobs: cfg.jobs(), b: cfg.b0, ..FormsConfig::default() };
            let suite = run_forms_suite(&forms, &pairs, &fc)?;
            write(cfg, "forms.csv", &suite.to_csv())?;
            write(cfg, "forms_assertions.txt", &lines(&suite.assertions))?;
            print_assertions(&suite.assertions);
            Ok(Status::from_pass(suite.passed()))
        }
        Suite::Bounds => {
            require_wing(cfg)?;
            let (grid, cache) = cached(cfg)?;
            let (pairs, dropped) = converged(cfg, &cache);
            if dropped > 0 {
                println!("{dropped} pairs without a refinement certificate below {} left out", fmt15(cfg.converge_tol));
            }
            let Some(&eps) = cfg.eps.first() else { bail!(usage("eps list is empty")) };
            let report = theorem_sweep(&grid, &pairs, &sweep_config(cfg, eps))?;
            write(cfg, "bounds.csv", &report.to_csv())?;
            write(cfg, "bounds_summary.json", &report.summary_json(&cfg.echo()))?;
            print_assertions(&report.assertions);
            for w in &report.warnings {
                println!("warning: {w}");
            }
            if report.insufficient {
                println!("insufficient data: {} pairs in Z_eps", report.in_z_count);
                return Ok(Status::Insufficient);
            }
            Ok(Status::from_pass(report.passed()))
        }
    }
}

fn lines(assertions: &[Assertion]) -> String {
    assertions.iter().map(|a| a.line() + "\n").collect()
}

/// Spectrum for the window, the bound sweep for every `eps`, and the resonance table.
/// Everything it writes is informational, so it passes unless something errors.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Status> {
    require_wing(cfg)?;
    let (grid, cache) = ensure_spectrum(cfg)?;
    let profile = grid.profile();
    let (pairs, dropped) = converged(cfg, &cache);
    if dropped > 0 {
        println!("{dropped} pairs without a refinement certificate below {} left out", fmt15(cfg.converge_tol));
    }
    for &eps in &cfg.eps {
        let report = theorem_sweep(&grid, &pairs, &sweep_config(cfg, eps))?;
        let tag = eps.to_string();
        write(cfg, &format!("sweep_eps_{tag}.csv"), &report.to_csv())?;
        write(cfg, &format!("sweep_eps_{tag}.json"), &report.summary_json(&cfg.echo()))?;
        println!(
            "eps = {tag}: rho = {}, {} of {} pairs in Z, C_fit = {}, validation = {}",
            report.rho,
            report.in_z_count,
            report.rows.len(),
            report.c_fit.map(fmt15).unwrap_or_else(|| "n/a".into()),
            report.validation.map(fmt15).unwrap_or_else(|| "n/a".into()),
        );
    }
    let refs: Vec<&EigenPair> = pairs.iter().collect();
    if let Some(c0) = c0_for(cfg, profile, &refs)? {
        let beta = cfg.beta.unwrap_or(PI / (2.0 * profile.b0));
        let reports = pairs
            .iter()
            .map(|p| resonance_report(p.energy, profile.l0, profile.b0, &cfg.eps, c0, beta))
            .collect::<billiard_core::Result<Vec<_>>>()?;
        write(cfg, "resonance.csv", &reports_csv(&reports))?;
    }
    Ok(Status::Pass)
}
