//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Every key is optional; unknown or repeated keys are rejected with the
//! line number. Lists are comma separated; `auto` leaves a value to be
//! chosen at run time.
//!
//! ```text
//! profile.kind = truncated-quarter-stadium
//! profile.L0 = 1
//! profile.B0 = 2
//! profile.truncation_fraction = 0.95
//! grid.ns = 590
//! grid.nt = 200
//! window = 200, 1500
//! eps = 0, 0.0625, 0.125
//! c0 = auto
//! ```

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::discretize::SolverOptions;
use crate::error::{Error, Result};
use crate::export::fmt15;
use crate::geometry::BilliardProfile;

/// Documented keys, in the order they are echoed.
pub const KEYS: &[(&str, &str)] = &[
    ("profile.kind", "truncated-quarter-stadium | power-profile | constant-rectangle"),
    ("profile.L0", "rectangle height"),
    ("profile.B0", "rectangle depth"),
    ("profile.B1", "wing depth (power-profile, constant-rectangle)"),
    ("profile.gamma", "wing exponent (power-profile)"),
    ("profile.c_L", "wing coefficient (power-profile)"),
    ("profile.truncation_fraction", "B1 / L0 (truncated-quarter-stadium)"),
    ("grid.ns", "s-cells"),
    ("grid.nt", "t-cells"),
    ("coarse.ns", "s-cells of the refinement check grid"),
    ("coarse.nt", "t-cells of the refinement check grid"),
    ("converge_tol", "largest relative eigenvalue shift counted as converged"),
    ("solver.residual_tol", "relative residual contract"),
    ("solver.ritz_tol", "Lanczos convergence threshold"),
    ("solver.seed", "Lanczos start vector seed"),
    ("window", "energy window lo, hi"),
    ("eps", "non-resonance exponents; the first drives the sweep"),
    ("c0", "Z_eps constant or auto"),
    ("c0_fraction", "share of pairs kept in Z_0 when c0 = auto"),
    ("beta", "small-regime threshold or auto (pi / 2 B0)"),
    ("m_large", "b_large = m_large E^-alpha_large"),
    ("m_small", "b_small = m_small E^-alpha_small"),
    ("b0", "upper bound on b or auto (B1 / 4)"),
    ("e0", "lowest energy in the sweep or auto"),
    ("onedim.samples", "manufactured solutions per (z, b) cell"),
    ("onedim.density", "1D mesh cells per unit length"),
    ("onedim.seed", "1D suite seed"),
    ("onedim.B0", "rectangle depth of the 1D model"),
    ("jobs", "worker threads or auto"),
    ("output.dir", "directory for CSV and JSON output"),
    ("cache.path", "eigenpair cache file, relative to output.dir unless absolute"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSpec {
    pub kind: String,
    pub l0: f64,
    pub b0: f64,
    pub b1: f64,
    pub gamma: f64,
    pub c_l: f64,
    pub truncation_fraction: f64,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<BilliardProfile> {
        BilliardProfile::from_record(
            &self.kind,
            self.l0,
            self.b0,
            self.b1,
            self.gamma,
            self.c_l,
            self.truncation_fraction,
        )
    }

    /// Like [`build`](Self::build), but a power profile whose parameters the
    /// constructor refuses is still produced, so that validation can name
    /// the condition it breaks.
    pub fn build_for_validation(&self) -> Result<BilliardProfile> {
        match self.build() {
            Ok(p) => Ok(p),
            Err(_) if self.kind == "power-profile" => {
                let (l0, g, c) = (self.l0, self.gamma, self.c_l);
                Ok(BilliardProfile::custom(
                    l0,
                    self.b0,
                    self.b1,
                    g,
                    c,
                    move |x| l0 - c * x.powf(g),
                    move |x| -c * g * x.powf(g - 1.0),
                ))
            }
            Err(e) => Err(e),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub profile: ProfileSpec,
    pub ns: usize,
    pub nt: usize,
    pub coarse_ns: Option<usize>,
    pub coarse_nt: Option<usize>,
    pub converge_tol: f64,
    pub residual_tol: f64,
    pub ritz_tol: f64,
    pub seed: u64,
    pub window: (f64, f64),
    pub eps: Vec<f64>,
    pub c0: Option<f64>,
    pub c0_fraction: f64,
    pub beta: Option<f64>,
    pub m_large: f64,
    pub m_small: f64,
    pub b0: Option<f64>,
    pub e0: Option<f64>,
    pub onedim_samples: usize,
    pub onedim_density: f64,
    pub onedim_seed: u64,
    pub onedim_b0: f64,
    pub jobs: Option<usize>,
    pub out_dir: PathBuf,
    pub cache: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solver = SolverOptions::default();
        RunConfig {
            profile: ProfileSpec {
                kind: "truncated-quarter-stadium".into(),
                l0: 1.0,
                b0: 2.0,
                b1: 0.95,
                gamma: 2.0,
                c_l: 0.5,
                truncation_fraction: 0.95,
            },
            ns: 590,
            nt: 200,
            coarse_ns: None,
            coarse_nt: None,
            converge_tol: 0.005,
            residual_tol: solver.residual_tol,
            ritz_tol: solver.ritz_tol,
            seed: solver.seed,
            window: (200.0, 1500.0),
            eps: vec![0.0, 0.0625, 0.125],
            c0: None,
            c0_fraction: 0.3,
            beta: None,
            m_large: 1.0,
            m_small: 1.0,
            b0: None,
            e0: None,
            onedim_samples: 50,
            onedim_density: 64.0,
            onedim_seed: 0x0d1e,
            onedim_b0: 1.0,
            jobs: None,
            out_dir: PathBuf::from("out"),
            cache: PathBuf::from("eigenpairs.cache"),
        }
    }
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

fn parse<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(line, format!("{key}: cannot parse '{v}'")))
}

fn auto<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Option<T>> {
    if v.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse(line, key, v).map(Some)
    }
}

fn list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|x| parse(line, key, x.trim())).collect()
}

fn show_auto<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_else(|| "auto".into())
}

fn show_f(v: Option<f64>) -> String {
    v.map(fmt15).unwrap_or_else(|| "auto".into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) =
                body.split_once('=').ok_or_else(|| bad(line, format!("expected 'key = value', found '{body}'")))?;
            let (key, v) = (key.trim(), value.trim());
            let Some(&(known, _)) = KEYS.iter().find(|(k, _)| *k == key) else {
                return Err(bad(line, format!("unknown key '{key}'")));
            };
            if seen.contains(&known) {
                return Err(bad(line, format!("key '{key}' given twice")));
            }
            seen.push(known);
            let p = &mut cfg.profile;
            match known {
                "profile.kind" => p.kind = v.to_string(),
                "profile.L0" => p.l0 = parse(line, key, v)?,
                "profile.B0" => p.b0 = parse(line, key, v)?,
                "profile.B1" => p.b1 = parse(line, key, v)?,
                "profile.gamma" => p.gamma = parse(line, key, v)?,
                "profile.c_L" => p.c_l = parse(line, key, v)?,
                "profile.truncation_fraction" => p.truncation_fraction = parse(line, key, v)?,
                "grid.ns" => cfg.ns = parse(line, key, v)?,
                "grid.nt" => cfg.nt = parse(line, key, v)?,
                "coarse.ns" => cfg.coarse_ns = auto(line, key, v)?,
                "coarse.nt" => cfg.coarse_nt = auto(line, key, v)?,
                "converge_tol" => cfg.converge_tol = parse(line, key, v)?,
                "solver.residual_tol" => cfg.residual_tol = parse(line, key, v)?,
                "solver.ritz_tol" => cfg.ritz_tol = parse(line, key, v)?,
                "solver.seed" => cfg.seed = parse(line, key, v)?,
                "window" => {
                    let w = list(line, key, v)?;
                    if w.len() != 2 {
                        return Err(bad(line, format!("window needs two values, got {}", w.len())));
                    }
                    cfg.window = (w[0], w[1]);
                }
                "eps" => cfg.eps = list(line, key, v)?,
                "c0" => cfg.c0 = auto(line, key, v)?,
                "c0_fraction" => cfg.c0_fraction = parse(line, key, v)?,
                "beta" => cfg.beta = auto(line, key, v)?,
                "m_large" => cfg.m_large = parse(line, key, v)?,
                "m_small" => cfg.m_small = parse(line, key, v)?,
                "b0" => cfg.b0 = auto(line, key, v)?,
                "e0" => cfg.e0 = auto(line, key, v)?,
                "onedim.samples" => cfg.onedim_samples = parse(line, key, v)?,
                "onedim.density" => cfg.onedim_density = parse(line, key, v)?,
                "onedim.seed" => cfg.onedim_seed = parse(line, key, v)?,
                "onedim.B0" => cfg.onedim_b0 = parse(line, key, v)?,
                "jobs" => cfg.jobs = auto(line, key, v)?,
                "output.dir" => cfg.out_dir = PathBuf::from(v),
                "cache.path" => cfg.cache = PathBuf::from(v),
                _ => unreachable!("every documented key is handled"),
            }
            if let Some(at) = range_error(&cfg, known) {
                return Err(bad(line, at));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            residual_tol: self.residual_tol,
            ritz_tol: self.ritz_tol,
            seed: self.seed,
            ..SolverOptions::default()
        }
    }

    /// Refinement grid, half the resolution of the main grid by default.
    pub fn coarse_grid(&self) -> (usize, usize) {
        (self.coarse_ns.unwrap_or(self.ns / 2), self.coarse_nt.unwrap_or(self.nt / 2))
    }

    /// Cache location with a relative `cache.path` taken inside `output.dir`.
    pub fn cache_path(&self) -> PathBuf {
        self.out_dir.join(&self.cache)
    }

    pub fn jobs(&self) -> usize {
        self.jobs.unwrap_or_else(crate::parallel::default_jobs).max(1)
    }

    /// Every key with its effective value, in documentation order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let p = &self.profile;
        let (cns, cnt) = self.coarse_grid();
        let vals = vec![
            p.kind.clone(),
            fmt15(p.l0),
            fmt15(p.b0),
            fmt15(p.b1),
            fmt15(p.gamma),
            fmt15(p.c_l),
            fmt15(p.truncation_fraction),
            self.ns.to_string(),
            self.nt.to_string(),
            cns.to_string(),
            cnt.to_string(),
            fmt15(self.converge_tol),
            fmt15(self.residual_tol),
            fmt15(self.ritz_tol),
            self.seed.to_string(),
            format!("{}, {}", fmt15(self.window.0), fmt15(self.window.1)),
            self.eps.iter().map(|e| fmt15(*e)).collect::<Vec<_>>().join(", "),
            show_f(self.c0),
            fmt15(self.c0_fraction),
            show_f(self.beta),
            fmt15(self.m_large),
            fmt15(self.m_small),
            show_f(self.b0),
            show_f(self.e0),
            self.onedim_samples.to_string(),
            fmt15(self.onedim_density),
            self.onedim_seed.to_string(),
            fmt15(self.onedim_b0),
            show_auto(&self.jobs),
            self.out_dir.display().to_string(),
            self.cache.display().to_string(),
        ];
        KEYS.iter().zip(vals).map(|((k, _), v)| (k.to_string(), v)).collect()
    }

    /// The echo as config text; parsing it back gives an equal config.
    pub fn to_text(&self) -> String {
        self.echo().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Range checks for the value just set under `key`.
fn range_error(cfg: &RunConfig, key: &str) -> Option<String> {
    let pos = |x: f64| x > 0.0 && x.is_finite();
    let ok = match key {
        "grid.ns" | "grid.nt" => cfg.ns >= 8 && cfg.nt >= 8,
        "coarse.ns" | "coarse.nt" => cfg.coarse_ns.is_none_or(|n| n >= 8) && cfg.coarse_nt.is_none_or(|n| n >= 8),
        "converge_tol" | "solver.residual_tol" | "solver.ritz_tol" => {
            pos(cfg.converge_tol) && pos(cfg.residual_tol) && pos(cfg.ritz_tol)
        }
        "window" => cfg.window.0 >= 0.0 && cfg.window.0 < cfg.window.1 && cfg.window.1.is_finite(),
        "eps" => !cfg.eps.is_empty() && cfg.eps.iter().all(|e| *e >= 0.0 && e.is_finite()),
        "c0" => cfg.c0.is_none_or(pos),
        "c0_fraction" => cfg.c0_fraction > 0.0 && cfg.c0_fraction <= 1.0,
        "beta" => cfg.beta.is_none_or(pos),
        "m_large" | "m_small" => pos(cfg.m_large) && pos(cfg.m_small),
        "b0" => cfg.b0.is_none_or(pos),
        "e0" => cfg.e0.is_none_or(pos),
        "onedim.samples" => cfg.onedim_samples >= 1,
        "onedim.density" => cfg.onedim_density >= 64.0,
        "onedim.B0" => pos(cfg.onedim_b0),
        "jobs" => cfg.jobs.is_none_or(|j| j >= 1),
        _ => true,
    };
    (!ok).then(|| format!("{key} is out of range"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(
            RunConfig::parse(&cfg.to_text()).unwrap(),
            RunConfig { coarse_ns: Some(295), coarse_nt: Some(100), ..cfg.clone() }
        );
        assert_eq!(RunConfig::parse("").unwrap(), cfg);
        assert!(cfg.profile.build().is_ok());
    }

    #[test]
    fn values_and_comments() {
        let text = "# fixture\nprofile.kind = constant-rectangle\nprofile.B1 = 1  # wing\n\nwindow = 10, 60\neps = 0\nc0 = 0.5\njobs = 2\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.profile.kind, "constant-rectangle");
        assert_eq!(cfg.window, (10.0, 60.0));
        assert_eq!(cfg.eps, vec![0.0]);
        assert_eq!(cfg.c0, Some(0.5));
        assert_eq!(cfg.jobs(), 2);
        assert!(cfg.profile.build().unwrap().is_fixture());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let line_of = |text: &str| match RunConfig::parse(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(line_of("grid.ns = 100\n\ngrid.bogus = 3\n"), 3);
        assert_eq!(line_of("grid.ns = ten\n"), 1);
        assert_eq!(line_of("jobs = 1\njobs = 2\n"), 2);
        assert_eq!(line_of("# c\nwindow = 5\n"), 2);
        assert_eq!(line_of("window = 9, 3\n"), 1);
        assert_eq!(line_of("no equals sign\n"), 1);
        assert_eq!(line_of("onedim.density = 10\n"), 1);
    }

    #[test]
    fn out_of_range_gamma_is_still_validated() {
        let cfg =
            RunConfig::parse("profile.kind = power-profile\nprofile.gamma = 1.4\nprofile.B1 = 0.5\nprofile.c_L = 1\n")
                .unwrap();
        assert!(cfg.profile.build().is_err());
        let p = cfg.profile.build_for_validation().unwrap();
        let report = p.validate();
        assert!(!report.all_passed());
        assert!(
            report.failures().any(|c| c.name.contains("gamma")),
            "{:?}",
            report.failures().map(|c| &c.name).collect::<Vec<_>>()
        );
    }
}
