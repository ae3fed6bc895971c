//! Width profiles of partially rectangular billiards.
//!
//! A billiard is the region `{-B0 <= x <= B1, 0 <= y <= L(x)}` where `L` is
//! constant (`L0`) on the rectangular part `x <= 0` and non-increasing on the
//! wing `0 < x <= B1`. Near the junction the profile behaves like
//! `L0 - c_L x^gamma`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{param, Error, Result};

/// Number of samples used for the sup of `|L'|` when it is not known to be monotone.
pub const SUP_SAMPLES: usize = 2048;

type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ProfileKind {
    /// Circular-arc wing `sqrt(L0^2 - x^2)` cut by a vertical wall at `B1 = fraction * L0`.
    TruncatedQuarterStadium { truncation_fraction: f64 },
    /// `L0 - c_L x^gamma` on the wing.
    Power,
    /// `L == L0` everywhere. Solver fixture only.
    ConstantRectangle,
    /// Arbitrary width function, used to exercise validation.
    Custom { width: ProfileFn, slope: ProfileFn },
}

impl ProfileKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProfileKind::TruncatedQuarterStadium { .. } => "truncated-quarter-stadium",
            ProfileKind::Power => "power-profile",
            ProfileKind::ConstantRectangle => "constant-rectangle",
            ProfileKind::Custom { .. } => "custom",
        }
    }
}

impl fmt::Debug for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileKind::TruncatedQuarterStadium { truncation_fraction } => {
                f.debug_struct("TruncatedQuarterStadium").field("truncation_fraction", truncation_fraction).finish()
            }
            other => f.write_str(other.name()),
        }
    }
}

/// Width function `L` on `[-B0, B1]` together with its asymptotic data.
#[derive(Clone, Debug)]
pub struct BilliardProfile {
    pub l0: f64,
    pub b0: f64,
    pub b1: f64,
    pub gamma: f64,
    pub c_l: f64,
    pub kind: ProfileKind,
}

impl BilliardProfile {
    /// Quarter stadium with rectangle depth `b0`; the arc is truncated at
    /// `B1 = truncation_fraction * L0` so that `L(B1) > 0`.
    pub fn truncated_quarter_stadium(l0: f64, b0: f64, truncation_fraction: f64) -> Result<Self> {
        if !(l0 > 0.0) || !(b0 > 0.0) {
            return param(format!("L0 and B0 must be positive (got L0={l0}, B0={b0})"));
        }
        if !(truncation_fraction > 0.5 && truncation_fraction <= 0.99) {
            return param(format!("truncation_fraction must lie in (0.5, 0.99], got {truncation_fraction}"));
        }
        Ok(Self {
            l0,
            b0,
            b1: truncation_fraction * l0,
            gamma: 2.0,
            c_l: 1.0 / (2.0 * l0),
            kind: ProfileKind::TruncatedQuarterStadium { truncation_fraction },
        })
    }

    pub fn power(l0: f64, b0: f64, b1: f64, gamma: f64, c_l: f64) -> Result<Self> {
        if !(l0 > 0.0 && b0 > 0.0 && b1 > 0.0) {
            return param(format!("L0, B0, B1 must be positive (got {l0}, {b0}, {b1})"));
        }
        if !(gamma >= 1.5) {
            return param(format!("gamma must satisfy gamma >= 3/2, got {gamma}"));
        }
        if !(c_l > 0.0) {
            return param(format!("c_L must be positive, got {c_l}"));
        }
        if l0 - c_l * b1.powf(gamma) <= 0.0 {
            let critical = (l0 / c_l).powf(1.0 / gamma);
            return param(format!("profile reaches zero at x = {critical:.6} before the wall B1 = {b1}"));
        }
        Ok(Self { l0, b0, b1, gamma, c_l, kind: ProfileKind::Power })
    }

    /// Plain rectangle `[-B0, B1] x [0, L0]`; violates the wing conditions on purpose.
    pub fn constant_rectangle(l0: f64, b0: f64, b1: f64) -> Result<Self> {
        if !(l0 > 0.0 && b0 > 0.0 && b1 > 0.0) {
            return param(format!("L0, B0, B1 must be positive (got {l0}, {b0}, {b1})"));
        }
        Ok(Self { l0, b0, b1, gamma: 0.0, c_l: 0.0, kind: ProfileKind::ConstantRectangle })
    }

    /// Profile with caller-supplied wing. `width` and `slope` are only
    /// consulted for `x > 0`.
    pub fn custom<W, S>(l0: f64, b0: f64, b1: f64, gamma: f64, c_l: f64, width: W, slope: S) -> Self
    where
        W: Fn(f64) -> f64 + Send + Sync + 'static,
        S: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { l0, b0, b1, gamma, c_l, kind: ProfileKind::Custom { width: Arc::new(width), slope: Arc::new(slope) } }
    }

    pub fn is_fixture(&self) -> bool {
        matches!(self.kind, ProfileKind::ConstantRectangle)
    }

    /// `L(x)`.
    pub fn width(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.l0;
        }
        match &self.kind {
            ProfileKind::TruncatedQuarterStadium { .. } => (self.l0 * self.l0 - x * x).sqrt(),
            ProfileKind::Power => self.l0 - self.c_l * x.powf(self.gamma),
            ProfileKind::ConstantRectangle => self.l0,
            ProfileKind::Custom { width, .. } => width(x),
        }
    }

    /// `L'(x)`.
    pub fn width_slope(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            ProfileKind::TruncatedQuarterStadium { .. } => -x / (self.l0 * self.l0 - x * x).sqrt(),
            ProfileKind::Power => -self.c_l * self.gamma * x.powf(self.gamma - 1.0),
            ProfileKind::ConstantRectangle => 0.0,
            ProfileKind::Custom { slope, .. } => slope(x),
        }
    }

    /// Whether `|L'|` is known to be non-decreasing on the wing.
    fn slope_is_monotone(&self) -> bool {
        match self.kind {
            ProfileKind::TruncatedQuarterStadium { .. } | ProfileKind::ConstantRectangle => true,
            ProfileKind::Power => self.gamma >= 1.0,
            ProfileKind::Custom { .. } => false,
        }
    }

    /// Both variants of the sup entering the form comparison constant:
    /// `(sup |L'|, sup |L'|^2)` over `(0, b]`.
    pub fn slope_sups(&self, b: f64) -> (f64, f64) {
        if self.slope_is_monotone() {
            let s = self.width_slope(b).abs();
            return (s, s * s);
        }
        let mut sup = 0.0_f64;
        let mut sup_sq = 0.0_f64;
        for i in 1..=SUP_SAMPLES {
            let x = b * i as f64 / SUP_SAMPLES as f64;
            let s = self.width_slope(x).abs();
            sup = sup.max(s);
            sup_sq = sup_sq.max(s * s);
        }
        (sup, sup_sq)
    }

    /// `sup_(0,b] |L'| + sup_(0,b] |L'|^2`.
    pub fn delta_b(&self, b: f64) -> Result<f64> {
        if !(b > 0.0 && b < self.b1) {
            return param(format!("b must lie in (0, B1) = (0, {}), got {b}", self.b1));
        }
        let (sup, sup_sq) = self.slope_sups(b);
        Ok(sup + sup_sq)
    }

    /// Flat key-value record used in config files and cache headers.
    pub fn record(&self) -> Result<Vec<(&'static str, String)>> {
        let frac = match &self.kind {
            ProfileKind::TruncatedQuarterStadium { truncation_fraction } => *truncation_fraction,
            ProfileKind::Custom { .. } => return Err(Error::Parameter("custom profiles cannot be serialized".into())),
            _ => 0.0,
        };
        Ok(vec![
            ("kind", self.kind.name().to_string()),
            ("L0", crate::export::fmt15(self.l0)),
            ("B0", crate::export::fmt15(self.b0)),
            ("B1", crate::export::fmt15(self.b1)),
            ("gamma", crate::export::fmt15(self.gamma)),
            ("c_L", crate::export::fmt15(self.c_l)),
            ("truncation_fraction", crate::export::fmt15(frac)),
        ])
    }

    /// Rebuilds a profile from the fields of [`record`](Self::record).
    pub fn from_record(
        kind: &str,
        l0: f64,
        b0: f64,
        b1: f64,
        gamma: f64,
        c_l: f64,
        truncation_fraction: f64,
    ) -> Result<Self> {
        match kind {
            "truncated-quarter-stadium" => Self::truncated_quarter_stadium(l0, b0, truncation_fraction),
            "power-profile" => Self::power(l0, b0, b1, gamma, c_l),
            "constant-rectangle" => Self::constant_rectangle(l0, b0, b1),
            other => param(format!("unknown profile kind '{other}'")),
        }
    }

    /// Runs every profile check. Never fails; failures are carried in the report.
    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    /// Needed by the discretization (as opposed to the estimate's hypotheses).
    pub structural: bool,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub kind: String,
    pub checks: Vec<Check>,
    /// Log-log slope of `L0 - L(x)` on `[1e-4, 1e-2]`.
    pub measured_gamma: Option<f64>,
    /// Log-log slope of `-L'(x)` on `[1e-4, 1e-2]`.
    pub measured_slope_exponent: Option<f64>,
    /// `(sup|L'|, sup|L'|^2)` over the whole wing (both variants of the constant).
    pub slope_sups: (f64, f64),
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// The subset needed to build a grid over the profile.
    pub fn structurally_sound(&self) -> bool {
        self.checks.iter().filter(|c| c.structural).all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(_, y)| **y > 0.0 && y.is_finite()).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Some(crate::stats::ols_slope(&lx, &ly))
}

fn validate(p: &BilliardProfile) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, structural: bool, passed: bool, detail: String| {
        checks.push(Check { name: name.to_string(), structural, passed, detail })
    };

    let dims_ok = p.l0 > 0.0 && p.b0 > 0.0 && p.b1 > 0.0;
    push("positive dimensions", true, dims_ok, format!("L0={}, B0={}, B1={}", p.l0, p.b0, p.b1));

    let rect_ok = (0..=64).all(|i| {
        let x = -p.b0 * i as f64 / 64.0;
        p.width(x) == p.l0
    });
    push("L = L0 on the rectangle", true, rect_ok, "sampled 65 points on [-B0, 0]".into());

    const MONO: usize = 4096;
    let mut worst_rise = 0.0_f64;
    let mut rise_at = 0.0;
    let mut prev = p.width(0.0);
    let mut min_width = f64::INFINITY;
    for i in 1..=MONO {
        let x = p.b1 * i as f64 / MONO as f64;
        let w = p.width(x);
        min_width = min_width.min(w);
        if w - prev > worst_rise {
            worst_rise = w - prev;
            rise_at = x;
        }
        prev = w;
    }
    let mono_ok = worst_rise <= 1e-12 * p.l0;
    push(
        "non-increasing on the wing",
        true,
        mono_ok,
        if mono_ok {
            format!("{MONO} samples on (0, B1]")
        } else {
            format!("L increases by {worst_rise:.3e} near x = {rise_at:.6}")
        },
    );

    let end = p.width(p.b1);
    push("L(B1) > 0", true, end > 0.0 && min_width > 0.0, format!("L(B1) = {end:.6}, min over wing = {min_width:.6}"));

    let continuity = (p.width(-1e-12) - p.width(1e-12)).abs();
    push(
        "continuous at the junction",
        true,
        continuity <= 1e-9 * p.l0,
        format!("|L(-1e-12) - L(1e-12)| = {continuity:.3e}"),
    );

    let slope_end = p.width_slope(p.b1);
    push("L' has a negative limit at B1", false, slope_end < 0.0, format!("L'(B1) = {slope_end:.6}"));

    push(
        "gamma >= 3/2",
        false,
        p.gamma >= 1.5,
        if p.is_fixture() {
            "constant-rectangle fixture: excluded from estimate sweeps".into()
        } else {
            format!("gamma = {}", p.gamma)
        },
    );
    push("c_L > 0", false, p.c_l > 0.0, format!("c_L = {}", p.c_l));

    let n = 41;
    let xs: Vec<f64> = (0..n).map(|i| 10f64.powf(-4.0 + 2.0 * i as f64 / (n - 1) as f64)).collect();
    let drop: Vec<f64> = xs.iter().map(|&x| p.l0 - p.width(x)).collect();
    let neg_slope: Vec<f64> = xs.iter().map(|&x| -p.width_slope(x)).collect();
    let measured_gamma = loglog_slope(&xs, &drop);
    let measured_slope_exponent = loglog_slope(&xs, &neg_slope);
    let g_ok = measured_gamma.is_some_and(|m| (m - p.gamma).abs() <= 0.02);
    push(
        "L0 - L(x) ~ c_L x^gamma near 0",
        false,
        g_ok,
        format!("log-log slope {measured_gamma:?} vs gamma {}", p.gamma),
    );
    let s_ok = measured_slope_exponent.is_some_and(|m| (m - (p.gamma - 1.0)).abs() <= 0.02);
    push(
        "-L'(x) ~ c_L gamma x^(gamma-1) near 0",
        false,
        s_ok,
        format!("log-log slope {measured_slope_exponent:?} vs gamma-1 = {}", p.gamma - 1.0),
    );
    if p.c_l > 0.0 {
        let x = 1e-4;
        let lead = (p.l0 - p.width(x)) / (p.c_l * x.powf(p.gamma));
        let lead_slope = -p.width_slope(x) / (p.c_l * p.gamma * x.powf(p.gamma - 1.0));
        push(
            "leading coefficient c_L",
            false,
            (lead - 1.0).abs() < 1e-2 && (lead_slope - 1.0).abs() < 1e-2,
            format!("ratios at x=1e-4: {lead:.6}, {lead_slope:.6}"),
        );
    }

    ValidationReport {
        kind: p.kind.name().to_string(),
        checks,
        measured_gamma,
        measured_slope_exponent,
        slope_sups: p.slope_sups(p.b1 * (1.0 - 1e-12)),
    }
}
