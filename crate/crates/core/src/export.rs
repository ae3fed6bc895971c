//! Plain-text output helpers shared by the CSV and JSON writers.

use std::fmt::Write as _;

/// Formats `x` with 15 significant digits in scientific notation.
///
/// Rust's float formatting rounds the exact binary value half-to-even, so
/// the output is reproducible across platforms.
pub fn fmt15(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.14e}")
}

/// Minimal CSV builder: fixed header, rows of pre-formatted cells.
#[derive(Clone, Debug)]
pub struct CsvTable {
    header: Vec<String>,
    body: String,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|h| h.as_ref().to_string()).collect(), body: String::new() }
    }

    pub fn columns(&self) -> usize {
        self.header.len()
    }

    pub fn push_row<S: AsRef<str>>(&mut self, cells: &[S]) {
        assert_eq!(cells.len(), self.header.len(), "row width mismatch");
        let line = cells.iter().map(|c| c.as_ref()).collect::<Vec<_>>().join(",");
        let _ = writeln!(self.body, "{line}");
    }

    pub fn render(&self) -> String {
        format!("{}\n{}", self.header.join(","), self.body)
    }
}

/// One line of a verification suite. Informational lines never fail a run.
#[derive(Clone, Debug, serde::Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub informational: bool,
    pub detail: String,
}

impl Assertion {
    pub fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, informational: false, detail: detail.into() }
    }

    pub fn info(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, informational: true, detail: detail.into() }
    }

    /// `PASS`, `FAIL` or `INFO` followed by name and detail.
    pub fn line(&self) -> String {
        let tag = match (self.informational, self.passed) {
            (true, _) => "INFO",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        format!("{tag} {}: {}", self.name, self.detail)
    }
}

/// Whether every non-informational assertion passed.
pub fn all_passed(assertions: &[Assertion]) -> bool {
    assertions.iter().all(|a| a.informational || a.passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_significant_digits() {
        assert_eq!(fmt15(1.0), "1.00000000000000e0");
        assert_eq!(fmt15(12.337005501361698), "1.23370055013617e1");
        assert_eq!(fmt15(-0.5), "-5.00000000000000e-1");
        assert_eq!(fmt15(0.0), "0");
        let back: f64 = fmt15(std::f64::consts::PI).parse().unwrap();
        assert!((back - std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn csv_render() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push_row(&["1", "2"]);
        assert_eq!(t.render(), "a,b\n1,2\n");
        assert_eq!(CsvTable::new(&["x"]).render(), "x\n");
    }
}
