//! Check outcomes and their plain-text serializations.

use std::fmt::Write as _;

/// Outcome of a randomized property check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Result of a randomized check: the estimated constant, how hard we looked,
/// and the worst witness found (enough to re-evaluate it).
#[derive(Clone, Debug)]
pub struct CheckReport {
    /// Name of the inequality or ratio being estimated.
    pub property: String,
    pub estimated_constant: f64,
    pub trials: u64,
    /// Serialized inputs of the worst trial.
    pub worst_witness: String,
    pub master_seed: u64,
    pub verdict: Verdict,
    /// One row per trial for CSV output: (trial index, sampled ratio).
    pub rows: Vec<(u64, f64)>,
}

impl CheckReport {
    pub fn new(property: impl Into<String>, seed: u64) -> Self {
        CheckReport {
            property: property.into(),
            estimated_constant: f64::NAN,
            trials: 0,
            worst_witness: String::new(),
            master_seed: seed,
            verdict: Verdict::Inconclusive,
            rows: Vec::new(),
        }
    }

    /// Plain-text summary block (key = value lines, nested braces for the
    /// witness), stable across runs with the same seed.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "property = {}", self.property);
        let _ = writeln!(s, "estimated_constant = {}", fmt_g17(self.estimated_constant));
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "seed = {}", self.master_seed);
        let _ = writeln!(s, "worst_witness = {{ {} }}", self.worst_witness);
        let _ = writeln!(s, "verdict = {}", self.verdict.as_str());
        s
    }
}

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write rows as CSV with a header; all floats at 17 significant digits.
pub fn write_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_round_trips() {
        for v in [1.0 / 3.0, std::f64::consts::PI, 1e-300, -7.25] {
            let s = fmt_g17(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v, back, "{s}");
        }
    }

    #[test]
    fn summary_contains_fields() {
        let mut r = CheckReport::new("doubling ratio", 5);
        r.estimated_constant = 4.0;
        r.trials = 10;
        r.verdict = Verdict::Pass;
        let s = r.summary();
        assert!(s.contains("property = doubling ratio"));
        assert!(s.contains("verdict = pass"));
        assert!(s.contains("seed = 5"));
    }
}
