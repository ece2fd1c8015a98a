use std::fmt::Write as _;

/// One sample of an inequality written as `lhs ≤ base + C · coef (+ slack)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerSample {
    pub r: f64,
    /// Sweep parameter (δ, α, η₀, …); `NaN` when unused.
    pub param: f64,
    pub lhs: f64,
    pub base: f64,
    pub coef: f64,
    /// Numerical allowance for quadrature and finite-difference noise.
    pub slack: f64,
}

impl LedgerSample {
    pub fn new(r: f64, param: f64, lhs: f64, base: f64, coef: f64, slack: f64) -> Self {
        Self {
            r,
            param,
            lhs,
            base,
            coef,
            slack,
        }
    }

    /// Right-hand side for a given constant.
    pub fn rhs(&self, c: f64) -> f64 {
        self.base + c * self.coef
    }
}

/// Fitted constant and violations for one named inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub name: String,
    pub samples: Vec<LedgerSample>,
    /// Smallest admissible `C ≥ 0`; infinite when violations exist.
    pub min_c: f64,
    /// Largest admissible `C` (from samples with negative `coef`).
    pub max_c: f64,
    /// Indices into `samples` that no `C ≥ 0` can satisfy.
    pub violations: Vec<usize>,
}

impl LedgerEntry {
    /// Fit the minimal constant over all samples.
    pub fn fit(name: impl Into<String>, samples: Vec<LedgerSample>) -> Self {
        let mut lower: f64 = 0.0;
        let mut upper = f64::INFINITY;
        let mut violations = Vec::new();
        for (k, s) in samples.iter().enumerate() {
            let excess = s.lhs - s.base - s.slack;
            if !(s.lhs.is_finite() && s.base.is_finite() && s.coef.is_finite()) {
                violations.push(k);
            } else if s.coef > 0.0 {
                lower = lower.max(excess / s.coef);
            } else if s.coef < 0.0 {
                upper = upper.min(excess / s.coef);
            } else if excess > 0.0 {
                violations.push(k);
            }
        }
        if lower > upper {
            for (k, s) in samples.iter().enumerate() {
                if s.coef < 0.0 && (s.lhs - s.base - s.slack) / s.coef < lower && !violations.contains(&k) {
                    violations.push(k);
                }
            }
            violations.sort_unstable();
        }
        let min_c = if violations.is_empty() { lower } else { f64::INFINITY };
        Self {
            name: name.into(),
            samples,
            min_c,
            max_c: upper,
            violations,
        }
    }

    /// Refit one constant over the union of several entries' samples.
    pub fn combine(name: impl Into<String>, entries: &[&LedgerEntry]) -> Self {
        let samples = entries.iter().flat_map(|e| e.samples.iter().copied()).collect();
        Self::fit(name, samples)
    }

    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    /// Largest `|lhs − base| / (|lhs| + |base| + tiny)` over samples.
    pub fn max_relative_gap(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| (s.lhs - s.base).abs() / (s.lhs.abs() + s.base.abs() + 1e-300))
            .fold(0.0, f64::max)
    }
}

/// Named inequality checks of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InequalityLedger {
    pub entries: Vec<LedgerEntry>,
}

impl InequalityLedger {
    pub fn push(&mut self, entry: LedgerEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, other: InequalityLedger) {
        self.entries.extend(other.entries);
    }

    pub fn get(&self, name: &str) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(LedgerEntry::holds)
    }

    /// CSV with one row per sample.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("inequality,r,param,lhs,base,coef,slack,min_C,violated\n");
        for e in &self.entries {
            for (k, smp) in e.samples.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                    e.name,
                    smp.r,
                    smp.param,
                    smp.lhs,
                    smp.base,
                    smp.coef,
                    smp.slack,
                    e.min_c,
                    e.violations.contains(&k)
                );
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_minimal_constant() {
        let e = LedgerEntry::fit(
            "t",
            vec![
                LedgerSample::new(1.0, f64::NAN, 2.0, 0.0, 1.0, 0.0),
                LedgerSample::new(0.5, f64::NAN, 3.0, 1.0, 4.0, 0.0),
            ],
        );
        assert_eq!(e.min_c, 2.0);
        assert!(e.holds());
    }

    #[test]
    fn zero_coefficient_violation() {
        let e = LedgerEntry::fit("t", vec![LedgerSample::new(1.0, f64::NAN, 1.0, 0.0, 0.0, 1e-3)]);
        assert!(!e.holds());
        assert!(e.min_c.is_infinite());
    }

    #[test]
    fn negative_coefficient_caps_constant() {
        let e = LedgerEntry::fit(
            "t",
            vec![
                LedgerSample::new(1.0, f64::NAN, 1.0, 0.0, 1.0, 0.0),
                LedgerSample::new(1.0, f64::NAN, -3.0, 0.0, -1.0, 0.0),
            ],
        );
        assert_eq!((e.min_c, e.max_c), (1.0, 3.0));
        let bad = LedgerEntry::fit(
            "t",
            vec![
                LedgerSample::new(1.0, f64::NAN, 5.0, 0.0, 1.0, 0.0),
                LedgerSample::new(1.0, f64::NAN, -3.0, 0.0, -1.0, 0.0),
            ],
        );
        assert_eq!(bad.violations, vec![1]);
    }
}
